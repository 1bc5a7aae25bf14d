//! Rename-invariant normalization used for deduplication and sample ids.

use std::collections::HashMap;

use crate::syntax::{tokenize, SyntaxError, Token, TokenKind};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

/// Whether the identifier at `i` is in variable position (not a callee).
pub fn is_variable_token(tokens: &[Token], i: usize) -> bool {
    tokens[i].kind == TokenKind::Identifier
        && !tokens.get(i + 1).is_some_and(|t| t.is_punct("("))
}

/// Token lexemes with every variable replaced by its first-occurrence index.
pub fn normalized_tokens(code: &str) -> Result<Vec<String>, SyntaxError> {
    let tokens = tokenize(code)?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        if is_variable_token(&tokens, i) {
            let next = index.len();
            let k = *index.entry(t.lexeme.as_str()).or_insert(next);
            out.push(format!("v{k}"));
        } else {
            out.push(t.lexeme.clone());
        }
    }
    Ok(out)
}

/// 16 hex chars of FNV-1a over the normalized token sequence.
pub fn normalized_hash(code: &str) -> Result<String, SyntaxError> {
    let joined = normalized_tokens(code)?.join(" ");
    Ok(format!("{:016x}", fnv1a64(joined.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn rename_invariant() {
        let a = normalized_hash("for (i = 0; i < n; i++) {\ns += a[i];\n}").unwrap();
        let b = normalized_hash("for (k = 0; k < m; k++) {\nt += x[k];\n}").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn constants_and_callees_matter() {
        let a = normalized_hash("for (i = 0; i < 10; i++) {\nx = f(i);\n}").unwrap();
        let b = normalized_hash("for (i = 0; i < 20; i++) {\nx = f(i);\n}").unwrap();
        let c = normalized_hash("for (i = 0; i < 10; i++) {\nx = g(i);\n}").unwrap();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
