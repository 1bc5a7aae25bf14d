use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    TranslationUnit,
    FunctionDef,
    Declaration,
    Declarator,
    CompoundStmt,
    ForStmt,
    WhileStmt,
    IfStmt,
    ExprStmt,
    ReturnStmt,
    Assign,
    BinaryOp,
    UnaryOp,
    PostfixOp,
    Call,
    ArrayIndex,
    Identifier,
    Constant,
    PragmaDirective,
    /// Placeholder for an omitted `for` header part, an empty statement or an
    /// unsized array dimension.
    Empty,
}

impl NodeKind {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::Declaration
                | NodeKind::CompoundStmt
                | NodeKind::ForStmt
                | NodeKind::WhileStmt
                | NodeKind::IfStmt
                | NodeKind::ExprStmt
                | NodeKind::ReturnStmt
        )
    }
}

/// Kind-specific payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attrs {
    None,
    /// Identifier name or called function name.
    Name(String),
    /// Operator symbol for `Assign`, `BinaryOp`, `UnaryOp`, `PostfixOp`.
    Op(String),
    /// Base type words of a declaration, e.g. `unsigned long`.
    Type(String),
    /// Constant lexeme.
    Literal(String),
    /// Pragma text with line continuations folded onto one line.
    Pragma(String),
    Function {
        name: String,
        ret: String,
        pointers: u8,
    },
    /// Children of a declarator are its array dimensions followed by the
    /// initializer when `init` is set.
    Declarator {
        name: String,
        pointers: u8,
        dims: u8,
        init: bool,
    },
}

/// Half-open range of token indices covered by a node. `Empty` nodes have
/// `start == end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub children: Vec<AstNode>,
    pub span: TokenSpan,
    pub attrs: Attrs,
}

impl AstNode {
    pub fn new(kind: NodeKind, attrs: Attrs, children: Vec<AstNode>, span: TokenSpan) -> Self {
        AstNode {
            kind,
            children,
            span,
            attrs,
        }
    }

    pub fn empty(at: usize) -> Self {
        AstNode::new(NodeKind::Empty, Attrs::None, Vec::new(), TokenSpan::new(at, at))
    }

    pub fn is_empty_marker(&self) -> bool {
        self.kind == NodeKind::Empty
    }

    pub fn name(&self) -> Option<&str> {
        match &self.attrs {
            Attrs::Name(n) => Some(n),
            Attrs::Function { name, .. } | Attrs::Declarator { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn op(&self) -> Option<&str> {
        match &self.attrs {
            Attrs::Op(o) => Some(o),
            _ => None,
        }
    }

    pub fn pragma_text(&self) -> Option<&str> {
        match &self.attrs {
            Attrs::Pragma(p) => Some(p),
            _ => None,
        }
    }

    /// Token index of the declared name for a `Declarator`.
    pub fn declarator_name_token(&self) -> Option<usize> {
        match &self.attrs {
            Attrs::Declarator { pointers, .. } => Some(self.span.start + *pointers as usize),
            _ => None,
        }
    }

    /// Initializer of a `Declarator`, if any.
    pub fn declarator_init(&self) -> Option<&AstNode> {
        match &self.attrs {
            Attrs::Declarator { init: true, .. } => self.children.last(),
            _ => None,
        }
    }

    /// Array dimension expressions of a `Declarator`.
    pub fn declarator_dims(&self) -> &[AstNode] {
        match &self.attrs {
            Attrs::Declarator { dims, .. } => &self.children[..*dims as usize],
            _ => &[],
        }
    }

    /// The body statement of a `ForStmt` or `WhileStmt`.
    pub fn loop_body(&self) -> Option<&AstNode> {
        match self.kind {
            NodeKind::ForStmt | NodeKind::WhileStmt => self.children.last(),
            _ => None,
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// Pre-order traversal that also hands each node its parent.
    pub fn walk_with_parent<'a>(&'a self, f: &mut impl FnMut(&'a AstNode, Option<&'a AstNode>)) {
        fn go<'a>(
            n: &'a AstNode,
            parent: Option<&'a AstNode>,
            f: &mut impl FnMut(&'a AstNode, Option<&'a AstNode>),
        ) {
            f(n, parent);
            for c in &n.children {
                go(c, Some(n), f);
            }
        }
        go(self, None, f)
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut AstNode)) {
        f(self);
        for c in &mut self.children {
            c.walk_mut(f);
        }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(AstNode::count).sum::<usize>()
    }

    /// Equality of kinds, attributes and children, ignoring token spans and
    /// treating a single-statement loop or branch body as equal to the same
    /// statement wrapped in braces (rendering always emits the braces).
    pub fn structurally_eq(&self, other: &AstNode) -> bool {
        self.normalized() == other.normalized()
    }

    /// Variable renames leave the shape untouched: same kinds and arities in
    /// the same order.
    pub fn same_shape(&self, other: &AstNode) -> bool {
        self.kind == other.kind
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_shape(b))
    }

    fn normalized(&self) -> AstNode {
        let mut n = self.clone();
        n.walk_mut(&mut |node| {
            node.span = TokenSpan::default();
            let body_slots: &[usize] = match node.kind {
                NodeKind::ForStmt => &[3],
                NodeKind::WhileStmt => &[1],
                NodeKind::IfStmt => &[1, 2],
                _ => &[],
            };
            for &slot in body_slots {
                let Some(child) = node.children.get_mut(slot) else {
                    continue;
                };
                let keep_bare = child.kind == NodeKind::CompoundStmt
                    || (slot == 2 && child.kind == NodeKind::IfStmt);
                if !keep_bare {
                    let inner = std::mem::replace(child, AstNode::empty(0));
                    *child = AstNode::new(
                        NodeKind::CompoundStmt,
                        Attrs::None,
                        vec![inner],
                        TokenSpan::default(),
                    );
                }
            }
        });
        n
    }
}
