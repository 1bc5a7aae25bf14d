//! `model.bin`: the bytes `OMPF1`, a fixed config block, then every
//! parameter group in declaration order as a `u32` length followed by that
//! many little-endian `f32` values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::scalar::Scalar;

use super::params::{AttentionScale, ModelConfig, ModelParams};
use super::ModelError;

pub const MAGIC: &[u8; 5] = b"OMPF1";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_model<T: Scalar>(
    w: &mut impl Write,
    cfg: &ModelConfig,
    params: &ModelParams<T>,
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for dim in [
        cfg.d_model,
        cfg.n_heads,
        cfg.n_layers,
        cfg.d_ff,
        cfg.max_len,
        cfg.vocab_size,
    ] {
        w.write_u32::<LE>(dim as u32)?;
    }
    w.write_f64::<LE>(cfg.dropout_rate)?;
    w.write_u64::<LE>(cfg.seed)?;
    w.write_u8(match cfg.scale {
        AttentionScale::SqrtDHead => 0,
        AttentionScale::DHead => 1,
    })?;
    let tensors = params.tensors();
    w.write_u32::<LE>(tensors.len() as u32)?;
    for (_, t) in tensors {
        w.write_u32::<LE>(t.len() as u32)?;
        for &x in t {
            w.write_f32::<LE>(x.f64() as f32)?;
        }
    }
    Ok(())
}

pub fn read_model<T: Scalar>(r: &mut impl Read) -> Result<(ModelConfig, ModelParams<T>), ModelError> {
    let fmt = |m: &str| ModelError::Format(m.to_string());
    let short = |_| fmt("truncated model file");
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != MAGIC {
        return Err(fmt("bad magic, not a model file"));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.read_u32::<LE>().map_err(short)? as usize;
    }
    let dropout_rate = r.read_f64::<LE>().map_err(short)?;
    let seed = r.read_u64::<LE>().map_err(short)?;
    let scale = match r.read_u8().map_err(short)? {
        0 => AttentionScale::SqrtDHead,
        1 => AttentionScale::DHead,
        other => return Err(ModelError::Format(format!("unknown attention scale {other}"))),
    };
    let cfg = ModelConfig {
        d_model: dims[0],
        n_heads: dims[1],
        n_layers: dims[2],
        d_ff: dims[3],
        max_len: dims[4],
        vocab_size: dims[5],
        dropout_rate,
        seed,
        scale,
    };
    cfg.validate()?;
    let mut params = ModelParams::<T>::zeros(&cfg);
    let n = r.read_u32::<LE>().map_err(short)? as usize;
    let mut tensors = params.tensors_mut();
    if n != tensors.len() {
        return Err(ModelError::Format(format!(
            "{n} parameter blocks, config implies {}",
            tensors.len()
        )));
    }
    for t in tensors.iter_mut() {
        let len = r.read_u32::<LE>().map_err(short)? as usize;
        if len != t.len() {
            return Err(ModelError::Format(format!(
                "parameter block of {len} values, expected {}",
                t.len()
            )));
        }
        for x in t.iter_mut() {
            *x = T::of(r.read_f32::<LE>().map_err(short)? as f64);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(short)?;
    if !rest.is_empty() {
        return Err(fmt("trailing bytes after parameters"));
    }
    Ok((cfg, params))
}

pub fn save_model<T: Scalar>(path: &Path, cfg: &ModelConfig, params: &ModelParams<T>) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    write_model(&mut buf, cfg, params).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<(ModelConfig, ModelParams<T>), ModelError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    read_model(&mut bytes.as_slice()).map_err(|e| match e {
        ModelError::Format(m) => ModelError::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}
