//! Binary weight checkpoints.
//!
//! Layout (all integers little-endian):
//! magic `HJQN`, u32 version, u32 input rows, u32 input cols, u32 layer
//! count, then per layer a u8 kind (0 conv, 1 dense) and u8 relu flag
//! followed by u32 filters, kh, kw, sh, sw (conv) or u32 units (dense),
//! then u64 weight count and the weights as f64.

use std::io::{Read, Write};

use super::{Architecture, DqnError, LayerSpec, QNetworkParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HJQN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<(), DqnError> {
    let v = u32::try_from(v).map_err(|_| DqnError::Checkpoint(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize, DqnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8, DqnError> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub fn save_checkpoint<W: Write>(params: &QNetworkParams, mut w: W) -> Result<(), DqnError> {
    let arch = params.architecture();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    put_u32(&mut w, arch.input.0)?;
    put_u32(&mut w, arch.input.1)?;
    put_u32(&mut w, arch.layers.len())?;
    for layer in &arch.layers {
        match *layer {
            LayerSpec::Conv { filters, kernel, stride, relu } => {
                w.write_all(&[0, relu as u8])?;
                for v in [filters, kernel.0, kernel.1, stride.0, stride.1] {
                    put_u32(&mut w, v)?;
                }
            }
            LayerSpec::Dense { units, relu } => {
                w.write_all(&[1, relu as u8])?;
                put_u32(&mut w, units)?;
            }
        }
    }
    w.write_all(&(params.weights().len() as u64).to_le_bytes())?;
    for x in params.weights() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<QNetworkParams, DqnError> {
    let bad = |m: String| DqnError::Checkpoint(m);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = get_u32(&mut r)? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let rows = get_u32(&mut r)?;
    let cols = get_u32(&mut r)?;
    let count = get_u32(&mut r)?;
    if count > 1024 {
        return Err(bad(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = get_u8(&mut r)?;
        let relu = match get_u8(&mut r)? {
            0 => false,
            1 => true,
            other => return Err(bad(format!("bad relu flag {other}"))),
        };
        layers.push(match kind {
            0 => {
                let mut v = [0usize; 5];
                for x in &mut v {
                    *x = get_u32(&mut r)?;
                }
                LayerSpec::Conv { filters: v[0], kernel: (v[1], v[2]), stride: (v[3], v[4]), relu }
            }
            1 => LayerSpec::Dense { units: get_u32(&mut r)?, relu },
            other => return Err(bad(format!("unknown layer kind {other}"))),
        });
    }
    let arch = Architecture { input: (rows, cols), layers };
    let expected = arch.num_params()?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b);
    if n != expected as u64 {
        return Err(DqnError::WeightCount { expected, found: n as usize });
    }
    let mut weights = Vec::with_capacity(expected);
    for _ in 0..expected {
        r.read_exact(&mut b)?;
        weights.push(f64::from_le_bytes(b));
    }
    QNetworkParams::from_weights(arch, weights)
}
