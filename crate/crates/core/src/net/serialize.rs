//! Binary parameter files.
//!
//! Layout, all little-endian: the 4-byte magic, a format version byte, the
//! network configuration, the parameter count as `u64`, then every parameter
//! as `f32` in buffer order.

use std::io::{self, Read, Write};

use super::params::ModelParams;
use super::NetConfig;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MSCN";
pub const FORMAT_VERSION: u8 = 1;

/// Refuse headers that would make us allocate absurd amounts of memory.
const MAX_LAYERS: u32 = 64;

pub fn serialize_params<W: Write>(params: &ModelParams<f32>, mut out: W) -> Result<()> {
    let cfg = params.config();
    out.write_all(&MAGIC)?;
    out.write_all(&[FORMAT_VERSION])?;
    write_u32(&mut out, cfg.input_channels)?;
    write_u32(&mut out, cfg.conv_filters.len())?;
    for ((&f, &k), &p) in cfg.conv_filters.iter().zip(&cfg.conv_kernels).zip(&cfg.pool_after) {
        write_u32(&mut out, f)?;
        write_u32(&mut out, k)?;
        write_u32(&mut out, usize::from(p))?;
    }
    write_u32(&mut out, cfg.lstm_units)?;
    write_u32(&mut out, cfg.dense_units)?;
    out.write_all(&cfg.dropout_rate.to_le_bytes())?;
    out.write_all(&(params.count() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(params.count() * 4);
    for v in params.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn deserialize_params<R: Read>(mut input: R) -> Result<ModelParams<f32>> {
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut version = [0u8; 1];
    read_exact(&mut input, &mut version)?;
    if version[0] != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version[0],
        });
    }
    let input_channels = read_u32(&mut input)? as usize;
    let layers = read_u32(&mut input)?;
    if layers > MAX_LAYERS {
        return Err(Error::ShapeMismatch(format!("{layers} convolution layers")));
    }
    let mut conv_filters = Vec::new();
    let mut conv_kernels = Vec::new();
    let mut pool_after = Vec::new();
    for _ in 0..layers {
        conv_filters.push(read_u32(&mut input)? as usize);
        conv_kernels.push(read_u32(&mut input)? as usize);
        pool_after.push(match read_u32(&mut input)? {
            0 => false,
            1 => true,
            other => return Err(Error::ShapeMismatch(format!("pool flag {other}"))),
        });
    }
    let lstm_units = read_u32(&mut input)? as usize;
    let dense_units = read_u32(&mut input)? as usize;
    let mut f = [0u8; 8];
    read_exact(&mut input, &mut f)?;
    let dropout_rate = f64::from_le_bytes(f);
    read_exact(&mut input, &mut f)?;
    let count = u64::from_le_bytes(f);

    let config = NetConfig {
        input_channels,
        conv_filters,
        conv_kernels,
        pool_after,
        lstm_units,
        dense_units,
        dropout_rate,
    };
    config.validate().map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let expected = super::Layout::new(&config).total();
    if count != expected as u64 {
        return Err(Error::ShapeMismatch(format!(
            "header declares {count} parameters, configuration needs {expected}"
        )));
    }
    let mut bytes = vec![0u8; expected * 4];
    read_exact(&mut input, &mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ModelParams::from_parts(config, data)
}

fn write_u32<W: Write>(out: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::ShapeMismatch(format!("{v} does not fit in u32")))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::TruncatedStream,
        _ => Error::Io(e),
    })
}
