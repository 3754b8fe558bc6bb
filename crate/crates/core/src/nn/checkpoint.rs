//! Binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"VRNN"
//! version u32            (currently 1)
//! output  u8             (0 identity, 1 sigmoid)
//! ndims   u32
//! dims    u32 * ndims    (layer sizes, input first)
//! nparams u64
//! params  f64 * nparams  (flat layout of ParamVector)
//! ```

use std::io::{Read, Write};

use super::{shapes_for, Mlp, OutputActivation, ParamVector};
use crate::error::{Error, Result};

pub const NET_MAGIC: [u8; 4] = *b"VRNN";
pub const NET_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub(crate) fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_magic<R: Read>(r: &mut R, expected: [u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if m != expected {
        return Err(bad(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(&expected)
        )));
    }
    Ok(())
}

pub fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    w.write_all(&NET_MAGIC)?;
    write_u32(w, NET_VERSION)?;
    write_u8(
        w,
        match net.output_activation() {
            OutputActivation::Identity => 0,
            OutputActivation::Sigmoid => 1,
        },
    )?;
    let dims = net.dims();
    write_u32(w, dims.len() as u32)?;
    for d in dims {
        write_u32(w, d as u32)?;
    }
    let values = net.params().values();
    write_u64(w, values.len() as u64)?;
    for &v in values {
        write_f64(w, v)?;
    }
    Ok(())
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    read_magic(r, NET_MAGIC)?;
    let version = read_u32(r)?;
    if version != NET_VERSION {
        return Err(bad(format!("unsupported network version {version}")));
    }
    let output = match read_u8(r)? {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Sigmoid,
        other => return Err(bad(format!("unknown output activation tag {other}"))),
    };
    let ndims = read_u32(r)? as usize;
    if !(2..=64).contains(&ndims) {
        return Err(bad(format!("implausible layer count {ndims}")));
    }
    let dims = (0..ndims)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let shapes = shapes_for(&dims).map_err(|e| bad(e.to_string()))?;
    let nparams = read_u64(r)? as usize;
    let expected: usize = shapes.iter().map(|s| s.len()).sum();
    if nparams != expected {
        return Err(bad(format!(
            "manifest {dims:?} needs {expected} parameters, header says {nparams}"
        )));
    }
    let values = (0..nparams).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    let params = ParamVector::from_flat(shapes, values)?;
    Mlp::from_params(params, output)
}

/// Reads a network and checks it has the expected layer sizes.
pub fn read_mlp_with_dims<R: Read>(r: &mut R, dims: &[usize]) -> Result<Mlp> {
    let net = read_mlp(r)?;
    if net.dims() != dims {
        return Err(bad(format!(
            "shape manifest {:?} does not match expected {dims:?}",
            net.dims()
        )));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[7, 16, 8, 1], OutputActivation::Sigmoid, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &net).unwrap();
        let back = read_mlp(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let bits = |n: &Mlp| n.params().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 4, 1], OutputActivation::Identity, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &net).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            read_mlp(&mut wrong_magic.as_slice()),
            Err(Error::Checkpoint(_))
        ));

        let mut wrong_version = buf.clone();
        wrong_version[4] = 9;
        assert!(read_mlp(&mut wrong_version.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 3];
        assert!(read_mlp(&mut &truncated[..]).is_err());

        assert!(read_mlp_with_dims(&mut buf.as_slice(), &[3, 5, 1]).is_err());
        assert!(read_mlp_with_dims(&mut buf.as_slice(), &[3, 4, 1]).is_ok());
    }
}
