//! The IDX container used by MNIST: two zero bytes, a type code, a dimension
//! count, big-endian `u32` sizes, then the row-major payload.

use crate::{Error, Result};

const TYPE_U8: u8 = 0x08;
/// Type codes defined by the format but not decoded here.
const KNOWN_TYPES: [u8; 5] = [0x09, 0x0b, 0x0c, 0x0d, 0x0e];

/// An unsigned-byte tensor decoded from an IDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn new(shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let expected = element_count(&shape)?;
        if expected != data.len() {
            return Err(Error::Malformed(format!("shape {shape:?} needs {expected} bytes, got {}", data.len())));
        }
        Ok(IdxTensor { shape, data })
    }
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Malformed(format!("shape {shape:?} overflows")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { expected: 4, found: bytes.len() });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::BadMagic([bytes[0], bytes[1]]));
    }
    let kind = bytes[2];
    if kind != TYPE_U8 {
        return Err(Error::UnsupportedType(kind));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::Malformed("zero dimensions".into()));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Truncated { expected: header, found: bytes.len() });
    }
    let shape: Vec<usize> =
        bytes[4..header].chunks_exact(4).map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize).collect();
    let count = element_count(&shape)?;
    let payload = &bytes[header..];
    if payload.len() < count {
        return Err(Error::Truncated { expected: count, found: payload.len() });
    }
    if payload.len() > count {
        return Err(Error::Malformed(format!("{} trailing bytes after payload", payload.len() - count)));
    }
    Ok(IdxTensor { shape, data: payload.to_vec() })
}

pub fn serialize_idx(tensor: &IdxTensor) -> Result<Vec<u8>> {
    if tensor.shape.is_empty() || tensor.shape.len() > u8::MAX as usize {
        return Err(Error::Malformed(format!("cannot encode {} dimensions", tensor.shape.len())));
    }
    if element_count(&tensor.shape)? != tensor.data.len() {
        return Err(Error::Malformed("shape does not match payload length".into()));
    }
    let mut out = Vec::with_capacity(4 + 4 * tensor.shape.len() + tensor.data.len());
    out.extend_from_slice(&[0, 0, TYPE_U8, tensor.shape.len() as u8]);
    for &n in &tensor.shape {
        let n = u32::try_from(n).map_err(|_| Error::Malformed(format!("dimension {n} exceeds u32")))?;
        out.extend_from_slice(&n.to_be_bytes());
    }
    out.extend_from_slice(&tensor.data);
    Ok(out)
}

/// True for type codes the format defines (we only decode `0x08`).
pub fn is_known_type(code: u8) -> bool {
    code == TYPE_U8 || KNOWN_TYPES.contains(&code)
}
