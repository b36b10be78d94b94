//! Binary network checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "ICTNET\0\0" | version | input_dim | layer count
//! per layer: tag byte (0 = relu, 1 = affine), affine adds rows, cols
//! tap count | taps
//! parameters as f64 LE, weight then bias per affine layer
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netcore::{Layer, Matrix, Network};

pub const MAGIC: &[u8; 8] = b"ICTNET\0\0";
pub const VERSION: u32 = 1;

const TAG_RELU: u8 = 0;
const TAG_AFFINE: u8 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode(net: &Network) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 8 * net.parameter_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut buf, net.input_dim());
    put_u32(&mut buf, net.layers().len());
    for layer in net.layers() {
        match layer {
            Layer::Relu => buf.push(TAG_RELU),
            Layer::Affine { weight, .. } => {
                buf.push(TAG_AFFINE);
                put_u32(&mut buf, weight.rows());
                put_u32(&mut buf, weight.cols());
            }
        }
    }
    put_u32(&mut buf, net.taps().len());
    for &t in net.taps() {
        put_u32(&mut buf, t);
    }
    for slice in net.param_slices() {
        for v in slice {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint(
            "bad magic; not a network checkpoint".into(),
        ));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_dim = r.u32()?;
    let n_layers = r.u32()?;
    let mut shapes = Vec::new();
    for i in 0..n_layers {
        shapes.push(match r.u8()? {
            TAG_RELU => None,
            TAG_AFFINE => Some((r.u32()?, r.u32()?)),
            tag => return Err(Error::Checkpoint(format!("layer {i}: unknown tag {tag}"))),
        });
    }
    let n_taps = r.u32()?;
    let taps = (0..n_taps).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for shape in shapes {
        layers.push(match shape {
            None => Layer::Relu,
            Some((rows, cols)) => {
                let weight = Matrix::from_vec(rows, cols, r.f64s(rows * cols)?)?;
                Layer::affine(weight, r.f64s(rows)?)?
            }
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Network::new(input_dim, layers, taps).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    decode(&fs::read(path)?)
}
