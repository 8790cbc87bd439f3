use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GazeError, Result};

/// Dense row-major tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(GazeError::shape(format!("{shape:?}"), format!("{} values", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn he_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| dist.sample(rng)).collect() }
    }
}

pub const CONV1_OUT: usize = 8;
pub const CONV2_OUT: usize = 16;
pub const CONV3_OUT: usize = 16;
/// Hidden width of the dense head.
pub const HIDDEN: usize = 64;
/// Hidden width when aggregating post-dense vectors.
pub const HIDDEN_MAX1D: usize = 256;

/// Every trainable tensor of the backbone and head.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub conv3_w: Tensor,
    pub conv3_b: Tensor,
    pub dense1_w: Tensor,
    pub dense1_b: Tensor,
    pub dense2_w: Tensor,
    pub dense2_b: Tensor,
}

pub const TENSOR_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

impl BackboneParams {
    pub fn zeros(hidden: usize, outputs: usize) -> Self {
        BackboneParams {
            conv1_w: Tensor::zeros(&[CONV1_OUT, 1, 3, 3]),
            conv1_b: Tensor::zeros(&[CONV1_OUT]),
            conv2_w: Tensor::zeros(&[CONV2_OUT, CONV1_OUT, 3, 3]),
            conv2_b: Tensor::zeros(&[CONV2_OUT]),
            conv3_w: Tensor::zeros(&[CONV3_OUT, CONV2_OUT, 3, 3]),
            conv3_b: Tensor::zeros(&[CONV3_OUT]),
            dense1_w: Tensor::zeros(&[hidden, CONV3_OUT]),
            dense1_b: Tensor::zeros(&[hidden]),
            dense2_w: Tensor::zeros(&[outputs, hidden]),
            dense2_b: Tensor::zeros(&[outputs]),
        }
    }

    /// He initialisation: weights `N(0, 2 / fan_in)`, biases zero.
    pub fn init(hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hidden, outputs);
        p.conv1_w = Tensor::he_normal(&[CONV1_OUT, 1, 3, 3], 9, &mut rng);
        p.conv2_w = Tensor::he_normal(&[CONV2_OUT, CONV1_OUT, 3, 3], CONV1_OUT * 9, &mut rng);
        p.conv3_w = Tensor::he_normal(&[CONV3_OUT, CONV2_OUT, 3, 3], CONV2_OUT * 9, &mut rng);
        p.dense1_w = Tensor::he_normal(&[hidden, CONV3_OUT], CONV3_OUT, &mut rng);
        p.dense2_w = Tensor::he_normal(&[outputs, hidden], hidden, &mut rng);
        p
    }

    pub fn hidden(&self) -> usize {
        self.dense1_b.len()
    }

    pub fn outputs(&self) -> usize {
        self.dense2_b.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden(), self.outputs())
    }

    pub fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.conv3_w,
            &self.conv3_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.conv3_w,
            &mut self.conv3_b,
            &mut self.dense1_w,
            &mut self.dense1_b,
            &mut self.dense2_w,
            &mut self.dense2_b,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Rebuilds parameters from named tensors, checking every shape.
    pub fn from_named(named: &[(String, Tensor)]) -> Result<Self> {
        let find = |name: &str| {
            named
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| GazeError::Checkpoint(format!("missing tensor {name}")))
        };
        let dense2_b = find("dense2.bias")?;
        let dense1_b = find("dense1.bias")?;
        if dense1_b.shape.len() != 1 || dense2_b.shape.len() != 1 {
            return Err(GazeError::Checkpoint("bias tensors must be rank 1".into()));
        }
        let mut p = Self::zeros(dense1_b.shape[0], dense2_b.shape[0]);
        for (name, slot) in TENSOR_NAMES.iter().zip(p.tensors_mut()) {
            let t = find(name)?;
            if t.shape != slot.shape {
                return Err(GazeError::Checkpoint(format!(
                    "{name} has shape {:?}, expected {:?}",
                    t.shape, slot.shape
                )));
            }
            *slot = t;
        }
        Ok(p)
    }
}

const MAGIC: &[u8; 4] = b"GZK1";

/// Serializes named tensors as `GZK1` followed by one record per tensor:
/// `u32` name length, UTF-8 name, `u32` rank, `u64` dims, `f64` values, all
/// little-endian.
pub fn encode_tensors(named: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for (name, t) in named {
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend((t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend((d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| GazeError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(GazeError::Checkpoint("missing GZK1 magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| GazeError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(GazeError::Checkpoint(format!("{name}: rank {rank} too large")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64()?)
                .map_err(|_| GazeError::Checkpoint(format!("{name}: dimension overflow")))?;
            count = count
                .checked_mul(d)
                .ok_or_else(|| GazeError::Checkpoint(format!("{name}: dimension overflow")))?;
            shape.push(d);
        }
        let nbytes = count
            .checked_mul(8)
            .ok_or_else(|| GazeError::Checkpoint(format!("{name}: size overflow")))?;
        let raw = r.take(nbytes)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Tensor { shape, data }));
    }
    Ok(out)
}
