//! Binary checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic    b"LRUNETCK"
//! version  u32
//! spec     u32 length + UTF-8 JSON of the NetworkSpec
//! norm     u32 channel count, then that many f32 means and f32 stds
//! count    u32 number of tensor records
//! record   u8 kind (0 param, 1 buffer, 2 momentum)
//!          u32 name length + UTF-8 name
//!          4 x u32 dims (n, c, h, w)
//!          n*c*h*w f32 values
//! ```
//!
//! Records appear in parameter-store order: all params, then their momenta,
//! then buffers. Serializing the same network twice yields identical bytes.

use std::fs;
use std::path::Path;

use super::Normalization;
use crate::arch::{Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

pub const MAGIC: &[u8; 8] = b"LRUNETCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Param,
    Buffer,
    Momentum,
}

impl TensorKind {
    fn code(self) -> u8 {
        match self {
            TensorKind::Param => 0,
            TensorKind::Buffer => 1,
            TensorKind::Momentum => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(TensorKind::Param),
            1 => Ok(TensorKind::Buffer),
            2 => Ok(TensorKind::Momentum),
            other => Err(Error::Format(format!("unknown tensor kind {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorRecord {
    pub kind: TensorKind,
    pub name: String,
    pub value: Tensor4<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub normalization: Normalization,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_network(net: &Network<f32>, normalization: Normalization) -> Self {
        let store = net.store();
        let mut tensors = Vec::with_capacity(2 * store.num_params() + store.num_buffers());
        for (name, p) in store.params() {
            tensors.push(TensorRecord {
                kind: TensorKind::Param,
                name: name.to_string(),
                value: p.value.clone(),
            });
        }
        for (name, p) in store.params() {
            tensors.push(TensorRecord {
                kind: TensorKind::Momentum,
                name: name.to_string(),
                value: p.momentum.clone(),
            });
        }
        for (name, b) in store.buffers() {
            tensors.push(TensorRecord {
                kind: TensorKind::Buffer,
                name: name.to_string(),
                value: b.clone(),
            });
        }
        Checkpoint {
            spec: net.spec().clone(),
            normalization,
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let spec = serde_json::to_vec(&self.spec).map_err(|e| Error::Format(format!("spec json: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_bytes(&mut out, &spec);
        let norm = &self.normalization;
        put_u32(&mut out, norm.mean.len() as u32);
        for v in norm.mean.iter().chain(&norm.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(&mut out, self.tensors.len() as u32);
        for t in &self.tensors {
            out.push(t.kind.code());
            put_bytes(&mut out, t.name.as_bytes());
            for d in t.value.shape().as_array() {
                put_u32(&mut out, d as u32);
            }
            for v in t.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint: bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version} is not supported (this build reads version {VERSION})"
            )));
        }
        let spec_len = r.u32()? as usize;
        let spec: NetworkSpec = serde_json::from_slice(r.take(spec_len)?)
            .map_err(|e| Error::Format(format!("spec json: {e}")))?;
        let channels = r.u32()? as usize;
        let mean = r.f32s(channels)?;
        let std = r.f32s(channels)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let kind = TensorKind::from_code(r.take(1)?[0])?;
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
            let shape = Shape4::new(dims[0], dims[1], dims[2], dims[3]);
            let len = shape.checked_len()?;
            let value = Tensor4::from_vec(shape, r.f32s(len)?)?;
            tensors.push(TensorRecord { kind, name, value });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            spec,
            normalization: Normalization { mean, std },
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&super::read_file(path.as_ref())?)
    }

    /// Copies every tensor into `net`. The names, kinds and shapes must match
    /// the network's store exactly and in order.
    pub fn apply_to(&self, net: &mut Network<f32>) -> Result<()> {
        let expected = Checkpoint::from_network(net, self.normalization.clone());
        for (i, want) in expected.tensors.iter().enumerate() {
            let got = self.tensors.get(i).ok_or_else(|| {
                Error::State(format!("checkpoint is missing tensor {}", want.name))
            })?;
            if got.kind != want.kind || got.name != want.name {
                return Err(Error::State(format!(
                    "checkpoint tensor {} does not match network tensor {}",
                    got.name, want.name
                )));
            }
            if got.value.shape() != want.value.shape() {
                return Err(Error::State(format!(
                    "tensor {}: checkpoint shape {} vs network shape {}",
                    got.name,
                    got.value.shape(),
                    want.value.shape()
                )));
            }
        }
        if let Some(extra) = self.tensors.get(expected.tensors.len()) {
            return Err(Error::State(format!("checkpoint has unexpected tensor {}", extra.name)));
        }
        let store = net.store_mut();
        for t in &self.tensors {
            match t.kind {
                TensorKind::Param => store.get_mut(&t.name).expect("checked").value = t.value.clone(),
                TensorKind::Momentum => store.get_mut(&t.name).expect("checked").momentum = t.value.clone(),
                TensorKind::Buffer => *store.get_buffer_mut(&t.name).expect("checked") = t.value.clone(),
            }
        }
        Ok(())
    }

    /// Rebuilds the recorded network and loads the tensors into it.
    pub fn to_network(&self) -> Result<Network<f32>> {
        let mut net = Network::build(self.spec.clone())?;
        self.apply_to(&mut net)?;
        Ok(net)
    }
}

pub fn save_checkpoint(net: &Network<f32>, normalization: &Normalization, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_network(net, normalization.clone()).save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network<f32>, Normalization)> {
    let ck = Checkpoint::load(path)?;
    let net = ck.to_network()?;
    Ok((net, ck.normalization))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}
