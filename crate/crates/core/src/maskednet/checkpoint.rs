//! Backbone checkpoints.
//!
//! Layout (little-endian): magic `MPCK`, version `u32`, arch id, architecture
//! descriptor, config hash (each a `u16`-length string), test accuracy `f64`,
//! parameter tensor count `u32`, then per tensor: rank `u32`, dims `u32`×rank,
//! values `f64`×numel, trainable flag `u8`. A mask flag `u8` follows; when 1,
//! `n` scores `f64` and `n` retained bytes. The file ends with a `u64`
//! checksum of all preceding bytes.

use std::path::Path;

use super::arch::Architecture;
use super::network::{LayerParams, MaskState, MaskedNetwork};
use crate::codec::{format_err, write_atomic, Reader, Writer};
use crate::error::Result;
use crate::gradcore::{Parameter, Tensor};

const MAGIC: &[u8; 4] = b"MPCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: MaskedNetwork,
    pub config_hash: String,
    pub test_accuracy: f64,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let net = &ckpt.net;
    let mut w = Writer::new();
    w.bytes(MAGIC)
        .u32(VERSION)
        .str(net.arch_id())
        .str(&net.arch().descriptor())
        .str(&ckpt.config_hash)
        .f64(ckpt.test_accuracy);
    let params = net.weight_parameters();
    w.u32(params.len() as u32);
    for p in params {
        let t = p.value();
        w.u32(t.rank() as u32);
        for &d in t.shape() {
            w.u32(d as u32);
        }
        for &v in t.data() {
            w.f64(v);
        }
        w.u8(p.trainable() as u8);
    }
    match net.mask() {
        Some(m) => {
            w.u8(1);
            for &s in m.scores() {
                w.f64(s);
            }
            for &r in m.retained() {
                w.u8(r as u8);
            }
        }
        None => {
            w.u8(0);
        }
    }
    write_atomic(path, &w.finish_with_checksum())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader::with_checksum(&bytes, path)?;
    r.expect_magic(MAGIC)?;
    r.expect_version(VERSION)?;
    let arch_id = r.str()?;
    let arch = Architecture::parse_descriptor(&r.str()?)?;
    let config_hash = r.str()?;
    let test_accuracy = r.f64()?;
    let count = r.u32()? as usize;
    if count != 2 * (arch.hidden.len() + 1) {
        return Err(r.err(format!("{count} tensors for {} layers", arch.hidden.len())));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 4 {
            return Err(r.err(format!("tensor rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let numel: usize = shape.iter().product();
        if numel * 8 > bytes.len() {
            return Err(r.err("tensor larger than file"));
        }
        let data: Vec<f64> = (0..numel).map(|_| r.f64()).collect::<Result<_>>()?;
        let trainable = r.u8()? != 0;
        let tensor = Tensor::new(shape, data).map_err(|e| format_err(path, e.to_string()))?;
        params.push(Parameter::new(tensor, trainable));
    }
    let mask = match r.u8()? {
        0 => None,
        1 => {
            let n = arch.num_units();
            let scores: Vec<f64> = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
            let retained: Vec<bool> = (0..n).map(|_| r.u8().map(|b| b != 0)).collect::<Result<_>>()?;
            Some(MaskState::from_parts(&arch, &scores, &retained)?)
        }
        other => return Err(r.err(format!("mask flag {other}"))),
    };
    r.finish()?;
    let mut it = params.into_iter();
    let mut pair = || LayerParams {
        weight: it.next().expect("count checked"),
        bias: it.next().expect("count checked"),
    };
    let hidden = (0..arch.hidden.len()).map(|_| pair()).collect();
    let head = pair();
    let net = MaskedNetwork::from_parts(arch_id, arch, hidden, head, mask)?;
    Ok(Checkpoint {
        net,
        config_hash,
        test_accuracy,
    })
}
