//! `CFMM` checkpoints: magic "CFMM" | u32 version=1 | u32 mode (0 cross,
//! 1 intra) | two network specs (u32 arch, u32 layer count, widths) | f64
//! parameters of `from_2d` then `from_3d`, layer by layer, weight then bias.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::mlp::{Arch, MappingNetwork, MlpSpec};
use super::train::{MappingPair, Mode};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CFMM";
const VERSION: u32 = 1;

fn push_spec(buf: &mut Vec<u8>, spec: &MlpSpec) {
    let arch = match spec.arch() {
        Arch::Projection => 0u32,
        Arch::EncoderDecoder => 1,
    };
    buf.extend(arch.to_le_bytes());
    buf.extend((spec.dims().len() as u32).to_le_bytes());
    for &d in spec.dims() {
        buf.extend((d as u32).to_le_bytes());
    }
}

pub fn write_checkpoint(path: &Path, pair: &MappingPair) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend(MAGIC);
    buf.extend(VERSION.to_le_bytes());
    buf.extend(match pair.mode {
        Mode::Cross => 0u32,
        Mode::Intra => 1,
    }
    .to_le_bytes());
    push_spec(&mut buf, pair.from_2d.spec());
    push_spec(&mut buf, pair.from_3d.spec());
    for net in [&pair.from_2d, &pair.from_3d] {
        for v in net.params() {
            buf.extend(v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn spec(&mut self) -> Result<MlpSpec> {
        let arch = match self.u32()? {
            0 => Arch::Projection,
            1 => Arch::EncoderDecoder,
            a => return Err(Error::Format(format!("unknown architecture tag {a}"))),
        };
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let dims = (0..n).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        MlpSpec::new(dims, arch).map_err(|e| Error::Format(e.to_string()))
    }

    fn net(&mut self, spec: MlpSpec) -> Result<MappingNetwork> {
        let raw = self.take(spec.param_count() * 8)?;
        let params: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        MappingNetwork::from_params(spec, &params).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<MappingPair> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format(format!("{} is not a mapping checkpoint", path.display())));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("checkpoint version {version} is not supported")));
    }
    let mode = match c.u32()? {
        0 => Mode::Cross,
        1 => Mode::Intra,
        m => return Err(Error::Format(format!("unknown mode flag {m}"))),
    };
    let s2 = c.spec()?;
    let s3 = c.spec()?;
    let from_2d = c.net(s2)?;
    let from_3d = c.net(s3)?;
    if c.pos != buf.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(MappingPair { mode, from_2d, from_3d })
}

/// `epoch,mean_loss` with epochs counted from 1.
pub fn write_loss_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "epoch,mean_loss").unwrap();
    for (i, l) in trace.iter().enumerate() {
        writeln!(out, "{},{l}", i + 1).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
