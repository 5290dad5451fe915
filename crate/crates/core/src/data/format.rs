//! Little-endian binary formats shared with the feature exporter.
//!
//! ```text
//! CFMF  magic "CFMF" | u32 version=1 | u32 H | u32 W | u32 D
//!       | H*W mask bytes (0/1) | H*W*D f32 payload, row-major, channel-last
//! CFMP  magic "CFMP" | u32 version=1 | u32 N | u32 D | N*3 f32 coords | N*D f32 feats
//! CFMX  magic "CFMX" | u32 version=1 | u32 H | u32 W | H*W*3 f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{FeatureMap, PointFeatureSet};
use crate::{Error, Result};

const VERSION: u32 = 1;
const HEADER_CFMF: u64 = 4 + 4 * 4;

/// Exact size in bytes of a CFMF file holding an `h x w x d` map.
pub fn cfmf_file_len(h: usize, w: usize, d: usize) -> u64 {
    HEADER_CFMF + (h * w) as u64 + (h * w * d) as u64 * 4
}

/// Organized coordinate raster, `height x width x 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct XyzRaster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

struct Reader<R> {
    inner: R,
    what: &'static str,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Format(format!("{} file is truncated", self.what)),
            _ => Error::Format(format!("{} read failed: {e}", self.what)),
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.bytes(4)?;
        if got != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {}",
                String::from_utf8_lossy(&got),
                self.what
            )));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("{} version {version} is not supported", self.what)));
        }
        Ok(())
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.bytes(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Format(format!("{} file has trailing bytes", self.what))),
            Err(e) => Err(Error::Format(format!("{} read failed: {e}", self.what))),
        }
    }
}

fn open(path: &Path, what: &'static str) -> Result<Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Reader {
        inner: BufReader::new(file),
        what,
    })
}

fn dim_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Argument(format!("{name}={v} does not fit in u32")))
}

fn put_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_all(path: &Path, magic: &[u8; 4], header: &[u32], body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut head = Vec::with_capacity(8 + header.len() * 4);
    head.extend_from_slice(magic);
    head.extend_from_slice(&VERSION.to_le_bytes());
    for v in header {
        head.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&head)
        .and_then(|_| body(&mut w))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

const CHUNK: usize = 1 << 16;

fn write_f32_stream(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(CHUNK * 4);
    for chunk in values.chunks(CHUNK) {
        buf.clear();
        put_f32s(&mut buf, chunk.iter().copied());
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_feature_file(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    if !map.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("feature map contains non-finite values".into()));
    }
    let header = [
        dim_u32(map.height(), "H")?,
        dim_u32(map.width(), "W")?,
        dim_u32(map.dim(), "D")?,
    ];
    write_all(path.as_ref(), b"CFMF", &header, |w| {
        let mask: Vec<u8> = map.valid().iter().map(|&v| v as u8).collect();
        w.write_all(&mask)?;
        write_f32_stream(w, map.data())
    })
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let mut r = open(path.as_ref(), "CFMF")?;
    r.header(b"CFMF")?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let d = r.u32()? as usize;
    if d == 0 {
        return Err(Error::Format("CFMF feature dimension is zero".into()));
    }
    let mask = r.bytes(h * w)?;
    let valid = mask
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("CFMF mask byte {other} is not 0/1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let data = r.f32s(h * w * d)?;
    r.finish()?;
    FeatureMap::from_parts(h, w, d, data, valid).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_point_feature_file(set: &PointFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let header = [dim_u32(set.len(), "N")?, dim_u32(set.dim(), "D")?];
    write_all(path.as_ref(), b"CFMP", &header, |w| {
        let coords: Vec<f32> = set.centers().iter().flatten().map(|&v| v as f32).collect();
        write_f32_stream(w, &coords)?;
        write_f32_stream(w, set.feats())
    })
}

pub fn read_point_feature_file(path: impl AsRef<Path>) -> Result<PointFeatureSet> {
    let mut r = open(path.as_ref(), "CFMP")?;
    r.header(b"CFMP")?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let coords = r.f32s(n * 3)?;
    let feats = r.f32s(n * d)?;
    r.finish()?;
    let centers = coords
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    PointFeatureSet::new(centers, d, feats).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_xyz_file(raster: &XyzRaster, path: impl AsRef<Path>) -> Result<()> {
    if raster.data.len() != raster.height * raster.width * 3 {
        return Err(Error::Argument("xyz raster buffer does not match its dimensions".into()));
    }
    let header = [dim_u32(raster.height, "H")?, dim_u32(raster.width, "W")?];
    write_all(path.as_ref(), b"CFMX", &header, |w| write_f32_stream(w, &raster.data))
}

pub fn read_xyz_file(path: impl AsRef<Path>) -> Result<XyzRaster> {
    let mut r = open(path.as_ref(), "CFMX")?;
    r.header(b"CFMX")?;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let data = r.f32s(height * width * 3)?;
    r.finish()?;
    Ok(XyzRaster { height, width, data })
}
