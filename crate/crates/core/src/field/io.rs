//! Point-cloud and density-field files.
//!
//! Cloud CSV: one point per line, `x,y,z[,attr...]`, optional header line.
//! Cloud binary (`.xrpc`): magic `XRPC`, u32 version, u64 count, u32
//! attribute count, length-prefixed attribute names, then positions and
//! attribute columns as f64. Field (`.xrdf`): magic `XRDF`, u32 version, f64
//! box min and max, u32 resolution, then one f32 per node x-fastest. All
//! binary data is little-endian.

use std::fs;
use std::path::Path;

use super::{DensityField, GridBox, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const FIELD_MAGIC: &[u8; 4] = b"XRDF";
pub const FIELD_VERSION: u32 = 1;
const CLOUD_MAGIC: &[u8; 4] = b"XRPC";
const CLOUD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Binary,
}

impl CloudFormat {
    /// `.xrpc` and `.bin` are binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xrpc") | Some("bin") => CloudFormat::Binary,
            _ => CloudFormat::Csv,
        }
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: Option<CloudFormat>) -> Result<PointCloud> {
    let path = path.as_ref();
    let format = format.unwrap_or_else(|| CloudFormat::from_path(path));
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        CloudFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| Error::Format("cloud CSV is not UTF-8".into()))?;
            parse_cloud_csv(&text)
        }
        CloudFormat::Binary => decode_cloud(&bytes),
    }
}

pub fn save_cloud(path: impl AsRef<Path>, cloud: &PointCloud, format: Option<CloudFormat>) -> Result<()> {
    let path = path.as_ref();
    let data = match format.unwrap_or_else(|| CloudFormat::from_path(path)) {
        CloudFormat::Csv => cloud_to_csv(cloud).into_bytes(),
        CloudFormat::Binary => encode_cloud(cloud),
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

pub fn parse_cloud_csv(text: &str) -> Result<PointCloud> {
    let mut positions = Vec::new();
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if width.is_none() && names.is_none() && parsed.iter().any(Option::is_none) {
            names = Some(fields.iter().skip(3).map(|s| s.to_string()).collect());
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected at least 3 columns, found {}", fields.len()),
            });
        }
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected {w} columns, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(w);
        for (f, v) in fields.iter().zip(&parsed) {
            match v {
                Some(v) if v.is_finite() => row.push(*v),
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("not a finite number: {f:?}"),
                    })
                }
            }
        }
        positions.push(Vec3::new(row[0], row[1], row[2]));
        if columns.is_empty() {
            columns = vec![Vec::new(); w - 3];
        }
        for (c, v) in columns.iter_mut().zip(&row[3..]) {
            c.push(*v);
        }
    }
    if positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let names = names.unwrap_or_default();
    let attributes = columns
        .into_iter()
        .enumerate()
        .map(|(i, c)| (names.get(i).cloned().unwrap_or_else(|| format!("attr{i}")), c))
        .collect();
    Ok(PointCloud { positions, attributes })
}

pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut out = String::from("x,y,z");
    for name in cloud.attributes.keys() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, p) in cloud.positions.iter().enumerate() {
        out.push_str(&format!("{},{},{}", p.x, p.y, p.z));
        for values in cloud.attributes.values() {
            out.push_str(&format!(",{}", values[i]));
        }
        out.push('\n');
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated: needed {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + cloud.len() * 24);
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&CLOUD_VERSION.to_le_bytes());
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    out.extend_from_slice(&(cloud.attributes.len() as u32).to_le_bytes());
    for name in cloud.attributes.keys() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for p in &cloud.positions {
        for c in p.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for values in cloud.attributes.values() {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_cloud(bytes: &[u8]) -> Result<PointCloud> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CLOUD_MAGIC {
        return Err(Error::Format("not a binary point cloud (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CLOUD_VERSION {
        return Err(Error::Format(format!("unsupported cloud version {version}")));
    }
    let n = r.u64()? as usize;
    let n_attr = r.u32()? as usize;
    let mut names = Vec::with_capacity(n_attr);
    for _ in 0..n_attr {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("attribute name is not UTF-8".into()))?;
        names.push(name.to_string());
    }
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    // reject absurd counts before allocating
    if n.saturating_mul(24) > bytes.len() {
        return Err(Error::Format("truncated point data".into()));
    }
    let positions = (0..n).map(|_| r.vec3()).collect::<Result<Vec<_>>>()?;
    let mut attributes = std::collections::BTreeMap::new();
    for name in names {
        let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        attributes.insert(name, values);
    }
    r.finish()?;
    let cloud = PointCloud { positions, attributes };
    cloud.validate()?;
    Ok(cloud)
}

pub fn encode_field(field: &DensityField) -> Vec<u8> {
    let g = &field.grid;
    let mut out = Vec::with_capacity(4 + 4 + 48 + 12 + 4 * g.node_count());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    for v in [g.min, g.max] {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for n in g.resolution {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<DensityField> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != FIELD_MAGIC {
        return Err(Error::Format("not a density field (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FIELD_VERSION {
        return Err(Error::Format(format!("unsupported field version {version}")));
    }
    let min = r.vec3()?;
    let max = r.vec3()?;
    let resolution = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let grid = GridBox::new(min, max, resolution)?;
    let count = grid.node_count();
    if count.saturating_mul(4) != bytes.len() - r.pos {
        return Err(Error::Format(format!(
            "expected {count} node values, found {} bytes",
            bytes.len() - r.pos
        )));
    }
    let values = (0..count).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    DensityField::new(grid, values)
}

pub fn save_field(path: impl AsRef<Path>, field: &DensityField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}
