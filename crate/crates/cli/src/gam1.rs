//! GAM1: a minimal binary container for float map payloads.
//!
//! Layout: 4-byte magic `GAM1`, then height, width and a tag as 32-bit
//! little-endian unsigned integers (16 bytes of header total), then the
//! payload as row-major 32-bit little-endian floats. For anomaly maps the
//! tag is the instance id (0 = joint map); probability containers reuse it
//! as the class count K and stack K planes back to back.

use anyhow::{bail, Context, Result};
use gradanom_core::{AnomalyMap, Grid, MapScope};
use std::io::Write;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"GAM1";
pub const HEADER_LEN: usize = 16;

/// Serializes a header + payload into the GAM1 byte layout.
pub fn encode(height: u32, width: u32, tag: u32, payload: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len() * 4);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&height.to_le_bytes());
    bytes.extend_from_slice(&width.to_le_bytes());
    bytes.extend_from_slice(&tag.to_le_bytes());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Parses GAM1 bytes into (height, width, tag, payload). The payload must
/// hold a whole number of height*width planes, at least one.
pub fn decode(bytes: &[u8]) -> Result<(u32, u32, u32, Vec<f32>)> {
    if bytes.len() < HEADER_LEN {
        bail!("file too short for a GAM1 header ({} bytes)", bytes.len());
    }
    if bytes[0..4] != MAGIC {
        bail!("bad magic: expected \"GAM1\"");
    }
    let u32le = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let height = u32le(4);
    let width = u32le(8);
    let tag = u32le(12);
    let plane = (height as usize)
        .checked_mul(width as usize)
        .filter(|&n| n > 0)
        .context("zero or overflowing GAM1 dimensions")?;
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(4) || !(body.len() / 4).is_multiple_of(plane) || body.is_empty() {
        bail!(
            "payload of {} bytes is not a whole number of {height}x{width} float planes",
            body.len()
        );
    }
    let payload = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((height, width, tag, payload))
}

/// Writes bytes via a sibling temp file + rename so failures leave no
/// partial output behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes).context("writing temp file")?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Writes one anomaly map; the header tag is 0 for the joint map, else the
/// instance id. Values are stored as f32.
pub fn write_map(path: &Path, map: &AnomalyMap) -> Result<()> {
    let (h, w) = map.values().dims();
    let tag = match map.scope() {
        MapScope::Joint => 0,
        MapScope::Instance(id) => id,
    };
    let payload: Vec<f32> = map.values().data().iter().map(|&v| v as f32).collect();
    atomic_write(path, &encode(h as u32, w as u32, tag, &payload))
}

/// Reads a single-plane map file back as (tag, values).
pub fn read_map(path: &Path) -> Result<(u32, Grid<f64>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (h, w, tag, payload) = decode(&bytes).with_context(|| path.display().to_string())?;
    let plane = h as usize * w as usize;
    if payload.len() != plane {
        bail!(
            "{}: expected 1 plane, found {}",
            path.display(),
            payload.len() / plane
        );
    }
    let values = Grid::from_vec(
        h as usize,
        w as usize,
        payload.iter().map(|&v| v as f64).collect(),
    );
    Ok((tag, values))
}

/// Writes a K-plane probability container; the header tag carries K.
pub fn write_prob(path: &Path, height: u32, width: u32, planes: &[Vec<f32>]) -> Result<()> {
    if planes.is_empty() {
        bail!("probability container needs at least one plane");
    }
    let plane = height as usize * width as usize;
    let mut payload = Vec::with_capacity(plane * planes.len());
    for p in planes {
        if p.len() != plane {
            bail!("plane length {} does not match {height}x{width}", p.len());
        }
        payload.extend_from_slice(p);
    }
    atomic_write(path, &encode(height, width, planes.len() as u32, &payload))
}

/// Reads a probability container back as (K, height, width, plane-major
/// payload). The tag must match the stored plane count.
pub fn read_prob(path: &Path) -> Result<(u32, u32, u32, Vec<f32>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (h, w, k, payload) = decode(&bytes).with_context(|| path.display().to_string())?;
    let plane = h as usize * w as usize;
    if k as usize * plane != payload.len() {
        bail!(
            "{}: header claims {k} planes but payload holds {}",
            path.display(),
            payload.len() / plane
        );
    }
    Ok((k, h, w, payload))
}
