//! Scenes: an image-sized canvas plus one binary mask per instance.
//!
//! Masks are stored independently so instances may overlap arbitrarily; a
//! single label map cannot represent that. A label-map importer is provided
//! for non-overlapping datasets.
//!
//! Manifest format (UTF-8 JSON):
//! `{"height": H, "width": W, "instances": [{"id": 1, "mask": "rel/path.png"}, ...]}`
//! with mask paths resolved relative to the manifest file. Mask images are
//! 8-bit or 16-bit single-channel PNG, nonzero = foreground.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::Grid;

/// Errors raised while building scenes or reading/writing scene files.
#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("canvas must be at least 1x1, got {height}x{width}")]
    EmptyCanvas { height: usize, width: usize },
    #[error("instance ids must be positive")]
    ZeroInstanceId,
    #[error("duplicate instance id {0}")]
    DuplicateId(u32),
    #[error("instance {id}: mask is {got_h}x{got_w}, scene is {want_h}x{want_w}")]
    DimensionMismatch {
        id: u32,
        want_h: usize,
        want_w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("instance {0}: mask has no foreground pixels")]
    EmptyMask(u32),
    #[error("{path}: i/o error")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed manifest")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: image error")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: expected a single-channel 8-bit or 16-bit image")]
    BadPixelFormat { path: PathBuf },
}

/// One instance: a positive id and a binary foreground mask.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMask {
    id: u32,
    mask: Grid<bool>,
}

impl InstanceMask {
    /// Builds an instance mask. The id must be positive and the mask must
    /// contain at least one foreground pixel.
    pub fn new(id: u32, mask: Grid<bool>) -> Result<Self, SceneError> {
        if id == 0 {
            return Err(SceneError::ZeroInstanceId);
        }
        if !mask.data().iter().any(|&b| b) {
            return Err(SceneError::EmptyMask(id));
        }
        Ok(Self { id, mask })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask.at(x, y)
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.mask.data().iter().filter(|&&b| b).count()
    }

    /// Iterates foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .filter_map(|(x, y, &b)| if b { Some((x, y)) } else { None })
    }
}

/// A canvas with an ordered sequence of (possibly overlapping) instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    height: usize,
    width: usize,
    instances: Vec<InstanceMask>,
}

impl Scene {
    /// Validates canvas size, per-instance dimensions and id uniqueness.
    pub fn new(
        height: usize,
        width: usize,
        instances: Vec<InstanceMask>,
    ) -> Result<Self, SceneError> {
        if height == 0 || width == 0 {
            return Err(SceneError::EmptyCanvas { height, width });
        }
        let mut seen = HashSet::new();
        for inst in &instances {
            if !seen.insert(inst.id) {
                return Err(SceneError::DuplicateId(inst.id));
            }
            if inst.mask.dims() != (height, width) {
                return Err(SceneError::DimensionMismatch {
                    id: inst.id,
                    want_h: height,
                    want_w: width,
                    got_h: inst.mask.height(),
                    got_w: inst.mask.width(),
                });
            }
        }
        Ok(Self {
            height,
            width,
            instances,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn instances(&self) -> &[InstanceMask] {
        &self.instances
    }

    /// Translates every mask by integer `(dx, dy)`. Fails with `EmptyMask`
    /// if any instance would lose all of its foreground pixels.
    pub fn translate(&self, dx: i64, dy: i64) -> Result<Scene, SceneError> {
        let mut moved = Vec::with_capacity(self.instances.len());
        for inst in &self.instances {
            let mut mask = Grid::filled(self.height, self.width, false);
            for (x, y) in inst.foreground() {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    mask.set(nx as usize, ny as usize, true);
                }
            }
            moved.push(InstanceMask::new(inst.id, mask)?);
        }
        Scene::new(self.height, self.width, moved)
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    height: u32,
    width: u32,
    instances: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: u32,
    mask: String,
}

/// Loads a scene from a manifest file, decoding each referenced mask PNG.
/// Instance order matches the manifest order.
pub fn load_manifest(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|source| SceneError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let height = manifest.height as usize;
    let width = manifest.width as usize;
    if height == 0 || width == 0 {
        return Err(SceneError::EmptyCanvas { height, width });
    }

    let mut instances = Vec::with_capacity(manifest.instances.len());
    for entry in &manifest.instances {
        let mask_path = base.join(&entry.mask);
        let grid = decode_mask_png(&mask_path)?;
        if grid.dims() != (height, width) {
            return Err(SceneError::DimensionMismatch {
                id: entry.id,
                want_h: height,
                want_w: width,
                got_h: grid.height(),
                got_w: grid.width(),
            });
        }
        instances.push(InstanceMask::new(entry.id, grid)?);
    }
    Scene::new(height, width, instances)
}

/// Writes `manifest.json` plus one `mask_<id>.png` per instance into `dir`.
/// Returns the manifest path. `load_manifest` on the result reproduces the
/// scene bit-for-bit.
pub fn save_manifest(scene: &Scene, dir: &Path) -> Result<PathBuf, SceneError> {
    std::fs::create_dir_all(dir).map_err(|source| SceneError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(scene.instances().len());
    for inst in scene.instances() {
        let name = format!("mask_{:04}.png", inst.id());
        let img_path = dir.join(&name);
        let mut img = image::GrayImage::new(scene.width() as u32, scene.height() as u32);
        for (x, y) in inst.foreground() {
            img.put_pixel(x as u32, y as u32, image::Luma([255u8]));
        }
        img.save(&img_path).map_err(|source| SceneError::Image {
            path: img_path.clone(),
            source,
        })?;
        entries.push(ManifestEntry {
            id: inst.id(),
            mask: name,
        });
    }
    let manifest = ManifestFile {
        height: scene.height() as u32,
        width: scene.width() as u32,
        instances: entries,
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    std::fs::write(&manifest_path, text).map_err(|source| SceneError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(manifest_path)
}

/// Imports a 16-bit single-channel label map (0 = background, k = instance
/// id k) as a scene of per-instance masks, ordered by ascending id.
pub fn load_label_map(path: &Path) -> Result<Scene, SceneError> {
    let img = image::open(path).map_err(|source| SceneError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let labels = match img {
        image::DynamicImage::ImageLuma16(buf) => buf,
        _ => {
            return Err(SceneError::BadPixelFormat {
                path: path.to_path_buf(),
            })
        }
    };
    let (w, h) = (labels.width() as usize, labels.height() as usize);
    let mut ids: Vec<u16> = labels
        .pixels()
        .map(|p| p.0[0])
        .filter(|&v| v != 0)
        .collect();
    ids.sort_unstable();
    ids.dedup();

    let mut instances = Vec::with_capacity(ids.len());
    for id in ids {
        let mut mask = Grid::filled(h, w, false);
        for (x, y, p) in labels.enumerate_pixels() {
            if p.0[0] == id {
                mask.set(x as usize, y as usize, true);
            }
        }
        instances.push(InstanceMask::new(id as u32, mask)?);
    }
    Scene::new(h, w, instances)
}

fn decode_mask_png(path: &Path) -> Result<Grid<bool>, SceneError> {
    let img = image::open(path).map_err(|source| match &source {
        image::ImageError::IoError(_) => SceneError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, source.to_string()),
        },
        _ => SceneError::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let (h, w) = (img.height() as usize, img.width() as usize);
    let data = match img {
        image::DynamicImage::ImageLuma8(buf) => {
            buf.pixels().map(|p| p.0[0] != 0).collect::<Vec<_>>()
        }
        image::DynamicImage::ImageLuma16(buf) => {
            buf.pixels().map(|p| p.0[0] != 0).collect::<Vec<_>>()
        }
        _ => {
            return Err(SceneError::BadPixelFormat {
                path: path.to_path_buf(),
            })
        }
    };
    Ok(Grid::from_vec(h, w, data))
}
