//! Per-instance radial fields and the stacked multi-layer field view.
//!
//! Each instance gets a radial distance map z = (x−x̄)²+(y−ȳ)² over its
//! support and a radial direction map holding the full-quadrant angle of
//! ∇z — the outward direction from the centroid. Off-support pixels carry
//! `f64::NAN` as an explicit "undefined" sentinel; the pixel whose offset
//! from the centroid is exactly (0,0) is likewise undefined in the angle
//! map and contributes no layer to the stack.
//!
//! Centroid arithmetic is kept as exact integer sums so that integer
//! translations of a scene reproduce bit-identical offsets and angles.

use std::collections::HashMap;

use crate::grid::Grid;
use crate::scene::{InstanceMask, Scene};

/// Wraps an angle to the half-open interval (−π, π].
pub fn wrap_to_pi(a: f64) -> f64 {
    let m = a.rem_euclid(std::f64::consts::TAU);
    if m > std::f64::consts::PI {
        m - std::f64::consts::TAU
    } else {
        m
    }
}

/// Geometric center of a mask, stored as exact integer coordinate sums.
///
/// The exact form matters: per-pixel offsets are derived from the integer
/// numerator count·x − Σx, which is invariant under integer translation,
/// so translated scenes yield bit-identical distances and angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Centroid {
    sum_x: i64,
    sum_y: i64,
    count: i64,
}

impl Centroid {
    pub fn of(mask: &InstanceMask) -> Centroid {
        let (mut sum_x, mut sum_y, mut count) = (0i64, 0i64, 0i64);
        for (x, y) in mask.foreground() {
            sum_x += x as i64;
            sum_y += y as i64;
            count += 1;
        }
        // InstanceMask guarantees at least one foreground pixel.
        Centroid {
            sum_x,
            sum_y,
            count,
        }
    }

    pub fn x(&self) -> f64 {
        self.sum_x as f64 / self.count as f64
    }

    pub fn y(&self) -> f64 {
        self.sum_y as f64 / self.count as f64
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x(), self.y())
    }

    #[inline]
    fn dx_num(&self, x: usize) -> i64 {
        x as i64 * self.count - self.sum_x
    }

    #[inline]
    fn dy_num(&self, y: usize) -> i64 {
        y as i64 * self.count - self.sum_y
    }

    /// True iff pixel (x,y) sits exactly on the centroid — possible only
    /// when the centroid has integer coordinates.
    #[inline]
    pub fn is_degenerate_at(&self, x: usize, y: usize) -> bool {
        self.dx_num(x) == 0 && self.dy_num(y) == 0
    }

    /// Offset (x−x̄, y−ȳ) of a pixel from the centroid.
    pub fn offset(&self, x: usize, y: usize) -> (f64, f64) {
        let c = self.count as f64;
        (self.dx_num(x) as f64 / c, self.dy_num(y) as f64 / c)
    }

    /// Squared Euclidean distance of a pixel from the centroid.
    pub fn squared_distance(&self, x: usize, y: usize) -> f64 {
        let (dx, dy) = self.offset(x, y);
        dx * dx + dy * dy
    }

    /// Full-quadrant angle of the outward radial direction at (x,y), in
    /// (−π, π]. Meaningless at the degenerate pixel; callers exclude it.
    ///
    /// atan2 runs on the integer numerators directly: scaling both
    /// arguments by the (positive) pixel count leaves the angle unchanged
    /// and avoids two inexact divisions.
    pub fn angle(&self, x: usize, y: usize) -> f64 {
        (self.dy_num(y) as f64).atan2(self.dx_num(x) as f64)
    }
}

/// Centroid of a mask as real-valued pixel coordinates.
pub fn centroid(mask: &InstanceMask) -> (f64, f64) {
    Centroid::of(mask).xy()
}

/// Radial distance map: z = (x−x̄)²+(y−ȳ)² on the support, NaN off.
pub fn radial_distance_map(mask: &InstanceMask, c: &Centroid) -> Grid<f64> {
    let g = mask.mask();
    let mut out = Grid::filled(g.height(), g.width(), f64::NAN);
    for (x, y) in mask.foreground() {
        out.set(x, y, c.squared_distance(x, y));
    }
    out
}

/// Radial direction map: angle of ∇z on the support, NaN off the
/// support and at the centroid-degenerate pixel.
pub fn radial_angle_map(mask: &InstanceMask, c: &Centroid) -> Grid<f64> {
    let g = mask.mask();
    let mut out = Grid::filled(g.height(), g.width(), f64::NAN);
    for (x, y) in mask.foreground() {
        if !c.is_degenerate_at(x, y) {
            out.set(x, y, c.angle(x, y));
        }
    }
    out
}

/// One instance's id, centroid and both radial fields.
#[derive(Clone, Debug)]
pub struct InstanceField {
    id: u32,
    centroid: Centroid,
    distance_map: Grid<f64>,
    angle_map: Grid<f64>,
}

impl InstanceField {
    pub fn build(inst: &InstanceMask) -> InstanceField {
        let c = Centroid::of(inst);
        InstanceField {
            id: inst.id(),
            centroid: c,
            distance_map: radial_distance_map(inst, &c),
            angle_map: radial_angle_map(inst, &c),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.centroid.xy()
    }

    pub fn distance_map(&self) -> &Grid<f64> {
        &self.distance_map
    }

    pub fn angle_map(&self) -> &Grid<f64> {
        &self.angle_map
    }
}

/// Per-pixel stack of (instance id, direction angle) layers over a scene,
/// in CSR layout, plus derived planes consumed by the window statistics:
/// min/max layer id per pixel (activity tests) and an interned signature
/// of each pixel's covering-instance set (interior-intersection tests).
///
/// Coverage signatures are built from mask membership, so a degenerate
/// centroid pixel is still *covered* by its instance even though it
/// contributes no angle layer.
#[derive(Clone, Debug)]
pub struct FieldStack {
    height: usize,
    width: usize,
    offsets: Vec<u32>,
    ids: Vec<u32>,
    angles: Vec<f64>,
    min_id: Vec<u32>,
    max_id: Vec<u32>,
    sig: Vec<u32>,
    sig_sizes: Vec<u32>,
}

impl FieldStack {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn range(&self, idx: usize) -> std::ops::Range<usize> {
        self.offsets[idx] as usize..self.offsets[idx + 1] as usize
    }

    /// Instance ids layered at pixel (x,y), in scene instance order.
    pub fn layer_ids(&self, x: usize, y: usize) -> &[u32] {
        &self.ids[self.range(y * self.width + x)]
    }

    /// Direction angles layered at pixel (x,y), parallel to `layer_ids`.
    pub fn layer_angles(&self, x: usize, y: usize) -> &[f64] {
        &self.angles[self.range(y * self.width + x)]
    }

    /// Total layer count over all pixels.
    pub fn total_layers(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub(crate) fn angles_at(&self, idx: usize) -> &[f64] {
        &self.angles[self.range(idx)]
    }

    /// Per-pixel minimum layer id; `u32::MAX` where no layers exist.
    pub(crate) fn min_id_plane(&self) -> &[u32] {
        &self.min_id
    }

    /// Per-pixel maximum layer id; 0 where no layers exist.
    pub(crate) fn max_id_plane(&self) -> &[u32] {
        &self.max_id
    }

    /// Per-pixel interned covering-set signature; 0 = background.
    pub(crate) fn sig_plane(&self) -> &[u32] {
        &self.sig
    }

    /// Cardinality of the covering set behind a signature index.
    pub(crate) fn sig_size(&self, sig: u32) -> u32 {
        self.sig_sizes[sig as usize]
    }

    fn finalize(
        height: usize,
        width: usize,
        offsets: Vec<u32>,
        ids: Vec<u32>,
        angles: Vec<f64>,
        cov_offsets: Vec<u32>,
        cov_ids: Vec<u32>,
    ) -> FieldStack {
        let hw = height * width;
        let mut min_id = vec![u32::MAX; hw];
        let mut max_id = vec![0u32; hw];
        for idx in 0..hw {
            for &id in &ids[offsets[idx] as usize..offsets[idx + 1] as usize] {
                min_id[idx] = min_id[idx].min(id);
                max_id[idx] = max_id[idx].max(id);
            }
        }

        let mut table: HashMap<Vec<u32>, u32> = HashMap::new();
        table.insert(Vec::new(), 0);
        let mut sig_sizes = vec![0u32];
        let mut sig = vec![0u32; hw];
        for idx in 0..hw {
            let cov = &cov_ids[cov_offsets[idx] as usize..cov_offsets[idx + 1] as usize];
            if cov.is_empty() {
                continue;
            }
            sig[idx] = match table.get(cov) {
                Some(&s) => s,
                None => {
                    let s = sig_sizes.len() as u32;
                    table.insert(cov.to_vec(), s);
                    sig_sizes.push(cov.len() as u32);
                    s
                }
            };
        }

        FieldStack {
            height,
            width,
            offsets,
            ids,
            angles,
            min_id,
            max_id,
            sig,
            sig_sizes,
        }
    }

    /// Test-only constructor from explicit per-pixel layer lists; the
    /// covering set of a pixel is taken to be its layer ids.
    #[cfg(test)]
    pub(crate) fn from_pixel_layers(
        height: usize,
        width: usize,
        pixels: Vec<Vec<(u32, f64)>>,
    ) -> FieldStack {
        assert_eq!(pixels.len(), height * width);
        let mut offsets = Vec::with_capacity(pixels.len() + 1);
        let mut ids = Vec::new();
        let mut angles = Vec::new();
        offsets.push(0u32);
        for layers in &pixels {
            for &(id, a) in layers {
                ids.push(id);
                angles.push(a);
            }
            offsets.push(ids.len() as u32);
        }
        let cov_offsets = offsets.clone();
        let cov_ids = ids.clone();
        FieldStack::finalize(height, width, offsets, ids, angles, cov_offsets, cov_ids)
    }
}

fn prefix_sum(counts: &[u32]) -> Vec<u32> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0u32;
    offsets.push(0);
    for &c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

/// Stacks every instance's direction layers into the per-pixel view.
/// Layer order within a pixel follows scene instance order; degenerate
/// centroid pixels contribute no layer.
pub fn build_field_stack(scene: &Scene) -> FieldStack {
    let (h, w) = (scene.height(), scene.width());
    let hw = h * w;
    let cents: Vec<Centroid> = scene.instances().iter().map(Centroid::of).collect();

    let mut layer_counts = vec![0u32; hw];
    let mut cov_counts = vec![0u32; hw];
    for (inst, c) in scene.instances().iter().zip(&cents) {
        for (x, y) in inst.foreground() {
            let idx = y * w + x;
            cov_counts[idx] += 1;
            if !c.is_degenerate_at(x, y) {
                layer_counts[idx] += 1;
            }
        }
    }

    let offsets = prefix_sum(&layer_counts);
    let cov_offsets = prefix_sum(&cov_counts);
    let mut ids = vec![0u32; offsets[hw] as usize];
    let mut angles = vec![0f64; offsets[hw] as usize];
    let mut cov_ids = vec![0u32; cov_offsets[hw] as usize];
    let mut cursor: Vec<u32> = offsets[..hw].to_vec();
    let mut cov_cursor: Vec<u32> = cov_offsets[..hw].to_vec();
    for (inst, c) in scene.instances().iter().zip(&cents) {
        for (x, y) in inst.foreground() {
            let idx = y * w + x;
            cov_ids[cov_cursor[idx] as usize] = inst.id();
            cov_cursor[idx] += 1;
            if !c.is_degenerate_at(x, y) {
                let at = cursor[idx] as usize;
                ids[at] = inst.id();
                angles[at] = c.angle(x, y);
                cursor[idx] += 1;
            }
        }
    }

    FieldStack::finalize(h, w, offsets, ids, angles, cov_offsets, cov_ids)
}
