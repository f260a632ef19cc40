//! Deterministic synthesis of cross/touch/overlap test scenes.
//!
//! Rasterization is pixel-center point-in-shape with no anti-aliasing: a
//! pixel (x,y) is foreground iff the point (x,y) lies inside the analytic
//! shape (boundary inclusive). Randomness comes from ChaCha8 seeded with
//! the user seed, so identical arguments always reproduce identical
//! scenes, on any platform. Each preset retries a bounded number of draws
//! and then falls back to a fixed canonical layout, so construction never
//! fails on a valid canvas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::wrap_to_pi;
use crate::grid::Grid;
use crate::scene::{InstanceMask, Scene, SceneError};

use std::f64::consts::{FRAC_PI_2, PI};

/// Smallest canvas side the presets support.
pub const MIN_CANVAS: usize = 32;

const MAX_ATTEMPTS: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("canvas must be at least {MIN_CANVAS}x{MIN_CANVAS}, got {height}x{width}")]
    CanvasTooSmall { height: usize, width: usize },
    #[error("shape {id}: {reason}")]
    BadShape { id: u32, reason: String },
    #[error("shape {id} covers no pixel of the canvas")]
    OffCanvas { id: u32 },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Analytic shape geometry, in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeKind {
    Disk {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        theta: f64,
    },
    /// Rectangle of half-extents (half_len, half_width) rotated by theta.
    RotatedBar {
        cx: f64,
        cy: f64,
        half_len: f64,
        half_width: f64,
        theta: f64,
    },
    /// Axis-aligned rectangle with inclusive bounds.
    AxisRect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeSpec {
    pub id: u32,
    pub kind: ShapeKind,
}

impl ShapeKind {
    fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite();
        match *self {
            ShapeKind::Disk { cx, cy, r } => {
                if !(ok(cx) && ok(cy) && ok(r)) {
                    return Err("non-finite parameter".into());
                }
                if r < 1.0 {
                    return Err(format!("radius {r} must be at least 1 pixel"));
                }
            }
            ShapeKind::Ellipse {
                cx,
                cy,
                rx,
                ry,
                theta,
            } => {
                if !(ok(cx) && ok(cy) && ok(rx) && ok(ry) && ok(theta)) {
                    return Err("non-finite parameter".into());
                }
                if rx < 1.0 || ry < 1.0 {
                    return Err(format!("radii ({rx}, {ry}) must be at least 1 pixel"));
                }
                if !(theta > -PI && theta <= PI) {
                    return Err(format!("rotation {theta} outside (-pi, pi]"));
                }
            }
            ShapeKind::RotatedBar {
                cx,
                cy,
                half_len,
                half_width,
                theta,
            } => {
                if !(ok(cx) && ok(cy) && ok(half_len) && ok(half_width) && ok(theta)) {
                    return Err("non-finite parameter".into());
                }
                if half_len < 1.0 || half_width < 1.0 {
                    return Err(format!(
                        "half-extents ({half_len}, {half_width}) must be at least 1 pixel"
                    ));
                }
                if !(theta > -PI && theta <= PI) {
                    return Err(format!("rotation {theta} outside (-pi, pi]"));
                }
            }
            ShapeKind::AxisRect { x0, y0, x1, y1 } => {
                if !(ok(x0) && ok(y0) && ok(x1) && ok(y1)) {
                    return Err("non-finite parameter".into());
                }
                if x1 < x0 || y1 < y0 {
                    return Err("empty rectangle bounds".into());
                }
            }
        }
        Ok(())
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            ShapeKind::Disk { cx, cy, r } => {
                let (dx, dy) = (px - cx, py - cy);
                dx * dx + dy * dy <= r * r
            }
            ShapeKind::Ellipse {
                cx,
                cy,
                rx,
                ry,
                theta,
            } => {
                let (dx, dy) = (px - cx, py - cy);
                let (s, c) = theta.sin_cos();
                let u = (dx * c + dy * s) / rx;
                let v = (-dx * s + dy * c) / ry;
                u * u + v * v <= 1.0
            }
            ShapeKind::RotatedBar {
                cx,
                cy,
                half_len,
                half_width,
                theta,
            } => {
                let (dx, dy) = (px - cx, py - cy);
                let (s, c) = theta.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                u.abs() <= half_len && v.abs() <= half_width
            }
            ShapeKind::AxisRect { x0, y0, x1, y1 } => px >= x0 && px <= x1 && py >= y0 && py <= y1,
        }
    }

    /// Conservative bounding box (cx − e .. cx + e per axis).
    fn bbox(&self) -> (f64, f64, f64, f64) {
        match *self {
            ShapeKind::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            ShapeKind::Ellipse { cx, cy, rx, ry, .. } => {
                let e = rx.max(ry);
                (cx - e, cy - e, cx + e, cy + e)
            }
            ShapeKind::RotatedBar {
                cx,
                cy,
                half_len,
                half_width,
                ..
            } => {
                let e = (half_len * half_len + half_width * half_width).sqrt();
                (cx - e, cy - e, cx + e, cy + e)
            }
            ShapeKind::AxisRect { x0, y0, x1, y1 } => (x0, y0, x1, y1),
        }
    }
}

/// Rasterizes a shape onto a canvas. Errors if parameters are invalid or
/// no pixel center falls inside the shape.
pub fn rasterize(
    spec: &ShapeSpec,
    height: usize,
    width: usize,
) -> Result<InstanceMask, SynthError> {
    spec.kind
        .validate()
        .map_err(|reason| SynthError::BadShape {
            id: spec.id,
            reason,
        })?;
    let (bx0, by0, bx1, by1) = spec.kind.bbox();
    let x0 = bx0.floor().max(0.0) as usize;
    let y0 = by0.floor().max(0.0) as usize;
    let x1 = (bx1.ceil().min(width as f64 - 1.0)).max(0.0) as usize;
    let y1 = (by1.ceil().min(height as f64 - 1.0)).max(0.0) as usize;

    let mut mask = Grid::filled(height, width, false);
    let mut any = false;
    if bx1 >= 0.0 && by1 >= 0.0 && bx0 <= width as f64 - 1.0 && by0 <= height as f64 - 1.0 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if spec.kind.contains(x as f64, y as f64) {
                    mask.set(x, y, true);
                    any = true;
                }
            }
        }
    }
    if !any {
        return Err(SynthError::OffCanvas { id: spec.id });
    }
    Ok(InstanceMask::new(spec.id, mask)?)
}

/// Scene templates covering the crossing / touching / overlapping
/// configurations the anomaly maps are built to expose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    OverlapPair,
    CrossBars,
    TouchSquares,
    RandomCluster,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::OverlapPair,
        Preset::CrossBars,
        Preset::TouchSquares,
        Preset::RandomCluster,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::OverlapPair => "overlap-pair",
            Preset::CrossBars => "cross-bars",
            Preset::TouchSquares => "touch-squares",
            Preset::RandomCluster => "random-cluster",
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected one of: overlap-pair, cross-bars, touch-squares, random-cluster)"))
    }
}

/// Synthesizes a deterministic test scene.
pub fn synth_scene(
    preset: Preset,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<Scene, SynthError> {
    if height < MIN_CANVAS || width < MIN_CANVAS {
        return Err(SynthError::CanvasTooSmall { height, width });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match preset {
        Preset::OverlapPair => overlap_pair(&mut rng, height, width),
        Preset::CrossBars => cross_bars(&mut rng, height, width),
        Preset::TouchSquares => touch_squares(&mut rng, height, width),
        Preset::RandomCluster => random_cluster(&mut rng, height, width),
    }
}

fn intersection_count(a: &InstanceMask, b: &InstanceMask) -> usize {
    a.mask()
        .data()
        .iter()
        .zip(b.mask().data())
        .filter(|&(&x, &y)| x && y)
        .count()
}

/// True iff some pixel of `a` lies within Chebyshev distance 1 of a pixel
/// of `b` (touching or overlapping).
fn interacts(a: &InstanceMask, b: &InstanceMask) -> bool {
    let g = b.mask();
    let (h, w) = g.dims();
    a.foreground().any(|(x, y)| {
        let x0 = x.saturating_sub(1);
        let y0 = y.saturating_sub(1);
        let x1 = (x + 1).min(w - 1);
        let y1 = (y + 1).min(h - 1);
        (y0..=y1).any(|ny| (x0..=x1).any(|nx| g.at(nx, ny)))
    })
}

fn fits(kind: &ShapeKind, height: usize, width: usize, margin: f64) -> bool {
    let (x0, y0, x1, y1) = kind.bbox();
    x0 >= margin
        && y0 >= margin
        && x1 <= width as f64 - 1.0 - margin
        && y1 <= height as f64 - 1.0 - margin
}

/// Two disks with a deep, wide intersection: the lens is large enough to
/// contain edge-free interior windows at the default window size.
fn overlap_pair(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Result<Scene, SynthError> {
    let m = height.min(width) as f64;
    let (cxm, cym) = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
    for _ in 0..MAX_ATTEMPTS {
        let r1 = rng.random_range(0.20..=0.28) * m;
        let r2 = rng.random_range(0.20..=0.28) * m;
        let theta = rng.random_range(-PI..PI);
        let d = rng.random_range(0.32..=0.48) * (r1 + r2);
        let jx = rng.random_range(-0.03..=0.03) * m;
        let jy = rng.random_range(-0.03..=0.03) * m;
        let (ux, uy) = (theta.cos(), theta.sin());
        let k1 = ShapeKind::Disk {
            cx: cxm + jx - ux * d / 2.0,
            cy: cym + jy - uy * d / 2.0,
            r: r1,
        };
        let k2 = ShapeKind::Disk {
            cx: cxm + jx + ux * d / 2.0,
            cy: cym + jy + uy * d / 2.0,
            r: r2,
        };
        if !fits(&k1, height, width, 1.0) || !fits(&k2, height, width, 1.0) {
            continue;
        }
        let a = rasterize(&ShapeSpec { id: 1, kind: k1 }, height, width)?;
        let b = rasterize(&ShapeSpec { id: 2, kind: k2 }, height, width)?;
        if intersection_count(&a, &b) > 0 {
            return Ok(Scene::new(height, width, vec![a, b])?);
        }
    }
    // Canonical fallback: horizontal pair, guaranteed overlap.
    let r = 0.22 * m;
    let d = 0.4 * (r + r);
    let a = rasterize(
        &ShapeSpec {
            id: 1,
            kind: ShapeKind::Disk {
                cx: cxm - d / 2.0,
                cy: cym,
                r,
            },
        },
        height,
        width,
    )?;
    let b = rasterize(
        &ShapeSpec {
            id: 2,
            kind: ShapeKind::Disk {
                cx: cxm + d / 2.0,
                cy: cym,
                r,
            },
        },
        height,
        width,
    )?;
    Ok(Scene::new(height, width, vec![a, b])?)
}

/// Two elongated bars crossing near the canvas center.
fn cross_bars(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Result<Scene, SynthError> {
    let m = height.min(width) as f64;
    let (cxm, cym) = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
    for _ in 0..MAX_ATTEMPTS {
        let t1 = rng.random_range(-PI..PI);
        let t2 = wrap_to_pi(t1 + FRAC_PI_2 + rng.random_range(-0.3..=0.3));
        let half_len = rng.random_range(0.28..=0.36) * m;
        let half_width = (rng.random_range(0.035..=0.06) * m).max(1.5);
        let j = 0.04 * m;
        let k1 = ShapeKind::RotatedBar {
            cx: cxm + rng.random_range(-j..=j),
            cy: cym + rng.random_range(-j..=j),
            half_len,
            half_width,
            theta: t1,
        };
        let k2 = ShapeKind::RotatedBar {
            cx: cxm + rng.random_range(-j..=j),
            cy: cym + rng.random_range(-j..=j),
            half_len,
            half_width,
            theta: t2,
        };
        if !fits(&k1, height, width, 1.0) || !fits(&k2, height, width, 1.0) {
            continue;
        }
        let a = rasterize(&ShapeSpec { id: 1, kind: k1 }, height, width)?;
        let b = rasterize(&ShapeSpec { id: 2, kind: k2 }, height, width)?;
        if intersection_count(&a, &b) > 0 {
            return Ok(Scene::new(height, width, vec![a, b])?);
        }
    }
    let a = rasterize(
        &ShapeSpec {
            id: 1,
            kind: ShapeKind::RotatedBar {
                cx: cxm,
                cy: cym,
                half_len: 0.33 * m,
                half_width: (0.05 * m).max(1.5),
                theta: 0.3,
            },
        },
        height,
        width,
    )?;
    let b = rasterize(
        &ShapeSpec {
            id: 2,
            kind: ShapeKind::RotatedBar {
                cx: cxm,
                cy: cym,
                half_len: 0.33 * m,
                half_width: (0.05 * m).max(1.5),
                theta: 0.3 + FRAC_PI_2,
            },
        },
        height,
        width,
    )?;
    Ok(Scene::new(height, width, vec![a, b])?)
}

/// Two axis-aligned rectangles sharing one boundary edge: zero pixel
/// overlap, Chebyshev gap exactly 1 across the shared edge.
fn touch_squares(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Result<Scene, SynthError> {
    let vertical_split = rng.random_bool(0.5);
    // Work in the split/along axes, then map back.
    let (split_n, along_n) = if vertical_split {
        (width, height)
    } else {
        (height, width)
    };
    let sm = rng.random_range(0.35..=0.65) * split_n as f64;
    let sm = (sm as usize).clamp(8, split_n - 9);
    let span_a = (rng.random_range(0.15..=0.30) * split_n as f64) as usize;
    let span_b = (rng.random_range(0.15..=0.30) * split_n as f64) as usize;
    let a_lo = sm.saturating_sub(span_a.max(3)).max(2);
    let b_hi = (sm + 1 + span_b.max(3)).min(split_n - 3);
    let third = along_n / 3;
    let a0 = rng.random_range(2..=third.max(3)) as f64;
    let a1 = rng.random_range(2 * third..=along_n - 3) as f64;
    let b0 = rng.random_range(2..=third.max(3)) as f64;
    let b1 = rng.random_range(2 * third..=along_n - 3) as f64;

    let (ka, kb) = if vertical_split {
        (
            ShapeKind::AxisRect {
                x0: a_lo as f64,
                y0: a0,
                x1: sm as f64,
                y1: a1,
            },
            ShapeKind::AxisRect {
                x0: (sm + 1) as f64,
                y0: b0,
                x1: b_hi as f64,
                y1: b1,
            },
        )
    } else {
        (
            ShapeKind::AxisRect {
                x0: a0,
                y0: a_lo as f64,
                x1: a1,
                y1: sm as f64,
            },
            ShapeKind::AxisRect {
                x0: b0,
                y0: (sm + 1) as f64,
                x1: b1,
                y1: b_hi as f64,
            },
        )
    };
    let a = rasterize(&ShapeSpec { id: 1, kind: ka }, height, width)?;
    let b = rasterize(&ShapeSpec { id: 2, kind: kb }, height, width)?;
    debug_assert_eq!(intersection_count(&a, &b), 0);
    debug_assert!(interacts(&a, &b));
    Ok(Scene::new(height, width, vec![a, b])?)
}

/// 3–8 mixed shapes clustered so that at least one pair crosses, touches
/// or overlaps.
fn random_cluster(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Result<Scene, SynthError> {
    let m = height.min(width) as f64;
    let (cxm, cym) = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
    for _ in 0..MAX_ATTEMPTS {
        let n = rng.random_range(3..=8u32);
        let ccx = cxm + rng.random_range(-0.08..=0.08) * m;
        let ccy = cym + rng.random_range(-0.08..=0.08) * m;
        let mut masks = Vec::with_capacity(n as usize);
        let mut ok = true;
        for id in 1..=n {
            let ang = rng.random_range(-PI..PI);
            let rad = rng.random_range(0.0..=0.22) * m;
            let (cx, cy) = (ccx + ang.cos() * rad, ccy + ang.sin() * rad);
            let kind = match rng.random_range(0..4u32) {
                0 => ShapeKind::Disk {
                    cx,
                    cy,
                    r: rng.random_range(0.06..=0.14) * m,
                },
                1 => ShapeKind::Ellipse {
                    cx,
                    cy,
                    rx: rng.random_range(0.07..=0.16) * m,
                    ry: rng.random_range(0.05..=0.10) * m,
                    theta: rng.random_range(-PI..PI),
                },
                2 => ShapeKind::RotatedBar {
                    cx,
                    cy,
                    half_len: rng.random_range(0.10..=0.20) * m,
                    half_width: (rng.random_range(0.025..=0.05) * m).max(1.5),
                    theta: rng.random_range(-PI..PI),
                },
                _ => {
                    let hx = rng.random_range(0.05..=0.11) * m;
                    let hy = rng.random_range(0.05..=0.11) * m;
                    ShapeKind::AxisRect {
                        x0: cx - hx,
                        y0: cy - hy,
                        x1: cx + hx,
                        y1: cy + hy,
                    }
                }
            };
            match rasterize(&ShapeSpec { id, kind }, height, width) {
                Ok(mask) => masks.push(mask),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let has_interaction = masks
            .iter()
            .enumerate()
            .any(|(i, a)| masks[i + 1..].iter().any(|b| interacts(a, b)));
        if has_interaction {
            return Ok(Scene::new(height, width, masks)?);
        }
    }
    // Canonical fallback: three mutually overlapping disks.
    let r = 0.14 * m;
    let mut masks = Vec::new();
    for (id, (ox, oy)) in [(0.0, -0.5), (-0.55, 0.35), (0.55, 0.35)]
        .iter()
        .enumerate()
    {
        masks.push(rasterize(
            &ShapeSpec {
                id: id as u32 + 1,
                kind: ShapeKind::Disk {
                    cx: cxm + ox * r,
                    cy: cym + oy * r,
                    r,
                },
            },
            height,
            width,
        )?);
    }
    Ok(Scene::new(height, width, masks)?)
}
