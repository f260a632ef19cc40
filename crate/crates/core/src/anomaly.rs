//! Gradient-anomaly map generation: slide a window over the stacked
//! direction fields, score each active window with the direction-angle
//! standard deviation or the interior-difference variant, combine
//! window scores into a joint map by max-accumulation, normalize to the
//! global max and scale by f_GA, then restrict to per-instance maps.
//!
//! Two implementations of the joint map exist and must agree within 1e−6
//! everywhere: a naive per-window reference, and an optimized path built
//! from exact integer integral images plus monotonic-deque sliding
//! filters. The optimized path quantizes angles to 2⁻³⁰ ticks so the
//! windowed count/sum/square-sum arithmetic is exact in i64/i128 —
//! f64 integral images would lose up to ~5e−6 to cancellation near σ=0,
//! which the equivalence tolerance cannot absorb. The quantization itself
//! perturbs σ by at most ~2⁻³⁰.

use crate::fields::{wrap_to_pi, FieldStack};
use crate::grid::Grid;
use crate::scene::Scene;

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("window size must be at least 2, got {0}")]
    InvalidWindow(usize),
    #[error("f_GA must be positive and finite, got {0}")]
    InvalidFactor(f64),
    #[error("map is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    DimensionMismatch {
        want_h: usize,
        want_w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("anomaly map values must be finite and non-negative")]
    InvalidValue,
}

/// Window statistic: plain standard deviation of the pooled angles, or the
/// interior-difference special case with std fallback.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaMode {
    Std,
    InteriorDiff,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapConfig {
    ws: usize,
    f_ga: f64,
    mode: SigmaMode,
}

impl MapConfig {
    pub fn new(ws: usize, f_ga: f64, mode: SigmaMode) -> Result<MapConfig, MapError> {
        if ws < 2 {
            return Err(MapError::InvalidWindow(ws));
        }
        if !f_ga.is_finite() || f_ga <= 0.0 {
            return Err(MapError::InvalidFactor(f_ga));
        }
        Ok(MapConfig { ws, f_ga, mode })
    }

    pub fn ws(&self) -> usize {
        self.ws
    }

    pub fn f_ga(&self) -> f64 {
        self.f_ga
    }

    pub fn mode(&self) -> SigmaMode {
        self.mode
    }
}

impl Default for MapConfig {
    /// ws=5, f_GA=0.5 — the grid-search optimum.
    fn default() -> MapConfig {
        MapConfig {
            ws: 5,
            f_ga: 0.5,
            mode: SigmaMode::Std,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapScope {
    Joint,
    Instance(u32),
}

/// Dense non-negative anomaly map, joint or restricted to one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMap {
    scope: MapScope,
    values: Grid<f64>,
}

impl AnomalyMap {
    pub fn from_grid(scope: MapScope, values: Grid<f64>) -> Result<AnomalyMap, MapError> {
        if values.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MapError::InvalidValue);
        }
        Ok(AnomalyMap { scope, values })
    }

    pub fn scope(&self) -> MapScope {
        self.scope
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values.at(x, y)
    }

    pub fn max_value(&self) -> f64 {
        self.values.data().iter().cloned().fold(0.0, f64::max)
    }
}

/// Window anchor: for side length ws the window spans [c−lo, c+hi] per
/// axis with lo = ws/2 and hi = ws−1−lo (left/top-biased for even ws).
#[inline]
fn anchor(ws: usize) -> (usize, usize) {
    let lo = ws / 2;
    (lo, ws - 1 - lo)
}

#[inline]
fn clip(c: usize, lo: usize, hi: usize, n: usize) -> (usize, usize) {
    (c.saturating_sub(lo), (c + hi).min(n - 1))
}

/// True iff the clipped window centered at (cx, cy) contains layers from
/// at least two distinct instances.
pub fn window_is_active(stack: &FieldStack, cx: usize, cy: usize, ws: usize) -> bool {
    let (lo, hi) = anchor(ws);
    let (x0, x1) = clip(cx, lo, hi, stack.width());
    let (y0, y1) = clip(cy, lo, hi, stack.height());
    let mut first = None;
    for y in y0..=y1 {
        for x in x0..=x1 {
            for &id in stack.layer_ids(x, y) {
                match first {
                    None => first = Some(id),
                    Some(f) if f != id => return true,
                    _ => {}
                }
            }
        }
    }
    false
}

/// Population standard deviation of all layer angles in the window.
fn sigma_std_direct(stack: &FieldStack, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let w = stack.width();
    let mut n = 0usize;
    let mut sum = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            for &a in stack.angles_at(y * w + x) {
                sum += a;
                n += 1;
            }
        }
    }
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            for &a in stack.angles_at(y * w + x) {
                let d = a - mean;
                ss += d * d;
            }
        }
    }
    (ss / n as f64).sqrt()
}

/// Population standard deviation of the pooled per-pixel pairwise angle
/// differences. Pairs follow layer order (i<j), each difference wrapped
/// to (−π, π].
fn sigma_pairwise_direct(stack: &FieldStack, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let w = stack.width();
    let mut n = 0usize;
    let mut sum = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let a = stack.angles_at(y * w + x);
            for i in 0..a.len() {
                for j in i + 1..a.len() {
                    sum += wrap_to_pi(a[i] - a[j]);
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let a = stack.angles_at(y * w + x);
            for i in 0..a.len() {
                for j in i + 1..a.len() {
                    let d = wrap_to_pi(a[i] - a[j]) - mean;
                    ss += d * d;
                }
            }
        }
    }
    (ss / n as f64).sqrt()
}

/// Interior-intersection test: every in-window pixel carries the same
/// covering-instance set of size ≥ 2, and no in-window pixel is 4-adjacent
/// (on canvas) to a pixel with a different covering set.
fn window_qualifies_direct(stack: &FieldStack, x0: usize, x1: usize, y0: usize, y1: usize) -> bool {
    let (h, w) = (stack.height(), stack.width());
    let sig = stack.sig_plane();
    let s0 = sig[y0 * w + x0];
    if stack.sig_size(s0) < 2 {
        return false;
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            if sig[y * w + x] != s0 {
                return false;
            }
        }
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            if (x > 0 && sig[y * w + x - 1] != s0)
                || (x + 1 < w && sig[y * w + x + 1] != s0)
                || (y > 0 && sig[(y - 1) * w + x] != s0)
                || (y + 1 < h && sig[(y + 1) * w + x] != s0)
            {
                return false;
            }
        }
    }
    true
}

/// Window statistic at one center. Callers should have established
/// `window_is_active`; an inactive window simply scores 0.
pub fn window_sigma(stack: &FieldStack, cx: usize, cy: usize, ws: usize, mode: SigmaMode) -> f64 {
    let (lo, hi) = anchor(ws);
    let (x0, x1) = clip(cx, lo, hi, stack.width());
    let (y0, y1) = clip(cy, lo, hi, stack.height());
    match mode {
        SigmaMode::Std => sigma_std_direct(stack, x0, x1, y0, y1),
        SigmaMode::InteriorDiff => {
            if window_qualifies_direct(stack, x0, x1, y0, y1) {
                sigma_pairwise_direct(stack, x0, x1, y0, y1)
            } else {
                sigma_std_direct(stack, x0, x1, y0, y1)
            }
        }
    }
}

/// Centers whose windows pass the interior-intersection test. Intended
/// for analysis and tests; scans every center directly.
pub fn interior_intersection_centers(stack: &FieldStack, ws: usize) -> Vec<(usize, usize)> {
    let (lo, hi) = anchor(ws);
    let (h, w) = (stack.height(), stack.width());
    let mut out = Vec::new();
    for cy in 0..h {
        for cx in 0..w {
            let (x0, x1) = clip(cx, lo, hi, w);
            let (y0, y1) = clip(cy, lo, hi, h);
            if window_qualifies_direct(stack, x0, x1, y0, y1) {
                out.push((cx, cy));
            }
        }
    }
    out
}

/// Naive reference: re-derives every window from scratch and writes σ
/// into all pixels of the clipped window through a max accumulator.
pub fn generate_joint_map_reference(stack: &FieldStack, cfg: &MapConfig) -> AnomalyMap {
    let (h, w) = (stack.height(), stack.width());
    let (lo, hi) = anchor(cfg.ws);
    let mut vals = Grid::filled(h, w, 0.0f64);
    for cy in 0..h {
        for cx in 0..w {
            if !window_is_active(stack, cx, cy, cfg.ws) {
                continue;
            }
            let s = window_sigma(stack, cx, cy, cfg.ws, cfg.mode);
            let (x0, x1) = clip(cx, lo, hi, w);
            let (y0, y1) = clip(cy, lo, hi, h);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if s > vals.at(x, y) {
                        vals.set(x, y, s);
                    }
                }
            }
        }
    }
    AnomalyMap {
        scope: MapScope::Joint,
        values: vals,
    }
}

/// Angle quantization step for the exact integral images: 2⁻³⁰ rad.
const TICK: f64 = 1.0 / (1u64 << 30) as f64;

/// Sliding extremum along rows (`horizontal`) or columns of a row-major
/// plane; for output index j the window covers input [j−a, j+b], clipped.
/// `dominates(u, v)` evicts v in favor of u (≥ for max, ≤ for min).
#[allow(clippy::too_many_arguments)]
fn sliding_axis<T: Copy, F: Fn(T, T) -> bool>(
    src: &[T],
    dst: &mut [T],
    h: usize,
    w: usize,
    a: usize,
    b: usize,
    horizontal: bool,
    dominates: F,
) {
    let (lines, n, line_stride, elem_stride) = if horizontal {
        (h, w, w, 1usize)
    } else {
        (w, h, 1usize, w)
    };
    let mut dq: Vec<usize> = Vec::with_capacity(n.min(a + b + 1));
    for line in 0..lines {
        let base = line * line_stride;
        dq.clear();
        let mut head = 0usize;
        let mut next = 0usize;
        for j in 0..n {
            let upto = (j + b).min(n - 1);
            while next <= upto {
                let v = src[base + next * elem_stride];
                while dq.len() > head && dominates(v, src[base + dq[dq.len() - 1] * elem_stride]) {
                    dq.pop();
                }
                dq.push(next);
                next += 1;
            }
            while dq[head] + a < j {
                head += 1;
            }
            dst[base + j * elem_stride] = src[base + dq[head] * elem_stride];
        }
    }
}

/// Separable 2-D sliding extremum with per-axis window [c−a, c+b].
fn sliding_2d<T: Copy, F: Fn(T, T) -> bool + Copy>(
    src: &[T],
    h: usize,
    w: usize,
    a: usize,
    b: usize,
    dominates: F,
) -> Vec<T> {
    let mut tmp = src.to_vec();
    let mut out = src.to_vec();
    sliding_axis(src, &mut tmp, h, w, a, b, true, dominates);
    sliding_axis(&tmp, &mut out, h, w, a, b, false, dominates);
    out
}

/// Exact integral images of per-pixel layer count, tick sum and squared
/// tick sum. Ticks are round(angle·2³⁰): |tick| ≤ π·2³⁰ ≈ 3.4e9, so the
/// square needs i128 while counts and sums stay comfortably in i64.
struct TickIntegrals {
    w1: usize,
    cnt: Vec<i64>,
    sum: Vec<i64>,
    sq: Vec<i128>,
}

impl TickIntegrals {
    fn build(stack: &FieldStack) -> TickIntegrals {
        let (h, w) = (stack.height(), stack.width());
        let w1 = w + 1;
        let mut cnt = vec![0i64; (h + 1) * w1];
        let mut sum = vec![0i64; (h + 1) * w1];
        let mut sq = vec![0i128; (h + 1) * w1];
        for y in 0..h {
            let (mut row_c, mut row_s, mut row_q) = (0i64, 0i64, 0i128);
            for x in 0..w {
                for &a in stack.angles_at(y * w + x) {
                    let t = (a * (1u64 << 30) as f64).round() as i64;
                    row_c += 1;
                    row_s += t;
                    row_q += (t as i128) * (t as i128);
                }
                let up = y * w1 + (x + 1);
                let here = (y + 1) * w1 + (x + 1);
                cnt[here] = cnt[up] + row_c;
                sum[here] = sum[up] + row_s;
                sq[here] = sq[up] + row_q;
            }
        }
        TickIntegrals { w1, cnt, sum, sq }
    }

    /// Aggregates over the inclusive rectangle [x0..=x1] × [y0..=y1].
    #[inline]
    fn window(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (i64, i64, i128) {
        let (ta, tb, tc, td) = (
            y0 * self.w1 + x0,
            y0 * self.w1 + (x1 + 1),
            (y1 + 1) * self.w1 + x0,
            (y1 + 1) * self.w1 + (x1 + 1),
        );
        (
            self.cnt[td] - self.cnt[tb] - self.cnt[tc] + self.cnt[ta],
            self.sum[td] - self.sum[tb] - self.sum[tc] + self.sum[ta],
            self.sq[td] - self.sq[tb] - self.sq[tc] + self.sq[ta],
        )
    }
}

/// Per-center interior-intersection qualification, computed with sliding
/// min/max filters instead of per-window scans.
fn qualified_plane(stack: &FieldStack, lo: usize, hi: usize) -> Vec<bool> {
    let (h, w) = (stack.height(), stack.width());
    let sig = stack.sig_plane();
    let mut clean = vec![1u8; h * w];
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let s = sig[idx];
            if (x > 0 && sig[idx - 1] != s)
                || (x + 1 < w && sig[idx + 1] != s)
                || (y > 0 && sig[idx - w] != s)
                || (y + 1 < h && sig[idx + w] != s)
            {
                clean[idx] = 0;
            }
        }
    }
    let sig_min = sliding_2d(sig, h, w, lo, hi, |u: u32, v: u32| u <= v);
    let sig_max = sliding_2d(sig, h, w, lo, hi, |u: u32, v: u32| u >= v);
    let clean_min = sliding_2d(&clean, h, w, lo, hi, |u: u8, v: u8| u <= v);
    (0..h * w)
        .map(|i| sig_min[i] == sig_max[i] && clean_min[i] == 1 && stack.sig_size(sig_min[i]) >= 2)
        .collect()
}

/// Optimized joint-map generation. Agrees with
/// `generate_joint_map_reference` within 1e−6 at every pixel.
pub fn generate_joint_map(stack: &FieldStack, cfg: &MapConfig) -> AnomalyMap {
    let (h, w) = (stack.height(), stack.width());
    let (lo, hi) = anchor(cfg.ws);
    let ticks = TickIntegrals::build(stack);

    // A window holds ≥2 distinct ids iff the windowed min of per-pixel
    // min ids undercuts the windowed max of per-pixel max ids.
    let win_min = sliding_2d(stack.min_id_plane(), h, w, lo, hi, |u: u32, v: u32| u <= v);
    let win_max = sliding_2d(stack.max_id_plane(), h, w, lo, hi, |u: u32, v: u32| u >= v);
    let qualified = match cfg.mode {
        SigmaMode::Std => None,
        SigmaMode::InteriorDiff => Some(qualified_plane(stack, lo, hi)),
    };

    let mut sigma = vec![0.0f64; h * w];
    for cy in 0..h {
        let (y0, y1) = clip(cy, lo, hi, h);
        for cx in 0..w {
            let idx = cy * w + cx;
            if win_min[idx] >= win_max[idx] {
                continue; // fewer than two distinct ids in the window
            }
            let (x0, x1) = clip(cx, lo, hi, w);
            if let Some(q) = &qualified {
                if q[idx] {
                    // Rare by construction; recomputed directly because
                    // pairwise differences do not decompose into sums.
                    sigma[idx] = sigma_pairwise_direct(stack, x0, x1, y0, y1);
                    continue;
                }
            }
            let (n, s, q) = ticks.window(x0, y0, x1, y1);
            if n >= 2 {
                // N·Q − S² ≥ 0 exactly (Cauchy–Schwarz on integers).
                let num = n as i128 * q - (s as i128) * (s as i128);
                sigma[idx] = (num.max(0) as f64).sqrt() / n as f64 * TICK;
            }
        }
    }

    // out(p) = max σ over centers whose window covers p, i.e. a sliding
    // max over the σ field with the window geometry reflected.
    let vals = sliding_2d(&sigma, h, w, hi, lo, |u: f64, v: f64| u >= v);
    AnomalyMap {
        scope: MapScope::Joint,
        values: Grid::from_vec(h, w, vals),
    }
}

/// Divides by the global max (if any) and multiplies by f_GA, so the
/// output max equals f_GA exactly whenever any anomaly exists.
pub fn normalize_and_scale(raw: &AnomalyMap, f_ga: f64) -> Result<AnomalyMap, MapError> {
    if !f_ga.is_finite() || f_ga <= 0.0 {
        return Err(MapError::InvalidFactor(f_ga));
    }
    let max = raw.max_value();
    let values = if max == 0.0 {
        raw.values.clone()
    } else {
        let data = raw.values.data().iter().map(|v| (v / max) * f_ga).collect();
        Grid::from_vec(raw.values.height(), raw.values.width(), data)
    };
    Ok(AnomalyMap {
        scope: raw.scope,
        values,
    })
}

/// Restricts the joint map to each instance's support, preserving scene
/// instance order.
pub fn per_instance_maps(joint: &AnomalyMap, scene: &Scene) -> Result<Vec<AnomalyMap>, MapError> {
    let (h, w) = joint.values.dims();
    if (h, w) != (scene.height(), scene.width()) {
        return Err(MapError::DimensionMismatch {
            want_h: scene.height(),
            want_w: scene.width(),
            got_h: h,
            got_w: w,
        });
    }
    Ok(scene
        .instances()
        .iter()
        .map(|inst| {
            let mut values = Grid::filled(h, w, 0.0f64);
            for (x, y) in inst.foreground() {
                values.set(x, y, joint.at(x, y));
            }
            AnomalyMap {
                scope: MapScope::Instance(inst.id()),
                values,
            }
        })
        .collect())
}
