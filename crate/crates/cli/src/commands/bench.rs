//! `gradanom bench`: wall-clock comparison of the direct per-window
//! reference against the integral-image path on one synthesized scene.

use crate::BenchArgs;
use anyhow::{bail, Result};
use gradanom_core::{
    build_field_stack, generate_joint_map, generate_joint_map_reference, synth_scene, MapConfig,
    Preset, SigmaMode,
};
use serde::Serialize;
use std::time::Instant;

#[derive(Serialize)]
struct BenchReport {
    size: usize,
    repeats: usize,
    entries: Vec<BenchEntry>,
}

#[derive(Serialize)]
struct BenchEntry {
    ws: usize,
    reference_s: f64,
    optimized_s: f64,
    /// reference_s / optimized_s.
    speedup: f64,
}

pub fn run(args: &BenchArgs) -> Result<()> {
    if args.size < 64 {
        bail!("--size must be at least 64 (got {})", args.size);
    }
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let scene = synth_scene(Preset::RandomCluster, 0, args.size, args.size)?;
    let stack = build_field_stack(&scene);
    let mut entries = Vec::with_capacity(args.ws.len());
    for &ws in &args.ws {
        let cfg = MapConfig::new(ws, 0.5, SigmaMode::Std)?;
        let reference_s = time_min(args.repeats, || generate_joint_map_reference(&stack, &cfg));
        let optimized_s = time_min(args.repeats, || generate_joint_map(&stack, &cfg));
        entries.push(BenchEntry {
            ws,
            reference_s,
            optimized_s,
            speedup: reference_s / optimized_s,
        });
        eprintln!("ws={ws}: reference {reference_s:.4}s, optimized {optimized_s:.4}s");
    }
    let report = BenchReport {
        size: args.size,
        repeats: args.repeats,
        entries,
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

/// Minimum elapsed seconds across `repeats` runs; the minimum is the
/// standard noise-robust statistic for single-threaded benchmarks.
fn time_min<T>(repeats: usize, mut f: impl FnMut() -> T) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let t = Instant::now();
        std::hint::black_box(f());
        let dt = t.elapsed().as_secs_f64();
        best = best.min(dt);
    }
    // Clamp so downstream ratio arithmetic stays finite even if a run is
    // faster than the clock resolution.
    best.max(1e-9)
}
