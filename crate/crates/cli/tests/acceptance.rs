//! Acceptance suite: one test per criterion, each printing a labeled
//! `[PASS]` line. Timing-sensitive criteria (1, 2, 9) share a mutex so
//! their wall-clock measurements never overlap.

use gradanom_core::{
    aji, build_field_stack, dice_object, evaluate, generate_joint_map,
    generate_joint_map_reference, gradient_anomaly_loss, interior_intersection_centers,
    map_over_thresholds, mask_refinement_loss, normalize_and_scale, radial_angle_map,
    radial_distance_map, synth_scene, window_sigma, AnomalyMap, Centroid, Grid, InstanceMask,
    InstanceSet, MapConfig, MapScope, Preset, Scene, SigmaMode, WeightMode,
};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Mutex;
use std::time::Instant;

static TIMING: Mutex<()> = Mutex::new(());

/// SplitMix64; deterministic test-local randomness independent of the
/// library's generators.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Rng {
        Rng(seed)
    }

    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// A nonempty random mask: disk, rectangle, two-disk union, or scatter.
fn random_mask(rng: &mut Rng, height: usize, width: usize) -> InstanceMask {
    let mut g = Grid::filled(height, width, false);
    let disk = |g: &mut Grid<bool>, rng: &mut Rng| {
        let cx = rng.below(width as u64) as i64;
        let cy = rng.below(height as u64) as i64;
        let r = 1 + rng.below(10) as i64;
        for y in (cy - r).max(0)..=(cy + r).min(height as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(width as i64 - 1) {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    g.set(x as usize, y as usize, true);
                }
            }
        }
    };
    match rng.below(4) {
        0 => disk(&mut g, rng),
        1 => {
            let x0 = rng.below(width as u64 - 1) as usize;
            let y0 = rng.below(height as u64 - 1) as usize;
            let x1 = (x0 + 1 + rng.below(12) as usize).min(width - 1);
            let y1 = (y0 + 1 + rng.below(12) as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    g.set(x, y, true);
                }
            }
        }
        2 => {
            disk(&mut g, rng);
            disk(&mut g, rng);
        }
        _ => {
            for _ in 0..1 + rng.below(8) {
                g.set(
                    rng.below(width as u64) as usize,
                    rng.below(height as u64) as usize,
                    true,
                );
            }
        }
    }
    InstanceMask::new(1, g).unwrap()
}

/// Criterion 2/5 corpus: deterministic mixed presets and canvas sizes.
fn corpus_scene(seed: u64) -> Scene {
    let preset = Preset::ALL[(seed % 4) as usize];
    let h = 48 + ((seed * 17) % 81) as usize;
    let w = 48 + ((seed * 29) % 81) as usize;
    synth_scene(preset, seed, h, w).unwrap()
}

/// Copies every mask of `scene` into a larger canvas at offset `(ox, oy)`.
fn embed(scene: &Scene, height: usize, width: usize, ox: usize, oy: usize) -> Scene {
    let masks = scene
        .instances()
        .iter()
        .map(|inst| {
            let mut g = Grid::filled(height, width, false);
            for (x, y) in inst.foreground() {
                g.set(x + ox, y + oy, true);
            }
            InstanceMask::new(inst.id(), g).unwrap()
        })
        .collect();
    Scene::new(height, width, masks).unwrap()
}

fn block(id: u32, h: usize, w: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> InstanceMask {
    let mut g = Grid::filled(h, w, false);
    for y in y0..=y1 {
        for x in x0..=x1 {
            g.set(x, y, true);
        }
    }
    InstanceMask::new(id, g).unwrap()
}

#[test]
fn criterion_01_field_correctness() {
    let _guard = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = Rng::new(1);
    let start = Instant::now();
    for case in 0..200 {
        let h = 16 + rng.below(113) as usize; // up to 128
        let w = 16 + rng.below(113) as usize;
        let mask = random_mask(&mut rng, h, w);
        let c = Centroid::of(&mask);
        let dist = radial_distance_map(&mask, &c);
        let ang = radial_angle_map(&mask, &c);

        // Independent oracle: plain f64 mean of foreground coordinates.
        let (mut sx, mut sy, mut n) = (0i64, 0i64, 0i64);
        for (x, y) in mask.foreground() {
            sx += x as i64;
            sy += y as i64;
            n += 1;
        }
        let mx = sx as f64 / n as f64;
        let my = sy as f64 / n as f64;
        for y in 0..h {
            for x in 0..w {
                if !mask.contains(x, y) {
                    assert!(dist.at(x, y).is_nan(), "case {case}: off-support distance");
                    assert!(ang.at(x, y).is_nan(), "case {case}: off-support angle");
                    continue;
                }
                let dx = x as f64 - mx;
                let dy = y as f64 - my;
                let want = dx * dx + dy * dy;
                assert!(
                    (dist.at(x, y) - want).abs() <= 1e-9,
                    "case {case} at ({x},{y}): distance {} vs {want}",
                    dist.at(x, y)
                );
                if x as i64 * n == sx && y as i64 * n == sy {
                    assert!(ang.at(x, y).is_nan(), "case {case}: centroid pixel angle");
                    continue;
                }
                let a = ang.at(x, y);
                let norm = (dx * dx + dy * dy).sqrt();
                let dot = (a.cos() * dx + a.sin() * dy) / norm;
                assert!(
                    (dot - 1.0).abs() <= 1e-9,
                    "case {case} at ({x},{y}): angle {a} not outward-radial (dot {dot})"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 1: radial distance/direction fields exact to 1e-9 on 200 masks in {elapsed:?}"
    );
}

#[test]
fn criterion_02_window_oracle() {
    let _guard = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    for seed in 0..50 {
        let scene = corpus_scene(seed);
        let stack = build_field_stack(&scene);
        for ws in [3, 5, 7, 9, 12] {
            for mode in [SigmaMode::Std, SigmaMode::InteriorDiff] {
                let cfg = MapConfig::new(ws, 0.5, mode).unwrap();
                let fast = generate_joint_map(&stack, &cfg);
                let slow = generate_joint_map_reference(&stack, &cfg);
                for (x, y, &v) in fast.values().iter() {
                    assert!(
                        (v - slow.at(x, y)).abs() <= 1e-6,
                        "seed {seed} ws={ws} mode={mode:?} at ({x},{y}): {v} vs {}",
                        slow.at(x, y)
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 2: optimized = reference within 1e-6 on 50 scenes x 5 ws x 2 modes in {elapsed:?}"
    );
}

#[test]
fn criterion_03_zero_law() {
    let mut rng = Rng::new(3);
    let mut checked = 0;
    for case in 0..24 {
        let h = 24 + rng.below(64) as usize;
        let w = 24 + rng.below(64) as usize;
        let scene = Scene::new(h, w, vec![random_mask(&mut rng, h, w)]).unwrap();
        let stack = build_field_stack(&scene);
        for ws in [3, 12] {
            for mode in [SigmaMode::Std, SigmaMode::InteriorDiff] {
                let cfg = MapConfig::new(ws, 0.5, mode).unwrap();
                let map = generate_joint_map(&stack, &cfg);
                assert!(
                    map.values().data().iter().all(|&v| v == 0.0),
                    "case {case} ws={ws} mode={mode:?}: nonzero value in single-instance map"
                );
                checked += 1;
            }
        }
    }
    println!("[PASS] criterion 3: zero law exact on {checked} single-instance configurations");
}

#[test]
fn criterion_04_normalization_endpoint() {
    for (preset, seed) in [
        (Preset::OverlapPair, 0u64),
        (Preset::OverlapPair, 1),
        (Preset::CrossBars, 0),
        (Preset::RandomCluster, 5),
    ] {
        let scene = synth_scene(preset, seed, 64, 64).unwrap();
        let stack = build_field_stack(&scene);
        let raw = generate_joint_map(&stack, &MapConfig::new(5, 0.5, SigmaMode::Std).unwrap());
        assert!(
            raw.max_value() > 0.0,
            "{preset} seed {seed}: no active window"
        );
        for f_ga in [0.4, 0.5, 0.75] {
            let scaled = normalize_and_scale(&raw, f_ga).unwrap();
            assert!(
                (scaled.max_value() - f_ga).abs() <= 1e-6,
                "{preset} seed {seed} f_GA={f_ga}: max {}",
                scaled.max_value()
            );
        }
    }
    println!("[PASS] criterion 4: map max equals f_GA within 1e-6 for f_GA in {{0.4, 0.5, 0.75}}");
}

#[test]
fn criterion_05_translation_equivariance() {
    let mut rng = Rng::new(5);
    for i in 0..20u64 {
        let base = synth_scene(Preset::ALL[(i % 4) as usize], i, 64, 64).unwrap();
        let origin = embed(&base, 128, 128, 32, 32);
        // Content halo of 2*(ws-1) <= 22 stays on-canvas at offset 32 +/- 10.
        let dx = rng.below(21) as i64 - 10;
        let dy = rng.below(21) as i64 - 10;
        let ws = if i % 2 == 0 { 5 } else { 12 };
        let mode = if i % 3 == 0 {
            SigmaMode::InteriorDiff
        } else {
            SigmaMode::Std
        };
        let cfg = MapConfig::new(ws, 0.5, mode).unwrap();
        let m0 = generate_joint_map(&build_field_stack(&origin), &cfg);
        let moved = origin.translate(dx, dy).unwrap();
        let m1 = generate_joint_map(&build_field_stack(&moved), &cfg);
        for (x, y, &v) in m0.values().iter() {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < 128 && (ny as usize) < 128 {
                let s = m1.at(nx as usize, ny as usize);
                assert!(
                    v.to_bits() == s.to_bits(),
                    "scene {i} shift ({dx},{dy}) ws={ws} mode={mode:?} at ({x},{y}): {v} vs {s}"
                );
            }
        }
    }
    println!("[PASS] criterion 5: joint maps translate bitwise-exactly on 20 scenes");
}

#[test]
fn criterion_06_interior_weakening() {
    for seed in 0..20u64 {
        let scene = synth_scene(Preset::OverlapPair, seed, 64, 64).unwrap();
        let stack = build_field_stack(&scene);
        let centers = interior_intersection_centers(&stack, 5);
        assert!(
            !centers.is_empty(),
            "seed {seed}: no edge-free interior intersection windows"
        );
        let mean = |mode: SigmaMode| {
            centers
                .iter()
                .map(|&(x, y)| window_sigma(&stack, x, y, 5, mode))
                .sum::<f64>()
                / centers.len() as f64
        };
        let (m_diff, m_std) = (mean(SigmaMode::InteriorDiff), mean(SigmaMode::Std));
        assert!(
            m_diff <= m_std,
            "seed {seed}: interior-diff mean {m_diff} exceeds std mean {m_std}"
        );
    }
    println!("[PASS] criterion 6: interior-diff weakens interior-window sigma on 20 overlap pairs");
}

#[test]
fn criterion_07_loss_arithmetic() {
    // Gradient-anomaly loss fixture: one 2x2 map with a single 0.5 entry vs
    // zero prediction.
    let gt = AnomalyMap::from_grid(
        MapScope::Joint,
        Grid::from_vec(2, 2, vec![0.5, 0.0, 0.0, 0.0]),
    )
    .unwrap();
    let pred = Grid::filled(2, 2, 0.0f64);
    let l_ga = gradient_anomaly_loss(&[gt], &[pred]).unwrap();
    assert!((l_ga - 0.0625).abs() <= 1e-12, "l_ga = {l_ga}");

    // Literal refinement fixture: ce [0.2, 0.4] with mg [0, 1].
    let ce = Grid::from_vec(1, 2, vec![0.2, 0.4]);
    let mg = AnomalyMap::from_grid(MapScope::Joint, Grid::from_vec(1, 2, vec![0.0, 1.0])).unwrap();
    let literal = mask_refinement_loss(&ce, &mg, WeightMode::Literal).unwrap();
    assert!((literal - 0.4).abs() <= 1e-12, "literal = {literal}");

    // Offset mode = literal + sum(ce), exactly (same accumulation order).
    let offset = mask_refinement_loss(&ce, &mg, WeightMode::Offset).unwrap();
    assert_eq!(offset, literal + (0.2 + 0.4));
    println!("[PASS] criterion 7: loss fixtures 0.0625 and 0.4, offset identity exact");
}

#[test]
fn criterion_08_metric_fixtures() {
    // Identity scene scores 1.0 everywhere.
    let scene = synth_scene(Preset::TouchSquares, 1, 64, 64).unwrap();
    let set = InstanceSet::ground_truth(64, 64, scene.instances().to_vec()).unwrap();
    let pred = InstanceSet::predictions(
        64,
        64,
        scene.instances().to_vec(),
        vec![1.0; scene.instances().len()],
    )
    .unwrap();
    let report = evaluate(&set, &pred).unwrap();
    assert_eq!(
        (report.aji, report.dice, report.f1, report.map),
        (1.0, 1.0, 1.0, 1.0)
    );

    // Shifted 3x3: intersection 6, union 12.
    let a = block(1, 16, 16, 2, 2, 4, 4);
    let shifted = block(1, 16, 16, 2, 3, 4, 5);
    let gt1 = InstanceSet::ground_truth(16, 16, vec![a.clone()]).unwrap();
    let pr1 = InstanceSet::predictions(16, 16, vec![shifted], vec![0.9]).unwrap();
    assert_eq!(aji(&gt1, &pr1).unwrap(), 0.5);
    let dice = dice_object(&gt1, &pr1).unwrap();
    assert!((dice - 0.6667).abs() <= 1e-4, "dice = {dice}");

    // IoU exactly 0.5 counts only at the 0.50 threshold: mAP = 1/10.
    let two = block(1, 8, 8, 1, 1, 2, 1); // 2 pixels
    let one = block(1, 8, 8, 1, 1, 1, 1); // 1 pixel inside
    let gt2 = InstanceSet::ground_truth(8, 8, vec![two]).unwrap();
    let pr2 = InstanceSet::predictions(8, 8, vec![one], vec![1.0]).unwrap();
    let (map, table) = map_over_thresholds(&gt2, &pr2).unwrap();
    assert!((map - 0.1).abs() <= 1e-9, "map = {map}");
    assert_eq!(table[0].ap, 1.0);
    assert!(table[1..].iter().all(|e| e.ap == 0.0));

    // Set-arithmetic AJI oracle: missing prediction, |A| / (|A| + |B|).
    let a = block(1, 16, 16, 2, 2, 6, 10);
    let b = block(2, 16, 16, 7, 2, 11, 8);
    let gt3 = InstanceSet::ground_truth(16, 16, vec![a.clone(), b.clone()]).unwrap();
    let pr3 = InstanceSet::predictions(16, 16, vec![a.clone()], vec![0.9]).unwrap();
    assert_eq!(
        aji(&gt3, &pr3).unwrap(),
        a.area() as f64 / (a.area() + b.area()) as f64
    );

    // Precision-envelope AP oracle: two exact TPs then a disjoint FP ->
    // AP = 2/3.
    let a = block(1, 16, 16, 1, 1, 3, 3);
    let b = block(2, 16, 16, 6, 1, 8, 3);
    let c = block(3, 16, 16, 11, 1, 13, 3);
    let gt4 = InstanceSet::ground_truth(16, 16, vec![a.clone(), b.clone(), c]).unwrap();
    let fp = block(4, 16, 16, 1, 10, 3, 12);
    let pr4 = InstanceSet::predictions(16, 16, vec![a, b, fp], vec![0.9, 0.8, 0.1]).unwrap();
    let expected_ap = (1.0 / 3.0) * 1.0 + (2.0 / 3.0 - 1.0 / 3.0) * 1.0;
    let (_, table) = map_over_thresholds(&gt4, &pr4).unwrap();
    for e in &table {
        assert_eq!(e.ap, expected_ap);
    }
    println!(
        "[PASS] criterion 8: metric fixtures (identity, shift, boundary, brute-force oracles)"
    );
}

#[test]
fn criterion_09_performance() {
    let _guard = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    // Thresholds validated on this hardware before freezing (measured:
    // optimized ratio ~1.0, reference ratio ~13, ws=12 speedup ~6.5).
    let scene = synth_scene(Preset::RandomCluster, 0, 512, 512).unwrap();
    let stack = build_field_stack(&scene);
    let cfg3 = MapConfig::new(3, 0.5, SigmaMode::Std).unwrap();
    let cfg12 = MapConfig::new(12, 0.5, SigmaMode::Std).unwrap();
    let time_once = |f: &dyn Fn() -> AnomalyMap| {
        let t = Instant::now();
        std::hint::black_box(f());
        t.elapsed().as_secs_f64()
    };
    // Warm-up, then interleave the four configurations so each pair of
    // minimums is taken under comparable machine conditions.
    std::hint::black_box(generate_joint_map(&stack, &cfg12));
    std::hint::black_box(generate_joint_map_reference(&stack, &cfg3));
    let (mut opt3, mut opt12, mut ref3, mut ref12) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..7 {
        opt3 = opt3.min(time_once(&|| generate_joint_map(&stack, &cfg3)));
        opt12 = opt12.min(time_once(&|| generate_joint_map(&stack, &cfg12)));
        ref3 = ref3.min(time_once(&|| generate_joint_map_reference(&stack, &cfg3)));
        ref12 = ref12.min(time_once(&|| generate_joint_map_reference(&stack, &cfg12)));
    }

    let opt_ratio = opt12.max(opt3) / opt12.min(opt3);
    let ref_ratio = ref12 / ref3;
    let speedup = ref12 / opt12;
    assert!(
        opt_ratio <= 1.5,
        "optimized path not window-size independent: ws3 {opt3:.4}s vs ws12 {opt12:.4}s"
    );
    assert!(
        ref_ratio > 2.0,
        "reference path unexpectedly flat: ws3 {ref3:.4}s vs ws12 {ref12:.4}s"
    );
    assert!(
        speedup >= 5.0,
        "optimized only {speedup:.2}x faster than reference at ws=12"
    );
    println!(
        "[PASS] criterion 9: 512x512 perf (optimized ratio {opt_ratio:.2} <= 1.5, \
         reference ratio {ref_ratio:.2} > 2, ws=12 speedup {speedup:.2} >= 5)"
    );
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradanom"))
        .args(args)
        .output()
        .expect("spawning gradanom")
}

fn assert_exit0(out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            files.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            );
        }
    }
    files
}

#[test]
fn criterion_10_cli_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let run_pipeline = |tag: &str| -> (std::path::PathBuf, std::path::PathBuf) {
        let scene = tmp.path().join(format!("scene_{tag}"));
        let maps = tmp.path().join(format!("maps_{tag}"));
        assert_exit0(&cli(&[
            "synth",
            "--preset",
            "touch-squares",
            "--seed",
            "0",
            "--size",
            "64x64",
            "--out",
            scene.to_str().unwrap(),
        ]));
        assert_exit0(&cli(&[
            "gen",
            "--manifest",
            scene.join("manifest.json").to_str().unwrap(),
            "--ws",
            "5",
            "--fga",
            "0.5",
            "--mode",
            "std",
            "--out",
            maps.to_str().unwrap(),
        ]));
        (scene, maps)
    };

    let (scene, maps) = run_pipeline("a");
    let manifest = scene.join("manifest.json");

    // eval: dataset against itself with unit scores.
    let scores = tmp.path().join("scores.json");
    std::fs::write(&scores, r#"{"1": 1.0, "2": 1.0}"#).unwrap();
    let out = cli(&[
        "eval",
        "--gt",
        manifest.to_str().unwrap(),
        "--pred",
        manifest.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
    ]);
    assert_exit0(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["aji"].as_f64().unwrap(), 1.0);

    // loss: generated maps as predictions, certain correct probabilities.
    let loaded = gradanom_core::load_manifest(&manifest).unwrap();
    let (h, w) = (loaded.height(), loaded.width());
    let mut fg = vec![0.0f32; h * w];
    for inst in loaded.instances() {
        for (x, y) in inst.foreground() {
            fg[y * w + x] = 1.0;
        }
    }
    let bg: Vec<f32> = fg.iter().map(|&v| 1.0 - v).collect();
    let prob = tmp.path().join("prob.gam");
    gradanom_cli::gam1::write_prob(&prob, h as u32, w as u32, &[bg, fg]).unwrap();
    let out = cli(&[
        "loss",
        "--gt",
        manifest.to_str().unwrap(),
        "--pred-grad",
        maps.to_str().unwrap(),
        "--pred-prob",
        prob.to_str().unwrap(),
        "--ws",
        "5",
        "--fga",
        "0.5",
        "--weight-mode",
        "literal",
    ]);
    assert_exit0(&out);
    let losses: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(losses["l_ga"].as_f64().unwrap(), 0.0);
    assert_eq!(losses["l_mr"].as_f64().unwrap(), 0.0);

    // GAM1 round-trip is bit-exact: decode + re-encode reproduces the file.
    for name in ["joint.gam", "instance_1.gam", "instance_2.gam"] {
        let bytes = std::fs::read(maps.join(name)).unwrap();
        let (mh, mw, tag, payload) = gradanom_cli::gam1::decode(&bytes).unwrap();
        assert_eq!(gradanom_cli::gam1::encode(mh, mw, tag, &payload), bytes);
    }

    // Repeated runs are byte-identical.
    let (scene_b, maps_b) = run_pipeline("b");
    assert_eq!(dir_snapshot(&scene), dir_snapshot(&scene_b));
    assert_eq!(dir_snapshot(&maps), dir_snapshot(&maps_b));

    // Failed run: exit 1 and no partial outputs.
    let missing_out = tmp.path().join("never");
    let out = cli(&[
        "gen",
        "--manifest",
        tmp.path().join("no-such.json").to_str().unwrap(),
        "--ws",
        "5",
        "--fga",
        "0.5",
        "--mode",
        "std",
        "--out",
        missing_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!missing_out.exists());
    println!("[PASS] criterion 10: CLI pipeline end-to-end, GAM1 bit-exact, reruns byte-identical");
}
