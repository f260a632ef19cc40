//! `gradanom gen`: manifest -> joint + per-instance anomaly maps.

use crate::gam1;
use crate::GenArgs;
use anyhow::{Context, Result};
use gradanom_core::{
    build_field_stack, generate_joint_map, load_manifest, normalize_and_scale, per_instance_maps,
    AnomalyMap, MapConfig,
};
use std::io::Cursor;
use std::path::Path;

pub fn run(args: &GenArgs) -> Result<()> {
    // Validate and compute everything before touching the output directory
    // so a failure leaves no partial outputs behind.
    let cfg = MapConfig::new(args.ws, args.fga, args.mode.into())?;
    let scene = load_manifest(&args.manifest).context("loading manifest")?;
    let stack = build_field_stack(&scene);
    let raw = generate_joint_map(&stack, &cfg);
    let joint = normalize_and_scale(&raw, cfg.f_ga())?;
    let instance_maps = per_instance_maps(&joint, &scene)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    gam1::write_map(&args.out.join("joint.gam"), &joint)?;
    for map in &instance_maps {
        let gradanom_core::MapScope::Instance(id) = map.scope() else {
            unreachable!("per_instance_maps yields instance-scoped maps");
        };
        gam1::write_map(&args.out.join(format!("instance_{id}.gam")), map)?;
    }
    if args.png {
        write_png(&args.out.join("joint.png"), &joint, cfg.f_ga())?;
        for map in &instance_maps {
            let gradanom_core::MapScope::Instance(id) = map.scope() else {
                unreachable!();
            };
            write_png(
                &args.out.join(format!("instance_{id}.png")),
                map,
                cfg.f_ga(),
            )?;
        }
    }
    eprintln!(
        "wrote {} map file(s) to {}",
        1 + instance_maps.len(),
        args.out.display()
    );
    Ok(())
}

/// Quantized grayscale visualization: pixel = round(255 * value / f_GA).
fn write_png(path: &Path, map: &AnomalyMap, f_ga: f64) -> Result<()> {
    let (h, w) = map.values().dims();
    let pixels: Vec<u8> = map
        .values()
        .data()
        .iter()
        .map(|&v| ((255.0 * v / f_ga).round()).clamp(0.0, 255.0) as u8)
        .collect();
    let img = image::GrayImage::from_vec(w as u32, h as u32, pixels)
        .expect("pixel buffer matches dimensions");
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .context("encoding PNG")?;
    gam1::atomic_write(path, &bytes)
}
