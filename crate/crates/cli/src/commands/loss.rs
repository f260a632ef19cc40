//! `gradanom loss`: gradient-anomaly and mask-refinement losses for
//! predicted maps against generated ground truth.

use crate::gam1;
use crate::LossArgs;
use anyhow::{bail, Context, Result};
use gradanom_core::{
    build_field_stack, generate_joint_map, gradient_anomaly_loss, load_manifest,
    mask_refinement_loss, normalize_and_scale, per_instance_maps, pixel_ce, AnomalyMap, Grid,
    MapConfig, ProbMap, SigmaMode,
};

/// Rounds map values to the f32 precision of the GAM1 container, so GT maps
/// here agree exactly with the files `gen` writes (and a prediction equal to
/// those files scores an exact zero).
fn quantize(map: &AnomalyMap) -> AnomalyMap {
    let (h, w) = map.values().dims();
    let values = map
        .values()
        .data()
        .iter()
        .map(|&v| v as f32 as f64)
        .collect();
    AnomalyMap::from_grid(map.scope(), Grid::from_vec(h, w, values))
        .expect("f32 rounding preserves finite nonnegative values")
}

pub fn run(args: &LossArgs) -> Result<()> {
    let cfg = MapConfig::new(args.ws, args.fga, SigmaMode::Std)?;
    let scene = load_manifest(&args.gt).context("loading ground truth")?;

    // Ground-truth maps straight from the map-generation pipeline, rounded
    // to the precision they would have as serialized map files.
    let stack = build_field_stack(&scene);
    let joint = quantize(&normalize_and_scale(
        &generate_joint_map(&stack, &cfg),
        cfg.f_ga(),
    )?);
    let gt_maps = per_instance_maps(&joint, &scene)?;

    // Predicted per-instance maps, matched to the scene by file name.
    let mut pred_maps = Vec::with_capacity(scene.instances().len());
    for inst in scene.instances() {
        let path = args.pred_grad.join(format!("instance_{}.gam", inst.id()));
        let (tag, grid) = gam1::read_map(&path)?;
        if tag != inst.id() {
            bail!(
                "{}: header instance id {tag} does not match expected {}",
                path.display(),
                inst.id()
            );
        }
        pred_maps.push(grid);
    }
    let l_ga = gradient_anomaly_loss(&gt_maps, &pred_maps)?;

    // Mask refinement: cross-entropy of the predicted class probabilities
    // against the foreground-union labels, reweighted by the joint map.
    let (k, h, w, payload) = gam1::read_prob(&args.pred_prob)?;
    let prob = ProbMap::new(
        h as usize,
        w as usize,
        k as usize,
        payload.iter().map(|&v| v as f64).collect(),
    )?;
    let mut labels = Grid::filled(scene.height(), scene.width(), 0u32);
    for inst in scene.instances() {
        for (x, y) in inst.foreground() {
            labels.set(x, y, 1);
        }
    }
    let ce = pixel_ce(&prob, &labels)?;
    let l_mr = mask_refinement_loss(&ce, &joint, args.weight_mode.into())?;

    println!("{}", serde_json::json!({ "l_ga": l_ga, "l_mr": l_mr }));
    Ok(())
}
