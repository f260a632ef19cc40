//! `gradanom eval`: metric report for a predicted segmentation.

use crate::EvalArgs;
use anyhow::{bail, Context, Result};
use gradanom_core::{evaluate, load_manifest, InstanceSet};
use std::collections::BTreeMap;

pub fn run(args: &EvalArgs) -> Result<()> {
    let gt_scene = load_manifest(&args.gt).context("loading ground truth")?;
    let pred_scene = load_manifest(&args.pred).context("loading predictions")?;

    let scores_text = std::fs::read_to_string(&args.scores)
        .with_context(|| format!("reading {}", args.scores.display()))?;
    let score_table: BTreeMap<String, f64> =
        serde_json::from_str(&scores_text).context("scores file must map id strings to numbers")?;
    // Every prediction needs a score; unknown extra keys are ignored.
    let mut scores = Vec::with_capacity(pred_scene.instances().len());
    for inst in pred_scene.instances() {
        match score_table.get(&inst.id().to_string()) {
            Some(&s) => scores.push(s),
            None => bail!("scores file has no entry for prediction id {}", inst.id()),
        }
    }

    let gt = InstanceSet::ground_truth(
        gt_scene.height(),
        gt_scene.width(),
        gt_scene.instances().to_vec(),
    )?;
    let pred = InstanceSet::predictions(
        pred_scene.height(),
        pred_scene.width(),
        pred_scene.instances().to_vec(),
        scores,
    )?;
    let report = evaluate(&gt, &pred)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}
