//! `gradanom synth`: deterministic scene -> manifest + mask PNGs.

use crate::SynthArgs;
use anyhow::{anyhow, bail, Context, Result};
use gradanom_core::{save_manifest, synth_scene, Preset};

pub fn run(args: &SynthArgs) -> Result<()> {
    let preset: Preset = args.preset.parse().map_err(|e: String| anyhow!(e))?;
    let (height, width) = parse_size(&args.size)?;
    let scene = synth_scene(preset, args.seed, height, width)?;
    let manifest = save_manifest(&scene, &args.out)
        .with_context(|| format!("writing scene to {}", args.out.display()))?;
    eprintln!(
        "wrote {} instance(s) to {}",
        scene.instances().len(),
        manifest.display()
    );
    Ok(())
}

/// Parses `<H>x<W>`, e.g. `64x64`.
fn parse_size(text: &str) -> Result<(usize, usize)> {
    let Some((h, w)) = text.split_once('x') else {
        bail!("--size must look like <H>x<W>, e.g. 64x64 (got {text:?})");
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .with_context(|| format!("bad dimension {s:?} in --size {text:?}"))
    };
    Ok((parse(h)?, parse(w)?))
}
