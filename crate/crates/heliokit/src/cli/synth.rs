use std::collections::BTreeMap;

use heliokit_core::imageprep::synth_sun;
use heliokit_core::rng::derive_seed_index;
use heliokit_core::SynthParams;
use rayon::prelude::*;
use serde_json::json;

use super::{ensure_dir, params, SynthArgs};
use crate::error::HelioError;
use crate::imageio::save_tile;
use crate::records::{emit, meta};

pub fn run(args: &SynthArgs) -> Result<(), HelioError> {
    if args.count == 0 {
        return Err(HelioError::usage("--count must be at least 1"));
    }
    let base = SynthParams {
        resolution: args.resolution,
        disc_radius_frac: args.disc_radius,
        loop_density: args.loop_density,
        hole_count: args.holes,
        noise_scale: args.noise,
        seed: args.seed,
    };
    base.validate().map_err(|e| HelioError::usage(e.to_string()))?;
    ensure_dir(&args.output)?;

    // Same per-image seeds as `synth_corpus`, rendered in parallel.
    let entries = (0..args.count)
        .into_par_iter()
        .map(|k| {
            let p = SynthParams { seed: derive_seed_index(base.seed, k as u64), ..base };
            let img = synth_sun(&p)?;
            let stem = format!("synth-{k:05}");
            let written = save_tile(&img, &args.output, &stem, args.format)?;
            let outputs: Vec<String> = written
                .iter()
                .map(|w| w.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
                .collect();
            Ok(json!({ "record": "synth", "index": k, "seed": p.seed, "source_id": img.source_id(), "outputs": outputs }))
        })
        .collect::<Result<Vec<_>, HelioError>>()?;

    let seeds = BTreeMap::from([("seed".to_string(), args.seed)]);
    let mut records = vec![meta(
        "synth",
        &seeds,
        params([
            ("count", json!(args.count)),
            ("resolution", json!(args.resolution)),
            ("disc_radius", json!(args.disc_radius)),
            ("loop_density", json!(args.loop_density)),
            ("holes", json!(args.holes)),
            ("noise", json!(args.noise)),
            ("format", json!(format!("{:?}", args.format).to_lowercase())),
        ]),
    )];
    records.extend(entries);
    let manifest = args.output.join("manifest.jsonl");
    emit(&records, Some(&manifest)).map_err(|e| HelioError::from(e).context(manifest.display()))?;
    println!("{}", json!({ "record": "summary", "written": args.count }));
    Ok(())
}
