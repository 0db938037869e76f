use std::collections::BTreeMap;
use std::fs::File;

use heliokit_core::latent::{edit_grid, pca};
use heliokit_core::LatentBank;
use serde_json::json;

use super::{ensure_dir, params, LatentArgs};
use crate::error::HelioError;
use crate::feat1::{read_features_file, write_rows};
use crate::records::{emit, meta};

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub fn run(args: &LatentArgs) -> Result<(), HelioError> {
    if args.samples == 0 {
        return Err(HelioError::usage("--samples must be at least 1"));
    }
    if args.coords.is_empty() || args.coords.iter().any(|c| !c.is_finite()) {
        return Err(HelioError::usage("--coords must be finite numbers"));
    }
    let features = read_features_file(&args.bank).map_err(|e| HelioError::from(e).context(args.bank.display()))?;
    let bank = LatentBank::from_features(&features)?;
    let dirs = pca(&bank, args.k)?;
    if args.component >= dirs.k() {
        return Err(HelioError::usage(format!("--component {} out of range for k = {}", args.component, dirs.k())));
    }
    ensure_dir(&args.out_dir)?;
    let space = bank.space_id();
    let w = bank.width();

    // Directions, one row per component.
    let comp_rows: Vec<Vec<f32>> = (0..dirs.k()).map(|i| to_f32(dirs.component(i))).collect();
    let comp_refs: Vec<&[f32]> = comp_rows.iter().map(Vec::as_slice).collect();
    let comp_ids: Vec<String> = (0..dirs.k()).map(|i| format!("pc{i}")).collect();
    let directions_path = args.out_dir.join("directions.feat1");
    write_rows(&format!("{space}-pca"), w, &comp_ids, &comp_refs, File::create(&directions_path)?)?;

    // Edit grid: sample-major, one row per (sample, coordinate).
    let n = args.samples.min(bank.len());
    let samples: Vec<Vec<f64>> = (0..n).map(|i| bank.vectors().row(i).to_vec()).collect();
    let grid = edit_grid(&dirs, &samples, args.component, &args.coords, args.relative)?;
    let mut grid_rows = Vec::with_capacity(n * args.coords.len());
    let mut grid_ids = Vec::with_capacity(n * args.coords.len());
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            grid_rows.push(to_f32(v));
            grid_ids.push(format!("{}@{j}", features.sample_ids()[i]));
        }
    }
    let grid_refs: Vec<&[f32]> = grid_rows.iter().map(Vec::as_slice).collect();
    write_rows(space, w, &grid_ids, &grid_refs, File::create(args.out_dir.join("grid.feat1"))?)?;

    let total_variance: f64 = (0..w)
        .map(|j| {
            let col: Vec<f64> = (0..bank.len()).map(|i| bank.vectors().row(i)[j]).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() - 1) as f64
        })
        .sum();
    let header = meta(
        "latent",
        &BTreeMap::new(),
        params([
            ("bank", json!(args.bank.display().to_string())),
            ("k", json!(args.k)),
            ("component", json!(args.component)),
            ("coords", json!(args.coords)),
            ("relative", json!(args.relative)),
            ("samples", json!(n)),
        ]),
    );
    let pca_record = json!({
        "record": "pca",
        "space": space,
        "n": bank.len(),
        "width": w,
        "k": dirs.k(),
        "eigenvalues": dirs.eigenvalues(),
        "total_variance": total_variance,
        "mean": dirs.mean(),
    });
    let grid_record = json!({
        "record": "grid",
        "component": args.component,
        "coords": args.coords,
        "relative": args.relative,
        "samples": &features.sample_ids()[..n],
        "rows": n,
        "columns": args.coords.len(),
    });
    let sidecar = args.out_dir.join("directions.jsonl");
    emit(&[header, pca_record, grid_record], Some(&sidecar)).map_err(|e| HelioError::from(e).context(sidecar.display()))?;
    println!("{dirs}");
    Ok(())
}
