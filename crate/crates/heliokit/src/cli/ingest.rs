use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use heliokit_core::fits::quality_filter_with_key;
use heliokit_core::imageprep::{normalize_intensity, normalize_intensity_per_image, resize_to};
use heliokit_core::{parse_fits, FitsImage, NormalizedImage};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{ensure_dir, params, IngestArgs};
use crate::error::HelioError;
use crate::imageio::save_tile;
use crate::records::{emit, meta};

const FITS_EXTENSIONS: [&str; 3] = ["fits", "fit", "fts"];

fn list_fits(dir: &Path) -> Result<Vec<PathBuf>, HelioError> {
    let entries = fs::read_dir(dir).map_err(|e| HelioError::from(e).context(dir.display()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| FITS_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Width and height if the image is 2-D up to trailing unit axes.
fn plane(img: &FitsImage) -> Option<(usize, usize)> {
    if img.naxes.len() < 2 || img.naxes[2..].iter().any(|&n| n != 1) {
        return None;
    }
    Some((img.naxes[0], img.naxes[1]))
}

fn rejected(file: &str, reason: String, quality: Option<i64>) -> Value {
    json!({ "record": "ingest", "file": file, "status": "rejected", "reason": reason, "quality": quality })
}

fn process(path: &Path, out_dir: &Path, args: &IngestArgs) -> Result<Value, HelioError> {
    let file = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let img = match parse_fits(&fs::read(path)?) {
        Ok(img) => img,
        Err(e) => return Ok(rejected(&file, format!("unreadable: {e}"), None)),
    };
    let verdict = quality_filter_with_key(&img, &args.quality_key);
    if !verdict.accepted {
        let reason = match verdict.quality_flag {
            Some(q) => format!("{} = {q}", args.quality_key),
            None => format!("{} missing", args.quality_key),
        };
        return Ok(rejected(&file, reason, verdict.quality_flag));
    }
    let Some((w, h)) = plane(&img) else {
        return Ok(rejected(&file, format!("not a 2-D image (axes {:?})", img.naxes), verdict.quality_flag));
    };
    let mut norm: NormalizedImage = if args.per_image_max {
        normalize_intensity_per_image(&img.data, w, h, &file)?
    } else {
        normalize_intensity(&img.data, w, h, args.max_dn, &file)?
    };
    if let Some(target) = args.resize {
        norm = match resize_to(&norm, target) {
            Ok(r) => r,
            Err(e) => return Ok(rejected(&file, format!("resize to {target}: {e}"), verdict.quality_flag)),
        };
    }
    let written = save_tile(&norm, out_dir, &stem, args.format)?;
    let outputs: Vec<String> =
        written.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()).collect();
    Ok(json!({
        "record": "ingest",
        "file": file,
        "status": "kept",
        "quality": verdict.quality_flag,
        "width": norm.width(),
        "height": norm.height(),
        "outputs": outputs,
    }))
}

pub fn run(args: &IngestArgs) -> Result<(), HelioError> {
    if args.max_dn < 2 && !args.per_image_max {
        return Err(HelioError::usage(format!("--max-dn must be at least 2, got {}", args.max_dn)));
    }
    if args.resize == Some(0) {
        return Err(HelioError::usage("--resize must be positive"));
    }
    let files = list_fits(&args.input)?;
    if files.is_empty() {
        return Err(HelioError::data("EmptyInput", format!("no FITS files in {}", args.input.display())));
    }
    ensure_dir(&args.output)?;
    let entries: Vec<Value> = files
        .par_iter()
        .map(|p| process(p, &args.output, args).map_err(|e| e.context(p.display())))
        .collect::<Result<_, _>>()?;
    let kept = entries.iter().filter(|e| e["status"] == "kept").count();

    let normalization = if args.per_image_max { json!("per-image-max") } else { json!({ "max_dn": args.max_dn }) };
    let mut records = vec![meta(
        "ingest",
        &BTreeMap::new(),
        params([
            ("input", json!(args.input.display().to_string())),
            ("resize", json!(args.resize)),
            ("normalization", normalization),
            ("quality_key", json!(args.quality_key)),
            ("format", json!(format!("{:?}", args.format).to_lowercase())),
        ]),
    )];
    records.extend(entries);
    let summary = json!({ "record": "summary", "kept": kept, "rejected": files.len() - kept, "total": files.len() });
    records.push(summary.clone());
    let manifest = args.manifest.clone().unwrap_or_else(|| args.output.join("manifest.jsonl"));
    emit(&records, Some(&manifest)).map_err(|e| HelioError::from(e).context(manifest.display()))?;
    println!("{summary}");
    Ok(())
}
