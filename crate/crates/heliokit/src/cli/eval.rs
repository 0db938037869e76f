use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use heliokit_core::imageprep::sample_corpus_patches;
use heliokit_core::metrics::{fid, kid, names, patch_fid, precision_recall, PatchFeaturizer, PcaProjection, PooledPixels};
use heliokit_core::rng::{derive_seed, seeded};
use heliokit_core::{FeatureSet, MetricReport, NormalizedImage};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{load_metric_table, params, path_value, split_named, EvalArgs, PatchFeatures};
use crate::error::HelioError;
use crate::feat1::read_features_file;
use crate::imageio::load_folder;
use crate::records::{emit, meta, metric_record};

#[derive(Debug, Clone, PartialEq)]
enum Requested {
    Fid,
    Kid,
    Precision,
    Recall,
    PatchFid(usize),
}

fn parse_metric(name: &str) -> Result<Requested, HelioError> {
    match name {
        names::FID => Ok(Requested::Fid),
        names::KID => Ok(Requested::Kid),
        names::PRECISION => Ok(Requested::Precision),
        names::RECALL => Ok(Requested::Recall),
        _ => name
            .strip_prefix("FID-p")
            .and_then(|s| s.parse().ok())
            .filter(|&s: &usize| s > 0)
            .map(Requested::PatchFid)
            .ok_or_else(|| {
                HelioError::usage(format!(
                    "unknown metric {name:?}; expected FID, KID, precision, recall or FID-p<size> (use --pair for other distances)"
                ))
            }),
    }
}

struct Pair {
    metric: String,
    real: PathBuf,
    fake: PathBuf,
}

fn parse_pair(raw: &str) -> Result<Pair, HelioError> {
    let (metric, files) = split_named(raw, "pair")?;
    match files.split_once(',') {
        Some((r, f)) if !r.is_empty() && !f.is_empty() => Ok(Pair { metric: metric.to_string(), real: r.into(), fake: f.into() }),
        _ => Err(HelioError::usage(format!("--pair expects METRIC=REAL,FAKE, got {raw:?}"))),
    }
}

/// Keeps at most `budget` rows. Both sides use the same index stream, so a
/// file compared with itself keeps identical rows.
fn within_budget(fs: FeatureSet, budget: usize, seed: u64) -> Result<FeatureSet, HelioError> {
    if fs.count() <= budget {
        return Ok(fs);
    }
    let mut rng = seeded(derive_seed(seed, "sample-budget"));
    let mut idx = rand::seq::index::sample(&mut rng, fs.count(), budget).into_vec();
    idx.sort_unstable();
    fs.select(&idx).map_err(|e| HelioError::data("InvariantViolation", e.to_string()))
}

fn load(path: &Path, budget: usize, seed: u64) -> Result<FeatureSet, HelioError> {
    let fs = read_features_file(path).map_err(|e| HelioError::from(e).context(path.display()))?;
    within_budget(fs, budget, seed)
}

fn load_images(dir: &Option<PathBuf>, flag: &str) -> Result<Vec<NormalizedImage>, HelioError> {
    let dir = dir.as_ref().ok_or_else(|| HelioError::usage(format!("patch FID needs --{flag}")))?;
    let images = load_folder(dir).map_err(|e| HelioError::from(e).context(dir.display()))?;
    if images.is_empty() {
        return Err(HelioError::data("EmptyInput", format!("no HTIL/PNG images in {}", dir.display())));
    }
    Ok(images)
}

fn replay(args: &EvalArgs, table_path: &Path) -> Result<(), HelioError> {
    if args.real.is_some() || args.fake.is_some() || !args.pairs.is_empty() || !args.metrics.is_empty() {
        return Err(HelioError::usage("--replay cannot be combined with feature inputs or --metrics"));
    }
    let table = load_metric_table(table_path)?;
    let matrix = table.spearman_matrix();
    let names = table.metric_names();
    let mut records = vec![
        meta("eval", &BTreeMap::new(), params([("replay", json!(table_path.display().to_string()))])),
        json!({ "record": "spearman", "metrics": names, "models": table.rows().len(), "matrix": matrix }),
    ];
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            records.push(json!({ "record": "spearman_pair", "a": names[i], "b": names[j], "rho": matrix[i][j] }));
        }
    }
    emit(&records, args.out.as_deref())?;
    Ok(())
}

pub fn run(args: &EvalArgs) -> Result<(), HelioError> {
    if let Some(table) = &args.replay {
        return replay(args, table);
    }
    let has_main = match (&args.real, &args.fake) {
        (Some(_), Some(_)) => true,
        (None, None) => false,
        _ => return Err(HelioError::usage("--real and --fake go together")),
    };
    let requested: Vec<Requested> = if args.metrics.is_empty() {
        if has_main {
            vec![Requested::Fid, Requested::Kid, Requested::Precision, Requested::Recall]
        } else {
            Vec::new()
        }
    } else {
        args.metrics.iter().map(|m| parse_metric(m.trim())).collect::<Result<_, _>>()?
    };
    let pairs: Vec<Pair> = args.pairs.iter().map(|p| parse_pair(p)).collect::<Result<_, _>>()?;
    if requested.is_empty() && pairs.is_empty() {
        return Err(HelioError::usage("nothing to compute: pass --real/--fake, --pair or --replay"));
    }
    let needs_features = requested.iter().any(|r| !matches!(r, Requested::PatchFid(_)));
    if needs_features && !has_main {
        return Err(HelioError::usage("FID, KID, precision and recall need --real and --fake"));
    }
    let patch_sizes: Vec<usize> = requested.iter().filter_map(|r| if let Requested::PatchFid(s) = r { Some(*s) } else { None }).collect();
    if !patch_sizes.is_empty() {
        if args.real_images.is_none() || args.fake_images.is_none() {
            return Err(HelioError::usage("patch FID needs --real-images and --fake-images"));
        }
        for &size in &patch_sizes {
            if args.patch_grid == 0 || size % args.patch_grid != 0 {
                return Err(HelioError::usage(format!("--patch-grid {} must divide patch size {size}", args.patch_grid)));
            }
        }
        if args.patch_count == 0 {
            return Err(HelioError::usage("--patch-count must be positive"));
        }
    }
    if args.sample_budget < 2 {
        return Err(HelioError::usage("--sample-budget must be at least 2"));
    }

    let mut report = MetricReport::new(&args.model);
    report.set_param("seed", args.seed);
    report.set_param("sample_budget", args.sample_budget);

    if needs_features {
        let (real_path, fake_path) = (args.real.as_ref().unwrap(), args.fake.as_ref().unwrap());
        let (real, fake) = rayon::join(
            || load(real_path, args.sample_budget, args.seed),
            || load(fake_path, args.sample_budget, args.seed),
        );
        let (real, fake) = (real?, fake?);
        if real.extractor_id() != fake.extractor_id() {
            log::warn!("extractor ids differ: {} vs {}", real.extractor_id(), fake.extractor_id());
        }
        report.set_param("extractor", real.extractor_id());
        report.set_param("n_real", real.count());
        report.set_param("n_fake", fake.count());
        for r in &requested {
            match r {
                Requested::Fid => report.insert(names::FID, fid(&real, &fake)?)?,
                Requested::Kid => {
                    let size = args.kid_subset_size.unwrap_or(1000.min(real.count()).min(fake.count()));
                    let est = kid(&real, &fake, size, args.kid_subsets, args.seed)?;
                    report.insert(names::KID, est.mean)?;
                    report.insert(names::KID_STD, est.std)?;
                    report.set_param("kid_subset_size", size);
                    report.set_param("kid_subsets", args.kid_subsets);
                }
                Requested::Precision | Requested::Recall if report.get(names::PRECISION).is_none() => {
                    let pr = precision_recall(&real, &fake, args.pr_k)?;
                    let wanted = |x: Requested| requested.contains(&x);
                    if wanted(Requested::Precision) {
                        report.insert(names::PRECISION, pr.precision)?;
                    }
                    if wanted(Requested::Recall) {
                        report.insert(names::RECALL, pr.recall)?;
                    }
                    report.set_param("pr_k", args.pr_k);
                }
                _ => {}
            }
        }
    }

    if !patch_sizes.is_empty() {
        let real = load_images(&args.real_images, "real-images")?;
        let fake = load_images(&args.fake_images, "fake-images")?;
        report.set_param("patch_count", args.patch_count);
        report.set_param("patch_grid", args.patch_grid);
        for &size in &patch_sizes {
            let featurizer: Box<dyn PatchFeaturizer> = match args.patch_features {
                PatchFeatures::Pooled => Box::new(PooledPixels { grid: args.patch_grid }),
                PatchFeatures::Pca => {
                    let reference = sample_corpus_patches(&real, size, args.patch_count, derive_seed(args.seed, "pca-fit"))?;
                    Box::new(PcaProjection::fit(&reference, args.patch_grid, args.patch_pca_k)?)
                }
            };
            report.set_param(&format!("FID-p{size}_features"), featurizer.extractor_id());
            let value = patch_fid(&real, &fake, size, args.patch_count, featurizer.as_ref(), args.seed)?;
            report.insert(&format!("FID-p{size}"), value)?;
        }
    }

    let distances: Vec<(String, f64)> = pairs
        .par_iter()
        .map(|p| {
            let real = load(&p.real, args.sample_budget, args.seed)?;
            let fake = load(&p.fake, args.sample_budget, args.seed)?;
            Ok((p.metric.clone(), fid(&real, &fake).map_err(|e| HelioError::from(e).context(&p.metric))?))
        })
        .collect::<Result<_, HelioError>>()?;
    for (metric, value) in distances {
        report.insert(&metric, value)?;
    }

    let seeds = BTreeMap::from([("seed".to_string(), args.seed)]);
    let pair_params: Vec<Value> = pairs
        .iter()
        .map(|p| json!({ "metric": p.metric, "real": p.real.display().to_string(), "fake": p.fake.display().to_string() }))
        .collect();
    let header = meta(
        "eval",
        &seeds,
        params([
            ("model", json!(args.model)),
            ("real", path_value(&args.real)),
            ("fake", path_value(&args.fake)),
            ("pairs", json!(pair_params)),
            ("metrics", json!(args.metrics)),
            ("real_images", path_value(&args.real_images)),
            ("fake_images", path_value(&args.fake_images)),
            ("sample_budget", json!(args.sample_budget)),
        ]),
    );
    emit(&[header, metric_record(&report)], args.out.as_deref())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_parse() {
        assert_eq!(parse_metric("FID-p64").unwrap(), Requested::PatchFid(64));
        assert_eq!(parse_metric("KID").unwrap(), Requested::Kid);
        assert_eq!(parse_metric("FID-p0").unwrap_err().exit_code(), 2);
        assert_eq!(parse_metric("IS").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn pairs_need_two_files() {
        let p = parse_pair("rFID=a.feat1,b.feat1").unwrap();
        assert_eq!((p.metric.as_str(), p.real.to_str(), p.fake.to_str()), ("rFID", Some("a.feat1"), Some("b.feat1")));
        assert!(parse_pair("rFID=a.feat1").is_err());
        assert!(parse_pair("=a,b").is_err());
    }

    #[test]
    fn budget_keeps_identical_rows_for_identical_inputs() {
        let rows: Vec<Vec<f32>> = (0..50).map(|i| vec![i as f32]).collect();
        let fs = FeatureSet::from_rows("e", &rows).unwrap();
        let a = within_budget(fs.clone(), 10, 4).unwrap();
        assert_eq!(a.count(), 10);
        assert_eq!(a, within_budget(fs, 10, 4).unwrap());
    }
}
