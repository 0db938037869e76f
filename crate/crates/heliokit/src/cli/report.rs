use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use heliokit_core::imageprep::quantize_u8;
use heliokit_core::metrics::{pixel_histogram, tail_mass};
use heliokit_core::stats::{aggregate_runs, study_report, MetricTable, StudyReport};
use heliokit_core::PixelHistogram;
use serde_json::{json, Value};

use super::{ensure_dir, load_metric_table, params, path_value, split_named, ReportArgs};
use crate::error::HelioError;
use crate::imageio::load_folder;
use crate::plot::save_bar_chart;
use crate::records::{emit, meta};
use crate::tables::read_study_csv;

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.decimals$}"))
}

fn correlation_section(table: &MetricTable, decimals: usize, text: &mut String) -> Value {
    let names = table.metric_names();
    let matrix = table.spearman_matrix();
    let width = names.iter().map(String::len).max().unwrap_or(0).max(decimals + 3);
    let _ = writeln!(text, "Spearman rank correlation over {} models", table.rows().len());
    let _ = write!(text, "{:width$}", "");
    for n in names {
        let _ = write!(text, "  {n:>width$}");
    }
    text.push('\n');
    for (n, row) in names.iter().zip(&matrix) {
        let _ = write!(text, "{n:width$}");
        for v in row {
            let _ = write!(text, "  {:>width$}", fmt_opt(*v, decimals));
        }
        text.push('\n');
    }
    text.push('\n');
    json!({ "record": "spearman", "metrics": names, "models": table.rows().len(), "matrix": matrix })
}

fn study_section(report: &StudyReport, decimals: usize, text: &mut String) -> Value {
    let spread = |s: Option<f64>| s.map_or_else(String::new, |s| format!(" ± {s:.decimals$}"));
    let _ = writeln!(text, "Human study over {} subjects", report.n_subjects);
    let _ = writeln!(text, "  correct per subject  {:.decimals$}{}", report.mean_correct, spread(report.std_correct));
    let _ = writeln!(text, "  expertise            {:.decimals$}{}", report.mean_expertise, spread(report.std_expertise));
    let _ = writeln!(
        text,
        "  pooled               {}/{} correct, two-sided binomial p = {:.6}",
        report.pooled_correct, report.pooled_questions, report.pooled_p_value
    );
    let _ = writeln!(text, "  expertise vs score   r = {}", fmt_opt(report.expertise_correlation, decimals));
    let _ = writeln!(text, "  subjects per score   {:?}", report.correct_histogram);
    let _ = writeln!(text, "  subjects per level   {:?}\n", report.expertise_histogram);
    json!({
        "record": "study",
        "n_subjects": report.n_subjects,
        "mean_correct": report.mean_correct,
        "std_correct": report.std_correct,
        "mean_expertise": report.mean_expertise,
        "std_expertise": report.std_expertise,
        "pooled_correct": report.pooled_correct,
        "pooled_questions": report.pooled_questions,
        "pooled_p_value": report.pooled_p_value,
        "expertise_correlation": report.expertise_correlation,
        "correct_histogram": report.correct_histogram,
        "expertise_histogram": report.expertise_histogram,
    })
}

fn parse_runs(raw: &str) -> Result<(String, Vec<f64>), HelioError> {
    let (name, list) = split_named(raw, "runs")?;
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| HelioError::usage(format!("--runs {name}: values must be finite numbers")))?;
    Ok((name.to_string(), values))
}

fn histogram_of(dir: &Path) -> Result<PixelHistogram, HelioError> {
    let images = load_folder(dir).map_err(|e| HelioError::from(e).context(dir.display()))?;
    let quantized: Vec<_> = images.iter().map(quantize_u8).collect();
    pixel_histogram(&quantized).map_err(|e| HelioError::from(e).context(dir.display()))
}

fn histogram_record(side: &str, h: &PixelHistogram, cutoff: u32) -> Result<Value, HelioError> {
    let (below, above) = tail_mass(h, cutoff)?;
    Ok(json!({
        "record": "histogram",
        "side": side,
        "total": h.total,
        "mean_pixel": h.mean_pixel,
        "tail_cutoff": cutoff,
        "mass_below": below,
        "mass_at_or_above": above,
        "bins": h.bins.to_vec(),
    }))
}

pub fn run(args: &ReportArgs) -> Result<(), HelioError> {
    let has_histograms = args.real_images.is_some() || args.fake_images.is_some();
    if args.metrics.is_none() && args.study.is_none() && args.runs.is_empty() && !has_histograms {
        return Err(HelioError::usage("nothing to report: pass --metrics, --study, --runs or --real-images/--fake-images"));
    }
    if args.tail_cutoff > 255 {
        return Err(HelioError::usage(format!("--tail-cutoff {} outside 0..=255", args.tail_cutoff)));
    }
    let runs: Vec<(String, Vec<f64>)> = args.runs.iter().map(|r| parse_runs(r)).collect::<Result<_, _>>()?;
    if let Some(dir) = &args.plot_dir {
        ensure_dir(dir)?;
    }
    let plot = |name: &str, series: &[&[f64]], bar: u32| -> Result<(), HelioError> {
        if let Some(dir) = &args.plot_dir {
            let path: PathBuf = dir.join(name);
            save_bar_chart(&path, series, 200, bar).map_err(|e| HelioError::data("PlotError", e.to_string()).context(path.display()))?;
        }
        Ok(())
    };

    let d = args.decimals;
    let mut text = String::new();
    let mut records = vec![meta(
        "report",
        &BTreeMap::new(),
        params([
            ("metrics", path_value(&args.metrics)),
            ("study", path_value(&args.study)),
            ("runs", json!(args.runs)),
            ("real_images", path_value(&args.real_images)),
            ("fake_images", path_value(&args.fake_images)),
            ("tail_cutoff", json!(args.tail_cutoff)),
        ]),
    )];

    if let Some(path) = &args.metrics {
        let table = load_metric_table(path)?;
        records.push(correlation_section(&table, d, &mut text));
    }

    if let Some(path) = &args.study {
        let responses = read_study_csv(path)?;
        let report = study_report(&responses)?;
        records.push(study_section(&report, d, &mut text));
        let counts: Vec<f64> = report.correct_histogram.iter().map(|&c| c as f64).collect();
        plot("study_scores.png", &[&counts], 12)?;
        let levels: Vec<f64> = report.expertise_histogram.iter().map(|&c| c as f64).collect();
        plot("study_expertise.png", &[&levels], 24)?;
    }

    if !runs.is_empty() {
        let _ = writeln!(text, "Repeated runs");
        for (name, values) in &runs {
            let agg = aggregate_runs(values).map_err(|e| HelioError::from(e).context(format!("--runs {name}")))?;
            let _ = writeln!(text, "  {name}: {} ({} runs)", agg.format(d), values.len());
            records.push(json!({
                "record": "runs",
                "name": name,
                "values": values,
                "mean": agg.mean,
                "std": agg.std,
                "formatted": agg.format(d),
            }));
        }
        text.push('\n');
    }

    if has_histograms {
        let mut hists = Vec::new();
        for (side, dir) in [("real", &args.real_images), ("fake", &args.fake_images)] {
            if let Some(dir) = dir {
                let h = histogram_of(dir)?;
                let rec = histogram_record(side, &h, args.tail_cutoff)?;
                let _ = writeln!(
                    text,
                    "Pixel histogram ({side}): {} pixels, mean {:.d$}, mass below {} = {:.4}, at or above = {:.4}",
                    h.total, h.mean_pixel, args.tail_cutoff, rec["mass_below"].as_f64().unwrap_or(0.0),
                    rec["mass_at_or_above"].as_f64().unwrap_or(0.0)
                );
                records.push(rec);
                hists.push(h);
            }
        }
        if let [real, fake] = hists.as_slice() {
            let l1 = real.l1_distance(fake);
            let _ = writeln!(text, "Histogram L1 distance: {l1:.4}");
            records.push(json!({ "record": "histogram_comparison", "l1_distance": l1 }));
        }
        text.push('\n');
        let densities: Vec<Vec<f64>> = hists.iter().map(PixelHistogram::density).collect();
        let series: Vec<&[f64]> = densities.iter().map(Vec::as_slice).collect();
        plot("pixel_histogram.png", &series, 2)?;
    }

    print!("{text}");
    if let Some(path) = &args.records {
        emit(&records, Some(path)).map_err(|e| HelioError::from(e).context(path.display()))?;
    }
    Ok(())
}
