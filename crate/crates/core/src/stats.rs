//! Correlation, run aggregation and the statistics of the expert study.
//!
//! Standard deviations use the sample (n - 1) divisor throughout.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::MetricReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate input: zero variance")]
    DegenerateInput,
    #[error("need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("empty input")]
    EmptyInput,
    #[error("model {model:?} lacks metric {metric:?}")]
    MissingMetric { model: String, metric: String },
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooShort { needed: 3, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::BadArgs("non-finite value".to_string()));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_pair(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Mean and sample standard deviation over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAggregate {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl RunAggregate {
    /// `"mean ± std"` with the given number of decimals.
    pub fn format(&self, decimals: usize) -> String {
        format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.std)
    }
}

pub fn aggregate_runs(values: &[f64]) -> Result<RunAggregate, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewRuns(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::BadArgs("non-finite value".to_string()));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let std = libm::sqrt(ss / (values.len() - 1) as f64);
    Ok(RunAggregate { values: values.to_vec(), mean: m, std })
}

/// Log of `P(X = i) / P(X = mode)` for `X ~ Binomial(n, p)`, built outward
/// from the mode so the terms carrying most of the mass stay accurate.
fn binomial_log_weights(n: u64, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let n_us = n as usize;
    let mode = (libm::floor((n as f64 + 1.0) * p) as usize).min(n_us);
    let mut w = vec![0.0; n_us + 1];
    for i in mode..n_us {
        // P(i+1)/P(i) = (n-i) p / ((i+1) q)
        w[i + 1] = w[i] + libm::log(((n_us - i) as f64 * p) / ((i + 1) as f64 * q));
    }
    for i in (1..=mode).rev() {
        // P(i-1)/P(i) = i q / ((n-i+1) p)
        w[i - 1] = w[i] + libm::log((i as f64 * q) / ((n_us - i + 1) as f64 * p));
    }
    w
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(xs.map(|x| libm::exp(x - max)).sum::<f64>())
}

/// Probability mass function of `Binomial(n, p)` for every outcome.
pub fn binomial_pmf(n: u64, p: f64) -> Result<Vec<f64>, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::BadArgs(format!("p = {p} must lie in (0, 1)")));
    }
    let w = binomial_log_weights(n, p);
    let total = log_sum_exp(w.iter().copied());
    Ok(w.iter().map(|x| libm::exp(x - total)).collect())
}

/// Exact two-sided binomial test: the total probability of outcomes no more
/// likely than `k` under `Binomial(n, p0)`.
///
/// Outcomes within a relative 1e-7 of `P(k)` count as equally likely.
pub fn binomial_test_two_sided(k: u64, n: u64, p0: f64) -> Result<f64, StatsError> {
    if k > n {
        return Err(StatsError::BadArgs(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::BadArgs(format!("p0 = {p0} must lie in (0, 1)")));
    }
    let w = binomial_log_weights(n, p0);
    let threshold = w[k as usize] + 1e-7;
    let total = log_sum_exp(w.iter().copied());
    let tail = log_sum_exp(w.iter().copied().filter(|&x| x <= threshold));
    Ok(libm::exp(tail - total).clamp(f64::MIN_POSITIVE, 1.0))
}

/// One subject's answers in the real-vs-fake study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResponse {
    pub subject_id: String,
    /// Self-assessed expertise on a 1 to 5 scale.
    pub expertise: f64,
    pub correct: u32,
    pub n_questions: u32,
}

impl StudyResponse {
    pub fn new(subject_id: impl Into<String>, expertise: f64, correct: u32, n_questions: u32) -> Result<Self, StatsError> {
        if !(1.0..=5.0).contains(&expertise) {
            return Err(StatsError::BadArgs(format!("expertise {expertise} outside [1, 5]")));
        }
        if n_questions == 0 || correct > n_questions {
            return Err(StatsError::BadArgs(format!("{correct} correct of {n_questions} questions")));
        }
        Ok(StudyResponse { subject_id: subject_id.into(), expertise, correct, n_questions })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub n_subjects: usize,
    pub mean_correct: f64,
    /// `None` for a single subject.
    pub std_correct: Option<f64>,
    pub mean_expertise: f64,
    pub std_expertise: Option<f64>,
    pub pooled_correct: u64,
    pub pooled_questions: u64,
    /// Exact two-sided binomial test of the pooled count against p = 0.5.
    pub pooled_p_value: f64,
    /// Pearson correlation between expertise and score; `None` when fewer
    /// than 3 subjects or either variable is constant.
    pub expertise_correlation: Option<f64>,
    /// Subjects per score, index = number correct.
    pub correct_histogram: Vec<u64>,
    /// Subjects per rounded expertise level 1..=5.
    pub expertise_histogram: [u64; 5],
}

pub fn study_report(responses: &[StudyResponse]) -> Result<StudyReport, StatsError> {
    if responses.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let correct: Vec<f64> = responses.iter().map(|r| f64::from(r.correct)).collect();
    let expertise: Vec<f64> = responses.iter().map(|r| r.expertise).collect();
    let pooled_correct: u64 = responses.iter().map(|r| u64::from(r.correct)).sum();
    let pooled_questions: u64 = responses.iter().map(|r| u64::from(r.n_questions)).sum();
    let pooled_p_value = binomial_test_two_sided(pooled_correct, pooled_questions, 0.5)?;

    let max_q = responses.iter().map(|r| r.n_questions).max().unwrap_or(0) as usize;
    let mut correct_histogram = vec![0u64; max_q + 1];
    let mut expertise_histogram = [0u64; 5];
    for r in responses {
        correct_histogram[r.correct as usize] += 1;
        let level = (libm::round(r.expertise) as usize).clamp(1, 5);
        expertise_histogram[level - 1] += 1;
    }
    let spread = |xs: &[f64]| aggregate_runs(xs).ok().map(|a| a.std);

    Ok(StudyReport {
        n_subjects: responses.len(),
        mean_correct: mean(&correct),
        std_correct: spread(&correct),
        mean_expertise: mean(&expertise),
        std_expertise: spread(&expertise),
        pooled_correct,
        pooled_questions,
        pooled_p_value,
        expertise_correlation: pearson(&expertise, &correct).ok(),
        correct_histogram,
        expertise_histogram,
    })
}

/// Models (rows) by metrics (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    rows: Vec<MetricReport>,
    metric_names: Vec<String>,
}

impl MetricTable {
    /// Every row must define every metric in `metric_names`.
    pub fn new(rows: Vec<MetricReport>, metric_names: Vec<String>) -> Result<Self, StatsError> {
        for row in &rows {
            for name in &metric_names {
                if row.get(name).is_none() {
                    return Err(StatsError::MissingMetric { model: row.model_id.clone(), metric: name.clone() });
                }
            }
        }
        Ok(MetricTable { rows, metric_names })
    }

    /// Uses the metrics defined by every row, in sorted order.
    pub fn from_common_metrics(rows: Vec<MetricReport>) -> Result<Self, StatsError> {
        let first = rows.first().ok_or(StatsError::EmptyInput)?;
        let names = first.values.keys().filter(|k| rows.iter().all(|r| r.values.contains_key(*k))).cloned().collect();
        MetricTable::new(rows, names)
    }

    pub fn rows(&self) -> &[MetricReport] {
        &self.rows
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.metric_names.iter().any(|m| m == name).then(|| self.rows.iter().map(|r| r.get(name).unwrap_or(f64::NAN)).collect())
    }

    /// Pairwise Spearman correlations between metric columns. Entries are
    /// `None` where a column is constant or the table is too short.
    pub fn spearman_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let cols: Vec<Vec<f64>> = self.metric_names.iter().map(|m| self.column(m).expect("known metric")).collect();
        let m = cols.len();
        let mut out = vec![vec![None; m]; m];
        for i in 0..m {
            for j in i..m {
                let rho = spearman(&cols[i], &cols[j]).ok().map(|r| if i == j { 1.0 } else { r });
                out[i][j] = rho;
                out[j][i] = rho;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooShort { needed: 3, got: 2 }));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(3, 2)));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::DegenerateInput));
    }

    #[test]
    fn pearson_cases() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &lin).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        // sxy = 1, sxx = 5, syy = 1
        let r = pearson(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((r - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aggregates() {
        let a = aggregate_runs(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((a.mean, a.std), (2.0, 0.0));
        let b = aggregate_runs(&[1.0, 3.0]).unwrap();
        assert_eq!(b.mean, 2.0);
        assert!((b.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(aggregate_runs(&[1.0]), Err(StatsError::TooFewRuns(1)));
        let five = aggregate_runs(&[2.0, 3.0, 4.0, 5.0, 7.0]).unwrap();
        assert_eq!(five.format(1), format!("4.2 ± {:.1}", five.std));
    }

    #[test]
    fn binomial_cases() {
        assert!((binomial_test_two_sided(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let p = binomial_test_two_sided(0, 10, 0.5).unwrap();
        assert!((p - 2.0 / 1024.0).abs() < 1e-15, "{p}");
        assert!((binomial_test_two_sided(10, 10, 0.5).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
        assert!(binomial_test_two_sided(11, 10, 0.5).is_err());
        assert!(binomial_test_two_sided(1, 10, 1.0).is_err());
        assert_eq!(binomial_test_two_sided(0, 0, 0.3).unwrap(), 1.0);
        let pmf = binomial_pmf(4, 0.5).unwrap();
        for (got, want) in pmf.iter().zip([1.0, 4.0, 6.0, 4.0, 1.0]) {
            assert!((got - want / 16.0).abs() < 1e-16);
        }
    }

    #[test]
    fn study_cases() {
        let half: Vec<_> = (0..4).map(|i| StudyResponse::new(format!("s{i}"), 1.0 + i as f64, 5, 10).unwrap()).collect();
        let r = study_report(&half).unwrap();
        assert!((r.pooled_p_value - 1.0).abs() < 1e-15);
        assert_eq!(r.std_correct, Some(0.0));
        assert_eq!(r.expertise_correlation, None);

        let single = [StudyResponse::new("solo", 3.0, 10, 10).unwrap()];
        let r = study_report(&single).unwrap();
        assert!((r.pooled_p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert_eq!(r.std_correct, None);
        assert_eq!(r.correct_histogram[10], 1);
        assert_eq!(r.expertise_histogram, [0, 0, 1, 0, 0]);

        assert_eq!(study_report(&[]), Err(StatsError::EmptyInput));
        assert!(StudyResponse::new("x", 0.5, 1, 10).is_err());
        assert!(StudyResponse::new("x", 2.0, 11, 10).is_err());
    }

    #[test]
    fn table_matrix() {
        let mk = |id: &str, a: f64, b: f64| {
            let mut r = MetricReport::new(id);
            r.values.insert("A".into(), a);
            r.values.insert("B".into(), b);
            r
        };
        let table = MetricTable::new(vec![mk("x", 1.0, 3.0), mk("y", 2.0, 2.0), mk("z", 3.0, 1.0)], vec!["A".into(), "B".into()]).unwrap();
        let m = table.spearman_matrix();
        assert_eq!(m[0][0], Some(1.0));
        assert_eq!(m[0][1], Some(-1.0));
        assert!(MetricTable::new(vec![mk("x", 1.0, 1.0)], vec!["C".into()]).is_err());
        let common = MetricTable::from_common_metrics(vec![mk("x", 1.0, 3.0)]).unwrap();
        assert_eq!(common.metric_names(), &["A".to_string(), "B".to_string()]);
    }
}
