//! CSV inputs: human-study responses and model-by-metric tables.

use std::path::Path;

use heliokit_core::stats::MetricTable;
use heliokit_core::{MetricReport, StudyResponse};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Debug, serde::Deserialize)]
struct StudyRow {
    subject_id: String,
    expertise: f64,
    correct: u32,
    n_questions: u32,
}

/// Reads `subject_id,expertise,correct,n_questions` rows.
pub fn read_study_csv(path: &Path) -> Result<Vec<StudyResponse>, TableError> {
    let shown = path.display().to_string();
    let csv_err = |source| TableError::Csv { path: shown.clone(), source };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<StudyRow>() {
        let row = row.map_err(csv_err)?;
        let r = StudyResponse::new(row.subject_id, row.expertise, row.correct, row.n_questions)
            .map_err(|e| TableError::Invalid { path: shown.clone(), reason: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}

/// Reads a table whose first column is the model name and whose remaining
/// columns are metric values, one model per row.
pub fn read_metric_table_csv(path: &Path) -> Result<MetricTable, TableError> {
    let shown = path.display().to_string();
    let invalid = |reason: String| TableError::Invalid { path: shown.clone(), reason };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| TableError::Csv { path: shown.clone(), source })?;
    let header = reader.headers().map_err(|source| TableError::Csv { path: shown.clone(), source })?.clone();
    if header.len() < 2 {
        return Err(invalid("need a model column and at least one metric column".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| TableError::Csv { path: shown.clone(), source })?;
        let mut report = MetricReport::new(&record[0]);
        for (name, cell) in names.iter().zip(record.iter().skip(1)) {
            let v: f64 = cell.parse().map_err(|_| invalid(format!("{}: {name} = {cell:?} is not a number", &record[0])))?;
            report.insert(name, v).map_err(|e| invalid(format!("{}: {e}", &record[0])))?;
        }
        rows.push(report);
    }
    MetricTable::new(rows, names).map_err(|e| invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn study_rows_are_validated() {
        let f = temp_csv("subject_id,expertise,correct,n_questions\na,2,3,10\nb,7,3,10\n");
        assert!(matches!(read_study_csv(f.path()), Err(TableError::Invalid { .. })));
    }

    #[test]
    fn metric_table_reads_columns_in_order() {
        let f = temp_csv("model,FID,recall\n# comment\nm1,3.5,0.2\nm2,1.0,0.4\n");
        let t = read_metric_table_csv(f.path()).unwrap();
        assert_eq!(t.metric_names(), ["FID", "recall"]);
        assert_eq!(t.column("recall").unwrap(), vec![0.2, 0.4]);
    }
}
