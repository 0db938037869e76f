//! Line-delimited JSON records.
//!
//! Objects are backed by sorted maps, so keys always come out in the same
//! order and identical runs produce identical bytes. Every output stream
//! starts with a `meta` record naming the toolkit version, seeds and
//! parameters.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use heliokit_core::MetricReport;
use serde_json::{json, Map, Value};

pub const TOOLKIT: &str = "heliokit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header record for one command invocation.
pub fn meta(command: &str, seeds: &BTreeMap<String, u64>, params: Map<String, Value>) -> Value {
    json!({
        "record": "meta",
        "toolkit": TOOLKIT,
        "version": VERSION,
        "command": command,
        "seeds": seeds,
        "params": params,
    })
}

pub fn metric_record(report: &MetricReport) -> Value {
    json!({
        "record": "metrics",
        "model": report.model_id,
        "values": report.values,
        "params": report.params,
    })
}

/// Inverse of [`metric_record`]; `None` for any other record kind.
pub fn parse_metric_record(v: &Value) -> Option<Result<MetricReport, String>> {
    if v.get("record")?.as_str()? != "metrics" {
        return None;
    }
    Some((|| {
        let model = v.get("model").and_then(Value::as_str).ok_or("metrics record without a model")?;
        let values = v.get("values").and_then(Value::as_object).ok_or("metrics record without values")?;
        let mut report = MetricReport::new(model);
        for (name, value) in values {
            let x = value.as_f64().ok_or_else(|| format!("{model}: {name} is not a number"))?;
            report.insert(name, x).map_err(|e| format!("{model}: {e}"))?;
        }
        if let Some(params) = v.get("params").and_then(Value::as_object) {
            for (k, p) in params {
                report.set_param(k, p.as_str().map_or_else(|| p.to_string(), str::to_string));
            }
        }
        Ok(report)
    })())
}

pub fn write_records<W: Write>(records: &[Value], sink: W) -> io::Result<()> {
    let mut w = BufWriter::new(sink);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(records: &[Value], path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => write_records(records, File::create(p)?),
        None => write_records(records, io::stdout().lock()),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Value>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_come_out_sorted() {
        let mut params = Map::new();
        params.insert("zeta".into(), json!(1));
        params.insert("alpha".into(), json!(2));
        let mut buf = Vec::new();
        write_records(&[meta("eval", &BTreeMap::new(), params)], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.starts_with(r#"{"command":"eval","params":{"alpha":2,"zeta":1},"record":"meta","seeds":{}"#));
        assert!(line.ends_with("}\n"));
    }

    #[test]
    fn metric_records_round_trip() {
        let mut r = MetricReport::new("m");
        r.insert("FID", 12.5).unwrap();
        r.insert("precision", 0.25).unwrap();
        r.set_param("seed", 3);
        let back = parse_metric_record(&metric_record(&r)).unwrap().unwrap();
        assert_eq!(back, r);
        assert!(parse_metric_record(&json!({"record": "meta"})).is_none());
    }
}
