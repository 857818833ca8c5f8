//! File formats: JSON with round-trip-exact floats, trace JSONL/CSV, and
//! atomic writes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::channel::Channel;
use crate::dist::{Dist, ExtendedReal};
use crate::em::StepRecord;
use crate::error::Error;
use crate::Result;

/// 17 significant digits: enough to reproduce any f64 bit-exactly, so golden
/// files and determinism tests can compare bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Compact JSON whose floats all go through [`fmt_f64`].
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize one value to a single JSON line (no trailing newline).
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// One record per line.
pub fn records_to_jsonl(records: &[StepRecord]) -> Result<String> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&to_json_line(rec)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_jsonl(s: &str) -> Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    for (i, line) in s.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(line).map_err(|e| Error::TraceParse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

fn ext_to_csv(v: ExtendedReal) -> String {
    match v {
        ExtendedReal::Finite(x) => fmt_f64(x),
        ExtendedReal::PosInf => "inf".into(),
        ExtendedReal::NegInf => "-inf".into(),
    }
}

/// Header plus one line per record: iteration, kl, log_lik, delta_q,
/// delta_h, then the theta entries. Absent deltas are empty fields.
pub fn records_to_csv(records: &[StepRecord]) -> String {
    let n = records.first().map_or(0, |r| r.theta.len());
    let mut out = String::from("iteration,kl,log_lik,delta_q,delta_h");
    for i in 0..n {
        out.push_str(&format!(",theta_{i}"));
    }
    out.push('\n');
    for rec in records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            rec.iteration,
            ext_to_csv(rec.kl),
            ext_to_csv(rec.log_lik),
            rec.delta_q.map(fmt_f64).unwrap_or_default(),
            rec.delta_h.map(fmt_f64).unwrap_or_default(),
        ));
        for &w in rec.theta.weights() {
            out.push(',');
            out.push_str(&fmt_f64(w));
        }
        out.push('\n');
    }
    out
}

/// Minimal convergence table for external plotting.
pub fn plot_data_csv(records: &[StepRecord]) -> String {
    let mut out = String::from("iteration,kl,log_lik\n");
    for rec in records {
        out.push_str(&format!(
            "{},{},{}\n",
            rec.iteration,
            ext_to_csv(rec.kl),
            ext_to_csv(rec.log_lik)
        ));
    }
    out
}

/// Write via a temp file in the target directory plus rename, so readers
/// never observe a half-written file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Load a channel from JSON (`{"n", "m", "rows"}`) or, for `.csv` paths,
/// comma-separated rows.
pub fn load_channel(path: &Path) -> Result<Channel> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Channel::from_csv_str(&text)
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

/// Load a distribution from a JSON array of probabilities.
pub fn load_dist(path: &Path) -> Result<Dist> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Load whitespace/newline-separated sample indices.
pub fn load_samples(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| {
                Error::ChannelParse(format!("sample file has a non-index token: {tok:?}"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{run, StopCriteria};

    fn sample_records() -> Vec<StepRecord> {
        let c = Channel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let tau = Dist::new(vec![0.5, 0.5]).unwrap();
        run(&c, &Dist::uniform(2), &tau, &StopCriteria::default())
            .unwrap()
            .records
    }

    #[test]
    fn fmt_f64_round_trips_exactly() {
        for v in [
            0.1,
            2.0 / 3.0,
            1.0 - 1e-16,
            f64::MIN_POSITIVE,
            1.7976931348623157e308,
            0.0,
            -0.46464646464646464,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_records() {
        let records = sample_records();
        let text = records_to_jsonl(&records).unwrap();
        assert_eq!(text.lines().count(), records.len());
        let back = records_from_jsonl(&text).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn jsonl_reports_malformed_lines() {
        let text = "{\"iteration\":0,\"theta\":[1.0],\"predictive\":[1.0],\"kl\":0.0,\"log_lik\":0.0}\nnot json\n";
        match records_from_jsonl(text) {
            Err(Error::TraceParse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_accepts_infinite_fields() {
        let text = "{\"iteration\":0,\"theta\":[1.0],\"predictive\":[1.0],\"kl\":\"inf\",\"log_lik\":\"-inf\"}\n";
        let records = records_from_jsonl(text).unwrap();
        assert_eq!(records[0].kl, ExtendedReal::PosInf);
        assert_eq!(records[0].log_lik, ExtendedReal::NegInf);
    }

    #[test]
    fn csv_shape() {
        let records = sample_records();
        let csv = records_to_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "iteration,kl,log_lik,delta_q,delta_h,theta_0,theta_1");
        let first = lines.next().unwrap();
        // iteration 0 has empty delta fields
        assert!(first.starts_with("0,"));
        assert!(first.contains(",,"));
        assert_eq!(csv.lines().count(), records.len() + 1);

        let plot = plot_data_csv(&records);
        assert!(plot.starts_with("iteration,kl,log_lik\n"));
        assert_eq!(plot.lines().count(), records.len() + 1);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
    }

    #[test]
    fn channel_and_dist_loaders() {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("c.json");
        fs::write(&json, r#"{"n":2,"m":2,"rows":[[0.9,0.1],[0.2,0.8]]}"#).unwrap();
        let csv = dir.path().join("c.csv");
        fs::write(&csv, "0.9,0.1\n0.2,0.8\n").unwrap();
        assert_eq!(load_channel(&json).unwrap(), load_channel(&csv).unwrap());

        let dpath = dir.path().join("d.json");
        fs::write(&dpath, "[0.25, 0.75]").unwrap();
        assert_eq!(load_dist(&dpath).unwrap().weights(), &[0.25, 0.75]);

        let spath = dir.path().join("s.txt");
        fs::write(&spath, "0\n1\n1\n0\n").unwrap();
        assert_eq!(load_samples(&spath).unwrap(), vec![0, 1, 1, 0]);
        fs::write(&spath, "0 x 1").unwrap();
        assert!(load_samples(&spath).is_err());
    }
}
