//! Run records and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RUN_CSV_HEADER: [&str; 5] = ["step", "seed", "learner", "return", "normalized_return"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Environment steps consumed when the evaluation was taken.
    pub step: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub normalized_return: f64,
}

/// Evaluation trace of one seeded learner run on one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub learner: String,
    pub seed: u64,
    pub game_id: usize,
    pub fingerprint: String,
    pub points: Vec<EvalPoint>,
}

impl RunRecord {
    pub fn new(learner: impl Into<String>, seed: u64) -> Self {
        Self {
            learner: learner.into(),
            seed,
            game_id: 0,
            fingerprint: String::new(),
            points: Vec::new(),
        }
    }

    /// Appends an evaluation point; steps must be strictly increasing.
    pub fn push(&mut self, step: u64, ret: f64, normalized_return: f64) {
        if let Some(last) = self.points.last() {
            assert!(step > last.step, "evaluation steps must increase ({} then {step})", last.step);
        }
        self.points.push(EvalPoint {
            step,
            ret,
            normalized_return,
        });
    }

    pub fn last(&self) -> Option<&EvalPoint> {
        self.points.last()
    }

    pub fn steps(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.step).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_CSV_HEADER)?;
        for p in &self.points {
            w.write_record([
                p.step.to_string(),
                self.seed.to_string(),
                self.learner.clone(),
                p.ret.to_string(),
                p.normalized_return.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// One row of a run CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RunCsvRow {
    pub step: u64,
    pub seed: u64,
    pub learner: String,
    #[serde(rename = "return")]
    pub ret: f64,
    pub normalized_return: f64,
}

pub fn read_run_csv<R: Read>(input: R) -> Result<Vec<RunCsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(RUN_CSV_HEADER) {
        return Err(Error::invalid(format!(
            "unexpected run CSV header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Short hash of the canonical JSON form of a config (object keys sorted).
pub fn config_fingerprint<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_values() {
        let mut r = RunRecord::new("bql", 3);
        r.push(100, 1.5, 0.75);
        r.push(200, 1.9, 0.95);
        let text = r.to_csv_string().unwrap();
        assert!(text.starts_with("step,seed,learner,return,normalized_return\n100,3,bql,1.5,0.75\n"));
        let rows = read_run_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].normalized_return, 0.95);
    }

    #[test]
    #[should_panic]
    fn steps_must_increase() {
        let mut r = RunRecord::new("iql", 0);
        r.push(10, 0.0, 0.0);
        r.push(10, 0.0, 0.0);
    }

    #[test]
    fn fingerprint_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[1,2],"a":1}"#).unwrap();
        assert_eq!(config_fingerprint(&a).unwrap(), config_fingerprint(&b).unwrap());
        let c: serde_json::Value = serde_json::from_str(r#"{"a":2,"b":[1,2]}"#).unwrap();
        assert_ne!(config_fingerprint(&a).unwrap(), config_fingerprint(&c).unwrap());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_run_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
