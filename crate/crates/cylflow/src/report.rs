//! Machine-readable outputs: a versioned JSON envelope that embeds the
//! config hash and seed, plus the CSV writers for flow traces and rate
//! sequences. All writers format numbers explicitly so identical inputs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::flow::FlowTrace;
use crate::rates::SequenceRecord;
use crate::Result;

pub const SCHEMA: &str = "report_v1";

/// Envelope wrapped around every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the verbatim config file text.
    pub config_sha256: String,
    pub seed: u64,
    pub payload: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: &str, config_text: &str, seed: u64, payload: T) -> Self {
        ReportEnvelope {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(config_text),
            seed,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Fixed float formatting for CSV cells (round-trippable, deterministic).
fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.17e}")
    }
}

/// Flow trace CSV: t, F, tail_bound, phi_L2, phi_W12, U_L2, dt.
pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut s = String::from("t,F,tail_bound,phi_L2,phi_W12,U_L2,dt\n");
    for r in &trace.samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            cell(r.t),
            cell(r.f),
            cell(r.tail_bound),
            cell(r.phi_l2),
            cell(r.phi_w12),
            cell(r.u_l2),
            cell(r.dt)
        );
    }
    s
}

/// Rate sequence CSV: j, F_j, delta_j, tail_sum, where tail_sum is the
/// remaining sum of window deltas from j on (the triangle-inequality bound
/// on the total remaining motion). delta_j exists for 1 <= j <= len-3.
pub fn rates_csv(rec: &SequenceRecord) -> String {
    let mut s = String::from("j,F_j,delta_j,tail_sum\n");
    let mut tail: Vec<f64> = vec![0.0; rec.delta.len() + 1];
    for i in (0..rec.delta.len()).rev() {
        tail[i] = tail[i + 1] + rec.delta[i];
    }
    for (j, f) in rec.f.iter().enumerate() {
        let (d, t) = if j >= 1 && j - 1 < rec.delta.len() {
            (cell(rec.delta[j - 1]), cell(tail[j - 1]))
        } else {
            ("".to_string(), "".to_string())
        };
        let _ = writeln!(s, "{j},{},{d},{t}", cell(*f));
    }
    s
}
