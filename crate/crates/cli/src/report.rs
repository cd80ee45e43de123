//! Report assembly and serialization.
//!
//! The CSV body is the reproducibility contract: a fixed header, floats
//! printed with 17 significant digits, no timing columns. Wall times and
//! command-specific extras live in the JSON report only.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: &str =
    "n,d,R,dk_value,mc_error,mvn_error,bound_t1,bound_t2,bound_t3a,bound_t3b,bound_t4,seed";

/// One per-horizon result row.
#[derive(Debug, Clone, Serialize)]
pub struct NRow {
    pub n: usize,
    pub d: usize,
    pub replications: usize,
    pub dk_value: f64,
    pub mc_error: f64,
    pub mvn_error: f64,
    pub mc_bonferroni: f64,
    pub bound_t1: f64,
    pub bound_t2: f64,
    pub bound_t3a: f64,
    pub bound_t3b: f64,
    pub bound_t4: f64,
    /// Child seed driving this row's replication block.
    pub seed: u64,
    /// Seconds; excluded from the CSV so re-runs are bit-identical.
    pub wall_time: f64,
}

/// `{:.16e}` gives one leading digit plus sixteen decimals: 17
/// significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn rows_to_csv(rows: &[NRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.d,
            r.replications,
            fmt_f64(r.dk_value),
            fmt_f64(r.mc_error),
            fmt_f64(r.mvn_error),
            fmt_f64(r.bound_t1),
            fmt_f64(r.bound_t2),
            fmt_f64(r.bound_t3a),
            fmt_f64(r.bound_t3b),
            fmt_f64(r.bound_t4),
            r.seed,
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub series: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// The self-describing JSON report: config echo, per-n rows, rate fits,
/// and free-form command extras.
#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub software_version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub effective_seed: u64,
    pub rows: Vec<NRow>,
    pub rate_fits: Vec<FitSummary>,
    pub extras: serde_json::Value,
}

impl ExperimentReport {
    pub fn new(command: &str, config: serde_json::Value, effective_seed: u64) -> Self {
        ExperimentReport {
            software_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            effective_seed,
            rows: Vec::new(),
            rate_fits: Vec::new(),
            extras: serde_json::Value::Null,
        }
    }

    pub fn write_to(&self, out_dir: &Path, with_csv: bool) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)?;
        if with_csv {
            std::fs::write(out_dir.join("report.csv"), rows_to_csv(&self.rows))?;
        }
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Run(format!("report serialization: {e}")))?;
        std::fs::write(out_dir.join("report.json"), json)?;
        Ok(())
    }
}
