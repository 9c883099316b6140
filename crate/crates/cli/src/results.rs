//! Result rows and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::error::CliError;

/// One trial of one algorithm at one grid point. Fields that do not apply to
/// an algorithm are left empty in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma_noise_sq: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub sin_error: f64,
    /// Clipped gradients for the Oja variants, projected samples for the baseline.
    pub clipped_steps: usize,
    pub skipped_steps: usize,
    pub lambda_hat_mean: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub regime_valid: Option<bool>,
}

/// Writes `rows` with a header line.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        // serde only emits the header together with a record.
        w.write_record(HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(CliError::Runtime(format!(
            "unexpected CSV header {header:?}, expected {HEADER:?}"
        )));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub const HEADER: [&str; 14] = [
    "algorithm",
    "n",
    "d",
    "epsilon",
    "delta",
    "sigma_noise_sq",
    "trial",
    "seed",
    "sin_error",
    "clipped_steps",
    "skipped_steps",
    "lambda_hat_mean",
    "runtime_ms",
    "regime_valid",
];
