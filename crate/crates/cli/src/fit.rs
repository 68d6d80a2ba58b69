//! Least-squares fit `u(ε) ≈ a/ε + b ln ε + c`.

use std::io::Read;

use anyhow::{bail, Context};
use nep_core::linalg::{least_squares, Matrix};
use serde::Serialize;

pub const MIN_DISTINCT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Residual 2-norm.
    pub residual: f64,
}

impl Fit {
    pub fn eval(&self, eps: f64) -> f64 {
        self.a / eps + self.b * eps.ln() + self.c
    }
}

/// Fits `(ε, value)` pairs. Needs at least four distinct positive `ε`.
pub fn fit_series(points: &[(f64, f64)]) -> nep_core::Result<Fit> {
    use nep_core::Error;
    if let Some(&(e, _)) = points.iter().find(|(e, v)| !(*e > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fit needs positive finite eps, got {e}"
        )));
    }
    let mut eps: Vec<f64> = points.iter().map(|p| p.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < MIN_DISTINCT {
        return Err(Error::Singular {
            context: format!(
                "rank-deficient design matrix: {} distinct eps values, need {MIN_DISTINCT}",
                eps.len()
            ),
        });
    }
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|(e, _)| vec![1.0 / e, e.ln(), 1.0])
        .collect();
    let rhs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (coef, residual) = least_squares(&Matrix::from_rows(&rows), &rhs)?;
    Ok(Fit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        residual,
    })
}

/// Reads a CSV with an `eps` column and a `value` (or `u`) column.
pub fn read_series(input: impl Read) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let Some(ie) = find(&["eps", "epsilon"]) else {
        bail!("series CSV needs an `eps` column");
    };
    let Some(iv) = find(&["value", "u"]) else {
        bail!("series CSV needs a `value` column");
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> anyhow::Result<f64> {
            rec.get(i)
                .unwrap_or_default()
                .parse()
                .with_context(|| format!("row {}: bad number", line + 1))
        };
        out.push((parse(ie)?, parse(iv)?));
    }
    Ok(out)
}
