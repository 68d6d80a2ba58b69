//! The three reference tables and the configurations behind them. All use
//! the unit disk with windows at polar angles 0 and π/2 and start at the
//! centre.

use std::f64::consts::FRAC_PI_2;

use nep_core::asymptotics::{mfpt_two, mfpt_two_disk_symmetric};
use nep_core::montecarlo::{default_dt, simulate};
use nep_core::neumann::NeumannKernel;
use nep_core::robin_bie::solve_robin;
use nep_core::{Point, ProblemSpecF64, Result};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// ε₁ = ε₂ = 0.01, neck lengths vary.
    L,
    /// L₁ = 1, L₂ = 2, window half-widths vary.
    Eps,
    /// Equal necks of length 2, ε from 0.10 down to 0.01.
    Fit,
}

/// One printed row: two parameters, then the composite-domain value, the
/// Robin-model value and the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub p1: f64,
    pub p2: f64,
    pub u_composite: f64,
    pub u_robin: f64,
    pub u: f64,
}

const fn r(p1: f64, p2: f64, u_composite: f64, u_robin: f64, u: f64) -> Reference {
    Reference {
        p1,
        p2,
        u_composite,
        u_robin,
        u,
    }
}

pub const TABLE_L: [Reference; 8] = [
    r(1.0, 1.0, 81.74653, 81.81745, 81.82254),
    r(1.0, 1.5, 97.82933, 97.89082, 97.89568),
    r(1.0, 2.0, 108.76071, 108.81837, 108.82240),
    r(1.0, 2.5, 116.70304, 116.76017, 116.76131),
    r(2.0, 1.5, 138.88679, 138.97472, 138.98117),
    r(2.5, 2.0, 179.75845, 179.84546, 179.85120),
    r(3.0, 2.5, 220.66452, 220.75059, 220.75602),
    r(4.0, 3.0, 278.02288, 278.11915, 278.12086),
];

pub const TABLE_EPS: [Reference; 10] = [
    r(0.028, 0.028, 40.88346, 40.92875, 40.93055),
    r(0.025, 0.025, 45.43363, 45.47934, 45.48150),
    r(0.022, 0.022, 51.21565, 51.26125, 51.26450),
    r(0.019, 0.019, 58.81201, 58.85802, 58.86172),
    r(0.016, 0.016, 69.23454, 69.28743, 69.29138),
    r(0.013, 0.013, 84.45024, 84.50652, 84.51055),
    r(0.010, 0.010, 108.76071, 108.81837, 108.82240),
    r(0.010, 0.050, 48.86885, 48.92416, 48.94176),
    r(0.010, 0.030, 66.67597, 66.72835, 66.73425),
    r(0.010, 0.020, 82.34406, 82.39604, 82.39925),
];

/// `p1 = p2 = ε`. The last `u` is printed with four decimals only.
pub const TABLE_FIT: [Reference; 10] = [
    r(0.10, 0.10, 19.28274, 19.33952, 19.33940),
    r(0.09, 0.09, 21.08308, 21.13738, 21.13740),
    r(0.08, 0.08, 23.32585, 23.37776, 23.37796),
    r(0.07, 0.07, 26.20003, 26.24939, 26.24972),
    r(0.06, 0.06, 30.01901, 30.06624, 30.06678),
    r(0.05, 0.05, 35.34718, 35.38037, 35.39393),
    r(0.04, 0.04, 43.31320, 43.35828, 43.35949),
    r(0.03, 0.03, 56.54429, 56.59165, 56.59330),
    r(0.02, 0.02, 82.91620, 82.97147, 82.97597),
    r(0.01, 0.01, 161.78095, 161.85738, 161.8623),
];

pub const FIT_LENGTH: f64 = 2.0;

impl Which {
    pub fn reference(self) -> &'static [Reference] {
        match self {
            Which::L => &TABLE_L,
            Which::Eps => &TABLE_EPS,
            Which::Fit => &TABLE_FIT,
        }
    }

    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            Which::L => ["L1", "L2"],
            Which::Eps => ["eps1", "eps2"],
            Which::Fit => ["eps", "L"],
        }
    }

    /// The problem for a row with parameters `(p1, p2)`.
    pub fn spec(self, p1: f64, p2: f64) -> ProblemSpecF64 {
        match self {
            Which::L => perpendicular((0.01, p1), (0.01, p2)),
            Which::Eps => perpendicular((p1, 1.0), (p2, 2.0)),
            Which::Fit => perpendicular((p1, FIT_LENGTH), (p1, FIT_LENGTH)),
        }
    }
}

/// Two windows at angles 0 and π/2, each given as `(ε, L)`.
pub fn perpendicular(first: (f64, f64), second: (f64, f64)) -> ProblemSpecF64 {
    ProblemSpecF64::unit_disk(&[(0.0, first.0, first.1), (FRAC_PI_2, second.0, second.1)])
}

/// The configuration used when no problem file is given:
/// ε = 0.01, L₁ = 1, L₂ = 2.
pub fn default_spec() -> ProblemSpecF64 {
    Which::L.spec(1.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub walkers: usize,
    pub dt: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub p1: f64,
    pub p2: f64,
    pub u_asym: f64,
    pub u_bie: f64,
    pub rel_err: f64,
    pub u_ref: f64,
    pub u_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// Expansion value at the centre. The equal-neck table uses the closed form.
pub fn asymptotic(which: Which, p1: f64, p2: f64) -> Result<f64> {
    let origin = Point::origin();
    match which {
        Which::Fit => mfpt_two_disk_symmetric(FIT_LENGTH, p1, 0.0, FRAC_PI_2, origin),
        _ => mfpt_two(&which.spec(p1, p2), &NeumannKernel::exact_disk(), origin),
    }
}

pub fn bie(which: Which, p1: f64, p2: f64, resolution: usize) -> Result<f64> {
    solve_robin(
        &which.spec(p1, p2),
        &NeumannKernel::exact_disk(),
        resolution,
    )?
    .u(Point::origin())
}

/// Recomputes a table. Rows are independent and run in parallel.
pub fn compute(which: Which, resolution: usize, mc: Option<McOptions>) -> Result<Vec<Row>> {
    which
        .reference()
        .par_iter()
        .map(|row| {
            let (p1, p2) = (row.p1, row.p2);
            let u_asym = asymptotic(which, p1, p2)?;
            let u_bie = bie(which, p1, p2, resolution)?;
            let (u_mc, mc_stderr) = match mc {
                Some(o) => {
                    let spec = which.spec(p1, p2);
                    let dt = o.dt.unwrap_or_else(|| default_dt(&spec));
                    let s = simulate(&spec, Point::origin(), dt, o.walkers, o.seed)?;
                    (Some(s.mean), Some(s.stderr))
                }
                None => (None, None),
            };
            Ok(Row {
                p1,
                p2,
                u_asym,
                u_bie,
                rel_err: (u_bie - u_asym).abs() / u_bie,
                u_ref: row.u,
                u_mc,
                mc_stderr,
            })
        })
        .collect()
}
