//! Head domain, neck attachments and problem validation.

mod file;
mod head;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Point, Real};

pub use file::{HeadFile, NeckFile, ProblemFile};
pub use head::{
    point_in_polygon, segments_intersect, BoundaryPoint, CurveSample, HeadDomain, HeadKind,
    MIN_CURVE_SAMPLES,
};

/// Thinness ratio `ε/L` above which a spec is rejected.
pub const THINNESS_LIMIT: f64 = 0.2;
/// Thinness ratio above which a warning is issued.
pub const THINNESS_WARN: f64 = 0.1;
/// Window gap factor: gaps must exceed `SEPARATION_FACTOR · max ε`.
pub const SEPARATION_FACTOR: f64 = 10.0;

/// One neck: window centre (arc length), half-width and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeckSpec<T> {
    pub s: T,
    pub epsilon: T,
    pub length: T,
}

impl<T: Real> NeckSpec<T> {
    pub fn new(s: T, epsilon: T, length: T) -> Self {
        Self { s, epsilon, length }
    }

    /// `ε/L`.
    pub fn thinness(&self) -> T {
        self.epsilon / self.length
    }
}

/// A violated invariant, as reported by [`ProblemSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoNecks,
    NonPositiveEpsilon {
        neck: usize,
        value: f64,
    },
    NonPositiveLength {
        neck: usize,
        value: f64,
    },
    NotFinite {
        neck: usize,
    },
    ThinnessViolated {
        neck: usize,
        ratio: f64,
    },
    WindowTooLarge {
        neck: usize,
        width: f64,
        perimeter: f64,
    },
    WindowsOverlap {
        first: usize,
        second: usize,
        arc_distance: f64,
    },
    NotWellSeparated {
        first: usize,
        second: usize,
        arc_distance: f64,
        required: f64,
    },
    TooFewSamples {
        got: usize,
        need: usize,
    },
    HeadNotClosed {
        gap: f64,
    },
    HeadSelfIntersecting,
    CurvatureNotSmooth {
        max_curvature: f64,
        max_jump: f64,
    },
    MeasureMismatch {
        area_rel: f64,
        perimeter_rel: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoNecks => write!(f, "problem has no necks"),
            NonPositiveEpsilon { neck, value } => write!(f, "neck {neck}: epsilon {value} must be positive"),
            NonPositiveLength { neck, value } => write!(f, "neck {neck}: length {value} must be positive"),
            NotFinite { neck } => write!(f, "neck {neck}: non-finite parameter"),
            ThinnessViolated { neck, ratio } => write!(
                f,
                "neck {neck}: thinness violated, epsilon/length = {ratio:.4} > {THINNESS_LIMIT}"
            ),
            WindowTooLarge { neck, width, perimeter } => write!(
                f,
                "neck {neck}: window width {width:.4} exceeds a quarter of the perimeter {perimeter:.4}"
            ),
            WindowsOverlap { first, second, arc_distance } => write!(
                f,
                "windows overlap: necks {first} and {second} are {arc_distance:.3e} apart along the boundary"
            ),
            NotWellSeparated { first, second, arc_distance, required } => write!(
                f,
                "windows not well separated: necks {first} and {second} are {arc_distance:.4} apart, need {required:.4}"
            ),
            TooFewSamples { got, need } => write!(f, "head curve has {got} samples, need at least {need}"),
            HeadNotClosed { gap } => write!(f, "head curve is not closed (gap {gap:.3e})"),
            HeadSelfIntersecting => write!(f, "head curve self-intersects"),
            CurvatureNotSmooth { max_curvature, max_jump } => write!(
                f,
                "head curvature not smooth (max {max_curvature:.3e}, max jump {max_jump:.3e})"
            ),
            MeasureMismatch { area_rel, perimeter_rel } => write!(
                f,
                "head area/perimeter inconsistent (relative {area_rel:.2e} / {perimeter_rel:.2e})"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Head plus ordered necks.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    pub head: HeadDomain<T>,
    pub necks: Vec<NeckSpec<T>>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(head: HeadDomain<T>, necks: Vec<NeckSpec<T>>) -> Self {
        Self { head, necks }
    }

    /// Unit disk with necks placed at the given polar angles.
    pub fn unit_disk(necks: &[(T, T, T)]) -> Self {
        Self::new(
            HeadDomain::unit_disk(),
            necks
                .iter()
                .map(|&(s, e, l)| NeckSpec::new(s, e, l))
                .collect(),
        )
    }

    pub fn neck_count(&self) -> usize {
        self.necks.len()
    }

    pub fn neck(&self, i: usize) -> Result<&NeckSpec<T>> {
        self.necks.get(i).ok_or(Error::NeckIndex {
            index: i,
            count: self.necks.len(),
        })
    }

    pub fn max_epsilon(&self) -> T {
        self.necks.iter().map(|n| n.epsilon).fold(T::zero(), T::max)
    }

    /// Evaluation guard distance around each window.
    pub fn guard_distance(&self) -> T {
        T::lit(SEPARATION_FACTOR) * self.max_epsilon()
    }

    /// Curve parameter of the point at local coordinate `t ∈ [−1, 1]` on window `i`.
    pub fn window_param(&self, i: usize, t: T) -> Result<T> {
        let n = self.neck(i)?;
        if !(t.abs() <= T::one() + T::epsilon() * T::lit(8.0)) {
            return Err(Error::InvalidArgument(format!(
                "window coordinate t = {t} outside [-1, 1]"
            )));
        }
        Ok(self.head.theta_at_arc(n.s + n.epsilon * t))
    }

    /// Boundary point at arc length `s_i + ε_i t`.
    pub fn window_point(&self, i: usize, t: T) -> Result<Point<T>> {
        Ok(self.head.point(self.window_param(i, t)?))
    }

    pub fn window_center(&self, i: usize) -> Result<Point<T>> {
        self.window_point(i, T::zero())
    }

    /// Outward unit normal at the window centre (the neck axis direction).
    pub fn window_normal(&self, i: usize) -> Result<Point<T>> {
        Ok(self.head.normal(self.window_param(i, T::zero())?))
    }

    /// Euclidean distance between window centres.
    pub fn chord_distance(&self, i: usize, j: usize) -> Result<T> {
        Ok(self.window_center(i)?.dist(self.window_center(j)?))
    }

    /// Distance from `x` to the nearest window centre, with its index.
    pub fn nearest_window(&self, x: Point<T>) -> Option<(usize, T)> {
        (0..self.necks.len())
            .filter_map(|i| self.window_center(i).ok().map(|c| (i, c.dist(x))))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Rejects evaluation points closer to a window centre than the guard
    /// distance. A point exactly at the guard distance is accepted.
    pub fn check_guard(&self, x: Point<T>) -> Result<()> {
        let guard = self.guard_distance();
        if let Some((i, d)) = self.nearest_window(x) {
            if d < guard * (T::one() - T::lit(1e-12)) {
                return Err(Error::TooCloseToWindow {
                    window: i,
                    distance: d.as_f64(),
                    guard: guard.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Same configuration with every window shifted by `ds` along the boundary.
    pub fn shifted(&self, ds: T) -> Self {
        let mut out = self.clone();
        for n in &mut out.necks {
            n.s += ds;
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            violations: self.head.issues().to_vec(),
            warnings: Vec::new(),
        };
        if self.necks.is_empty() {
            report.violations.push(Violation::NoNecks);
        }
        let per = self.head.perimeter();
        let mut usable = true;
        for (i, n) in self.necks.iter().enumerate() {
            if !(n.s.is_finite() && n.epsilon.is_finite() && n.length.is_finite()) {
                report.violations.push(Violation::NotFinite { neck: i });
                usable = false;
                continue;
            }
            if n.epsilon <= T::zero() {
                report.violations.push(Violation::NonPositiveEpsilon {
                    neck: i,
                    value: n.epsilon.as_f64(),
                });
                usable = false;
            }
            if n.length <= T::zero() {
                report.violations.push(Violation::NonPositiveLength {
                    neck: i,
                    value: n.length.as_f64(),
                });
                usable = false;
            }
            if n.epsilon <= T::zero() || n.length <= T::zero() {
                continue;
            }
            let ratio = n.thinness().as_f64();
            if ratio > THINNESS_LIMIT {
                report
                    .violations
                    .push(Violation::ThinnessViolated { neck: i, ratio });
            } else if ratio > THINNESS_WARN {
                report.warnings.push(format!(
                    "neck {i}: epsilon/length = {ratio:.4} exceeds {THINNESS_WARN}; expansion accuracy degrades"
                ));
            }
            let width = (n.epsilon + n.epsilon).as_f64();
            if width > 0.25 * per.as_f64() {
                report.violations.push(Violation::WindowTooLarge {
                    neck: i,
                    width,
                    perimeter: per.as_f64(),
                });
            }
        }
        if usable {
            let sep = self.guard_distance();
            for i in 0..self.necks.len() {
                for j in i + 1..self.necks.len() {
                    let (a, b) = (&self.necks[i], &self.necks[j]);
                    let d = self.head.arc_distance(a.s, b.s);
                    let touch = a.epsilon + b.epsilon;
                    if d < touch {
                        report.violations.push(Violation::WindowsOverlap {
                            first: i,
                            second: j,
                            arc_distance: d.as_f64(),
                        });
                    } else if d < touch + sep {
                        report.violations.push(Violation::NotWellSeparated {
                            first: i,
                            second: j,
                            arc_distance: d.as_f64(),
                            required: (touch + sep).as_f64(),
                        });
                    }
                }
            }
        }
        report
    }

    /// `Ok` when [`validate`](Self::validate) passes, otherwise the report as an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        for w in &report.warnings {
            log::warn!("{w}");
        }
        if report.passed() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(report))
        }
    }

    /// Lossy conversion to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<ProblemSpec<U>> {
        ProblemFile::from_spec(self).to_spec()
    }
}
