//! Asymptotic MFPT for a head with `N` thin necks.
//!
//! Each neck reduces to a Robin condition `∂u/∂ν + u/L = L/2` on its window.
//! Integrating the Green representation over the windows gives an
//! `(N+1)×(N+1)` system for the window fluxes `C_i` and the boundary average
//! `C_ε`; expanding its solution in `ε` gives the closed forms below.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, ProblemSpec};
use crate::linalg::{Lu, Matrix};
use crate::neumann::{KernelMode, NeumannKernel, SourceField};
use crate::quadrature::log_op_l1;
use crate::scalar::{Point, Real};

/// `(2 ln 2 − 3)`, recurring in every window self-interaction.
pub fn two_ln2_minus_3<T: Real>() -> T {
    T::lit(2.0) * T::LN_2() - T::lit(3.0)
}

/// Robin coefficients `(α, β) = (1/L, L/2)` of a neck of length `L`.
pub fn robin_coefficients<T: Real>(length: T) -> Result<(T, T)> {
    if !(length > T::zero()) || !length.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "neck length must be positive, got {length}"
        )));
    }
    Ok((T::one() / length, length * T::lit(0.5)))
}

/// MFPT inside a neck of length `L` at distance `x` from its window, when
/// the window value is `c`: `−½(L − x)² + (c/L + L/2)(L − x)`. Equals `c` at
/// the window and vanishes at the absorbing end.
pub fn neck_profile<T: Real>(length: T, c: T, x: T) -> T {
    let xi = length - x;
    -T::lit(0.5) * xi * xi + (c / length + length * T::lit(0.5)) * xi
}

/// Remainder order attached to an expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorOrder {
    /// Two necks: `O(√(ε₁² + ε₂²) ln ε₁ ln ε₂)`.
    TwoNeck,
    /// Identical necks: `O(ε ln² ε)`.
    IdenticalNecks,
    /// Heterogeneous necks, `N > 2`: only leading and logarithmic terms.
    Constant,
}

impl fmt::Display for ErrorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorOrder::TwoNeck => "O(sqrt(eps1^2+eps2^2) ln(eps1) ln(eps2))",
            ErrorOrder::IdenticalNecks => "O(eps ln^2(eps))",
            ErrorOrder::Constant => "O(1)",
        })
    }
}

/// `T_ij` and `F_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryFactors<T> {
    /// Symmetric; the diagonal holds `(ε_i/L_i)²/σ²` for completeness.
    pub t: Vec<Vec<T>>,
    pub f: Vec<T>,
}

impl<T: Real> GeometryFactors<T> {
    pub fn pair(&self, i: usize, j: usize) -> T {
        self.t[i][j]
    }
}

pub fn geometry_factors<T: Real>(spec: &ProblemSpec<T>) -> GeometryFactors<T> {
    let ratios: Vec<T> = spec.necks.iter().map(|n| n.epsilon / n.length).collect();
    let sigma: T = ratios.iter().copied().sum();
    let f = ratios.iter().map(|&r| r / sigma).collect();
    let t = ratios
        .iter()
        .map(|&a| ratios.iter().map(|&b| a * b / (sigma * sigma)).collect())
        .collect();
    GeometryFactors { t, f }
}

/// Two-neck `T` in the closed form `ε₁ε₂ / ((L₂/L₁)ε₁² + 2ε₁ε₂ + (L₁/L₂)ε₂²)`.
pub fn two_neck_t<T: Real>(eps1: T, eps2: T, len1: T, len2: T) -> T {
    eps1 * eps2
        / (len2 / len1 * eps1 * eps1 + T::lit(2.0) * eps1 * eps2 + len1 / len2 * eps2 * eps2)
}

fn ensure_kernel_matches<T: Real>(spec: &ProblemSpec<T>, kernel: &NeumannKernel<T>) -> Result<()> {
    let same = match kernel.mode() {
        KernelMode::ExactDisk => spec.head.is_unit_disk(),
        KernelMode::Numerical => {
            let (a, b) = (spec.head.area(), kernel.head().area());
            let (p, q) = (spec.head.perimeter(), kernel.head().perimeter());
            (a - b).abs() <= T::lit(1e-9) * a && (p - q).abs() <= T::lit(1e-9) * p
        }
    };
    if same {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "Neumann kernel was built on a different head than the problem".into(),
        ))
    }
}

/// Window data shared by the evaluators: centres, `r_ij` and `f_i = g(s_i)`.
struct WindowData<T> {
    params: Vec<T>,
    centers: Vec<Point<T>>,
    r: Matrix<T>,
    f: Vec<T>,
}

impl<T: Real> WindowData<T> {
    fn new(spec: &ProblemSpec<T>, kernel: &NeumannKernel<T>) -> Result<Self> {
        spec.ensure_valid()?;
        ensure_kernel_matches(spec, kernel)?;
        let params = (0..spec.neck_count())
            .map(|i| spec.window_param(i, T::zero()))
            .collect::<Result<Vec<_>>>()?;
        let centers = params.iter().map(|&t| spec.head.point(t)).collect();
        let r = kernel.regular_part_matrix(&params, &params)?;
        let f = params.iter().map(|&t| kernel.g_on_boundary(t)).collect();
        Ok(Self {
            params,
            centers,
            r,
            f,
        })
    }

    fn chord(&self, i: usize, j: usize) -> T {
        self.centers[i].dist(self.centers[j])
    }
}

/// The interaction matrix `K` and right-hand side.
pub fn assemble_system<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
) -> Result<(Matrix<T>, Vec<T>)> {
    let w = WindowData::new(spec, kernel)?;
    Ok(assemble_from(spec, &w))
}

fn assemble_from<T: Real>(spec: &ProblemSpec<T>, w: &WindowData<T>) -> (Matrix<T>, Vec<T>) {
    let n = spec.neck_count();
    let pi = T::PI();
    let mut k = Matrix::zeros(n + 1, n + 1);
    let mut rhs = vec![T::zero(); n + 1];
    for i in 0..n {
        let ni = &spec.necks[i];
        for j in 0..n {
            let v = if i == j {
                ni.length / (T::lit(2.0) * ni.epsilon)
                    - ni.epsilon.ln() / pi
                    - two_ln2_minus_3::<T>() / (T::lit(2.0) * pi)
                    + w.r.get(i, i)
            } else {
                -w.chord(i, j).ln() / pi + w.r.get(i, j)
            };
            k.set(i, j, v);
        }
        k.set(i, n, T::one());
        k.set(n, i, T::one());
        rhs[i] = ni.length * ni.length * T::lit(0.5) - w.f[i];
    }
    rhs[n] = -spec.head.area();
    (k, rhs)
}

/// Solves `K [C; C_ε] = rhs`, returning `(C_1..C_N, C_ε)`.
pub fn solve_constants<T: Real>(k: &Matrix<T>, rhs: &[T]) -> Result<(Vec<T>, T)> {
    if k.rows() != rhs.len() || k.rows() < 2 {
        return Err(Error::Dimension(format!(
            "interaction system is {}x{} with {} right-hand entries",
            k.rows(),
            k.cols(),
            rhs.len()
        )));
    }
    let mut x = Lu::factor(k.clone())?.solve(rhs);
    let c_eps = x.pop().expect("nonempty solution");
    Ok((x, c_eps))
}

fn constant_from<T: Real>(spec: &ProblemSpec<T>, w: &WindowData<T>, fac: &GeometryFactors<T>) -> T {
    let pi = T::PI();
    let area = spec.head.area();
    let t = fac.pair(0, 1);
    let r = &w.r;
    let mixed = r.get(0, 0) + r.get(1, 1) - T::lit(2.0) * r.get(0, 1)
        + (T::lit(2.0) * w.chord(0, 1).ln() - two_ln2_minus_3::<T>()) / pi;
    let mut c = -mixed * t * area;
    for i in 0..2 {
        let n = &spec.necks[i];
        c += area * fac.f[i] * (-two_ln2_minus_3::<T>() / (T::lit(2.0) * pi) + r.get(i, i));
        c += fac.f[i] * (n.length * n.length * T::lit(0.5) - w.f[i]);
    }
    c
}

fn require_two<T: Real>(spec: &ProblemSpec<T>, what: &'static str) -> Result<()> {
    if spec.neck_count() == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported {
            method: what,
            requirement: format!("exactly two necks (problem has {})", spec.neck_count()),
        })
    }
}

/// The `O(1)` constant `C` of the two-neck expansion.
pub fn constant_c<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
    factors: &GeometryFactors<T>,
) -> Result<T> {
    require_two(spec, "constant_c")?;
    let w = WindowData::new(spec, kernel)?;
    Ok(constant_from(spec, &w, factors))
}

/// `Q(x) = g(x) − |Ω| Σ F_i N_∂Ω(x, s_i)` with prepared sources.
struct QField<T> {
    weights: Vec<T>,
    field: SourceField<T>,
}

impl<T: Real> QField<T> {
    fn new(kernel: &NeumannKernel<T>, w: &WindowData<T>, weights: Vec<T>) -> Result<Self> {
        let sources: Vec<(BoundaryPoint<T>, T)> = w
            .params
            .iter()
            .zip(&weights)
            .map(|(&t, &wi)| (BoundaryPoint::new(t), wi))
            .collect();
        Ok(Self {
            field: kernel.source_field(&sources)?,
            weights,
        })
    }

    /// `Σ_i w_i N_∂Ω(x, s_i)`.
    fn neumann_sum(&self, kernel: &NeumannKernel<T>, w: &WindowData<T>, x: Point<T>) -> T {
        let logs: T = w
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, &wi)| -wi * x.dist(*c).ln() / T::PI())
            .sum();
        logs + kernel.eval_field(&self.field, x)
    }
}

/// `Q(x)` for two necks, weights `ε₁L₂/(ε₂L₁ + ε₁L₂)` and `ε₂L₁/(ε₂L₁ + ε₁L₂)`.
pub fn q_term<T: Real>(spec: &ProblemSpec<T>, kernel: &NeumannKernel<T>, x: Point<T>) -> Result<T> {
    require_two(spec, "q_term")?;
    spec.check_guard(x)?;
    let w = WindowData::new(spec, kernel)?;
    let fac = geometry_factors(spec);
    let q = QField::new(kernel, &w, fac.f.clone())?;
    Ok(kernel.g_function(x) - spec.head.area() * q.neumann_sum(kernel, &w, x))
}

/// Two-neck expansion `|Ω|/(2σ) + (|Ω|/π)Σ(T − F_i) ln ε_i + C + Q(x)`.
pub fn mfpt_two<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
    x: Point<T>,
) -> Result<T> {
    require_two(spec, "mfpt_two")?;
    AsymptoticSolution::new(spec, kernel)?.u(x)
}

/// Closed form on the unit disk for two identical necks at polar angles `s1`, `s2`.
pub fn mfpt_two_disk_symmetric<T: Real>(length: T, eps: T, s1: T, s2: T, x: Point<T>) -> Result<T> {
    let spec = ProblemSpec::unit_disk(&[(s1, eps, length), (s2, eps, length)]);
    spec.ensure_valid()?;
    if x.norm() >= T::one() {
        return Err(Error::InvalidArgument(format!(
            "point {x} is outside the unit disk"
        )));
    }
    spec.check_guard(x)?;
    let pi = T::PI();
    let area = pi;
    let (p1, p2) = (
        Point::from_polar(T::one(), s1),
        Point::from_polar(T::one(), s2),
    );
    let two = T::lit(2.0);
    let n_sum = -(x.dist(p1).ln() + x.dist(p2).ln()) / pi;
    Ok(area * length / (T::lit(4.0) * eps)
        - area * eps.ln() / (two * pi)
        - area * two_ln2_minus_3::<T>() / (T::lit(4.0) * pi)
        + length * length / two
        - area * p1.dist(p2).ln() / (two * pi)
        + T::lit(0.25) * (T::one() - x.norm_sq())
        - area / two * n_sum)
}

/// An MFPT value with the order of the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MfptEstimate<T> {
    pub value: T,
    pub error_order: ErrorOrder,
}

/// `N`-neck expansion. Identical necks get every `O(1)` term; two
/// heterogeneous necks use the two-neck expansion; otherwise only leading
/// and logarithmic terms are returned.
pub fn mfpt_n<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
    x: Point<T>,
) -> Result<MfptEstimate<T>> {
    let sol = AsymptoticSolution::new(spec, kernel)?;
    Ok(MfptEstimate {
        value: sol.u(x)?,
        error_order: sol.error_order,
    })
}

fn identical_necks<T: Real>(spec: &ProblemSpec<T>) -> bool {
    let first = spec.necks[0];
    let tol = T::lit(1e-12);
    spec.necks.iter().all(|n| {
        (n.epsilon - first.epsilon).abs() <= tol * first.epsilon
            && (n.length - first.length).abs() <= tol * first.length
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    Identical,
    TwoNeck,
    Leading,
}

/// Flux constants, factors and the evaluator for `u(x)`.
pub struct AsymptoticSolution<T> {
    spec: ProblemSpec<T>,
    kernel: NeumannKernel<T>,
    window: WindowData<T>,
    q: QField<T>,
    path: Path,
    /// Window fluxes `C_i` from the interaction system.
    pub c: Vec<T>,
    /// Boundary average `C_ε` from the interaction system.
    pub c_eps: T,
    /// The two-neck constant `C`; `None` for other neck counts.
    pub c_const: Option<T>,
    pub factors: GeometryFactors<T>,
    pub error_order: ErrorOrder,
    /// `u(x) − Q(x)`: every term that does not depend on `x`.
    offset: T,
}

impl<T: Real> fmt::Debug for AsymptoticSolution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsymptoticSolution")
            .field("c", &self.c)
            .field("c_eps", &self.c_eps)
            .field("c_const", &self.c_const)
            .field("factors", &self.factors)
            .field("error_order", &self.error_order)
            .finish()
    }
}

impl<T: Real> AsymptoticSolution<T> {
    pub fn new(spec: &ProblemSpec<T>, kernel: &NeumannKernel<T>) -> Result<Self> {
        let w = WindowData::new(spec, kernel)?;
        let (k, rhs) = assemble_from(spec, &w);
        let (c, c_eps) = solve_constants(&k, &rhs)?;
        let factors = geometry_factors(spec);
        let n = spec.neck_count();
        let area = spec.head.area();
        let pi = T::PI();
        let nf = T::from_usize_lossy(n);
        let path = if identical_necks(spec) {
            Path::Identical
        } else if n == 2 {
            Path::TwoNeck
        } else {
            Path::Leading
        };
        let sigma: T = spec.necks.iter().map(|nk| nk.epsilon / nk.length).sum();
        let c_const = (n == 2).then(|| constant_from(spec, &w, &factors));
        let offset = match path {
            Path::Identical => {
                let (eps, len) = (spec.necks[0].epsilon, spec.necks[0].length);
                let mut v = area * len / (T::lit(2.0) * nf * eps)
                    - area * eps.ln() / (pi * nf)
                    - area * two_ln2_minus_3::<T>() / (T::lit(2.0) * pi * nf)
                    + len * len * T::lit(0.5);
                let mut pair_log = T::zero();
                let mut pair_r = T::zero();
                for i in 0..n {
                    for j in i + 1..n {
                        pair_log += w.chord(i, j).ln();
                        pair_r += w.r.get(i, j);
                    }
                }
                let diag_r: T = (0..n).map(|i| w.r.get(i, i)).sum();
                let f_mean: T = w.f.iter().copied().sum::<T>() / nf;
                v += -T::lit(2.0) * area * pair_log / (pi * nf * nf) - f_mean
                    + area * diag_r / (nf * nf)
                    + T::lit(2.0) * area * pair_r / (nf * nf);
                v
            }
            Path::TwoNeck => {
                let t = factors.pair(0, 1);
                let logs = (0..2)
                    .map(|i| (t - factors.f[i]) * spec.necks[i].epsilon.ln())
                    .sum::<T>();
                area / (T::lit(2.0) * sigma) + area / pi * logs + c_const.expect("two necks")
            }
            Path::Leading => {
                let mut logs = T::zero();
                for i in 0..n {
                    for j in i + 1..n {
                        logs += factors.pair(i, j)
                            * (spec.necks[i].epsilon * spec.necks[j].epsilon).ln();
                    }
                    logs -= factors.f[i] * spec.necks[i].epsilon.ln();
                }
                area / (T::lit(2.0) * sigma) + area / pi * logs
            }
        };
        let error_order = match path {
            Path::Identical if n == 2 => ErrorOrder::TwoNeck,
            Path::Identical => ErrorOrder::IdenticalNecks,
            Path::TwoNeck => ErrorOrder::TwoNeck,
            Path::Leading => ErrorOrder::Constant,
        };
        let q = QField::new(kernel, &w, factors.f.clone())?;
        Ok(Self {
            spec: spec.clone(),
            kernel: kernel.clone(),
            window: w,
            q,
            path,
            c,
            c_eps,
            c_const,
            factors,
            error_order,
            offset,
        })
    }

    pub fn spec(&self) -> &ProblemSpec<T> {
        &self.spec
    }

    /// `Q(x)`; on the leading-order path this is dropped with the `O(1)` terms.
    pub fn q(&self, x: Point<T>) -> Result<T> {
        self.spec.check_guard(x)?;
        Ok(self.kernel.g_function(x)
            - self.spec.head.area() * self.q.neumann_sum(&self.kernel, &self.window, x))
    }

    /// Asymptotic `u(x)` for `x` in the head, away from the windows.
    pub fn u(&self, x: Point<T>) -> Result<T> {
        if !self.spec.head.contains(x) {
            return Err(Error::InvalidArgument(format!(
                "point {x} is outside the head domain"
            )));
        }
        match self.path {
            Path::Leading => {
                self.spec.check_guard(x)?;
                Ok(self.offset)
            }
            _ => Ok(self.offset + self.q(x)?),
        }
    }

    /// Flux density `φ_i(t)` at local window coordinate `t ∈ (−1, 1)`.
    pub fn flux_density(&self, i: usize, t: T) -> Result<T> {
        flux_density(self, i, t)
    }

    pub fn record(&self, points: &[Point<T>]) -> Result<AsymptoticRecord> {
        let u_at = points
            .iter()
            .map(|&p| {
                Ok(PointValue {
                    x: p.x.as_f64(),
                    y: p.y.as_f64(),
                    u: self.u(p)?.as_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AsymptoticRecord {
            c: self.c.iter().map(|v| v.as_f64()).collect(),
            c_eps: self.c_eps.as_f64(),
            t: self
                .factors
                .t
                .iter()
                .map(|row| row.iter().map(|v| v.as_f64()).collect())
                .collect(),
            f: self.factors.f.iter().map(|v| v.as_f64()).collect(),
            c_const: self.c_const.map(|v| v.as_f64()),
            error_order: self.error_order.to_string(),
            u_at,
        })
    }
}

/// `φ_i(t) = C_i/(2ε_i) · flux_profile(ε_i, L_i, t)`.
pub fn flux_density<T: Real>(solution: &AsymptoticSolution<T>, i: usize, t: T) -> Result<T> {
    let n = solution.spec.neck(i)?;
    if !(t.abs() < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "flux density needs |t| < 1, got {t}"
        )));
    }
    let ci = solution.c[i];
    Ok(ci / (T::lit(2.0) * n.epsilon) * flux_profile(n.epsilon, n.length, t))
}

/// Window flux shape normalised to unit mean at leading order:
/// `1 + (ε/(πL)) (L[1](t) − (2ln2 − 3))`.
pub fn flux_profile<T: Real>(eps: T, length: T, t: T) -> T {
    T::one() + eps / (T::PI() * length) * (log_op_l1(t) - two_ln2_minus_3::<T>())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointValue {
    pub x: f64,
    pub y: f64,
    pub u: f64,
}

/// Serialisable summary of an [`AsymptoticSolution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRecord {
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "C_eps")]
    pub c_eps: f64,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "Cconst")]
    pub c_const: Option<f64>,
    pub error_order: String,
    pub u_at: Vec<PointValue>,
}
