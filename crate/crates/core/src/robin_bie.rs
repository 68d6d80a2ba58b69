//! Boundary integral solve of the Neumann–Robin model.
//!
//! On each window the Green representation
//! `u(x) = g(x) + Σ_j ∫_{Γ_j} N_∂Ω(x, y) φ_j(y) dσ(y) + C_ε`
//! is collocated together with the Robin data `u = L_i²/2 − L_i φ_i`, where
//! `φ = ∂u/∂ν`. The unknowns are `φ_i` at Gauss–Legendre nodes of graded
//! panels on every window plus `C_ε`; the compatibility condition
//! `Σ ∫ φ_i = −|Ω|` closes the system.
//!
//! The density has `(1 ∓ t) ln(1 ∓ t)` behaviour where the Robin condition
//! meets the reflecting wall, hence panels halving towards both window ends.
//! Same-window logarithms are integrated in product form against the panel
//! interpolant; everything else is smooth and gets plain Gauss–Legendre.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::mfpt_n;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, ProblemSpec};
use crate::linalg::{Lu, Matrix};
use crate::neumann::{KernelMode, NeumannKernel, SourceField};
use crate::quadrature::GaussLegendre;
use crate::scalar::{Point, Real};

/// Nodes per window used when the caller has no preference.
pub const DEFAULT_RESOLUTION: usize = 128;
pub const MIN_RESOLUTION: usize = 16;
/// Gauss–Legendre order of every panel.
pub const PANEL_ORDER: usize = 8;
pub const CONDITION_LIMIT: f64 = 1e12;
/// Off-node check points per window for the stored residual.
const RESIDUAL_CHECKS: usize = 64;
/// Plain quadrature is trusted once the target is this many panel lengths away.
const NEAR_RATIO: f64 = 2.0;
const MAX_SPLIT_DEPTH: usize = 48;

/// Panel breakpoints in `t ∈ [−1, 1]`, halving towards both ends.
fn graded_breaks<T: Real>(panels_per_half: usize) -> Vec<T> {
    let mut half = vec![T::zero()];
    let mut gap = T::one();
    for _ in 1..panels_per_half {
        gap *= T::lit(0.5);
        half.push(T::one() - gap);
    }
    half.push(T::one());
    let mut out: Vec<T> = half.iter().rev().map(|&v| -v).collect();
    out.extend(half.into_iter().skip(1));
    out
}

/// Flux density on one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowDensity<T> {
    pub epsilon: T,
    /// Panel breakpoints in local coordinates.
    pub breaks: Vec<T>,
    /// Collocation nodes `t_k`, panel by panel.
    pub nodes: Vec<T>,
    /// Quadrature weights in `t`; multiply by `ε` for arc length.
    pub weights: Vec<T>,
    pub phi: Vec<T>,
}

impl<T: Real> WindowDensity<T> {
    fn new(epsilon: T, breaks: Vec<T>, gl: &GaussLegendre<T>) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in breaks.windows(2) {
            let (c, h) = ((p[0] + p[1]) * T::lit(0.5), (p[1] - p[0]) * T::lit(0.5));
            for (&s, &w) in gl.nodes.iter().zip(&gl.weights) {
                nodes.push(c + h * s);
                weights.push(h * w);
            }
        }
        let phi = vec![T::zero(); nodes.len()];
        Self {
            epsilon,
            breaks,
            nodes,
            weights,
            phi,
        }
    }

    pub fn panel_count(&self) -> usize {
        self.breaks.len() - 1
    }

    /// `∫_Γ φ dσ`.
    pub fn flux(&self) -> T {
        self.epsilon
            * self
                .weights
                .iter()
                .zip(&self.phi)
                .map(|(&w, &p)| w * p)
                .sum::<T>()
    }

    fn panel_phi(&self, p: usize) -> &[T] {
        let q = self.nodes.len() / self.panel_count();
        &self.phi[p * q..(p + 1) * q]
    }

    /// Interpolated `φ(t)` for `t ∈ [−1, 1]`.
    pub fn value_at(&self, gl: &GaussLegendre<T>, t: T) -> T {
        let p = self.breaks[1..self.breaks.len() - 1]
            .partition_point(|&b| b <= t)
            .min(self.panel_count() - 1);
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let u = (t - (a + b) * T::lit(0.5)) / ((b - a) * T::lit(0.5));
        gl.interpolate(self.panel_phi(p), u)
    }
}

/// Discrete flux on every window plus the boundary average `C_ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryDensity<T> {
    pub windows: Vec<WindowDensity<T>>,
    #[serde(rename = "C_eps")]
    pub c_eps: T,
}

impl<T: Real> BoundaryDensity<T> {
    /// `Σ_i ∫ φ_i dσ`; equals `−|Ω|` for a solved system.
    pub fn total_flux(&self) -> T {
        self.windows.iter().map(|w| w.flux()).sum()
    }

    pub fn unknowns(&self) -> usize {
        self.windows.iter().map(|w| w.nodes.len()).sum::<usize>() + 1
    }

    /// Same discretisation with `φ ≡ 0` and `C_ε = 0`.
    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.windows {
            w.phi.iter_mut().for_each(|v| *v = T::zero());
        }
        out.c_eps = T::zero();
        out
    }

    /// CSV rows `window_index,t,phi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "window_index,t,phi")?;
        for (i, w) in self.windows.iter().enumerate() {
            for (t, p) in w.nodes.iter().zip(&w.phi) {
                writeln!(out, "{},{:.17e},{:.17e}", i, t.as_f64(), p.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Discretisation shared by assembly and evaluation.
#[derive(Debug, Clone)]
struct Layout<T> {
    gl: GaussLegendre<T>,
    /// Curve parameters of the nodes, per window.
    thetas: Vec<Vec<T>>,
}

impl<T: Real> Layout<T> {
    fn new(spec: &ProblemSpec<T>, density: &BoundaryDensity<T>) -> Result<Self> {
        let thetas = density
            .windows
            .iter()
            .enumerate()
            .map(|(i, w)| w.nodes.iter().map(|&t| spec.window_param(i, t)).collect())
            .collect::<Result<Vec<Vec<T>>>>()?;
        Ok(Self {
            gl: GaussLegendre::new(PANEL_ORDER),
            thetas,
        })
    }
}

/// `ln(|x(t) − x(s)| / (ε|t − s|))` on one window; zero on the diagonal
/// because the window coordinate is scaled arc length.
fn smooth_log<T: Real>(spec: &ProblemSpec<T>, eps: T, th_t: T, th_s: T, t: T, s: T) -> T {
    let d = (t - s).abs();
    if d <= T::epsilon() * T::lit(16.0) {
        return T::zero();
    }
    (spec.head.chord(th_t, th_s).norm() / (eps * d)).ln()
}

/// Log-kernel weights for a boundary target on window `i` at local `t`
/// (curve parameter `th`), laid out like the unknowns. Returns the weights of
/// `∫ −(1/π) ln|x − y| φ dσ`.
fn log_row<T: Real>(
    spec: &ProblemSpec<T>,
    density: &BoundaryDensity<T>,
    layout: &Layout<T>,
    i: usize,
    t: T,
    th: T,
) -> Vec<T> {
    let pi = T::PI();
    let x = spec.head.point(th);
    let q = layout.gl.len();
    let mut row = Vec::with_capacity(density.unknowns() - 1);
    for (j, w) in density.windows.iter().enumerate() {
        let eps = w.epsilon;
        if j != i {
            for (k, &thk) in layout.thetas[j].iter().enumerate() {
                let y = spec.head.point(thk);
                row.push(-eps * w.weights[k] * x.dist(y).ln() / pi);
            }
            continue;
        }
        for p in 0..w.panel_count() {
            let (a, b) = (w.breaks[p], w.breaks[p + 1]);
            let (c, h) = ((a + b) * T::lit(0.5), (b - a) * T::lit(0.5));
            let lw = layout.gl.log_weights((t - c) / h);
            let lnh = h.ln();
            for m in 0..q {
                let k = p * q + m;
                let s = w.nodes[k];
                let smooth = eps.ln() + smooth_log(spec, eps, th, layout.thetas[j][k], t, s);
                let wk = w.weights[k];
                let log_int = wk * (smooth + lnh) + h * lw[m];
                row.push(-eps * log_int / pi);
            }
        }
    }
    row
}

fn validate_resolution(resolution: usize) -> Result<usize> {
    if resolution < MIN_RESOLUTION || !resolution.is_multiple_of(2 * PANEL_ORDER) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be a multiple of {} and at least {MIN_RESOLUTION}, got {resolution}",
            2 * PANEL_ORDER
        )));
    }
    Ok(resolution / (2 * PANEL_ORDER))
}

/// Solved Robin problem with an evaluator for `u_r`.
#[derive(Debug, Clone)]
pub struct RobinSolution<T> {
    spec: ProblemSpec<T>,
    kernel: NeumannKernel<T>,
    layout: Layout<T>,
    density: BoundaryDensity<T>,
    /// `Σ w_k R(·, y_k)` for the solved density.
    field: SourceField<T>,
    resolution: usize,
    /// 1-norm condition estimate of the collocation matrix.
    pub condition: T,
    /// Max Robin residual at off-node window points.
    pub residual: T,
}

/// Solves the Robin model with `resolution` nodes per window (a multiple of
/// 16, at least 16).
pub fn solve_robin<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
    resolution: usize,
) -> Result<RobinSolution<T>> {
    spec.ensure_valid()?;
    if kernel.mode() == KernelMode::ExactDisk && !spec.head.is_unit_disk() {
        return Err(Error::InvalidArgument(
            "the exact disk kernel only applies to unit-disk heads".into(),
        ));
    }
    let per_half = validate_resolution(resolution)?;
    let gl = GaussLegendre::new(PANEL_ORDER);
    let breaks = graded_breaks::<T>(per_half);
    let mut density = BoundaryDensity {
        windows: spec
            .necks
            .iter()
            .map(|n| WindowDensity::new(n.epsilon, breaks.clone(), &gl))
            .collect(),
        c_eps: T::zero(),
    };
    let layout = Layout::new(spec, &density)?;
    let n_phi = density.unknowns() - 1;

    // (window, local t, curve parameter) for every collocation node
    let targets: Vec<(usize, T, T)> = density
        .windows
        .iter()
        .enumerate()
        .flat_map(|(i, w)| {
            let th = &layout.thetas[i];
            w.nodes.iter().zip(th).map(move |(&t, &h)| (i, t, h))
        })
        .collect();
    let all_thetas: Vec<T> = layout.thetas.iter().flatten().copied().collect();
    let sigma_weights: Vec<T> = density
        .windows
        .iter()
        .flat_map(|w| w.weights.iter().map(move |&v| v * w.epsilon))
        .collect();
    let r = kernel.regular_part_matrix(&all_thetas, &all_thetas)?;

    let rows: Vec<Vec<T>> = targets
        .par_iter()
        .enumerate()
        .map(|(a, &(i, t, th))| {
            let mut row = log_row(spec, &density, &layout, i, t, th);
            for (b, v) in row.iter_mut().enumerate() {
                *v += sigma_weights[b] * r.get(a, b);
            }
            row[a] += spec.necks[i].length;
            row.push(T::one());
            row
        })
        .collect();
    let mut k = Matrix::zeros(n_phi + 1, n_phi + 1);
    let mut rhs = vec![T::zero(); n_phi + 1];
    for (a, row) in rows.into_iter().enumerate() {
        k.row_mut(a).copy_from_slice(&row);
        let (i, _, th) = targets[a];
        let len = spec.necks[i].length;
        rhs[a] = len * len * T::lit(0.5) - kernel.g_on_boundary(th);
    }
    for (b, &w) in sigma_weights.iter().enumerate() {
        k.set(n_phi, b, w);
    }
    rhs[n_phi] = -spec.head.area();

    let lu = Lu::factor(k)?;
    let condition = lu.condition_estimate();
    if !(condition.as_f64() <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition: condition.as_f64(),
            limit: CONDITION_LIMIT,
        });
    }
    let x = lu.solve(&rhs);
    let mut offset = 0;
    for w in &mut density.windows {
        let n = w.phi.len();
        w.phi.copy_from_slice(&x[offset..offset + n]);
        offset += n;
    }
    density.c_eps = x[n_phi];
    log::debug!(
        "robin solve: {} unknowns, condition {:.3e}",
        n_phi + 1,
        condition.as_f64()
    );

    let mut sol = RobinSolution {
        spec: spec.clone(),
        kernel: kernel.clone(),
        layout,
        field: kernel.source_field(&[])?,
        density,
        resolution,
        condition,
        residual: T::zero(),
    };
    sol.refresh()?;
    Ok(sol)
}

impl<T: Real> RobinSolution<T> {
    fn refresh(&mut self) -> Result<()> {
        let sources: Vec<(BoundaryPoint<T>, T)> = self
            .density
            .windows
            .iter()
            .zip(&self.layout.thetas)
            .flat_map(|(w, th)| {
                th.iter()
                    .zip(w.weights.iter().zip(&w.phi))
                    .map(move |(&h, (&wt, &p))| (BoundaryPoint::new(h), w.epsilon * wt * p))
            })
            .collect();
        self.field = self.kernel.source_field(&sources)?;
        self.residual = robin_residual(self, RESIDUAL_CHECKS);
        Ok(())
    }

    pub fn spec(&self) -> &ProblemSpec<T> {
        &self.spec
    }

    pub fn density(&self) -> &BoundaryDensity<T> {
        &self.density
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn c_eps(&self) -> T {
        self.density.c_eps
    }

    /// The same discretisation carrying another density, e.g. to measure how
    /// far an arbitrary density is from solving the Robin problem.
    pub fn with_density(&self, density: BoundaryDensity<T>) -> Result<Self> {
        let same_shape = density.windows.len() == self.density.windows.len()
            && density
                .windows
                .iter()
                .zip(&self.density.windows)
                .all(|(a, b)| a.nodes == b.nodes && a.phi.len() == b.phi.len());
        if !same_shape {
            return Err(Error::Dimension(
                "density does not match the solution's discretisation".into(),
            ));
        }
        let mut out = self.clone();
        out.density = density;
        out.refresh()?;
        Ok(out)
    }

    /// `u_r` at the window point with local coordinate `t ∈ [−1, 1]`.
    pub fn u_on_window(&self, i: usize, t: T) -> Result<T> {
        let th = self.spec.window_param(i, t)?;
        let row = log_row(&self.spec, &self.density, &self.layout, i, t, th);
        let phi = self.density.windows.iter().flat_map(|w| w.phi.iter());
        let layer: T = row.iter().zip(phi).map(|(&a, &p)| a * p).sum();
        Ok(self.kernel.g_on_boundary(th)
            + layer
            + self.kernel.eval_field_on_boundary(&self.field, th)
            + self.density.c_eps)
    }

    /// `u_r(x)` for `x` in the head. Panels close to `x` are subdivided and
    /// integrated against the interpolated density.
    pub fn u(&self, x: Point<T>) -> Result<T> {
        if !x.is_finite() || !self.spec.head.contains(x) {
            return Err(Error::InvalidArgument(format!(
                "point {x} is outside the head domain"
            )));
        }
        let mut layer = T::zero();
        for (j, w) in self.density.windows.iter().enumerate() {
            for p in 0..w.panel_count() {
                let (a, b) = (w.breaks[p], w.breaks[p + 1]);
                let phi = w.panel_phi(p);
                layer += self.log_panel(j, a, b, a, b, phi, x, 0)?;
            }
        }
        Ok(self.kernel.g_function(x)
            + layer
            + self.kernel.eval_field(&self.field, x)
            + self.density.c_eps)
    }

    /// `∫_{[lo,hi]} −(1/π) ln|x − y(s)| φ(s) ε ds` with `φ` the interpolant on
    /// panel `[a, b]`.
    #[allow(clippy::too_many_arguments)]
    fn log_panel(
        &self,
        j: usize,
        a: T,
        b: T,
        lo: T,
        hi: T,
        phi: &[T],
        x: Point<T>,
        depth: usize,
    ) -> Result<T> {
        let gl = &self.layout.gl;
        let eps = self.density.windows[j].epsilon;
        let mid = self.spec.window_point(j, (lo + hi) * T::lit(0.5))?;
        let len = eps * (hi - lo);
        if x.dist(mid) < T::lit(NEAR_RATIO) * len && depth < MAX_SPLIT_DEPTH {
            let m = (lo + hi) * T::lit(0.5);
            return Ok(self.log_panel(j, a, b, lo, m, phi, x, depth + 1)?
                + self.log_panel(j, a, b, m, hi, phi, x, depth + 1)?);
        }
        let (pc, ph) = ((a + b) * T::lit(0.5), (b - a) * T::lit(0.5));
        let (c, h) = ((lo + hi) * T::lit(0.5), (hi - lo) * T::lit(0.5));
        let mut acc = T::zero();
        for (&s, &w) in gl.nodes.iter().zip(&gl.weights) {
            let t = c + h * s;
            let y = self.spec.window_point(j, t)?;
            let d = x.dist(y);
            if d.as_f64() < 1e-14 {
                return Err(Error::CoincidentPoints {
                    distance: d.as_f64(),
                });
            }
            acc += w * d.ln() * gl.interpolate(phi, (t - pc) / ph);
        }
        Ok(-acc * h * eps / T::PI())
    }

    /// Serialisable summary.
    pub fn record(&self, points: &[Point<T>]) -> Result<RobinRecord> {
        let u_r_at = points
            .iter()
            .map(|&p| {
                Ok(RobinPointValue {
                    x: p.x.as_f64(),
                    y: p.y.as_f64(),
                    u_r: self.u(p)?.as_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RobinRecord {
            u_r_at,
            c_eps: self.density.c_eps.as_f64(),
            residual: self.residual.as_f64(),
        })
    }
}

/// Max of `|φ + u_r/L_i − L_i/2|` over `n_check` points per window placed
/// between the collocation nodes.
pub fn robin_residual<T: Real>(solution: &RobinSolution<T>, n_check: usize) -> T {
    let gl = &solution.layout.gl;
    let mut worst = T::zero();
    for (i, w) in solution.density.windows.iter().enumerate() {
        let len = solution.spec.necks[i].length;
        for k in 0..n_check {
            let t = -T::one()
                + T::lit(2.0) * (T::from_usize_lossy(k) + T::lit(0.381_966_011_250_105))
                    / T::from_usize_lossy(n_check);
            let u = match solution.u_on_window(i, t) {
                Ok(u) => u,
                Err(_) => return T::infinity(),
            };
            let r = (w.value_at(gl, t) + u / len - len * T::lit(0.5)).abs();
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobinPointValue {
    pub x: f64,
    pub y: f64,
    pub u_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobinRecord {
    pub u_r_at: Vec<RobinPointValue>,
    #[serde(rename = "C_eps")]
    pub c_eps: f64,
    pub residual: f64,
}

/// Asymptotic and integral-equation MFPT at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison<T> {
    pub u_asym: T,
    pub u_r: T,
    pub rel_err: T,
}

pub fn compare<T: Real>(
    spec: &ProblemSpec<T>,
    kernel: &NeumannKernel<T>,
    x: Point<T>,
    resolution: usize,
) -> Result<Comparison<T>> {
    let u_asym = mfpt_n(spec, kernel, x)?.value;
    let u_r = solve_robin(spec, kernel, resolution)?.u(x)?;
    Ok(Comparison {
        u_asym,
        u_r,
        rel_err: ((u_r - u_asym) / u_r).abs(),
    })
}
