//! Neumann function of `−Δ` with boundary sources.
//!
//! `N_∂Ω(x, z) = −(1/π) ln|x − z| + R(x, z)`, where `R` is harmonic in `x`,
//! has Neumann data `−1/|∂Ω| + (1/π)⟨x − z, ν⟩/|x − z|²` and is normalised by
//! `∫_∂Ω N_∂Ω(·, z) dσ = 0`. On the unit disk `R ≡ 0` and the Poisson
//! auxiliary is `g(x) = ¼(1 − |x|²)`.
//!
//! On other heads `R` and `g` are single-layer potentials plus constants. The
//! interior Neumann problem is solved once per kernel by Nyström discretisation
//! of `(½I + K* + P) μ = h` on the periodic trapezoid rule, where `P μ = ∫ μ`
//! removes the one-dimensional null space. Boundary values of the layer use
//! Kress's logarithmic product quadrature; interior values near the boundary
//! use trigonometric upsampling of the density.

use std::io::Write;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, HeadDomain};
use crate::linalg::{Lu, Matrix};
use crate::scalar::{Point, Real};

pub use crate::quadrature::log_op_l1;

/// Default Nyström node count for numerical kernels.
pub const DEFAULT_NODES: usize = 256;

const UPSAMPLE_LEVELS: usize = 6;
const NEAR_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    ExactDisk,
    Numerical,
}

#[derive(Debug, Clone)]
pub struct NeumannKernel<T> {
    head: HeadDomain<T>,
    nystrom: Option<Box<Nystrom<T>>>,
}

impl<T: Real> NeumannKernel<T> {
    pub fn exact_disk() -> Self {
        Self {
            head: HeadDomain::unit_disk(),
            nystrom: None,
        }
    }

    /// Exact kernel on the unit disk, numerical with [`DEFAULT_NODES`] otherwise.
    pub fn new(head: &HeadDomain<T>) -> Result<Self> {
        if head.is_unit_disk() {
            Ok(Self::exact_disk())
        } else {
            Self::numerical(head, DEFAULT_NODES)
        }
    }

    /// Numerical kernel with `n` Nyström nodes (even, ≥ 32). Works for any head,
    /// including the analytic unit disk.
    pub fn numerical(head: &HeadDomain<T>, n: usize) -> Result<Self> {
        if n < 32 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "Nyström node count must be even and at least 32, got {n}"
            )));
        }
        Ok(Self {
            head: head.clone(),
            nystrom: Some(Box::new(Nystrom::build(head, n)?)),
        })
    }

    pub fn mode(&self) -> KernelMode {
        if self.nystrom.is_some() {
            KernelMode::Numerical
        } else {
            KernelMode::ExactDisk
        }
    }

    pub fn head(&self) -> &HeadDomain<T> {
        &self.head
    }

    /// Nyström node count, or 0 for the exact disk kernel.
    pub fn nodes(&self) -> usize {
        self.nystrom.as_ref().map_or(0, |ny| ny.n)
    }

    /// `N_∂Ω(x, z)` for `x ∈ Ω̄`, `z ∈ ∂Ω`.
    pub fn boundary_neumann(&self, x: Point<T>, z: BoundaryPoint<T>) -> Result<T> {
        let d = x.dist(self.head.point(z.theta));
        if d.as_f64() < 1e-14 {
            return Err(Error::CoincidentPoints {
                distance: d.as_f64(),
            });
        }
        Ok(-d.ln() / T::PI() + self.regular_part(x, z)?)
    }

    /// `N_∂Ω(x(t), z)` with both points on the boundary.
    pub fn boundary_neumann_on_boundary(&self, t: T, z: BoundaryPoint<T>) -> Result<T> {
        let d = self.head.chord(z.theta, t).norm();
        if d.as_f64() < 1e-14 {
            return Err(Error::CoincidentPoints {
                distance: d.as_f64(),
            });
        }
        Ok(-d.ln() / T::PI() + self.regular_part_on_boundary(t, z))
    }

    /// `R_∂Ω(x, z)`.
    pub fn regular_part(&self, x: Point<T>, z: BoundaryPoint<T>) -> Result<T> {
        match &self.nystrom {
            None => Ok(T::zero()),
            Some(ny) => Ok(ny
                .field(&self.head, &[(z.theta, T::one())])
                .eval(ny, &self.head, x)),
        }
    }

    /// `R_∂Ω(x(t), z)` with `x` on the boundary.
    pub fn regular_part_on_boundary(&self, t: T, z: BoundaryPoint<T>) -> T {
        match &self.nystrom {
            None => T::zero(),
            Some(ny) => {
                let mu = ny.source_density(&self.head, &[(z.theta, T::one())]);
                let c = ny.constant_from(&self.head, &[(z.theta, T::one())], &mu);
                dot(&ny.kress_row(&self.head, t), &mu) + c
            }
        }
    }

    /// Dense block `R(x(t_a), z_b)` for boundary targets and sources.
    pub fn regular_part_matrix(&self, targets: &[T], sources: &[T]) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(targets.len(), sources.len());
        let Some(ny) = &self.nystrom else {
            return Ok(out);
        };
        let rhs: Vec<Vec<T>> = sources
            .iter()
            .map(|&s| ny.h_source(&self.head, s))
            .collect();
        let mus: Vec<Vec<T>> = rhs.iter().map(|h| ny.lu.solve(h)).collect();
        let consts: Vec<T> = sources
            .iter()
            .zip(&mus)
            .map(|(&s, mu)| ny.constant_from(&self.head, &[(s, T::one())], mu))
            .collect();
        for (a, &t) in targets.iter().enumerate() {
            let w = ny.kress_row(&self.head, t);
            for (b, mu) in mus.iter().enumerate() {
                out.set(a, b, dot(&w, mu) + consts[b]);
            }
        }
        Ok(out)
    }

    /// Prepares `x ↦ Σ_k w_k R(x, z_k)` for repeated evaluation.
    pub fn source_field(&self, sources: &[(BoundaryPoint<T>, T)]) -> Result<SourceField<T>> {
        let inner = match &self.nystrom {
            None => None,
            Some(ny) => {
                let pairs: Vec<(T, T)> = sources.iter().map(|(z, w)| (z.theta, *w)).collect();
                Some(ny.field(&self.head, &pairs))
            }
        };
        Ok(SourceField { inner })
    }

    /// Evaluates a prepared [`SourceField`] at `x ∈ Ω̄`.
    pub fn eval_field(&self, field: &SourceField<T>, x: Point<T>) -> T {
        match (&self.nystrom, &field.inner) {
            (Some(ny), Some(f)) => f.eval(ny, &self.head, x),
            _ => T::zero(),
        }
    }

    /// Evaluates a prepared [`SourceField`] at the boundary point `x(t)`.
    pub fn eval_field_on_boundary(&self, field: &SourceField<T>, t: T) -> T {
        match (&self.nystrom, &field.inner) {
            (Some(ny), Some(f)) => f.layer.boundary(ny, &self.head, t) + f.constant,
            _ => T::zero(),
        }
    }

    /// `g(x)`: `Δg = −1`, `∂g/∂ν = −|Ω|/|∂Ω|`, `∫_∂Ω g = 0`.
    pub fn g_function(&self, x: Point<T>) -> T {
        match &self.nystrom {
            None => T::lit(0.25) * (T::one() - x.norm_sq()),
            Some(ny) => {
                let r = x - ny.x0;
                -r.norm_sq() * T::lit(0.25) + ny.g_field.eval(ny, &self.head, x)
            }
        }
    }

    /// `g(x(t))` on the boundary.
    pub fn g_on_boundary(&self, t: T) -> T {
        match &self.nystrom {
            None => T::zero(),
            Some(ny) => {
                let r = self.head.point(t) - ny.x0;
                -r.norm_sq() * T::lit(0.25)
                    + ny.g_field.layer.boundary(ny, &self.head, t)
                    + ny.g_field.constant
            }
        }
    }

    /// Max-norm mismatch between the normal derivative of `R(·, z)` and its
    /// prescribed Neumann data at `n_check` off-node boundary points.
    pub fn regular_part_flux_residual(&self, z: BoundaryPoint<T>, n_check: usize) -> T {
        let Some(ny) = &self.nystrom else {
            return T::zero();
        };
        let mu = ny.source_density(&self.head, &[(z.theta, T::one())]);
        (0..n_check)
            .map(|k| {
                let t = T::TAU() * (T::from_usize_lossy(k) + T::lit(0.5 * 0.618_033_988_749_895))
                    / T::from_usize_lossy(n_check);
                let got = ny.normal_derivative(&self.head, t, &mu);
                let want = ny.h_at(&self.head, t, z.theta);
                (got - want).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// Writes `R(x(θ_x), z(θ_z))` on an `m × m` parameter grid as CSV.
    pub fn dump_regular_part<W: Write>(&self, mut out: W, m: usize) -> Result<()> {
        let thetas: Vec<T> = (0..m)
            .map(|k| T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(m))
            .collect();
        let r = self.regular_part_matrix(&thetas, &thetas)?;
        writeln!(out, "theta_x,theta_z,value")?;
        for (a, tx) in thetas.iter().enumerate() {
            for (b, tz) in thetas.iter().enumerate() {
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e}",
                    tx.as_f64(),
                    tz.as_f64(),
                    r.get(a, b).as_f64()
                )?;
            }
        }
        Ok(())
    }
}

/// A prepared combination of boundary sources, see [`NeumannKernel::source_field`].
#[derive(Debug, Clone)]
pub struct SourceField<T> {
    inner: Option<Field<T>>,
}

#[derive(Debug, Clone)]
struct Field<T> {
    layer: Layer<T>,
    constant: T,
}

impl<T: Real> Field<T> {
    fn eval(&self, ny: &Nystrom<T>, head: &HeadDomain<T>, x: Point<T>) -> T {
        self.layer.at(ny, head, x) + self.constant
    }
}

/// Single-layer density at the Nyström nodes, with cached upsampled copies.
#[derive(Debug, Clone)]
struct Layer<T> {
    mu: Vec<T>,
    fine: [OnceLock<Vec<T>>; UPSAMPLE_LEVELS],
}

impl<T: Real> Layer<T> {
    fn new(mu: Vec<T>) -> Self {
        Self {
            mu,
            fine: Default::default(),
        }
    }

    fn boundary(&self, ny: &Nystrom<T>, head: &HeadDomain<T>, t: T) -> T {
        dot(&ny.kress_row(head, t), &self.mu)
    }

    fn at(&self, ny: &Nystrom<T>, head: &HeadDomain<T>, x: Point<T>) -> T {
        let (tb, d) = head.locate(x);
        if d.as_f64() < 1e-12 {
            return self.boundary(ny, head, tb);
        }
        let near = T::lit(NEAR_FACTOR);
        if d >= near * ny.spacing {
            return single_layer_sum(&ny.pts, &ny.weights, &self.mu, x);
        }
        for level in 0..UPSAMPLE_LEVELS {
            let p = 2usize << level;
            if d >= near * ny.spacing / T::from_usize_lossy(p) {
                let grid = ny.fine_grid(head, level);
                let vals = self.fine[level].get_or_init(|| ny.upsample(&self.mu, p));
                return single_layer_sum(&grid.0, &grid.1, vals, x);
            }
        }
        // closer than any grid resolves: continue the boundary trace inward
        self.boundary(ny, head, tb) - d * ny.normal_derivative(head, tb, &self.mu)
    }
}

#[derive(Debug, Clone)]
struct Nystrom<T> {
    n: usize,
    theta: Vec<T>,
    pts: Vec<Point<T>>,
    normals: Vec<Point<T>>,
    speed: Vec<T>,
    kappa: Vec<T>,
    /// Trapezoid weights `(2π/n) |x'(θ_j)|`.
    weights: Vec<T>,
    /// Largest node spacing in arc length.
    spacing: T,
    perimeter: T,
    lu: Lu<T>,
    /// `β_j = ∫_∂Ω S[δ_j] dσ`, used to normalise sources.
    beta: Vec<T>,
    x0: Point<T>,
    g_field: Field<T>,
    fine: [OnceLock<(Vec<Point<T>>, Vec<T>)>; UPSAMPLE_LEVELS],
}

impl<T: Real> Nystrom<T> {
    fn build(head: &HeadDomain<T>, n: usize) -> Result<Self> {
        let h = T::TAU() / T::from_usize_lossy(n);
        let theta: Vec<T> = (0..n).map(|j| h * T::from_usize_lossy(j)).collect();
        let samples: Vec<_> = theta.iter().map(|&t| head.sample(t)).collect();
        let pts: Vec<Point<T>> = samples.iter().map(|s| s.point).collect();
        let normals: Vec<Point<T>> = samples.iter().map(|s| s.normal()).collect();
        let speed: Vec<T> = samples.iter().map(|s| s.speed()).collect();
        let kappa: Vec<T> = samples.iter().map(|s| s.curvature()).collect();
        let weights: Vec<T> = speed.iter().map(|&j| j * h).collect();
        let spacing = weights.iter().copied().fold(T::zero(), T::max);
        let perimeter = head.perimeter();
        let inv2pi = T::one() / T::TAU();

        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let k = if i == j {
                    -kappa[i] * inv2pi * T::lit(0.5)
                } else {
                    let r = pts[i] - pts[j];
                    -inv2pi * r.dot(normals[i]) / r.norm_sq()
                };
                let diag = if i == j { T::lit(0.5) } else { T::zero() };
                a.set(i, j, diag + weights[j] * (k + T::one()));
            }
        }
        let lu = Lu::factor(a).map_err(|e| match e {
            Error::Singular { context } => Error::NotConverged(format!(
                "Nyström system for the regular part is singular ({context}); is the head curve simple and smooth?"
            )),
            other => other,
        })?;

        let mut ny = Self {
            n,
            theta,
            pts,
            normals,
            speed,
            kappa,
            weights,
            spacing,
            perimeter,
            lu,
            beta: Vec::new(),
            x0: head.centroid(),
            g_field: Field {
                layer: Layer::new(Vec::new()),
                constant: T::zero(),
            },
            fine: Default::default(),
        };
        let mut beta = vec![T::zero(); n];
        for i in 0..n {
            let row = ny.kress_row(head, ny.theta[i]);
            for (b, r) in beta.iter_mut().zip(row) {
                *b += ny.weights[i] * r;
            }
        }
        ny.beta = beta;

        let area = head.area();
        let rhs: Vec<T> = (0..n)
            .map(|i| -area / perimeter + (ny.pts[i] - ny.x0).dot(ny.normals[i]) * T::lit(0.5))
            .collect();
        let eta = ny.lu.solve(&rhs);
        let quad: T = (0..n)
            .map(|i| -(ny.pts[i] - ny.x0).norm_sq() * T::lit(0.25) * ny.weights[i])
            .sum();
        let constant = -(quad + dot(&ny.beta, &eta)) / perimeter;
        ny.g_field = Field {
            layer: Layer::new(eta),
            constant,
        };
        Ok(ny)
    }

    /// Neumann data of `R(·, z(θ_z))` at the boundary point `x(t)`.
    fn h_at(&self, head: &HeadDomain<T>, t: T, theta_z: T) -> T {
        let r = head.chord(theta_z, t);
        let d2 = r.norm_sq();
        let s = head.sample(t);
        let v = if d2.sqrt() <= T::epsilon() * T::lit(16.0) * s.speed() {
            s.curvature() * T::lit(0.5)
        } else {
            r.dot(s.normal()) / d2
        };
        -T::one() / self.perimeter + v / T::PI()
    }

    fn h_source(&self, head: &HeadDomain<T>, theta_z: T) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let r = head.chord(theta_z, self.theta[i]);
                let d2 = r.norm_sq();
                let v = if d2.sqrt() <= T::epsilon() * T::lit(16.0) * self.speed[i] {
                    self.kappa[i] * T::lit(0.5)
                } else {
                    r.dot(self.normals[i]) / d2
                };
                -T::one() / self.perimeter + v / T::PI()
            })
            .collect()
    }

    fn source_density(&self, head: &HeadDomain<T>, sources: &[(T, T)]) -> Vec<T> {
        let mut rhs = vec![T::zero(); self.n];
        for &(theta, w) in sources {
            for (r, h) in rhs.iter_mut().zip(self.h_source(head, theta)) {
                *r += w * h;
            }
        }
        self.lu.solve(&rhs)
    }

    /// `c = [(1/π) Σ_k w_k ∫ ln|x − z_k| dσ − ∫ S[μ] dσ] / |∂Ω|`.
    fn constant_from(&self, head: &HeadDomain<T>, sources: &[(T, T)], mu: &[T]) -> T {
        let mut log_int = T::zero();
        for &(theta, w) in sources {
            let s1: T = self.kress_row(head, theta).into_iter().sum();
            log_int += w * T::lit(-2.0) * s1;
        }
        (log_int - dot(&self.beta, mu)) / self.perimeter
    }

    fn field(&self, head: &HeadDomain<T>, sources: &[(T, T)]) -> Field<T> {
        let mu = self.source_density(head, sources);
        let constant = self.constant_from(head, sources, &mu);
        Field {
            layer: Layer::new(mu),
            constant,
        }
    }

    /// Weights `ω(t)` with `S[μ](x(t)) ≈ Σ_j ω_j μ_j` for `x(t)` on the boundary.
    fn kress_row(&self, head: &HeadDomain<T>, t: T) -> Vec<T> {
        let n = self.n;
        let nf = T::from_usize_lossy(n);
        let half_n = n / 2;
        let four_pi_n = T::lit(4.0) * T::PI() / nf;
        let nyq = T::lit(4.0) * T::PI() / (nf * nf);
        let speed_t = head.sample(t).speed();
        let h = T::TAU() / nf;
        let inv2pi = T::one() / T::TAU();
        (0..n)
            .map(|j| {
                let delta = t - self.theta[j];
                let c1 = delta.cos();
                // Σ_{m=1}^{n/2−1} cos(mΔ)/m by the Chebyshev recurrence
                let (mut cm1, mut cm) = (T::one(), c1);
                let mut sum = T::zero();
                for m in 1..half_n {
                    sum += cm / T::from_usize_lossy(m);
                    let next = T::lit(2.0) * c1 * cm - cm1;
                    cm1 = cm;
                    cm = next;
                }
                // cm now holds cos((n/2)Δ)
                let r = -four_pi_n * sum - nyq * cm;
                let sin_half = (delta * T::lit(0.5)).sin().abs();
                let smooth = if sin_half <= T::lit(1e-13) {
                    speed_t.ln()
                } else {
                    (head.chord(t, self.theta[j]).norm() / (sin_half + sin_half)).ln()
                };
                -inv2pi * self.speed[j] * (T::lit(0.5) * r + h * smooth)
            })
            .collect()
    }

    /// Interior normal derivative `½μ(t) + K*μ(t)` of `S[μ]` at `x(t)`.
    fn normal_derivative(&self, head: &HeadDomain<T>, t: T, mu: &[T]) -> T {
        let s = head.sample(t);
        let nu = s.normal();
        let inv2pi = T::one() / T::TAU();
        let mut acc = T::lit(0.5) * self.interpolate(mu, t);
        for j in 0..self.n {
            let r = head.chord(self.theta[j], t);
            let d = r.norm();
            let k = if d <= T::epsilon() * T::lit(16.0) * s.speed() {
                -s.curvature() * inv2pi * T::lit(0.5)
            } else {
                -inv2pi * r.dot(nu) / (d * d)
            };
            acc += self.weights[j] * k * mu[j];
        }
        acc
    }

    /// Trigonometric interpolant of nodal values at parameter `t`.
    fn interpolate(&self, v: &[T], t: T) -> T {
        let nf = T::from_usize_lossy(self.n);
        let mut acc = T::zero();
        for j in 0..self.n {
            acc += v[j] * periodic_sinc(t - self.theta[j], nf);
        }
        acc
    }

    fn upsample(&self, v: &[T], p: usize) -> Vec<T> {
        let m = self.n * p;
        let hm = T::TAU() / T::from_usize_lossy(m);
        (0..m)
            .map(|k| {
                if k % p == 0 {
                    v[k / p]
                } else {
                    self.interpolate(v, hm * T::from_usize_lossy(k))
                }
            })
            .collect()
    }

    fn fine_grid(&self, head: &HeadDomain<T>, level: usize) -> &(Vec<Point<T>>, Vec<T>) {
        self.fine[level].get_or_init(|| {
            let m = self.n * (2usize << level);
            let hm = T::TAU() / T::from_usize_lossy(m);
            (0..m)
                .map(|k| {
                    let s = head.sample(hm * T::from_usize_lossy(k));
                    (s.point, s.speed() * hm)
                })
                .unzip()
        })
    }
}

/// `D_n(Δ) = sin(nΔ/2) / (n tan(Δ/2))`, the even-`n` periodic cardinal function.
fn periodic_sinc<T: Real>(delta: T, nf: T) -> T {
    let tau = T::TAU();
    let mut d = delta - (delta / tau).round() * tau;
    if d.abs() < T::lit(1e-14) {
        d = T::zero();
    }
    if d == T::zero() {
        return T::one();
    }
    let half = T::lit(0.5);
    (nf * d * half).sin() / (nf * (d * half).tan())
}

fn single_layer_sum<T: Real>(pts: &[Point<T>], w: &[T], mu: &[T], x: Point<T>) -> T {
    let mut acc = T::zero();
    for ((p, &wj), &m) in pts.iter().zip(w).zip(mu) {
        acc += wj * m * (x - *p).norm_sq().ln();
    }
    -acc / (T::lit(2.0) * T::TAU())
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bp(t: f64) -> BoundaryPoint<f64> {
        BoundaryPoint::new(t)
    }

    /// `∫_∂Ω f(x(θ)) dσ` with panels graded geometrically toward `θ_s`.
    fn boundary_integral(head: &HeadDomain<f64>, theta_s: f64, f: impl Fn(f64) -> f64) -> f64 {
        let gl = GaussLegendre::<f64>::new(16);
        let mut edges = vec![theta_s, theta_s + std::f64::consts::TAU];
        for k in 0..40 {
            let d = std::f64::consts::PI * 0.5f64.powi(k);
            edges.push(theta_s + d);
            edges.push(theta_s + std::f64::consts::TAU - d);
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        edges
            .windows(2)
            .map(|w| gl.integrate(w[0], w[1], |t| f(t) * head.sample(t).speed()))
            .sum()
    }

    #[test]
    fn disk_kernel_is_exact() {
        let k = NeumannKernel::<f64>::exact_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let r: f64 = rng.random_range(0.0..0.99);
            let x = Point::from_polar(r, rng.random_range(0.0..6.3));
            let z = bp(rng.random_range(0.0..6.3));
            let want = -x.dist(k.head().point(z.theta)).ln() / std::f64::consts::PI;
            assert_relative_eq!(k.boundary_neumann(x, z).unwrap(), want, epsilon = 1e-12);
        }
        assert_eq!(
            k.boundary_neumann(Point::new(0.0, 0.0), bp(0.0)).unwrap(),
            0.0
        );
        assert_relative_eq!(
            k.boundary_neumann(Point::new(0.5, 0.0), bp(0.0)).unwrap(),
            0.220636,
            epsilon = 1e-6
        );
        assert!(matches!(
            k.boundary_neumann(Point::new(1.0, 0.0), bp(0.0)),
            Err(Error::CoincidentPoints { .. })
        ));
        assert_eq!(k.g_function(Point::new(0.0, 0.0)), 0.25);
        assert_eq!(k.g_function(Point::new(0.6, 0.8)), 0.0);
    }

    #[test]
    fn disk_kernel_has_zero_boundary_mean() {
        let k = NeumannKernel::<f64>::exact_disk();
        for &tz in &[0.0, 1.3, 4.0] {
            let i = boundary_integral(k.head(), tz, |t| {
                k.boundary_neumann_on_boundary(t, bp(tz)).unwrap_or(0.0)
            });
            assert!(i.abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn shifted_circle_has_constant_regular_part() {
        let (a, c) = (1.3f64, Point::new(0.2, -0.1));
        let head = HeadDomain::circle_curve(c, a, 512).unwrap();
        let k = NeumannKernel::numerical(&head, 128).unwrap();
        let want = a.ln() / std::f64::consts::PI;
        for &(tx, tz) in &[(0.1, 2.0), (3.0, 3.3), (5.0, 5.0 + 1e-7)] {
            assert_relative_eq!(
                k.regular_part_on_boundary(tx, bp(tz)),
                want,
                epsilon = 1e-10
            );
        }
        let z = bp(0.7);
        for &d in &[0.8, 1e-2, 1e-3, 1e-4, 1e-6] {
            let x = c + Point::from_polar(a - d, 2.5);
            assert_relative_eq!(k.regular_part(x, z).unwrap(), want, epsilon = 1e-8);
        }
        let x = c + Point::from_polar(0.4, 1.0);
        assert_relative_eq!(k.g_function(x), (a * a - 0.16) / 4.0, epsilon = 1e-10);
        assert_relative_eq!(k.g_on_boundary(2.0), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn numerical_unit_disk_agrees_with_exact() {
        let head = HeadDomain::<f64>::unit_disk();
        let k = NeumannKernel::numerical(&head, 64).unwrap();
        let x = Point::new(0.3, -0.2);
        assert!(k.regular_part(x, bp(1.0)).unwrap().abs() < 1e-12);
        assert_relative_eq!(k.g_function(x), 0.25 * (1.0 - 0.13), epsilon = 1e-12);
    }

    #[test]
    fn ellipse_regular_part_properties() {
        let head = HeadDomain::<f64>::ellipse(2.0, 1.0, 512).unwrap();
        let k = NeumannKernel::new(&head).unwrap();
        assert_eq!(k.mode(), KernelMode::Numerical);
        // symmetry on the boundary
        let (t1, t2) = (0.4, 2.9);
        let r12 = k.regular_part_on_boundary(t1, bp(t2));
        let r21 = k.regular_part_on_boundary(t2, bp(t1));
        assert_relative_eq!(r12, r21, epsilon = 1e-8);
        // batched block agrees with single evaluations
        let m = k.regular_part_matrix(&[t1, t2], &[t1, t2]).unwrap();
        assert_relative_eq!(m.get(0, 1), r12, epsilon = 1e-13);
        assert!(m.is_symmetric(1e-8));
        // flux residual
        assert!(k.regular_part_flux_residual(bp(0.0), 97) < 1e-5);
        // harmonicity: mean value over a small circle
        let z = bp(0.0);
        let x = Point::new(0.4, 0.3);
        let avg = (0..64)
            .map(|j| {
                let p = x + Point::from_polar(0.05, std::f64::consts::TAU * j as f64 / 64.0);
                k.regular_part(p, z).unwrap()
            })
            .sum::<f64>()
            / 64.0;
        assert_relative_eq!(avg, k.regular_part(x, z).unwrap(), epsilon = 1e-5);
        // zero boundary mean of the full kernel
        let i = boundary_integral(&head, 0.0, |t| {
            k.boundary_neumann_on_boundary(t, z).unwrap_or(0.0)
        });
        assert!(i.abs() < 1e-6, "{i}");
        // interior value agrees with the boundary trace as x approaches it
        let near = k
            .regular_part(head.point(1.0) - head.normal(1.0) * 1e-9, z)
            .unwrap();
        assert_relative_eq!(near, k.regular_part_on_boundary(1.0, z), epsilon = 1e-7);
    }

    #[test]
    fn ellipse_self_convergence() {
        let head = HeadDomain::<f64>::ellipse(2.0, 1.0, 512).unwrap();
        let coarse = NeumannKernel::numerical(&head, 256).unwrap();
        let fine = NeumannKernel::numerical(&head, 512).unwrap();
        let x = Point::new(0.0, 0.0);
        let z = bp(0.0);
        let a = coarse.regular_part(x, z).unwrap();
        let b = fine.regular_part(x, z).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn kite_matches_double_resolution() {
        let head = HeadDomain::<f64>::kite(1024).unwrap();
        let coarse = NeumannKernel::numerical(&head, 256).unwrap();
        let fine = NeumannKernel::numerical(&head, 512).unwrap();
        let x = Point::new(-0.2, 0.4);
        let z = bp(1.1);
        let a = coarse.boundary_neumann(x, z).unwrap();
        let b = fine.boundary_neumann(x, z).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} {b}");
        assert!(coarse.regular_part_flux_residual(z, 101) < 1e-6);
    }

    #[test]
    fn g_function_on_ellipse() {
        let head = HeadDomain::<f64>::ellipse(1.5, 1.0, 512).unwrap();
        let k = NeumannKernel::new(&head).unwrap();
        let x = Point::new(0.3, -0.2);
        let h = 1e-3;
        let lap = (k.g_function(x + Point::new(h, 0.0))
            + k.g_function(x - Point::new(h, 0.0))
            + k.g_function(x + Point::new(0.0, h))
            + k.g_function(x - Point::new(0.0, h))
            - 4.0 * k.g_function(x))
            / (h * h);
        assert!((lap + 1.0).abs() < 1e-4, "{lap}");
        let n = 200;
        let mean: f64 = (0..n)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / n as f64;
                k.g_on_boundary(t) * head.sample(t).speed()
            })
            .sum::<f64>()
            * std::f64::consts::TAU
            / n as f64;
        assert!(mean.abs() < 1e-6, "{mean}");
        let ny = k.nystrom.as_ref().unwrap();
        let want = -head.area() / head.perimeter();
        for &t in &[0.1, 1.7, 4.4] {
            let s = head.sample(t);
            let flux = -(s.point - ny.x0).dot(s.normal()) * 0.5
                + ny.normal_derivative(&head, t, &ny.g_field.layer.mu);
            assert_relative_eq!(flux, want, epsilon = 1e-5);
        }
    }

    #[test]
    fn single_precision_kernel_builds() {
        let head = HeadDomain::<f32>::ellipse(2.0, 1.0, 512).unwrap();
        let k = NeumannKernel::numerical(&head, 64).unwrap();
        let r = k
            .regular_part(Point::new(0.0f32, 0.0), BoundaryPoint::new(0.0))
            .unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn regular_part_dump_has_header_and_rows() {
        let head = HeadDomain::<f64>::ellipse(2.0, 1.0, 512).unwrap();
        let k = NeumannKernel::numerical(&head, 64).unwrap();
        let mut buf = Vec::new();
        k.dump_regular_part(&mut buf, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta_x,theta_z,value\n"));
        assert_eq!(text.lines().count(), 17);
    }
}
