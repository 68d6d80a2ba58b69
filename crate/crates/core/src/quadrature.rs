//! Gauss–Legendre rules and product integration against `ln|x − s|`.
//!
//! The log-moment weights integrate `∫_{-1}^{1} ln|x − s| p(s) ds` exactly for
//! every polynomial `p` of degree below the rule size, for any real `x`
//! (inside or outside the panel).

use crate::scalar::Real;

/// Gauss–Legendre rule on `[-1, 1]`, nodes in ascending order.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Barycentric interpolation weights for the nodes.
    bary: Vec<T>,
    /// `proj[m][k] = (2m+1)/2 · w_k · P_m(s_k)`; maps nodal values to Legendre coefficients.
    proj: Vec<Vec<T>>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let (x64, w64) = gauss_legendre_f64(n);
        let nodes: Vec<T> = x64.iter().map(|&x| T::lit(x)).collect();
        let weights: Vec<T> = w64.iter().map(|&w| T::lit(w)).collect();
        let bary = x64
            .iter()
            .zip(&w64)
            .enumerate()
            .map(|(k, (&x, &w))| {
                let s = ((1.0 - x * x) * w).sqrt();
                T::lit(if k % 2 == 0 { s } else { -s })
            })
            .collect();
        let mut proj = vec![vec![T::zero(); n]; n];
        for (k, (&x, &w)) in x64.iter().zip(&w64).enumerate() {
            let p = legendre_p_all(x, n);
            for m in 0..n {
                proj[m][k] = T::lit((2 * m + 1) as f64 / 2.0 * w * p[m]);
            }
        }
        Self {
            nodes,
            weights,
            bary,
            proj,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(mid + half * s))
            .sum::<T>()
            * half
    }

    /// Lagrange basis values `ℓ_k(x)` for the nodes (barycentric form).
    pub fn lagrange_basis(&self, x: T) -> Vec<T> {
        let n = self.len();
        let mut out = vec![T::zero(); n];
        for (k, &s) in self.nodes.iter().enumerate() {
            if (x - s).abs() <= T::epsilon() * T::lit(4.0) {
                out[k] = T::one();
                return out;
            }
        }
        let mut denom = T::zero();
        for k in 0..n {
            let t = self.bary[k] / (x - self.nodes[k]);
            out[k] = t;
            denom += t;
        }
        for v in &mut out {
            *v /= denom;
        }
        out
    }

    /// Interpolates nodal values at `x`.
    pub fn interpolate(&self, values: &[T], x: T) -> T {
        self.lagrange_basis(x)
            .iter()
            .zip(values)
            .map(|(&l, &v)| l * v)
            .sum()
    }

    /// Weights `W_k(x)` with `Σ_k W_k(x) f(s_k) = ∫_{-1}^{1} ln|x − s| p_f(s) ds`,
    /// where `p_f` is the polynomial interpolant of `f` at the nodes.
    pub fn log_weights(&self, x: T) -> Vec<T> {
        let n = self.len();
        let moments = log_moments(x, n);
        let mut out = vec![T::zero(); n];
        for (m, &mom) in moments.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(&self.proj[m]) {
                *o += p * mom;
            }
        }
        out
    }
}

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
pub fn gauss_legendre_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_p_and_derivative(z, n);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_p_and_derivative(z, n);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // ascending order: the largest root fills the last slot
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    (x, w)
}

fn legendre_p_and_derivative(x: f64, n: usize) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `P_0(x) … P_{n-1}(x)`.
pub fn legendre_p_all<T: Real>(x: T, n: usize) -> Vec<T> {
    let mut p = Vec::with_capacity(n);
    if n == 0 {
        return p;
    }
    p.push(T::one());
    if n == 1 {
        return p;
    }
    p.push(x);
    for k in 1..n - 1 {
        let kf = T::from_usize_lossy(k);
        let next = ((kf + kf + T::one()) * x * p[k] - kf * p[k - 1]) / (kf + T::one());
        p.push(next);
    }
    p
}

/// Legendre functions of the second kind `Q_0(x) … Q_{n-1}(x)` for `x ≠ ±1`.
///
/// On the cut `|x| < 1` the forward recurrence is stable. Off the cut `Q_n`
/// is the minimal solution, so the values come from a backward (Miller)
/// recurrence normalised by `Q_0`.
pub fn legendre_q_all<T: Real>(x: T, n: usize) -> Vec<T> {
    let one = T::one();
    let q0 = T::lit(0.5) * ((one + x) / (one - x)).abs().ln();
    if n == 0 {
        return Vec::new();
    }
    if x.abs() < one {
        let mut q = Vec::with_capacity(n);
        q.push(q0);
        if n > 1 {
            q.push(x * q0 - one);
        }
        for k in 1..n.saturating_sub(1) {
            let kf = T::from_usize_lossy(k);
            let next = ((kf + kf + one) * x * q[k] - kf * q[k - 1]) / (kf + one);
            q.push(next);
        }
        return q;
    }
    // |x| > 1: Q_n(-x) = (-1)^{n+1} Q_n(x), work with y = |x|.
    let y = x.abs().as_f64();
    let ratio = y - (y * y - 1.0).sqrt();
    let extra = if ratio <= 0.0 || ratio >= 1.0 {
        40_000
    } else {
        ((-40.0) / ratio.ln()).ceil().min(40_000.0) as usize
    };
    let top = n + 20 + extra;
    let mut vals = vec![0.0f64; n];
    let mut q_next = 0.0f64;
    let mut q_cur = 1e-300f64;
    for k in (1..=top).rev() {
        // k Q_{k-1} = (2k+1) y Q_k − (k+1) Q_{k+1}
        let kf = k as f64;
        let q_prev = ((2.0 * kf + 1.0) * y * q_cur - (kf + 1.0) * q_next) / kf;
        q_next = q_cur;
        q_cur = q_prev;
        if k - 1 < n {
            vals[k - 1] = q_cur;
        }
        if q_cur.abs() > 1e250 {
            q_next *= 1e-250;
            q_cur *= 1e-250;
            for v in vals.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let q0_y = 0.5 * ((y + 1.0) / (y - 1.0)).ln();
    let scale = q0_y / vals[0];
    let negative = x < T::zero();
    vals.iter()
        .enumerate()
        .map(|(k, &v)| {
            let val = v * scale;
            // Q_k is even in x for odd k, odd for even k
            let signed = if negative && k % 2 == 0 { -val } else { val };
            T::lit(signed)
        })
        .collect()
}

/// Moments `M_m(x) = ∫_{-1}^{1} ln|x − s| P_m(s) ds` for `m < n`.
///
/// Uses `P_m = (P'_{m+1} − P'_{m−1})/(2m+1)` and integration by parts, giving
/// `M_m = 2(Q_{m+1}(x) − Q_{m−1}(x))/(2m+1)` for `m ≥ 1`.
pub fn log_moments<T: Real>(x: T, n: usize) -> Vec<T> {
    let one = T::one();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let m0 = ((x + one).abs()).xlogx_signed(x + one)
        - ((x - one).abs()).xlogx_signed(x - one)
        - T::lit(2.0);
    out.push(m0);
    if n == 1 {
        return out;
    }
    if (x.abs() - one).abs() <= T::epsilon() * T::lit(8.0) {
        // endpoint: nudge inward, the moments are continuous there
        let nudged = x * (one - T::epsilon() * T::lit(64.0));
        return log_moments(nudged, n)
            .into_iter()
            .enumerate()
            .map(|(k, v)| if k == 0 { m0 } else { v })
            .collect();
    }
    let q = legendre_q_all(x, n + 1);
    for m in 1..n {
        let mf = T::from_usize_lossy(m);
        out.push(T::lit(2.0) / (mf + mf + one) * (q[m + 1] - q[m - 1]));
    }
    out
}

trait SignedXLogX: Sized {
    fn xlogx_signed(self, signed: Self) -> Self;
}

impl<T: Real> SignedXLogX for T {
    /// `signed · ln|signed|` given `self = |signed|`.
    fn xlogx_signed(self, signed: T) -> T {
        if self <= T::zero() {
            T::zero()
        } else {
            signed * self.ln()
        }
    }
}

/// `L[1](t) = ∫_{-1}^{1} ln|t − s| ds = (1+t)ln(1+t) + (1−t)ln(1−t) − 2`, with `0·ln 0 = 0`.
pub fn log_op_l1<T: Real>(t: T) -> T {
    let one = T::one();
    (one + t).xlogx() + (one - t).xlogx() - T::lit(2.0)
}
