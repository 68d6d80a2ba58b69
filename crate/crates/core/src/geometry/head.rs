//! Head domains: the unit disk, or a smooth closed curve given by samples.
//!
//! Sampled curves are interpolated by a truncated Fourier series in the
//! sample parameter `θ ∈ [0, 2π)`, which gives exact derivatives for the
//! boundary integral solvers. Arc length comes from composite Gauss panels.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::{Point, Real};

use super::Violation;

/// Minimum sample count for a well-resolved curve.
pub const MIN_CURVE_SAMPLES: usize = 512;

const ARC_GAUSS_ORDER: usize = 10;
const CHECK_POLYLINE: usize = 2048;
const SIMPLE_POLYLINE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    UnitDisk,
    Curve,
}

/// A point on the head boundary, identified by its curve parameter.
/// For the unit disk the parameter is the polar angle (= arc length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint<T> {
    pub theta: T,
}

impl<T: Real> BoundaryPoint<T> {
    pub fn new(theta: T) -> Self {
        Self { theta }
    }
}

/// Position, first and second derivative with respect to the parameter.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample<T> {
    pub point: Point<T>,
    pub d1: Point<T>,
    pub d2: Point<T>,
}

impl<T: Real> CurveSample<T> {
    #[inline]
    pub fn speed(&self) -> T {
        self.d1.norm()
    }

    /// Outward unit normal (counter-clockwise orientation).
    #[inline]
    pub fn normal(&self) -> Point<T> {
        self.d1.perp_cw().normalized()
    }

    /// Signed curvature, positive where the curve is convex.
    #[inline]
    pub fn curvature(&self) -> T {
        self.d1.cross(self.d2) / self.speed().powi(3)
    }
}

#[derive(Debug, Clone)]
struct FourierCurve<T> {
    mean: Point<T>,
    /// `(x_cos, x_sin, y_cos, y_sin)` for modes `k = 1..=K`.
    modes: Vec<[T; 4]>,
    /// Cumulative arc length at the panel breaks `θ_p = 2πp/P`.
    arc_cum: Vec<T>,
    gauss: GaussLegendre<T>,
    samples: usize,
}

impl<T: Real> FourierCurve<T> {
    fn from_samples(points: &[Point<f64>]) -> Self {
        let m = points.len();
        let mf = m as f64;
        let mean_x = points.iter().map(|p| p.x).sum::<f64>() / mf;
        let mean_y = points.iter().map(|p| p.y).sum::<f64>() / mf;
        // highest mode kept is below Nyquist so the interpolant stays real and smooth
        let kmax = (m - 1) / 2;
        let mut raw = Vec::with_capacity(kmax);
        let mut scale = 0.0f64;
        for k in 1..=kmax {
            let (mut xc, mut xs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0);
            for (j, p) in points.iter().enumerate() {
                let ang = TAU * (k * j % m) as f64 / mf;
                let (s, c) = ang.sin_cos();
                xc += p.x * c;
                xs += p.x * s;
                yc += p.y * c;
                ys += p.y * s;
            }
            let f = 2.0 / mf;
            let c = [xc * f, xs * f, yc * f, ys * f];
            scale = c.iter().fold(scale, |a, v| a.max(v.abs()));
            raw.push(c);
        }
        let keep = raw
            .iter()
            .rposition(|c| c.iter().any(|v| v.abs() > 1e-14 * scale))
            .map_or(1, |i| i + 1);
        raw.truncate(keep);
        let modes = raw
            .into_iter()
            .map(|c| [T::lit(c[0]), T::lit(c[1]), T::lit(c[2]), T::lit(c[3])])
            .collect::<Vec<_>>();
        let mut curve = Self {
            mean: Point::new(T::lit(mean_x), T::lit(mean_y)),
            modes,
            arc_cum: Vec::new(),
            gauss: GaussLegendre::new(ARC_GAUSS_ORDER),
            samples: m,
        };
        let panels = (8 * curve.modes.len()).max(256);
        let h = T::lit(TAU / panels as f64);
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(T::zero());
        let mut acc = T::zero();
        for p in 0..panels {
            let a = h * T::from_usize_lossy(p);
            acc += curve.gauss.integrate(a, a + h, |t| curve.eval(t).speed());
            cum.push(acc);
        }
        curve.arc_cum = cum;
        curve
    }

    fn eval(&self, theta: T) -> CurveSample<T> {
        let (s1, c1) = theta.sin_cos();
        let (mut sk, mut ck) = (s1, c1);
        let mut p = self.mean;
        let mut d1 = Point::origin();
        let mut d2 = Point::origin();
        for (i, m) in self.modes.iter().enumerate() {
            let k = T::from_usize_lossy(i + 1);
            p.x += m[0] * ck + m[1] * sk;
            p.y += m[2] * ck + m[3] * sk;
            d1.x += k * (m[1] * ck - m[0] * sk);
            d1.y += k * (m[3] * ck - m[2] * sk);
            d2.x -= k * k * (m[0] * ck + m[1] * sk);
            d2.y -= k * k * (m[2] * ck + m[3] * sk);
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        CurveSample { point: p, d1, d2 }
    }

    /// `x(s) − x(t)` via sum-to-product identities, free of cancellation.
    fn chord(&self, t: T, s: T) -> Point<T> {
        let half = T::lit(0.5);
        let (ss1, cs1) = ((s + t) * half).sin_cos();
        let (sd1, cd1) = ((s - t) * half).sin_cos();
        let (mut ssk, mut csk, mut sdk, mut cdk) = (ss1, cs1, sd1, cd1);
        let two = T::lit(2.0);
        let mut out = Point::origin();
        for m in &self.modes {
            out.x += two * sdk * (m[1] * csk - m[0] * ssk);
            out.y += two * sdk * (m[3] * csk - m[2] * ssk);
            let c = csk * cs1 - ssk * ss1;
            ssk = ssk * cs1 + csk * ss1;
            csk = c;
            let c = cdk * cd1 - sdk * sd1;
            sdk = sdk * cd1 + cdk * sd1;
            cdk = c;
        }
        out
    }

    fn perimeter(&self) -> T {
        *self.arc_cum.last().expect("arc table built")
    }

    fn panel_width(&self) -> T {
        T::lit(TAU) / T::from_usize_lossy(self.arc_cum.len() - 1)
    }

    fn arc_length(&self, theta: T) -> T {
        let tau = T::lit(TAU);
        let th = theta - (theta / tau).floor() * tau;
        let h = self.panel_width();
        let panels = self.arc_cum.len() - 1;
        let p = ((th / h).floor().to_usize().unwrap_or(0)).min(panels - 1);
        let a = h * T::from_usize_lossy(p);
        self.arc_cum[p] + self.gauss.integrate(a, th, |t| self.eval(t).speed())
    }

    fn theta_at_arc(&self, s: T) -> T {
        let per = self.perimeter();
        let s = s - (s / per).floor() * per;
        let idx = self.arc_cum.partition_point(|&c| c <= s);
        let p = idx.saturating_sub(1).min(self.arc_cum.len() - 2);
        let h = self.panel_width();
        let (c0, c1) = (self.arc_cum[p], self.arc_cum[p + 1]);
        let mut theta = h * (T::from_usize_lossy(p) + (s - c0) / (c1 - c0));
        for _ in 0..40 {
            let f = self.arc_length(theta) - s;
            let step = f / self.eval(theta).speed();
            theta -= step;
            if step.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        theta
    }
}

#[derive(Debug, Clone)]
enum Shape<T> {
    UnitDisk,
    Curve(FourierCurve<T>),
}

/// The head domain `Ω_h`: a simply connected region with a smooth boundary.
#[derive(Debug, Clone)]
pub struct HeadDomain<T> {
    shape: Shape<T>,
    area: T,
    perimeter: T,
    centroid: Point<T>,
    issues: Vec<Violation>,
}

impl<T: Real> HeadDomain<T> {
    pub fn unit_disk() -> Self {
        Self {
            shape: Shape::UnitDisk,
            area: T::PI(),
            perimeter: T::TAU(),
            centroid: Point::origin(),
            issues: Vec::new(),
        }
    }

    /// Builds a head from boundary samples, uniformly spaced in some parameter.
    /// Clockwise input is reversed; a repeated closing point is dropped.
    /// Shape problems (self-intersection, too few samples, …) are recorded and
    /// surface through validation; only unusable input is an error.
    pub fn from_points(points: &[Point<T>]) -> Result<Self> {
        let mut pts: Vec<Point<f64>> = points.iter().map(|p| p.cast()).collect();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "curve samples must be finite".into(),
            ));
        }
        if pts.len() >= 2 && pts[0].dist(pts[pts.len() - 1]) < 1e-14 {
            pts.pop();
        }
        if pts.len() < 8 {
            return Err(Error::InvalidArgument(format!(
                "curve needs at least 8 samples, got {}",
                pts.len()
            )));
        }
        let signed_area: f64 = (0..pts.len())
            .map(|i| pts[i].cross(pts[(i + 1) % pts.len()]))
            .sum::<f64>()
            * 0.5;
        if signed_area.abs() < 1e-300 {
            return Err(Error::InvalidArgument("curve encloses no area".into()));
        }
        if signed_area < 0.0 {
            pts.reverse();
        }
        let curve = FourierCurve::<T>::from_samples(&pts);
        let perimeter = curve.perimeter();
        // area and centroid by Green's theorem on the same Gauss panels
        let h = curve.panel_width();
        let panels = curve.arc_cum.len() - 1;
        let (mut area, mut mx, mut my) = (T::zero(), T::zero(), T::zero());
        for p in 0..panels {
            let a = h * T::from_usize_lossy(p);
            area += curve.gauss.integrate(a, a + h, |t| {
                let c = curve.eval(t);
                c.point.cross(c.d1)
            });
            mx += curve.gauss.integrate(a, a + h, |t| {
                let c = curve.eval(t);
                c.point.x * c.point.x * c.d1.y
            });
            my += curve.gauss.integrate(a, a + h, |t| {
                let c = curve.eval(t);
                c.point.y * c.point.y * c.d1.x
            });
        }
        area *= T::lit(0.5);
        let centroid = Point::new(mx / (area + area), -my / (area + area));
        let mut head = Self {
            shape: Shape::Curve(curve),
            area,
            perimeter,
            centroid,
            issues: Vec::new(),
        };
        head.issues = head.shape_issues();
        Ok(head)
    }

    /// Ellipse with semi-axes `a`, `b` centred at the origin, `m` samples.
    pub fn ellipse(a: T, b: T, m: usize) -> Result<Self> {
        let pts: Vec<Point<T>> = (0..m)
            .map(|j| {
                let t = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                Point::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::from_points(&pts)
    }

    /// Star-shaped curve `r(t) = r0 (1 + amp cos(lobes·t))`.
    pub fn star(r0: T, amp: T, lobes: usize, m: usize) -> Result<Self> {
        let pts: Vec<Point<T>> = (0..m)
            .map(|j| {
                let t = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                let r = r0 * (T::one() + amp * (T::from_usize_lossy(lobes) * t).cos());
                Point::from_polar(r, t)
            })
            .collect();
        Self::from_points(&pts)
    }

    /// Disk of radius `r` centred at `center`, represented as a sampled curve.
    pub fn circle_curve(center: Point<T>, r: T, m: usize) -> Result<Self> {
        let pts: Vec<Point<T>> = (0..m)
            .map(|j| {
                let t = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                center + Point::from_polar(r, t)
            })
            .collect();
        Self::from_points(&pts)
    }

    /// The classical kite `(cos t + 0.65 cos 2t − 0.65, 1.5 sin t)`.
    pub fn kite(m: usize) -> Result<Self> {
        let pts: Vec<Point<T>> = (0..m)
            .map(|j| {
                let t = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                let a = T::lit(0.65);
                Point::new(t.cos() + a * (t + t).cos() - a, T::lit(1.5) * t.sin())
            })
            .collect();
        Self::from_points(&pts)
    }

    pub fn kind(&self) -> HeadKind {
        match self.shape {
            Shape::UnitDisk => HeadKind::UnitDisk,
            Shape::Curve(_) => HeadKind::Curve,
        }
    }

    pub fn is_unit_disk(&self) -> bool {
        matches!(self.shape, Shape::UnitDisk)
    }

    /// Number of input samples (0 for the analytic unit disk).
    pub fn sample_count(&self) -> usize {
        match &self.shape {
            Shape::UnitDisk => 0,
            Shape::Curve(c) => c.samples,
        }
    }

    /// `|Ω_h|`.
    pub fn area(&self) -> T {
        self.area
    }

    /// `|∂Ω_h|`.
    pub fn perimeter(&self) -> T {
        self.perimeter
    }

    pub fn centroid(&self) -> Point<T> {
        self.centroid
    }

    pub fn sample(&self, theta: T) -> CurveSample<T> {
        match &self.shape {
            Shape::UnitDisk => {
                let (s, c) = theta.sin_cos();
                CurveSample {
                    point: Point::new(c, s),
                    d1: Point::new(-s, c),
                    d2: Point::new(-c, -s),
                }
            }
            Shape::Curve(curve) => curve.eval(theta),
        }
    }

    pub fn point(&self, theta: T) -> Point<T> {
        self.sample(theta).point
    }

    pub fn normal(&self, theta: T) -> Point<T> {
        self.sample(theta).normal()
    }

    /// `point(s) − point(t)`, accurate when `s` and `t` nearly coincide.
    pub fn chord(&self, t: T, s: T) -> Point<T> {
        match &self.shape {
            Shape::UnitDisk => {
                let half = T::lit(0.5);
                let (sm, cm) = ((s + t) * half).sin_cos();
                let sd = ((s - t) * half).sin();
                Point::new(-(sm * sd + sm * sd), cm * sd + cm * sd)
            }
            Shape::Curve(c) => c.chord(t, s),
        }
    }

    /// Nearest boundary parameter to `x` and the distance to it.
    pub fn locate(&self, x: Point<T>) -> (T, T) {
        if self.is_unit_disk() {
            let th = x.y.atan2(x.x);
            return (th, (T::one() - x.norm()).abs());
        }
        let n = 512;
        let h = T::TAU() / T::from_usize_lossy(n);
        let mut best = (T::zero(), T::infinity());
        for k in 0..n {
            let th = h * T::from_usize_lossy(k);
            let d = self.point(th).dist(x);
            if d < best.1 {
                best = (th, d);
            }
        }
        let mut th = best.0;
        for _ in 0..20 {
            let c = self.sample(th);
            let r = c.point - x;
            let f = r.dot(c.d1);
            let fp = c.d1.norm_sq() + r.dot(c.d2);
            if fp <= T::zero() {
                break;
            }
            let step = f / fp;
            let step = step.max(-h).min(h);
            th -= step;
            if step.abs() < T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let d = self.point(th).dist(x);
        if d < best.1 {
            (th, d)
        } else {
            best
        }
    }

    /// Arc length from parameter 0 to `theta` (taken modulo the period).
    pub fn arc_length(&self, theta: T) -> T {
        match &self.shape {
            Shape::UnitDisk => {
                let tau = T::TAU();
                theta - (theta / tau).floor() * tau
            }
            Shape::Curve(c) => c.arc_length(theta),
        }
    }

    /// Curve parameter at arc length `s` (taken modulo the perimeter).
    pub fn theta_at_arc(&self, s: T) -> T {
        match &self.shape {
            Shape::UnitDisk => s,
            Shape::Curve(c) => c.theta_at_arc(s),
        }
    }

    pub fn boundary_point_at_arc(&self, s: T) -> BoundaryPoint<T> {
        BoundaryPoint::new(self.theta_at_arc(s))
    }

    pub fn point_at_arc(&self, s: T) -> Point<T> {
        self.point(self.theta_at_arc(s))
    }

    /// Shortest distance along the boundary between two arc positions.
    pub fn arc_distance(&self, s1: T, s2: T) -> T {
        let p = self.perimeter;
        let d = (s1 - s2).abs() % p;
        d.min(p - d)
    }

    /// Closed polyline with `n` vertices, equally spaced in arc length.
    pub fn polyline(&self, n: usize) -> Vec<Point<T>> {
        let h = self.perimeter / T::from_usize_lossy(n);
        (0..n)
            .map(|k| self.point_at_arc(h * T::from_usize_lossy(k)))
            .collect()
    }

    /// Winding-number test against a fine polyline.
    pub fn contains(&self, p: Point<T>) -> bool {
        match &self.shape {
            Shape::UnitDisk => p.norm_sq() < T::one(),
            Shape::Curve(_) => point_in_polygon(&self.polyline(2048), p),
        }
    }

    /// Shape problems found at construction; empty for a valid head.
    pub fn issues(&self) -> &[Violation] {
        &self.issues
    }

    fn shape_issues(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let Shape::Curve(curve) = &self.shape else {
            return out;
        };
        if curve.samples < MIN_CURVE_SAMPLES {
            out.push(Violation::TooFewSamples {
                got: curve.samples,
                need: MIN_CURVE_SAMPLES,
            });
        }
        let scale = self.perimeter.as_f64();
        let gap = self.point(T::zero()).dist(self.point(T::TAU())).as_f64();
        if gap > 1e-12 * scale.max(1.0) {
            out.push(Violation::HeadNotClosed { gap });
        }
        // simple: pairwise non-adjacent segment tests on a polyline in θ
        let poly: Vec<Point<f64>> = (0..SIMPLE_POLYLINE)
            .map(|k| {
                self.point(T::lit(TAU * k as f64 / SIMPLE_POLYLINE as f64))
                    .cast()
            })
            .collect();
        let n = poly.len();
        'outer: for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (poly[j], poly[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    out.push(Violation::HeadSelfIntersecting);
                    break 'outer;
                }
            }
        }
        // discrete curvature from second divided differences
        let m = CHECK_POLYLINE;
        let pts: Vec<Point<f64>> = (0..m)
            .map(|k| self.point(T::lit(TAU * k as f64 / m as f64)).cast())
            .collect();
        let h = TAU / m as f64;
        let kappa: Vec<f64> = (0..m)
            .map(|k| {
                let (pm, p0, pp) = (pts[(k + m - 1) % m], pts[k], pts[(k + 1) % m]);
                let d1 = (pp - pm) * (0.5 / h);
                let d2 = (pp - p0 * 2.0 + pm) * (1.0 / (h * h));
                d1.cross(d2) / d1.norm().powi(3)
            })
            .collect();
        let kmax = kappa.iter().fold(0.0f64, |a, k| a.max(k.abs()));
        let jump = (0..m).fold(0.0f64, |a, k| a.max((kappa[(k + 1) % m] - kappa[k]).abs()));
        if !kmax.is_finite() || jump > 0.25 * kmax.max(1.0) {
            out.push(Violation::CurvatureNotSmooth {
                max_curvature: kmax,
                max_jump: jump,
            });
        }
        // area/perimeter against an independent trapezoid route
        let nt = 4096;
        let (mut area, mut per) = (0.0f64, 0.0f64);
        for k in 0..nt {
            let c = curve.eval(T::lit(TAU * k as f64 / nt as f64));
            area += c.point.cross(c.d1).as_f64();
            per += c.speed().as_f64();
        }
        area *= 0.5 * TAU / nt as f64;
        per *= TAU / nt as f64;
        let rel_a = (area - self.area.as_f64()).abs() / area.abs();
        let rel_p = (per - self.perimeter.as_f64()).abs() / per;
        if rel_a > 1e-8 || rel_p > 1e-8 {
            out.push(Violation::MeasureMismatch {
                area_rel: rel_a,
                perimeter_rel: rel_p,
            });
        }
        out
    }
}

/// Proper or touching intersection of segments `ab` and `cd`.
pub fn segments_intersect<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    let on = |p: Point<T>, q: Point<T>, r: Point<T>, o: T| {
        o == z
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Even–odd point-in-polygon test.
pub fn point_in_polygon<T: Real>(poly: &[Point<T>], p: Point<T>) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
