//! Reflected Brownian motion in the composite head + neck domain.
//!
//! The domain is a single simple polygon: the head boundary as a fine
//! polyline, with every window chord replaced by the three outer sides of its
//! neck rectangle. The far side of each neck absorbs; every other edge
//! reflects specularly. Walkers take Euler steps of variance `2 dt` per
//! coordinate (unit diffusivity, matching `Δu = −1`).
//!
//! Far from the boundary `k` steps are drawn at once as a single Gaussian of
//! variance `2k dt`, with `k = ⌊d²/(128 dt)⌋` for a guaranteed clearance `d`.
//! The endpoint law is exact; only paths that would touch the boundary and
//! come back within the `k` steps are lost, with probability below `e^{-32}`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, segments_intersect, ProblemSpec};
use crate::linalg::{least_squares, Matrix};
use crate::scalar::{Point, Real};

type P = Point<f64>;

/// Head polyline resolution.
pub const HEAD_SEGMENTS: usize = 4096;
pub const MIN_WALKERS: usize = 100;
/// Censoring time as a multiple of the crude expected exit time.
pub const BUDGET_FACTOR: f64 = 10.0;
const SUPER_STEP_DIVISOR: f64 = 128.0;
const GRID_CELLS: usize = 512;
const MAX_REFLECTIONS: usize = 64;
const NUDGE: f64 = 1e-12;
/// Cell-centre distances below this are computed exactly.
const EXACT_BAND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Reflecting,
    /// Far end of neck `i`.
    Absorbing(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub a: P,
    pub b: P,
    pub kind: EdgeKind,
    /// Unit normal pointing into the domain.
    pub inward: P,
}

/// One neck: the rectangle on the window chord `base`, extruded along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeckRect {
    pub base: [[f64; 2]; 2],
    /// Unit outward direction.
    pub axis: [f64; 2],
    pub length: f64,
}

impl NeckRect {
    fn a(&self) -> P {
        Point::new(self.base[0][0], self.base[0][1])
    }

    fn b(&self) -> P {
        Point::new(self.base[1][0], self.base[1][1])
    }

    fn axis(&self) -> P {
        Point::new(self.axis[0], self.axis[1])
    }

    /// Point on the neck axis at distance `x` from the window.
    pub fn axis_point(&self, x: f64) -> P {
        (self.a() + self.b()).scale(0.5) + self.axis().scale(x)
    }

    pub fn contains(&self, p: P) -> bool {
        let (a, b) = (self.a(), self.b());
        let along = (b - a).normalized();
        let w = (b - a).norm();
        let r = p - a;
        let s = r.dot(along);
        let h = r.dot(self.axis());
        s > 0.0 && s < w && h > 0.0 && h < self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellState {
    Inside,
    Outside,
    Boundary,
}

/// Uniform bucket grid over the polygon's bounding box.
#[derive(Debug, Clone)]
struct Grid {
    origin: P,
    h: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    edges: Vec<u32>,
    state: Vec<CellState>,
    /// Distance from the cell centre to the boundary (a lower bound beyond
    /// the exact band).
    clearance: Vec<f64>,
}

fn segment_distance(p: P, a: P, b: P) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let s = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = p - (a + ab.scale(s));
    (d.x * d.x + d.y * d.y).sqrt()
}

impl Grid {
    fn build(edges: &[Edge]) -> Self {
        let (mut lo, mut hi) = (
            Point::new(f64::MAX, f64::MAX),
            Point::new(f64::MIN, f64::MIN),
        );
        for e in edges {
            for p in [e.a, e.b] {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let h = (hi.x - lo.x).max(hi.y - lo.y) / GRID_CELLS as f64;
        let origin = lo - Point::new(2.0 * h, 2.0 * h);
        let nx = ((hi.x - origin.x) / h).ceil() as usize + 2;
        let ny = ((hi.y - origin.y) / h).ceil() as usize + 2;

        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        for (k, e) in edges.iter().enumerate() {
            let (i0, j0) = Self::coords(origin, h, Point::new(e.a.x.min(e.b.x), e.a.y.min(e.b.y)));
            let (i1, j1) = Self::coords(origin, h, Point::new(e.a.x.max(e.b.x), e.a.y.max(e.b.y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = Point::new(
                        origin.x + (i as f64 + 0.5) * h,
                        origin.y + (j as f64 + 0.5) * h,
                    );
                    if segment_distance(c, e.a, e.b) <= h * std::f64::consts::FRAC_1_SQRT_2 + 1e-12
                    {
                        lists[j * nx + i].push(k as u32);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(nx * ny + 1);
        let mut flat = Vec::new();
        offsets.push(0);
        for l in &lists {
            flat.extend_from_slice(l);
            offsets.push(flat.len() as u32);
        }

        // scanline parity at cell centres
        let mut state = vec![CellState::Outside; nx * ny];
        let mut xs = Vec::new();
        for j in 0..ny {
            let y = origin.y + (j as f64 + 0.5) * h;
            xs.clear();
            for e in edges {
                if (e.a.y <= y) != (e.b.y <= y) {
                    xs.push(e.a.x + (y - e.a.y) / (e.b.y - e.a.y) * (e.b.x - e.a.x));
                }
            }
            xs.sort_by(|a, b| a.total_cmp(b));
            for i in 0..nx {
                let x = origin.x + (i as f64 + 0.5) * h;
                let crossings = xs.partition_point(|&v| v < x);
                if crossings % 2 == 1 {
                    state[j * nx + i] = CellState::Inside;
                }
            }
        }
        for (c, l) in lists.iter().enumerate() {
            if !l.is_empty() {
                state[c] = CellState::Boundary;
            }
        }

        // nearest-edge propagation, then a one-cell safety margin
        let centre = |c: usize| {
            Point::new(
                origin.x + ((c % nx) as f64 + 0.5) * h,
                origin.y + ((c / nx) as f64 + 0.5) * h,
            )
        };
        let mut nearest: Vec<Option<u32>> = vec![None; nx * ny];
        let mut dist = vec![f64::INFINITY; nx * ny];
        for (c, l) in lists.iter().enumerate() {
            for &k in l {
                let e = &edges[k as usize];
                let d = segment_distance(centre(c), e.a, e.b);
                if d < dist[c] {
                    dist[c] = d;
                    nearest[c] = Some(k);
                }
            }
        }
        let fwd: [(isize, isize); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
        let bwd: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
        for _ in 0..2 {
            for pass in 0..2 {
                let offs = if pass == 0 { &fwd } else { &bwd };
                let order: Box<dyn Iterator<Item = usize>> = if pass == 0 {
                    Box::new(0..nx * ny)
                } else {
                    Box::new((0..nx * ny).rev())
                };
                for c in order {
                    let (i, j) = ((c % nx) as isize, (c / nx) as isize);
                    for &(di, dj) in offs {
                        let (ni, nj) = (i + di, j + dj);
                        if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
                            continue;
                        }
                        if let Some(k) = nearest[nj as usize * nx + ni as usize] {
                            let e = &edges[k as usize];
                            let d = segment_distance(centre(c), e.a, e.b);
                            if d < dist[c] {
                                dist[c] = d;
                                nearest[c] = Some(k);
                            }
                        }
                    }
                }
            }
        }
        // Near the boundary, confirm the propagated distance by scanning every
        // cell the nearest point could lie in; farther out keep a one-cell margin.
        let clearance = (0..nx * ny)
            .map(|c| {
                if state[c] == CellState::Outside || !dist[c].is_finite() {
                    return 0.0;
                }
                if dist[c] >= EXACT_BAND {
                    return dist[c] - h;
                }
                let reach = (dist[c] / h + 1.0).ceil() as isize;
                let (ci, cj) = ((c % nx) as isize, (c / nx) as isize);
                let mut best = dist[c];
                for nj in (cj - reach).max(0)..=(cj + reach).min(ny as isize - 1) {
                    for ni in (ci - reach).max(0)..=(ci + reach).min(nx as isize - 1) {
                        for &k in &lists[nj as usize * nx + ni as usize] {
                            let e = &edges[k as usize];
                            best = best.min(segment_distance(centre(c), e.a, e.b));
                        }
                    }
                }
                best
            })
            .collect();
        Self {
            origin,
            h,
            nx,
            ny,
            offsets,
            edges: flat,
            state,
            clearance,
        }
    }

    fn coords(origin: P, h: f64, p: P) -> (usize, usize) {
        // truncation is floor once clamped at zero
        let i = ((p.x - origin.x) / h).max(0.0) as usize;
        let j = ((p.y - origin.y) / h).max(0.0) as usize;
        (i, j)
    }

    #[inline]
    fn cell(&self, p: P) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.h;
        let fy = (p.y - self.origin.y) / self.h;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some(j * self.nx + i)
    }

    #[inline]
    fn cell_edges(&self, c: usize) -> &[u32] {
        &self.edges[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }
}

enum Step {
    Moved(P),
    Absorbed,
}

/// Polygonal head with rectangular necks.
#[derive(Debug, Clone)]
pub struct CompositeGeometry {
    edges: Vec<Edge>,
    vertices: Vec<P>,
    pub necks: Vec<NeckRect>,
    head_area: f64,
    grid: Grid,
}

impl CompositeGeometry {
    pub fn new<T: Real>(spec: &ProblemSpec<T>) -> Result<Self> {
        Self::with_segments(spec, HEAD_SEGMENTS)
    }

    /// Builds the composite polygon with `segments` head edges.
    pub fn with_segments<T: Real>(spec: &ProblemSpec<T>, segments: usize) -> Result<Self> {
        spec.ensure_valid()?;
        let spec = spec.cast::<f64>()?;
        let head = &spec.head;
        let per = head.perimeter();
        let wrap = |s: f64| s - (s / per).floor() * per;

        // start the traversal in the middle of the widest gap between windows
        let mut spans: Vec<(f64, usize)> = spec
            .necks
            .iter()
            .enumerate()
            .map(|(i, n)| (wrap(n.s - n.epsilon), i))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut start = 0.0;
        let mut widest = -1.0;
        for k in 0..spans.len() {
            let i = spans[k].1;
            let end = wrap(spec.necks[i].s + spec.necks[i].epsilon);
            let next = spans[(k + 1) % spans.len()].0;
            let gap = wrap(next - end);
            if gap > widest {
                widest = gap;
                start = wrap(end + 0.5 * gap);
            }
        }
        let rel = |s: f64| wrap(s - start);
        let mut order: Vec<usize> = (0..spec.neck_count()).collect();
        order.sort_by(|&a, &b| rel(spec.necks[a].s).total_cmp(&rel(spec.necks[b].s)));

        let mut vertices: Vec<P> = Vec::new();
        let mut kinds: Vec<EdgeKind> = Vec::new();
        let mut from_neck: Vec<bool> = Vec::new();
        let mut necks = vec![
            NeckRect {
                base: [[0.0; 2]; 2],
                axis: [0.0; 2],
                length: 0.0
            };
            spec.neck_count()
        ];
        let ds = per / segments as f64;
        let mut next_neck = 0;
        for k in 0..segments {
            let u = k as f64 * ds;
            while next_neck < order.len()
                && rel(spec.necks[order[next_neck]].s) - spec.necks[order[next_neck]].epsilon <= u
            {
                let i = order[next_neck];
                let n = spec.necks[i];
                let a = head.point_at_arc(n.s - n.epsilon);
                let b = head.point_at_arc(n.s + n.epsilon);
                let chord = b - a;
                let axis = Point::new(chord.y, -chord.x).normalized();
                let far = axis.scale(n.length);
                vertices.extend([a, a + far, b + far, b]);
                kinds.extend([
                    EdgeKind::Reflecting,
                    EdgeKind::Absorbing(i),
                    EdgeKind::Reflecting,
                    EdgeKind::Reflecting,
                ]);
                from_neck.extend([true, true, true, false]);
                necks[i] = NeckRect {
                    base: [[a.x, a.y], [b.x, b.y]],
                    axis: [axis.x, axis.y],
                    length: n.length,
                };
                next_neck += 1;
            }
            let inside_window = order.iter().any(|&i| {
                let n = spec.necks[i];
                (rel(n.s) - u).abs() <= n.epsilon
            });
            if !inside_window {
                vertices.push(head.point_at_arc(start + u));
                kinds.push(EdgeKind::Reflecting);
                from_neck.push(false);
            }
        }
        if next_neck < order.len() {
            return Err(Error::InvalidArgument(format!(
                "window {} could not be placed on the head polyline",
                order[next_neck]
            )));
        }

        let m = vertices.len();
        let edges: Vec<Edge> = (0..m)
            .map(|k| {
                let (a, b) = (vertices[k], vertices[(k + 1) % m]);
                let d = (b - a).normalized();
                Edge {
                    a,
                    b,
                    kind: kinds[k],
                    inward: Point::new(-d.y, d.x),
                }
            })
            .collect();
        check_simple(&edges, &from_neck)?;
        let grid = Grid::build(&edges);
        Ok(Self {
            edges,
            vertices,
            necks,
            head_area: head.area(),
            grid,
        })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn head_area(&self) -> f64 {
        self.head_area
    }

    pub fn contains(&self, p: P) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    /// Index of the neck whose open rectangle contains `p`.
    pub fn in_neck(&self, p: P) -> Option<usize> {
        self.necks.iter().position(|n| n.contains(p))
    }

    /// Exact distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: P) -> f64 {
        self.edges
            .iter()
            .map(|e| segment_distance(p, e.a, e.b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lower bound on the distance from `p` to the boundary.
    #[inline]
    fn clearance(&self, p: P) -> f64 {
        let g = &self.grid;
        let fx = (p.x - g.origin.x) / g.h;
        let fy = (p.y - g.origin.y) / g.h;
        if !(fx >= 0.0 && fy >= 0.0) {
            return 0.0;
        }
        let (i, j) = (fx as usize, fy as usize);
        if i >= g.nx || j >= g.ny {
            return 0.0;
        }
        let (dx, dy) = ((fx - i as f64 - 0.5) * g.h, (fy - j as f64 - 0.5) * g.h);
        (g.clearance[j * g.nx + i] - (dx * dx + dy * dy).sqrt()).max(0.0)
    }

    /// Moves from `p` by `d`, reflecting off walls.
    fn advance(&self, p: P, d: P) -> Step {
        let mut from = p;
        let mut disp = d;
        let mut skip = u32::MAX;
        for _ in 0..MAX_REFLECTIONS {
            let to = from + disp;
            match self.first_hit(from, to, skip) {
                None => {
                    return match self.grid.cell(to).map(|c| self.grid.state[c]) {
                        Some(CellState::Inside) | Some(CellState::Boundary) => Step::Moved(to),
                        // left the polygon through a numerical crack: reject the step
                        _ => Step::Moved(p),
                    };
                }
                Some((k, hit)) => {
                    let e = &self.edges[k as usize];
                    if let EdgeKind::Absorbing(_) = e.kind {
                        return Step::Absorbed;
                    }
                    let n = e.inward;
                    let rest = to - hit;
                    disp = rest - n.scale(2.0 * rest.dot(n));
                    from = hit + n.scale(NUDGE);
                    skip = k;
                }
            }
        }
        Step::Moved(from)
    }

    /// First edge crossed by the segment `from → to`, excluding `skip`.
    fn first_hit(&self, from: P, to: P, skip: u32) -> Option<(u32, P)> {
        let g = &self.grid;
        let (i0, j0) = Grid::coords(
            g.origin,
            g.h,
            Point::new(from.x.min(to.x), from.y.min(to.y)),
        );
        let (i1, j1) = Grid::coords(
            g.origin,
            g.h,
            Point::new(from.x.max(to.x), from.y.max(to.y)),
        );
        let (i1, j1) = (i1.min(g.nx - 1), j1.min(g.ny - 1));
        let r = to - from;
        let mut best: Option<(u32, f64)> = None;
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &k in g.cell_edges(j * g.nx + i) {
                    if k == skip {
                        continue;
                    }
                    let e = &self.edges[k as usize];
                    let s = e.b - e.a;
                    let denom = r.cross(s);
                    if denom == 0.0 {
                        continue;
                    }
                    let q = e.a - from;
                    let t = q.cross(s) / denom;
                    let u = q.cross(r) / denom;
                    if (0.0..=1.0).contains(&t)
                        && (0.0..=1.0).contains(&u)
                        && best.is_none_or(|(_, bt)| t < bt)
                    {
                        best = Some((k, t));
                    }
                }
            }
        }
        best.map(|(k, t)| (k, from + r.scale(t)))
    }

    /// First passage time of one walker, or `None` if censored at `t_max`.
    fn walk<R: Rng>(&self, x0: P, dt: f64, t_max: f64, rng: &mut R) -> Option<f64> {
        let mut p = x0;
        let mut t = 0.0;
        let base = (2.0 * dt).sqrt();
        while t < t_max {
            let c = self.clearance(p);
            let k = (((c * c) / (SUPER_STEP_DIVISOR * dt)) as u64).max(1) as f64;
            let sd = base * k.sqrt();
            let d = Point::new(
                sd * rng.sample::<f64, _>(StandardNormal),
                sd * rng.sample::<f64, _>(StandardNormal),
            );
            t += k * dt;
            if d.norm_sq() < c * c {
                p = p + d;
                continue;
            }
            match self.advance(p, d) {
                Step::Absorbed => return Some(t),
                Step::Moved(q) => p = q,
            }
        }
        None
    }
}

/// Neck sides must not cross any non-adjacent edge.
fn check_simple(edges: &[Edge], from_neck: &[bool]) -> Result<()> {
    let m = edges.len();
    for k in (0..m).filter(|&k| from_neck[k]) {
        for j in 0..m {
            let adjacent = j == k || (j + 1) % m == k || (k + 1) % m == j;
            if !adjacent && segments_intersect(edges[k].a, edges[k].b, edges[j].a, edges[j].b) {
                return Err(Error::InvalidArgument(
                    "a neck rectangle crosses the head boundary or another neck".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Crude exit-time scale used for the censoring budget.
fn expected_time<T: Real>(spec: &ProblemSpec<T>) -> f64 {
    let area = spec.head.area().as_f64();
    let sigma: f64 = spec
        .necks
        .iter()
        .map(|n| (n.epsilon / n.length).as_f64())
        .sum();
    let min_eps = spec
        .necks
        .iter()
        .map(|n| n.epsilon.as_f64())
        .fold(f64::INFINITY, f64::min);
    let max_len = spec
        .necks
        .iter()
        .map(|n| n.length.as_f64())
        .fold(0.0, f64::max);
    area / (2.0 * sigma)
        + area / std::f64::consts::PI * min_eps.ln().abs()
        + 0.5 * max_len * max_len
        + 1.0
}

/// Default step: `min((min ε)²/4, 1e−4)`.
pub fn default_dt<T: Real>(spec: &ProblemSpec<T>) -> f64 {
    let min_eps = spec
        .necks
        .iter()
        .map(|n| n.epsilon.as_f64())
        .fold(f64::INFINITY, f64::min);
    (min_eps * min_eps / 4.0).min(1e-4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkerStats {
    pub mean: f64,
    pub stderr: f64,
    /// Walkers launched.
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
    pub absorbed_fraction: f64,
}

/// Per-walker passage times (`None` for censored walkers) with their summary.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub stats: WalkerStats,
    pub times: Vec<Option<f64>>,
    /// Censoring time.
    pub t_max: f64,
}

impl Simulation {
    pub fn censored(&self) -> usize {
        self.times.iter().filter(|t| t.is_none()).count()
    }

    /// Histogram of absorbed passage times as CSV `bin_lo,bin_hi,count`.
    pub fn write_histogram<W: Write>(&self, mut out: W, bins: usize) -> Result<()> {
        if bins == 0 {
            return Err(Error::InvalidArgument(
                "histogram needs at least one bin".into(),
            ));
        }
        let times: Vec<f64> = self.times.iter().flatten().copied().collect();
        let hi = times.iter().copied().fold(0.0, f64::max);
        let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for t in times {
            counts[((t / width) as usize).min(bins - 1)] += 1;
        }
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (k, c) in counts.iter().enumerate() {
            writeln!(
                out,
                "{:.17e},{:.17e},{}",
                k as f64 * width,
                (k + 1) as f64 * width,
                c
            )?;
        }
        Ok(())
    }
}

fn check_params(
    geometry: &CompositeGeometry,
    min_eps: f64,
    x0: P,
    dt: f64,
    n_walkers: usize,
) -> Result<()> {
    if !(dt > 0.0) || dt > min_eps * min_eps / 4.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "time step must lie in (0, (min eps)^2/4 = {:e}], got {dt:e}",
            min_eps * min_eps / 4.0
        )));
    }
    if n_walkers < MIN_WALKERS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_WALKERS} walkers, got {n_walkers}"
        )));
    }
    if !x0.is_finite() || !geometry.contains(x0) || geometry.boundary_distance(x0) < 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "start point {x0} is not strictly inside the composite domain"
        )));
    }
    Ok(())
}

/// Runs `n_walkers` walkers on a prepared geometry. Walker `k` draws from
/// stream `k` of a ChaCha8 generator seeded with `seed`, so results do not
/// depend on the thread count.
pub fn simulate_on<T: Real>(
    geometry: &CompositeGeometry,
    spec: &ProblemSpec<T>,
    x0: Point<T>,
    dt: f64,
    n_walkers: usize,
    seed: u64,
) -> Result<Simulation> {
    let min_eps = spec
        .necks
        .iter()
        .map(|n| n.epsilon.as_f64())
        .fold(f64::INFINITY, f64::min);
    let x0 = x0.cast::<f64>();
    check_params(geometry, min_eps, x0, dt, n_walkers)?;
    let t_max = BUDGET_FACTOR * expected_time(spec);
    let times: Vec<Option<f64>> = (0..n_walkers)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            geometry.walk(x0, dt, t_max, &mut rng)
        })
        .collect();
    let absorbed: Vec<f64> = times.iter().flatten().copied().collect();
    if absorbed.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "only {} of {n_walkers} walkers were absorbed before t = {t_max:.3e}",
            absorbed.len()
        )));
    }
    let n = absorbed.len() as f64;
    let mean = absorbed.iter().sum::<f64>() / n;
    let var = absorbed
        .iter()
        .map(|t| (t - mean) * (t - mean))
        .sum::<f64>()
        / (n - 1.0);
    let absorbed_fraction = n / n_walkers as f64;
    if absorbed_fraction < 0.999 {
        log::warn!(
            "{} of {n_walkers} walkers hit the step budget ({:.3e} steps)",
            n_walkers - absorbed.len(),
            t_max / dt
        );
    }
    Ok(Simulation {
        stats: WalkerStats {
            mean,
            stderr: (var / n).sqrt(),
            n: n_walkers,
            dt,
            seed,
            absorbed_fraction,
        },
        times,
        t_max,
    })
}

/// Builds the geometry and runs the walkers; see [`simulate_on`].
pub fn simulate<T: Real>(
    spec: &ProblemSpec<T>,
    x0: Point<T>,
    dt: f64,
    n_walkers: usize,
    seed: u64,
) -> Result<WalkerStats> {
    let geometry = CompositeGeometry::new(spec)?;
    Ok(simulate_on(&geometry, spec, x0, dt, n_walkers, seed)?.stats)
}

/// Simulated MFPT along one neck axis with a quadratic fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub neck: usize,
    /// Distances from the window.
    pub positions: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Fitted value at the window.
    pub c_fit: f64,
    /// Fitted coefficient of `x²`; the neck equation predicts `−1/2`.
    pub quadratic: f64,
    /// RMS misfit of the fitted quadratic against the simulated means.
    pub rms_misfit: f64,
}

/// Start points on the neck axis at `x = 0, L/8, …, 7L/8` (window to near
/// the absorbing end); fits `u(x) = a x² + b x + c`. All start points share
/// walker streams, which correlates their errors and sharpens the fit.
pub fn neck_profile_check<T: Real>(
    spec: &ProblemSpec<T>,
    i: usize,
    n_walkers: usize,
    seed: u64,
) -> Result<ProfileRecord> {
    neck_profile_check_with_dt(spec, i, n_walkers, seed, default_dt(spec))
}

/// [`neck_profile_check`] with an explicit time step.
pub fn neck_profile_check_with_dt<T: Real>(
    spec: &ProblemSpec<T>,
    i: usize,
    n_walkers: usize,
    seed: u64,
    dt: f64,
) -> Result<ProfileRecord> {
    let neck = *spec.neck(i)?;
    let geometry = CompositeGeometry::new(spec)?;
    let rect = geometry.necks[i];
    let len = neck.length.as_f64();
    let positions: Vec<f64> = (0..8).map(|k| len * k as f64 / 8.0).collect();
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for &x in &positions {
        let p = rect.axis_point(x);
        let sim = simulate_on(
            &geometry,
            spec,
            Point::new(T::lit(p.x), T::lit(p.y)),
            dt,
            n_walkers,
            seed,
        )?;
        means.push(sim.stats.mean);
        stderrs.push(sim.stats.stderr);
    }
    let worst = means
        .iter()
        .zip(&stderrs)
        .map(|(m, s)| s / m)
        .fold(0.0, f64::max);
    if worst > 0.1 {
        return Err(Error::InsufficientSamples(format!(
            "relative standard error {worst:.3} exceeds 0.1; use more walkers"
        )));
    }
    let rows: Vec<Vec<f64>> = positions.iter().map(|&x| vec![x * x, x, 1.0]).collect();
    let (coef, _) = least_squares(&Matrix::from_rows(&rows), &means)?;
    let rms = (positions
        .iter()
        .zip(&means)
        .map(|(&x, &m)| (coef[0] * x * x + coef[1] * x + coef[2] - m).powi(2))
        .sum::<f64>()
        / positions.len() as f64)
        .sqrt();
    Ok(ProfileRecord {
        neck: i,
        positions,
        means,
        stderrs,
        c_fit: coef[2],
        quadratic: coef[0],
        rms_misfit: rms,
    })
}
