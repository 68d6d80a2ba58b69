use std::f64::consts::{FRAC_PI_2, PI};

use nep_core::asymptotics::mfpt_n;
use nep_core::geometry::HeadDomain;
use nep_core::montecarlo::{
    default_dt, neck_profile_check_with_dt, simulate, simulate_on, CompositeGeometry, EdgeKind,
};
use nep_core::neumann::NeumannKernel;
use nep_core::robin_bie::solve_robin;
use nep_core::{NeckSpecF64, Point, ProblemSpecF64};

const ORIGIN: Point<f64> = Point { x: 0.0, y: 0.0 };

/// Wide, short necks: cheap to simulate.
fn quick() -> ProblemSpecF64 {
    ProblemSpecF64::unit_disk(&[(0.0, 0.1, 1.0), (FRAC_PI_2, 0.1, 1.0)])
}

#[test]
fn neck_rectangles_sit_on_the_window_chords() {
    let head = HeadDomain::ellipse(1.3, 0.9, 1024).unwrap();
    let per = head.perimeter();
    let spec = ProblemSpecF64::new(
        head,
        vec![
            NeckSpecF64::new(0.2 * per, 0.05, 1.5),
            NeckSpecF64::new(0.7 * per, 0.03, 1.0),
        ],
    );
    let g = CompositeGeometry::new(&spec).unwrap();
    for (i, n) in spec.necks.iter().enumerate() {
        let rect = g.necks[i];
        let a = spec.head.point_at_arc(n.s - n.epsilon);
        let b = spec.head.point_at_arc(n.s + n.epsilon);
        assert!(Point::new(rect.base[0][0], rect.base[0][1]).dist(a) < 1e-10);
        assert!(Point::new(rect.base[1][0], rect.base[1][1]).dist(b) < 1e-10);
        let inside_neck = rect.axis_point(0.5 * n.length);
        assert!(g.contains(inside_neck));
        assert_eq!(g.in_neck(inside_neck), Some(i));
        assert!(!g.contains(rect.axis_point(n.length + 0.01)));
    }
    let absorbing = g
        .edges()
        .iter()
        .filter(|e| matches!(e.kind, EdgeKind::Absorbing(_)))
        .count();
    assert_eq!(absorbing, 2);
    assert!(g.contains(spec.head.centroid()));
    assert!(!g.contains(Point::new(2.0, 2.0)));
    assert!((g.head_area() - spec.head.area()).abs() < 1e-12);
}

#[test]
fn deterministic_and_thread_independent() {
    let spec = quick();
    let g = CompositeGeometry::new(&spec).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_on(&g, &spec, ORIGIN, 1e-4, 200, 42).unwrap().stats)
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    assert!(a.mean > 0.0);
    assert_eq!((a.n, a.seed, a.dt), (200, 42, 1e-4));
}

#[test]
fn seeds_agree_statistically() {
    let spec = quick();
    let a = simulate(&spec, ORIGIN, 1e-4, 600, 1).unwrap();
    let b = simulate(&spec, ORIGIN, 1e-4, 600, 2).unwrap();
    assert_ne!(a.mean, b.mean);
    let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 3.0 * combined);
    assert!(a.absorbed_fraction >= 0.999);
}

#[test]
fn agrees_with_robin_model_on_wide_necks() {
    let spec = quick();
    let stats = simulate(&spec, ORIGIN, 1e-4, 1500, 3).unwrap();
    let u_r = solve_robin(&spec, &NeumannKernel::exact_disk(), 64)
        .unwrap()
        .u(ORIGIN)
        .unwrap();
    assert!(
        (stats.mean - u_r).abs() < 4.0 * stats.stderr + 0.03 * u_r,
        "{stats:?} vs {u_r}"
    );
}

#[test]
fn third_neck_shortens_escape() {
    let two = quick();
    let three =
        ProblemSpecF64::unit_disk(&[(0.0, 0.1, 1.0), (FRAC_PI_2, 0.1, 1.0), (PI, 0.1, 1.0)]);
    let a = simulate(&two, ORIGIN, 1e-4, 400, 5).unwrap();
    let b = simulate(&three, ORIGIN, 1e-4, 400, 5).unwrap();
    let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!(a.mean - b.mean > 3.0 * combined, "{a:?} {b:?}");
}

#[test]
fn time_step_bias_is_small() {
    let spec = ProblemSpecF64::unit_disk(&[(0.0, 0.05, 1.0), (FRAC_PI_2, 0.05, 1.0)]);
    let g = CompositeGeometry::new(&spec).unwrap();
    let a = simulate_on(&g, &spec, ORIGIN, 4e-4, 3000, 9).unwrap().stats;
    let b = simulate_on(&g, &spec, ORIGIN, 2e-4, 3000, 9).unwrap().stats;
    assert!(((a.mean - b.mean) / b.mean).abs() < 0.03, "{a:?} {b:?}");
}

#[test]
fn start_next_to_the_absorbing_end() {
    let spec = quick();
    let g = CompositeGeometry::new(&spec).unwrap();
    let p = g.necks[0].axis_point(1.0 - 1e-6);
    let stats = simulate_on(&g, &spec, p, 1e-4, 400, 11).unwrap().stats;
    let centre = simulate_on(&g, &spec, ORIGIN, 1e-4, 100, 11).unwrap().stats;
    assert!(
        stats.mean < 0.05 * centre.mean,
        "{} vs {}",
        stats.mean,
        centre.mean
    );
}

#[test]
fn profile_along_a_neck() {
    let head = HeadDomain::circle_curve(Point::new(0.0, 0.0), 0.3, 1024).unwrap();
    let spec = ProblemSpecF64::new(head.clone(), vec![NeckSpecF64::new(0.0, 0.1, 2.0)]);
    let rec = neck_profile_check_with_dt(&spec, 0, 4000, 17, 1e-3).unwrap();
    assert!((rec.quadratic + 0.5).abs() < 0.05, "{rec:?}");
    let kernel = NeumannKernel::new(&head).unwrap();
    let window = solve_robin(&spec, &kernel, 64)
        .unwrap()
        .u_on_window(0, 0.0)
        .unwrap();
    assert!(
        ((rec.c_fit - window) / window).abs() < 0.1,
        "{} vs {window}",
        rec.c_fit
    );
}

#[test]
fn histogram_output() {
    let spec = quick();
    let g = CompositeGeometry::new(&spec).unwrap();
    let sim = simulate_on(&g, &spec, ORIGIN, 1e-4, 100, 1).unwrap();
    let mut buf = Vec::new();
    sim.write_histogram(&mut buf, 10).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("bin_lo,bin_hi,count"));
    let total: usize = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 100 - sim.censored());
}

#[test]
fn rejects_bad_parameters() {
    let spec = quick();
    assert!(simulate(&spec, ORIGIN, 0.01, 200, 1).is_err());
    assert!(simulate(&spec, ORIGIN, 1e-4, 50, 1).is_err());
    assert!(simulate(&spec, Point::new(0.0, -1.5), 1e-4, 200, 1).is_err());
    let bad = ProblemSpecF64::unit_disk(&[(0.0, 0.1, 0.0), (FRAC_PI_2, 0.1, 1.0)]);
    assert!(simulate(&bad, ORIGIN, 1e-4, 200, 1)
        .unwrap_err()
        .is_validation());
    assert_eq!(default_dt(&spec), 1e-4);
    assert_eq!(
        default_dt(&ProblemSpecF64::unit_disk(&[(0.0, 0.01, 1.0)])),
        2.5e-5
    );
}

#[test]
fn estimate_tracks_the_expansion() {
    // The narrowest configuration the agreement band is stated for.
    let spec = ProblemSpecF64::unit_disk(&[(0.0, 0.03, 2.0), (FRAC_PI_2, 0.03, 2.0)]);
    let stats = simulate(&spec, ORIGIN, 1e-4, 1000, 13).unwrap();
    let u = mfpt_n(&spec, &NeumannKernel::exact_disk(), ORIGIN)
        .unwrap()
        .value;
    assert!(((stats.mean - u) / u).abs() < 0.08, "{stats:?} vs {u}");
}
