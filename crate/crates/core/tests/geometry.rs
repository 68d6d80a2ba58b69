use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

use nep_core::geometry::{HeadDomain, ProblemFile, Violation};
use nep_core::{NeckSpecF64, Point, ProblemSpecF64};

fn perpendicular(eps: f64) -> ProblemSpecF64 {
    ProblemSpecF64::unit_disk(&[(0.0, eps, 1.0), (FRAC_PI_2, eps, 2.0)])
}

#[test]
fn window_points_on_the_disk() {
    let spec = perpendicular(0.01);
    assert!(
        spec.window_point(0, 0.0)
            .unwrap()
            .dist(Point::new(1.0, 0.0))
            < 1e-15
    );
    let end = spec.window_point(0, 1.0).unwrap();
    assert!(end.dist(Point::new(0.01f64.cos(), 0.01f64.sin())) < 1e-12);
    assert!((spec.chord_distance(0, 1).unwrap() - SQRT_2).abs() < 1e-14);
    for k in 0..50 {
        let t = -1.0 + k as f64 / 25.0;
        let s = FRAC_PI_2 + 0.01 * t;
        assert!(
            spec.window_point(1, t)
                .unwrap()
                .dist(Point::new(s.cos(), s.sin()))
                < 1e-12
        );
    }
    assert!(spec.window_point(2, 0.0).is_err());
    assert!(spec.window_point(0, 1.5).is_err());
}

#[test]
fn window_ends_on_a_curve() {
    let head = HeadDomain::star(1.0, 0.2, 3, 1024).unwrap();
    let per = head.perimeter();
    let spec = ProblemSpecF64::new(head, vec![NeckSpecF64::new(0.3 * per, 0.04, 1.0)]);
    let a = spec.window_param(0, -1.0).unwrap();
    let b = spec.window_param(0, 1.0).unwrap();
    let arc = spec.head.arc_length(b) - spec.head.arc_length(a);
    assert!((arc - 0.08).abs() <= 1e-10 * 0.08, "{arc}");
}

#[test]
fn head_measures() {
    let disk = HeadDomain::<f64>::unit_disk();
    assert!((disk.area() - PI).abs() < 1e-15);
    assert!((disk.perimeter() - TAU).abs() < 1e-15);
    let (a, b) = (2.0, 1.0);
    let ellipse = HeadDomain::ellipse(a, b, 1024).unwrap();
    assert!((ellipse.area() - PI * a * b).abs() <= 1e-8 * PI * a * b);
    // Ramanujan's second approximation is accurate to ~1e-9 here.
    let h: f64 = ((a - b) / (a + b)).powi(2);
    let per = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
    assert!((ellipse.perimeter() - per).abs() <= 1e-8 * per);
    assert!(ellipse.issues().is_empty());
}

#[test]
fn validation_examples() {
    assert!(perpendicular(0.01).validate().passed());

    let same = ProblemSpecF64::unit_disk(&[(0.0, 0.01, 1.0), (0.0, 0.01, 1.0)]);
    let report = same.validate();
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::WindowsOverlap { .. })));

    let fat = ProblemSpecF64::unit_disk(&[(0.0, 0.5, 1.0)]);
    let report = fat.validate();
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::ThinnessViolated { .. })));
    assert!(fat.ensure_valid().unwrap_err().is_validation());

    let close = ProblemSpecF64::unit_disk(&[(0.0, 0.01, 1.0), (0.05, 0.01, 1.0)]);
    assert!(close
        .validate()
        .violations
        .iter()
        .any(|v| matches!(v, Violation::NotWellSeparated { .. })));

    let warn = ProblemSpecF64::unit_disk(&[(0.0, 0.15, 1.0)]);
    let report = warn.validate();
    assert!(report.passed() && !report.warnings.is_empty());

    // Idempotent and side-effect free.
    assert_eq!(same.validate(), same.validate());
}

#[test]
fn problem_file_round_trip() {
    let text = r#"{"head":{"kind":"unit-disk"},"necks":[{"angle_or_s":0.0,"epsilon":0.01,"length":1.0},{"angle_or_s":1.5707963267948966,"epsilon":0.01,"length":2.0}]}"#;
    let file = ProblemFile::parse(text).unwrap();
    let spec: ProblemSpecF64 = file.to_spec().unwrap();
    assert_eq!(spec.neck_count(), 2);
    assert!(spec.head.is_unit_disk());
    assert_eq!(ProblemFile::from_spec(&spec), file);
    assert!(ProblemFile::parse(r#"{"head":{"kind":"unit-disk"},"necks":[],"extra":1}"#).is_err());

    let ellipse = HeadDomain::ellipse(1.5, 1.0, 512).unwrap();
    let spec = ProblemSpecF64::new(ellipse, vec![NeckSpecF64::new(1.0, 0.02, 1.0)]);
    let back: ProblemSpecF64 =
        ProblemFile::parse(&ProblemFile::from_spec(&spec).to_json().unwrap())
            .unwrap()
            .to_spec()
            .unwrap();
    assert!((back.head.area() - spec.head.area()).abs() < 1e-8);
}
