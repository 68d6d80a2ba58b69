use std::f64::consts::FRAC_PI_2;
use std::process::{Command, Output};

use nep_cli::fit::{fit_series, read_series};
use nep_cli::tables::{self, Which, TABLE_FIT};
use nep_core::asymptotics::mfpt_two;
use nep_core::neumann::NeumannKernel;
use nep_core::Point;

fn nep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nep"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn eval_round_trips_bit_exact() {
    let text = stdout(&nep(&["eval", "--at", "0,0", "--at", "0.3,-0.2"]));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let spec = tables::default_spec();
    let kernel = NeumannKernel::exact_disk();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for (row, p) in rows
        .iter()
        .zip([Point::new(0.0, 0.0), Point::new(0.3, -0.2)])
    {
        assert_eq!(&row[0], "asymptotic");
        let parsed: f64 = row[3].parse().unwrap();
        assert_eq!(parsed, mfpt_two(&spec, &kernel, p).unwrap());
    }
    assert!(rows[0][3].starts_with("108.8224"));

    let json = stdout(&nep(&[
        "eval",
        "--method",
        "all",
        "--at",
        "0,0",
        "--walkers",
        "200",
        "--format",
        "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let values: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    assert!((values[0] - values[1]).abs() / values[1] < 1e-3);
    let stderr = v[2]["stderr"].as_f64().unwrap();
    assert!((values[2] - values[0]).abs() < 4.0 * stderr);
    assert!(v[1]["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn guard_zone_is_a_validation_error() {
    let out = nep(&["eval", "--at", "0.995,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too close to window"));
    assert_eq!(nep(&["eval", "--at", "nonsense"]).status.code(), Some(2));
}

#[test]
fn tables_at_five_decimals() {
    let text = stdout(&nep(&["table", "l", "--precision", "table"]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L1,L2,u_asym,u_bie,rel_err,u_ref"));
    assert!(text.contains("1,1.5,97.89568,"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2], cols[5], "{line}");
    }
    let text = stdout(&nep(&["table", "eps", "--precision", "table"]));
    assert!(text.contains("0.013,0.013,84.51055,"));
    let text = stdout(&nep(&["table", "fit", "--precision", "table"]));
    assert!(text.contains("0.04,2,43.35949,"));
}

#[test]
fn table_rows_are_deterministic() {
    let a = tables::compute(Which::Eps, 64, None).unwrap();
    let b = tables::compute(Which::Eps, 64, None).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.u_mc.is_none() && r.rel_err < 1e-3));
}

#[test]
fn fits() {
    let asym: Vec<(f64, f64)> = TABLE_FIT
        .iter()
        .map(|r| (r.p1, tables::asymptotic(Which::Fit, r.p1, r.p2).unwrap()))
        .collect();
    let fit = fit_series(&asym).unwrap();
    assert!((fit.a - FRAC_PI_2).abs() < 1e-10);
    assert!((fit.b + 0.5).abs() < 1e-10);
    assert!((fit.c - (3.0 - 0.75 * 2f64.ln())).abs() < 1e-10);
    assert!((fit.eval(0.05) - asym[5].1).abs() < 1e-10);

    let published: Vec<(f64, f64)> = TABLE_FIT.iter().map(|r| (r.p1, r.u_composite)).collect();
    let fit = fit_series(&published).unwrap();
    assert!((fit.a - 1.569).abs() < 1e-3);
    assert!((fit.a - FRAC_PI_2).abs() / FRAC_PI_2 < 2e-3);

    let three = [(0.1, 1.0), (0.2, 2.0), (0.3, 3.0), (0.3, 3.1)];
    assert!(matches!(
        fit_series(&three),
        Err(nep_core::Error::Singular { .. })
    ));
    assert!(fit_series(&[(0.0, 1.0), (0.1, 1.0), (0.2, 1.0), (0.3, 1.0)]).is_err());
}

#[test]
fn fit_command_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut body = String::from("eps,value\n");
    for r in &TABLE_FIT {
        body.push_str(&format!("{},{}\n", r.p1, r.u));
    }
    std::fs::write(&path, &body).unwrap();
    assert_eq!(read_series(body.as_bytes()).unwrap().len(), 10);
    let json = stdout(&nep(&[
        "fit",
        "--input",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!((v["a"].as_f64().unwrap() - FRAC_PI_2).abs() < 1e-4);

    std::fs::write(&path, "eps,value\n0.1,1\n0.1,2\n").unwrap();
    assert_eq!(
        nep(&["fit", "--input", path.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    assert!(read_series("x,y\n1,2\n".as_bytes()).is_err());
}

#[test]
fn density_dump_and_monte_carlo_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let dens = dir.path().join("phi.csv");
    stdout(&nep(&[
        "density-dump",
        "--resolution",
        "32",
        "--out",
        dens.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&dens).unwrap();
    assert_eq!(text.lines().next(), Some("window_index,t,phi"));
    assert_eq!(text.lines().count(), 1 + 2 * 32);

    let problem = dir.path().join("p.json");
    std::fs::write(
        &problem,
        r#"{"head":{"kind":"unit-disk"},"necks":[{"angle_or_s":0.0,"epsilon":0.1,"length":1.0},{"angle_or_s":1.5707963267948966,"epsilon":0.1,"length":1.0}]}"#,
    )
    .unwrap();
    let hist = dir.path().join("h.csv");
    let json = stdout(&nep(&[
        "mc",
        "--problem",
        problem.to_str().unwrap(),
        "--walkers",
        "200",
        "--histogram",
        hist.to_str().unwrap(),
        "--bins",
        "8",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n"].as_u64(), Some(200));
    assert!(v["mean"].as_f64().unwrap() > 0.0);
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 9);

    let out = nep(&["validate", "--problem", problem.to_str().unwrap()]);
    assert!(stdout(&out).starts_with("ok"));
    assert_eq!(
        nep(&["validate", "--problem", "/does/not/exist.json"])
            .status
            .code(),
        Some(2)
    );
}
