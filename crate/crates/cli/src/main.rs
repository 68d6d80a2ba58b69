use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nep_cli::fit::{fit_series, read_series, Fit};
use nep_cli::format::Precision;
use nep_cli::tables::{self, McOptions, Which};
use nep_core::asymptotics::mfpt_n;
use nep_core::geometry::ProblemFile;
use nep_core::montecarlo::{default_dt, simulate_on, CompositeGeometry};
use nep_core::neumann::NeumannKernel;
use nep_core::robin_bie::{solve_robin, DEFAULT_RESOLUTION};
use nep_core::{Point, ProblemSpecF64};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "nep",
    version,
    about = "Mean first passage time through thin necks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the MFPT at one or more points.
    Eval {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, value_enum, default_value_t = Method::Asymptotic)]
        method: Method,
        /// Start point as `x,y`; repeatable.
        #[arg(long = "at", value_parser = parse_point, required = true)]
        at: Vec<Point<f64>>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recompute one of the reference tables.
    Table {
        #[arg(value_enum)]
        which: Which,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Add Monte Carlo columns.
        #[arg(long)]
        mc: bool,
        #[command(flatten)]
        mc_args: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fit value ≈ a/ε + b ln ε + c.
    Fit {
        /// CSV with `eps` and `value` columns.
        #[arg(long, conflicts_with = "series")]
        input: Option<PathBuf>,
        /// Built-in series for the equal-neck table.
        #[arg(long, value_enum, default_value_t = Series::Asymptotic)]
        series: Series,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check a problem file against the model assumptions.
    Validate {
        #[command(flatten)]
        problem: ProblemArg,
    },
    /// Write the solved window flux density as CSV.
    DensityDump {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate with the full statistics record.
    Mc {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long = "at", value_parser = parse_point, default_value = "0,0")]
        at: Point<f64>,
        #[command(flatten)]
        mc: McArgs,
        /// Also write a first-passage-time histogram (CSV) here.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArg {
    /// JSON problem file. Without it: unit disk, ε = 0.01, L = 1 and 2, windows at 0 and π/2.
    #[arg(long)]
    problem: Option<PathBuf>,
}

impl ProblemArg {
    fn load(&self) -> Result<ProblemSpecF64> {
        match &self.problem {
            Some(path) => {
                let file = ProblemFile::load(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(file.to_spec()?)
            }
            None => Ok(tables::default_spec()),
        }
    }
}

#[derive(Args)]
struct McArgs {
    /// Time step; defaults to min(ε_min²/4, 1e-4).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    walkers: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl McArgs {
    fn options(&self) -> McOptions {
        McOptions {
            walkers: self.walkers,
            dt: self.dt,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Precision::Full)]
    precision: Precision,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Asymptotic,
    Bie,
    Mc,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Series {
    Asymptotic,
    Bie,
    /// The published composite-domain column.
    Reference,
}

fn parse_point(s: &str) -> Result<Point<f64>, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(Point::new(num(x)?, num(y)?))
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Debug, Serialize)]
struct EvalRow {
    method: &'static str,
    x: f64,
    y: f64,
    value: f64,
    order: Option<String>,
    residual: Option<f64>,
    stderr: Option<f64>,
}

fn eval_rows(
    spec: &ProblemSpecF64,
    method: Method,
    points: &[Point<f64>],
    resolution: usize,
    mc: &McArgs,
) -> Result<Vec<EvalRow>> {
    spec.ensure_valid()?;
    let kernel = NeumannKernel::new(&spec.head)?;
    let want = |m: Method| method == m || method == Method::All;
    let mut rows = Vec::new();
    if want(Method::Asymptotic) {
        for &p in points {
            let est = mfpt_n(spec, &kernel, p)?;
            rows.push(EvalRow {
                method: "asymptotic",
                x: p.x,
                y: p.y,
                value: est.value,
                order: Some(est.error_order.to_string()),
                residual: None,
                stderr: None,
            });
        }
    }
    if want(Method::Bie) {
        let sol = solve_robin(spec, &kernel, resolution)?;
        info!(
            "bie: {resolution} nodes per window, condition {:.3e}",
            sol.condition
        );
        for &p in points {
            spec.check_guard(p)?;
            rows.push(EvalRow {
                method: "bie",
                x: p.x,
                y: p.y,
                value: sol.u(p)?,
                order: None,
                residual: Some(sol.residual),
                stderr: None,
            });
        }
    }
    if want(Method::Mc) {
        let geometry = CompositeGeometry::new(spec)?;
        let dt = mc.dt.unwrap_or_else(|| default_dt(spec));
        for &p in points {
            let s = simulate_on(&geometry, spec, p, dt, mc.walkers, mc.seed)?.stats;
            rows.push(EvalRow {
                method: "mc",
                x: p.x,
                y: p.y,
                value: s.mean,
                order: None,
                residual: None,
                stderr: Some(s.stderr),
            });
        }
    }
    Ok(rows)
}

fn write_eval(rows: &[EvalRow], out: &OutArgs) -> Result<()> {
    let mut w = sink(out.out.as_ref())?;
    match out.format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(rows)?)?,
        Format::Csv => {
            let p = out.precision;
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["method", "x", "y", "value", "order", "residual", "stderr"])?;
            for r in rows {
                csv.write_record([
                    r.method.to_string(),
                    p.show(r.x),
                    p.show(r.y),
                    p.show(r.value),
                    r.order.clone().unwrap_or_default(),
                    r.residual.map(nep_cli::format::full).unwrap_or_default(),
                    p.show_opt(r.stderr),
                ])?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

fn write_table(which: Which, rows: &[tables::Row], with_mc: bool, out: &OutArgs) -> Result<()> {
    let mut w = sink(out.out.as_ref())?;
    if out.format == Format::Json {
        writeln!(w, "{}", serde_json::to_string_pretty(rows)?)?;
        return Ok(());
    }
    let p = out.precision;
    let [n1, n2] = which.param_names();
    let mut header = vec![n1, n2, "u_asym", "u_bie", "rel_err", "u_ref"];
    if with_mc {
        header.extend(["u_mc", "mc_stderr"]);
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(&header)?;
    for r in rows {
        let (a, b) = match which {
            Which::Fit => (r.p1, tables::FIT_LENGTH),
            _ => (r.p1, r.p2),
        };
        let mut rec = vec![
            a.to_string(),
            b.to_string(),
            p.show(r.u_asym),
            p.show(r.u_bie),
            nep_cli::format::full(r.rel_err),
            p.show(r.u_ref),
        ];
        if with_mc {
            rec.push(p.show_opt(r.u_mc));
            rec.push(p.show_opt(r.mc_stderr));
        }
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_fit(fit: &Fit, out: &OutArgs) -> Result<()> {
    let mut w = sink(out.out.as_ref())?;
    match out.format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(fit)?)?,
        Format::Csv => {
            let p = out.precision;
            writeln!(w, "a,b,c,residual")?;
            writeln!(
                w,
                "{},{},{},{}",
                p.show(fit.a),
                p.show(fit.b),
                p.show(fit.c),
                p.show(fit.residual)
            )?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval {
            problem,
            method,
            at,
            resolution,
            mc,
            out,
        } => {
            let spec = problem.load()?;
            write_eval(&eval_rows(&spec, method, &at, resolution, &mc)?, &out)
        }
        Command::Table {
            which,
            resolution,
            mc,
            mc_args,
            out,
        } => {
            let rows = tables::compute(which, resolution, mc.then(|| mc_args.options()))?;
            write_table(which, &rows, mc, &out)
        }
        Command::Fit {
            input,
            series,
            resolution,
            out,
        } => {
            let points = match input {
                Some(path) => read_series(
                    File::open(&path).with_context(|| format!("opening {}", path.display()))?,
                )?,
                None => {
                    let refs = tables::TABLE_FIT.iter();
                    match series {
                        Series::Reference => refs.map(|r| (r.p1, r.u_composite)).collect(),
                        Series::Asymptotic => refs
                            .map(|r| Ok((r.p1, tables::asymptotic(Which::Fit, r.p1, r.p2)?)))
                            .collect::<nep_core::Result<_>>()?,
                        Series::Bie => refs
                            .map(|r| Ok((r.p1, tables::bie(Which::Fit, r.p1, r.p2, resolution)?)))
                            .collect::<nep_core::Result<_>>()?,
                    }
                }
            };
            write_fit(&fit_series(&points)?, &out)
        }
        Command::Validate { problem } => {
            let spec = problem.load()?;
            let report = spec.validate();
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            if !report.passed() {
                return Err(nep_core::Error::InvalidSpec(report).into());
            }
            println!(
                "ok: {} necks, head area {:.6}",
                spec.neck_count(),
                spec.head.area()
            );
            Ok(())
        }
        Command::DensityDump {
            problem,
            resolution,
            out,
        } => {
            let spec = problem.load()?;
            let kernel = NeumannKernel::new(&spec.head)?;
            let sol = solve_robin(&spec, &kernel, resolution)?;
            let mut w = sink(out.as_ref())?;
            sol.density().write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Mc {
            problem,
            at,
            mc,
            histogram,
            bins,
            out,
        } => {
            let spec = problem.load()?;
            let geometry = CompositeGeometry::new(&spec)?;
            let dt = mc.dt.unwrap_or_else(|| default_dt(&spec));
            let sim = simulate_on(&geometry, &spec, at, dt, mc.walkers, mc.seed)?;
            if sim.censored() > 0 {
                log::warn!("{} walkers hit the step budget", sim.censored());
            }
            if let Some(path) = histogram {
                let mut h = sink(Some(&path))?;
                sim.write_histogram(&mut h, bins)?;
                h.flush()?;
            }
            let mut w = sink(out.as_ref())?;
            writeln!(w, "{}", serde_json::to_string_pretty(&sim.stats)?)?;
            Ok(())
        }
    }
}

/// 2 for bad input, 3 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<nep_core::Error>() {
            return if e.is_validation() || matches!(e, nep_core::Error::Io(_)) {
                2
            } else {
                3
            };
        }
        if cause.is::<io::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
