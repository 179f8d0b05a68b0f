use clap::{Args, Parser, Subcommand, ValueEnum};
use growthlab::functions::parse_function;
use growthlab::growth::{order_from_table, type_from_table, EstimatorPolicy, GrowthTable, IndicatorEstimate, Mode, RadialGrid};
use growthlab::odes::{
    default_sample_points, reduce_order, reduction_residual, solution_basis, BasisOptions, Fan, LinearODE, PointwiseOde,
    QuotientDerivative, RayOptions,
};
use growthlab::scales::{builtin_scale, check_class, check_triple, default_class_grid, default_triple_grid, ScaleClass, ScaleTriple};
use growthlab::verify::{GridSpec, Overrides, Report, Runner, Suite};
use growthlab::{Error, Exec};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "growthlab", version, about = "Growth indicators of entire functions and of ODE solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate orders and types of an entire function.
    Indicators(IndicatorsArgs),
    /// Run a scenario suite (the bundled one when no file is given).
    Verify(VerifyArgs),
    /// Reduce the order of a linear ODE by a known solution.
    Reduce(ReduceArgs),
    /// Check the class conditions of a scale triple.
    ScalesCheck(ScalesArgs),
    /// Integrate the canonical basis along one ray and dump the trace as CSV.
    Trace(TraceArgs),
}

#[derive(Args)]
struct IndicatorsArgs {
    /// Expression in `z`, e.g. `exp(z^2) + 1`.
    function: String,
    /// Scale triple `alpha,beta,gamma`, each `id`, `log`, `iter_log:k`, `power:s` or `affine:a:b`.
    #[arg(long, default_value = "id,id,id")]
    triple: String,
    /// Geometric grid `r0,q,count`.
    #[arg(long)]
    grid: Option<String>,
    /// Use the shifted indicators.
    #[arg(long)]
    shifted: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Directory for the CSV samples.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    T,
    M,
    Both,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite JSON file.
    suite: Option<PathBuf>,
    /// Geometric grid `r0,q,count` for every scenario that samples radii.
    #[arg(long)]
    grid: Option<String>,
    /// Rays per fan.
    #[arg(long)]
    fan: Option<usize>,
    /// Integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for reports, evidence CSV and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Coefficients `A0;A1;…;A(k-1)` of `f^(k) + A(k-1) f^(k-1) + … + A0 f = 0`.
    #[arg(long)]
    ode: String,
    /// Known solution `f1`.
    #[arg(long)]
    solution: String,
    /// Another solution `g`; the residual of `(g/f1)'` in the reduced equation is reported.
    #[arg(long)]
    other: Option<String>,
}

#[derive(Args)]
struct ScalesArgs {
    #[arg(long, default_value = "id,id,id")]
    triple: String,
}

#[derive(Args)]
struct TraceArgs {
    /// Coefficients `A0;A1;…`.
    #[arg(long)]
    ode: String,
    /// Ray direction in radians.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long)]
    r_max: f64,
    /// Number of equispaced sample radii.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    step_budget: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Config(_)
            | Error::UnknownScale(_)
            | Error::InvalidScaleParam(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(format!("i/o: {e}"))
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Indicators(a) => indicators(a),
        Command::Verify(a) => verify(a),
        Command::Reduce(a) => reduce(a),
        Command::ScalesCheck(a) => scales_check(a),
        Command::Trace(a) => trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Check(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

fn parse_triple(spec: &str) -> Result<ScaleTriple, Error> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("triple `{spec}` needs three comma-separated scales")));
    }
    let mut scales = Vec::with_capacity(3);
    for p in parts {
        let mut it = p.split(':');
        let name = it.next().unwrap_or_default();
        let params = it
            .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidScaleParam(format!("`{v}` in `{p}`"))))
            .collect::<Result<Vec<f64>, Error>>()?;
        scales.push(builtin_scale(name, &params)?);
    }
    let gamma = scales.pop().expect("three scales");
    let beta = scales.pop().expect("three scales");
    let alpha = scales.pop().expect("three scales");
    Ok(ScaleTriple::new(alpha, beta, gamma))
}

fn parse_grid(spec: &str) -> Result<GridSpec, Error> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || Error::Config(format!("grid `{spec}` must be `r0,q,count`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let r0: f64 = parts[0].parse().map_err(|_| bad())?;
    let q: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    let g = GridSpec::geometric(r0, q, count);
    g.radial()?;
    Ok(g)
}

fn parse_ode(spec: &str) -> Result<LinearODE, Error> {
    let coefficients: Vec<&str> = spec.split(';').map(str::trim).collect();
    LinearODE::parse(&coefficients)
}

/// Write via a temporary sibling and rename.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

fn indicators(a: IndicatorsArgs) -> Outcome {
    let f = parse_function(&a.function)?;
    let triple = parse_triple(&a.triple)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?.radial()?,
        None => RadialGrid::spanning(4.0, 60.0, 24, 0.5)?,
    };
    let modes = match a.mode {
        ModeArg::T => vec![Mode::TBased],
        ModeArg::M => vec![Mode::MBased],
        ModeArg::Both => vec![Mode::TBased, Mode::MBased],
    };
    let policy = EstimatorPolicy::default();
    let table = GrowthTable::sample(&f, &grid, &modes, policy.exec)?;
    let shifted = if a.shifted { " (shifted)" } else { "" };
    println!("function {}  triple {}{shifted}", a.function, triple.label());
    let mut files: Vec<(String, IndicatorEstimate)> = Vec::new();
    for mode in modes {
        let tag = match mode {
            Mode::TBased => "T",
            Mode::MBased => "M",
        };
        let order = order_from_table(&table, &triple, mode, a.shifted, &policy)?;
        println!(
            "sigma_{tag} = {:.6}  (tail sup {:.6}, residual {:.2e}, {} tail radii)",
            order.value_slope, order.value_tail_sup, order.slope_residual, order.tail_count
        );
        match type_from_table(&table, &triple, order.value_slope, mode, a.shifted, &policy) {
            Ok(t) => {
                println!("tau_{tag}   = {:.6}  (tail sup {:.6}, fit slope {:.4})", t.value_slope, t.value_tail_sup, t.fit_slope);
                files.push((format!("type_{tag}.csv"), t));
            }
            Err(e) => println!("tau_{tag}   unavailable: {e}"),
        }
        files.push((format!("order_{tag}.csv"), order));
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        for (name, e) in &files {
            write_atomic(&dir.join(name), &e.to_csv())?;
        }
        println!("samples written to {}", dir.display());
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Outcome {
    let mut suite = match &a.suite {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Suite::from_json(&text)?
        }
        None => Suite::default_suite(),
    };
    let overrides = Overrides {
        grid: a.grid.as_deref().map(parse_grid).transpose()?,
        rays: a.fan,
        tol: a.tol,
        seed: a.seed,
    };
    suite.apply(&overrides);
    suite.validate()?;
    if suite.scenarios.is_empty() {
        eprintln!("warning: suite has no scenarios");
        return Ok(());
    }
    let mut runner = Runner::new(suite.seed).with_exec(Exec::Parallel);
    let reports = runner.run_suite(&suite);
    let mut summary = String::new();
    let mut unmet = Vec::new();
    for (s, r) in suite.scenarios.iter().zip(&reports) {
        let ok = s.satisfied_by(r);
        if !ok {
            unmet.push(s.id.clone());
        }
        let _ = writeln!(summary, "{}  [{}]  {:.1}s", r.summary_line(), if ok { "ok" } else { "UNMET" }, r.metadata.runtime_seconds);
    }
    print!("{summary}");
    if let Some(dir) = &a.out {
        write_reports(dir, &reports, &summary)?;
    }
    if unmet.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} scenario(s) not as expected: {}", unmet.len(), unmet.join(", "))))
    }
}

fn write_reports(dir: &Path, reports: &[Report], summary: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in reports {
        write_atomic(&dir.join(format!("{}.json", r.id)), &r.to_json())?;
        for t in &r.evidence {
            write_atomic(&dir.join(format!("{}.{}.csv", r.id, t.name)), &t.to_csv())?;
        }
    }
    write_atomic(&dir.join("summary.txt"), summary)
}

fn reduce(a: ReduceArgs) -> Outcome {
    let ode = parse_ode(&a.ode)?;
    let f1 = parse_function(&a.solution)?;
    let points = default_sample_points();
    println!("solution residual of {} (relative):", a.solution);
    println!("re,im,residual");
    for z in &points {
        match ode.residual(*z, &f1) {
            Ok(r) => println!("{:.3},{:.3},{r:.3e}", z.re, z.im),
            Err(e) => println!("{:.3},{:.3},error: {e}", z.re, z.im),
        }
    }
    let reduced = reduce_order(&ode, &f1, &points)?;
    let k = PointwiseOde::order(&reduced);
    let header: Vec<String> = (0..k).map(|j| format!("A1_{j}")).collect();
    println!("reduced coefficients (order {k}):");
    println!("re,im,{}", header.join(","));
    for z in &points {
        let c = reduced.coefficients_native(*z)?;
        let cells: Vec<String> = c.iter().map(|v| format!("{:.12}{:+.12}i", v.re, v.im)).collect();
        println!("{:.3},{:.3},{}", z.re, z.im, cells.join(","));
    }
    if let Some(g) = &a.other {
        let g = parse_function(g)?;
        let nu = QuotientDerivative { num: &g, den: &f1 };
        let rep = reduction_residual(&reduced, &nu, &points)?;
        println!("reduction residual of (g/f1)': {:.3e} ({} points excluded)", rep.max_residual, rep.excluded.len());
        if rep.max_residual > 1e-6 {
            return Err(Failure::Check(format!("(g/f1)' does not solve the reduced equation: {:.3e}", rep.max_residual)));
        }
    }
    Ok(())
}

fn scales_check(a: ScalesArgs) -> Outcome {
    let triple = parse_triple(&a.triple)?;
    for (role, s) in [("alpha", &triple.alpha), ("beta", &triple.beta), ("gamma", &triple.gamma)] {
        for class in [ScaleClass::L1, ScaleClass::L2, ScaleClass::L3] {
            let r = check_class(s, class, &default_class_grid(s.r0.max(1.0)))?;
            println!(
                "{role:<5} {:<14} {class}  {}  declared {}  worst violation {:.3e}",
                s.id(),
                if r.pass { "ok  " } else { "fail" },
                s.in_class(class),
                r.worst_violation
            );
        }
    }
    let t = check_triple(&triple, &default_triple_grid())?;
    println!("condition (i): {}  {}", t.condition_i, t.condition_i_detail);
    for c in &t.clauses {
        println!("clause {:<40} last ratio {:.3e}  {}", c.clause, c.last, if c.pass { "ok" } else { "fail" });
    }
    if t.pass {
        println!("triple {} satisfies the conditions", triple.label());
        Ok(())
    } else {
        Err(Failure::Check(format!("triple {} violates the conditions", triple.label())))
    }
}

fn trace(a: TraceArgs) -> Outcome {
    let ode = parse_ode(&a.ode)?;
    if a.samples == 0 || !(a.r_max > 0.0) {
        return Err(Failure::Usage("need --samples ≥ 1 and --r-max > 0".into()));
    }
    let samples: Vec<f64> = (1..=a.samples).map(|i| a.r_max * i as f64 / a.samples as f64).collect();
    let ray = RayOptions { tol: a.tol, step_budget: a.step_budget, samples };
    let basis = solution_basis(&ode, &BasisOptions::new(Fan::single(a.theta), a.r_max, ray))?;
    let k = ode.order();
    let mut out = String::from("handle,theta,r");
    for j in 0..k {
        let _ = write!(out, ",log_abs_{j}");
    }
    for j in 0..k {
        let _ = write!(out, ",phase_{j}");
    }
    out.push('\n');
    for (h, handle) in basis.handles.iter().enumerate() {
        for tr in &handle.traces {
            for s in &tr.samples {
                let _ = write!(out, "{h},{:.17e},{:.17e}", tr.theta, s.r);
                for v in s.log_abs.iter().chain(&s.phase) {
                    let _ = write!(out, ",{v:.17e}");
                }
                out.push('\n');
            }
        }
    }
    match &a.out {
        Some(p) => write_atomic(p, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}
