use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use spectrode::bench::{run_support_experiment, run_timing, Problem, TimingConfig};
use spectrode::functionals::{clt_mean, esd_mode, esd_moment, esd_quantile, ContourSpec};
use spectrode::fpa::fpa_density_grid;
use spectrode::model::uniform_grid;
use spectrode::oracles::{mc_esd, mp_density, mp_edges, twopoint_density, MonteCarlo};
use spectrode::{comb_psd, compute_esd, find_support, validate_psd, Error, PopulationSpectrum, Precision};

/// Limit spectra of sample covariance matrices.
#[derive(Parser, Debug)]
#[command(name = "spectrode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density of the limit spectrum on its support grid.
    Density(DensityArgs),
    /// Support intervals and the point mass at zero.
    Support(SolveArgs),
    /// Fixed-point iteration on a grid of real abscissae.
    Fpa(FpaArgs),
    /// Integral of a test function against the limit spectrum.
    Moment(MomentArgs),
    /// Quantile of the limit spectrum.
    Quantile(QuantileArgs),
    /// Mean of a linear spectral statistic in the CLT.
    CltMean(CltArgs),
    /// Reference densities: closed form, exact cubic, or Monte Carlo.
    Oracle(OracleArgs),
    /// Timing and support-identification experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Mean, median and mode over a range of aspect ratios.
    Sweep(SweepArgs),
    /// Write a population spectrum as JSON.
    Psd(PsdArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Population spectrum JSON file.
    #[arg(long)]
    psd: PathBuf,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Grid intervals per support interval; defaults to ⌈ε^(-1/2)⌉.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Output format; inferred from the --out extension when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct FpaArgs {
    #[arg(long)]
    psd: PathBuf,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    eta: f64,
    #[arg(long, default_value_t = spectrode::fpa::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Abscissae as start:end:count.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MomentArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// x, logx, log2x, indicator:a,b or poly:k.
    #[arg(long)]
    h: String,
}

#[derive(Args, Debug)]
struct QuantileArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    p: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Statistic {
    X,
    Logx,
    Log2x,
}

#[derive(Args, Debug)]
struct CltArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum)]
    g: Statistic,
    /// The contour is the circle through 0 and this multiple of the upper edge.
    #[arg(long, default_value_t = 1.1)]
    radius_scale: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleKind {
    Mp,
    Twopoint,
    Mc,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, value_enum)]
    kind: OracleKind,
    #[arg(long)]
    gamma: f64,
    /// Abscissae as start:end:count; the MP support with 201 points by default.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 8.0)]
    t: f64,
    /// Population spectrum for the Monte Carlo oracle; identity when absent.
    #[arg(long)]
    psd: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_dimension: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemKind {
    Mp,
    Twopoint,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// ODE solver against early-stopped fixed-point iteration.
    Timing {
        #[arg(long, value_enum, default_value = "mp")]
        problem: ProblemKind,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long, default_value_t = 8.0)]
        t: f64,
        /// Comma-separated list.
        #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
        epsilons: String,
        #[arg(long, default_value_t = 3)]
        warmups: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Use all threads instead of one.
        #[arg(long)]
        parallel: bool,
        /// Per-point CSV written alongside the summary.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster count and endpoint errors against a fixed-point gold standard.
    Support {
        /// Population spectrum; a six-atom comb on [0.5, 10] when absent.
        #[arg(long)]
        psd: Option<PathBuf>,
        #[arg(long, default_value = "0.03125,0.0625,0.125,0.25")]
        gammas: String,
        #[arg(long, default_value = "1e-2,1e-3,1e-4,1e-5,1e-6")]
        epsilons: String,
        #[arg(long, default_value_t = 1e-7)]
        eps0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    psd: PathBuf,
    /// Aspect ratios as start:end:count.
    #[arg(long)]
    gammas: String,
    /// Comma-separated subset of mean, median, mode.
    #[arg(long, default_value = "mean,median,mode")]
    stat: String,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PsdKind {
    Identity,
    TwoPoint,
    Comb,
    BoxcarMixture,
    Custom,
}

#[derive(Args, Debug)]
struct PsdArgs {
    #[arg(long, value_enum, default_value = "custom")]
    kind: PsdKind,
    /// Re-emit an existing spectrum file.
    #[arg(long, conflicts_with = "kind")]
    from: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 8.0)]
    t: f64,
    #[arg(long, default_value_t = 6)]
    count: usize,
    #[arg(long, default_value_t = 0.01)]
    weight_step: f64,
    #[arg(long, default_value_t = 0.5)]
    first: f64,
    #[arg(long, default_value_t = 10.0)]
    last: f64,
    /// Atoms as t:w pairs, comma-separated.
    #[arg(long, default_value = "")]
    atoms: String,
    /// Uniform components as a:b:w triples, comma-separated.
    #[arg(long, default_value = "")]
    uniforms: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(&'static str, String),
    File(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() { Failure::Usage(e.kind(), e.to_string()) } else { Failure::Numerical(e) }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage("UsageError", msg.into()))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_psd(path: &Path) -> CliResult<PopulationSpectrum> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::File(format!("{}: {e}", path.display())))?;
    Ok(PopulationSpectrum::from_json(&text)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::File(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> CliResult<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(value).expect("json value serializes")))
}

fn parse_f64(s: &str) -> CliResult<f64> {
    s.trim().parse().or_else(|_| usage(format!("not a number: {s:?}")))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_f64).collect()
}

fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![parse_f64(single)?]),
        [start, end, count] => {
            let count: usize = count.trim().parse().or_else(|_| usage(format!("bad count in range {s:?}")))?;
            let (start, end) = (parse_f64(start)?, parse_f64(end)?);
            match count {
                0 => usage(format!("empty range {s:?}")),
                1 => Ok(vec![start]),
                _ => Ok(uniform_grid(start, end, count)),
            }
        }
        _ => usage(format!("expected start:end:count, got {s:?}")),
    }
}

fn precision(epsilon: f64, grid_size: Option<usize>) -> CliResult<Precision> {
    let p = Precision::new(epsilon)?;
    Ok(match grid_size {
        Some(m) => p.with_grid_size(m)?,
        None => p,
    })
}

fn test_function(spec: &str) -> CliResult<Box<dyn Fn(f64) -> f64>> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match name {
        "x" => Box::new(|x| x),
        "logx" => Box::new(f64::ln),
        "log2x" => Box::new(|x: f64| x.ln().powi(2)),
        "indicator" => {
            let bounds = parse_list(arg)?;
            let [a, b] = bounds[..] else { return usage(format!("indicator needs a,b, got {arg:?}")) };
            Box::new(move |x| if x >= a && x <= b { 1.0 } else { 0.0 })
        }
        "poly" => {
            let k: i32 = arg.trim().parse().or_else(|_| usage(format!("poly needs an integer power, got {arg:?}")))?;
            Box::new(move |x: f64| x.powi(k))
        }
        _ => return usage(format!("unknown test function {spec:?}")),
    })
}

fn density(args: DensityArgs) -> CliResult<()> {
    let s = &args.solve;
    let psd = read_psd(&s.psd)?;
    let esd = compute_esd(&psd, s.gamma, &precision(s.epsilon, args.grid_size)?)?;
    let json_out = s.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    match args.format.unwrap_or(if json_out { Format::Json } else { Format::Csv }) {
        Format::Csv => {
            let mut text = String::from("x,density,interval_index\n");
            for (k, iv) in esd.intervals.iter().enumerate() {
                for (&x, &f) in iv.grid.iter().zip(&iv.values) {
                    writeln!(text, "{},{},{k}", fmt(x), fmt(f)).expect("string write");
                }
            }
            emit(&s.out, &text)
        }
        Format::Json => emit_json(
            &s.out,
            &json!({
                "gamma": esd.gamma,
                "zero_mass": esd.zero_mass,
                "intervals": esd.intervals.iter().map(|iv| json!({
                    "lower": iv.lower, "upper": iv.upper, "x": iv.grid, "density": iv.values,
                })).collect::<Vec<_>>(),
            }),
        ),
    }
}

fn support(args: SolveArgs) -> CliResult<()> {
    let psd = read_psd(&args.psd)?;
    let report = find_support(&psd, args.gamma, Precision::new(args.epsilon)?.epsilon)?;
    emit_json(
        &args.out,
        &json!({"K": report.k_hat, "intervals": report.endpoints, "zero_mass": report.zero_mass}),
    )
}

fn fpa(args: FpaArgs) -> CliResult<()> {
    let psd = read_psd(&args.psd)?;
    let grid = parse_range(&args.grid)?;
    let points = fpa_density_grid(&psd, args.gamma, &grid, args.eta, args.max_iter)?;
    let mut text = String::from("x,density,converged,iterations\n");
    for p in points {
        writeln!(text, "{},{},{},{}", fmt(p.x), fmt(p.density), p.converged, p.iterations).expect("string write");
    }
    emit(&args.out, &text)
}

fn moment(args: MomentArgs) -> CliResult<()> {
    let s = &args.solve;
    let h = test_function(&args.h)?;
    let psd = read_psd(&s.psd)?;
    let esd = compute_esd(&psd, s.gamma, &precision(s.epsilon, None)?)?;
    emit_json(&s.out, &json!({"value": esd_moment(&esd, h)?}))
}

fn quantile(args: QuantileArgs) -> CliResult<()> {
    let s = &args.solve;
    let psd = read_psd(&s.psd)?;
    let esd = compute_esd(&psd, s.gamma, &precision(s.epsilon, None)?)?;
    emit_json(&s.out, &json!({"p": args.p, "value": esd_quantile(&esd, args.p)?}))
}

fn clt(args: CltArgs) -> CliResult<()> {
    let s = &args.solve;
    let psd = read_psd(&s.psd)?;
    let p = precision(s.epsilon, None)?;
    let report = find_support(&psd, s.gamma, p.epsilon)?;
    let contour = ContourSpec::default_for(&report, args.radius_scale);
    let g = match args.g {
        Statistic::X => |z: Complex64| z,
        Statistic::Logx => |z: Complex64| z.ln(),
        Statistic::Log2x => |z: Complex64| z.ln().powi(2),
    };
    let r = clt_mean(&psd, s.gamma, g, &contour, &p)?;
    emit_json(&s.out, &json!({"value": r.value, "imag_residual": r.imag_residual}))
}

fn oracle(args: OracleArgs) -> CliResult<()> {
    let grid = match (&args.grid, args.kind) {
        (Some(spec), _) => parse_range(spec)?,
        (None, OracleKind::Mp) => {
            let (lo, hi) = mp_edges(args.gamma);
            uniform_grid(lo, hi, 201)
        }
        (None, _) => return usage("--grid is required for this oracle"),
    };
    let values: Vec<f64> = match args.kind {
        OracleKind::Mp => grid.iter().map(|&x| mp_density(args.gamma, x)).collect(),
        OracleKind::Twopoint => {
            grid.iter().map(|&x| twopoint_density(args.gamma, args.q, args.t, x)).collect::<Result<_, _>>()?
        }
        OracleKind::Mc => {
            let psd = match &args.psd {
                Some(path) => read_psd(path)?,
                None => PopulationSpectrum::identity(),
            };
            let mut config = MonteCarlo::new(args.p, args.replicates, args.seed);
            config.max_dimension = args.max_dimension;
            mc_esd(&psd, args.gamma, &config, &grid)?
        }
    };
    let mut text = String::from("x,density,interval_index\n");
    let mut index: i64 = -1;
    let mut inside = false;
    for (&x, &f) in grid.iter().zip(&values) {
        if f > 0.0 && !inside {
            index += 1;
        }
        inside = f > 0.0;
        writeln!(text, "{},{},{}", fmt(x), fmt(f), if inside { index } else { -1 }).expect("string write");
    }
    emit(&args.out, &text)
}

fn bench(cmd: BenchCommand) -> CliResult<()> {
    match cmd {
        BenchCommand::Timing { problem, gamma, q, t, epsilons, warmups, repeats, parallel, raw, out } => {
            let problem = match problem {
                ProblemKind::Mp => Problem::MarchenkoPastur,
                ProblemKind::Twopoint => Problem::TwoPoint { q, t },
            };
            let config = TimingConfig { warmups, repeats, parallel };
            let report = run_timing(problem, &parse_list(&epsilons)?, gamma, &config)?;
            let mut text = String::from("problem,method,epsilon,seconds_log10,mean_digits,fpa_iterations,error\n");
            for r in &report.rows {
                writeln!(
                    text,
                    "{},{},{},{},{},{},{}",
                    problem.name(),
                    r.method,
                    fmt(r.epsilon),
                    fmt(r.seconds_log10),
                    fmt(r.mean_digits),
                    r.fpa_iterations,
                    r.error.as_deref().unwrap_or("")
                )
                .expect("string write");
            }
            if let Some(path) = raw {
                let mut points = String::from("method,epsilon,x,estimate,truth\n");
                for p in &report.raw {
                    writeln!(points, "{},{},{},{},{}", p.method, fmt(p.epsilon), fmt(p.x), fmt(p.estimate), fmt(p.truth))
                        .expect("string write");
                }
                emit(&Some(path), &points)?;
            }
            emit(&out, &text)
        }
        BenchCommand::Support { psd, gammas, epsilons, eps0, out } => {
            let psd = match psd {
                Some(path) => read_psd(&path)?,
                None => comb_psd(6, 0.01, 0.5, 1.9)?,
            };
            let rows = run_support_experiment(&psd, &parse_list(&gammas)?, &parse_list(&epsilons)?, eps0)?;
            let mut text = String::from("gamma,epsilon,k_hat,k_gold,delta_k,delta_l,delta_u\n");
            for r in rows {
                writeln!(
                    text,
                    "{},{},{},{},{},{},{}",
                    fmt(r.gamma),
                    fmt(r.epsilon),
                    r.k_hat,
                    r.k_gold,
                    r.delta_k,
                    fmt(r.delta_l),
                    fmt(r.delta_u)
                )
                .expect("string write");
            }
            emit(&out, &text)
        }
    }
}

fn sweep(args: SweepArgs) -> CliResult<()> {
    let psd = read_psd(&args.psd)?;
    let stats: Vec<String> = args.stat.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if let Some(bad) = stats.iter().find(|s| !matches!(s.as_str(), "mean" | "median" | "mode")) {
        return usage(format!("unknown statistic {bad:?}"));
    }
    let p = precision(args.epsilon, None)?;
    let mut text = format!("gamma,{}\n", stats.join(","));
    for gamma in parse_range(&args.gammas)? {
        if gamma == 1.0 {
            eprintln!("warning: skipping gamma = 1");
            continue;
        }
        let esd = compute_esd(&psd, gamma, &p)?;
        let mut row = vec![fmt(gamma)];
        for s in &stats {
            let value = match s.as_str() {
                "mean" => esd_moment(&esd, |x| x)?,
                "median" => esd_quantile(&esd, 0.5)?,
                _ => esd_mode(&esd)?,
            };
            row.push(fmt(value));
        }
        writeln!(text, "{}", row.join(",")).expect("string write");
    }
    emit(&args.out, &text)
}

fn parse_tuples(s: &str, arity: usize) -> CliResult<Vec<Vec<f64>>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|item| {
            let parts = item.split(':').map(parse_f64).collect::<CliResult<Vec<f64>>>()?;
            if parts.len() != arity {
                return usage(format!("expected {arity} colon-separated numbers, got {item:?}"));
            }
            Ok(parts)
        })
        .collect()
}

fn psd(args: PsdArgs) -> CliResult<()> {
    let spectrum = match (&args.from, args.kind) {
        (Some(path), _) => read_psd(path)?,
        (None, PsdKind::Identity) => PopulationSpectrum::identity(),
        (None, PsdKind::TwoPoint) => PopulationSpectrum::two_point(args.q, args.t)?,
        (None, PsdKind::BoxcarMixture) => PopulationSpectrum::boxcar_mixture(),
        (None, PsdKind::Comb) => {
            let spacing = if args.count > 1 { (args.last - args.first) / (args.count - 1) as f64 } else { 0.0 };
            comb_psd(args.count, args.weight_step, args.first, spacing)?
        }
        (None, PsdKind::Custom) => {
            let atoms: Vec<(f64, f64)> = parse_tuples(&args.atoms, 2)?.iter().map(|v| (v[0], v[1])).collect();
            let uniforms: Vec<(f64, f64, f64)> =
                parse_tuples(&args.uniforms, 3)?.iter().map(|v| (v[0], v[1], v[2])).collect();
            validate_psd(&atoms, &uniforms)?
        }
    };
    emit(&args.out, &format!("{}\n", spectrum.to_json()))
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("SPECTRODE_THREADS") else { return Ok(()) };
    let threads: usize = value.trim().parse().or_else(|_| usage(format!("SPECTRODE_THREADS must be an integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .or_else(|e| usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Density(a) => density(a),
        Command::Support(a) => support(a),
        Command::Fpa(a) => fpa(a),
        Command::Moment(a) => moment(a),
        Command::Quantile(a) => quantile(a),
        Command::CltMean(a) => clt(a),
        Command::Oracle(a) => oracle(a),
        Command::Bench(c) => bench(c),
        Command::Sweep(a) => sweep(a),
        Command::Psd(a) => psd(a),
    }
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", json!({"error": kind, "message": message}));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("UsageError", e.to_string().trim());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(kind, msg)) => {
            report(kind, &msg);
            ExitCode::from(1)
        }
        Err(Failure::File(msg)) => {
            report("FileError", &msg);
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            report(e.kind(), &e.to_string());
            ExitCode::from(2)
        }
    }
}
