mod runs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multicalib::analytics;
use multicalib::bench;
use multicalib::charts::{self, CellValue, Chart, Format, PlotSelection, ScatterMode};
use multicalib::evolution::Parallelism;
use multicalib::objective::{builtin, Problem};
use multicalib::orchestrator::{
    calibrate_traced, continue_calibration, Calibration, CalibrationOptions, InitMode, Method,
    Selection, SolutionSet, StopOn,
};

use runs::{Outputs, Parent, RunManifest};

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or input files (exit 1).
    Input(String),
    /// Failure while running or writing results (exit 2).
    Runtime(String),
}

impl From<multicalib::Error> for Failure {
    fn from(e: multicalib::Error) -> Self {
        if e.is_input() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "multicalib",
    version,
    about = "Multimodal parameter calibration with SHADE / L-SHADE and Nelder-Mead"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Calibrate a problem and write a new run directory under --out.
    Calibrate(CalibrateArgs),
    /// Start a new run seeded with solutions of a previous one.
    Continue(ContinueArgs),
    /// Print statistics of a solution set.
    Stats(StatsArgs),
    /// Render a chart of a solution set as SVG and/or CSV.
    Chart(ChartArgs),
    /// Compare Nelder-Mead with SHADE + refinement over several seeds.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Problem JSON file, or `builtin:<name>`.
    #[arg(long)]
    problem: String,
    #[command(flatten)]
    options: OptionArgs,
    /// Directory receiving the run-NNN output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ContinueArgs {
    /// solutions.json of the previous run.
    #[arg(long)]
    from: PathBuf,
    /// `best` or comma-separated solution indices.
    #[arg(long, default_value = "best")]
    select: String,
    /// Problem with fixed parameters or narrowed ranges; defaults to the previous one.
    #[arg(long)]
    problem: Option<String>,
    #[command(flatten)]
    options: OptionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OptionArgs {
    /// Options JSON file; flags below override its values.
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    max_fun_evals: Option<u64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    max_calibration_time: Option<f64>,
    #[arg(long, value_enum)]
    stop_on: Option<StopOnArg>,
    #[arg(long)]
    num_results: Option<usize>,
    #[arg(long)]
    refine_best: Option<bool>,
    #[arg(long)]
    refine_prob: Option<f64>,
    #[arg(long)]
    engine_fraction: Option<f64>,
    #[arg(long, value_enum)]
    init_mode: Option<InitModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for loss evaluation (results do not depend on it).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Shade,
    Lshade,
    Nm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StopOnArg {
    Evals,
    Time,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitModeArg {
    SeedCentered,
    Uniform,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    solutions: PathBuf,
    /// Emit the machine-readable JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Write the report to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ChartKind {
    DensityHm,
    DensityHmScatter,
    Scatter,
    WeightedScatter,
    DensityScatter,
    Results,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PlotArg {
    Basic,
    Best,
    Set,
    Complete,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CellArg {
    Count,
    MinLoss,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Svg,
    Csv,
    Both,
}

#[derive(Args, Debug)]
struct ChartArgs {
    #[arg(long)]
    solutions: PathBuf,
    #[arg(long, value_enum)]
    chart: ChartKind,
    /// Parameter pair `A,B` for heatmaps and scatters.
    #[arg(long)]
    pair: Option<String>,
    /// Prediction selection for `--chart results`.
    #[arg(long, value_enum, default_value = "complete")]
    plot: PlotArg,
    /// Heatmap bins: `N` or `NX,NY`.
    #[arg(long, default_value = "25")]
    bins: String,
    /// Heatmap cell value.
    #[arg(long, value_enum, default_value = "count")]
    value: CellArg,
    /// Output file (format from its extension) or directory.
    #[arg(long)]
    out: PathBuf,
    /// Output format when --out is a directory.
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Problem JSON file, or `builtin:<name>`.
    #[arg(long)]
    problem: String,
    /// Loss evaluations per method and seed.
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    /// Number of seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// First seed; seeds run from here consecutively.
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 200)]
    num_results: usize,
    /// Run seeds one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Directory receiving compare.json, compare.csv and compare.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Continue(a) => cmd_continue(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Chart(a) => cmd_chart(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_problem(spec: &str) -> Result<Problem, Failure> {
    if spec.starts_with("builtin:") {
        return builtin::problem(spec).map_err(Failure::from);
    }
    Problem::load(spec).map_err(|e| Failure::Input(format!("{spec}: {e}")))
}

fn load_solutions(path: &Path) -> Result<SolutionSet, Failure> {
    SolutionSet::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn resolve_options(
    a: &OptionArgs,
    base: Option<CalibrationOptions>,
) -> Result<CalibrationOptions, Failure> {
    let mut o = match &a.options {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("reading {}: {e}", path.display())))?;
            CalibrationOptions::from_json(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None => base.unwrap_or_default(),
    };
    if let Some(m) = a.method {
        o.method = match m {
            MethodArg::Shade => Method::Shade,
            MethodArg::Lshade => Method::Lshade,
            MethodArg::Nm => Method::Nm,
        };
    }
    if let Some(v) = a.max_fun_evals {
        o.max_fun_evals = Some(v);
    }
    if let Some(v) = a.max_calibration_time {
        o.max_calibration_time = Some(v);
    }
    if let Some(s) = a.stop_on {
        o.stop_on = match s {
            StopOnArg::Evals => StopOn::Evals,
            StopOnArg::Time => StopOn::Time,
        };
    }
    if let Some(v) = a.num_results {
        o.num_results = v;
    }
    if let Some(v) = a.refine_best {
        o.refine_best = v;
    }
    if let Some(v) = a.refine_prob {
        o.refine_prob = v;
    }
    if let Some(v) = a.engine_fraction {
        o.engine_fraction = v;
    }
    if let Some(m) = a.init_mode {
        o.init_mode = match m {
            InitModeArg::SeedCentered => InitMode::SeedCentered,
            InitModeArg::Uniform => InitMode::Uniform,
        };
    }
    if let Some(v) = a.seed {
        o.seed = v;
    }
    o.validate().map_err(Failure::from)?;
    Ok(o)
}

/// Runs `f` with evaluation parallelism on `threads` workers.
fn with_threads<T>(threads: usize, f: impl FnOnce(Parallelism) -> T + Send) -> Result<T, Failure>
where
    T: Send,
{
    if threads <= 1 {
        return Ok(f(Parallelism::Serial));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Runtime(format!("starting worker threads: {e}")))?;
    Ok(pool.install(|| f(Parallelism::Threads)))
}

struct RunContext<'a> {
    command: &'a str,
    problem: String,
    out: &'a Path,
    parent: Option<Parent>,
}

fn finish_run(
    ctx: RunContext<'_>,
    options: CalibrationOptions,
    started_at: String,
    clock: Instant,
    cal: Calibration,
) -> Result<(), Failure> {
    let (run_id, dir) = runs::create_run_dir(ctx.out)?;
    let set = &cal.solutions;
    let manifest = RunManifest {
        run_id: run_id.clone(),
        command: ctx.command.into(),
        problem: ctx.problem,
        seed: options.seed,
        options,
        started_at,
        finished_at: runs::now(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        evaluations: set.results.evaluations,
        set_size: set.set_size,
        best_loss: set.fun_values[0],
        seeded: cal.seeded.clone(),
        parent: ctx.parent,
        outputs: Outputs {
            solutions: runs::SOLUTIONS_FILE.into(),
            trace: runs::TRACE_FILE.into(),
        },
    };
    runs::write_run(&dir, &manifest, set, &cal.trace)?;
    println!(
        "{run_id}: {} solutions, best loss {:.6e}, {} evaluations -> {}",
        set.set_size,
        set.fun_values[0],
        set.results.evaluations,
        dir.display()
    );
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    let problem = load_problem(&a.problem)?;
    let options = resolve_options(&a.options, None)?;
    let started_at = runs::now();
    let clock = Instant::now();
    let cal = with_threads(a.options.threads, |par| {
        calibrate_traced(&problem, &options, par)
    })??;
    let problem_ref = if a.problem.starts_with("builtin:") {
        a.problem.clone()
    } else {
        absolute(Path::new(&a.problem)).display().to_string()
    };
    let ctx = RunContext {
        command: "calibrate",
        problem: problem_ref,
        out: &a.out,
        parent: None,
    };
    finish_run(ctx, options, started_at, clock, cal)
}

fn cmd_continue(a: ContinueArgs) -> Result<(), Failure> {
    let prior = load_solutions(&a.from)?;
    let selection: Selection = a.select.parse().map_err(Failure::from)?;
    let problem = a.problem.as_deref().map(load_problem).transpose()?;
    let options = resolve_options(&a.options, Some(prior.results.options.clone()))?;
    let started_at = runs::now();
    let clock = Instant::now();
    let cal = with_threads(a.options.threads, |par| {
        continue_calibration(&prior, &selection, problem.as_ref(), &options, par)
    })??;
    let problem_ref = match &a.problem {
        Some(p) if p.starts_with("builtin:") => p.clone(),
        Some(p) => absolute(Path::new(p)).display().to_string(),
        None => format!("{} (embedded)", absolute(&a.from).display()),
    };
    let parent = Parent {
        solutions: absolute(&a.from),
        selection: a.select.clone(),
    };
    let ctx = RunContext {
        command: "continue",
        problem: problem_ref,
        out: &a.out,
        parent: Some(parent),
    };
    finish_run(ctx, options, started_at, clock, cal)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn cmd_stats(a: StatsArgs) -> Result<(), Failure> {
    let set = load_solutions(&a.solutions)?;
    let problem = set.problem().map_err(Failure::from)?;
    let report = analytics::report(&set, problem.space()).map_err(Failure::from)?;
    let text = if a.json {
        report.to_json().map_err(Failure::from)?
    } else {
        report.to_text()
    };
    match &a.out {
        Some(path) => runs::write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_bins(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Input(format!("--bins expects `N` or `NX,NY`, got `{s}`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let n = |t: &str| t.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        [a] => Ok((n(a)?, n(a)?)),
        [a, b] => Ok((n(a)?, n(b)?)),
        _ => Err(bad()),
    }
}

fn parse_pair(pair: Option<&str>, valid: &[String]) -> Result<(String, String), Failure> {
    let listing = || valid.join(", ");
    let pair = pair.ok_or_else(|| {
        Failure::Input(format!(
            "this chart needs --pair A,B; parameters: {}",
            listing()
        ))
    })?;
    match pair
        .split(',')
        .map(str::trim)
        .collect::<Vec<_>>()
        .as_slice()
    {
        [a, b] => Ok((a.to_string(), b.to_string())),
        _ => Err(Failure::Input(format!(
            "--pair expects `A,B`, got `{pair}`; parameters: {}",
            listing()
        ))),
    }
}

/// Run id for chart file names: the enclosing `run-NNN` directory when
/// there is one, else the solutions file stem.
fn run_id_of(solutions: &Path) -> String {
    let parent = absolute(solutions)
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .map(String::from);
    match parent {
        Some(p) if p.starts_with("run-") => p,
        _ => solutions
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string(),
    }
}

fn cmd_chart(a: ChartArgs) -> Result<(), Failure> {
    let set = load_solutions(&a.solutions)?;
    let problem = set.problem().map_err(Failure::from)?;
    let space = problem.space();
    let chart = match a.chart {
        ChartKind::Results => {
            let selection = match a.plot {
                PlotArg::Basic => PlotSelection::Basic,
                PlotArg::Best => PlotSelection::Best,
                PlotArg::Set => PlotSelection::Set,
                PlotArg::Complete => PlotSelection::Complete,
            };
            let data =
                charts::prediction_plot_data(&set, selection, &problem).map_err(Failure::from)?;
            for (who, why) in &data.failures {
                match who {
                    Some(i) => eprintln!("warning: solution {i} could not be predicted: {why}"),
                    None => eprintln!("warning: initial parameters could not be predicted: {why}"),
                }
            }
            Chart::Prediction(data)
        }
        kind => {
            let (pa, pb) = parse_pair(a.pair.as_deref(), &space.free_names())?;
            match kind {
                ChartKind::DensityHm | ChartKind::DensityHmScatter => {
                    let value = match a.value {
                        CellArg::Count => CellValue::Count,
                        CellArg::MinLoss => CellValue::MinLoss,
                    };
                    let grid =
                        charts::density_heatmap(&set, space, &pa, &pb, parse_bins(&a.bins)?, value)
                            .map_err(Failure::from)?;
                    let overlay = (kind == ChartKind::DensityHmScatter)
                        .then(|| charts::scatter(&set, space, &pa, &pb, ScatterMode::Plain))
                        .transpose()
                        .map_err(Failure::from)?;
                    Chart::Heatmap { grid, overlay }
                }
                _ => {
                    let mode = match kind {
                        ChartKind::WeightedScatter => ScatterMode::Weighted,
                        ChartKind::DensityScatter => ScatterMode::Density,
                        _ => ScatterMode::Plain,
                    };
                    Chart::Scatter(
                        charts::scatter(&set, space, &pa, &pb, mode).map_err(Failure::from)?,
                    )
                }
            }
        }
    };

    let by_extension = a
        .out
        .extension()
        .and_then(|e| e.to_str())
        .and_then(|e| e.parse::<Format>().ok());
    let targets: Vec<(PathBuf, Format)> = match by_extension {
        Some(f) => vec![(a.out.clone(), f)],
        None => {
            std::fs::create_dir_all(&a.out)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", a.out.display())))?;
            let formats = match a.format {
                FormatArg::Svg => vec![Format::Svg],
                FormatArg::Csv => vec![Format::Csv],
                FormatArg::Both => vec![Format::Svg, Format::Csv],
            };
            let run_id = run_id_of(&a.solutions);
            formats
                .into_iter()
                .map(|f| (a.out.join(charts::file_name(&run_id, &chart, f)), f))
                .collect()
        }
    };
    for (path, format) in targets {
        charts::render(&chart, &path, format).map_err(Failure::from)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let problem = load_problem(&a.problem)?;
    let seeds: Vec<u64> = (a.first_seed..a.first_seed + a.seeds).collect();
    let cmp = bench::compare(&problem, a.budget, &seeds, a.num_results, !a.serial)
        .map_err(Failure::from)?;
    let table = cmp.to_table();
    print!("{table}");
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
        let json =
            serde_json::to_string_pretty(&cmp).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
        runs::write(&out.join("compare.json"), &json)?;
        runs::write(
            &out.join("compare.csv"),
            &cmp.to_csv().map_err(Failure::from)?,
        )?;
        runs::write(&out.join("compare.txt"), &table)?;
    }
    Ok(())
}
