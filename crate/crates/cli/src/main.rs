use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use semreg::report::{self, decade_improvements};
use semreg::tree::format_constant;
use semreg::{load_dataset, newton_dataset, run_cv, run_grid, Dataset, GridSpec, Hyperparameters, LoadOptions, Strategy};
use serde::Serialize;

/// Prints a line to stdout. A closed pipe (`semreg fit ... | head`) is not
/// an error worth panicking over.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// CLI fits stop here unless `--max-iterations` says otherwise.
const DEFAULT_MAX_ITERATIONS: usize = 10_000;

#[derive(Parser)]
#[command(name = "semreg", version, about = "Symbolic regression by semantic backpropagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one expression to a dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        hp: HyperArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// k-fold cross-validation of one configuration.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        hp: HyperArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Cross-validate every combination of strategy, minimum improvement
    /// and node limit.
    Grid {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write the synthetic gravitation dataset as CSV with a header.
    GenNewton {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = semreg::newton::DEFAULT_PATTERNS)]
        patterns: usize,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Delimited text file, one pattern per row.
    path: PathBuf,
    /// 1-based target column; the last column by default.
    #[arg(long)]
    target_col: Option<usize>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// First row holds column names.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct HyperArgs {
    /// 1: all searches, 2: all searches + constant optimization,
    /// 3: cascade, 4: constant refinement then cascade.
    #[arg(long, default_value_t = 1)]
    strategy: u8,
    #[arg(long, default_value_t = 1e-6)]
    min_improvement: f64,
    #[arg(long)]
    max_nodes: Option<usize>,
    /// A count or `unlimited`.
    #[arg(long, default_value_t = Limit(Some(DEFAULT_MAX_ITERATIONS)))]
    max_iterations: Limit,
    /// A number, or `mean` for the mean of the targets.
    #[arg(long, default_value_t = Goal::Value(0.0))]
    goal_mse: Goal,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3, 4])]
    strategy: Vec<u8>,
    /// Defaults to 1e-1 down to 1e-10 by decades.
    #[arg(long, value_delimiter = ',')]
    min_improvement: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    max_nodes: Vec<usize>,
    #[arg(long, default_value_t = Limit(Some(DEFAULT_MAX_ITERATIONS)))]
    max_iterations: Limit,
    #[arg(long, default_value_t = Goal::Value(0.0))]
    goal_mse: Goal,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for report files, created if missing.
    #[arg(long, default_value = "semreg-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
struct Limit(Option<usize>);

impl FromStr for Limit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "unlimited" {
            return Ok(Limit(None));
        }
        s.parse().map(|n| Limit(Some(n))).map_err(|_| format!("expected a count or `unlimited`, got `{s}`"))
    }
}

impl std::fmt::Display for Limit {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self.0 {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("unlimited"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Goal {
    Value(f64),
    Mean,
}

impl FromStr for Goal {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "mean" {
            return Ok(Goal::Mean);
        }
        s.parse().map(Goal::Value).map_err(|_| format!("expected a number or `mean`, got `{s}`"))
    }
}

impl std::fmt::Display for Goal {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            Goal::Value(v) => write!(f, "{v}"),
            Goal::Mean => f.write_str("mean"),
        }
    }
}

impl Goal {
    fn resolve(self, data: &Dataset) -> f64 {
        match self {
            Goal::Value(v) => v,
            Goal::Mean => data.target_mean(),
        }
    }
}

type Result<T> = std::result::Result<T, Box<dyn Error>>;

fn strategy(n: u8) -> Result<Strategy> {
    Ok(Strategy::try_from(n)?)
}

fn load(args: &DataArgs) -> Result<Dataset> {
    if !args.delimiter.is_ascii() {
        return Err(format!("delimiter must be a single ASCII character, got `{}`", args.delimiter).into());
    }
    let target_column = match args.target_col {
        Some(0) => return Err("--target-col is 1-based".into()),
        c => c.map(|c| c - 1),
    };
    let options = LoadOptions { delimiter: args.delimiter as u8, has_header: args.header, target_column };
    load_dataset(&args.path, &options).map_err(|e| format!("{}: {e}", args.path.display()).into())
}

fn hyperparameters(args: &HyperArgs, data: &Dataset) -> Result<Hyperparameters> {
    let hp = Hyperparameters {
        max_iterations: args.max_iterations.0,
        goal_mse: args.goal_mse.resolve(data),
        min_improvement: args.min_improvement,
        max_nodes: args.max_nodes,
        strategy: strategy(args.strategy)?,
    };
    hp.validate()?;
    Ok(hp)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| report::UNDEFINED.to_string(), |v| format!("{v:.6}"))
}

fn cmd_fit(data: &DataArgs, hp: &HyperArgs, out: &OutArgs) -> Result<()> {
    let dataset = load(data)?;
    let hp = hyperparameters(hp, &dataset)?;
    let fitted = semreg::fit(&dataset, &hp)?;
    fs::create_dir_all(&out.out)?;
    write(&out.out, "fit_report.json", &json(&fitted))?;
    write(&out.out, "fit_trace.csv", &report::trace_csv(&fitted))?;
    write(&out.out, "fit_timing.csv", &report::fit_timing_csv(&fitted))?;

    say!("expression   {}", fitted.expression);
    say!("train mse    {}", format_constant(fitted.train_mse));
    say!("iterations   {} ({} modifications)", fitted.iterations, fitted.modifications);
    say!("stop         {}", fitted.stop_reason.label());
    say!("nodes        {} (height {})", fitted.node_count, fitted.height);
    say!("seconds      {:.3}", fitted.seconds);
    say!("reports in   {}", out.out.display());
    Ok(())
}

fn cmd_cv(data: &DataArgs, hp: &HyperArgs, k: usize, out: &OutArgs) -> Result<()> {
    let dataset = load(data)?;
    let hp = hyperparameters(hp, &dataset)?;
    let cv = run_cv(&dataset, k, &hp)?;
    fs::create_dir_all(&out.out)?;
    write(&out.out, "cv_folds.csv", &report::cv_folds_csv(&cv))?;
    write(&out.out, "cv_summary.json", &json(&cv))?;
    write(&out.out, "cv_timing.csv", &report::cv_timing_csv(&cv))?;

    say!("fold  train mse     test mse      nodes  height");
    for f in &cv.folds {
        say!("{:<5} {:<13.6} {:<13} {:<6} {}", f.fold, f.train_mse, opt(f.test_mse), f.node_count, f.height);
    }
    let s = &cv.summary;
    say!("mean train mse   {:.6} (std {:.6})", s.mean_train_mse, s.std_train_mse);
    say!("mean test mse    {} (std {})", opt(s.mean_test_mse), opt(s.std_test_mse));
    say!("median test mse  {}", opt(s.median_test_mse));
    if s.undefined_test_folds > 0 {
        say!("undefined test   {} folds", s.undefined_test_folds);
    }
    say!("mean seconds     {:.3}", s.mean_seconds);
    say!("reports in       {}", out.out.display());
    Ok(())
}

fn cmd_grid(data: &DataArgs, args: &GridArgs, k: usize, out: &OutArgs) -> Result<()> {
    let dataset = load(data)?;
    let strategies = args.strategy.iter().map(|&n| strategy(n)).collect::<Result<Vec<_>>>()?;
    let improvements = if args.min_improvement.is_empty() { decade_improvements() } else { args.min_improvement.clone() };
    let spec = GridSpec::new(strategies, improvements, args.max_nodes.clone())?;
    let base = Hyperparameters {
        max_iterations: args.max_iterations.0,
        goal_mse: args.goal_mse.resolve(&dataset),
        ..Hyperparameters::default()
    };
    for &(s, m, n) in &spec.cells() {
        Hyperparameters { strategy: s, min_improvement: m, max_nodes: Some(n), ..base.clone() }.validate()?;
    }
    semreg::kfold_split(dataset.num_patterns(), k)?;
    fs::create_dir_all(&out.out)?;

    let total = spec.len();
    let grid = run_grid(&dataset, k, &spec, &base, |i, cell| {
        let status = match (&cell.cv, &cell.error) {
            (Some(cv), _) => format!("train {:.4} test {}", cv.summary.mean_train_mse, opt(cv.summary.mean_test_mse)),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => unreachable!(),
        };
        eprintln!(
            "[{}/{total}] strategy {} min_improvement {:e} max_nodes {}: {status}",
            i + 1,
            cell.strategy.number(),
            cell.min_improvement,
            cell.max_nodes
        );
    });
    write(&out.out, "grid_long.csv", &report::grid_long_csv(&grid))?;
    write(&out.out, "grid_best.csv", &report::grid_best_csv(&grid))?;
    write(&out.out, "grid_summary.json", &json(&grid))?;

    say!("strategy  by     min_improvement  max_nodes  mean train    mean test");
    for b in grid.best_cells() {
        say!(
            "{:<9} {:<6} {:<16e} {:<10} {:<13.6} {}",
            b.strategy.number(),
            b.selected_by,
            b.min_improvement,
            b.max_nodes,
            b.summary.mean_train_mse,
            opt(b.summary.mean_test_mse)
        );
    }
    let failed = grid.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        say!("{failed} of {total} cells failed, marked `error` in grid_long.csv");
    }
    say!("reports in {}", out.out.display());
    Ok(())
}

fn cmd_gen_newton(seed: u64, patterns: usize, out: Option<&Path>) -> Result<()> {
    let d = newton_dataset(patterns, seed);
    let mut text = String::from("x1,x2,x3,y\n");
    for i in 0..d.num_patterns() {
        let row: Vec<String> = d.variables().iter().map(|v| format_constant(v[i])).chain([format_constant(d.targets()[i])]).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit { data, hp, out } => cmd_fit(data, hp, out),
        Command::Cv { data, hp, k, out } => cmd_cv(data, hp, *k, out),
        Command::Grid { data, grid, k, out } => cmd_grid(data, grid, *k, out),
        Command::GenNewton { seed, patterns, out } => cmd_gen_newton(*seed, *patterns, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
