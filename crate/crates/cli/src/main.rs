mod input;
mod plots;
mod report;
mod text;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pwdeming::inference::Fitter;
use pwdeming::outliers::OutlierOptions;
use pwdeming::simlab::{run_study, SimDesign};
use pwdeming::PrecisionProfile;

use report::{analyse, FitRequest};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "data: {m}"),
            Failure::Numerical(m) => write!(f, "numerical: {m}"),
        }
    }
}

impl From<pwdeming::Error> for Failure {
    fn from(e: pwdeming::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "pwdeming", version, about = "Precision-profile weighted Deming regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a method-comparison data set and report inference and diagnostics.
    Fit(FitArgs),
    /// Run a Monte-Carlo study from a JSON design.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with a header naming x, y and optionally id.
    data: PathBuf,
    /// Predicate precision profile as JSON, or a path to a JSON file.
    #[arg(long)]
    profile_x: Option<String>,
    /// Test precision profile as JSON, or a path to a JSON file.
    #[arg(long)]
    profile_y: Option<String>,
    /// Ratio of predicate to test variance for the standalone fit.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Decision level at which to predict the test value.
    #[arg(long)]
    mdl: Option<f64>,
    /// Run the sequential outlier screen.
    #[arg(long)]
    outliers: bool,
    /// Trim budget for the outlier screen (default 5% of n).
    #[arg(long)]
    k_max: Option<usize>,
    /// Significance level for the outlier screen.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Seed for the QQ reference distribution.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Directory to receive plot-data CSV files.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation design.
    #[arg(long)]
    config: PathBuf,
    /// Output prefix: writes PREFIX.json and PREFIX.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the design's replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the design's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn read_profile(arg: &str) -> Result<PrecisionProfile, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::Data(format!("cannot read profile {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("profile {arg}: {e}")))
}

fn fitter_for(args: &FitArgs) -> Result<Fitter, Failure> {
    match (&args.profile_x, &args.profile_y) {
        (Some(px), Some(py)) => {
            if args.lambda.is_some_and(|l| l != 1.0) {
                return Err(Failure::Usage("--lambda applies only without precision profiles".into()));
            }
            Ok(Fitter::Known {
                gx: read_profile(px)?,
                hy: read_profile(py)?,
            })
        }
        (None, None) => Ok(Fitter::Rl {
            lambda: args.lambda.unwrap_or(1.0),
        }),
        _ => Err(Failure::Usage("--profile-x and --profile-y must be given together".into())),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Numerical(format!("cannot serialize report: {e}")))
}

fn cmd_fit(args: &FitArgs) -> Result<String, Failure> {
    let fitter = fitter_for(args)?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Failure::Usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let data = input::read_dataset(&args.data)?;
    let req = FitRequest {
        source: args.data.display().to_string(),
        fitter,
        level: args.level,
        mdl: args.mdl,
        outliers: (args.outliers || args.k_max.is_some()).then_some(OutlierOptions {
            k_max: args.k_max,
            alpha_level: args.alpha,
        }),
        seed: args.seed,
    };
    let rep = analyse(&data, &req)?;
    if let Some(dir) = &args.plots {
        plots::write_all(dir, &data, rep.fit.alpha(), rep.fit.beta(), &rep.residuals)?;
    }
    match args.format {
        Format::Json => to_json(&rep),
        Format::Text => Ok(text::render(&rep)),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<String, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", args.config.display())))?;
    let mut design: SimDesign = serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("invalid design {}: {e}", args.config.display())))?;
    if let Some(r) = args.replicates {
        design.replicates = r;
    }
    if let Some(s) = args.seed {
        design.seed = s;
    }
    let problems = design.problems();
    if !problems.is_empty() {
        return Err(Failure::Data(format!("invalid design: {}", problems.join("; "))));
    }
    let result = run_study(&design)?;
    if let Some(prefix) = &args.out {
        let with = |ext: &str| {
            let mut p = prefix.clone().into_os_string();
            p.push(ext);
            PathBuf::from(p)
        };
        let write = |path: PathBuf, body: String| {
            fs::write(&path, body).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
        };
        write(with(".json"), to_json(&result)?)?;
        write(with(".csv"), result.to_csv())?;
    }
    match args.format {
        Format::Json => to_json(&result),
        Format::Text => Ok(result.table()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("pwdeming: {f}");
            ExitCode::from(f.code())
        }
    }
}
