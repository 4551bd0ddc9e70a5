//! `torus-lab`: runs experiments from flags or a JSON config and writes a
//! report JSON plus TSV tables. Exit status 0 when every assertion passed,
//! 1 when one failed, 2 for invalid input.

mod config;
mod exec;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use torus_lab::suite::{run_suite, SuiteName};

use config::*;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "TORUS_LAB_OUT";

#[derive(Parser, Debug)]
#[command(name = "torus-lab", version, about = "Heat, Riesz and Lipschitz experiments on weighted tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// power:<λ>, geometric:<σ> or explicit:<a_1,...>
    #[arg(long)]
    weights: Option<String>,
    /// Torus dimension.
    #[arg(long = "d")]
    dim: Option<usize>,
    /// Bandwidth of the first axis; the others follow the default rule.
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Output directory (default: $TORUS_LAB_OUT or ./torus-lab-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exponent(s: &str) -> Result<Exponent, String> {
    Exponent::parse(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CK_λ classification of a weight sequence.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-6)]
        tmin: f64,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        #[arg(long, default_value_t = 120)]
        points: usize,
    },
    /// L^p analyticity and L¹/L^∞ time-derivative bounds.
    KernelBounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-2)]
        tmin: f64,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 30)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// Dictionary ratios of Riesz transforms against 2(p*−1).
    RieszBounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// Operators such as R_1, R_1R_2, R^G.
        #[arg(long, value_delimiter = ',')]
        ops: Option<Vec<String>>,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Fitted constants of the heat-gradient estimate.
    GradientBounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', value_parser = exponent)]
        p: Option<Vec<Exponent>>,
        #[arg(long, default_value_t = 1e-2)]
        tmin: f64,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// One Lipschitz seminorm of one field.
    Seminorm {
        #[command(flatten)]
        common: Common,
        /// cos:<n>, sin:<n>, random:<seed>[:<α>]
        #[arg(long, default_value = "cos:1")]
        field: String,
        #[arg(long, value_enum, default_value = "semigroup")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long)]
        order: Option<u32>,
        #[arg(long, default_value = "inf", value_parser = exponent)]
        p: Exponent,
    },
    /// Family ratios between the semigroup and distance scales.
    SeminormCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "backward")]
        direction: DirectionArg,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = "2", value_parser = exponent)]
        p: Exponent,
        #[arg(long, default_value_t = 25)]
        lacunary: usize,
        #[arg(long, default_value_t = 25)]
        random: usize,
        #[arg(long, default_value_t = 99)]
        seed: u64,
        /// Also run on a doubled grid and assert ratio stability.
        #[arg(long)]
        doubling: bool,
    },
    /// Riesz tail convergence and Lipschitz regularity of L^{-1} f.
    PoissonRegularity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value = "2", value_parser = exponent)]
        p: Exponent,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 606)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        fields: usize,
    },
    /// Monte Carlo martingale pairing against the Riesz transform.
    McRiesz {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 3.0)]
        y0: f64,
        /// One-based axis.
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long, default_value = "cos:1")]
        f: String,
        #[arg(long, default_value = "sin:1")]
        h: String,
        #[arg(long, default_value_t = 1)]
        panel: usize,
        #[arg(long)]
        dump_paths: bool,
    },
    /// Fixed battery: acceptance or quick.
    Suite {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the JSON schema of experiment configs.
    Schema,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ScaleArg {
    Semigroup,
    Distance,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Forward,
    Backward,
}

fn config_from(common: &Common, weights: &str, dim: usize, experiment: Experiment) -> (ExperimentConfig, Option<PathBuf>) {
    let cfg = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        weights: WeightSpec::Named(common.weights.clone().unwrap_or_else(|| weights.to_string())),
        dim: common.dim.unwrap_or(dim),
        bandwidths: None,
        first_bandwidth: common.bandwidth,
        output_dir: None,
        experiment,
    };
    (cfg, common.out.clone())
}

fn build(command: Command) -> Result<(ExperimentConfig, Option<PathBuf>), String> {
    Ok(match command {
        Command::Classify { common, lambdas, tmin, tmax, points } => {
            let mut p = ClassifyParams { t_min: tmin, t_max: tmax, t_points: points, ..Default::default() };
            if let Some(l) = lambdas {
                p.lambdas = l;
            }
            config_from(&common, "power:0.5", 4, Experiment::Classify(p))
        }
        Command::KernelBounds { common, p, tmin, tmax, points, trials, seed } => {
            let mut params =
                KernelBoundsParams { t_min: tmin, t_max: tmax, t_points: points, trials_per_kind: trials, seed, ..Default::default() };
            if let Some(p) = p {
                params.p = p;
            }
            let mut c = config_from(&common, "explicit:1,4", 2, Experiment::KernelBounds(params));
            c.0.first_bandwidth = c.0.first_bandwidth.or(Some(8));
            c
        }
        Command::RieszBounds { common, p, ops, trials, seed } => {
            let mut params = RieszBoundsParams { trials_per_kind: trials, seed, ..Default::default() };
            if let Some(p) = p {
                params.p = p;
            }
            if let Some(ops) = ops {
                params.ops = ops;
            }
            let mut c = config_from(&common, "power:0.5", 4, Experiment::RieszBounds(params));
            c.0.first_bandwidth = c.0.first_bandwidth.or(Some(3));
            c
        }
        Command::GradientBounds { common, p, tmin, tmax, points, trials, seed } => {
            let mut params = GradientBoundsParams {
                t_min: tmin,
                t_max: tmax,
                t_points: points,
                trials_per_kind: trials,
                seed,
                ..Default::default()
            };
            if let Some(p) = p {
                params.p = p;
            }
            config_from(&common, "explicit:1,4", 2, Experiment::GradientBounds(params))
        }
        Command::Seminorm { common, field, scale, theta, order, p } => {
            let scale = match scale {
                ScaleArg::Semigroup => SeminormScale::Semigroup,
                ScaleArg::Distance => SeminormScale::Distance,
            };
            config_from(&common, "explicit:4", 1, Experiment::Seminorm(SeminormParams { field, scale, theta, order, p }))
        }
        Command::SeminormCompare { common, direction, theta, lambda, p, lacunary, random, seed, doubling } => {
            let direction = match direction {
                DirectionArg::Forward => Direction::Forward,
                DirectionArg::Backward => Direction::Backward,
            };
            let params = CompareParams { direction, theta, lambda, p, lacunary, random, seed, doubling };
            let mut c = config_from(&common, "explicit:1,2", 2, Experiment::SeminormCompare(params));
            c.0.first_bandwidth = c.0.first_bandwidth.or(Some(32));
            c
        }
        Command::PoissonRegularity { common, theta, p, lambda, seed, fields } => {
            let params = PoissonParams { theta, p, lambda, seed, fields, ..Default::default() };
            config_from(&common, "power:0.5", 6, Experiment::PoissonRegularity(params))
        }
        Command::McRiesz { common, paths, seed, dt, y0, axis, f, h, panel, dump_paths } => {
            let params = McRieszParams { f, h, axis, paths, seed, dt, y0, y_cap: None, panel, dump_paths };
            let mut c = config_from(&common, "power:0.5", 1, Experiment::McRiesz(params));
            c.0.first_bandwidth = c.0.first_bandwidth.or(Some(2));
            c
        }
        Command::Run { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| format!("cannot read {}: {e}", config.display()))?;
            let cfg = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
            (cfg, out)
        }
        Command::Suite { .. } | Command::Schema => unreachable!("handled before building a config"),
    })
}

fn output_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.output_dir.clone()).map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("torus-lab-out"))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run_experiment(cfg: ExperimentConfig, out: Option<PathBuf>) -> ExitCode {
    let resolved = match cfg.validate().and_then(|_| cfg.resolved()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = output_dir(out, Some(&resolved));
    let kind = resolved.experiment.kind();
    let result = match exec::execute(&resolved) {
        Ok(r) => r,
        Err(e @ torus_lab::LabError::InvalidParameter(_)) | Err(e @ torus_lab::LabError::InvalidWeights(_)) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{kind} failed: {e}");
            return ExitCode::from(1);
        }
    };
    let passed = result.passed();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": concat!("torus-lab ", env!("CARGO_PKG_VERSION")),
        "config": resolved,
        "passed": passed,
        "reports": result.reports,
        "results": result.extra,
    });
    let body = serde_json::to_string_pretty(&doc).expect("reports serialize");
    let mut files = vec![(format!("{kind}.json"), body + "\n")];
    files.extend(result.tables.iter().map(|(n, t)| (format!("{kind}-{n}.tsv"), t.clone())));
    for (name, body) in &files {
        if let Err(e) = write(&dir, name, body) {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    }
    for r in &result.reports {
        println!("{:<28} {}  checks={} slack={:.3e}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.checks, r.worst_slack);
        if let Some(w) = r.witness.as_ref().filter(|_| !r.passed) {
            println!("  witness: {} (value {} bound {})", w.description, w.value, w.bound);
        }
    }
    println!("wrote {} file(s) to {}", files.len(), dir.display());
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn suite(name: &str, out: Option<PathBuf>) -> ExitCode {
    let Ok(which) = name.parse::<SuiteName>() else {
        eprintln!("unknown suite {name:?} (expected acceptance or quick)");
        return ExitCode::from(2);
    };
    let summary = run_suite(which, |c| println!("{}", c.line()));
    let timing: serde_json::Map<String, serde_json::Value> =
        summary.criteria.iter().map(|c| (c.id.to_string(), json!(c.seconds))).collect();
    let criteria: Vec<_> = summary
        .criteria
        .iter()
        .map(|c| {
            json!({
                "id": c.id, "name": c.name, "passed": c.passed, "worst_slack": c.worst_slack,
                "checks": c.checks, "witness": c.witness, "fitted": c.fitted, "notes": c.notes,
            })
        })
        .collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "suite": which.to_string(),
        "passed": summary.passed,
        "criteria": criteria,
        "timing_seconds": timing,
    });
    let dir = output_dir(out, None);
    if let Err(e) = write(&dir, &format!("suite-{which}.json"), &(serde_json::to_string_pretty(&doc).unwrap() + "\n")) {
        eprintln!("{e}");
        return ExitCode::from(1);
    }
    println!("{} suite {}", which, if summary.passed { "passed" } else { "FAILED" });
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Suite { name, out } => suite(&name, out),
        Command::Schema => {
            let schema = schemars::schema_for!(ExperimentConfig);
            let text = serde_json::to_string_pretty(&schema).expect("schema serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        other => match build(other) {
            Ok((cfg, out)) => run_experiment(cfg, out),
            Err(e) => {
                eprintln!("invalid config: {e}");
                ExitCode::from(2)
            }
        },
    }
}
