use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use unisto_cli::commands::{
    cmd_check, cmd_fit, cmd_quadruples, cmd_reconstruct, cmd_recover_angles, cmd_stats,
    cmd_triangles, parse_mode, Report, Settings, EXIT_INPUT, EXIT_NUMERICAL,
};
use unisto_cli::io::{parse_document, render_json, InputDocument, InputError};

/// Unistochasticity toolkit: decide whether a doubly stochastic matrix
/// comes from a unitary one, reconstruct that unitary, compute
/// unitarity-triangle geometry, and fit error-affected measurements.
#[derive(Parser)]
#[command(name = "unisto", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Input JSON document; a path, or `-`/absent for standard input.
    input: Option<PathBuf>,
    /// Line-sum tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Project the matrix onto the Birkhoff polytope (alternating
    /// row/column normalization, 100 sweeps) before processing.
    #[arg(long)]
    project: bool,
    /// Directory for CSV sidecar files.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    /// Seed for all randomized internals.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Structural objective: unitarity-condition, triangles, or merged.
    #[arg(long)]
    mode: Option<String>,
    /// Number of optimizer restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Optimizer iteration budget per restart.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Pair all corner-relation candidates per quadruple completion.
    #[arg(long)]
    all_relations: bool,
    /// Optimize the four mixing parameters instead of the nine moduli.
    #[arg(long)]
    constrained: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decide unistochasticity (n = 3 closed form, n = 4 numerical).
    Check(InputArgs),
    /// Reconstruct the unitary matrix in canonical gauge.
    Reconstruct(InputArgs),
    /// Compute all six unitarity triangles.
    Triangles(InputArgs),
    /// Recover mixing angles and phase-cosine candidates from the four
    /// measurable phase tangents.
    RecoverAngles(InputArgs),
    /// Chi-square fit of error-affected measurements.
    Fit(FitArgs),
    /// Entrywise statistics over an ensemble of unitary matrices.
    Stats(InputArgs),
    /// List the independent quadruples and the expression census.
    Quadruples {
        /// Seed for the numeric fingerprint census.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_document(input: &Option<PathBuf>) -> Result<InputDocument, InputError> {
    let text = match input {
        Some(path) if path.as_os_str() != "-" => std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?,
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| InputError(format!("cannot read standard input: {e}")))?;
            buf
        }
    };
    parse_document(&text)
}

fn settings_for(doc: &InputDocument, args: &InputArgs) -> Settings {
    let opts = doc.options.clone().unwrap_or_default();
    let mut s = Settings::default();
    if let Some(t) = args.tol.or(opts.tolerance) {
        s.tolerance = t;
    }
    if let Some(seed) = args.seed.or(opts.seed) {
        s.seed = seed;
    }
    s.restarts = opts.restarts;
    s.max_iterations = opts.max_iterations;
    s.project = args.project;
    s
}

fn run() -> Result<(Report, Option<PathBuf>), (i32, String)> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap renders its own message; usage problems are exit 3
        (EXIT_INPUT, e.render().to_string())
    })?;
    let input_error = |e: InputError| (EXIT_INPUT, format!("input error: {e}"));
    match cli.command {
        Command::Check(args) => {
            let doc = read_document(&args.input).map_err(input_error)?;
            let s = settings_for(&doc, &args);
            Ok((cmd_check(&doc, &s).map_err(input_error)?, args.csv_dir))
        }
        Command::Reconstruct(args) => {
            let doc = read_document(&args.input).map_err(input_error)?;
            let s = settings_for(&doc, &args);
            Ok((cmd_reconstruct(&doc, &s).map_err(input_error)?, args.csv_dir))
        }
        Command::Triangles(args) => {
            let doc = read_document(&args.input).map_err(input_error)?;
            let s = settings_for(&doc, &args);
            Ok((cmd_triangles(&doc, &s).map_err(input_error)?, args.csv_dir))
        }
        Command::RecoverAngles(args) => {
            let doc = read_document(&args.input).map_err(input_error)?;
            Ok((cmd_recover_angles(&doc).map_err(input_error)?, args.csv_dir))
        }
        Command::Fit(args) => {
            let doc = read_document(&args.input.input).map_err(input_error)?;
            let mut s = settings_for(&doc, &args.input);
            if let Some(mode) = args
                .mode
                .as_deref()
                .or(doc.options.as_ref().and_then(|o| o.mode.as_deref()))
            {
                s.mode = parse_mode(mode).map_err(input_error)?;
            }
            if args.restarts.is_some() {
                s.restarts = args.restarts;
            }
            if args.max_iterations.is_some() {
                s.max_iterations = args.max_iterations;
            }
            s.all_relations = args.all_relations;
            s.constrained = args.constrained;
            Ok((cmd_fit(&doc, &s).map_err(input_error)?, args.input.csv_dir))
        }
        Command::Stats(args) => {
            let doc = read_document(&args.input).map_err(input_error)?;
            let s = settings_for(&doc, &args);
            Ok((cmd_stats(&doc, &s).map_err(input_error)?, args.csv_dir))
        }
        Command::Quadruples { seed } => Ok((cmd_quadruples(seed), None)),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok((report, csv_dir)) => {
            print!("{}", render_json(&report.json));
            if let Some(dir) = csv_dir {
                for (name, content) in &report.csv {
                    if let Err(e) = std::fs::create_dir_all(&dir)
                        .and_then(|_| std::fs::write(dir.join(name), content))
                    {
                        eprintln!("cannot write CSV sidecar {name}: {e}");
                        return ExitCode::from(EXIT_NUMERICAL as u8);
                    }
                }
            }
            ExitCode::from(report.exit as u8)
        }
        Err((code, message)) => {
            eprintln!("{message}");
            ExitCode::from(code as u8)
        }
    }
}
