use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dln_lda::harness::{run_experiment, verify_suite, ExperimentConfig, HarnessError, InitMagnitudes, Scope, TableFormat};
use dln_lda::scatter::{synthesize_scatter, ScatterDocument, Spread};

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "dln-lda", version, about = "Rayleigh-quotient dynamics on diagonal linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the depth-comparison experiment and write trajectory tables.
    Run(RunArgs),
    /// Run the randomized invariant suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        scope: Scope,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a synthesized scatter pair as JSON.
    Synth {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = parse_pair, default_value = "0.4,0.6")]
        spread: [f64; 2],
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; fields missing from it take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_pair)]
    spread: Option<[f64; 2]>,
    /// `ones` or comma-separated positive values.
    #[arg(long = "init-magnitudes", alias = "init_magnitudes")]
    init_magnitudes: Option<InitMagnitudes>,
    #[arg(long = "record-every", alias = "record_every")]
    record_every: Option<usize>,
    #[arg(long = "output-dir", alias = "output_dir")]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?,
            b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?,
        ]),
        _ => Err(format!("expected lo,hi, got {s:?}")),
    }
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig, HarnessError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.depths {
            c.depths = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.spread {
            c.spread = v;
        }
        if let Some(v) = self.init_magnitudes {
            c.init_magnitudes = v;
        }
        if let Some(v) = self.record_every {
            c.record_every = v;
        }
        if let Some(v) = self.output_dir {
            c.output_dir = v;
        }
        if let Some(v) = self.format {
            c.format = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Io { .. } | HarnessError::Table { .. } => EXIT_IO,
        HarnessError::Config(_) | HarnessError::Numerical(_) => EXIT_CONFIG,
    }
}

fn run(args: RunArgs) -> Result<u8, HarnessError> {
    let config = args.resolve()?;
    let artifact = run_experiment(&config)?;
    println!("lambda_min = {:.12e}", artifact.oracle.lambda_min);
    println!(
        "{:>5} {:>10} {:>16} {:>16} {:>12} {:>12} {:>10}  status",
        "L", "final t", "initial loss", "final loss", "q drift", "min/max w", "unstable"
    );
    let mut code = 0;
    for r in &artifact.runs {
        let status = match &r.termination {
            dln_lda::dynamics::Termination::Completed => "completed".to_string(),
            other => format!("{other:?}"),
        };
        println!(
            "{:>5} {:>10} {:>16.9e} {:>16.9e} {:>12.3e} {:>12.3e} {:>10}  {status}",
            r.depth,
            r.final_epoch,
            r.initial_loss,
            r.final_loss,
            r.conservation.max_relative_drift,
            r.sparsity_ratio,
            r.first_unstable_epoch.map_or("-".into(), |t| t.to_string()),
        );
        if r.final_loss_gap < -1e-10 {
            eprintln!("L = {}: final loss below lambda_min by {:e}", r.depth, -r.final_loss_gap);
            code = EXIT_INVARIANT;
        }
    }
    println!("wrote {}", config.output_dir.join("artifact.json").display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify { scope, trials, seed } => {
            let report = verify_suite(scope, trials, seed);
            print!("{report}");
            Ok(if report.passed() { 0 } else { EXIT_INVARIANT })
        }
        Command::Synth { dim, seed, spread } => {
            let spread = Spread::new(spread[0], spread[1]);
            synthesize_scatter(dim, seed, spread)
                .map_err(|e| HarnessError::Config(e.to_string()))
                .map(|pair| {
                    let doc = ScatterDocument::new(&pair, seed, spread);
                    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
                    0
                })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
