use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpqhd::report::{
    default_out, execute, exit_code, load_config, write_outcome, Operation, RunConfig, EXIT_CONFIG,
};
use mpqhd::scenarios::{list_scenarios, scenario};
use mpqhd::{Error, Result};

#[derive(Parser)]
#[command(name = "mpqhd", version, about = "Many-particle quantum hydrodynamics fields and balance-law checks")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// List bundled scenarios whose name contains FILTER.
    List {
        #[arg(default_value = "")]
        filter: String,
    },
    /// Densities, currents, velocities and the scalar quantum pressure.
    Fields(RunArgs),
    /// Momentum-flow and pressure tensors with their identity checks.
    Tensors(RunArgs),
    /// Balance-law residuals and convergence orders over a refinement ladder.
    Check(RunArgs),
    /// Cylindrical pressure tensors compared with the Cartesian ones.
    Cyl(RunArgs),
    /// Every operation the scenario supports, or those named in the config.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name.
    #[arg(value_name = "SCENARIO")]
    name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    scenario: Option<String>,
    /// Config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of grids (each refinement halves the spacing).
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative density threshold below which velocities are undefined.
    #[arg(long)]
    eps: Option<f64>,
    /// Raise the configuration-grid point cap.
    #[arg(long = "cap-override")]
    cap_override: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: RunArgs, verb: Option<Operation>) -> Result<RunConfig> {
    let name = args.name.or(args.scenario);
    let mut cfg = match (&args.config, name) {
        (Some(path), None) => load_config(path)?,
        (Some(_), Some(_)) => return Err(Error::Config("give either a scenario or --config, not both".into())),
        (None, Some(n)) => RunConfig::for_scenario(scenario(&n)?, Vec::new()),
        (None, None) => return Err(Error::Config("no scenario given".into())),
    };
    match verb {
        Some(op) => cfg.operations = vec![op],
        None if cfg.operations.is_empty() => {
            cfg.operations = Operation::ALL
                .into_iter()
                .filter(|op| *op != Operation::Cyl || cfg.scenario.spec.spatial_dim == 3)
                .collect()
        }
        None => {}
    }
    if args.levels.is_some() {
        cfg.levels = args.levels;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    if let Some(e) = args.eps {
        cfg.eps = e;
    }
    if let Some(c) = args.cap_override {
        cfg.cap = c;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs, verb: Option<Operation>) -> i32 {
    let cfg = match build_config(args, verb) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::CapExceeded { .. } => exit_code(&e),
                _ => EXIT_CONFIG,
            };
        }
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let dir = cfg.out.clone().unwrap_or_else(|| default_out(&cfg));
    if let Err(e) = write_outcome(&outcome, &dir) {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    for op in &outcome.summary.operations {
        let failed: Vec<&str> = op.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        println!("{:<8} {:?}  {} checks, {} failed", op.operation.name(), op.verdict, op.checks.len(), failed.len());
        for f in failed {
            println!("  failed: {f}");
        }
    }
    println!("verdict {:?}, artifacts in {}", outcome.summary.verdict, dir.display());
    outcome.exit_code()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.verb {
        Verb::List { filter } => {
            for (name, desc) in list_scenarios(&filter) {
                println!("{name:<18} {desc}");
            }
            0
        }
        Verb::Fields(a) => run(a, Some(Operation::Fields)),
        Verb::Tensors(a) => run(a, Some(Operation::Tensors)),
        Verb::Check(a) => run(a, Some(Operation::Check)),
        Verb::Cyl(a) => run(a, Some(Operation::Cyl)),
        Verb::Report(a) => run(a, None),
    };
    ExitCode::from(code as u8)
}
