use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rfk::commands::{self, IcSource};
use rfk::config::{self, Origin, RawConfig};
use rfk::{CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rfk", version, about = "Learn interaction kernels of multi-agent systems with random radial features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (`key = value` lines with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment table.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["ols", "ridge", "htp", "nnls"])]
    solver: Option<String>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one key, e.g. `--set data.L=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// No progress messages.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ics {
    Test,
    Train,
}

impl From<Ics> for IcSource {
    fn from(i: Ics) -> Self {
        match i {
            Ics::Test => IcSource::Test,
            Ics::Train => IcSource::Train,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Trajectories of the true system on [0, T_tilde].
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "test")]
        ics: Ics,
    },
    /// Train, evaluate and write all artifacts.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Trajectories of a learned system (the true one without --basis).
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        ics: Ics,
    },
    /// Kernel and path-wise errors of a stored basis.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        basis: PathBuf,
    },
    /// HTP errors over the sparsity levels of `sweep.s_list`.
    SweepSparsity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sparsity levels (overrides `sweep.s_list`).
        #[arg(long)]
        s_list: Option<String>,
    },
    /// Radial against random Fourier features.
    CompareRff {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, extra: &[(&str, String)]) -> Result<ExperimentConfig, CliError> {
    let mut raw = match &common.config {
        Some(p) => config::load_config(p)?,
        None => config::parse_config("")?,
    };
    if let Some(p) = &common.preset {
        let mut fresh = config::from_preset(p)?;
        if let Some(path) = &common.config {
            let file = config::load_config(path)?;
            for (k, v) in file.iter() {
                if let Some((_, Origin::Line(l))) = file.get(k) {
                    fresh.set(k, v, Origin::Line(*l))?;
                }
            }
        }
        raw = fresh;
    }
    let set = |raw: &mut RawConfig, k: &str, v: String| raw.set(k, &v, Origin::Override);
    if let Some(s) = common.seed {
        set(&mut raw, "seed", s.to_string())?;
    }
    if let Some(s) = &common.solver {
        set(&mut raw, "solver.method", s.clone())?;
    }
    if let Some(s) = common.sparsity {
        set(&mut raw, "solver.sparsity", s.to_string())?;
    }
    if let Some(l) = common.lambda {
        set(&mut raw, "solver.lambda", l.to_string())?;
    }
    if let Some(o) = &common.out {
        set(&mut raw, "out", o.display().to_string())?;
    }
    for (k, v) in extra {
        set(&mut raw, k, v.clone())?;
    }
    for item in &common.overrides {
        raw.apply_override(item)?;
    }
    Ok(ExperimentConfig::from_raw(&raw)?)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, extra) = match &cli.command {
        Command::SweepSparsity { common, s_list: Some(s) } => (common, vec![("sweep.s_list", s.clone())]),
        Command::Simulate { common, .. }
        | Command::Run { common }
        | Command::Forecast { common, .. }
        | Command::Evaluate { common, .. }
        | Command::SweepSparsity { common, .. }
        | Command::CompareRff { common } => (common, vec![]),
    };
    rfk::pipeline::set_verbose(!common.quiet);
    let cfg = resolve(common, &extra)?;
    let out = PathBuf::from(&cfg.out);
    let exp = Experiment::new(cfg)?;
    let show = |p: &Path| println!("{}", p.display());
    match &cli.command {
        Command::Simulate { ics, .. } => show(&commands::simulate_cmd(&exp, (*ics).into(), &out)?),
        Command::Forecast { basis, ics, .. } => show(&commands::forecast_cmd(&exp, basis.as_deref(), (*ics).into(), &out)?),
        Command::Run { .. } => print!("{}", commands::run(&exp, &out)?.render()),
        Command::Evaluate { basis, .. } => print!("{}", commands::evaluate(&exp, basis, &out)?.render()),
        Command::SweepSparsity { .. } => {
            commands::sweep_sparsity(&exp, &out)?;
            print!("{}", commands::read_file(&out.join("sweep_sparsity.csv"))?);
        }
        Command::CompareRff { .. } => print!("{}", commands::compare_rff(&exp, &out)?.render()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
