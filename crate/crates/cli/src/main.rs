//! `polyshrink`: synthetic data, forward runs, inversions and validation
//! for the depolymerisation and fragmentation models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use failure::{Failure, EXIT_VALIDATION};
use manifest::{OutputDir, RunManifest};

#[derive(Parser)]
#[command(name = "polyshrink", version, about = "Shrinkage kinetics of polymers: simulation and inversion")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Config file (`key = value` lines) or a `manifest.json` from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a bundled scenario's defaults (depoly-gaussian | frag-uniform-gamma2).
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `frag.kappa_route` (short-time | mellin | profile).
    #[arg(long, global = true)]
    kappa_route: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic data for the configured family: moment series or size samples.
    GenSynthetic,
    /// Exact, transport and transport–diffusion solutions with their errors.
    SimulateDepoly,
    /// Reconstructs the initial profile from a moment series.
    InvertDepoly {
        /// Moment CSV (`t,M<k>`).
        moments: PathBuf,
        /// Co-observed `M0` series, used with `k = 1` and `i0 ≥ 2`.
        #[arg(long)]
        m0: Option<PathBuf>,
    },
    /// Forward fragmentation trajectory and its moments.
    SimulateFrag,
    /// Fits γ and α, estimates κ and validates the fit on size samples.
    EstimateFrag {
        /// Sample CSV (`time,size`).
        samples: PathBuf,
    },
    /// Replays the configured model against size samples.
    ValidateFrag {
        /// Sample CSV (`time,size`).
        samples: PathBuf,
    },
    /// Prints the resolved config (every key, in canonical form).
    ShowConfig,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSynthetic => "gen-synthetic",
            Command::SimulateDepoly => "simulate-depoly",
            Command::InvertDepoly { .. } => "invert-depoly",
            Command::SimulateFrag => "simulate-frag",
            Command::EstimateFrag { .. } => "estimate-frag",
            Command::ValidateFrag { .. } => "validate-frag",
            Command::ShowConfig => "show-config",
        }
    }
}

fn load_config(g: &Global) -> Result<Config, Failure> {
    let mut cfg = match &g.scenario {
        Some(s) => config::scenario_defaults(s)?,
        None => Config::default(),
    };
    if let Some(path) = &g.config {
        let bytes = manifest::read_input(path)?;
        let text =
            String::from_utf8(bytes).map_err(|_| Failure::validation(format!("{}: not UTF-8", path.display())))?;
        let text = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str::<RunManifest>(&text)
                .map_err(|e| Failure::validation(format!("{}: not a run manifest: {e}", path.display())))?
                .config
        } else {
            text
        };
        cfg.apply(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    }
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(v) = g.seed {
        overrides.push(("seed".into(), v.to_string()));
    }
    if let Some(v) = &g.out {
        overrides.push(("out".into(), v.display().to_string()));
    }
    if let Some(v) = g.threads {
        overrides.push(("threads".into(), v.to_string()));
    }
    if let Some(v) = &g.kappa_route {
        overrides.push(("frag.kappa_route".into(), v.clone()));
    }
    for kv in &g.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| Failure::validation(format!("--set `{kv}`: expected KEY=VALUE")))?;
        overrides.push((k.trim().into(), v.into()));
    }
    for (k, v) in overrides {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let threads = cfg.usize("threads");
    if threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let mut out = OutputDir::create(Path::new(cfg.text("out")))?;
    match &cli.command {
        Command::GenSynthetic => match cfg.text("family") {
            "depoly" => commands::depoly::gen_synthetic(&cfg, &mut out)?,
            _ => commands::frag::gen_synthetic(&cfg, &mut out)?,
        },
        Command::SimulateDepoly => commands::depoly::simulate(&cfg, &mut out)?,
        Command::InvertDepoly { moments, m0 } => commands::depoly::invert(&cfg, moments, m0.as_deref(), &mut out)?,
        Command::SimulateFrag => commands::frag::simulate(&cfg, &mut out)?,
        Command::EstimateFrag { samples } => commands::frag::estimate(&cfg, samples, &mut out)?,
        Command::ValidateFrag { samples } => commands::frag::validate(&cfg, samples, &mut out)?,
        Command::ShowConfig => unreachable!("handled above"),
    }
    let manifest = out.finish(cli.command.name(), cfg.int("seed"), cfg.to_text())?;
    for (name, sum) in &manifest.outputs {
        println!("{sum}  {}", Path::new(cfg.text("out")).join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
