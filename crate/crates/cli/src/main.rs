//! `lstark`: command-line front end. Every subcommand writes its data files
//! and a `manifest.json` with their hashes into `--out`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 64 usage error.

mod commands;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use landau_stark::recipes::recipe;
use landau_stark::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "lstark", version, about = "Charged particle on a lattice strip in crossed magnetic and electric fields")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: HS_THREADS or the core count).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// `key = value` file of flag defaults; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Start from a figure's parameters (fig1 .. fig5).
    #[arg(long, global = true)]
    pub recipe: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Magnetic bands of the infinite lattice at zero field.
    Bands(commands::BandsArgs),
    /// Strip spectrum against κ with edge-state labels.
    Strip(commands::StripArgs),
    /// Stark–Harper ladder at fixed κ with dispersion slopes.
    Ladder(commands::LadderArgs),
    /// Landau–Stark states of a finite strip and their spatial density.
    Lss(commands::LssArgs),
    /// One-dimensional Bloch-period operator spectrum over κ.
    Floquet(commands::FloquetArgs),
    /// Wave-packet propagation: drift, supercritical or edge runs.
    Evolve(commands::EvolveArgs),
    /// Ground-band depletion of an ensemble.
    Depletion(commands::DepletionArgs),
    /// Classical trajectory with wall contacts and cycle analysis.
    Classical(commands::ClassicalArgs),
    /// Twin-trajectory divergence.
    Sensitivity(commands::SensitivityArgs),
    /// Quasienergies of the period operator against F.
    Levelflow(commands::FlowArgs),
    /// Nearest-neighbour spacing statistics of the level flow.
    Spacings(commands::FlowArgs),
}

/// Failure of a run, carrying its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL },
            message: e.to_string(),
        }
    }
}

pub fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

/// Index of the subcommand token in `argv`.
fn subcommand_position(argv: &[String]) -> Option<usize> {
    let valued = ["--out", "--threads", "--config", "--recipe"];
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if valued.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Flag defaults from the recipe and the config file, as `--key value`
/// pairs. Recipe keys the subcommand does not know are dropped; unknown
/// config-file keys are an error.
fn injected_defaults(cli: &Cli, sub: &clap::Command) -> Result<Vec<String>, Failure> {
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let mut out = Vec::new();
    if let Some(name) = &cli.recipe {
        let r = recipe(name)?;
        let mut pairs: Vec<(&str, String)> = Vec::new();
        if let Some(a) = r.alpha {
            pairs.push(("alpha", a.to_string()));
        }
        if let Some(j) = r.hopping {
            pairs.push(("J", format!("{j:?}")));
        }
        if let Some(f) = r.field {
            pairs.push(("F", format!("{f:?}")));
        }
        if let Some(w) = r.width {
            pairs.push(("Lx", w.to_string()));
        }
        if let Some(e) = r.kinetic_energy {
            pairs.push(("EK", e.to_string()));
        }
        if !r.checkpoints_tb.is_empty() {
            let c: Vec<String> = r.checkpoints_tb.iter().map(|c| format!("{c:?}")).collect();
            pairs.push(("checkpoints", c.join(",")));
        }
        for (k, v) in pairs {
            if known.iter().any(|n| n == k) {
                out.push(format!("--{k}"));
                out.push(v);
            }
        }
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_failure(format!("cannot read config {}: {e}", path.display())))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_failure(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            let key = k.trim().replace('_', "-");
            if !known.iter().any(|n| *n == key) {
                return Err(config_failure(format!(
                    "{}:{}: unknown key {:?} for {}",
                    path.display(),
                    n + 1,
                    k.trim(),
                    sub.get_name()
                )));
            }
            out.push(format!("--{key}"));
            out.push(v.trim().trim_matches('"').to_string());
        }
    }
    Ok(out)
}

fn parse(argv: &[String]) -> Result<Cli, Failure> {
    let usage = |e: clap::Error| -> Failure {
        use clap::error::ErrorKind::*;
        let code = match e.kind() {
            DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand => 0,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.render().to_string(),
        }
    };
    let first = Cli::try_parse_from(argv).map_err(usage)?;
    if first.recipe.is_none() && first.config.is_none() {
        return Ok(first);
    }
    let pos = subcommand_position(argv).ok_or_else(|| config_failure("missing subcommand"))?;
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(&argv[pos])
        .ok_or_else(|| config_failure("unknown subcommand"))?;
    let extra = injected_defaults(&first, sub)?;
    let mut full: Vec<String> = argv[..=pos].to_vec();
    full.extend(extra);
    full.extend_from_slice(&argv[pos + 1..]);
    let m = Cli::command().try_get_matches_from(&full).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: e.render().to_string(),
    })?;
    Cli::from_arg_matches(&m).map_err(usage)
}

pub fn run(argv: &[String]) -> Result<(), Failure> {
    let cli = parse(argv)?;
    let threads = cli.threads.unwrap_or_else(landau_stark::parallel::default_threads).max(1);
    let ctx = commands::Context {
        out: cli.out.clone(),
        threads,
    };
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| config_failure(format!("cannot create {}: {e}", ctx.out.display())))?;
    match &cli.command {
        Command::Bands(a) => commands::bands(&ctx, a),
        Command::Strip(a) => commands::strip(&ctx, a),
        Command::Ladder(a) => commands::ladder(&ctx, a),
        Command::Lss(a) => commands::lss(&ctx, a),
        Command::Floquet(a) => commands::floquet(&ctx, a),
        Command::Evolve(a) => commands::evolve(&ctx, a),
        Command::Depletion(a) => commands::depletion(&ctx, a),
        Command::Classical(a) => commands::classical(&ctx, a),
        Command::Sensitivity(a) => commands::sensitivity(&ctx, a),
        Command::Levelflow(a) => commands::levelflow(&ctx, a, false),
        Command::Spacings(a) => commands::levelflow(&ctx, a, true),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.code == 0 {
                print!("{}", f.message);
            } else {
                eprintln!("lstark: {}", f.message.trim_end());
            }
            ExitCode::from(f.code)
        }
    }
}
