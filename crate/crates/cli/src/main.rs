use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand};

use vasilab::config::Config;
use vasilab::Error;

mod commands;

/// Vasicek models driven by Gaussian processes: simulation, estimation,
/// Hilbert-space constants and Monte-Carlo CLT experiments.
#[derive(Parser, Debug)]
#[command(name = "vasilab", version)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Overrides a config key; applied after the file, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for `--set seed=<SEED>`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Shorthand for `--set workers=<N>`.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output file (simulate, estimate, norms) or directory (clt, rate, report).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Simulate one driver and Vasicek path, written as `t,g,v` CSV.
    Simulate,
    /// Run estimators on a path CSV.
    Estimate,
    /// Evaluate named constants, written as `name,value,est_error` CSV.
    Norms,
    /// Kolmogorov distance and variance of the standardised statistic at one horizon.
    Clt,
    /// Kolmogorov distances over a sweep of horizons and the fitted rate.
    Rate,
    /// Summarise a report CSV and write plot data.
    Report,
}

impl Cmd {
    const ALL: [Cmd; 6] = [Cmd::Simulate, Cmd::Estimate, Cmd::Norms, Cmd::Clt, Cmd::Rate, Cmd::Report];

    fn name(self) -> &'static str {
        match self {
            Cmd::Simulate => "simulate",
            Cmd::Estimate => "estimate",
            Cmd::Norms => "norms",
            Cmd::Clt => "clt",
            Cmd::Rate => "rate",
            Cmd::Report => "report",
        }
    }
}

fn key_help(cmd: Cmd) -> String {
    let keys = commands::accepted_keys(cmd.name());
    let mut s = String::from("Config keys:\n");
    for chunk in keys.chunks(6) {
        s.push_str("  ");
        s.push_str(&chunk.join(", "));
        s.push('\n');
    }
    s
}

fn build_config(cli: &Cli) -> vasilab::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        cfg.apply_override(pair)?;
    }
    let accepts = |k: &str| commands::accepted_keys(cli.command.name()).contains(&k);
    let mut shorthand = |key: &str, value: Option<String>| -> vasilab::Result<()> {
        if let Some(v) = value {
            if !accepts(key) {
                return Err(Error::Config(format!(
                    "`{}` does not take `{key}`",
                    cli.command.name()
                )));
            }
            cfg.set(key, &v);
        }
        Ok(())
    };
    shorthand("seed", cli.seed.map(|s| s.to_string()))?;
    shorthand("workers", cli.workers.map(|w| w.to_string()))?;
    if matches!(cli.command, Cmd::Clt | Cmd::Rate | Cmd::Report) {
        shorthand("out_dir", cli.out.as_ref().map(|p| p.display().to_string()))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let mut command = Cli::command();
    for c in Cmd::ALL {
        command = command.mut_subcommand(c.name(), |s| s.after_help(key_help(c)));
    }
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = build_config(&cli).and_then(|cfg| {
        let out = match cli.command {
            Cmd::Simulate | Cmd::Estimate | Cmd::Norms => cli.out.as_deref(),
            _ => None,
        };
        commands::run(cli.command.name(), &cfg, out)
    });
    match result {
        Ok(commands::Outcome::Clean) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Tainted) => {
            eprintln!("warning: results are tainted by degenerate or failed replications");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
