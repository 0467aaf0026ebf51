use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cuspidal_cli::{cmd_expand, cmd_petersson, cmd_selftest, Cache, FormDescriptor, Options, Output};

/// Fourier expansions at every cusp of Gamma0(N) and Petersson products.
///
/// A FORM is a bundled fixture id (delta, 11a, theta, e4, e6), a JSON descriptor, or
/// @path to a JSON file. Results are JSON on stdout; logs go to stderr.
#[derive(Parser, Debug)]
#[command(name = "cuspidal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Target accuracy in decimal digits.
    #[arg(long, global = true, default_value_t = 19)]
    digits: u32,
    /// Coefficients per cusp for `expand`.
    #[arg(long, global = true, default_value_t = 20)]
    length: usize,
    /// Level N; defaults to the level of the form(s).
    #[arg(long, global = true)]
    level: Option<u64>,
    /// Expected weight, e.g. 12 or 1/2; checked against the form.
    #[arg(long, global = true)]
    weight: Option<String>,
    /// auto, haberland, nelson or oracle.
    #[arg(long, global = true, default_value = "auto")]
    method: String,
    /// Worker threads (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, env = "CUSPIDAL_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Skip the representation cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Write the run manifest here.
    #[arg(long, global = true)]
    manifest_out: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expansions of a form at every cusp, or at one.
    Expand {
        form: String,
        /// A cusp as "a/c" or "oo".
        #[arg(long)]
        cusp: Option<String>,
    },
    /// Petersson product <f, g>; g defaults to f.
    Petersson { f: String, g: Option<String> },
    /// Quick checks against known values.
    Selftest,
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let cache = if cli.no_cache { Cache::disabled() } else { Cache::new(cli.cache_dir.clone().or_else(Cache::default_dir)) };
    let opts = Options {
        digits: cli.digits,
        length: cli.length,
        level: cli.level,
        weight: cli.weight.clone(),
        method: cli.method.clone(),
        jobs: cli.jobs,
        cache,
    };
    let out = match &cli.command {
        Command::Expand { form, cusp } => cmd_expand(&FormDescriptor::parse_arg(form)?, cusp.as_deref(), &opts)?,
        Command::Petersson { f, g } => {
            let f = FormDescriptor::parse_arg(f)?;
            let g = match g {
                Some(g) => FormDescriptor::parse_arg(g)?,
                None => f.clone(),
            };
            cmd_petersson(&f, &g, &opts)?
        }
        Command::Selftest => cmd_selftest(&opts)?,
    };
    if let Some(path) = &cli.manifest_out {
        std::fs::write(path, serde_json::to_string_pretty(&out.manifest)?)?;
    }
    Ok(out)
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).target(env_logger::Target::Stderr).init();
    match run(&cli) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&out.json).expect("json"));
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(cuspidal_cli::error::exit_code(&e));
        }
    }
}
