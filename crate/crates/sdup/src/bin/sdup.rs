//! Command-line front end: seeded experiment runs, parameter sweeps, and
//! the codec exposed over the SDUP1 file container.
//!
//! Exit codes: 0 success, 2 configuration error, 1 runtime error.
//! `SDUP_LOG=trace|info|...` controls diagnostics on standard error;
//! standard output carries only requested data.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use sdup::codec::{
    decode_frames, encode_frames, read_container, write_container, SessionKey,
};
use sdup::harness::{self, HarnessError, ScenarioConfig};
use sdup::sharing;

#[derive(Parser)]
#[command(name = "sdup", about = "SDUP ad hoc network confidentiality simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for a number of seeded trials and write a CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Master seed; overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Trial count; overrides the scenario's `trials`.
        #[arg(long)]
        trials: Option<u64>,
        /// Output CSV path; `-` writes to standard output.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Run the scenario once per value of a swept parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Scenario key to vary, e.g. `compromise_prob`.
        #[arg(long)]
        param: String,
        /// Comma-separated values for the swept key.
        #[arg(long)]
        values: String,
        /// Directory receiving one CSV per value.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split and encode standard input into an SDUP1 container on standard output.
    Encode {
        /// 16-byte session key, hex.
        #[arg(long)]
        key: String,
        #[arg(long)]
        k: u8,
        #[arg(long)]
        n: u8,
        /// Session identifier embedded in every frame.
        #[arg(long, default_value_t = 0)]
        session_id: u32,
        /// Seed for the sharing polynomial coefficients.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decode an SDUP1 container from standard input to standard output.
    Decode {
        /// 16-byte session key, hex.
        #[arg(long)]
        key: String,
        #[arg(long)]
        k: u8,
        #[arg(long)]
        n: u8,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config { .. } | HarnessError::Invalid(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn parse_key(hex_key: &str) -> Result<[u8; 16], CliError> {
    let bytes = hex::decode(hex_key)
        .map_err(|e| CliError::Config(format!("--key is not hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| CliError::Config("--key must be exactly 16 bytes of hex".into()))
}

fn load_scenario_file(path: &PathBuf) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    Ok(harness::load_scenario(&text)?)
}

fn cmd_run(
    scenario: &PathBuf,
    seed: Option<u64>,
    trials: Option<u64>,
    out: &str,
) -> Result<(), CliError> {
    let mut cfg = load_scenario_file(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    log::info!("running {} trial(s), seed {}", cfg.trials, cfg.seed);
    let metrics = harness::run_trials(&cfg)?;
    if out == "-" {
        let stdout = std::io::stdout();
        harness::write_csv(&metrics, &mut stdout.lock())?;
    } else {
        let mut file = std::fs::File::create(out)
            .map_err(|e| CliError::Runtime(format!("cannot create {out}: {e}")))?;
        harness::write_csv(&metrics, &mut file)?;
    }
    Ok(())
}

fn cmd_sweep(
    scenario: &PathBuf,
    param: &str,
    values: &str,
    out: &PathBuf,
) -> Result<(), CliError> {
    let cfg = load_scenario_file(scenario)?;
    let values: Vec<String> =
        values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(CliError::Config("--values must be a nonempty comma list".into()));
    }
    let files = harness::sweep(&cfg, param, &values, out)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for f in files {
        writeln!(lock, "{}", f.display())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn cmd_encode(hex_key: &str, k: u8, n: u8, session_id: u32, seed: u64) -> Result<(), CliError> {
    let key = SessionKey { key: parse_key(hex_key)?, session_id };
    let mut message = Vec::new();
    std::io::stdin()
        .read_to_end(&mut message)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let shares = sharing::split(&message, k, n, &mut rng)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let frames =
        encode_frames(&shares, &key).map_err(|e| CliError::Config(e.to_string()))?;
    let stdout = std::io::stdout();
    write_container(&mut stdout.lock(), n, k, &frames)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn cmd_decode(hex_key: &str, k: u8, n: u8) -> Result<(), CliError> {
    let stdin = std::io::stdin();
    let (cn, ck, frames) =
        read_container(&mut stdin.lock()).map_err(|e| CliError::Config(e.to_string()))?;
    if (cn, ck) != (n, k) {
        return Err(CliError::Config(format!(
            "container says n={cn} k={ck}, flags say n={n} k={k}"
        )));
    }
    let session_id = frames
        .first()
        .map(|f| f.session_id)
        .ok_or_else(|| CliError::Config("container holds no frames".into()))?;
    let key = SessionKey { key: parse_key(hex_key)?, session_id };
    let message =
        decode_frames(&frames, &key, n, k).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::io::stdout()
        .write_all(&message)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("SDUP_LOG", "warn"),
    )
    .target(env_logger::Target::Stderr)
    .init();

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, seed, trials, out } => cmd_run(scenario, *seed, *trials, out),
        Command::Sweep { scenario, param, values, out } => {
            cmd_sweep(scenario, param, values, out)
        }
        Command::Encode { key, k, n, session_id, seed } => {
            cmd_encode(key, *k, *n, *session_id, *seed)
        }
        Command::Decode { key, k, n } => cmd_decode(key, *k, *n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let label = match &e {
                CliError::Config(m) | CliError::Runtime(m) => m,
            };
            eprintln!("sdup: {label}");
            e.code()
        }
    }
}
