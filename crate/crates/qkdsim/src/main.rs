use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use qkdsim::profile::{Preset, RunProfile};
use qkdsim::run::run;
use qkdsim::{CliError, EXIT_LEDGER_FAILURE, EXIT_OK, EXIT_USAGE};

/// Environment variable naming a default profile file.
const DEFAULT_PROFILE_ENV: &str = "QKDSIM_DEFAULT_PROFILE";

/// DPS-MDI-QKD key rates, HOM visibility and Monte Carlo validation.
///
/// Settings are layered: built-in preset defaults, then the profile file,
/// then `--set` and `--seed`.
#[derive(Debug, Parser)]
#[command(name = "qkdsim", version)]
struct Cli {
    /// fig3, fig6, fig8, table3, mc-validate or custom.
    preset: String,

    /// Profile file. Defaults to $QKDSIM_DEFAULT_PROFILE when set. An output
    /// file from an earlier run is accepted as-is.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,

    /// Override one setting, as `key=value` or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Monte Carlo seed (same as `--set mc.seed=N`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads; one per CPU when omitted.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
}

fn load_profile(cli: &Cli) -> Result<RunProfile, CliError> {
    let preset: Preset = cli.preset.parse()?;
    let mut profile = RunProfile::builtin(preset);
    let path = cli
        .profile
        .clone()
        .or_else(|| std::env::var_os(DEFAULT_PROFILE_ENV).map(PathBuf::from));
    if let Some(path) = path {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read profile {}: {e}", path.display())))?;
        profile
            .apply_text(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
        profile.set(k.trim(), v)?;
    }
    if let Some(seed) = cli.seed {
        profile.mc.seed = seed;
    }
    Ok(profile)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = load_profile(&cli).and_then(|profile| {
        let out = run(&profile, cli.jobs.map(|j| j as usize))?;
        out.write_to(&cli.out)?;
        Ok((profile, out))
    });
    match result {
        Ok((profile, out)) => {
            for f in &out.files {
                eprintln!("wrote {}", cli.out.join(&f.name).display());
            }
            match out.ledger_passed {
                Some(false) => {
                    eprintln!("{}: validation ledger has failing rows", profile.name);
                    ExitCode::from(EXIT_LEDGER_FAILURE)
                }
                _ => ExitCode::from(EXIT_OK),
            }
        }
        Err(e) => {
            eprintln!("qkdsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
