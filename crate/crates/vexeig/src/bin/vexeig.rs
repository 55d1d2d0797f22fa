use std::path::PathBuf;
use std::process::ExitCode;

use vexeig::cli;

const USAGE: &str = "usage: vexeig --config <path> [--out <dir>] [--seed <int>]";

fn main() -> ExitCode {
    let mut config_path: Option<PathBuf> = None;
    let mut out_override: Option<PathBuf> = None;
    let mut seed_override: Option<u64> = None;

    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        let mut take = |name: &str| {
            args.next().ok_or_else(|| format!("{name} needs a value\n{USAGE}"))
        };
        let outcome = match arg.as_str() {
            "--config" => take("--config").map(|v| config_path = Some(PathBuf::from(v))),
            "--out" => take("--out").map(|v| out_override = Some(PathBuf::from(v))),
            "--seed" => take("--seed").and_then(|v| {
                v.parse::<u64>()
                    .map(|s| seed_override = Some(s))
                    .map_err(|_| format!("--seed needs an integer, got `{v}`"))
            }),
            "--help" | "-h" => {
                println!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            other => Err(format!("unknown flag `{other}`\n{USAGE}")),
        };
        if let Err(message) = outcome {
            eprintln!("{message}");
            return ExitCode::from(1);
        }
    }

    let Some(config_path) = config_path else {
        eprintln!("{USAGE}");
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("cannot read {}: {err}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match cli::parse_config(&text) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = out_override {
        config.out_dir = out;
    }
    if let Some(seed) = seed_override {
        config.solve.seed = seed;
    }
    match cli::run(&config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
