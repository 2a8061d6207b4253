//! `dampwave`: batch experiment runner. `run` executes a TOML-described
//! experiment and writes CSV/JSON artifacts plus a manifest; `replay`
//! re-executes a recorded run and verifies the artifacts are bit-identical;
//! `list-experiments` shows what can be run.

mod config;
mod experiments;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{ExperimentConfig, ExperimentKind};
use dampwave::report::RunReport;
use manifest::{first_divergence, sha256_hex, Manifest, MANIFEST_NAME};

pub const OUT_DIR_ENV: &str = "DAMPWAVE_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Module { context: String, source: dampwave::Error },
    #[error("replay mismatch in {file}, line {line}, field {field}: recorded {expected}, regenerated {got}")]
    Replay { file: String, line: usize, field: usize, expected: String, got: String },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn module(context: impl Into<String>, source: dampwave::Error) -> Self {
        CliError::Module { context: context.into(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Replay { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dampwave",
    version,
    about = "Reproducible experiments for a damped wave equation toolkit"
)]
struct Cli {
    /// Worker threads for ensemble evolution (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config and DAMPWAVE_OUT_DIR.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed override; replay treats a changed seed as a new run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Re-execute a recorded run and verify bit-identical artifacts.
    Replay { manifest: PathBuf },
    /// List the available experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: building the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, cli.seed, cli.out_dir.as_deref()),
        Command::Replay { manifest } => cmd_replay(manifest, cli.seed, cli.out_dir.as_deref()),
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<16} {}", kind.name(), kind.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(d) = flag {
        return d.to_path_buf();
    }
    if let Some(d) = &cfg.output.dir {
        return PathBuf::from(d);
    }
    if let Ok(d) = std::env::var(OUT_DIR_ENV) {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    PathBuf::from("out")
}

/// Runs the experiment and assembles the artifact set: the experiment's own
/// files filtered by the configured formats, the check report, and the
/// manifest describing all of them.
fn produce(
    cfg: &ExperimentConfig,
    config_path: &str,
    config_text: &str,
) -> Result<(RunReport, Vec<(String, String)>, Manifest), CliError> {
    let outcome = experiments::execute(cfg)?;
    let want_csv = cfg.output.formats.iter().any(|f| f == "csv");
    let want_json = cfg.output.formats.iter().any(|f| f == "json");
    let mut files = Vec::new();
    for (name, content) in outcome.files {
        let keep = if name.ends_with(".csv") {
            want_csv
        } else if name.ends_with(".json") {
            want_json
        } else {
            true
        };
        if keep {
            files.push((name, content));
        }
    }
    if want_json {
        let text = outcome
            .report
            .to_json()
            .map_err(|e| CliError::module("serializing the report", e))?;
        files.push(("report.json".to_string(), text + "\n"));
    }
    let man = Manifest::new(
        cfg.experiment.kind.name(),
        config_path,
        config_text,
        cfg.seed,
        &files,
    );
    Ok((outcome.report, files, man))
}

fn print_checks(report: &RunReport) {
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {} (worst residual {:.3e})", c.check, c.worst_residual);
    }
}

fn write_run(
    dir: &Path,
    files: &[(String, String)],
    man: &Manifest,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    for (name, content) in files {
        write_file(&dir.join(name), content)?;
    }
    write_file(&dir.join(MANIFEST_NAME), &man.to_json()?)
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let shown = config_path.display().to_string();
    let text = read_file(config_path)?;
    let mut cfg = ExperimentConfig::parse(&text, &shown)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = resolve_out_dir(out_dir, &cfg);
    let (report, files, man) = produce(&cfg, &shown, &text)?;
    write_run(&dir, &files, &man)?;
    print_checks(&report);
    println!(
        "{} artifacts in {} (seed {})",
        files.len() + 1,
        dir.display(),
        cfg.seed
    );
    Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_replay(
    manifest_path: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let man = Manifest::load(manifest_path)?;
    let man_dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();

    let recorded = PathBuf::from(&man.config_path);
    let config_file = if recorded.exists() { recorded } else { man_dir.join(&man.config_path) };
    let text = read_file(&config_file)?;
    if sha256_hex(text.as_bytes()) != man.config_sha256 {
        return Err(CliError::Config {
            path: config_file.display().to_string(),
            message: "content no longer matches the manifest hash; a replay would not \
                      reproduce the recorded run"
                .into(),
        });
    }
    let mut cfg = ExperimentConfig::parse(&text, &config_file.display().to_string())?;

    if let Some(s) = seed {
        if s != man.seed {
            println!(
                "seed {s} differs from the recorded seed {}; executing as a new run",
                man.seed
            );
            cfg.seed = s;
            let dir = out_dir
                .map(Path::to_path_buf)
                .unwrap_or_else(|| man_dir.join(format!("run-seed{s}")));
            let (report, files, new_man) = produce(&cfg, &man.config_path, &text)?;
            write_run(&dir, &files, &new_man)?;
            print_checks(&report);
            return Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }

    cfg.seed = man.seed;
    let (_report, files, _) = produce(&cfg, &man.config_path, &text)?;
    for name in man.files.keys() {
        if !files.iter().any(|(n, _)| n == name) {
            return Err(CliError::Other(format!(
                "recorded artifact {name} was not regenerated; was the config's output \
                 section changed?"
            )));
        }
    }
    let mut compared = 0;
    for (name, content) in &files {
        let Some(recorded_hash) = man.files.get(name) else {
            return Err(CliError::Other(format!(
                "regenerated artifact {name} is absent from the manifest"
            )));
        };
        let disk = read_file(&man_dir.join(name))?;
        if sha256_hex(content.as_bytes()) == *recorded_hash && disk == *content {
            compared += 1;
            continue;
        }
        let d = first_divergence(&disk, content).unwrap_or(manifest::Divergence {
            line: 0,
            field: 0,
            expected: format!("sha256 {recorded_hash}"),
            got: format!("sha256 {}", sha256_hex(content.as_bytes())),
        });
        return Err(CliError::Replay {
            file: name.clone(),
            line: d.line,
            field: d.field,
            expected: d.expected,
            got: d.got,
        });
    }
    println!("replay verified: {compared} files bit-identical");
    Ok(ExitCode::SUCCESS)
}
