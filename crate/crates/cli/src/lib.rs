//! Command-line front end for `sizeshare-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod report;

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

pub use cli::{Cli, Command};
pub use config::{AnalysisConfig, OutputFormat};
pub use error::{CliError, CliResult};
pub use report::Report;

/// Settings from every layer for one invocation.
pub fn resolve_config(global: &cli::GlobalArgs, env_seed: Option<&str>) -> CliResult<AnalysisConfig> {
    let mut cfg = AnalysisConfig::from_env_seed(env_seed)?;
    if let Some(path) = &global.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        cfg.apply_file_text(&text)?;
    }
    cfg.apply(&global.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn arguments(command: &Command) -> serde_json::Value {
    use report::to_value;
    match command {
        Command::Moments(a) => to_value(a),
        Command::FitTail(a) => to_value(a),
        Command::Aggregate(a) => to_value(a),
        Command::Weighting(a) => to_value(a),
        Command::Panel(a) => to_value(a),
        Command::DecomposeMp(a) => to_value(a),
        Command::Counterfactual(a) => to_value(a),
        Command::Simulate(a) => to_value(a),
        Command::Verify(a) => to_value(a),
    }
}

/// Execute a parsed invocation. The flag is true when the command ran but
/// reported failing checks.
pub fn run(cli: &Cli, env_seed: Option<&str>) -> CliResult<(Report, bool)> {
    let cfg = resolve_config(&cli.global, env_seed)?;
    let outcome = match &cli.command {
        Command::Moments(a) => commands::moments(a),
        Command::FitTail(a) => commands::fit_tail(a, &cfg),
        Command::Aggregate(a) => commands::aggregate(a, &cfg),
        Command::Weighting(a) => commands::weighting(a),
        Command::Panel(a) => commands::panel(a, &cfg),
        Command::DecomposeMp(a) => commands::decompose(a, &cfg),
        Command::Counterfactual(a) => commands::counterfactual(a),
        Command::Simulate(a) => commands::simulate(a, &cfg),
        Command::Verify(a) => commands::verify(a, &cfg),
    }?;
    let generated_at_unix = (!cli.global.no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let report = Report {
        command: cli.command.name().to_string(),
        arguments: arguments(&cli.command),
        config: cfg,
        results: outcome.results,
        warnings: outcome.warnings,
        generated_at_unix,
    };
    Ok((report, outcome.failed))
}

/// Full process behavior: parse, run, write, and return the exit code.
pub fn main_with<I, T>(args: I, env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let fail = |err: CliError, stderr: &mut dyn Write| {
        let _ = writeln!(stderr, "{}", err.to_json());
        err.exit_code()
    };
    let (report, failed) = match run(&cli, env_seed) {
        Ok(r) => r,
        Err(e) => return fail(e, stderr),
    };
    let text = report.render(report.config.output_format);
    let written = match &cli.global.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| CliError::io(path.display(), e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("stdout", e)),
    };
    if let Err(e) = written {
        return fail(e, stderr);
    }
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if failed {
        1
    } else {
        0
    }
}
