//! The `hardedge` command line.
//!
//! Exit codes: 0 success, 1 validation, 2 numerical failure, 3 I/O.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use crate::error::{Error, Result};
use clap::Parser;
use config::{resolve, Cli, CommandKind, RunConfig};
use std::ffi::OsString;
use std::io::Write;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Domain(_) => 1,
        Error::Numerical(_) => 2,
        Error::Io(_) => 3,
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cfg: &RunConfig) -> Result<i32> {
    match cfg.command {
        CommandKind::Sample => {
            let out = cfg.out.as_ref().ok_or_else(|| Error::Validation("sample needs --out for the batch file".into()))?;
            let run = commands::sample(cfg)?;
            std::fs::write(out, commands::batch_text(cfg, &run.batch)?)?;
            let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(run.summary)).unwrap();
            s.push('\n');
            std::io::stdout().write_all(s.as_bytes())?;
            Ok(0)
        }
        CommandKind::Selftest => {
            let fault = match cfg.inject_fault.as_deref() {
                None => None,
                Some(f) => Some(
                    selftest::Fault::parse(f)
                        .ok_or_else(|| Error::Validation(format!("unknown fault {f:?} (asymmetry)")))?,
                ),
            };
            let report = selftest::run(fault);
            let mut s = serde_json::to_string_pretty(&report).unwrap();
            s.push('\n');
            emit(cfg, &s)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {}: {}", c.name, c.detail);
            }
            Ok(if report.all_passed { 0 } else { 2 })
        }
        _ => {
            let t = commands::dispatch_table(cfg)?;
            emit(cfg, &t.render(cfg))?;
            Ok(0)
        }
    }
}

/// Parse, resolve, validate and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, flags) = cli.command.split();
    let cfg = match resolve(kind, flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    if let Some(t) = cfg.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            exit_code(&e)
        }
    }
}
