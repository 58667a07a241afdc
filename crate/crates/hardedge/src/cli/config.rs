use crate::error::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "hardedge", version, about = "Jacobi ensembles, Bessel kernels and infinite determinantal measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    KernelTable,
    Converge,
    Sample,
    Xmax,
    Hellinger,
    Selftest,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a kernel on a lattice of a window.
    KernelTable(Flags),
    /// Distances from finite-n objects to their limits.
    Converge(Flags),
    /// Sample a determinantal process on a grid.
    Sample(Flags),
    /// Ratios of x_max distribution functions.
    Xmax(Flags),
    /// Hellinger affinities and their partial products.
    Hellinger(Flags),
    /// Run the invariant suite at reduced scale.
    Selftest(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::KernelTable(f) => (CommandKind::KernelTable, f),
            Command::Converge(f) => (CommandKind::Converge, f),
            Command::Sample(f) => (CommandKind::Sample, f),
            Command::Xmax(f) => (CommandKind::Xmax, f),
            Command::Hellinger(f) => (CommandKind::Hellinger, f),
            Command::Selftest(f) => (CommandKind::Selftest, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file of key = value settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Second s for hellinger.
    #[arg(long, allow_hyphen_values = true)]
    pub s2: Option<f64>,
    /// Integer or comma-separated list.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Real or comma-separated list.
    #[arg(long = "R", allow_hyphen_values = true)]
    pub r: Option<String>,
    /// Reference R2 for xmax (default: the largest R).
    #[arg(long = "R-ref", allow_hyphen_values = true)]
    pub r_ref: Option<f64>,
    /// panels,ppp,cutoff.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Kernel kind for kernel-table.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Second kernel kind; adds reference and delta columns.
    #[arg(long)]
    pub reference: Option<String>,
    /// lo,hi.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Points per side of the kernel-table lattice.
    #[arg(long)]
    pub lattice: Option<usize>,
    /// Binary KernelMatrix cache file for sample.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Fault to inject in selftest (asymmetry).
    #[arg(long)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    s: Option<f64>,
    s2: Option<f64>,
    n: Option<OneOrMany<usize>>,
    beta: Option<f64>,
    #[serde(rename = "R")]
    r: Option<OneOrMany<f64>>,
    #[serde(rename = "R_ref")]
    r_ref: Option<f64>,
    grid: Option<String>,
    samples: Option<usize>,
    seed: Option<u64>,
    out: Option<String>,
    format: Option<String>,
    threads: Option<usize>,
    kernel: Option<String>,
    reference: Option<String>,
    window: Option<String>,
    lattice: Option<usize>,
    cache: Option<String>,
    inject_fault: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Panels per decade of the graded parts (uniform panels for u-grids).
    pub panels: usize,
    pub ppp: usize,
    pub cutoff: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { panels: 12, ppp: 8, cutoff: 50.0 }
    }
}

/// Flags merged over the config file; `None` where neither gives a value.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub s: Option<f64>,
    pub s2: Option<f64>,
    pub n: Vec<usize>,
    pub beta: Option<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    #[serde(rename = "R_ref")]
    pub r_ref: Option<f64>,
    pub grid: GridSpec,
    pub samples: Option<usize>,
    pub seed: u64,
    pub out: Option<String>,
    pub format: Format,
    pub threads: Option<usize>,
    pub kernel: Option<String>,
    pub reference: Option<String>,
    pub window: Option<(f64, f64)>,
    pub lattice: Option<usize>,
    pub cache: Option<String>,
    pub inject_fault: Option<String>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Validation(format!("bad {what} value {t:?}"))))
        .collect()
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let t: Vec<&str> = s.split(',').map(str::trim).collect();
    if t.len() != 3 {
        return invalid("--grid expects panels,ppp,cutoff");
    }
    let bad = || Error::Validation(format!("bad grid spec {s:?}"));
    let g = GridSpec {
        panels: t[0].parse().map_err(|_| bad())?,
        ppp: t[1].parse().map_err(|_| bad())?,
        cutoff: t[2].parse().map_err(|_| bad())?,
    };
    if g.panels == 0 || g.ppp == 0 || !(g.cutoff > 0.0) || !g.cutoff.is_finite() {
        return invalid("grid panels and ppp must be positive and the cutoff positive and finite");
    }
    Ok(g)
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let v: Vec<f64> = parse_list(s, "window")?;
    if v.len() != 2 || !(v[0] < v[1]) || v.iter().any(|x| !x.is_finite()) {
        return invalid("--window expects lo,hi with lo < hi");
    }
    Ok((v[0], v[1]))
}

fn finite(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !x.is_finite() => invalid(format!("{name} must be finite")),
        _ => Ok(v),
    }
}

/// Merge flags over the optional config file and check the formats of all values.
pub fn resolve(command: CommandKind, flags: Flags) -> Result<RunConfig> {
    let file: FileConfig = match &flags.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Validation(format!("config file {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let n = match flags.n {
        Some(s) => parse_list(&s, "n")?,
        None => file.n.map(OneOrMany::into_vec).unwrap_or_default(),
    };
    let r = match flags.r {
        Some(s) => parse_list(&s, "R")?,
        None => file.r.map(OneOrMany::into_vec).unwrap_or_default(),
    };
    if r.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return invalid("R values must be positive and finite");
    }
    let grid = match flags.grid.or(file.grid) {
        Some(g) => parse_grid(&g)?,
        None => GridSpec::default(),
    };
    let format = match flags.format.or(file.format).as_deref() {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => return invalid(format!("unknown format {other:?} (csv or json)")),
    };
    let window = match flags.window.or(file.window) {
        Some(w) => Some(parse_window(&w)?),
        None => None,
    };
    let threads = flags.threads.or(file.threads);
    if threads == Some(0) {
        return invalid("--threads must be at least 1");
    }
    let beta = finite("beta", flags.beta.or(file.beta))?;
    if let Some(b) = beta {
        if !(b > 0.0) {
            return invalid("beta must be positive");
        }
    }
    Ok(RunConfig {
        command,
        s: finite("s", flags.s.or(file.s))?,
        s2: finite("s2", flags.s2.or(file.s2))?,
        n,
        beta,
        r,
        r_ref: finite("R_ref", flags.r_ref.or(file.r_ref))?,
        grid,
        samples: flags.samples.or(file.samples),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        out: flags.out.map(|p| p.display().to_string()).or(file.out),
        format,
        threads,
        kernel: flags.kernel.or(file.kernel),
        reference: flags.reference.or(file.reference),
        window,
        lattice: flags.lattice.or(file.lattice),
        cache: flags.cache.map(|p| p.display().to_string()).or(file.cache),
        inject_fault: flags.inject_fault.or(file.inject_fault),
    })
}
