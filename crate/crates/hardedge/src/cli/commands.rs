use super::config::{CommandKind, GridSpec, RunConfig};
use super::output::{header, num, Table};
use crate::dpp::{write_batch, GridDpp, SampleBatch};
use crate::error::{Error, Result};
use crate::kernels::{EnsembleParams, KernelSpec};
use crate::linop::{
    build_damped_projection, build_h_s_projection, build_h_sn_projection, io, windowed_trace_distance,
    xmax_ratio_for, DampingFunction, Grid, HardEdgeLayout, KernelMatrix, Subspace,
};
use crate::pickrell::{jacobi_basis_columns, mutual_singularity_evidence};
use rayon::prelude::*;
use serde_json::Value;
use std::sync::Arc;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

fn need_s(cfg: &RunConfig) -> Result<f64> {
    cfg.s.ok_or_else(|| Error::Validation("--s is required".into()))
}

fn single_n(cfg: &RunConfig) -> Result<Option<usize>> {
    match cfg.n.len() {
        0 => Ok(None),
        1 => Ok(Some(cfg.n[0])),
        _ => invalid("this command takes a single --n"),
    }
}

pub fn kernel_spec(kind: &str, s: f64, n: Option<usize>) -> Result<KernelSpec> {
    let need_n = || n.ok_or_else(|| Error::Validation(format!("kernel {kind} needs --n")));
    let spec = match kind {
        "bessel_modified" => KernelSpec::BesselModified { s },
        "bessel_tilde" => KernelSpec::BesselTilde { s },
        "rescaled" => KernelSpec::Rescaled { s, n: need_n()? },
        "hat" => KernelSpec::Hat { s, n: need_n()? },
        "jacobi_cd_s" => KernelSpec::JacobiCdS { s, n: need_n()? },
        other => {
            return invalid(format!(
                "unknown kernel {other:?} (bessel_modified, bessel_tilde, rescaled, hat, jacobi_cd_s)"
            ))
        }
    };
    spec.validate().map_err(|e| Error::Validation(e.to_string()))?;
    Ok(spec)
}

pub fn layout(g: &GridSpec, window: (f64, f64), upper: f64) -> Result<HardEdgeLayout> {
    let l = HardEdgeLayout { a: 1e-3, window, upper, per_decade: g.panels, window_panels: 6, ppp: g.ppp };
    if !(window.0 > l.a && window.1 <= upper) {
        return invalid(format!("window must lie in ({}, {upper}]", l.a));
    }
    Ok(l)
}

pub fn kernel_table(cfg: &RunConfig) -> Result<Table> {
    let s = need_s(cfg)?;
    let n = single_n(cfg)?;
    let kind = cfg.kernel.as_deref().unwrap_or("bessel_modified");
    let spec = kernel_spec(kind, s, n)?;
    let reference = match cfg.reference.as_deref() {
        Some(k) => Some(kernel_spec(k, s, n)?),
        None => None,
    };
    if let Some(r) = &reference {
        if r.on_unit_interval() != spec.on_unit_interval() {
            return invalid("kernel and reference live on different intervals");
        }
    }
    let window = cfg.window.unwrap_or(if spec.on_unit_interval() { (-0.9, 0.9) } else { (0.5, 3.0) });
    if spec.on_unit_interval() && !(window.0 > -1.0 && window.1 < 1.0) {
        return invalid("window must lie inside (-1, 1) for this kernel");
    }
    if !spec.on_unit_interval() && !(window.0 > 0.0) {
        return invalid("window must lie inside (0, inf) for this kernel");
    }
    let k = cfg.lattice.unwrap_or(5);
    if k < 2 {
        return invalid("--lattice must be at least 2");
    }
    let pts: Vec<f64> = (0..k).map(|i| window.0 + (window.1 - window.0) * i as f64 / (k - 1) as f64).collect();
    let vals = spec.tabulate(&pts)?;
    let refs = match &reference {
        Some(r) => Some(r.tabulate(&pts)?),
        None => None,
    };
    let mut t = if refs.is_some() {
        Table::new(&["x1", "x2", "k", "reference", "delta"])
    } else {
        Table::new(&["x1", "x2", "k"])
    };
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let v = vals[i * k + j];
            let mut row = vec![num(pts[i]), num(pts[j]), num(v)];
            if let Some(r) = &refs {
                let d = v - r[i * k + j];
                worst = worst.max(d.abs());
                row.push(num(r[i * k + j]));
                row.push(num(d));
            }
            t.push(row);
        }
    }
    t.meta("kernel_id", spec.id());
    if let Some(r) = &reference {
        t.meta("reference_id", r.id());
        t.meta("max_abs_delta", num(worst));
    }
    Ok(t)
}

pub fn converge(cfg: &RunConfig) -> Result<Table> {
    let s = need_s(cfg)?;
    if cfg.n.is_empty() {
        return invalid("--n is required");
    }
    match cfg.beta {
        None => {
            if !(s > -1.0) {
                return invalid("the kernel comparison needs s > -1; give --beta for s <= -1");
            }
            let window = cfg.window.unwrap_or((0.5, 3.0));
            if !(window.0 > 0.0) {
                return invalid("window must lie in (0, inf)");
            }
            for &n in &cfg.n {
                kernel_spec("rescaled", s, Some(n))?;
            }
            let k = cfg.lattice.unwrap_or(31).max(2);
            let pts: Vec<f64> = (0..k).map(|i| window.0 + (window.1 - window.0) * i as f64 / (k - 1) as f64).collect();
            let lim = KernelSpec::BesselModified { s }.tabulate(&pts)?;
            let errs: Vec<Result<f64>> = cfg
                .n
                .par_iter()
                .map(|&n| {
                    let v = KernelSpec::Rescaled { s, n }.tabulate(&pts)?;
                    Ok(v.iter().zip(&lim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                })
                .collect();
            let mut t = Table::new(&["n", "sup_error"]);
            for (&n, e) in cfg.n.iter().zip(errs) {
                t.push(vec![n.into(), num(e?)]);
            }
            t.meta("window", format!("{},{}", window.0, window.1));
            t.meta("lattice", k);
            Ok(t)
        }
        Some(beta) => {
            if !(s <= -1.0) {
                return invalid("the damped comparison needs s <= -1");
            }
            let ns = crate::linop::n_s_of(s);
            if let Some(&bad) = cfg.n.iter().find(|&&n| n <= ns || !(n as f64 + s > 0.0)) {
                return invalid(format!("n = {bad} needs n > n_s = {ns} and n + s > 0"));
            }
            let window = cfg.window.unwrap_or((0.2, 2.0));
            let l = layout(&cfg.grid, window, cfg.grid.cutoff)?;
            let grid = Arc::new(l.grid()?);
            let lim = build_damped_projection(s, beta, &grid)?;
            let g = DampingFunction::ExpDamp { beta };
            let d: Vec<Result<f64>> = cfg
                .n
                .par_iter()
                .map(|&n| {
                    let fg = Arc::new(l.finite_n_grid(n, 1.0)?);
                    let p = build_h_sn_projection(s, n, &fg, Some(&g))?;
                    windowed_trace_distance(&p.projection, &lim.projection, window.0, window.1)
                })
                .collect();
            let mut t = Table::new(&["n", "trace_distance"]);
            for (&n, e) in cfg.n.iter().zip(d) {
                t.push(vec![n.into(), num(e?)]);
            }
            t.meta("window", format!("{},{}", window.0, window.1));
            t.meta("limit_rank", lim.range.dim());
            Ok(t)
        }
    }
}

/// What `sample` draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleTarget {
    Damped { s: f64, beta: f64 },
    Restricted { s: f64, r: f64 },
    Jacobi { n: usize, s: f64 },
}

pub fn sample_target(cfg: &RunConfig) -> Result<SampleTarget> {
    let s = need_s(cfg)?;
    if s <= -1.0 {
        match (cfg.beta, cfg.r.as_slice()) {
            (Some(beta), []) => Ok(SampleTarget::Damped { s, beta }),
            (None, [r]) => Ok(SampleTarget::Restricted { s, r: *r }),
            (None, []) => invalid("for s <= -1 the measure is infinite: give --beta or a single --R"),
            _ => invalid("give either --beta or a single --R"),
        }
    } else {
        let n = single_n(cfg)?.ok_or_else(|| Error::Validation("for s > -1 give the ensemble size --n".into()))?;
        EnsembleParams::probability(n, s).map_err(|e| Error::Validation(e.to_string()))?;
        Ok(SampleTarget::Jacobi { n, s })
    }
}

fn uniform_u_grid(panels: usize, ppp: usize) -> Result<Arc<Grid>> {
    let b: Vec<f64> = (0..=panels).map(|k| -1.0 + 2.0 * k as f64 / panels as f64).collect();
    Ok(Arc::new(Grid::from_breaks(&b, ppp)?))
}

/// The projection kernel matrix and a sampler for it.
pub fn build_target(target: SampleTarget, g: &GridSpec) -> Result<(KernelMatrix, Subspace)> {
    match target {
        SampleTarget::Damped { s, beta } => {
            let grid = Arc::new(layout(g, (0.2, 2.0), g.cutoff)?.grid()?);
            let p = build_damped_projection(s, beta, &grid)?;
            Ok((p.projection, p.range))
        }
        SampleTarget::Restricted { s, r } => {
            let upper = r.max(2.0);
            let grid = Arc::new(layout(g, (0.2, 2.0), upper)?.grid()?);
            let p = build_h_s_projection(s, r, &grid, None)?;
            Ok((p.projection, p.range))
        }
        SampleTarget::Jacobi { n, s } => {
            let grid = uniform_u_grid(g.panels, g.ppp)?;
            let params = EnsembleParams::probability(n, s)?;
            let cols = jacobi_basis_columns(params, &grid.nodes, &grid.sqrt_weights());
            let v = Subspace::from_scaled_columns(cols, grid, 1e-12)?;
            Ok((v.projection(format!("jacobi(n={n},s={s})")), v))
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Sampler for the target, reading or filling the binary cache when configured.
fn sampler(cfg: &RunConfig, target: SampleTarget) -> Result<(GridDpp, String)> {
    let (p, v) = build_target(target, &cfg.grid)?;
    if let Some(path) = &cfg.cache {
        let path = std::path::Path::new(path);
        if path.exists() {
            let cached = io::read_binary(std::fs::File::open(path)?)?;
            if cached.grid.hash() != p.grid.hash() || cached.label != p.label {
                return invalid(format!("cache {} holds a different kernel or grid", path.display()));
            }
            return Ok((GridDpp::from_projection(&cached)?, cached.label));
        }
        io::write_binary(&p, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    Ok((GridDpp::from_subspace(&v)?, p.label))
}

pub struct SampleRun {
    pub batch: SampleBatch,
    pub summary: serde_json::Map<String, Value>,
}

pub fn sample(cfg: &RunConfig) -> Result<SampleRun> {
    let target = sample_target(cfg)?;
    let count = cfg.samples.unwrap_or(1000);
    if count == 0 {
        return invalid("--samples must be positive");
    }
    let (dpp, label) = sampler(cfg, target)?;
    let batch = dpp.sample(count, cfg.seed, &label);
    let counts: Vec<f64> = batch.configs.iter().map(|c| c.particles.len() as f64).collect();
    let mean_count = counts.iter().sum::<f64>() / count as f64;
    let sums: Vec<f64> = batch.configs.iter().map(|c| c.sum()).collect();
    let mean_sum = sums.iter().sum::<f64>() / count as f64;
    let mut xmax: Vec<f64> = batch.configs.iter().filter_map(|c| c.max()).collect();
    xmax.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut m = header(cfg);
    m.insert("kernel_id".into(), label.into());
    m.insert("seed".into(), cfg.seed.into());
    m.insert("samples".into(), count.into());
    if let Some(r) = dpp.rank() {
        m.insert("rank".into(), r.into());
    }
    m.insert("mean_count".into(), num(mean_count));
    m.insert("mean_sum".into(), num(mean_sum));
    m.insert("xmax_q10".into(), num(quantile(&xmax, 0.1)));
    m.insert("xmax_q50".into(), num(quantile(&xmax, 0.5)));
    m.insert("xmax_q90".into(), num(quantile(&xmax, 0.9)));
    Ok(SampleRun { batch, summary: m })
}

/// Batch file text: the dpp export format with version and config lines.
pub fn batch_text(cfg: &RunConfig, batch: &SampleBatch) -> Result<String> {
    let mut buf = Vec::new();
    write_batch(batch, &mut buf)?;
    let mut s = format!("# version: {}\n# config: {}\n", super::output::VERSION, super::output::config_json(cfg));
    s.push_str(&String::from_utf8(buf).map_err(|e| Error::Numerical(e.to_string()))?);
    Ok(s)
}

pub fn xmax(cfg: &RunConfig) -> Result<Table> {
    let s = need_s(cfg)?;
    if !(s <= -1.0) {
        return invalid("xmax needs s <= -1");
    }
    if cfg.r.is_empty() {
        return invalid("--R is required");
    }
    let r_ref = cfg.r_ref.unwrap_or_else(|| cfg.r.iter().cloned().fold(f64::MIN, f64::max));
    if !(r_ref > 0.0) {
        return invalid("R_ref must be positive");
    }
    let count = cfg.samples.unwrap_or(2000);
    let target = match cfg.beta {
        Some(beta) => SampleTarget::Damped { s, beta },
        None => {
            if cfg.r.iter().any(|&r| r > r_ref) {
                return invalid("without damping every R must be at most R_ref");
            }
            SampleTarget::Restricted { s, r: r_ref }
        }
    };
    let (p, v) = build_target(target, &cfg.grid)?;
    let batch = if count > 0 { Some(GridDpp::from_subspace(&v)?.sample(count, cfg.seed, &p.label)) } else { None };
    let xm: Vec<f64> = batch
        .as_ref()
        .map(|b| b.configs.iter().map(|c| c.max().unwrap_or(0.0)).collect())
        .unwrap_or_default();
    let below = |r: f64| xm.iter().filter(|&&x| x < r).count() as f64;
    let n_ref = below(r_ref);
    let mut t = Table::new(&["R1", "ratio", "empirical", "std_error", "z"]);
    let mut rs = cfg.r.clone();
    rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for r1 in rs {
        let ratio = xmax_ratio_for(&p, r1, r_ref)?;
        let (emp, se) = if n_ref > 0.0 {
            (below(r1) / n_ref, (ratio * (1.0 - ratio) / n_ref).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        };
        let z = if se > 0.0 { (emp - ratio) / se } else { 0.0 };
        t.push(vec![num(r1), num(ratio), num(emp), num(se), num(z)]);
    }
    t.meta("kernel_id", p.label.clone());
    t.meta("R_ref", num(r_ref));
    t.meta("samples", count);
    Ok(t)
}

pub fn hellinger(cfg: &RunConfig) -> Result<Table> {
    let s = need_s(cfg)?;
    let s2 = cfg.s2.ok_or_else(|| Error::Validation("--s2 is required".into()))?;
    if s == s2 {
        return invalid("s and s2 must differ");
    }
    let n_max = single_n(cfg)?.unwrap_or(800);
    let table = mutual_singularity_evidence(s, s2, n_max).map_err(|e| match e {
        Error::Domain(m) => Error::Validation(m),
        other => other,
    })?;
    let mut t = Table::new(&["n", "hellinger", "partial_product", "fitted_c"]);
    for r in &table.rows {
        t.push(vec![r.n.into(), num(r.hellinger), num(r.partial_product), num(table.fitted_c)]);
    }
    t.meta("n0", table.n0);
    t.meta("fitted_c", num(table.fitted_c));
    t.meta("fit_range", format!("{},{}", table.fit_range.0, table.fit_range.1));
    t.meta("log_slope", num(table.log_slope));
    t.meta("candidate_difference", num(table.candidate_difference));
    t.meta("candidate_sum", num(table.candidate_sum));
    Ok(t)
}

pub fn dispatch_table(cfg: &RunConfig) -> Result<Table> {
    match cfg.command {
        CommandKind::KernelTable => kernel_table(cfg),
        CommandKind::Converge => converge(cfg),
        CommandKind::Xmax => xmax(cfg),
        CommandKind::Hellinger => hellinger(cfg),
        CommandKind::Sample | CommandKind::Selftest => invalid("not a table command"),
    }
}
