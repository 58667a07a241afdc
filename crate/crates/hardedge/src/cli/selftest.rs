//! The invariant suite at reduced scale.

use super::commands::kernel_table;
use super::config::{resolve, CommandKind, Flags};
use crate::dpp::{mcmc_jacobi_chains, multiplicative_functional, GridDpp, McmcConfig};
use crate::error::Result;
use crate::kernels::{
    bessel_modified, bessel_modified_integral, bessel_recurrence_residual, cd_jacobi_s,
    cd_rank_one_recurrence_residual, EnsembleParams, KernelSpec,
};
use crate::linop::{
    build_h_s_projection, det_symmetric, discretize, induced_projection, mult_transform, DampingFunction, Grid,
    HardEdgeLayout, Subspace,
};
use crate::pickrell::{
    beta_prime_density, consistency_constant, ergodic_fourier, hellinger, jacobi_basis_columns, radial_density_u,
    to_pickrell_point, RadialSample,
};
use crate::quad::panel_rule;
use crate::specfun::{jacobi_norm_sq, jacobi_poly, jv, JacobiIndex};
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Asymmetry,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Fault> {
        match s {
            "asymmetry" => Some(Fault::Asymmetry),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub all_passed: bool,
    pub checks: Vec<Check>,
}

type CheckFn = fn(Option<Fault>) -> Result<(bool, String)>;

fn u_grid(panels: usize, ppp: usize) -> Arc<Grid> {
    let b: Vec<f64> = (0..=panels).map(|k| -1.0 + 2.0 * k as f64 / panels as f64).collect();
    Arc::new(Grid::from_breaks(&b, ppp).unwrap())
}

fn jacobi_space(n: usize, s: f64, grid: &Arc<Grid>) -> Result<Subspace> {
    let params = EnsembleParams::probability(n, s)?;
    Subspace::from_scaled_columns(jacobi_basis_columns(params, &grid.nodes, &grid.sqrt_weights()), grid.clone(), 1e-12)
}

fn jacobi_norms(_: Option<Fault>) -> Result<(bool, String)> {
    let (x, w) = panel_rule(&[0.0, 2f64.sqrt()], 30);
    let mut worst: f64 = 0.0;
    for &s in &[0.0, 1.0, 2.5] {
        for n in 0..6 {
            let idx = JacobiIndex::new(n, s, 0.0)?;
            let q: f64 = x.iter().zip(&w).map(|(&t, &wt)| {
                let p = jacobi_poly(idx, 1.0 - t * t).unwrap();
                wt * p * p * 2.0 * t.powf(2.0 * s + 1.0)
            }).sum();
            worst = worst.max((q / jacobi_norm_sq(idx)? - 1.0).abs());
        }
    }
    Ok((worst < 1e-10, format!("max relative error {worst:.1e}")))
}

fn bessel_continuity(_: Option<Fault>) -> Result<(bool, String)> {
    // Across the switch between evaluation methods and against reflection.
    let mut worst: f64 = 0.0;
    for &nu in &[-0.5, 0.3, 2.0] {
        for &x in &[7.999, 8.0, 8.001, 59.9, 60.1] {
            let a = jv(nu, x);
            let b = jv(nu, x + 1e-9);
            worst = worst.max((a - b).abs());
        }
    }
    let refl = (jv(-1.0, 3.3) + jv(1.0, 3.3)).abs();
    Ok((worst < 1e-8 && refl < 1e-12, format!("jump {worst:.1e}, reflection {refl:.1e}")))
}

fn kernel_symmetry(fault: Option<Fault>) -> Result<(bool, String)> {
    let grid = Arc::new(HardEdgeLayout { upper: 4.0, ppp: 4, ..HardEdgeLayout::default() }.grid()?);
    let mut worst: f64 = 0.0;
    for spec in [KernelSpec::BesselModified { s: 0.3 }, KernelSpec::Rescaled { s: 0.5, n: 30 }] {
        let mut k = discretize(&spec, &grid)?;
        if fault == Some(Fault::Asymmetry) {
            k.entries[(0, 1)] += 1e-3;
        }
        worst = worst.max(k.asymmetry());
    }
    Ok((worst < 1e-12, format!("max |K - K^T| = {worst:.1e}")))
}

fn reproducing_property(_: Option<Fault>) -> Result<(bool, String)> {
    let (x, w) = panel_rule(&(0..=40).map(|k| -1.0 + k as f64 / 20.0).collect::<Vec<_>>(), 8);
    let (s, n) = (1.0, 5);
    let mut worst: f64 = 0.0;
    for &(a, b) in &[(0.1, -0.4), (0.7, 0.7), (-0.8, 0.3)] {
        let q: f64 = x.iter().zip(&w).map(|(&v, &wv)| wv * cd_jacobi_s(s, n, a, v).unwrap() * cd_jacobi_s(s, n, v, b).unwrap()).sum();
        worst = worst.max((q - cd_jacobi_s(s, n, a, b)?).abs());
    }
    Ok((worst < 1e-10, format!("max defect {worst:.1e}")))
}

fn recurrences(_: Option<Fault>) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for &(u1, u2) in &[(0.1, 0.5), (-0.9, 0.2), (0.33, 0.33 + 1e-8)] {
        worst = worst.max(cd_rank_one_recurrence_residual(0.5, -0.2, 4, u1, u2)?.abs());
    }
    for &(x, y) in &[(0.5, 2.0), (10.0, 12.0)] {
        worst = worst.max(bessel_recurrence_residual(0.2, x, y)?.abs());
        worst = worst.max((bessel_modified(0.2, x, y)? - bessel_modified_integral(0.2, x, y)?).abs());
    }
    Ok((worst < 1e-9, format!("max residual {worst:.1e}")))
}

fn projection_integrality(_: Option<Fault>) -> Result<(bool, String)> {
    let grid = Arc::new(HardEdgeLayout { upper: 8.0, ..HardEdgeLayout::default() }.grid()?);
    let p = build_h_s_projection(-1.6, 8.0, &grid, None)?;
    let tr = p.projection.trace();
    let defect = p.projection.idempotency_defect();
    let pass = (tr - tr.round()).abs() < 1e-8 && defect < 1e-8 && p.n_s == 1;
    Ok((pass, format!("trace {tr:.6}, |P^2 - P| = {defect:.1e}, n_s = {}", p.n_s)))
}

fn induced_chain(_: Option<Fault>) -> Result<(bool, String)> {
    // Inducing onto E0 directly or through an intermediate set gives the same projection.
    let grid = u_grid(30, 6);
    let p = jacobi_space(4, 0.5, &grid)?.projection("p");
    let e1 = grid.mask(-1.0, 0.6);
    let e0 = grid.mask(-1.0, 0.2);
    let direct = induced_projection(&p, &e0)?;
    let two = induced_projection(&induced_projection(&p, &e1)?, &e0)?;
    let d = (&direct.entries - &two.entries).amax();
    let idem = direct.idempotency_defect();
    let rank = direct.trace();
    Ok((d < 1e-9 && idem < 1e-9 && (rank - 4.0).abs() < 1e-9, format!("difference {d:.1e}, rank {rank:.6}")))
}

fn transform_identities(_: Option<Fault>) -> Result<(bool, String)> {
    let grid = u_grid(20, 6);
    let v = jacobi_space(3, 0.0, &grid)?;
    let p = v.projection("p");
    let same = mult_transform(&p, &DampingFunction::ExpDamp { beta: 0.0 })?;
    let d1 = (&same.entries - &p.entries).amax();
    let g = DampingFunction::ExpDamp { beta: 0.7 };
    let t = mult_transform(&p, &g)?;
    let proj = v.damped(&g)?.projection("q");
    let d2 = (&t.entries - &proj.entries).amax();
    Ok((d1 < 1e-12 && d2 < 1e-10, format!("g = 1: {d1:.1e}; damped range: {d2:.1e}")))
}

fn sampler_laws(_: Option<Fault>) -> Result<(bool, String)> {
    let grid = u_grid(40, 6);
    let v = jacobi_space(5, 1.0, &grid)?;
    let p = v.projection("p");
    let dpp = GridDpp::from_subspace(&v)?;
    let n = 3000;
    let a = dpp.sample(n, 5, "p");
    let b = dpp.sample(n, 5, "p");
    let reproducible = a == b;
    let fixed = a.configs.iter().all(|c| c.particles.len() == 5);
    let mask = grid.mask(0.0, 0.5);
    let gap = det_symmetric(&p.block(&mask), -1.0)?;
    let emp = a.configs.iter().filter(|c| c.count_in(0.0, 0.5) == 0).count() as f64 / n as f64;
    let z = (emp - gap) / (gap * (1.0 - gap) / n as f64).sqrt();
    let g = DampingFunction::Tabulated { nodes: vec![-1.0, 1.0], values: vec![1.0, 0.5] };
    let h: Vec<f64> = g.on_grid(&grid).iter().map(|x| (1.0 - x).sqrt()).collect();
    let m = DMatrix::from_fn(grid.len(), grid.len(), |i, j| h[i] * p.entries[(i, j)] * h[j]);
    let exact = det_symmetric(&m, -1.0)?;
    let vals: Vec<f64> = a.configs.iter().map(|c| multiplicative_functional(c, &g)).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    let z2 = (mean - exact) / sd;
    Ok((
        reproducible && fixed && z.abs() < 4.0 && z2.abs() < 4.0,
        format!("reproducible {reproducible}, fixed count {fixed}, gap z {z:.2}, functional z {z2:.2}"),
    ))
}

fn metropolis_oracle(_: Option<Fault>) -> Result<(bool, String)> {
    let params = EnsembleParams::probability(1, 0.0)?;
    let cfg = McmcConfig { chains: 4, samples_per_chain: 1000, ..McmcConfig::default() };
    let (batch, diag) = mcmc_jacobi_chains(params, &cfg, 3)?;
    let mean = batch.configs.iter().map(|c| c.particles[0]).sum::<f64>() / batch.configs.len() as f64;
    // Thinned draws of a uniform law: var 1/3 per draw, mild correlation allowed for.
    let se = (1.0 / 3.0 / batch.configs.len() as f64).sqrt() * 2.0;
    let rhat = diag.split_rhat.unwrap_or(f64::INFINITY);
    Ok((mean.abs() < 4.0 * se && rhat < 1.05, format!("mean u {mean:.4}, split R-hat {rhat:.4}")))
}

fn pickrell_identities(_: Option<Fault>) -> Result<(bool, String)> {
    let r = RadialSample::new(vec![4.0, 1.0, 0.25])?;
    let w = to_pickrell_point(&r);
    let sum_ok = (w.gamma - w.xs.iter().sum::<f64>()).abs() == 0.0;
    let params = EnsembleParams::new(3, 0.7)?;
    let d1 = radial_density_u(params, &[0.1, -0.5, 0.8])?;
    let d2 = radial_density_u(params, &[0.8, 0.1, -0.5])?;
    let perm = ((d1 - d2) / d1).abs() < 1e-14;
    let hel = hellinger(20, 0.3, 0.3)? == 1.0;
    let c = (consistency_constant(0, 1, 0.0)? - std::f64::consts::PI).abs() < 1e-14;
    let (x, wq) = panel_rule(&(0..=400).map(|k| k as f64 / 400.0).collect::<Vec<_>>(), 10);
    let mass: f64 = x
        .iter()
        .zip(&wq)
        .filter(|(t, _)| **t < 1.0)
        .map(|(&t, &wt)| wt * beta_prime_density(3, 2, 0.5, t / (1.0 - t)).unwrap() / ((1.0 - t) * (1.0 - t)))
        .sum();
    let norm = (mass - 1.0).abs() < 1e-8;
    let f = ergodic_fourier(&w, &[0.0]).re == 1.0;
    Ok((
        sum_ok && perm && hel && c && norm && f,
        format!("gamma = sum x {sum_ok}, permutation {perm}, Hel(s,s) {hel}, constant {c}, mass {mass:.10}, F(0) {f}"),
    ))
}

fn cli_determinism(_: Option<Fault>) -> Result<(bool, String)> {
    let flags = Flags { s: Some(0.0), lattice: Some(5), ..Flags::default() };
    let cfg = resolve(CommandKind::KernelTable, flags)?;
    let a = kernel_table(&cfg)?.render(&cfg);
    let b = kernel_table(&cfg)?.render(&cfg);
    let rows = a.lines().filter(|l| !l.starts_with('#')).count() - 1;
    Ok((a == b && rows == 25, format!("identical {}, {rows} rows", a == b)))
}

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("jacobi_norms", jacobi_norms),
    ("bessel_continuity", bessel_continuity),
    ("kernel_symmetry", kernel_symmetry),
    ("reproducing_property", reproducing_property),
    ("recurrences", recurrences),
    ("projection_integrality", projection_integrality),
    ("induced_projection_chain", induced_chain),
    ("multiplicative_transform", transform_identities),
    ("sampler_laws", sampler_laws),
    ("metropolis_oracle", metropolis_oracle),
    ("pickrell_identities", pickrell_identities),
    ("cli_determinism", cli_determinism),
];

pub fn run(fault: Option<Fault>) -> Report {
    let checks: Vec<Check> = CHECKS
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let (passed, detail) = match f(fault) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            Check { name: name.to_string(), passed, detail, seconds: t.elapsed().as_secs_f64() }
        })
        .collect();
    Report { version: super::output::VERSION.to_string(), all_passed: checks.iter().all(|c| c.passed), checks }
}
