//! Exact on-grid sampling of determinantal point processes, multiplicative
//! functionals, and a Metropolis oracle for the Jacobi ensemble density.

use crate::error::{domain, numerical, Result};
use crate::kernels::EnsembleParams;
use crate::linop::{build_damped_projection, DampingFunction, Grid, KernelMatrix, Subspace};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub particles: Vec<f64>,
    pub window: (f64, f64),
}

impl Configuration {
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.particles.iter().filter(|&&x| x > lo && x < hi).count()
    }

    pub fn max(&self) -> Option<f64> {
        self.particles.last().copied()
    }

    pub fn sum(&self) -> f64 {
        self.particles.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub configs: Vec<Configuration>,
    pub seed: u64,
    pub kernel_id: String,
}

/// Generator for configuration `index` of a batch with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// A determinantal process on grid nodes, ready to sample.
#[derive(Debug, Clone)]
pub enum GridDpp {
    /// Projection onto the span of orthonormal columns.
    Projection { basis: DMatrix<f64>, grid: Arc<Grid> },
    /// Hermitian kernel with spectrum in [0, 1], sampled as a mixture of projections.
    Spectral { values: Vec<f64>, vectors: DMatrix<f64>, grid: Arc<Grid> },
}

fn pick(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let t = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc > t {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Sequential sampler for the projection onto the columns of `q` (orthonormal, M x N).
fn sample_columns(mut q: DMatrix<f64>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (m, n) = q.shape();
    let mut norms: Vec<f64> = (0..m).map(|i| q.row(i).norm_squared()).collect();
    let mut chosen = Vec::with_capacity(n);
    for first in 0..n {
        let k = n - first;
        let total: f64 = norms.iter().sum();
        let i = pick(&norms, total.max(0.0), rng);
        chosen.push(i);
        if k == 1 {
            break;
        }
        // Householder reflection on the active columns sending row i to |r| e_first.
        let mut v: Vec<f64> = (first..n).map(|c| q[(i, c)]).collect();
        let rn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn == 0.0 {
            break;
        }
        for x in v.iter_mut() {
            *x /= rn;
        }
        v[0] -= 1.0;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 > 1e-30 {
            for row in 0..m {
                let mut dot = 0.0;
                for (a, c) in (first..n).enumerate() {
                    dot += q[(row, c)] * v[a];
                }
                let f = 2.0 * dot / vn2;
                if f != 0.0 {
                    for (a, c) in (first..n).enumerate() {
                        q[(row, c)] -= f * v[a];
                    }
                }
            }
        }
        for row in 0..m {
            let x = q[(row, first)];
            norms[row] = (norms[row] - x * x).max(0.0);
        }
        norms[i] = 0.0;
    }
    chosen.sort_unstable();
    chosen
}

impl GridDpp {
    /// From a projection matrix: idempotent to 1e-6, rank = round(trace) >= 1.
    pub fn from_projection(p: &KernelMatrix) -> Result<GridDpp> {
        if p.asymmetry() > 1e-10 {
            return domain("sampler needs a symmetric kernel matrix");
        }
        let defect = p.idempotency_defect();
        if defect > 1e-6 {
            return domain(format!("sampler needs a projection (max |P^2 - P| = {defect:e})"));
        }
        let rank = p.trace().round() as usize;
        if rank == 0 {
            return domain("projection has rank 0");
        }
        let eig = SymmetricEigen::new(p.entries.clone());
        let mut idx: Vec<usize> = (0..p.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let basis = DMatrix::from_fn(p.dim(), rank, |i, c| eig.eigenvectors[(i, idx[c])]);
        Ok(GridDpp::Projection { basis, grid: p.grid.clone() })
    }

    pub fn from_subspace(v: &Subspace) -> Result<GridDpp> {
        if v.dim() == 0 {
            return domain("projection has rank 0");
        }
        Ok(GridDpp::Projection { basis: v.basis.clone(), grid: v.grid.clone() })
    }

    /// From any symmetric kernel matrix with eigenvalues in [-1e-8, 1 + 1e-8].
    pub fn from_kernel(k: &KernelMatrix) -> Result<GridDpp> {
        let eig = SymmetricEigen::new(k.entries.clone());
        let mut values = vec![];
        let mut keep = vec![];
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if !(-1e-8..=1.0 + 1e-8).contains(&l) {
                return domain(format!("kernel eigenvalue {l} outside [0, 1]"));
            }
            if l > 1e-14 {
                values.push(l.min(1.0));
                keep.push(i);
            }
        }
        let vectors = DMatrix::from_fn(k.dim(), keep.len(), |i, c| eig.eigenvectors[(i, keep[c])]);
        Ok(GridDpp::Spectral { values, vectors, grid: k.grid.clone() })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            GridDpp::Projection { grid, .. } | GridDpp::Spectral { grid, .. } => grid,
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            GridDpp::Projection { basis, .. } => Some(basis.ncols()),
            GridDpp::Spectral { .. } => None,
        }
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Configuration {
        let grid = self.grid();
        let idx = match self {
            GridDpp::Projection { basis, .. } => sample_columns(basis.clone(), rng),
            GridDpp::Spectral { values, vectors, .. } => {
                let cols: Vec<usize> = (0..values.len()).filter(|&c| rng.random::<f64>() < values[c]).collect();
                if cols.is_empty() {
                    vec![]
                } else {
                    let q = DMatrix::from_fn(vectors.nrows(), cols.len(), |i, c| vectors[(i, cols[c])]);
                    sample_columns(q, rng)
                }
            }
        };
        let window = (grid.interval.0, grid.cutoff.unwrap_or(grid.interval.1));
        Configuration { particles: idx.into_iter().map(|i| grid.nodes[i]).collect(), window }
    }

    pub fn sample(&self, count: usize, seed: u64, kernel_id: &str) -> SampleBatch {
        let configs: Vec<Configuration> = (0..count)
            .into_par_iter()
            .map(|i| self.sample_one(&mut substream(seed, i as u64)))
            .collect();
        SampleBatch { configs, seed, kernel_id: kernel_id.to_string() }
    }
}

/// Exact samples of the projection DPP with matrix `p`.
pub fn sample_projection_dpp(p: &KernelMatrix, count: usize, seed: u64) -> Result<SampleBatch> {
    let dpp = GridDpp::from_projection(p)?;
    Ok(dpp.sample(count, seed, &p.label))
}

/// prod g(x_i).
pub fn multiplicative_functional(x: &Configuration, g: &DampingFunction) -> f64 {
    let mut v = 1.0;
    for &p in &x.particles {
        let f = g.eval(p);
        if f == 0.0 {
            return 0.0;
        }
        v *= f;
    }
    v
}

/// Samples from the Pi^(s,beta) process on the grid.
pub fn damped_infinite_sampler(s: f64, beta: f64, grid: &Arc<Grid>, count: usize, seed: u64) -> Result<SampleBatch> {
    let pi = build_damped_projection(s, beta, grid)?;
    let dpp = GridDpp::from_subspace(&pi.range)?;
    Ok(dpp.sample(count, seed, &pi.projection.label))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step: f64,
    pub samples_per_chain: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { chains: 1, burn_in: 1000, thin: 10, step: 0.1, samples_per_chain: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcDiagnostics {
    pub acceptance_rate: f64,
    /// Split R-hat of sum(u) over chain halves; None when a chain holds fewer than 4 samples.
    pub split_rhat: Option<f64>,
}

fn log_density(us: &[f64], s: f64) -> f64 {
    let mut l = 0.0;
    for i in 0..us.len() {
        if !(us[i] > -1.0 && us[i] < 1.0) {
            return f64::NEG_INFINITY;
        }
        l += s * (1.0 - us[i]).ln();
        for j in 0..i {
            l += 2.0 * (us[i] - us[j]).abs().ln();
        }
    }
    l
}

fn run_chain(params: EnsembleParams, cfg: &McmcConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let n = params.n;
    let normal = Normal::new(0.0, cfg.step).map_err(|e| crate::Error::Domain(e.to_string()))?;
    let mut us: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut cur = log_density(&us, params.s);
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut stall = 0usize;
    let mut out = Vec::with_capacity(cfg.samples_per_chain);
    let total = cfg.burn_in + cfg.thin * cfg.samples_per_chain;
    for sweep in 1..=total {
        for i in 0..n {
            let old = us[i];
            us[i] = old + normal.sample(rng);
            let new = log_density(&us, params.s);
            proposed += 1;
            if new.is_finite() && (new >= cur || rng.random::<f64>() < (new - cur).exp()) {
                cur = new;
                accepted += 1;
                stall = 0;
            } else {
                us[i] = old;
                stall += 1;
                if stall >= 1_000_000 {
                    return numerical("Metropolis chain stalled: 10^6 consecutive rejections");
                }
            }
        }
        if sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            let mut v = us.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.push(v);
        }
    }
    Ok((out, accepted, proposed))
}

/// Split R-hat over chains cut in halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let mut parts: Vec<&[f64]> = vec![];
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return None;
        }
        parts.push(&c[..h]);
        parts.push(&c[h..2 * h]);
    }
    let m = parts.len() as f64;
    let len = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|p| p.iter().sum::<f64>() / len).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = len / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = parts
        .iter()
        .zip(&means)
        .map(|(p, mu)| p.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (len - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return None;
    }
    let var = (len - 1.0) / len * w + b / len;
    Some((var / w).sqrt())
}

/// Metropolis samples from prod_{i<j} (u_i - u_j)^2 prod (1 - u_i)^s on [-1, 1]^n,
/// over independent chains on separate substreams.
pub fn mcmc_jacobi_chains(params: EnsembleParams, cfg: &McmcConfig, seed: u64) -> Result<(SampleBatch, McmcDiagnostics)> {
    if params.n > 12 {
        return domain("the Metropolis oracle is limited to n <= 12");
    }
    if !(params.s > -1.0) {
        return domain("the Metropolis oracle needs s > -1");
    }
    if cfg.chains == 0 || cfg.thin == 0 || cfg.samples_per_chain == 0 || !(cfg.step > 0.0) {
        return domain("chains, thinning, samples per chain and step must be positive");
    }
    let runs: Vec<Result<(Vec<Vec<f64>>, usize, usize)>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(params, cfg, &mut substream(seed, c as u64)))
        .collect();
    let mut configs = vec![];
    let mut sums = vec![];
    let (mut acc, mut prop) = (0usize, 0usize);
    for r in runs {
        let (samples, a, p) = r?;
        acc += a;
        prop += p;
        sums.push(samples.iter().map(|v| v.iter().sum::<f64>()).collect::<Vec<f64>>());
        configs.extend(samples.into_iter().map(|p| Configuration { particles: p, window: (-1.0, 1.0) }));
    }
    let diag = McmcDiagnostics { acceptance_rate: acc as f64 / prop.max(1) as f64, split_rhat: split_rhat(&sums) };
    let batch = SampleBatch { configs, seed, kernel_id: format!("mcmc_jacobi(n={},s={})", params.n, params.s) };
    Ok((batch, diag))
}

/// Single-chain oracle: 1000 burn-in sweeps, then one sample every 10 of `sweeps` sweeps.
pub fn mcmc_jacobi_oracle(params: EnsembleParams, sweeps: usize, seed: u64) -> Result<SampleBatch> {
    let cfg = McmcConfig { samples_per_chain: (sweeps / 10).max(1), ..McmcConfig::default() };
    Ok(mcmc_jacobi_chains(params, &cfg, seed)?.0)
}

/// One configuration per line, comma-separated ascending positions, after
/// `# seed`, `# kernel_id` and `# window` header lines.
pub fn write_batch<W: Write>(batch: &SampleBatch, mut w: W) -> Result<()> {
    let window = batch.configs.first().map(|c| c.window).unwrap_or((0.0, 0.0));
    writeln!(w, "# seed: {}", batch.seed)?;
    writeln!(w, "# kernel_id: {}", batch.kernel_id)?;
    writeln!(w, "# window: {},{}", window.0, window.1)?;
    for c in &batch.configs {
        let s: Vec<String> = c.particles.iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{}", s.join(","))?;
    }
    Ok(())
}

pub fn read_batch<R: BufRead>(r: R) -> Result<SampleBatch> {
    let mut seed = 0;
    let mut kernel_id = String::new();
    let mut window = (0.0, 0.0);
    let mut configs = vec![];
    let bad = |m: &str| crate::Error::Validation(m.to_string());
    for line in r.lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta.split_once(':').ok_or_else(|| bad("malformed batch header"))?;
            let v = v.trim();
            match k.trim() {
                "seed" => seed = v.parse().map_err(|_| bad("bad seed"))?,
                "kernel_id" => kernel_id = v.to_string(),
                "window" => {
                    let (a, b) = v.split_once(',').ok_or_else(|| bad("bad window"))?;
                    window = (a.trim().parse().map_err(|_| bad("bad window"))?, b.trim().parse().map_err(|_| bad("bad window"))?);
                }
                _ => {}
            }
            continue;
        }
        let particles: Vec<f64> = if line.trim().is_empty() {
            vec![]
        } else {
            line.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad particle"))).collect::<Result<_>>()?
        };
        configs.push(Configuration { particles, window });
    }
    Ok(SampleBatch { configs, seed, kernel_id })
}
