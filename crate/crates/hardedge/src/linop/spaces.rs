use super::{det_symmetric, discretize, n_s_of, DampingFunction, Grid, KernelMatrix};
use crate::error::{domain, numerical, Result};
use crate::kernels::KernelSpec;
use crate::specfun::{jacobi_sequence, jv};
use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::Arc;

/// Eigenvalues of the discretized Bessel block above this level span its range.
pub const ROUNDING_LEVEL: f64 = 0.5;

/// Orthonormal grid-sampled functions; columns hold sqrt(w_i) f(x_i).
#[derive(Debug, Clone)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
    pub grid: Arc<Grid>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormalize columns already scaled by sqrt(w).
    ///
    /// Householder QR; a diagonal entry of R below `tol` times the column norm
    /// signals numerical rank deficiency.
    pub fn from_scaled_columns(cols: DMatrix<f64>, grid: Arc<Grid>, tol: f64) -> Result<Subspace> {
        let d = cols.ncols();
        if d == 0 {
            return Ok(Subspace { basis: DMatrix::zeros(grid.len(), 0), grid });
        }
        let norms: Vec<f64> = (0..d).map(|j| cols.column(j).norm()).collect();
        let qr = cols.qr();
        let r = qr.r();
        for j in 0..d {
            if !(r[(j, j)].abs() > tol * norms[j].max(1e-300)) {
                return numerical(format!("basis is numerically rank deficient at column {j}"));
            }
        }
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(Subspace { basis: q, grid })
    }

    /// Orthonormalize raw function values (one column per function).
    pub fn from_functions(values: DMatrix<f64>, grid: Arc<Grid>, tol: f64) -> Result<Subspace> {
        let sw = grid.sqrt_weights();
        let mut cols = values;
        for i in 0..cols.nrows() {
            for j in 0..cols.ncols() {
                cols[(i, j)] *= sw[i];
            }
        }
        Self::from_scaled_columns(cols, grid, tol)
    }

    /// Gram matrix defect max |Q^T Q - I|.
    pub fn gram_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    pub fn projection(&self, label: impl Into<String>) -> KernelMatrix {
        let p = &self.basis * self.basis.transpose();
        let n = p.nrows();
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
        KernelMatrix { entries: sym, grid: self.grid.clone(), label: label.into() }
    }

    /// Orthonormal basis of sqrt(g) times this subspace.
    pub fn damped(&self, g: &DampingFunction) -> Result<Subspace> {
        g.validate()?;
        let gv = g.on_grid(&self.grid);
        let mut cols = self.basis.clone();
        for i in 0..cols.nrows() {
            let f = gv[i].sqrt();
            for j in 0..cols.ncols() {
                cols[(i, j)] *= f;
            }
        }
        Self::from_scaled_columns(cols, self.grid.clone(), 1e-12)
    }

    /// Function value of basis vector j at node i.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.basis[(i, j)] / self.grid.weights[i].sqrt()
    }
}

/// Orthonormal basis of the range of a projection matrix (eigenvalues above 1/2).
pub fn range_of_projection(p: &KernelMatrix) -> Subspace {
    let eig = SymmetricEigen::new(p.entries.clone());
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let basis = DMatrix::from_fn(p.dim(), keep.len(), |i, a| eig.eigenvectors[(i, keep[a])]);
    Subspace { basis, grid: p.grid.clone() }
}

/// The n_s functions spanning V^(s): x^{-s/2-1-k}, k < n_s - 1, then J_{s'-1}(2/sqrt x)/sqrt x,
/// with s' = s + 2 n_s.
pub fn v_s_functions(s: f64, x: f64) -> Vec<f64> {
    let ns = n_s_of(s);
    let sp = s + 2.0 * ns as f64;
    let mut out: Vec<f64> = (0..ns.saturating_sub(1)).map(|k| x.powf(-0.5 * s - 1.0 - k as f64)).collect();
    if ns > 0 {
        out.push(jv(sp - 1.0, 2.0 / x.sqrt()) / x.sqrt());
    }
    out
}

fn check_infinite_s(s: f64) -> Result<()> {
    if !(s <= -1.0) || !s.is_finite() {
        return domain(format!("this construction needs s <= -1 (got {s})"));
    }
    Ok(())
}

/// V^(s) sampled on the grid and orthonormalized.
pub fn build_v_s(s: f64, grid: &Arc<Grid>) -> Result<Subspace> {
    check_infinite_s(s)?;
    if !(grid.nodes[0] > 0.0) {
        return domain("V^(s) needs a grid bounded away from 0");
    }
    let ns = n_s_of(s);
    let vals = DMatrix::from_fn(grid.len(), ns, |i, k| v_s_functions(s, grid.nodes[i])[k]);
    Subspace::from_functions(vals, grid.clone(), 1e-10)
}

/// Pi^(s,R) together with its range.
#[derive(Debug, Clone)]
pub struct PerturbedProjection {
    pub projection: KernelMatrix,
    pub range: Subspace,
    pub n_s: usize,
    pub bessel_rank: usize,
}

/// Projection onto chi_(0,R) [V^(s) + L^(s')], s' = s + 2 n_s.
///
/// The Bessel block J^(s') is discretized on the nodes below R and its
/// eigenvectors with eigenvalue above `ROUNDING_LEVEL` are kept (at most
/// `bessel_rank_cutoff` of them when given); V^(s) is adjoined and the union
/// orthonormalized.
pub fn build_h_s_projection(s: f64, r: f64, grid: &Arc<Grid>, bessel_rank_cutoff: Option<usize>) -> Result<PerturbedProjection> {
    check_infinite_s(s)?;
    if !(r > 0.0) {
        return domain("R must be positive");
    }
    let ns = n_s_of(s);
    let sp = s + 2.0 * ns as f64;
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes[i] < r).collect();
    if inside.is_empty() || !(grid.nodes[0] > 0.0) {
        return domain("grid has no nodes in (0, R) or touches 0");
    }
    let sub = Arc::new(Grid {
        nodes: inside.iter().map(|&i| grid.nodes[i]).collect(),
        weights: inside.iter().map(|&i| grid.weights[i]).collect(),
        interval: (0.0, r),
        cutoff: None,
    });
    let j = discretize(&KernelSpec::BesselModified { s: sp }, &sub)?;
    let eig = SymmetricEigen::new(j.entries);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > ROUNDING_LEVEL).collect();
    if let Some(k) = bessel_rank_cutoff {
        keep.truncate(k);
    }
    let m = grid.len();
    let d = keep.len() + ns;
    let mut cols = DMatrix::zeros(m, d);
    let sw = grid.sqrt_weights();
    for (a, &i) in inside.iter().enumerate() {
        for (c, &e) in keep.iter().enumerate() {
            cols[(i, c)] = eig.eigenvectors[(a, e)];
        }
        let v = v_s_functions(s, grid.nodes[i]);
        for k in 0..ns {
            cols[(i, keep.len() + k)] = v[k] * sw[i];
        }
    }
    let range = Subspace::from_scaled_columns(cols, grid.clone(), 1e-10).map_err(|_| {
        crate::Error::Numerical("V^(s) and the Bessel block are numerically dependent".into())
    })?;
    let projection = range.projection(format!("pi(s={s},R={r})"));
    Ok(PerturbedProjection { projection, range, n_s: ns, bessel_rank: keep.len() })
}

/// Pi^(s,beta): projection onto exp(-beta x/2) H^(s), realized on the grid's range (0, cutoff).
pub fn build_damped_projection(s: f64, beta: f64, grid: &Arc<Grid>) -> Result<PerturbedProjection> {
    if !(beta > 0.0) {
        return domain("damping needs beta > 0");
    }
    let r = grid.nodes.last().copied().unwrap_or(0.0) * (1.0 + 1e-12);
    let base = build_h_s_projection(s, r, grid, None)?;
    let range = base.range.damped(&DampingFunction::ExpDamp { beta })?;
    let projection = range.projection(format!("pi(s={s},beta={beta})"));
    Ok(PerturbedProjection { projection, range, n_s: base.n_s, bessel_rank: base.bessel_rank })
}

/// Basis of H^(s,n) sampled on the grid: with lambda = n^2 x and u = (lambda-1)/(lambda+1),
/// the V^(s,n) functions (1 + lambda)^{-s/2-1-k}, k < n_s, and the rescaled Jacobi space
/// (1 + lambda)^{-1} (1-u)^{s'/2} P_l^(s',0)(u), l < n - n_s.
pub fn h_sn_functions(s: f64, n: usize, x: f64) -> Vec<f64> {
    let ns = n_s_of(s);
    let sp = s + 2.0 * ns as f64;
    let lam = (n * n) as f64 * x;
    let u = (lam - 1.0) / (lam + 1.0);
    let mut out: Vec<f64> = (0..ns).map(|k| (1.0 + lam).powf(-0.5 * s - 1.0 - k as f64)).collect();
    let mut p = Vec::new();
    if n > ns {
        jacobi_sequence(n - ns - 1, sp, 0.0, u, &mut p);
        let w = (1.0 - u).powf(0.5 * sp) / (1.0 + lam);
        out.extend(p.iter().map(|v| v * w));
    }
    out
}

/// Projection onto H^(s,n) restricted to the grid, optionally damped by g.
pub fn build_h_sn_projection(s: f64, n: usize, grid: &Arc<Grid>, damping: Option<&DampingFunction>) -> Result<PerturbedProjection> {
    let ns = n_s_of(s);
    if !(n > ns) || !(n as f64 + s > 0.0) {
        return domain(format!("need n > n_s and n + s > 0 (got n={n}, s={s})"));
    }
    let gv = damping.map(|g| g.on_grid(grid));
    let vals = DMatrix::from_fn(grid.len(), n, |i, k| {
        let f = h_sn_functions(s, n, grid.nodes[i])[k];
        match &gv {
            Some(g) => f * g[i].sqrt(),
            None => f,
        }
    });
    let range = Subspace::from_functions(vals, grid.clone(), 1e-13)?;
    let label = match damping {
        Some(_) => format!("pi(n={n},s={s},damped)"),
        None => format!("pi(n={n},s={s})"),
    };
    let projection = range.projection(label);
    Ok(PerturbedProjection { projection, range, n_s: ns, bessel_rank: n - ns })
}

/// det(1 - chi_(R1,inf) p chi) / det(1 - chi_(R2,inf) p chi).
pub fn xmax_ratio_for(p: &KernelMatrix, r1: f64, r2: f64) -> Result<f64> {
    let d1 = det_symmetric(&p.block(&p.grid.mask(r1, f64::INFINITY)), -1.0)?;
    let d2 = det_symmetric(&p.block(&p.grid.mask(r2, f64::INFINITY)), -1.0)?;
    if d2 == 0.0 {
        return numerical("reference restriction mass vanishes");
    }
    Ok(d1 / d2)
}

/// B^(s)(x_max < R1) / B^(s)(x_max < R2) as a ratio of Fredholm determinants with Pi^(s,R).
pub fn xmax_mass_ratio(s: f64, r: f64, r1: f64, r2: f64, grid: &Arc<Grid>) -> Result<f64> {
    if !(r1 > 0.0 && r2 > 0.0 && r1 <= r && r2 <= r) {
        return domain("need 0 < R1, R2 <= R");
    }
    let pi = build_h_s_projection(s, r, grid, None)?;
    xmax_ratio_for(&pi.projection, r1, r2)
}

/// Pi_bar^(s,R): the complement, inside range(Pi^(s,R)), of the kernel column at the node nearest R.
pub fn conditional_projection_at_max(s: f64, r: f64, grid: &Arc<Grid>) -> Result<PerturbedProjection> {
    let base = build_h_s_projection(s, r, grid, None)?;
    let support: Vec<usize> = (0..grid.len()).filter(|&i| grid.nodes[i] < r).collect();
    let j = *support
        .iter()
        .min_by(|&&a, &&b| (grid.nodes[a] - r).abs().partial_cmp(&(grid.nodes[b] - r).abs()).unwrap())
        .ok_or_else(|| crate::Error::Domain("no node below R".into()))?;
    let q = &base.range.basis;
    let phi = q.row(j).transpose();
    if phi.norm() < 1e-12 {
        return numerical("kernel column at R vanishes");
    }
    // Rotate the basis so that one vector carries phi, then drop it.
    let d = q.ncols();
    let mut h = DMatrix::identity(d, d);
    let e = phi.normalize();
    let mut v = e.clone();
    v[0] -= 1.0;
    if v.norm() > 1e-14 {
        let v = v.normalize();
        h -= 2.0 * &v * v.transpose();
    }
    let rotated = q * h;
    let basis = rotated.columns(1, d - 1).into_owned();
    let range = Subspace { basis, grid: grid.clone() };
    let projection = range.projection(format!("pi_bar(s={s},R={r})"));
    Ok(PerturbedProjection { projection, range, n_s: base.n_s, bessel_rank: base.bessel_rank })
}
