//! Grids, Nystrom matrices, Fredholm determinants and the projections built from
//! the perturbed Bessel subspaces.

mod grid;
pub mod io;
mod spaces;

pub use grid::{make_grid, Grid, HardEdgeLayout, DEFAULT_CUTOFF, DEFAULT_PANELS, DEFAULT_PPP};
pub use spaces::*;

use crate::error::{domain, numerical, Result};
use crate::kernels::KernelSpec;
use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::Arc;

/// W^{1/2} K W^{1/2} on a grid.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub grid: Arc<Grid>,
    pub label: String,
}

impl KernelMatrix {
    pub fn new(entries: DMatrix<f64>, grid: Arc<Grid>, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != grid.len() || entries.ncols() != grid.len() {
            return domain("kernel matrix size does not match its grid");
        }
        Ok(KernelMatrix { entries, grid, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn asymmetry(&self) -> f64 {
        let m = &self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    /// max |P^2 - P|.
    pub fn idempotency_defect(&self) -> f64 {
        let p = &self.entries;
        (p * p - p).amax()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// chi_B K chi_B: entries outside the mask set to zero.
    pub fn restrict(&self, mask: &[bool]) -> KernelMatrix {
        let mut e = self.entries.clone();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if !(mask[i] && mask[j]) {
                    e[(i, j)] = 0.0;
                }
            }
        }
        KernelMatrix { entries: e, grid: self.grid.clone(), label: format!("{}|restricted", self.label) }
    }

    /// The compressed block on the masked indices.
    pub fn block(&self, mask: &[bool]) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| mask[i]).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])])
    }

    /// Kernel value K(x_i, x_j) with the weights divided out.
    pub fn kernel_value(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)] / (self.grid.weights[i] * self.grid.weights[j]).sqrt()
    }
}

/// Nystrom matrix sqrt(w_i) K(x_i, x_j) sqrt(w_j).
pub fn discretize(spec: &KernelSpec, grid: &Arc<Grid>) -> Result<KernelMatrix> {
    let m = grid.len();
    let vals = spec.tabulate(&grid.nodes)?;
    let sw = grid.sqrt_weights();
    let e = DMatrix::from_fn(m, m, |i, j| sw[i] * vals[i * m + j] * sw[j]);
    KernelMatrix::new(e, grid.clone(), spec.id())
}

/// det(I + sign m) of a symmetric matrix through its eigenvalues.
pub fn det_symmetric(m: &DMatrix<f64>, sign: f64) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(1.0);
    }
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let mut log = 0.0;
    let mut sgn = 1.0;
    for &l in ev.iter() {
        let f = 1.0 + sign * l;
        if f.abs() < 1e-14 {
            return numerical(format!("Fredholm determinant is singular (factor {f:e})"));
        }
        if f < 0.0 {
            sgn = -sgn;
        }
        log += f.abs().ln();
    }
    Ok(sgn * log.exp())
}

/// det(I + sign m).
pub fn fredholm_det(m: &KernelMatrix, sign: f64) -> Result<f64> {
    if sign != 1.0 && sign != -1.0 {
        return domain("fredholm_det sign must be +1 or -1");
    }
    if m.asymmetry() > 1e-10 {
        return domain("fredholm_det needs a symmetric matrix");
    }
    det_symmetric(&m.entries, sign)
}

/// det(I - chi_B m chi_B) for the masked set B.
pub fn gap_probability(m: &KernelMatrix, mask: &[bool]) -> Result<f64> {
    det_symmetric(&m.block(mask), -1.0)
}

/// Damping functions g with 0 <= g <= 1.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingFunction {
    /// Indicator of (0, r).
    Indicator { r: f64 },
    /// exp(-beta x).
    ExpDamp { beta: f64 },
    /// max(exp(-beta x), floor).
    ExpClamped { beta: f64, floor: f64 },
    /// Piecewise-linear interpolation of tabulated values.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl DampingFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            DampingFunction::Indicator { r } if !(*r > 0.0) => domain("indicator needs r > 0"),
            DampingFunction::ExpDamp { beta } if !(*beta >= 0.0) => domain("exp damping needs beta >= 0"),
            DampingFunction::ExpClamped { beta, floor } if !(*beta >= 0.0 && (0.0..=1.0).contains(floor)) => {
                domain("clamped exp damping needs beta >= 0 and floor in [0, 1]")
            }
            DampingFunction::Tabulated { nodes, values } => {
                if nodes.len() != values.len() || nodes.is_empty() {
                    return domain("tabulated damping needs matching nonempty nodes and values");
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return domain("tabulated damping values must lie in [0, 1]");
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return domain("tabulated damping nodes must increase");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DampingFunction::Indicator { r } => {
                if x > 0.0 && x < *r {
                    1.0
                } else {
                    0.0
                }
            }
            DampingFunction::ExpDamp { beta } => (-beta * x).exp(),
            DampingFunction::ExpClamped { beta, floor } => (-beta * x).exp().max(*floor),
            DampingFunction::Tabulated { nodes, values } => {
                let k = nodes.partition_point(|&t| t < x);
                if k == 0 {
                    values[0]
                } else if k == nodes.len() {
                    values[k - 1]
                } else {
                    let t = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
                    values[k - 1] + t * (values[k] - values[k - 1])
                }
            }
        }
    }

    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes.iter().map(|&x| self.eval(x)).collect()
    }
}

/// The projection onto chi_{E0} range(p): chi0 p (1 - chi_B p)^{-1} chi0 with B the complement.
pub fn induced_projection(p: &KernelMatrix, e0_mask: &[bool]) -> Result<KernelMatrix> {
    if p.idempotency_defect() > 1e-6 {
        return domain("induced_projection needs a projection");
    }
    let n = p.dim();
    let inside: Vec<usize> = (0..n).filter(|&i| e0_mask[i]).collect();
    let outside: Vec<usize> = (0..n).filter(|&i| !e0_mask[i]).collect();
    let mut out = DMatrix::zeros(n, n);
    let e = &p.entries;
    let p00 = DMatrix::from_fn(inside.len(), inside.len(), |a, b| e[(inside[a], inside[b])]);
    let result = if outside.is_empty() {
        p00
    } else {
        let pbb = DMatrix::from_fn(outside.len(), outside.len(), |a, b| e[(outside[a], outside[b])]);
        let p0b = DMatrix::from_fn(inside.len(), outside.len(), |a, b| e[(inside[a], outside[b])]);
        let eig = SymmetricEigen::new(pbb);
        let top = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        if 1.0 - top < 1e-10 {
            return numerical(format!(
                "1 - chi p is not invertible (1 - max eig = {:e}): the subspace has no unique extension",
                1.0 - top
            ));
        }
        // (1 - P_BB)^{-1} through the eigenbasis.
        let v = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / (1.0 - l)));
        let inv = v * d * v.transpose();
        &p00 + &p0b * inv * p0b.transpose()
    };
    for (a, &i) in inside.iter().enumerate() {
        for (b, &j) in inside.iter().enumerate() {
            out[(i, j)] = 0.5 * (result[(a, b)] + result[(b, a)]);
        }
    }
    KernelMatrix::new(out, p.grid.clone(), format!("{}|induced", p.label))
}

/// sqrt(g) K (1 + (g-1) K)^{-1} sqrt(g).
pub fn mult_transform(k: &KernelMatrix, g: &DampingFunction) -> Result<KernelMatrix> {
    g.validate()?;
    let gv = g.on_grid(&k.grid);
    let n = k.dim();
    // K (I + D K)^{-1} = ((I + K D)^{-1} K)^T-free form: solve (I + K D) Y = K.
    let mut a: DMatrix<f64> = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += k.entries[(i, j)] * (gv[j] - 1.0);
        }
    }
    let lu = a.lu();
    let u = lu.u();
    let scale = u.amax().max(1.0);
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * scale {
        return numerical(format!("singular resolvent in multiplicative transform (pivot {min_pivot:e})"));
    }
    let y = lu.solve(&k.entries).ok_or_else(|| crate::Error::Numerical("singular resolvent".into()))?;
    let sg: Vec<f64> = gv.iter().map(|v| v.sqrt()).collect();
    let out = DMatrix::from_fn(n, n, |i, j| 0.5 * sg[i] * (y[(i, j)] + y[(j, i)]) * sg[j]);
    KernelMatrix::new(out, k.grid.clone(), format!("{}|transformed", k.label))
}

/// Sum of |eigenvalues| of the window block of a - b.
pub fn windowed_trace_distance(a: &KernelMatrix, b: &KernelMatrix, lo: f64, hi: f64) -> Result<f64> {
    let ia: Vec<usize> = (0..a.dim()).filter(|&i| a.grid.nodes[i] > lo && a.grid.nodes[i] < hi).collect();
    let ib: Vec<usize> = (0..b.dim()).filter(|&i| b.grid.nodes[i] > lo && b.grid.nodes[i] < hi).collect();
    if ia.len() != ib.len()
        || ia.iter().zip(&ib).any(|(&i, &j)| {
            (a.grid.nodes[i] - b.grid.nodes[j]).abs() > 1e-12 * a.grid.nodes[i].abs().max(1.0)
        })
    {
        return domain("the two grids do not share their window nodes");
    }
    let d = DMatrix::from_fn(ia.len(), ia.len(), |p, q| a.entries[(ia[p], ia[q])] - b.entries[(ib[p], ib[q])]);
    Ok(SymmetricEigen::new(d).eigenvalues.iter().map(|l| l.abs()).sum())
}

/// The unique n_s with s/2 + n_s in (-1/2, 1/2].
pub fn n_s_of(s: f64) -> usize {
    let v = (0.5 - 0.5 * s).floor();
    if v <= 0.0 {
        0
    } else {
        v as usize
    }
}
