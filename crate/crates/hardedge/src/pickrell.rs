//! Radial densities, Pickrell points, consistency constants and the Hellinger
//! computations behind mutual singularity.

use crate::error::{domain, Result};
use crate::kernels::EnsembleParams;
use crate::specfun::{jacobi_sequence, ln_gamma, log_gamma_ratio};
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Unnormalized prod_{i<j} (u_i - u_j)^2 prod (1 - u_i)^s.
pub fn radial_density_u(params: EnsembleParams, us: &[f64]) -> Result<f64> {
    Ok(ln_radial_density_u(params, us)?.exp())
}

/// Logarithm of `radial_density_u`; -inf where the density vanishes.
pub fn ln_radial_density_u(params: EnsembleParams, us: &[f64]) -> Result<f64> {
    if us.len() != params.n {
        return domain(format!("expected {} coordinates, got {}", params.n, us.len()));
    }
    let s = params.s;
    let mut l = 0.0;
    for (i, &u) in us.iter().enumerate() {
        if !(-1.0..=1.0).contains(&u) {
            return domain(format!("coordinate {u} outside [-1, 1]"));
        }
        if u == 1.0 {
            if s < 0.0 {
                return domain("density is +inf at u = 1 for s < 0");
            }
            if s > 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
        } else if s != 0.0 {
            l += s * (1.0 - u).ln();
        }
        for &v in &us[..i] {
            l += 2.0 * (u - v).abs().ln();
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PickrellPoint {
    pub gamma: f64,
    pub xs: Vec<f64>,
}

impl PickrellPoint {
    pub fn new(gamma: f64, mut xs: Vec<f64>) -> Result<PickrellPoint> {
        if xs.iter().any(|x| !(*x >= 0.0)) {
            return domain("Pickrell coordinates must be nonnegative");
        }
        xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = xs.iter().sum();
        if !(gamma >= total * (1.0 - 1e-12)) {
            return domain(format!("gamma = {gamma} is below sum x = {total}"));
        }
        Ok(PickrellPoint { gamma, xs })
    }

    /// gamma - sum x.
    pub fn gaussian_parameter(&self) -> f64 {
        (self.gamma - self.xs.iter().sum::<f64>()).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSample {
    pub lambdas: Vec<f64>,
    pub n: usize,
}

impl RadialSample {
    pub fn new(mut lambdas: Vec<f64>) -> Result<RadialSample> {
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return domain("squared singular values must be nonnegative");
        }
        lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n = lambdas.len();
        Ok(RadialSample { lambdas, n })
    }

    /// From Jacobi coordinates via lambda = (1 + u)/(1 - u).
    pub fn from_u(us: &[f64]) -> Result<RadialSample> {
        if us.iter().any(|u| !(*u >= -1.0 && *u < 1.0)) {
            return domain("Jacobi coordinates must lie in [-1, 1)");
        }
        RadialSample::new(us.iter().map(|u| (1.0 + u) / (1.0 - u)).collect())
    }
}

/// (sum lambda / n^2; lambda_1 / n^2, ..., lambda_n / n^2, 0, ...).
pub fn to_pickrell_point(r: &RadialSample) -> PickrellPoint {
    let n2 = (r.n * r.n).max(1) as f64;
    let xs: Vec<f64> = r.lambdas.iter().map(|l| l / n2).collect();
    let gamma = xs.iter().sum();
    PickrellPoint { gamma, xs }
}

/// pi^n Gamma(m+1+s) / Gamma(n+m+1+s).
pub fn consistency_constant(m: usize, n: usize, s: f64) -> Result<f64> {
    let a = m as f64 + 1.0 + s;
    if !(a > 0.0) {
        return domain(format!("need m + 1 + s > 0 (got {a})"));
    }
    Ok((n as f64 * PI.ln() - log_gamma_ratio(a + n as f64, a)?).exp())
}

fn ln_beta_prime_norm(n: usize, a: f64) -> f64 {
    ln_gamma(n as f64 + a) - ln_gamma(n as f64) - ln_gamma(a)
}

/// Gamma(n+m+s)/(Gamma(n) Gamma(m+s)) r^{n-1} (1+r)^{-m-n-s} on (0, inf).
pub fn beta_prime_density(m: usize, n: usize, s: f64, r: f64) -> Result<f64> {
    let a = m as f64 + s;
    if !(a > 0.0) {
        return domain(format!("need m + s > 0 (got {a})"));
    }
    if n == 0 {
        return domain("shape n must be at least 1");
    }
    if !(r > 0.0) || !r.is_finite() {
        return domain("r must be positive and finite");
    }
    let nf = n as f64;
    Ok((ln_beta_prime_norm(n, a) + (nf - 1.0) * r.ln() - (nf + a) * r.ln_1p()).exp())
}

/// Affinity of P^(n,n-1,s) x P^(n,n,s) with P^(n,n-1,s2) x P^(n,n,s2).
pub fn hellinger(n: usize, s: f64, s2: f64) -> Result<f64> {
    let nf = n as f64;
    if !(nf + s > 1.0 && nf + s2 > 1.0) || n < 2 {
        return domain(format!("need n + s > 1 and n + s2 > 1 (got n={n}, s={s}, s2={s2})"));
    }
    if s == s2 {
        return Ok(1.0);
    }
    let m = 0.5 * (s + s2);
    let half = |t: f64| -> Result<f64> { Ok(0.5 * (log_gamma_ratio(t + s, t + m)? + log_gamma_ratio(t + s2, t + m)?)) };
    let l = half(2.0 * nf - 1.0)? + half(2.0 * nf)? - 2.0 * half(nf)?;
    Ok(l.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HellingerRow {
    pub n: usize,
    pub hellinger: f64,
    pub partial_product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HellingerTable {
    pub s: f64,
    pub s2: f64,
    pub n0: usize,
    pub rows: Vec<HellingerRow>,
    /// c in 1 - Hel(n) = c/n + d/n^2, least squares over the fit range.
    pub fitted_c: f64,
    pub fit_range: (usize, usize),
    /// Slope of ln(partial product) against ln N over the upper part of the table.
    pub log_slope: f64,
    pub candidate_difference: f64,
    pub candidate_sum: f64,
}

fn least_squares_2(xs: &[(f64, f64)], y: &[f64]) -> (f64, f64) {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(p, q), &v) in xs.iter().zip(y) {
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * v;
        b2 += q * v;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-300 {
        return (0.0, 0.0);
    }
    ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
}

/// c from a fit of 1 - Hel(n,s,s2) = c/n + d/n^2 over n in [lo, hi].
pub fn fit_hellinger_constant(s: f64, s2: f64, lo: usize, hi: usize) -> Result<f64> {
    if lo >= hi {
        return domain("fit range must contain at least two points");
    }
    let ns: Vec<usize> = (lo..=hi).collect();
    let hs: Vec<Result<f64>> = ns.par_iter().map(|&n| hellinger(n, s, s2)).collect();
    let mut xs = vec![];
    let mut y = vec![];
    for (&n, h) in ns.iter().zip(hs) {
        let nf = n as f64;
        // Scaled by n so that the fit weights every n evenly.
        xs.push((1.0, 1.0 / nf));
        y.push(nf * (1.0 - h?));
    }
    Ok(least_squares_2(&xs, &y).0)
}

/// Partial products prod_{n=n0}^N Hel(n,s,s2), N <= n_max, n0 = ceil(max(2-s, 2-s2)).
pub fn mutual_singularity_evidence(s: f64, s2: f64, n_max: usize) -> Result<HellingerTable> {
    let n0 = ((2.0 - s).max(2.0 - s2).ceil().max(2.0)) as usize;
    let n0 = if hellinger(n0, s, s2).is_err() { n0 + 1 } else { n0 };
    if n_max < n0 + 1 {
        return domain(format!("n_max must exceed the starting index {n0}"));
    }
    let hs: Vec<Result<f64>> = (n0..=n_max).into_par_iter().map(|n| hellinger(n, s, s2)).collect();
    let mut rows = Vec::with_capacity(hs.len());
    let mut log_p = 0.0;
    for (k, h) in hs.into_iter().enumerate() {
        let h = h?;
        log_p += h.ln();
        rows.push(HellingerRow { n: n0 + k, hellinger: h, partial_product: log_p.exp() });
    }
    let lo = if n_max >= 100 { n0.max(50) } else { n0 };
    let fitted_c = if s == s2 { 0.0 } else { fit_hellinger_constant(s, s2, lo, n_max)? };
    let slope_lo = n0.max(n_max / 8).max(n0 + 1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n >= slope_lo)
        .map(|r| ((r.n as f64).ln(), r.partial_product.ln()))
        .collect();
    let log_slope = if pts.len() >= 2 {
        let xs: Vec<(f64, f64)> = pts.iter().map(|p| (1.0, p.0)).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        least_squares_2(&xs, &y).1
    } else {
        0.0
    };
    Ok(HellingerTable {
        s,
        s2,
        n0,
        rows,
        fitted_c,
        fit_range: (lo, n_max),
        log_slope,
        candidate_difference: (s - s2).powi(2) / 8.0,
        candidate_sum: (s + s2).powi(2) / 8.0,
    })
}

/// prod_k exp(-4 gamma~ l_k^2) / prod_j (1 + 4 x_j l_k^2).
pub fn ergodic_fourier(omega: &PickrellPoint, lambdas: &[f64]) -> Complex<f64> {
    let g = omega.gaussian_parameter();
    let mut log = 0.0;
    for &l in lambdas {
        let l2 = l * l;
        log -= 4.0 * g * l2;
        for &x in &omega.xs {
            log -= (4.0 * x * l2).ln_1p();
        }
    }
    Complex::new(log.exp(), 0.0)
}

/// Orthonormal basis (1-u)^{s/2} P_l^(s,0)(u), l < n, sampled with sqrt weights on a u-grid.
pub fn jacobi_basis_columns(params: EnsembleParams, nodes: &[f64], sqrt_weights: &[f64]) -> DMatrix<f64> {
    let n = params.n;
    let s = params.s;
    let mut m = DMatrix::zeros(nodes.len(), n);
    let mut p = vec![];
    if n == 0 {
        return m;
    }
    let ln_h: Vec<f64> = (0..n).map(|l| crate::specfun::ln_jacobi_norm_sq(l, s, 0.0)).collect();
    for (i, (&u, &sw)) in nodes.iter().zip(sqrt_weights).enumerate() {
        jacobi_sequence(n - 1, s, 0.0, u, &mut p);
        let w = (1.0 - u).powf(0.5 * s) * sw;
        for l in 0..n {
            m[(i, l)] = p[l] * w * (-0.5 * ln_h[l]).exp();
        }
    }
    m
}
