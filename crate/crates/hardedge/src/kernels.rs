//! Closed-form kernels: Jacobi Christoffel-Darboux kernels, their (0, inf) images,
//! the Bessel kernel and the modified Bessel kernel.

use crate::error::{domain, Result};
use crate::quad;
use crate::specfun::{
    jacobi_pair, jacobi_sequence, jv, ln_gamma, ln_jacobi_leading, ln_jacobi_norm_sq,
};
use serde::{Deserialize, Serialize};

pub const MAX_DEGREE: usize = 5000;
const NEAR_DIAGONAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub s: f64,
}

impl EnsembleParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return domain("ensemble size n must be at least 1");
        }
        if !s.is_finite() {
            return domain("s must be finite");
        }
        Ok(EnsembleParams { n, s })
    }

    /// Parameters of a finite determinantal probability measure.
    pub fn probability(n: usize, s: f64) -> Result<Self> {
        let p = Self::new(n, s)?;
        if !(s > -1.0) {
            return domain(format!("a finite ensemble needs s > -1 (got {s})"));
        }
        Ok(p)
    }

    /// Parameters admissible in the infinite regime, n + s > 0.
    pub fn infinite_regime(n: usize, s: f64) -> Result<Self> {
        let p = Self::new(n, s)?;
        if !(n as f64 + s > 0.0) {
            return domain(format!("need n + s > 0 (got n={n}, s={s})"));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    JacobiCd { alpha: f64, beta: f64, n: usize },
    JacobiCdS { s: f64, n: usize },
    Hat { s: f64, n: usize },
    Rescaled { s: f64, n: usize },
    BesselTilde { s: f64 },
    BesselModified { s: f64 },
}

fn check_ab(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > -1.0) || !(beta > -1.0) {
        return domain(format!("need alpha, beta > -1 (got {alpha}, {beta})"));
    }
    Ok(())
}

fn check_degree(n: usize) -> Result<()> {
    if n == 0 {
        return domain("kernel degree n must be at least 1");
    }
    if n > MAX_DEGREE {
        return domain(format!("kernel degree {n} exceeds the supported maximum {MAX_DEGREE}"));
    }
    Ok(())
}

fn check_open_unit(u: f64) -> Result<()> {
    if !(u > -1.0 && u < 1.0) {
        return domain(format!("argument {u} outside (-1, 1)"));
    }
    Ok(())
}

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("argument {x} must be positive"));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s > -1.0) {
        return domain(format!("need s > -1 (got {s})"));
    }
    Ok(())
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::JacobiCd { alpha, beta, n } => {
                check_ab(alpha, beta)?;
                check_degree(n)
            }
            KernelSpec::JacobiCdS { s, n } | KernelSpec::Hat { s, n } | KernelSpec::Rescaled { s, n } => {
                check_s(s)?;
                check_degree(n)
            }
            KernelSpec::BesselTilde { s } | KernelSpec::BesselModified { s } => check_s(s),
        }
    }

    /// True for kernels living on (-1, 1); the others live on (0, inf).
    pub fn on_unit_interval(&self) -> bool {
        matches!(self, KernelSpec::JacobiCd { .. } | KernelSpec::JacobiCdS { .. })
    }

    pub fn id(&self) -> String {
        match *self {
            KernelSpec::JacobiCd { alpha, beta, n } => format!("jacobi_cd(alpha={alpha},beta={beta},n={n})"),
            KernelSpec::JacobiCdS { s, n } => format!("jacobi_cd_s(s={s},n={n})"),
            KernelSpec::Hat { s, n } => format!("hat(s={s},n={n})"),
            KernelSpec::Rescaled { s, n } => format!("rescaled(s={s},n={n})"),
            KernelSpec::BesselTilde { s } => format!("bessel_tilde(s={s})"),
            KernelSpec::BesselModified { s } => format!("bessel_modified(s={s})"),
        }
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        match *self {
            KernelSpec::JacobiCd { alpha, beta, n } => cd_jacobi(alpha, beta, n, a, b),
            KernelSpec::JacobiCdS { s, n } => cd_jacobi_s(s, n, a, b),
            KernelSpec::Hat { s, n } => hat_kernel(s, n, a, b),
            KernelSpec::Rescaled { s, n } => rescaled_kernel(s, n, a, b),
            KernelSpec::BesselTilde { s } => bessel_tilde(s, a, b),
            KernelSpec::BesselModified { s } => bessel_modified(s, a, b),
        }
    }

    /// Kernel values on all pairs of `nodes`, row-major.
    ///
    /// Off-diagonal entries reuse per-node polynomial or Bessel values; the
    /// diagonal and near-diagonal entries go through `eval`.
    pub fn tabulate(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        for &x in nodes {
            if self.on_unit_interval() {
                check_open_unit(x)?;
            } else {
                check_positive(x)?;
            }
        }
        let m = nodes.len();
        let mut out = vec![0.0; m * m];
        // Each kernel is c * w_i w_j (f_i g_j - g_i f_j) / (t_i - t_j) away from the diagonal.
        let (c, w, f, g, t): (f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) = match *self {
            KernelSpec::JacobiCd { alpha, beta, n } => {
                let c = cd_constant(alpha, beta, n);
                let mut w = vec![];
                let mut f = vec![];
                let mut g = vec![];
                for &u in nodes {
                    let (p0, p1) = jacobi_pair(n, alpha, beta, u);
                    w.push(jacobi_weight_sqrt(alpha, beta, u));
                    f.push(p1);
                    g.push(p0);
                }
                (c, w, f, g, nodes.to_vec())
            }
            KernelSpec::JacobiCdS { s, n } => {
                let c = cd_constant(s, 0.0, n);
                let mut w = vec![];
                let mut f = vec![];
                let mut g = vec![];
                for &u in nodes {
                    let (p0, p1) = jacobi_pair(n, s, 0.0, u);
                    w.push((1.0 - u).powf(0.5 * s));
                    f.push(p1);
                    g.push(p0);
                }
                (c, w, f, g, nodes.to_vec())
            }
            KernelSpec::Hat { s, n } | KernelSpec::Rescaled { s, n } => {
                let scale = if matches!(self, KernelSpec::Rescaled { .. }) { (n * n) as f64 } else { 1.0 };
                let nf = n as f64;
                let c = nf * (nf + s) / (2.0 * nf + s);
                let mut w = vec![];
                let mut f = vec![];
                let mut g = vec![];
                for &x in nodes {
                    let lam = scale * x;
                    let u = (lam - 1.0) / (lam + 1.0);
                    let (p0, p1) = jacobi_pair(n, s, 0.0, u);
                    w.push((1.0 + lam).powf(-0.5 * s));
                    f.push(p1);
                    g.push(p0);
                }
                // n^2 K_hat(n^2 x1, n^2 x2): differences are taken in lambda.
                (c * scale, w, f, g, nodes.iter().map(|x| x * scale).collect())
            }
            KernelSpec::BesselTilde { s } => {
                let mut f = vec![];
                let mut g = vec![];
                for &y in nodes {
                    let r = y.sqrt();
                    f.push(r * jv(s + 1.0, r));
                    g.push(jv(s, r));
                }
                (0.5, vec![1.0; m], f, g, nodes.to_vec())
            }
            KernelSpec::BesselModified { s } => {
                let mut f = vec![];
                let mut g = vec![];
                for &x in nodes {
                    let r = x.sqrt();
                    let z = 2.0 / r;
                    f.push(jv(s, z));
                    g.push(jv(s + 1.0, z) / r);
                }
                // (J_s(a1) g2 - J_s(a2) g1)/(x1 - x2) = (f1 g2 - g1 f2)/(x1 - x2)
                (1.0, vec![1.0; m], f, g, nodes.to_vec())
            }
        };
        let near = |i: usize, j: usize| -> bool {
            match *self {
                KernelSpec::Hat { .. } | KernelSpec::Rescaled { .. } => {
                    let map = |x: f64| {
                        let lam = match *self {
                            KernelSpec::Rescaled { n, .. } => (n * n) as f64 * x,
                            _ => x,
                        };
                        (lam - 1.0) / (lam + 1.0)
                    };
                    (map(nodes[i]) - map(nodes[j])).abs() < NEAR_DIAGONAL
                }
                KernelSpec::BesselTilde { .. } | KernelSpec::BesselModified { .. } => {
                    (nodes[i] - nodes[j]).abs() < NEAR_DIAGONAL * nodes[i].abs().max(1.0)
                }
                _ => (nodes[i] - nodes[j]).abs() < NEAR_DIAGONAL,
            }
        };
        for i in 0..m {
            for j in 0..=i {
                let v = if i == j || near(i, j) {
                    self.eval(nodes[i], nodes[j])?
                } else {
                    c * w[i] * w[j] * (f[i] * g[j] - g[i] * f[j]) / (t[i] - t[j])
                };
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
        Ok(out)
    }
}

fn jacobi_weight_sqrt(alpha: f64, beta: f64, u: f64) -> f64 {
    (1.0 - u).powf(0.5 * alpha) * (1.0 + u).powf(0.5 * beta)
}

/// k_{n-1} / (k_n h_{n-1}), the Christoffel-Darboux constant.
fn cd_constant(alpha: f64, beta: f64, n: usize) -> f64 {
    (ln_jacobi_leading(n - 1, alpha, beta)
        - ln_jacobi_leading(n, alpha, beta)
        - ln_jacobi_norm_sq(n - 1, alpha, beta))
    .exp()
}

/// 1/h_l for l < n.
fn inverse_norms(n: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let ab = alpha + beta;
    let mut out = Vec::with_capacity(n);
    let mut lh = 0.0;
    for l in 0..n {
        if l < 2 {
            lh = ln_jacobi_norm_sq(l, alpha, beta);
        } else {
            let lf = l as f64;
            lh += ((2.0 * lf + ab - 1.0) / (2.0 * lf + ab + 1.0) * (lf + alpha) * (lf + beta)
                / (lf * (lf + ab)))
                .ln();
        }
        out.push((-lh).exp());
    }
    out
}

/// Sum form over l < n, including the weight factors.
pub fn cd_jacobi_sum(alpha: f64, beta: f64, n: usize, u1: f64, u2: f64) -> f64 {
    let inv = inverse_norms(n, alpha, beta);
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    jacobi_sequence(n - 1, alpha, beta, u1, &mut p);
    jacobi_sequence(n - 1, alpha, beta, u2, &mut q);
    let s: f64 = (0..n).map(|l| inv[l] * p[l] * q[l]).sum();
    s * jacobi_weight_sqrt(alpha, beta, u1) * jacobi_weight_sqrt(alpha, beta, u2)
}

/// The Christoffel-Darboux kernel of degree < n for (1-u)^alpha (1+u)^beta,
/// weight factors included.
pub fn cd_jacobi(alpha: f64, beta: f64, n: usize, u1: f64, u2: f64) -> Result<f64> {
    check_ab(alpha, beta)?;
    check_degree(n)?;
    check_open_unit(u1)?;
    check_open_unit(u2)?;
    if (u1 - u2).abs() < NEAR_DIAGONAL {
        return Ok(cd_jacobi_sum(alpha, beta, n, u1, u2));
    }
    let (a0, a1) = jacobi_pair(n, alpha, beta, u1);
    let (b0, b1) = jacobi_pair(n, alpha, beta, u2);
    let c = cd_constant(alpha, beta, n);
    Ok(c * (a1 * b0 - a0 * b1) / (u1 - u2)
        * jacobi_weight_sqrt(alpha, beta, u1)
        * jacobi_weight_sqrt(alpha, beta, u2))
}

/// The beta = 0 kernel with constant n(n+s)/(2^s (2n+s)).
pub fn cd_jacobi_s(s: f64, n: usize, u1: f64, u2: f64) -> Result<f64> {
    check_s(s)?;
    check_degree(n)?;
    check_open_unit(u1)?;
    check_open_unit(u2)?;
    if (u1 - u2).abs() < NEAR_DIAGONAL {
        return Ok(cd_jacobi_sum(s, 0.0, n, u1, u2));
    }
    let nf = n as f64;
    let c = nf * (nf + s) / (2f64.powf(s) * (2.0 * nf + s));
    let (a0, a1) = jacobi_pair(n, s, 0.0, u1);
    let (b0, b1) = jacobi_pair(n, s, 0.0, u2);
    Ok(c * (1.0 - u1).powf(0.5 * s) * (1.0 - u2).powf(0.5 * s) * (a1 * b0 - a0 * b1) / (u1 - u2))
}

/// u(lambda) = (lambda - 1)/(lambda + 1) and the Jacobian u'(lambda) = 2/(1 + lambda)^2.
pub fn u_of_lambda(lam: f64) -> (f64, f64) {
    ((lam - 1.0) / (lam + 1.0), 2.0 / ((1.0 + lam) * (1.0 + lam)))
}

/// The kernel on (0, inf) obtained from the Jacobi ensemble under u = (lambda-1)/(lambda+1).
pub fn hat_kernel(s: f64, n: usize, l1: f64, l2: f64) -> Result<f64> {
    check_s(s)?;
    check_degree(n)?;
    check_positive(l1)?;
    check_positive(l2)?;
    let (u1, d1) = u_of_lambda(l1);
    let (u2, d2) = u_of_lambda(l2);
    if (u1 - u2).abs() < NEAR_DIAGONAL {
        return Ok(cd_jacobi_sum(s, 0.0, n, u1, u2) * (d1 * d2).sqrt());
    }
    let nf = n as f64;
    let c = nf * (nf + s) / (2.0 * nf + s);
    let (a0, a1) = jacobi_pair(n, s, 0.0, u1);
    let (b0, b1) = jacobi_pair(n, s, 0.0, u2);
    Ok(c * (1.0 + l1).powf(-0.5 * s) * (1.0 + l2).powf(-0.5 * s) * (a1 * b0 - b1 * a0) / (l1 - l2))
}

/// n^2 K_hat(n^2 x1, n^2 x2).
pub fn rescaled_kernel(s: f64, n: usize, x1: f64, x2: f64) -> Result<f64> {
    check_positive(x1)?;
    check_positive(x2)?;
    check_degree(n)?;
    let n2 = (n * n) as f64;
    Ok(n2 * hat_kernel(s, n, n2 * x1, n2 * x2)?)
}

/// int_0^1 J_s(a1 sqrt t) J_s(a2 sqrt t) dt, by t = tau^2 and panels graded toward 0.
pub fn bessel_product_integral(s: f64, a1: f64, a2: f64) -> f64 {
    let amax = a1.max(a2);
    let tau0 = if amax > 2.0 { 2.0 / amax } else { 1.0 };
    let mut breaks = quad::graded_breaks(0.0, tau0, 0.2, 36);
    let tiny = breaks[1];
    breaks.remove(0);
    if tau0 < 1.0 {
        let k = ((1.0 - tau0) * amax / 2.0).ceil().max(1.0) as usize;
        for i in 1..=k {
            breaks.push(tau0 + (1.0 - tau0) * i as f64 / k as f64);
        }
    }
    let body = quad::integrate(|t| 2.0 * t * jv(s, a1 * t) * jv(s, a2 * t), &breaks, 16);
    // Leading-order piece on (0, tiny): J_s(z) ~ (z/2)^s / Gamma(s+1).
    let lead = ((0.25 * a1 * a2).powf(s) * (-2.0 * ln_gamma(s + 1.0)).exp())
        * tiny.powf(2.0 * s + 2.0)
        / (s + 1.0);
    body + lead
}

/// The Bessel kernel J_tilde_s, by its Christoffel-Darboux type form off the diagonal.
pub fn bessel_tilde(s: f64, y1: f64, y2: f64) -> Result<f64> {
    check_s(s)?;
    check_positive(y1)?;
    check_positive(y2)?;
    if (y1 - y2).abs() < NEAR_DIAGONAL * y1.max(1.0) {
        return bessel_tilde_integral(s, y1, y2);
    }
    let (r1, r2) = (y1.sqrt(), y2.sqrt());
    let num = r1 * jv(s + 1.0, r1) * jv(s, r2) - r2 * jv(s + 1.0, r2) * jv(s, r1);
    Ok(num / (2.0 * (y1 - y2)))
}

/// (1/4) int_0^1 J_s(sqrt(t y1)) J_s(sqrt(t y2)) dt.
pub fn bessel_tilde_integral(s: f64, y1: f64, y2: f64) -> Result<f64> {
    check_s(s)?;
    check_positive(y1)?;
    check_positive(y2)?;
    Ok(0.25 * bessel_product_integral(s, y1.sqrt(), y2.sqrt()))
}

/// The modified Bessel kernel J^(s) on (0, inf).
pub fn bessel_modified(s: f64, x1: f64, x2: f64) -> Result<f64> {
    check_s(s)?;
    check_positive(x1)?;
    check_positive(x2)?;
    if (x1 - x2).abs() < NEAR_DIAGONAL * x1.max(1.0) {
        return bessel_modified_integral(s, x1, x2);
    }
    let (r1, r2) = (x1.sqrt(), x2.sqrt());
    let (z1, z2) = (2.0 / r1, 2.0 / r2);
    let num = jv(s, z1) * jv(s + 1.0, z2) / r2 - jv(s, z2) * jv(s + 1.0, z1) / r1;
    Ok(num / (x1 - x2))
}

/// (1/(x1 x2)) int_0^1 J_s(2 sqrt(t/x1)) J_s(2 sqrt(t/x2)) dt.
pub fn bessel_modified_integral(s: f64, x1: f64, x2: f64) -> Result<f64> {
    check_s(s)?;
    check_positive(x1)?;
    check_positive(x2)?;
    Ok(bessel_product_integral(s, 2.0 / x1.sqrt(), 2.0 / x2.sqrt()) / (x1 * x2))
}

/// Coefficient of the rank-one term linking K_{n+1}^(alpha,beta) and K_n^(alpha+2,beta).
pub fn rank_one_coefficient(alpha: f64, beta: f64, n: usize) -> f64 {
    let nf = n as f64;
    let l = (alpha + 1.0).ln() - (alpha + beta + 1.0) * std::f64::consts::LN_2
        + ln_gamma(nf + 1.0)
        + ln_gamma(nf + alpha + beta + 2.0)
        - ln_gamma(nf + beta + 1.0)
        - ln_gamma(nf + alpha + 2.0);
    l.exp()
}

/// K_{n+1}^(alpha,beta) - rank-one term - K_n^(alpha+2,beta); zero up to rounding.
pub fn cd_rank_one_recurrence_residual(alpha: f64, beta: f64, n: usize, u1: f64, u2: f64) -> Result<f64> {
    check_ab(alpha, beta)?;
    check_open_unit(u1)?;
    check_open_unit(u2)?;
    let big = cd_jacobi(alpha, beta, n + 1, u1, u2)?;
    let small = if n == 0 { 0.0 } else { cd_jacobi(alpha + 2.0, beta, n, u1, u2)? };
    let c = rank_one_coefficient(alpha, beta, n);
    let p1 = jacobi_pair(n, alpha + 1.0, beta, u1).1 * jacobi_weight_sqrt(alpha, beta, u1);
    let p2 = jacobi_pair(n, alpha + 1.0, beta, u2).1 * jacobi_weight_sqrt(alpha, beta, u2);
    Ok(big - c * p1 * p2 - small)
}

/// J_tilde_s - J_tilde_{s+2} - (s+1)/sqrt(xy) J_{s+1}(sqrt x) J_{s+1}(sqrt y).
pub fn bessel_recurrence_residual(s: f64, x: f64, y: f64) -> Result<f64> {
    let a = bessel_tilde(s, x, y)?;
    let b = bessel_tilde(s + 2.0, x, y)?;
    let (rx, ry) = (x.sqrt(), y.sqrt());
    Ok(a - b - (s + 1.0) / (rx * ry) * jv(s + 1.0, rx) * jv(s + 1.0, ry))
}
