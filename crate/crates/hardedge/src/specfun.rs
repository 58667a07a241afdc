//! Scalar special functions: Jacobi polynomials, Bessel J of real order, gamma ratios.

use crate::error::{domain, numerical, Result};
use std::f64::consts::PI;

const INT_TOL: f64 = 1e-12;

/// log|Gamma(z)| and the sign of Gamma(z).
pub fn ln_gamma_signed(z: f64) -> (f64, f64) {
    let (v, s) = libm::lgamma_r(z);
    (v, if s < 0 { -1.0 } else { 1.0 })
}

pub fn ln_gamma(z: f64) -> f64 {
    libm::lgamma_r(z).0
}

fn is_pole(z: f64) -> bool {
    z <= 0.0 && (z - z.round()).abs() < INT_TOL
}

/// 1/Gamma(z), zero at the poles.
pub fn rgamma(z: f64) -> f64 {
    if is_pole(z) {
        return 0.0;
    }
    let (v, s) = ln_gamma_signed(z);
    s * (-v).exp()
}

// Bernoulli terms B_{2k} / (2k (2k-1)) of the Stirling series.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// log|Gamma(a)| - log|Gamma(b)|.
///
/// For large, close arguments the difference is taken inside the Stirling
/// series so that the result keeps its relative accuracy.
pub fn log_gamma_ratio(a: f64, b: f64) -> Result<f64> {
    if is_pole(a) || is_pole(b) {
        return domain(format!("gamma pole in ratio Gamma({a})/Gamma({b})"));
    }
    if a >= 12.0 && b >= 12.0 && (a - b).abs() < 0.5 * b {
        let d = a - b;
        let mut v = d * b.ln() + (a - 0.5) * (d / b).ln_1p() - d;
        let (ia, ib) = (1.0 / a, 1.0 / b);
        let (ia2, ib2) = (ia * ia, ib * ib);
        let (mut pa, mut pb) = (ia, ib);
        for c in STIRLING {
            v += c * (pa - pb);
            pa *= ia2;
            pb *= ib2;
        }
        return Ok(v);
    }
    Ok(ln_gamma(a) - ln_gamma(b))
}

/// Gamma(a)/Gamma(b) with sign.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    let l = log_gamma_ratio(a, b)?;
    let sa = ln_gamma_signed(a).1;
    let sb = ln_gamma_signed(b).1;
    Ok(sa * sb * l.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiIndex {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiIndex {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0) || !(beta > -1.0) {
            return domain(format!("Jacobi parameters need alpha, beta > -1 (got {alpha}, {beta})"));
        }
        Ok(JacobiIndex { n, alpha, beta })
    }
}

/// Values P_0(u), ..., P_n(u) of the Jacobi family (alpha, beta), written into `out`.
pub fn jacobi_sequence(n: usize, alpha: f64, beta: f64, u: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    let ab = alpha + beta;
    out.push((alpha + 1.0) + (ab + 2.0) * (u - 1.0) / 2.0);
    let a2b2 = alpha * alpha - beta * beta;
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * (kf + 1.0) * (kf + ab + 1.0) * c;
        let a2 = (c + 1.0) * a2b2;
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (c + 2.0);
        let next = ((a2 + a3 * u) * out[k] - a4 * out[k - 1]) / a1;
        out.push(next);
    }
}

/// The pair (P_{n-1}(u), P_n(u)); for n = 0 the first entry is 0.
pub fn jacobi_pair(n: usize, alpha: f64, beta: f64, u: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let ab = alpha + beta;
    let mut p0 = 1.0;
    let mut p1 = (alpha + 1.0) + (ab + 2.0) * (u - 1.0) / 2.0;
    let a2b2 = alpha * alpha - beta * beta;
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * (kf + 1.0) * (kf + ab + 1.0) * c;
        let a2 = (c + 1.0) * a2b2;
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (c + 2.0);
        let p2 = ((a2 + a3 * u) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    (p0, p1)
}

/// P_n^(alpha,beta)(u), normalized by P_n(1) = Gamma(n+alpha+1)/(Gamma(n+1)Gamma(alpha+1)).
pub fn jacobi_poly(idx: JacobiIndex, u: f64) -> Result<f64> {
    let idx = JacobiIndex::new(idx.n, idx.alpha, idx.beta)?;
    if !(u.abs() <= 1.0 + 1e-9) {
        return domain(format!("Jacobi argument {u} outside [-1, 1]"));
    }
    Ok(jacobi_pair(idx.n, idx.alpha, idx.beta, u).1)
}

/// log h_n^(alpha,beta), the squared norm under (1-u)^alpha (1+u)^beta.
pub fn ln_jacobi_norm_sq(n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let ab = alpha + beta;
    if n == 0 {
        return (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0);
    }
    let head = (ab + 1.0) * std::f64::consts::LN_2 - (2.0 * nf + ab + 1.0).ln();
    head + ln_gamma(nf + alpha + 1.0) + ln_gamma(nf + beta + 1.0)
        - ln_gamma(nf + 1.0)
        - ln_gamma(nf + ab + 1.0)
}

pub fn jacobi_norm_sq(idx: JacobiIndex) -> Result<f64> {
    let idx = JacobiIndex::new(idx.n, idx.alpha, idx.beta)?;
    Ok(ln_jacobi_norm_sq(idx.n, idx.alpha, idx.beta).exp())
}

/// log k_n^(alpha,beta), the leading coefficient.
pub fn ln_jacobi_leading(n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let ab = alpha + beta;
    if n == 0 {
        return 0.0;
    }
    ln_gamma(2.0 * nf + ab + 1.0)
        - nf * std::f64::consts::LN_2
        - ln_gamma(nf + 1.0)
        - ln_gamma(nf + ab + 1.0)
}

pub fn jacobi_leading(idx: JacobiIndex) -> Result<f64> {
    let idx = JacobiIndex::new(idx.n, idx.alpha, idx.beta)?;
    let l = ln_jacobi_leading(idx.n, idx.alpha, idx.beta);
    if l > 709.0 {
        return numerical(format!("leading coefficient overflows f64 (log = {l:.3})"));
    }
    Ok(l.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder {
    pub nu: f64,
}

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > -2.0) {
            return domain(format!("Bessel order must exceed -2 (got {nu})"));
        }
        Ok(BesselOrder { nu })
    }
}

const SERIES_MAX_X: f64 = 8.0;
const ASYMPTOTIC_MIN_X: f64 = 60.0;

/// J_nu(x) for real nu > -2 and x >= 0.
pub fn bessel_j(order: BesselOrder, x: f64) -> Result<f64> {
    let nu = BesselOrder::new(order.nu)?.nu;
    if !(x >= 0.0) {
        return domain(format!("Bessel argument must be nonnegative (got {x})"));
    }
    let r = nu.round();
    if r < 0.0 && (nu - r).abs() < INT_TOL {
        let m = -r;
        let sign = if (m as i64) % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * jv_nonneg_or_frac(m, x)?);
    }
    jv_nonneg_or_frac(nu, x)
}

/// Shorthand used by the kernels; panics on domain errors that callers have already excluded.
pub fn jv(nu: f64, x: f64) -> f64 {
    bessel_j(BesselOrder { nu }, x).expect("Bessel evaluation outside validated domain")
}

fn jv_nonneg_or_frac(nu: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        if nu == 0.0 {
            return Ok(1.0);
        }
        if nu > 0.0 {
            return Ok(0.0);
        }
        return domain(format!("J_{nu}(0) is infinite"));
    }
    if x <= SERIES_MAX_X {
        return Ok(series(nu, x));
    }
    if x >= ASYMPTOTIC_MIN_X && 2.0 * nu * nu < x {
        return Ok(hankel_asymptotic(nu, x));
    }
    Ok(miller(nu, x))
}

fn series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = h.powf(nu) * rgamma(nu + 1.0);
    let mut sum = term;
    for k in 1..=500 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn hankel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let t = (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        let next = a * (mu - t) / (8.0 * kf * x);
        if next.abs() > last {
            break;
        }
        a = next;
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let w = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// Backward recurrence normalized by (x/2)^mu = sum_k (mu+2k) Gamma(mu+k)/k! J_{mu+2k}(x),
/// with mu in (0, 1]; orders below mu are reached by two downward steps.
fn miller(nu: f64, x: f64) -> f64 {
    let mut mu = nu - nu.floor();
    if mu < INT_TOL {
        mu = 1.0;
    } else if mu > 1.0 - INT_TOL {
        mu = 1.0;
    }
    let m = (nu - mu).round() as i64;
    let top = m.max(1) as usize;
    let start = (x + 20.0 + 12.0 * x.cbrt()).ceil() as usize + top;
    let start = start + (start % 2);
    let mut vals = vec![0.0; top + 2];
    let mut f_next = 0.0;
    let mut f = 1e-30;
    let mut coeff = vec![0.0; start / 2 + 1];
    {
        // Gamma(mu+k)/k! on the even-indexed orders, built upward.
        let mut c = gamma_ratio(mu, 1.0).unwrap_or(1.0);
        for (k, slot) in coeff.iter_mut().enumerate() {
            *slot = (mu + 2.0 * k as f64) * c;
            c *= (mu + k as f64) / (k as f64 + 1.0);
        }
    }
    let mut sum = 0.0;
    let mut j = start;
    loop {
        if j <= top + 1 {
            vals[j] = f;
        }
        if j % 2 == 0 {
            sum += coeff[j / 2] * f;
        }
        if j == 0 {
            break;
        }
        let prev = 2.0 * (mu + j as f64) / x * f - f_next;
        f_next = f;
        f = prev;
        j -= 1;
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_next *= 1e-250;
            sum *= 1e-250;
            for v in vals.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = (0.5 * x).powf(mu) / sum;
    let j_mu = vals[0] * scale;
    let j_mu1 = vals[1] * scale;
    match m {
        m if m >= 0 => vals[m as usize] * scale,
        -1 => 2.0 * mu / x * j_mu - j_mu1,
        _ => {
            let jm1 = 2.0 * mu / x * j_mu - j_mu1;
            2.0 * (mu - 1.0) / x * jm1 - j_mu
        }
    }
}
