//! Gauss-Legendre rules and composite panel integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite rule: `order` points on each panel [breaks[i], breaks[i+1]].
pub fn panel_rule(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut x = Vec::with_capacity(order * breaks.len());
    let mut w = Vec::with_capacity(order * breaks.len());
    for p in breaks.windows(2) {
        let (a, b) = (p[0], p[1]);
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        for (t, wt) in gx.iter().zip(&gw) {
            x.push(c + h * t);
            w.push(h * wt);
        }
    }
    (x, w)
}

/// Breakpoints `a, a + (b-a) q^k ...` clustering geometrically toward `a`.
/// The innermost panel has width `(b - a) * ratio^count`.
pub fn graded_breaks(a: f64, b: f64, ratio: f64, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=count).map(|k| a + (b - a) * ratio.powi(k as i32)).collect();
    v.push(a);
    v.reverse();
    v
}

/// Integral of `f` against breakpoints with an `order`-point rule per panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], order: usize) -> f64 {
    let (x, w) = panel_rule(breaks, order);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
}
