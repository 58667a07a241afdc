use crate::error::{domain, Result};
use crate::quad::gauss_legendre;
use sha2::{Digest, Sha256};

/// Composite Gauss-Legendre nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Declared interval; `b` may be infinite, in which case `cutoff` bounds the nodes.
    pub interval: (f64, f64),
    pub cutoff: Option<f64>,
}

pub const DEFAULT_PANELS: usize = 24;
pub const DEFAULT_PPP: usize = 8;
pub const DEFAULT_RATIO: f64 = 1.5;
pub const DEFAULT_CUTOFF: f64 = 50.0;

/// A panel layout for the hard-edge problems: geometric panels from `a` up to the
/// window, uniform panels across the window, geometric panels from the window to `upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardEdgeLayout {
    pub a: f64,
    pub window: (f64, f64),
    pub upper: f64,
    pub per_decade: usize,
    pub window_panels: usize,
    pub ppp: usize,
}

impl Default for HardEdgeLayout {
    fn default() -> Self {
        HardEdgeLayout { a: 1e-3, window: (0.2, 2.0), upper: DEFAULT_CUTOFF, per_decade: 12, window_panels: 6, ppp: 8 }
    }
}

fn geometric(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let k = (((b / a).log10() * per_decade as f64).ceil() as usize).max(1);
    (0..=k).map(|i| a * (b / a).powf(i as f64 / k as f64)).collect()
}

impl HardEdgeLayout {
    /// Panels between the window's upper end and `upper`.
    fn tail(&self) -> Vec<f64> {
        let (_, w1) = self.window;
        if self.upper > w1 * (1.0 + 1e-12) {
            geometric(w1, self.upper, self.per_decade)[1..].to_vec()
        } else {
            vec![]
        }
    }

    fn window_breaks(&self) -> Vec<f64> {
        let (w0, w1) = self.window;
        let k = self.window_panels.max(1);
        (0..=k).map(|i| w0 + (w1 - w0) * i as f64 / k as f64).collect()
    }

    pub fn breaks(&self) -> Vec<f64> {
        let mut b = geometric(self.a, self.window.0, self.per_decade);
        b.extend_from_slice(&self.window_breaks()[1..]);
        b.extend(self.tail());
        b
    }

    pub fn grid(&self) -> Result<Grid> {
        if !(self.a > 0.0 && self.a < self.window.0 && self.window.0 < self.window.1) {
            return domain("hard-edge layout needs 0 < a < window start < window end");
        }
        let mut g = Grid::from_breaks(&self.breaks(), self.ppp)?;
        g.interval = (0.0, self.upper);
        Ok(g)
    }

    /// Grid resolving the finite-n functions near the origin: with
    /// lambda = n^2 x, u = (lambda-1)/(lambda+1) = -cos(theta), panels are uniform
    /// in theta below the window; the window and tail panels coincide with `grid()`.
    pub fn finite_n_grid(&self, n: usize, panels_per_n: f64) -> Result<Grid> {
        let n2 = (n * n) as f64;
        let (w0, _) = self.window;
        let uw = (n2 * w0 - 1.0) / (n2 * w0 + 1.0);
        let thw = (-uw).acos();
        let k = (panels_per_n * n as f64 * thw / std::f64::consts::PI).ceil() as usize + 8;
        let (gx, gw) = gauss_legendre(self.ppp);
        let mut nodes = vec![];
        let mut weights = vec![];
        for i in 0..k {
            let (t0, t1) = (thw * i as f64 / k as f64, thw * (i + 1) as f64 / k as f64);
            let h = 0.5 * (t1 - t0);
            for (z, wz) in gx.iter().zip(&gw) {
                let t = 0.5 * (t0 + t1) + h * z;
                let u = -t.cos();
                let x = (1.0 + u) / (n2 * (1.0 - u));
                let dxdt = 2.0 / (n2 * (1.0 - u) * (1.0 - u)) * t.sin();
                nodes.push(x);
                weights.push(h * wz * dxdt);
            }
        }
        let mut rest = self.window_breaks();
        rest.extend(self.tail());
        let g2 = Grid::from_breaks(&rest, self.ppp)?;
        nodes.extend(g2.nodes);
        weights.extend(g2.weights);
        Ok(Grid { nodes, weights, interval: (0.0, self.upper), cutoff: None })
    }
}

impl Grid {
    /// Composite rule with `ppp` points on each panel of `breaks`.
    pub fn from_breaks(breaks: &[f64], ppp: usize) -> Result<Grid> {
        if breaks.len() < 2 || ppp == 0 {
            return domain("grid needs at least one panel and one point per panel");
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("panel breakpoints must be strictly increasing");
        }
        let (x, w) = crate::quad::panel_rule(breaks, ppp);
        Ok(Grid { nodes: x, weights: w, interval: (breaks[0], *breaks.last().unwrap()), cutoff: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// Indices with lo < x < hi.
    pub fn mask(&self, lo: f64, hi: f64) -> Vec<bool> {
        self.nodes.iter().map(|&x| x > lo && x < hi).collect()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// Index of the node nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &y) in self.nodes.iter().enumerate() {
            if (y - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Hex digest of the node and weight bit patterns.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in self.nodes.iter().chain(&self.weights) {
            h.update(v.to_le_bytes());
        }
        let d = h.finalize();
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Composite Gauss-Legendre grid on (a, b).
///
/// With a = 0 the panels are refined geometrically toward the origin with ratio
/// `DEFAULT_RATIO`. An infinite b requires a cutoff.
pub fn make_grid(interval: (f64, f64), panels: usize, ppp: usize, cutoff: Option<f64>) -> Result<Grid> {
    let (a, b) = interval;
    if panels == 0 || ppp == 0 {
        return domain("panels and points per panel must be at least 1");
    }
    if !(a < b) || !a.is_finite() || a.is_nan() || b.is_nan() {
        return domain(format!("invalid interval ({a}, {b})"));
    }
    let hi = if b.is_infinite() {
        match cutoff {
            Some(c) if c > a => c,
            _ => return domain("an infinite interval needs a cutoff above its left end"),
        }
    } else {
        b
    };
    let breaks: Vec<f64> = if a == 0.0 && panels > 1 {
        let r = DEFAULT_RATIO;
        let total = r.powi(panels as i32) - 1.0;
        (0..=panels).map(|k| hi * (r.powi(k as i32) - 1.0) / total).collect()
    } else {
        (0..=panels).map(|k| a + (hi - a) * k as f64 / panels as f64).collect()
    };
    let mut g = Grid::from_breaks(&breaks, ppp)?;
    g.interval = (a, b);
    g.cutoff = if b.is_infinite() { Some(hi) } else { None };
    Ok(g)
}
