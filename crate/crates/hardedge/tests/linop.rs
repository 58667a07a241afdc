use hardedge::kernels::KernelSpec;
use hardedge::linop::io::{read_binary, read_csv, write_binary, write_csv};
use hardedge::linop::*;
use hardedge::quad::graded_breaks;
use hardedge::specfun::jv;
use nalgebra::DMatrix;
use std::sync::Arc;

fn layout(window: (f64, f64), upper: f64) -> HardEdgeLayout {
    HardEdgeLayout { window, upper, ..HardEdgeLayout::default() }
}

/// Modified Gram-Schmidt on the columns; returns the projection Q Q^T.
fn gram_schmidt_projection(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q: Vec<Vec<f64>> = vec![];
    for j in 0..cols.ncols() {
        let mut v: Vec<f64> = cols.column(j).iter().copied().collect();
        for _ in 0..2 {
            for e in &q {
                let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
            }
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|a| a / n).collect());
    }
    let m = cols.nrows();
    DMatrix::from_fn(m, m, |i, k| q.iter().map(|e| e[i] * e[k]).sum())
}

/// Projection onto span{x^k e^{-x}, k < 4} on a grid over (0, 20).
fn laguerre_projection() -> KernelMatrix {
    let g = Arc::new(make_grid((0.0, 20.0), 12, 8, None).unwrap());
    let vals = DMatrix::from_fn(g.len(), 4, |i, k| g.nodes[i].powi(k as i32) * (-g.nodes[i]).exp());
    Subspace::from_functions(vals, g, 1e-12).unwrap().projection("laguerre")
}

/// Panels on (-1, 1) graded geometrically toward both ends.
fn two_sided_grid() -> Arc<Grid> {
    let left = graded_breaks(-1.0, -0.5, 0.4, 20);
    let mut b = left.clone();
    b.extend((1..=4).map(|k| -0.5 + 0.25 * k as f64));
    b.extend(left.iter().rev().skip(1).map(|x| -x));
    Arc::new(Grid::from_breaks(&b, 8).unwrap())
}

fn symmetric_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

#[test]
fn single_panel_is_textbook_gauss() {
    let g = make_grid((0.0, 1.0), 1, 4, None).unwrap();
    let t = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    let w = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    for k in 0..4 {
        assert!((g.nodes[k] - 0.5 * (1.0 + t[k])).abs() < 1e-15);
        assert!((g.weights[k] - 0.5 * w[k]).abs() < 1e-15);
    }
}

#[test]
fn grid_integrals() {
    let g = make_grid((0.0, 1.0), 3, 6, None).unwrap();
    assert!((g.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
    let g = make_grid((0.0, f64::INFINITY), 20, 8, Some(40.0)).unwrap();
    assert!((g.integrate(|x| (-x).exp()) - 1.0).abs() < 1e-10);
    assert_eq!(g.cutoff, Some(40.0));
    for &(a, b) in &[(0.0, 3.0), (-1.0, 1.0), (2.0, 7.5)] {
        let g = make_grid((a, b), 7, 5, None).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - (b - a)).abs() < 1e-10 * (b - a));
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights.iter().all(|&w| w > 0.0));
    }
}

#[test]
fn grid_errors_mask_and_hash() {
    assert!(make_grid((1.0, 0.0), 2, 2, None).is_err());
    assert!(make_grid((0.0, f64::INFINITY), 2, 2, None).is_err());
    assert!(make_grid((0.0, 1.0), 0, 2, None).is_err());
    assert!(make_grid((0.0, 1.0), 2, 0, None).is_err());
    let g = make_grid((0.0, 1.0), 4, 4, None).unwrap();
    let m = g.mask(0.25, 0.75);
    for (x, b) in g.nodes.iter().zip(&m) {
        assert_eq!(*b, *x > 0.25 && *x < 0.75);
    }
    assert_eq!(g.hash(), make_grid((0.0, 1.0), 4, 4, None).unwrap().hash());
    assert_ne!(g.hash(), make_grid((0.0, 1.0), 4, 5, None).unwrap().hash());
}

#[test]
fn discretized_cd_kernel_has_trace_n() {
    let g = two_sided_grid();
    let k = discretize(&KernelSpec::JacobiCdS { s: 0.5, n: 6 }, &g).unwrap();
    assert!((k.trace() - 6.0).abs() < 1e-4, "{}", k.trace());
    assert!(k.asymmetry() < 1e-12);
}

#[test]
fn one_point_grid() {
    let g = Arc::new(make_grid((0.5, 1.5), 1, 1, None).unwrap());
    let spec = KernelSpec::BesselModified { s: 0.0 };
    let k = discretize(&spec, &g).unwrap();
    assert!((k.entries[(0, 0)] - g.weights[0] * spec.eval(1.0, 1.0).unwrap()).abs() < 1e-15);
}

#[test]
fn discretized_spectra_lie_in_unit_interval() {
    let g = Arc::new(make_grid((0.1, 20.0), 30, 8, None).unwrap());
    for s in [0.0, -0.5, 1.0] {
        let ev = discretize(&KernelSpec::BesselModified { s }, &g).unwrap().eigenvalues();
        assert!(ev.iter().all(|&l| (-1e-8..=1.0 + 1e-8).contains(&l)), "s={s}");
    }
    let g = two_sided_grid();
    let ev = discretize(&KernelSpec::JacobiCd { alpha: 0.3, beta: 1.1, n: 9 }, &g).unwrap().eigenvalues();
    assert!(ev.iter().all(|&l| (-1e-8..=1.0 + 1e-8).contains(&l)), "{:?}", (ev[0], ev[ev.len() - 1]));
}

#[test]
fn fredholm_examples() {
    let g = Arc::new(make_grid((0.0, 1.0), 4, 4, None).unwrap());
    let z = KernelMatrix::new(DMatrix::zeros(16, 16), g.clone(), "zero").unwrap();
    assert_eq!(fredholm_det(&z, -1.0).unwrap(), 1.0);
    assert!(fredholm_det(&z, 0.5).is_err());

    // rank one: phi normalized on the grid
    let phi: Vec<f64> = g.nodes.iter().map(|&x| (3.0 * x).sin() + 0.2).collect();
    let nrm = g.integrate(|x| ((3.0 * x).sin() + 0.2).powi(2)).sqrt();
    let sw = g.sqrt_weights();
    let v: Vec<f64> = (0..16).map(|i| sw[i] * phi[i] / nrm).collect();
    let p = KernelMatrix::new(DMatrix::from_fn(16, 16, |i, j| v[i] * v[j]), g.clone(), "rank one").unwrap();
    let mask = g.mask(0.3, 0.8);
    let want = 1.0 - (0..16).filter(|&i| mask[i]).map(|i| g.weights[i] * (phi[i] / nrm).powi(2)).sum::<f64>();
    assert!((gap_probability(&p, &mask).unwrap() - want).abs() < 1e-13);
    let rest = p.restrict(&mask);
    assert!((fredholm_det(&rest, -1.0).unwrap() - want).abs() < 1e-13);
}

#[test]
fn fredholm_multiplicative_on_disjoint_blocks() {
    let p = laguerre_projection();
    let b1 = p.grid.mask(0.0, 1.0);
    let b2 = p.grid.mask(3.0, 5.0);
    let mut k = p.restrict(&b1);
    k.entries += p.restrict(&b2).entries;
    let both: Vec<bool> = b1.iter().zip(&b2).map(|(a, b)| *a || *b).collect();
    let d = gap_probability(&k, &both).unwrap();
    let d1 = gap_probability(&p, &b1).unwrap();
    let d2 = gap_probability(&p, &b2).unwrap();
    assert!((d - d1 * d2).abs() < 1e-10);
}

#[test]
fn induced_projection_properties() {
    let p = laguerre_projection();
    assert!(p.idempotency_defect() < 1e-12);
    let all = vec![true; p.dim()];
    assert!((induced_projection(&p, &all).unwrap().entries - &p.entries).amax() < 1e-14);

    let e0 = p.grid.mask(0.0, 2.5);
    let q = induced_projection(&p, &e0).unwrap();
    assert!(q.idempotency_defect() < 1e-8);
    assert!(symmetric_defect(&q.entries) < 1e-8);
    let mut cols = range_of_projection(&p).basis;
    for i in 0..cols.nrows() {
        if !e0[i] {
            cols.row_mut(i).fill(0.0);
        }
    }
    assert!((gram_schmidt_projection(&cols) - &q.entries).amax() < 1e-7);
}

#[test]
fn induced_projection_rejects_non_projections() {
    let mut p = laguerre_projection();
    p.entries *= 0.5;
    assert!(induced_projection(&p, &p.grid.mask(0.0, 2.0)).is_err());
}

#[test]
fn mult_transform_examples() {
    let p = laguerre_projection();
    let one = mult_transform(&p, &DampingFunction::ExpDamp { beta: 0.0 }).unwrap();
    assert!((one.entries - &p.entries).amax() < 1e-12);

    let r = 2.5;
    let ind = mult_transform(&p, &DampingFunction::Indicator { r }).unwrap();
    let q = induced_projection(&p, &p.grid.mask(0.0, r)).unwrap();
    assert!((ind.entries - &q.entries).amax() < 1e-8);

    let g = DampingFunction::ExpDamp { beta: 0.7 };
    let t = mult_transform(&p, &g).unwrap();
    assert!(t.idempotency_defect() < 1e-8);
    assert!(symmetric_defect(&t.entries) < 1e-8);
    let mut cols = range_of_projection(&p).basis;
    let gv = g.on_grid(&p.grid);
    for i in 0..cols.nrows() {
        cols.row_mut(i).scale_mut(gv[i].sqrt());
    }
    assert!((gram_schmidt_projection(&cols) - &t.entries).amax() < 1e-8);
}

#[test]
fn damping_validation() {
    assert!(DampingFunction::Indicator { r: 0.0 }.validate().is_err());
    assert!(DampingFunction::ExpDamp { beta: -1.0 }.validate().is_err());
    let t = DampingFunction::Tabulated { nodes: vec![0.0, 1.0], values: vec![1.0, 0.0] };
    assert!(t.validate().is_ok());
    assert!((t.eval(0.25) - 0.75).abs() < 1e-15);
    assert!(DampingFunction::Tabulated { nodes: vec![0.0, 1.0], values: vec![1.0, 1.5] }.validate().is_err());
}

#[test]
fn n_s_examples() {
    assert_eq!(n_s_of(0.0), 0);
    assert_eq!(n_s_of(0.7), 0);
    assert_eq!(n_s_of(-0.99), 0);
    assert_eq!(n_s_of(-1.0), 1);
    assert_eq!(n_s_of(-1.6), 1);
    assert_eq!(n_s_of(-3.0), 2);
    for k in 0..40 {
        let s = -6.0 + 0.17 * k as f64;
        let h = s / 2.0 + n_s_of(s) as f64;
        assert!(h > -0.5 && h <= 0.5);
    }
}

#[test]
fn v_s_spaces() {
    let g = Arc::new(make_grid((0.05, 10.0), 20, 8, None).unwrap());
    for &(s, d) in &[(-1.0, 1usize), (-1.6, 1), (-3.0, 2), (-4.4, 2)] {
        let v = build_v_s(s, &g).unwrap();
        assert_eq!(v.dim(), d);
        assert!(v.gram_defect() < 1e-10);
    }
    let v = build_v_s(-1.0, &g).unwrap();
    let f: Vec<f64> = g.nodes.iter().map(|&x| jv(0.0, 2.0 / x.sqrt()) / x.sqrt()).collect();
    let ratio: Vec<f64> = (0..g.len()).map(|i| v.value(i, 0) / f[i]).collect();
    let r0 = ratio[0];
    assert!(ratio.iter().all(|r| (r - r0).abs() < 1e-8 * r0.abs()));
    assert!(build_v_s(-0.5, &g).is_err());
}

#[test]
fn h_s_projection_structure() {
    let g = Arc::new(layout((0.2, 2.0), 16.0).grid().unwrap());
    for s in [-1.0, -3.0] {
        let pi = build_h_s_projection(s, 16.0, &g, None).unwrap();
        assert!(pi.projection.idempotency_defect() < 1e-7);
        assert!(pi.projection.asymmetry() < 1e-12);
        assert_eq!(pi.range.dim(), pi.n_s + pi.bessel_rank);
        assert!((pi.projection.trace() - pi.range.dim() as f64).abs() < 1e-8);
        let cut = build_h_s_projection(s, 16.0, &g, Some(3)).unwrap();
        assert_eq!(cut.range.dim(), pi.n_s + 3);
    }
    assert!(build_h_s_projection(0.0, 16.0, &g, None).is_err());
}

#[test]
fn h_s_projection_approaches_bessel_kernel() {
    let s = -1.6;
    let sp = s + 2.0 * n_s_of(s) as f64;
    let mut last = f64::INFINITY;
    for r in [4.0, 16.0, 64.0] {
        let g = Arc::new(layout((0.2, 2.0), r).grid().unwrap());
        let pi = build_h_s_projection(s, r, &g, None).unwrap();
        let j = discretize(&KernelSpec::BesselModified { s: sp }, &g).unwrap();
        let d = windowed_trace_distance(&pi.projection, &j, 0.2, 2.0).unwrap();
        assert!(d < last, "R={r}: {d} after {last}");
        last = d;
    }
}

#[test]
fn h_sn_projection_rank_and_degenerate_case() {
    let lay = layout((0.5, 3.0), 1e4);
    let g = Arc::new(lay.finite_n_grid(6, 1.0).unwrap());
    let p = build_h_sn_projection(-1.6, 6, &g, None).unwrap();
    assert_eq!(p.range.dim(), 6);
    assert!(p.projection.idempotency_defect() < 1e-7);

    let (s, n) = (0.5, 3);
    let g = Arc::new(lay.finite_n_grid(n, 1.0).unwrap());
    let p = build_h_sn_projection(s, n, &g, None).unwrap();
    let k = discretize(&KernelSpec::Rescaled { s, n }, &g).unwrap();
    assert!((p.projection.entries - k.entries).amax() < 1e-5);
    assert!(build_h_sn_projection(-3.0, 2, &g, None).is_err());
}

#[test]
fn xmax_ratio_examples() {
    let r = 6.0;
    let g = Arc::new(layout((0.2, 2.0), r).grid().unwrap());
    let one = xmax_mass_ratio(-1.0, r, 3.0, 3.0, &g).unwrap();
    assert!((one - 1.0).abs() < 1e-14);
    let q = xmax_mass_ratio(-1.0, r, 1.5, 3.0, &g).unwrap();
    assert!(q > 0.0 && q < 1.0);
    assert!(xmax_mass_ratio(-1.0, r, 1.5, 7.0, &g).is_err());
}

#[test]
fn conditional_projection_vanishes_at_the_maximum() {
    let r = 6.0;
    let g = Arc::new(layout((0.2, 2.0), r).grid().unwrap());
    let base = build_h_s_projection(-1.0, r, &g, None).unwrap();
    let bar = conditional_projection_at_max(-1.0, r, &g).unwrap();
    assert_eq!(bar.range.dim(), base.range.dim() - 1);
    assert!(bar.projection.idempotency_defect() < 1e-7);
    let j = (0..g.len())
        .filter(|&i| g.nodes[i] < r)
        .min_by(|&a, &b| (g.nodes[a] - r).abs().partial_cmp(&(g.nodes[b] - r).abs()).unwrap())
        .unwrap();
    for k in 0..bar.range.dim() {
        let sup = (0..g.len()).map(|i| bar.range.value(i, k).abs()).fold(0.0, f64::max);
        assert!(bar.range.value(j, k).abs() < 1e-6 * sup);
    }
    let phi = base.projection.entries.column(j).into_owned();
    assert!((&bar.projection.entries * phi).amax() < 1e-8);
}

#[test]
fn csv_round_trip() {
    let p = laguerre_projection();
    let mut buf = vec![];
    write_csv(&p, &mut buf).unwrap();
    let q = read_csv(&buf[..]).unwrap();
    assert_eq!(q.label, p.label);
    assert_eq!(q.grid.nodes, p.grid.nodes);
    assert_eq!(q.entries, p.entries);
    let text = String::from_utf8(buf).unwrap().replace("# grid_hash: ", "# grid_hash: 00");
    assert!(read_csv(text.as_bytes()).is_err());
}

#[test]
fn binary_round_trip() {
    let p = laguerre_projection();
    let mut buf = vec![];
    write_binary(&p, &mut buf).unwrap();
    let q = read_binary(&buf[..]).unwrap();
    assert_eq!(q.label, p.label);
    assert_eq!(q.grid.hash(), p.grid.hash());
    assert_eq!(q.entries, p.entries);
    buf[0] = b'X';
    assert!(read_binary(&buf[..]).is_err());
    assert!(read_binary(&buf[..10]).is_err());
}
