//! One-dimensional quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod,
//! and composite panel grids with spectral cumulative integration.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::NumericalError;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
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

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss-Kronrod (7/15) integration over `[a, b]` with the
/// given interior breakpoints. Stops when the summed error estimate falls
/// below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral, NumericalError> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for win in cuts.windows(2) {
        let (v, e) = gk15(&f, win[0], win[1]);
        total += v;
        err += e;
        heap.push(Segment { a: win[0], b: win[1], value: v, error: e });
    }
    const MAX_SEGMENTS: usize = 20_000;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(NumericalError::Quadrature { achieved: err, requested: abs_tol });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in floating point.
            heap.push(seg);
            return Err(NumericalError::Quadrature { achieved: err, requested: abs_tol });
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // Resum to shed the drift of the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Integral { value, error })
}

/// Composite Gauss-Legendre grid over consecutive panels.
///
/// Besides plain integration it offers a cumulative integral
/// `C(x_i) = ∫_{start}^{x_i} g` at every node, exact for piecewise
/// polynomials of degree below the per-panel order.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    order: usize,
    edges: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // order x order matrix: ∫_{-1}^{t_i} l_k(t) dt for the Lagrange basis l_k.
    partial: Vec<f64>,
}

impl PanelGrid {
    /// Builds a grid from sorted panel edges.
    pub fn new(edges: Vec<f64>, order: usize) -> Self {
        assert!(edges.len() >= 2, "need at least one panel");
        assert!(edges.windows(2).all(|w| w[1] > w[0]), "panel edges must increase");
        let (t, wt) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for win in edges.windows(2) {
            let c = 0.5 * (win[0] + win[1]);
            let h = 0.5 * (win[1] - win[0]);
            for (ti, wi) in t.iter().zip(&wt) {
                nodes.push(c + h * ti);
                weights.push(h * wi);
            }
        }
        let mut partial = vec![0.0; order * order];
        for i in 0..order {
            let scale = 0.5 * (t[i] + 1.0);
            for g in 0..order {
                let s = -1.0 + scale * (t[g] + 1.0);
                for k in 0..order {
                    partial[i * order + k] += scale * wt[g] * lagrange(&t, k, s);
                }
            }
        }
        Self { order, edges, nodes, weights, partial }
    }

    /// Uniform panels on `[a, b]` with extra edges at the given breakpoints.
    pub fn uniform(a: f64, b: f64, panels: usize, breakpoints: &[f64], order: usize) -> Self {
        let mut edges: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a).abs());
        Self::new(edges, order)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Cumulative integral from the left end to every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let m = self.order;
        let mut out = vec![0.0; values.len()];
        let mut base = 0.0;
        for (p, win) in self.edges.windows(2).enumerate() {
            let h = 0.5 * (win[1] - win[0]);
            let v = &values[p * m..(p + 1) * m];
            for i in 0..m {
                let row = &self.partial[i * m..(i + 1) * m];
                let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
                out[p * m + i] = base + h * s;
            }
            let w = &self.weights[p * m..(p + 1) * m];
            base += v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        }
        out
    }
}

fn lagrange(t: &[f64], k: usize, s: f64) -> f64 {
    let mut v = 1.0;
    for (j, tj) in t.iter().enumerate() {
        if j != k {
            v *= (s - tj) / (t[k] - tj);
        }
    }
    v
}

/// sin(x)/x, accurate near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// ∫_{x0}^{x1} sin(a x + b) dx without cancellation for small `a`.
pub fn integral_sin_affine(a: f64, b: f64, x0: f64, x1: f64) -> f64 {
    let mid = 0.5 * (x0 + x1);
    (x1 - x0) * (a * mid + b).sin() * sinc(0.5 * a * (x1 - x0))
}

/// ∫_{x0}^{x1} cos(a x + b) dx without cancellation for small `a`.
pub fn integral_cos_affine(a: f64, b: f64, x0: f64, x1: f64) -> f64 {
    let mid = 0.5 * (x0 + x1);
    (x1 - x0) * (a * mid + b).cos() * sinc(0.5 * a * (x1 - x0))
}
