//! Zero-energy scattering, the Neumann problem on a ball, Born series and
//! the finite-box series for the scattering length.
//!
//! Every radial problem is solved for u(r) = r f(r), so that
//! -Δf + (g/2) V f = λ f becomes u'' = ((g/2) V - λ) u with u(0) = 0.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NumericalError, Result};
use crate::lattice::green_constant;
use crate::model::RadialPotential;
use crate::quad::{integral_sin_affine, integrate_adaptive, sinc, PanelGrid};

/// Resolution of the interior shooting integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGrid {
    /// Total RK4 steps across the potential support.
    pub steps: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self { steps: 4096 }
    }
}

/// RK4 panels between consecutive potential breakpoints.
fn rk_panels(v: &RadialPotential, steps: usize) -> Vec<(f64, f64, usize)> {
    let r_supp = v.support();
    let mut edges = vec![0.0];
    edges.extend(v.breakpoints().into_iter().filter(|&b| b > 0.0 && b < r_supp));
    edges.push(r_supp);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
        .windows(2)
        .map(|w| {
            let n = ((steps as f64) * (w[1] - w[0]) / r_supp).ceil() as usize;
            (w[0], w[1], n.max(8))
        })
        .collect()
}

struct Shot {
    u: f64,
    up: f64,
    // ∫ V u r dr over the support.
    moment: f64,
    nodes: Vec<[f64; 3]>,
}

/// Integrates u'' = (g/2 V - λ) u from 0 to R_supp.
fn shoot(v: &RadialPotential, g: f64, lambda: f64, panels: &[(f64, f64, usize)], record: bool) -> Shot {
    let mut y = [0.0, 1.0, 0.0];
    let mut nodes = Vec::new();
    if record {
        nodes.push([0.0, 0.0, 1.0]);
    }
    let rhs = |r: f64, y: &[f64; 3]| {
        let vr = v.value(r);
        [y[1], (0.5 * g * vr - lambda) * y[0], vr * y[0] * r]
    };
    for &(a, b, n) in panels {
        let h = (b - a) / n as f64;
        // Sample V strictly inside the panel so jumps at the edges are not seen.
        let inside = |r: f64| r.clamp(a + 1e-12 * h, b - 1e-12 * h);
        for i in 0..n {
            let r = a + i as f64 * h;
            let k1 = rhs(inside(r), &y);
            let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1], y[2] + 0.5 * h * k1[2]];
            let k2 = rhs(inside(r + 0.5 * h), &y2);
            let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1], y[2] + 0.5 * h * k2[2]];
            let k3 = rhs(inside(r + 0.5 * h), &y3);
            let y4 = [y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]];
            let k4 = rhs(inside(r + h), &y4);
            for j in 0..3 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            if record {
                let rn = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
                nodes.push([rn, y[0], y[1]]);
            }
        }
    }
    Shot { u: y[0], up: y[1], moment: y[2], nodes }
}

fn check_coupling(v: &RadialPotential, g: f64) -> Result<()> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(invalid(format!("coupling must be finite and >= 0, got {g}")));
    }
    let vmax = v.breakpoints().iter().map(|&r| v.value(r)).fold(v.value(0.0), f64::max);
    let stiffness = 0.5 * g * vmax * v.support().powi(2);
    if stiffness > 1e4 {
        return Err(NumericalError::Other(format!(
            "coupling too large for the radial integrator: (g/2)·max V·R² = {stiffness:e}"
        ))
        .into());
    }
    Ok(())
}

/// Zero-energy scattering length and the integral identity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringLength {
    /// From the far field f = 1 - a0/r.
    pub a0: f64,
    /// κ∫V f dx / (8π); agrees with `a0` for an exact solution.
    pub identity: f64,
}

/// Scattering length of κV from the zero-energy equation.
pub fn scattering_length_ode(v: &RadialPotential, kappa: f64) -> Result<ScatteringLength> {
    scattering_length_ode_with(v, kappa, RadialGrid::default())
}

pub fn scattering_length_ode_with(v: &RadialPotential, kappa: f64, grid: RadialGrid) -> Result<ScatteringLength> {
    check_coupling(v, kappa)?;
    if kappa == 0.0 || v.is_zero() {
        return Ok(ScatteringLength { a0: 0.0, identity: 0.0 });
    }
    let panels = rk_panels(v, grid.steps);
    let s = shoot(v, kappa, 0.0, &panels, false);
    if !(s.up > 0.0) {
        return Err(NumericalError::Other("zero-energy solution lost monotonicity".into()).into());
    }
    let a0 = v.support() - s.u / s.up;
    let identity = kappa * 4.0 * PI * s.moment / s.up / (8.0 * PI);
    Ok(ScatteringLength { a0, identity })
}

/// Closed-form scattering length of a soft sphere of height v0 and radius r.
pub fn soft_sphere_scattering_length(v0: f64, r: f64, kappa: f64) -> f64 {
    let k0 = (0.5 * kappa * v0).sqrt();
    let x = k0 * r;
    if x < 1e-4 {
        return r * (x * x / 3.0 - 2.0 * x.powi(4) / 15.0);
    }
    r * (1.0 - x.tanh() / x)
}

/// Lowest Neumann eigenpair on the ball of radius L = N^β ℓ with coupling κN^{β-1}.
///
/// The interior is integrated numerically; outside the support the solution
/// u = B cos(q s) + D s sinc(q s), s = r - R, q = √λ, is exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub potential: RadialPotential,
    pub kappa: f64,
    pub n: u64,
    pub ell: f64,
    pub beta: f64,
    /// Coupling of the scaled problem, κN^{β-1}.
    pub coupling: f64,
    /// Ball radius N^β ℓ.
    pub radius: f64,
    pub lambda: f64,
    /// Scattering length of coupling·V.
    pub a0: f64,
    pub grid: RadialGrid,
    // Interior RK nodes (r, u, u') and exterior data; normalization c = u(L)/L.
    nodes: Vec<[f64; 3]>,
    b: f64,
    d: f64,
    c: f64,
    // Precomputed interior quadrature: (node, weight, r·w(r)).
    interior: Vec<[f64; 3]>,
    // ∫₀^{r_i} u at the interior nodes.
    u_cumulative: Vec<f64>,
}

/// Exterior form r w = α + β s + B' g(s) + D' h(s), s = r - R,
/// with g = 1 - cos(qs) and h = s - sin(qs)/q.
struct Exterior {
    r0: f64,
    delta: f64,
    q: f64,
    alpha: f64,
    beta: f64,
    bp: f64,
    dp: f64,
}

impl Exterior {
    fn g(&self, s: f64) -> f64 {
        2.0 * (0.5 * self.q * s).sin().powi(2)
    }

    fn h(&self, s: f64) -> f64 {
        s * one_minus_sinc(self.q * s)
    }

    fn rw(&self, s: f64) -> f64 {
        self.alpha + self.beta * s + self.bp * self.g(s) + self.dp * self.h(s)
    }

    /// ∫₀^s of rw, using ∫g = h and ∫h = (s²/2)(1 - sinc²(qs/2)).
    fn rw_integral(&self, s: f64) -> f64 {
        let x = 0.5 * self.q * s;
        let oms = one_minus_sinc(x);
        let int_h = 0.5 * s * s * oms * (2.0 - oms);
        self.alpha * s + 0.5 * self.beta * s * s + self.bp * self.h(s) + self.dp * int_h
    }
}

/// Neumann solution for the Gross-Pitaevskii scaling (β = 1).
pub fn solve_neumann(v: &RadialPotential, kappa: f64, n: u64, ell: f64, grid: RadialGrid) -> Result<ScatteringSolution> {
    solve_neumann_beta(v, kappa, n, ell, 1.0, grid)
}

/// Neumann solution for the interaction kernel V̂(p/N^β).
pub fn solve_neumann_beta(
    v: &RadialPotential,
    kappa: f64,
    n: u64,
    ell: f64,
    beta: f64,
    grid: RadialGrid,
) -> Result<ScatteringSolution> {
    if n == 0 {
        return Err(invalid("particle number must be positive"));
    }
    if !(ell > 0.0 && ell < 0.5) {
        return Err(invalid(format!("ell must lie in (0, 1/2), got {ell}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    let nf = n as f64;
    let coupling = kappa * nf.powf(beta - 1.0);
    let radius = nf.powf(beta) * ell;
    let r_supp = v.support();
    if r_supp >= radius {
        return Err(invalid(format!(
            "Neumann domain too small: support {r_supp} >= N^β ℓ = {radius}"
        )));
    }
    check_coupling(v, coupling)?;
    let panels = rk_panels(v, grid.steps);

    if coupling == 0.0 || v.is_zero() {
        let s = shoot(v, 0.0, 0.0, &panels, true);
        return Ok(ScatteringSolution::assemble(
            v, kappa, n, ell, beta, coupling, radius, 0.0, 0.0, grid, s,
        ));
    }

    let a0 = scattering_length_ode_with(v, coupling, grid)?.a0;
    let mismatch = |lambda: f64| {
        let s = shoot(v, coupling, lambda, &panels, false);
        let q = lambda.sqrt();
        let len = radius - r_supp;
        let u = s.u * (q * len).cos() + s.up * len * sinc(q * len);
        let up = -s.u * q * (q * len).sin() + s.up * (q * len).cos();
        radius * up - u
    };
    let mut lo = 0.0;
    let mut hi = 6.0 * a0 / radius.powi(3);
    let mut budget = 0;
    while mismatch(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        budget += 1;
        if budget > 200 {
            return Err(NumericalError::NoConvergence { what: "Neumann bracket", iterations: budget, residual: hi }.into());
        }
    }
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mismatch(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 400 {
            return Err(NumericalError::NoConvergence { what: "Neumann bisection", iterations, residual: hi - lo }.into());
        }
    }
    let lambda = 0.5 * (lo + hi);
    let s = shoot(v, coupling, lambda, &panels, true);
    Ok(ScatteringSolution::assemble(v, kappa, n, ell, beta, coupling, radius, lambda, a0, grid, s))
}

impl ScatteringSolution {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        v: &RadialPotential,
        kappa: f64,
        n: u64,
        ell: f64,
        beta: f64,
        coupling: f64,
        radius: f64,
        lambda: f64,
        a0: f64,
        grid: RadialGrid,
        s: Shot,
    ) -> Self {
        let mut sol = Self {
            potential: v.clone(),
            kappa,
            n,
            ell,
            beta,
            coupling,
            radius,
            lambda,
            a0,
            grid,
            nodes: s.nodes,
            b: s.u,
            d: s.up,
            c: 1.0,
            interior: Vec::new(),
            u_cumulative: Vec::new(),
        };
        let mut acc = 0.0;
        sol.u_cumulative.push(0.0);
        for w in sol.nodes.windows(2) {
            let h = w[1][0] - w[0][0];
            acc += 0.5 * h * (w[0][1] + w[1][1]) + h * h * (w[0][2] - w[1][2]) / 12.0;
            sol.u_cumulative.push(acc);
        }
        sol.c = sol.u_raw(radius) / radius;
        let qgrid = PanelGrid::uniform(0.0, v.support(), 32, &v.breakpoints(), 10);
        sol.interior = qgrid
            .nodes()
            .iter()
            .zip(qgrid.weights())
            .map(|(&r, &w)| [r, w, r - sol.u_raw(r) / sol.c])
            .collect();
        sol
    }

    pub fn support(&self) -> f64 {
        self.potential.support()
    }

    fn is_trivial(&self) -> bool {
        self.coupling == 0.0 || self.potential.is_zero()
    }

    /// ∫_R^L r w(r) sin(kr) dr in closed form for kL well above 1.
    ///
    /// With u/c = B' cos(qs) + D' s sinc(qs), s = r - R, one has
    /// r w = α + β s + B' g(s) + D' h(s) where g = 1 - cos(qs) and
    /// h = s - sin(qs)/q. Both g and h satisfy y'' = q²(·) relations that
    /// give their sine transforms by two integrations by parts, free of the
    /// cancellation that plagues the naive product-to-sum formulas.
    fn exterior_sine_integral(&self, k: f64) -> f64 {
        let Exterior { r0, delta, q, alpha, beta, bp, dp } = self.exterior();
        let r1 = self.radius;
        let qd = q * delta;
        let one_minus_cos = 2.0 * (0.5 * qd).sin().powi(2);
        let one_minus_sinc = one_minus_sinc(qd);
        let s0 = (k * r0).sin();
        let (s1, c1) = (k * r1).sin_cos();
        let sin_int = integral_sin_affine(k, 0.0, r0, r1);
        let s_sin_int = (s1 - s0) / (k * k) - delta * c1 / k;
        let ratio = (q / k).powi(2);
        // g(0) = g'(0) = 0, g(Δ) = 1 - cos qΔ, g'(Δ) = q sin qΔ.
        let bt_g = -one_minus_cos * c1 / k + q * qd.sin() * s1 / (k * k);
        let jg = (bt_g - ratio * sin_int) / (1.0 - ratio);
        // h(0) = h'(0) = 0, h(Δ) = Δ(1 - sinc qΔ), h'(Δ) = 1 - cos qΔ.
        let bt_h = -delta * one_minus_sinc * c1 / k + one_minus_cos * s1 / (k * k);
        let jh = (bt_h - ratio * s_sin_int) / (1.0 - ratio);
        alpha * sin_int + beta * s_sin_int + bp * jg + dp * jh
    }

    fn q(&self) -> f64 {
        self.lambda.sqrt()
    }

    fn exterior(&self) -> Exterior {
        let r0 = self.support();
        let r1 = self.radius;
        let delta = r1 - r0;
        let q = self.q();
        let qd = q * delta;
        let one_minus_cos = 2.0 * (0.5 * qd).sin().powi(2);
        let oms = one_minus_sinc(qd);
        let (b, d, c) = (self.b, self.d, self.c);
        let bdr = b - d * r0;
        // β = 1 - D/c and α = R - B/c without cancellation.
        let c_minus_d = (bdr - b * one_minus_cos - d * delta * oms) / r1;
        let rc_minus_b = (-delta * bdr - delta * r0 * d * oms - b * r0 * one_minus_cos) / r1;
        Exterior { r0, delta, q, alpha: rc_minus_b / c, beta: c_minus_d / c, bp: b / c, dp: d / c }
    }

    /// ∫₀^t r w(r) dr; constant for t ≥ L.
    fn rw_integral(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.radius);
        let r0 = self.support();
        if t <= r0 {
            return 0.5 * t * t - self.u_integral(t) / self.c;
        }
        0.5 * r0 * r0 - self.u_integral(r0) / self.c + self.exterior().rw_integral(t - r0)
    }

    /// ∫₀^t u over the interior, exact for the Hermite interpolant.
    fn u_integral(&self, t: f64) -> f64 {
        let i = self.nodes.partition_point(|nd| nd[0] <= t).clamp(1, self.nodes.len() - 1);
        let full: f64 = self.u_cumulative[i - 1];
        let a = self.nodes[i - 1][0];
        let h = 0.5 * (t - a);
        let m = a + h;
        let x = h / 3f64.sqrt();
        full + h * (self.u_raw(m - x) + self.u_raw(m + x))
    }

    /// r w(r).
    fn rw(&self, r: f64) -> f64 {
        if r >= self.radius || self.is_trivial() {
            return 0.0;
        }
        let r0 = self.support();
        if r >= r0 {
            return self.exterior().rw(r - r0);
        }
        r - self.u_raw(r) / self.c
    }

    /// (w∗w)(r) = (2π/r) ∫₀^L s w(s) [G(r+s) - G(|r-s|)] ds with G(t) = ∫₀^t s w(s) ds.
    pub fn w_self_convolution(&self, r: f64) -> Result<f64> {
        if self.is_trivial() {
            return Ok(0.0);
        }
        let big_l = self.radius;
        if r <= 0.0 {
            return Ok(self.int_w2());
        }
        let r0 = self.support();
        let mut cuts = vec![r, r0, (r0 - r).abs(), r0 + r, big_l - r];
        let decades = ((big_l / r0).log10() * 8.0).ceil() as usize;
        cuts.extend((1..decades).map(|i| r0 * (big_l / r0).powf(i as f64 / decades as f64)));
        let g = |s: f64| self.rw(s) * (self.rw_integral(r + s) - self.rw_integral((r - s).abs()));
        let v = integrate_adaptive(g, 0.0, big_l, &cuts, 1e-15, 1e-11)?.value;
        Ok(2.0 * PI / r * v)
    }

    /// ∫ g(|x|) (w∗w)(x) dx for g supported inside the potential support.
    fn conv_weighted<F: Fn(f64) -> f64 + Sync>(&self, g: F) -> Result<f64> {
        if self.is_trivial() {
            return Ok(0.0);
        }
        let parts: Result<Vec<f64>> = self
            .interior
            .par_iter()
            .map(|[r, w, _]| Ok(w * r * r * g(*r) * self.w_self_convolution(*r)?))
            .collect();
        Ok(4.0 * PI * parts?.iter().sum::<f64>())
    }

    /// ∫ V (w∗w) dx.
    pub fn int_v_conv_ww(&self) -> Result<f64> {
        self.conv_weighted(|r| self.potential.value(r))
    }

    /// ∫ V w (w∗w) dx.
    pub fn int_vw_conv_ww(&self) -> Result<f64> {
        self.conv_weighted(|r| self.potential.value(r) * self.w(r))
    }

    /// Unnormalized u and u' at r.
    fn u_pair(&self, r: f64) -> (f64, f64) {
        let r_supp = self.support();
        if r >= r_supp {
            let s = r - r_supp;
            let q = self.q();
            let u = self.b * (q * s).cos() + self.d * s * sinc(q * s);
            let up = -self.b * q * (q * s).sin() + self.d * (q * s).cos();
            return (u, up);
        }
        let i = self.nodes.partition_point(|nd| nd[0] <= r).clamp(1, self.nodes.len() - 1);
        let [r0, u0, p0] = self.nodes[i - 1];
        let [r1, u1, p1] = self.nodes[i];
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h10 * h * p0 + h01 * u1 + h11 * h * p1;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let up = d00 * u0 + d10 * p0 + d01 * u1 + d11 * p1;
        (u, up)
    }

    fn u_raw(&self, r: f64) -> f64 {
        self.u_pair(r).0
    }

    /// f_ℓ(r), equal to 1 at r = L and extended by 1 beyond.
    pub fn f(&self, r: f64) -> f64 {
        1.0 - self.w(r)
    }

    /// w_ℓ(r) = 1 - f_ℓ(r), zero for r ≥ L.
    pub fn w(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        if r <= 0.0 {
            return 1.0 - 1.0 / self.c;
        }
        if r >= self.support() && !self.is_trivial() {
            return self.exterior().rw(r - self.support()) / r;
        }
        1.0 - self.u_raw(r) / (self.c * r)
    }

    /// dw/dr inside the ball.
    pub fn w_prime(&self, r: f64) -> f64 {
        if r >= self.radius || r <= 0.0 {
            return 0.0;
        }
        let (u, up) = self.u_pair(r);
        -(up * r - u) / (self.c * r * r)
    }

    /// Radius grid with f values, graded towards the support.
    pub fn sampled_profile(&self, exterior_points: usize) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.nodes.iter().skip(1).map(|nd| (nd[0], self.f(nd[0]))).collect();
        let r_supp = self.support();
        for i in 1..=exterior_points {
            let r = r_supp * (self.radius / r_supp).powf(i as f64 / exterior_points as f64);
            out.push((r, self.f(r)));
        }
        out
    }

    /// Residual of the Neumann condition, L·f'(L) (zero for an exact solution).
    pub fn neumann_residual(&self) -> f64 {
        let (u, up) = self.u_pair(self.radius);
        (self.radius * up - u) / u
    }

    /// max over the sampled grid of w(r)(r+1)/κ.
    pub fn w_bound_constant(&self) -> f64 {
        if self.coupling == 0.0 {
            return 0.0;
        }
        self.sampled_profile(256)
            .into_iter()
            .map(|(r, f)| (1.0 - f) * (r + 1.0) / self.coupling)
            .fold(0.0, f64::max)
    }

    fn exterior_grid(&self) -> PanelGrid {
        let r_supp = self.support();
        let panels = 48;
        let edges = (0..=panels)
            .map(|i| r_supp * (self.radius / r_supp).powf(i as f64 / panels as f64))
            .collect();
        PanelGrid::new(edges, 10)
    }

    /// Reliability limit on k for the interior quadrature.
    pub fn max_reliable_k(&self) -> f64 {
        // 32 panels with 10 nodes each resolve about 8 radians per panel.
        8.0 * 32.0 / self.support()
    }

    /// ŵ(k) = 4π ∫₀^L w(r) r² sinc(kr) dr.
    pub fn w_hat(&self, k: f64) -> Result<f64> {
        let k = k.abs();
        if self.is_trivial() {
            return Ok(0.0);
        }
        if k > self.max_reliable_k() {
            return Err(NumericalError::Other(format!(
                "ŵ requested at k = {k}, beyond the quadrature limit {}",
                self.max_reliable_k()
            ))
            .into());
        }
        let inner: f64 = self.interior.iter().map(|[r, w, z]| w * z * r * sinc(k * r)).sum();
        let outer = if k * self.radius < 4.0 {
            let g = self.exterior_grid();
            g.nodes()
                .iter()
                .zip(g.weights())
                .map(|(&r, &wt)| wt * (r - self.u_raw(r) / self.c) * r * sinc(k * r))
                .sum::<f64>()
        } else {
            self.exterior_sine_integral(k) / k
        };
        Ok(4.0 * PI * (inner + outer))
    }

    /// (V w)^(k) = 4π ∫ V w r² sinc(kr) dr.
    pub fn vw_hat(&self, k: f64) -> f64 {
        self.interior
            .iter()
            .map(|[r, w, z]| w * self.potential.value(*r) * z * r * sinc(k * r))
            .sum::<f64>()
            * 4.0
            * PI
    }

    /// (V f)^(k) = V̂(k) - (V w)^(k).
    pub fn vf_hat(&self, k: f64) -> f64 {
        self.potential.fourier(k) - self.vw_hat(k)
    }

    fn interior_integral<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        4.0 * PI * self.interior.iter().map(|[r, w, _]| w * g(*r) * r * r).sum::<f64>()
    }

    fn exterior_integral<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let grid = self.exterior_grid();
        4.0 * PI * grid.nodes().iter().zip(grid.weights()).map(|(&r, &w)| w * g(r) * r * r).sum::<f64>()
    }

    /// ∫ w² dx over the ball.
    pub fn int_w2(&self) -> f64 {
        let g = |r: f64| self.w(r).powi(2);
        self.interior_integral(g) + self.exterior_integral(g)
    }

    /// ∫ |∇w|² dx over the ball.
    pub fn int_grad_w2(&self) -> f64 {
        let g = |r: f64| self.w_prime(r).powi(2);
        self.interior_integral(g) + self.exterior_integral(g)
    }

    /// ∫ V w dx.
    pub fn int_vw(&self) -> f64 {
        self.interior_integral(|r| self.potential.value(r) * self.w(r))
    }

    /// ∫ V w² dx.
    pub fn int_vw2(&self) -> f64 {
        self.interior_integral(|r| self.potential.value(r) * self.w(r).powi(2))
    }

    /// λ_ℓ L³ / (3 a0), which tends to 1 as L grows.
    pub fn lambda_ratio(&self) -> f64 {
        if self.a0 == 0.0 {
            return 1.0;
        }
        self.lambda * self.radius.powi(3) / (3.0 * self.a0)
    }
}

fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        1.0 - x.sin() / x
    }
}

/// Quadrature for the iterated Coulomb integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesQuadrature {
    pub panels: usize,
    pub order: usize,
}

impl Default for SeriesQuadrature {
    fn default() -> Self {
        Self { panels: 16, order: 16 }
    }
}

/// Partial sums of a perturbative scattering-length series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    /// The scattering length from the summed terms.
    pub a: f64,
    /// Contribution of each order to 8πa, lowest first.
    pub terms: Vec<f64>,
    /// Estimate of what the finite-size expansion leaves out (box series only).
    pub neglected: f64,
}

struct Coulomb {
    grid: PanelGrid,
    v: Vec<f64>,
}

impl Coulomb {
    fn new(v: &RadialPotential, quad: SeriesQuadrature) -> Self {
        let grid = PanelGrid::uniform(0.0, v.support(), quad.panels, &v.breakpoints(), quad.order);
        let vals = grid.nodes().iter().map(|&r| v.value(r)).collect();
        Self { grid, v: vals }
    }

    /// Φ[q](r) = (1/r)∫₀^r q s² ds + ∫_r^R q s ds on the nodes.
    fn potential_of(&self, q: &[f64]) -> Vec<f64> {
        let r = self.grid.nodes();
        let inner: Vec<f64> = q.iter().zip(r).map(|(q, r)| q * r * r).collect();
        let outer: Vec<f64> = q.iter().zip(r).map(|(q, r)| q * r).collect();
        let ci = self.grid.cumulative(&inner);
        let co = self.grid.cumulative(&outer);
        let total = self.grid.integrate(&outer);
        r.iter()
            .enumerate()
            .map(|(i, &ri)| ci[i] / ri + (total - co[i]))
            .collect()
    }

    /// ∫ q(y) |y|^(2j) dy over ℝ³.
    fn moment(&self, q: &[f64], j: i32) -> f64 {
        let vals: Vec<f64> = q
            .iter()
            .zip(self.grid.nodes())
            .map(|(q, r)| q * r * r * r.powi(2 * j))
            .collect();
        4.0 * PI * self.grid.integrate(&vals)
    }

    fn pair(&self, h: &[f64]) -> f64 {
        let q: Vec<f64> = self.v.iter().zip(h).map(|(v, h)| v * h).collect();
        self.moment(&q, 0)
    }
}

/// Born series for a0 with `k_max` orders in κ (1 ≤ k_max ≤ 3).
pub fn born_series_a0(v: &RadialPotential, kappa: f64, k_max: usize, quad: SeriesQuadrature) -> Result<SeriesResult> {
    if k_max == 0 || k_max > 3 {
        return Err(invalid(format!("Born series supports 1 <= k_max <= 3, got {k_max}")));
    }
    let c = Coulomb::new(v, quad);
    let mut h = vec![1.0; c.v.len()];
    let mut terms = Vec::with_capacity(k_max);
    for k in 0..k_max {
        if k > 0 {
            let q: Vec<f64> = c.v.iter().zip(&h).map(|(v, h)| v * h).collect();
            h = c.potential_of(&q);
        }
        terms.push(kappa * (-0.5 * kappa).powi(k as i32) * c.pair(&h));
    }
    let a = terms.iter().sum::<f64>() / (8.0 * PI);
    Ok(SeriesResult { a, terms, neglected: 0.0 })
}

/// The κ² Born term computed in momentum space, -κ²/(4π²) ∫₀^∞ V̂(p)² dp.
/// The integral is cut at p = 2000/R; the omitted tail is below 1e-8 relative
/// for potentials with a jump at the support edge.
pub fn born_second_order_momentum(v: &RadialPotential, kappa: f64) -> Result<f64> {
    let pmax = 2000.0 / v.support();
    let r = crate::quad::integrate_adaptive(|p| v.fourier(p).powi(2), 0.0, pmax, &[], 1e-14, 1e-12)?;
    Ok(-kappa * kappa / (4.0 * PI * PI) * r.value)
}

/// Options for the finite-box series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSeriesOptions {
    pub quad: SeriesQuadrature,
    /// Limit on the estimated neglected contribution to 8πa_N.
    pub tolerance: f64,
}

impl Default for BoxSeriesOptions {
    fn default() -> Self {
        Self { quad: SeriesQuadrature::default(), tolerance: 1e-8 }
    }
}

/// Partial sum of the box series for a_N through order k_max of the lattice
/// iteration (k_max = 0 keeps only κV̂(0)/(8π)).
///
/// The lattice sums are evaluated exactly in position space. The periodic
/// Green function G of the unit torus, rescaled as N⁻¹G(x/N), equals
/// 1/(4π|x|) + C₀/N + |x|²/(6N³) plus cubic harmonics of degree ≥ 4 whose
/// contribution is of relative size (2R/N)⁸ for radial potentials.
pub fn box_scattering_series_an(
    v: &RadialPotential,
    kappa: f64,
    n: u64,
    k_max: usize,
    opts: BoxSeriesOptions,
) -> Result<SeriesResult> {
    if k_max > 3 {
        return Err(invalid(format!("box series supports k_max <= 3, got {k_max}")));
    }
    if n == 0 {
        return Err(invalid("particle number must be positive"));
    }
    let nf = n as f64;
    let rel = 2.0 * v.support() / nf;
    if rel >= 0.5 {
        return Err(invalid(format!("box too small: 2R/N = {rel} must stay below 1/2")));
    }
    let c0 = green_constant();
    let c = Coulomb::new(v, opts.quad);
    let r = c.grid.nodes().to_vec();
    let mut h = vec![1.0; c.v.len()];
    let mut terms = vec![kappa * c.pair(&h)];
    for k in 1..=k_max {
        let q: Vec<f64> = c.v.iter().zip(&h).map(|(v, h)| v * h).collect();
        let q0 = c.moment(&q, 0);
        let m2 = c.moment(&q, 1);
        let phi = c.potential_of(&q);
        h = phi
            .iter()
            .zip(&r)
            .map(|(p, r)| p + c0 * q0 / nf + (r * r * q0 + m2) / (6.0 * nf.powi(3)))
            .collect();
        terms.push(kappa * (-0.5 * kappa).powi(k as i32) * c.pair(&h));
    }
    let neglected = terms.get(1).map_or(0.0, |t| t.abs()) * rel.powi(8);
    if neglected > opts.tolerance {
        return Err(NumericalError::TailTooLarge { tail: neglected, tolerance: opts.tolerance }.into());
    }
    let a = terms.iter().sum::<f64>() / (8.0 * PI);
    Ok(SeriesResult { a, terms, neglected })
}
