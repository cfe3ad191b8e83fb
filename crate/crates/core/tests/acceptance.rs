//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bogoscope::correlations::{build_eta, eta_norms, CorrelationProfile};
use bogoscope::eig::{dense_eigenvalues, depletion, lowest_spectrum, SolverOptions};
use bogoscope::fit::fit_power_law;
use bogoscope::fock::*;
use bogoscope::model::{build_mode_set, Cutoff, LatticeVector, ModeSet, RadialPotential, TWO_PI};
use bogoscope::pipeline::{compare_spectra, level_momentum, run_pipeline, Command, RunConfig, RunOptions};
use bogoscope::predictor::{
    diagonalize_quadratic, energy_lattice_sum, enumerate_levels, gp_dispersion, quadratic_coefficients, Level, SpectrumPrediction,
    Stage, SumDomain,
};
use bogoscope::scattering::{
    born_series_a0, box_scattering_series_an, scattering_length_ode, soft_sphere_scattering_length, solve_neumann,
    BoxSeriesOptions, RadialGrid, SeriesQuadrature,
};
use bogoscope::sparse::SparseOperator;
use bogoscope::transforms::{measure_remainders_dp, renormalize, stage_g_constant, Conjugations, RenormStage};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn soft() -> RadialPotential {
    RadialPotential::soft_sphere(1.0, 0.5).unwrap()
}

fn axis(zero: bool) -> ModeSet {
    build_mode_set(Cutoff::Euclidean { radius: TWO_PI }, zero).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn slope(x: &[f64], y: &[f64]) -> Result<(f64, f64), String> {
    let f = fit_power_law(x, y).map_err(e)?;
    Ok((f.slope, f.slope_se))
}

fn scattering_length() -> Outcome {
    let mut worst_closed = 0.0f64;
    let mut worst_identity = 0.0f64;
    for kappa in [0.02, 0.05, 0.1] {
        let s = scattering_length_ode(&soft(), kappa).map_err(e)?;
        let closed = soft_sphere_scattering_length(1.0, 0.5, kappa);
        worst_closed = worst_closed.max((s.a0 - closed).abs() / closed);
        worst_identity = worst_identity.max((s.identity - s.a0).abs() / s.a0);
    }
    check(
        worst_closed <= 1e-8 && worst_identity <= 1e-8,
        format!("closed-form rel err {worst_closed:.2e}, identity rel err {worst_identity:.2e} (tol 1e-8)"),
    )
}

fn born_order() -> Outcome {
    let ks = [0.02, 0.04, 0.08];
    let mut err = Vec::new();
    for &k in &ks {
        let b = born_series_a0(&soft(), k, 2, SeriesQuadrature::default()).map_err(e)?.a;
        err.push((b - soft_sphere_scattering_length(1.0, 0.5, k)).abs());
    }
    let (s, se) = slope(&ks, &err)?;
    check((s - 3.0).abs() <= 0.2, format!("error slope {s:.4} ± {se:.1e} (want 3.0 ± 0.2)"))
}

fn box_series() -> Outcome {
    let kappa = 0.1;
    let a0 = scattering_length_ode(&soft(), kappa).map_err(e)?.a0;
    let ns = [100u64, 1000, 10000];
    let mut shift = Vec::new();
    let mut worst_ratio = 0.0f64;
    for &n in &ns {
        let r = box_scattering_series_an(&soft(), kappa, n, 3, BoxSeriesOptions::default()).map_err(e)?;
        for w in r.terms.windows(2) {
            worst_ratio = worst_ratio.max((w[1] / w[0]).abs());
        }
        shift.push(4.0 * PI * (r.a - a0) * n as f64);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (s, se) = slope(&x, &shift)?;
    check(
        worst_ratio < 1.0 && s.abs() < 0.2,
        format!("max term ratio {worst_ratio:.3} (< 1); 4π(a_N-a0)N = {}, slope {s:.3} ± {se:.1e} (|slope| < 0.2)", sci(&shift)),
    )
}

fn eta_diagnostics() -> Outcome {
    let ns = [50u64, 100, 200, 400, 800];
    let modes = build_mode_set(Cutoff::Euclidean { radius: 10.0 * TWO_PI }, false).map_err(e)?;
    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    for &n in &ns {
        let sol = solve_neumann(&soft(), 0.1, n, 0.25, RadialGrid::default()).map_err(e)?;
        let profile = build_eta(Arc::new(sol), &modes, n).map_err(e)?;
        let norms = eta_norms(&profile).map_err(e)?;
        l2.push(norms.l2);
        h1.push(norms.h1_sq);
    }
    let (lo, hi) = l2.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = (hi - lo) / lo;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (s, se) = slope(&x, &h1)?;
    check(
        spread < 0.1 && (s - 1.0).abs() <= 0.1,
        format!("‖η‖₂ spread {:.2}% (< 10%), H¹² slope {s:.4} ± {se:.1e} (want 1.0 ± 0.1)", 100.0 * spread),
    )
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn fock_identities() -> Outcome {
    let n = 4u32;
    let nn = n as u64;
    let full = build_basis(&axis(true), Truncation::total(n), None).map_err(e)?;
    let exc = build_basis(&axis(false), Truncation::Excitations { max: n }, None).map_err(e)?;
    if full.modes().len() != 7 {
        return Err(format!("instance has {} modes, expected 7", full.modes().len()));
    }
    let inter = Interaction::new(&soft(), 0.1, nn, 1.0, full.modes()).map_err(e)?;
    let h = build_hamiltonian_full(&full, &inter).map_err(e)?;
    let c = full.condensate_index().unwrap();
    let fact = (h.get(c, c) - (nn - 1) as f64 * 0.1 * inter.vhat0() / 2.0).abs();

    let u = build_u_n(&full, &exc).map_err(e)?;
    let z = full.zero_slot().unwrap();
    let sf = |p: LatticeVector| full.modes().index_of(p).unwrap();
    let se = |p: LatticeVector| exc.modes().index_of(p).unwrap();
    let op = |b: &FockBasis, coeff: f64, ops: Vec<Op>| operator_from_strings(b, nn, "", false, &[(coeff, ops)]).to_dense();
    let sq = (n as f64).sqrt();
    let mut rules = 0.0f64;
    for &p in exc.modes().modes() {
        for &q in exc.modes().modes() {
            let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(sf(p)), Op::A(sf(q))])]));
            rules = rules.max(max_diff(&lhs.to_dense(), &op(&exc, 1.0, vec![Op::Ad(se(p)), Op::A(se(q))])));
        }
        let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(sf(p)), Op::A(z)])]));
        rules = rules.max(max_diff(&lhs.to_dense(), &op(&exc, sq, vec![Op::Ad(se(p)), Op::Root(Radical::Condensate)])));
        let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(z), Op::A(sf(p))])]));
        rules = rules.max(max_diff(&lhs.to_dense(), &op(&exc, sq, vec![Op::Root(Radical::Condensate), Op::A(se(p))])));
    }
    let lhs = u.conjugate(&operator_from_strings(&full, nn, "", true, &[(1.0, vec![Op::Ad(z), Op::A(z)])]));
    let rhs = SparseOperator::linear_combination(
        "",
        &[(-1.0, &number_plus(&exc)), (n as f64, &SparseOperator::identity("", exc.dim()))],
    );
    rules = rules.max(max_diff(&lhs.to_dense(), &rhs.to_dense()));

    let l = build_excitation_hamiltonian(&exc, &inter).map_err(e)?;
    let a = dense_eigenvalues(&h.to_dense());
    let b = dense_eigenvalues(&l.total.to_dense());
    let spec = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    check(
        fact <= 1e-12 && rules <= 1e-12 && spec <= 1e-10 && a.len() == b.len(),
        format!("factorized energy err {fact:.1e}, rule defect {rules:.1e} (tol 1e-12); spectra diff {spec:.1e} (tol 1e-10)"),
    )
}

fn remainder_scaling() -> Outcome {
    let basis = build_basis(&axis(false), Truncation::Excitations { max: 4 }, None).map_err(e)?;
    let ns = [20u64, 40, 80, 160];
    let mut ratios = Vec::new();
    for &n in &ns {
        let sol = solve_neumann(&soft(), 0.1, n, 0.25, RadialGrid::default()).map_err(e)?;
        let profile = build_eta(Arc::new(sol), basis.modes(), n).map_err(e)?;
        ratios.push(measure_remainders_dp(&basis, &profile, 4, 32, 7).map_err(e)?.max_ratio);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (s, se) = slope(&x, &ratios)?;
    check((s + 1.0).abs() <= 0.2, format!("max ratios {}, slope {s:.4} ± {se:.1e} (want -1.0 ± 0.2)", sci(&ratios)))
}

/// Stage-J prediction at β = 0 (η ≡ 0) restricted to a sector and an excitation cap.
fn mean_field_prediction(n: u64, cap: u32, sector: Option<LatticeVector>, zeta: f64) -> Result<SpectrumPrediction, String> {
    let modes = axis(false);
    let inter = Interaction::new(&soft(), 0.1, n, 0.0, &modes).map_err(e)?;
    let form = quadratic_coefficients(Stage::J, &CorrelationProfile::zero(&modes, n), &inter, SumDomain::Modes, &modes, f64::INFINITY)
        .map_err(e)?;
    let d = diagonalize_quadratic(&form).map_err(e)?;
    let dispersion: Vec<(LatticeVector, f64)> = form.modes.iter().copied().zip(d.eps.iter().copied()).collect();
    let mut levels = enumerate_levels(&dispersion, zeta, 100_000).map_err(e)?;
    levels.retain(|l| l.occupations.iter().sum::<u32>() <= cap && sector.is_none_or(|s| level_momentum(l, &dispersion) == s));
    Ok(SpectrumPrediction { ground_energy: form.constant + d.shift, dispersion, levels, zeta })
}

/// Sizes of clusters of consecutive values closer than `tol`.
fn multiplicities(v: &[f64], tol: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 && (x - v[i - 1]).abs() <= tol * x.abs().max(1.0) {
            *out.last_mut().unwrap() += 1;
        } else {
            out.push(1);
        }
    }
    out
}

fn mean_field_spectrum() -> Outcome {
    let all = axis(true);
    let ns = [100u64, 200, 400, 800];
    let zero = Some(LatticeVector::ZERO);
    let mut points = Vec::new();
    let mut lowest = Vec::new();
    let mut multiplets = Vec::new();
    for &n in &ns {
        let inter = Interaction::new(&soft(), 0.1, n, 0.0, &all).map_err(e)?;
        let rule = Truncation::Total { n: n as u32, max_excited: 6 };
        let zb = build_basis(&all, rule, zero).map_err(e)?;
        let zr = lowest_spectrum(&build_hamiltonian_full(&zb, &inter).map_err(e)?, &SolverOptions { m: 4, ..Default::default() })
            .map_err(e)?;
        let pred = mean_field_prediction(n, 6, zero, 200.0)?;
        let first = pred.levels.iter().map(|l| l.energy).find(|&x| x > 0.0).ok_or("no predicted zero-sector level")?;
        lowest.push((zr.values[1] - zr.values[0] - first).abs());
        points.push((n, zr, pred));

        let fb = build_basis(&all, rule, None).map_err(e)?;
        let fr = lowest_spectrum(&build_hamiltonian_full(&fb, &inter).map_err(e)?, &SolverOptions { m: 8, ..Default::default() })
            .map_err(e)?;
        let ed: Vec<f64> = fr.values[1..].iter().map(|x| x - fr.values[0]).collect();
        let full_pred = mean_field_prediction(n, 6, None, 60.0)?;
        let p: Vec<f64> = full_pred.levels.iter().map(|l| l.energy).filter(|&x| x > 0.0).collect();
        let (me, mp) = (multiplicities(&ed, 1e-9), multiplicities(&p, 1e-9));
        multiplets.push((me.first() == mp.first() && mp.first() == Some(&6), me[0]));
    }
    let cmp = compare_spectra(&points).map_err(e)?;
    let fit = cmp.fit.ok_or("no per-level gap fit")?;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (s_low, _) = slope(&x, &lowest)?;
    let degenerate = multiplets.iter().all(|m| m.0);
    check(
        (fit.slope + 1.0).abs() <= 0.3 && (s_low + 1.0).abs() <= 0.3 && degenerate,
        format!(
            "per-level gap slope {:.4} ± {:.1e}, lowest gap slope {s_low:.4} (want -1.0 ± 0.3); multiplet sizes {:?} (want 6)",
            fit.slope,
            fit.slope_se,
            multiplets.iter().map(|m| m.1).collect::<Vec<_>>()
        ),
    )
}

fn depletion_scaling() -> Outcome {
    let all = axis(true);
    let ns = [100u64, 200, 400, 800];
    let mut dep = Vec::new();
    for &n in &ns {
        let inter = Interaction::new(&soft(), 0.1, n, 0.0, &all).map_err(e)?;
        let basis = build_basis(&all, Truncation::Total { n: n as u32, max_excited: 6 }, Some(LatticeVector::ZERO)).map_err(e)?;
        let r = lowest_spectrum(&build_hamiltonian_full(&basis, &inter).map_err(e)?, &SolverOptions { m: 1, ..Default::default() })
            .map_err(e)?;
        dep.push(depletion(&r.vectors[0], &basis).map_err(e)?);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (s, se) = slope(&x, &dep)?;
    check((s + 1.0).abs() <= 0.3, format!("depletion {}, slope {s:.4} ± {se:.1e} (want -1.0 ± 0.3)", sci(&dep)))
}

fn renormalization_gain() -> Outcome {
    let a0 = scattering_length_ode(&soft(), 0.1).map_err(e)?.a0;
    let mut cs = Vec::new();
    let mut gains = Vec::new();
    for (n, cap) in [(20u64, 4u32), (40, 4), (80, 4), (20, 6)] {
        let basis = build_basis(&axis(false), Truncation::Excitations { max: cap }, None).map_err(e)?;
        let sol = solve_neumann(&soft(), 0.1, n, 0.25, RadialGrid::default()).map_err(e)?;
        let profile = build_eta(Arc::new(sol), basis.modes(), n).map_err(e)?;
        let inter = Interaction::new(&soft(), 0.1, n, 1.0, basis.modes()).map_err(e)?;
        let l = build_excitation_hamiltonian(&basis, &inter).map_err(e)?;
        let obs = build_observables(&basis, &profile, &inter).map_err(e)?;
        let conj = Conjugations::build(&basis, &profile, None).map_err(e)?;
        let g = renormalize(RenormStage::G, &l.total, &conj).map_err(e)?;
        let vac = basis.condensate_index().unwrap();
        gains.push(g[(vac, vac)] - l.total.get(vac, vac));
        if cap == 4 {
            cs.push(stage_g_constant(&g, &obs, a0, n, 0.1, 0.5).map_err(e)?);
        }
    }
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    check(
        gains.iter().all(|&g| g < 0.0) && lo > 0.0 && hi / lo <= 2.0,
        format!("⟨Ω,GΩ⟩-⟨Ω,LΩ⟩ = {} (all < 0); C(α=1/2) = {cs:.4?}, max/min {:.3} (≤ 2)", sci(&gains), hi / lo),
    )
}

fn predictor_consistency() -> Outcome {
    let a0 = scattering_length_ode(&soft(), 0.1).map_err(e)?.a0;
    let modes = build_mode_set(Cutoff::Euclidean { radius: 4.0 * TWO_PI }, false).map_err(e)?;
    let mut identity = 0.0f64;
    // |√(F²-G²) - ε_GP| per shell |n|², for each N.
    let mut errors: Vec<BTreeMap<u64, f64>> = Vec::new();
    for n in [100u64, 1000, 10000] {
        let sol = solve_neumann(&soft(), 0.1, n, 0.25, RadialGrid::default()).map_err(e)?;
        let profile = build_eta(Arc::new(sol), &modes, n).map_err(e)?;
        let inter = Interaction::new(&soft(), 0.1, n, 1.0, &modes).map_err(e)?;
        let form = quadratic_coefficients(Stage::J, &profile, &inter, SumDomain::Lattice { max_n2: 64 }, &modes, f64::INFINITY)
            .map_err(e)?;
        let d = diagonalize_quadratic(&form).map_err(e)?;
        let mut err = BTreeMap::new();
        for ((p, (&f, &g)), &eps) in form.modes.iter().zip(form.diagonal.iter().zip(&form.pairing)).zip(&d.eps) {
            let fg = f * f - g * g;
            identity = identity.max((eps * eps - fg).abs() / fg);
            let x = (fg.sqrt() - gp_dispersion(a0, *p)).abs();
            let slot = err.entry(p.norm2()).or_insert(0.0f64);
            *slot = slot.max(x);
        }
        errors.push(err);
    }
    let offending: Vec<u64> =
        errors[0].keys().copied().filter(|k| !(errors[0][k] > errors[1][k] && errors[1][k] > errors[2][k])).collect();
    let worst: Vec<f64> = errors.iter().map(|v| v.values().copied().fold(0.0, f64::max)).collect();

    let cuts = [100u64, 400, 1600, 6400];
    let (s_ref, t_ref) = energy_lattice_sum(a0, 102_400);
    let total = s_ref + t_ref;
    let radius: Vec<f64> = cuts.iter().map(|&m| TWO_PI * (m as f64).sqrt()).collect();
    let rem: Vec<f64> = cuts.iter().map(|&m| total - energy_lattice_sum(a0, m).0).collect();
    let (s, _) = slope(&radius, &rem)?;
    let shells = if offending.is_empty() {
        "none".to_string()
    } else {
        offending
            .iter()
            .map(|k| format!("|n|²={k} ({})", sci(&errors.iter().map(|m| m[k]).collect::<Vec<_>>())))
            .collect::<Vec<_>>()
            .join(", ")
    };
    check(
        identity <= 1e-12 && offending.is_empty() && -s >= 0.8,
        format!(
            "ε²=F²-G² rel err {identity:.1e} (tol 1e-12); max dispersion error per N {}, non-monotone shells: {shells}; tail exponent {:.3} (≥ 0.8)",
            sci(&worst),
            -s
        ),
    )
}

fn brute_levels(eps: &[f64], zeta: f64) -> Vec<Level> {
    let caps: Vec<u32> = eps.iter().map(|e| (zeta / e).floor() as u32).collect();
    let mut out = Vec::new();
    let mut occ = vec![0u32; eps.len()];
    loop {
        let energy: f64 = eps.iter().zip(&occ).map(|(e, &n)| e * n as f64).sum();
        if energy <= zeta {
            out.push(Level { energy, occupations: occ.clone() });
        }
        let mut i = 0;
        while i < occ.len() && occ[i] == caps[i] {
            occ[i] = 0;
            i += 1;
        }
        if i == occ.len() {
            break;
        }
        occ[i] += 1;
    }
    out
}

fn level_key(l: &Level) -> (u64, Vec<u32>) {
    (l.energy.to_bits(), l.occupations.clone())
}

fn level_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sizes = Vec::new();
    for t in 0..20 {
        let m = rng.random_range(1..=8usize);
        let eps: Vec<f64> = (0..m)
            .map(|_| if t % 2 == 0 { rng.random_range(1..=4) as f64 } else { rng.random_range(1.0..10.0) })
            .collect();
        let min = eps.iter().copied().fold(f64::INFINITY, f64::min);
        let mut zeta = if t % 2 == 0 { (rng.random_range(2..=8) as f64) * min } else { rng.random_range(min..6.0 * min) };
        while brute_levels(&eps, zeta).len() > 500 {
            zeta = if t % 2 == 0 { zeta - 1.0 } else { 0.8 * zeta };
        }
        let table: Vec<(LatticeVector, f64)> = eps.iter().enumerate().map(|(i, &x)| (LatticeVector::new(i as i32, 0, 0), x)).collect();
        let got = enumerate_levels(&table, zeta, 500).map_err(e)?;
        let mut a: Vec<_> = got.iter().map(level_key).collect();
        let mut b: Vec<_> = brute_levels(&eps, zeta).iter().map(level_key).collect();
        a.sort();
        b.sort();
        if a != b {
            return Err(format!("table {t} (ε = {eps:?}, ζ = {zeta}): {} levels vs {} by brute force", a.len(), b.len()));
        }
        sizes.push(a.len());
    }
    Ok(format!("20 tables, level counts {sizes:?}, all multisets equal"))
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|x| x.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let cfg = RunConfig::from_json(
        r#"{
          "potential": {"kind": "soft_sphere", "v0": 1.0, "r": 0.5},
          "kappa": 0.1, "n_list": [20, 40], "beta": 1.0, "ell": 0.25,
          "cutoff": {"kind": "euclidean", "radius": 6.3},
          "n_max": 2, "zeta": 120.0, "seed": 3, "solver": {"m": 8}
        }"#,
    )
    .map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let mut compared = 0;
    for cmd in [Command::Scatter, Command::Correlations, Command::Predict, Command::Ed, Command::Renorm, Command::Report] {
        let mut runs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{}-{run}", cmd.name()));
            let opts = RunOptions {
                out: Some(out.clone()),
                cache_dir: Some(dir.path().join(format!("cache-{run}"))),
                sequential: true,
                unsafe_override: false,
            };
            run_pipeline(&cfg, cmd, &opts).map_err(e)?;
            runs.push(outputs(&out));
        }
        if runs[0] != runs[1] {
            return Err(format!("{} outputs differ between runs", cmd.name()));
        }
        compared += runs[0].len();
    }
    Ok(format!("6 commands, {compared} output files byte-identical across two uncached sequential runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<u64>); 12] = [
        ("soft-sphere scattering length", scattering_length, Some(1)),
        ("Born truncation order", born_order, Some(30)),
        ("finite-box series", box_series, Some(300)),
        ("correlation norms", eta_diagnostics, Some(120)),
        ("exact Fock identities", fock_identities, Some(60)),
        ("quadratic remainder scaling", remainder_scaling, Some(600)),
        ("mean-field spectrum", mean_field_spectrum, Some(900)),
        ("condensate depletion", depletion_scaling, Some(600)),
        ("renormalization gain", renormalization_gain, Some(900)),
        ("predictor consistency", predictor_consistency, Some(120)),
        ("level enumeration", level_enumeration, Some(60)),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let over = limit.is_some_and(|l| took > Duration::from_secs(l));
        let (ok, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; runtime over {}s", limit.unwrap())),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {detail} ({:.2}s)", if ok { "PASS" } else { "FAIL" }, i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
