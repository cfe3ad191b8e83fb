use bogoscope::eig::{dense_eigenvalues, lowest_spectrum, Method, SolverOptions};
use bogoscope::fit::fit_power_law;
use bogoscope::fock::{build_basis, Truncation};
use bogoscope::model::{build_mode_set, Cutoff, LatticeVector, RadialPotential, TWO_PI};
use bogoscope::predictor::{diagonalize_quadratic, enumerate_levels, QuadraticForm, Stage};
use bogoscope::scattering::{scattering_length_ode, soft_sphere_scattering_length};
use bogoscope::sparse::SparseOperator;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn brute_levels(eps: &[f64], zeta: f64) -> Vec<(f64, Vec<u32>)> {
    let mut out = Vec::new();
    let mut occ = vec![0u32; eps.len()];
    fn rec(k: usize, eps: &[f64], zeta: f64, occ: &mut Vec<u32>, out: &mut Vec<(f64, Vec<u32>)>) {
        if k == eps.len() {
            let e: f64 = eps.iter().zip(occ.iter()).map(|(e, &n)| e * n as f64).sum();
            if e <= zeta {
                out.push((e, occ.clone()));
            }
            return;
        }
        for n in 0..=((zeta / eps[k]).floor() as u32) {
            occ[k] = n;
            rec(k + 1, eps, zeta, occ, out);
        }
        occ[k] = 0;
    }
    rec(0, eps, zeta, &mut occ, &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn excitation_basis_size_is_binomial(max in 0u32..5, wide in any::<bool>()) {
        let cutoff = if wide { Cutoff::SupNorm { radius: 1 } } else { Cutoff::Euclidean { radius: TWO_PI } };
        let modes = build_mode_set(cutoff, false).unwrap();
        let b = build_basis(&modes, Truncation::Excitations { max }, None).unwrap();
        let m = modes.len() as u64;
        prop_assert_eq!(b.dim() as u64, binomial(m + max as u64, max as u64));
    }

    #[test]
    fn total_basis_size_counts_excited_configurations(n in 1u32..8, max_excited in 0u32..5) {
        let modes = build_mode_set(Cutoff::Euclidean { radius: TWO_PI }, true).unwrap();
        let b = build_basis(&modes, Truncation::Total { n, max_excited }, None).unwrap();
        let m = modes.len() as u64 - 1;
        let want: u64 = (0..=n.min(max_excited) as u64).map(|k| binomial(m + k - 1, k)).sum();
        prop_assert_eq!(b.dim() as u64, want);
    }

    #[test]
    fn levels_match_brute_force(eps in prop::collection::vec(0.5f64..4.0, 1..5), zeta in 0.0f64..8.0) {
        let disp: Vec<(LatticeVector, f64)> =
            eps.iter().enumerate().map(|(i, &e)| (LatticeVector::new(i as i32 + 1, 0, 0), e)).collect();
        let got = enumerate_levels(&disp, zeta, 1_000_000).unwrap();
        let want = brute_levels(&eps, zeta);
        prop_assert_eq!(got.len(), want.len());
        for (g, (e, occ)) in got.iter().zip(&want) {
            prop_assert!((g.energy - e).abs() <= 1e-12 * e.max(1.0));
            prop_assert_eq!(&g.occupations, occ);
        }
    }

    #[test]
    fn bogoliubov_rotation_diagonalizes(f in 0.1f64..100.0, frac in -0.95f64..0.95) {
        let g = frac * f;
        let form = QuadraticForm {
            stage: Stage::J,
            modes: vec![LatticeVector::new(1, 0, 0)],
            diagonal: vec![f],
            pairing: vec![g],
            constant: 0.0,
            tail: 0.0,
            eta0: 0.0,
            zero_index_share: 0.0,
        };
        let mut steep = form.clone();
        steep.pairing[0] = f.copysign(frac) * 0.97;
        prop_assert!(diagonalize_quadratic(&steep).is_err());
        let d = diagonalize_quadratic(&form).unwrap();
        let (t, e) = (2.0 * d.tau[0], d.eps[0]);
        prop_assert!((e * e - (f * f - g * g)).abs() <= 1e-10 * f * f);
        prop_assert!((f * t.cosh() + g * t.sinh() - e).abs() <= 1e-10 * f);
        prop_assert!((f * t.sinh() + g * t.cosh()).abs() <= 1e-10 * f);
    }

    #[test]
    fn power_fit_recovers_exponent(slope in -3.0f64..3.0, scale in 0.01f64..100.0) {
        let x = [1.0, 2.0, 5.0, 10.0, 40.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| scale * v.powf(slope)).collect();
        let fit = fit_power_law(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.predict(3.0) - scale * 3f64.powf(slope)).abs() < 1e-9 * scale * 3f64.powf(slope));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ode_matches_soft_sphere_closed_form(kappa in 0.01f64..0.2, r in 0.2f64..1.0, v0 in 0.2f64..2.0) {
        let v = RadialPotential::soft_sphere(v0, r).unwrap();
        let a = scattering_length_ode(&v, kappa).unwrap();
        let exact = soft_sphere_scattering_length(v0, r, kappa);
        prop_assert!((a.a0 - exact).abs() <= 1e-8 * exact);
        prop_assert!((a.identity - exact).abs() <= 1e-8 * exact);
    }
}

#[test]
fn iterative_solver_agrees_with_dense_on_random_sparse_matrix() {
    let dim = 1500;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut t = Vec::new();
    for i in 0..dim {
        t.push((i, i, rng.random_range(0.0..50.0)));
        for _ in 0..4 {
            let j = rng.random_range(0..dim);
            if j != i {
                let v = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    let op = SparseOperator::from_triplets("R", dim, true, t);
    let opts = SolverOptions { m: 6, method: Method::Iterative, ..SolverOptions::default() };
    let it = lowest_spectrum(&op, &opts).unwrap();
    let dense = dense_eigenvalues(&op.to_dense());
    for k in 0..6 {
        assert!((it.values[k] - dense[k]).abs() <= 1e-9, "level {k}: {} vs {}", it.values[k], dense[k]);
    }
    assert!(it.residuals.iter().all(|&r| r <= 1e-8));
}
