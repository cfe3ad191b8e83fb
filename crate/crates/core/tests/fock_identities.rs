use bogoscope::correlations::CorrelationProfile;
use bogoscope::eig::dense_eigenvalues;
use bogoscope::fock::*;
use bogoscope::model::{build_mode_set, Cutoff, LatticeVector, ModeSet, RadialPotential, TWO_PI};
use bogoscope::sparse::SparseOperator;
use nalgebra::DMatrix;

fn axis(zero: bool) -> ModeSet {
    build_mode_set(Cutoff::Euclidean { radius: TWO_PI }, zero).unwrap()
}

fn soft() -> RadialPotential {
    RadialPotential::soft_sphere(1.0, 0.5).unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn factorized_state_energy() {
    for beta in [0.0, 0.5, 1.0] {
        let modes = axis(true);
        let basis = build_basis(&modes, Truncation::total(4), None).unwrap();
        let inter = Interaction::new(&soft(), 0.1, 4, beta, &modes).unwrap();
        let h = build_hamiltonian_full(&basis, &inter).unwrap();
        let i = basis.condensate_index().unwrap();
        let want = 3.0 * 0.1 * inter.vhat0() / 2.0;
        assert!((h.get(i, i) - want).abs() < 1e-12);
    }
}

#[test]
fn kappa_zero_is_kinetic() {
    let modes = axis(true);
    let basis = build_basis(&modes, Truncation::total(3), None).unwrap();
    let inter = Interaction::new(&soft(), 0.0, 3, 1.0, &modes).unwrap();
    let h = build_hamiltonian_full(&basis, &inter).unwrap();
    let k = kinetic(&basis);
    assert_eq!(h.to_dense(), k.to_dense());
}

/// Two-body matrix built from plane-wave pair states, independent of the ladder code.
#[test]
fn two_particles_match_first_quantized_oracle() {
    let modes = axis(true);
    let (n, kappa, beta) = (2u32, 0.15, 1.0);
    let basis = build_basis(&modes, Truncation::total(n), None).unwrap();
    assert_eq!(basis.dim(), 28);
    let v = soft();
    let inter = Interaction::new(&v, kappa, n as u64, beta, &modes).unwrap();
    let h = build_hamiltonian_full(&basis, &inter).unwrap().to_dense();

    let m = modes.modes();
    let pairs: Vec<(usize, usize)> = (0..m.len()).flat_map(|i| (i..m.len()).map(move |j| (i, j))).collect();
    let vhat = |q: LatticeVector| v.fourier(q.p_abs() / (n as f64).powf(beta));
    let kets = |(i, j): (usize, usize)| -> Vec<((LatticeVector, LatticeVector), f64)> {
        if i == j {
            vec![((m[i], m[i]), 1.0)]
        } else {
            let c = 1.0 / 2f64.sqrt();
            vec![((m[i], m[j]), c), ((m[j], m[i]), c)]
        }
    };
    let index = |(i, j): (usize, usize)| {
        let mut occ = vec![0u16; m.len()];
        occ[i] += 1;
        occ[j] += 1;
        basis.index_of(&occ).unwrap()
    };
    let mut oracle = DMatrix::zeros(28, 28);
    for &a in &pairs {
        for &b in &pairs {
            let mut e = 0.0;
            for ((k1, k2), ca) in kets(a) {
                for ((l1, l2), cb) in kets(b) {
                    if k1 == l1 && k2 == l2 {
                        e += ca * cb * (k1.p2() + k2.p2());
                    }
                    if k1 + k2 == l1 + l2 {
                        e += ca * cb * kappa / n as f64 * vhat(k1 - l1);
                    }
                }
            }
            oracle[(index(a), index(b))] = e;
        }
    }
    assert!(max_diff(&h, &oracle) < 1e-13, "diff {}", max_diff(&h, &oracle));
}

fn pair_setup(n: u32) -> (FockBasis, FockBasis, UnitaryMap) {
    let full = build_basis(&axis(true), Truncation::total(n), None).unwrap();
    let exc = build_basis(&axis(false), Truncation::Excitations { max: n }, None).unwrap();
    let u = build_u_n(&full, &exc).unwrap();
    (full, exc, u)
}

#[test]
fn unitary_map_rules() {
    let n = 4u32;
    let (full, exc, u) = pair_setup(n);
    let z = full.zero_slot().unwrap();
    let slot_full = |p: LatticeVector| full.modes().index_of(p).unwrap();
    let slot_exc = |p: LatticeVector| exc.modes().index_of(p).unwrap();
    let nn = n as u64;

    let phi = StateVector::condensate(&full).unwrap();
    assert_eq!(u.apply(&phi), StateVector::condensate(&exc).unwrap());

    let modes = axis(false);
    let mut worst: f64 = 0.0;
    for &p in modes.modes() {
        for &q in modes.modes() {
            let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(slot_full(p)), Op::A(slot_full(q))])]));
            let rhs = operator_from_strings(&exc, nn, "", false, &[(1.0, vec![Op::Ad(slot_exc(p)), Op::A(slot_exc(q))])]);
            worst = worst.max(max_diff(&lhs.to_dense(), &rhs.to_dense()));
        }
        let sq = (n as f64).sqrt();
        let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(slot_full(p)), Op::A(z)])]));
        let rhs = operator_from_strings(&exc, nn, "", false, &[(sq, vec![Op::Ad(slot_exc(p)), Op::Root(Radical::Condensate)])]);
        worst = worst.max(max_diff(&lhs.to_dense(), &rhs.to_dense()));
        let lhs = u.conjugate(&operator_from_strings(&full, nn, "", false, &[(1.0, vec![Op::Ad(z), Op::A(slot_full(p))])]));
        let rhs = operator_from_strings(&exc, nn, "", false, &[(sq, vec![Op::Root(Radical::Condensate), Op::A(slot_exc(p))])]);
        worst = worst.max(max_diff(&lhs.to_dense(), &rhs.to_dense()));
    }
    let lhs = u.conjugate(&operator_from_strings(&full, nn, "", true, &[(1.0, vec![Op::Ad(z), Op::A(z)])]));
    let np = number_plus(&exc);
    let rhs = SparseOperator::linear_combination("", &[(-1.0, &np), (n as f64, &SparseOperator::identity("", exc.dim()))]);
    worst = worst.max(max_diff(&lhs.to_dense(), &rhs.to_dense()));
    assert!(worst < 1e-12, "rule defect {worst}");
}

#[test]
fn excitation_hamiltonian_is_conjugated_h() {
    for beta in [0.0, 1.0] {
        let n = 4u32;
        let (full, exc, u) = pair_setup(n);
        let inter = Interaction::new(&soft(), 0.2, n as u64, beta, full.modes()).unwrap();
        let h = build_hamiltonian_full(&full, &inter).unwrap();
        let l = build_excitation_hamiltonian(&exc, &inter).unwrap();
        let conj = u.conjugate(&h).to_dense();
        assert!(max_diff(&conj, &l.total.to_dense()) < 1e-12);
        let a = dense_eigenvalues(&h.to_dense());
        let b = dense_eigenvalues(&l.total.to_dense());
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10);
    }
}

#[test]
fn vacuum_expectation_of_excitation_hamiltonian() {
    let exc = build_basis(&axis(false), Truncation::Excitations { max: 3 }, None).unwrap();
    let inter = Interaction::new(&soft(), 0.1, 50, 1.0, exc.modes()).unwrap();
    let l = build_excitation_hamiltonian(&exc, &inter).unwrap();
    let i = exc.condensate_index().unwrap();
    assert!((l.total.get(i, i) - 49.0 * 0.1 * inter.vhat0() / 2.0).abs() < 1e-12);
}

#[test]
fn zero_potential_leaves_kinetic_energy() {
    let exc = build_basis(&axis(false), Truncation::Excitations { max: 3 }, None).unwrap();
    let zero = RadialPotential::soft_sphere(0.0, 0.5).unwrap();
    let inter = Interaction::new(&zero, 0.1, 10, 1.0, exc.modes()).unwrap();
    let l = build_excitation_hamiltonian(&exc, &inter).unwrap();
    assert_eq!(l.total.to_dense(), kinetic(&exc).to_dense());
}

fn sector_of(basis: &FockBasis) -> Vec<[i64; 3]> {
    momentum_sectors(basis)
}

fn check_structure(op: &SparseOperator, sectors: &[[i64; 3]]) {
    assert!(op.asymmetry() < 1e-12, "{} asymmetric", op.label);
    for (r, c, v) in op.triplets() {
        assert!(sectors[r] == sectors[c] || v.abs() < 1e-15, "{} breaks momentum conservation", op.label);
    }
}

#[test]
fn operators_are_symmetric_and_conserve_momentum() {
    let modes = build_mode_set(Cutoff::SupNorm { radius: 1 }, false).unwrap();
    let exc = build_basis(&modes, Truncation::Excitations { max: 2 }, None).unwrap();
    let inter = Interaction::new(&soft(), 0.1, 30, 1.0, &modes).unwrap();
    let sectors = sector_of(&exc);
    let l = build_excitation_hamiltonian(&exc, &inter).unwrap();
    for op in [&l.l0, &l.l2, &l.l3, &l.l4, &l.total] {
        check_structure(op, &sectors);
    }
    let profile = CorrelationProfile::zero(&modes, 30);
    let obs = build_observables(&exc, &profile, &inter).unwrap();
    for op in [&obs.number, &obs.kinetic, &obs.potential, &obs.cubic, &obs.h] {
        check_structure(op, &sectors);
    }
}

#[test]
fn quartic_interaction_is_non_negative() {
    let exc = build_basis(&axis(false), Truncation::Excitations { max: 4 }, None).unwrap();
    let inter = Interaction::new(&soft(), 0.1, 20, 1.0, exc.modes()).unwrap();
    let profile = CorrelationProfile::zero(exc.modes(), 20);
    let obs = build_observables(&exc, &profile, &inter).unwrap();
    let ev = dense_eigenvalues(&obs.potential.to_dense());
    assert!(ev[0] >= -1e-10, "lowest {}", ev[0]);
}

#[test]
fn cubic_term_without_correlations() {
    let modes = axis(false);
    let exc = build_basis(&modes, Truncation::Excitations { max: 3 }, None).unwrap();
    let n = 25u64;
    let inter = Interaction::new(&soft(), 0.1, n, 1.0, &modes).unwrap();
    let profile = CorrelationProfile::zero(&modes, n);
    let c = cubic_operator(&exc, &profile, &inter);
    let mut terms = Vec::new();
    let m = modes.modes();
    for &p in m.iter() {
        let mp = modes.index_of(-p).unwrap();
        for (qi, &q) in m.iter().enumerate() {
            let Some(pq) = modes.index_of(p + q) else { continue };
            let k = 0.1 / (n as f64).sqrt() * inter.vhat(p);
            terms.push((k, vec![Op::Bd(pq), Op::Bd(mp), Op::B(qi)]));
            terms.push((k, vec![Op::Bd(qi), Op::B(mp), Op::B(pq)]));
        }
    }
    let direct = operator_from_strings(&exc, n, "", true, &terms);
    assert!(max_diff(&c.to_dense(), &direct.to_dense()) < 1e-15);
}

#[test]
fn canonical_commutator_on_safe_states() {
    let modes = axis(false);
    let exc = build_basis(&modes, Truncation::Excitations { max: 4 }, None).unwrap();
    let n = 10u64;
    for p in 0..modes.len() {
        for q in 0..modes.len() {
            let aad = operator_from_strings(&exc, n, "", false, &[(1.0, vec![Op::A(p), Op::Ad(q)])]);
            let ada = operator_from_strings(&exc, n, "", false, &[(1.0, vec![Op::Ad(q), Op::A(p)])]);
            let comm = SparseOperator::linear_combination("", &[(1.0, &aad), (-1.0, &ada)]);
            for j in 0..exc.dim() {
                if exc.n_plus(j) >= 4 {
                    continue;
                }
                for i in 0..exc.dim() {
                    let want = if i == j && p == q { 1.0 } else { 0.0 };
                    assert!((comm.get(i, j) - want).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn zero_momentum_sector_matches_filter() {
    let modes = axis(false);
    let all = build_basis(&modes, Truncation::Excitations { max: 6 }, None).unwrap();
    let zero = build_basis(&modes, Truncation::Excitations { max: 6 }, Some(LatticeVector::ZERO)).unwrap();
    let filtered: Vec<&[u16]> = (0..all.dim()).filter(|&i| all.occupation(i).momentum == [0; 3]).map(|i| all.state(i)).collect();
    assert_eq!(zero.dim(), filtered.len());
    for (i, s) in filtered.iter().enumerate() {
        assert_eq!(zero.state(i), *s);
    }
    assert_eq!(all.dim(), 924);
}

#[test]
fn four_modes_two_excitations() {
    let m: Vec<LatticeVector> =
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)].iter().map(|&(x, y, z)| LatticeVector::new(x, y, z)).collect();
    let modes = ModeSet::from_vectors(m, false).unwrap();
    assert_eq!(build_basis(&modes, Truncation::Excitations { max: 2 }, None).unwrap().dim(), 15);
}
