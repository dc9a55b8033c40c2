use fcs_core::certify::{evaluate_theta_hat, even_odd_split, theta_hat};
use fcs_core::io::{normalize_numbers, random_popescu_matrices, SystemFile};
use fcs_core::linalg::{cplx, identity, kron, max_abs, spectral_norm, trace, CMatrix};
use fcs_core::modular::{word_identity_residual, ModularData};
use fcs_core::state::{reduced_density, two_sided_eval, WindowObservable};
use fcs_core::transfer::{build_transfer, spectral_report};
use fcs_core::{CanonicalSystem, PopescuSystem, Tolerances, Word};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(d: usize, k: usize, seed: u64) -> CanonicalSystem {
    PopescuSystem::new(random_popescu_matrices(d, k, seed), 1e-9)
        .unwrap()
        .canonicalize(&Tolerances::default())
        .unwrap()
}

fn random_matrix(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn word(d: usize, len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0..d, len).prop_map(Word::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn markov_map_is_unital_and_predual_trace_preserving(d in 2usize..4, k in 1usize..4, seed in any::<u64>(), xs in any::<u64>()) {
        let c = system(d, k, seed);
        prop_assert!(max_abs(&(c.tau(&identity(c.k())) - identity(c.k()))) < 1e-12);
        let x = random_matrix(c.k(), xs);
        prop_assert!((trace(&c.predual(&x)) - trace(&x)).norm() < 1e-12);
        prop_assert!((c.phi0(&c.tau(&x)) - c.phi0(&x)).norm() < 1e-10);
    }

    #[test]
    fn word_operators_are_multiplicative(seed in any::<u64>(), a in word(3, 2), b in word(3, 3)) {
        let c = system(3, 2, seed);
        let ab = c.word_operator(&a.concat(&b)).unwrap();
        let prod = c.word_operator(&a).unwrap() * c.word_operator(&b).unwrap();
        prop_assert!(max_abs(&(ab - prod)) < 1e-13);
    }

    #[test]
    fn word_index_round_trips(d in 1usize..5, w in prop::collection::vec(0usize..4, 0..6)) {
        let w = Word::new(w.into_iter().map(|x| x % d).collect());
        prop_assert_eq!(Word::from_index(w.index(d), d, w.len()), w);
    }

    #[test]
    fn canonicalize_is_idempotent(d in 2usize..4, k in 1usize..4, seed in any::<u64>()) {
        let c = system(d, k, seed);
        let again = c.system().canonicalize(c.tolerances()).unwrap();
        prop_assert_eq!(again.k(), c.k());
        prop_assert!(max_abs(&(again.rho() - c.rho())) < 1e-10);
    }

    #[test]
    fn reduced_densities_are_compatible(seed in any::<u64>(), n in 1usize..4) {
        let c = system(2, 2, seed);
        let big = reduced_density(&c, n + 1).unwrap();
        let small = reduced_density(&c, n).unwrap().sigma;
        prop_assert!(max_abs(&(big.partial_trace_last() - &small)) < 1e-12);
        prop_assert!(max_abs(&(big.partial_trace_first() - &small)) < 1e-12);
        prop_assert!((trace(&small) - cplx(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn state_is_hermitian_and_positive(seed in any::<u64>(), qs in any::<u64>()) {
        let c = system(2, 2, seed);
        let rd = reduced_density(&c, 2).unwrap();
        let q = WindowObservable::new(0, 2, 2, random_matrix(4, qs)).unwrap();
        let a = rd.expectation(&q).unwrap();
        let b = rd.expectation(&q.adjoint()).unwrap();
        prop_assert!((a.conj() - b).norm() < 1e-13);
        let qq = WindowObservable::new(0, 2, 2, q.coeffs().adjoint() * q.coeffs()).unwrap();
        let p = rd.expectation(&qq).unwrap();
        prop_assert!(p.re >= -1e-13 && p.im.abs() < 1e-13);
    }

    #[test]
    fn dual_words_reproduce_primal_words(d in 2usize..4, k in 1usize..4, seed in any::<u64>()) {
        let c = system(d, k, seed);
        let m = ModularData::new(&c).unwrap();
        let dual = m.dual_system(&c).unwrap();
        prop_assert!(word_identity_residual(&c, dual.rho_half(), dual.w(), 3) < 1e-9);
        prop_assert!(dual.normalization_residual() < 1e-8);
    }

    #[test]
    fn kms_adjoint_duality(seed in any::<u64>(), xs in any::<u64>(), ys in any::<u64>()) {
        let c = system(2, 3, seed);
        let m = ModularData::new(&c).unwrap();
        let adj = m.kms_adjoint(&c);
        let x = random_matrix(3, xs);
        let y = random_matrix(3, ys);
        prop_assert!(adj.duality_residual(&x, &y) < 1e-9);
        prop_assert!(adj.unitality_residual() < 1e-10);
        prop_assert!(adj.invariance_residual(&y) < 1e-10);
    }

    #[test]
    fn two_sided_eval_matches_reduced_density(seed in any::<u64>(), ls in any::<u64>(), rs in any::<u64>()) {
        let c = system(2, 2, seed);
        let dual = ModularData::new(&c).unwrap().dual_system(&c).unwrap();
        let l = WindowObservable::new(-1, 2, 2, random_matrix(4, ls)).unwrap();
        let r = WindowObservable::new(1, 2, 2, random_matrix(4, rs)).unwrap();
        let joint = WindowObservable::new(-1, 4, 2, kron(l.coeffs(), r.coeffs())).unwrap();
        let direct = reduced_density(&c, 4).unwrap().expectation(&joint).unwrap();
        prop_assert!((two_sided_eval(&c, &dual, &l, &r).unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn theta_hat_matches_joint_window(seed in any::<u64>(), qs in any::<u64>(), k in 0usize..3) {
        let c = system(2, 2, seed);
        let dual = ModularData::new(&c).unwrap().dual_system(&c).unwrap();
        let q = WindowObservable::new(0, 2, 2, random_matrix(4, qs)).unwrap();
        let th = theta_hat(&q, k).unwrap();
        let w = th.as_window().unwrap();
        let brute = reduced_density(&c, w.n_sites()).unwrap().expectation(&w).unwrap();
        prop_assert!((evaluate_theta_hat(&c, &dual, &th).unwrap() - brute).norm() < 1e-12);
    }

    #[test]
    fn even_part_is_reflection_invariant(qs in any::<u64>()) {
        let q = WindowObservable::new(-1, 4, 2, random_matrix(16, qs)).unwrap();
        let (even, odd) = even_odd_split(&q).unwrap();
        prop_assert!(spectral_norm(even.coeffs()) <= spectral_norm(q.coeffs()) * (1.0 + 1e-12));
        let (even2, odd2) = even_odd_split(&even).unwrap();
        prop_assert!(max_abs(&(even2.coeffs() - even.coeffs())) < 1e-13);
        prop_assert!(max_abs(odd2.coeffs()) < 1e-13);
        prop_assert!(max_abs(&(even.coeffs() + odd.coeffs() - q.coeffs())) < 1e-13);
    }

    #[test]
    fn transfer_spectrum_in_unit_disk(d in 2usize..4, k in 1usize..4, seed in any::<u64>()) {
        let c = system(d, k, seed);
        let rep = spectral_report(&build_transfer(&c), 1e-8).unwrap();
        prop_assert!(rep.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        prop_assert!(rep.alpha <= 1.0);
        prop_assert!((rep.eigenvalues[0] - cplx(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn system_files_round_trip(entries in prop::collection::vec(-1e3f64..1e3, 16)) {
        let mats: Vec<CMatrix> = entries
            .chunks(8)
            .map(|c| CMatrix::from_fn(2, 2, |r, col| cplx(c[2 * (2 * r + col)], c[2 * (2 * r + col) + 1])))
            .collect();
        let f = SystemFile::new("p", mats);
        prop_assert_eq!(SystemFile::from_json_str(&f.to_json_string()).unwrap(), f);
    }

    #[test]
    fn number_normalization_is_idempotent(xs in prop::collection::vec(any::<f64>(), 0..8)) {
        let mut v = serde_json::json!(xs);
        normalize_numbers(&mut v);
        let once = v.to_string();
        normalize_numbers(&mut v);
        prop_assert_eq!(v.to_string(), once);
    }
}
