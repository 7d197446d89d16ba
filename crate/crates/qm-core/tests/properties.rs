use proptest::prelude::*;
use qm_core::matrix::{identity, max_abs_diff};
use qm_core::random::{random_density, random_hermitian, random_real_symmetric, random_unitary};
use qm_core::{
    choi_verify, partial_trace_env, propagator, reduced_map, tensor, thermal_state, DensityMatrix,
    Observable, Tolerances, UnitaryPropagator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_undoes_tensoring(seed in any::<u64>(), ds in 1usize..4, de in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_hermitian(&mut rng, ds);
        let sigma = random_hermitian(&mut rng, de);
        let out = partial_trace_env(&tensor(&x, &sigma), ds, de).unwrap();
        let want = &x * sigma.trace();
        prop_assert!(max_abs_diff(&out, &want) < 1e-12);
    }

    #[test]
    fn propagators_compose(seed in any::<u64>(), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Observable::new(random_hermitian(&mut rng, 4), &Tolerances::default()).unwrap();
        let lhs = propagator(&h, t1).matrix() * propagator(&h, t2).matrix();
        prop_assert!(max_abs_diff(&lhs, propagator(&h, t1 + t2).matrix()) < 1e-10);
    }

    #[test]
    fn gibbs_entropy_operator_is_affine(seed in any::<u64>(), beta in 0.05f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Spectral width of order one keeps the smallest Gibbs weight well above round-off.
        let h = Observable::new(random_hermitian(&mut rng, 3).scale(0.3), &Tolerances::default()).unwrap();
        let th = thermal_state(&h, beta).unwrap();
        prop_assert!((th.state.matrix().trace().re - 1.0).abs() < 1e-14);
        let s = th.state.neg_log().unwrap();
        let want = (h.matrix() - identity(3).scale(th.free_energy.unwrap())).scale(beta);
        prop_assert!(max_abs_diff(&s, &want) < 1e-10);
    }

    #[test]
    fn reduced_maps_are_cptp_and_consistent(seed in any::<u64>(), beta in 0.0f64..3.0) {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = UnitaryPropagator::new(random_unitary(&mut rng, 4), &tol).unwrap();
        let h_e = Observable::new(random_real_symmetric(&mut rng, 2), &tol).unwrap();
        let th = thermal_state(&h_e, beta).unwrap();
        let ch = reduced_map(&u, &th.state, 2).unwrap();
        let rep = choi_verify(&ch);
        prop_assert!(rep.min_choi_eig >= -tol.psd);
        prop_assert!(rep.tp_residual <= tol.tp);
        prop_assert!(ch.consistency_residual() <= tol.consistency);
        let rho = DensityMatrix::new(random_density(&mut rng, 2), &tol).unwrap();
        prop_assert!(ch.apply_state(&rho, &tol).is_ok());
    }
}
