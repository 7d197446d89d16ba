use mris_chain::{classify_chain, MarkovChain};
use mris_extended::{
    build_generator, classify_generator, evolve, expectation, fixed_point_residual,
    initial_extended_state, ExtendedObservable, ExtendedState, GeneratorKind,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qm_core::matrix::{diag_real, from_rows};
use qm_core::random::{random_density, random_hermitian, random_probability, random_unitary};
use qm_core::{
    reduced_map, thermal_state, DensityMatrix, Observable, QuantumChannel, Tolerances,
    UnitaryPropagator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_channel(rng: &mut ChaCha8Rng, kind: u8) -> QuantumChannel {
    let tol = Tolerances::default();
    match kind {
        0 => QuantumChannel::identity(2),
        1 => {
            let z = from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
            let p: f64 = rng.random_range(0.1..0.9);
            QuantumChannel::from_kraus(
                vec![
                    DMatrix::identity(2, 2).scale(p.sqrt()),
                    z.scale((1.0 - p).sqrt()),
                ],
                &tol,
            )
            .unwrap()
        }
        _ => {
            let u = UnitaryPropagator::new(random_unitary(rng, 4), &tol).unwrap();
            let h = Observable::new(diag_real(&[0.0, 1.0]), &tol).unwrap();
            let beta = rng.random_range(0.2..2.0);
            let env = thermal_state(&h, beta).unwrap();
            reduced_map(&u, &env.state, 2).unwrap()
        }
    }
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> MarkovChain {
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row = random_probability(rng, n);
        if sparse {
            for v in row.iter_mut() {
                if rng.random::<f64>() < 0.4 {
                    *v = 0.0;
                }
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                row[i] = 1.0;
            } else {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        for j in 0..n {
            p[(i, j)] = row[j];
        }
    }
    MarkovChain::with_default_labels(random_probability(rng, n), p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_keeps_states_valid(seed in any::<u64>(), n in 1usize..4, steps in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_chain(&mut rng, n, true);
        let chans: Vec<_> = (0..n).map(|_| { let k = rng.random_range(0..3u8); random_channel(&mut rng, k) }).collect();
        let g = build_generator(&chain, &chans).unwrap();
        let tol = Tolerances::default();
        let rhos: Vec<_> = (0..n).map(|_| DensityMatrix::new(random_density(&mut rng, 2), &tol).unwrap()).collect();
        let r = evolve(&g, &initial_extended_state(&chain, &rhos).unwrap(), steps);
        prop_assert!(ExtendedState::new(r.blocks().to_vec(), &tol).is_ok());
        let one = ExtendedObservable::identity(n, 2);
        prop_assert!((expectation(&r, &one) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duality_of_generator_and_adjoint(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_chain(&mut rng, n, false);
        let chans: Vec<_> = (0..n).map(|_| random_channel(&mut rng, 2)).collect();
        let g = build_generator(&chain, &chans).unwrap();
        let tol = Tolerances::default();
        let r = ExtendedState::from_trusted((0..n).map(|_| random_density(&mut rng, 2).unscale(n as f64)).collect());
        let x = ExtendedObservable::new((0..n).map(|_| random_hermitian(&mut rng, 2)).collect(), &tol).unwrap();
        prop_assert!((expectation(&g.apply(&r), &x) - expectation(&r, &g.adjoint(&x))).abs() < 1e-12);
    }

    #[test]
    fn irreducible_generator_needs_irreducible_chain(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_chain(&mut rng, n, true);
        let chans: Vec<_> = (0..n).map(|_| { let k = rng.random_range(0..3u8); random_channel(&mut rng, k) }).collect();
        let g = build_generator(&chain, &chans).unwrap();
        let c = classify_generator(&g).unwrap();
        if c.is_irreducible() {
            prop_assert!(classify_chain(&chain).irreducible);
            let r = c.ess.as_ref().unwrap();
            prop_assert!(fixed_point_residual(&g, r) < 1e-10);
            prop_assert!(r.min_block_eigenvalue() > 0.0);
        }
    }

    #[test]
    fn positive_chain_primitivity_matches_averaged_channel(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = random_chain(&mut rng, n, false);
        let chans: Vec<_> = (0..n).map(|_| { let k = rng.random_range(0..3u8); random_channel(&mut rng, k) }).collect();
        let g = build_generator(&chain, &chans).unwrap();
        let pi = classify_chain(&chain).stationary;
        let mix: Vec<_> = chans.iter().zip(&pi).map(|(c, w)| (c, *w)).collect();
        let avg = QuantumChannel::convex_combination(&mix).unwrap();
        let single = MarkovChain::from_rows(&["x"], &[1.0], &[&[1.0]]).unwrap();
        let ga = build_generator(&single, &[avg]).unwrap();
        let big = classify_generator(&g).unwrap().kind == GeneratorKind::Primitive;
        let small = classify_generator(&ga).unwrap().kind == GeneratorKind::Primitive;
        prop_assert_eq!(big, small);
    }
}
