use nalgebra::DVector;
use proptest::prelude::*;
use strata_core::action::{fingerprint, stabilizer_coords, Representation};
use strata_core::algebra::{
    adjoint_action, commutator, exp_map, haar_sample, inner, random_algebra_with, AlgebraBasis,
};
use strata_core::bifurcation::PotentialFamily;
use strata_core::invariants::{finite_difference_gradient, random_invariant_potential};
use strata_core::lattice::{
    gauge_transform, gauge_transform_matter, holonomy_generators, total_lagrangian, wilson_action,
    GaugeSection, LatticeConfig, LatticeConnection, LatticeSpec, MatterField,
};
use strata_core::linalg::subspace_distance;
use strata_core::rng::stream;

fn reps() -> Vec<Representation> {
    vec![
        Representation::adjoint(2).unwrap(),
        Representation::adjoint(3).unwrap(),
        Representation::fundamental(3).unwrap(),
        "adjoint(3)+fundamental(3)"
            .parse()
            .and_then(Representation::new)
            .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_lands_in_special_unitary(n in 2usize..=4, seed: u64, t in -3.0f64..3.0) {
        let basis = AlgebraBasis::new(n).unwrap();
        let x = random_algebra_with(&basis, &mut stream(seed, 0));
        let g = exp_map(&x, t);
        prop_assert!(g.unitarity_residual() < 1e-10);
        prop_assert!((g.determinant() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn bracket_is_antisymmetric_and_ad_invariant(n in 2usize..=4, seed: u64) {
        let basis = AlgebraBasis::new(n).unwrap();
        let mut rng = stream(seed, 0);
        let a = random_algebra_with(&basis, &mut rng);
        let b = random_algebra_with(&basis, &mut rng);
        let c = random_algebra_with(&basis, &mut rng);
        let ab = commutator(&a, &b).unwrap();
        let ba = commutator(&b, &a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().norm() < 1e-12);
        // <[a,b],c> = <a,[b,c]>
        let lhs = inner(&ab, &c).unwrap();
        let rhs = inner(&a, &commutator(&b, &c).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        let g = haar_sample(n, seed);
        let ga = adjoint_action(&g, &a).unwrap();
        let gb = adjoint_action(&g, &b).unwrap();
        prop_assert!((inner(&ga, &gb).unwrap() - inner(&a, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn coordinates_round_trip(n in 2usize..=4, seed: u64) {
        let basis = AlgebraBasis::new(n).unwrap();
        let x = random_algebra_with(&basis, &mut stream(seed, 1));
        let back = basis.element(&basis.coords(&x));
        prop_assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn fingerprint_is_constant_on_orbits(which in 0usize..4, seed: u64) {
        let rep = &reps()[which];
        let mut rng = stream(seed, 2);
        let v = rep.random_unit_vector(&mut rng);
        let g = haar_sample(rep.n(), seed ^ 0x5a5a);
        let w = rep.act_group(&g, &v).unwrap();
        prop_assert_eq!(fingerprint(rep, &v).unwrap(), fingerprint(rep, &w).unwrap());
    }

    #[test]
    fn stabilizers_conjugate_along_orbits(which in 0usize..4, seed: u64, special: bool) {
        let rep = &reps()[which];
        let mut v = rep.random_unit_vector(&mut stream(seed, 3));
        if special && rep.kind().to_string() == "adjoint(3)" {
            v = DVector::from_fn(8, |i, _| if i == 7 { 1.0 } else { 0.0 });
        }
        let g = haar_sample(rep.n(), seed.wrapping_add(11));
        let w = rep.act_group(&g, &v).unwrap();
        let moved = rep.basis().adjoint_matrix(&g) * stabilizer_coords(rep, &v).unwrap();
        let direct = stabilizer_coords(rep, &w).unwrap();
        prop_assert!(subspace_distance(&moved, &direct) < 1e-8);
    }

    #[test]
    fn invariant_potentials_are_invariant(which in 0usize..4, seed: u64) {
        let rep = &reps()[which];
        let pot = random_invariant_potential(rep, 4, seed).unwrap();
        let v = rep.random_vector(&mut stream(seed, 4));
        let g = haar_sample(rep.n(), seed.wrapping_add(3));
        let r = rep.group_matrix(&g).unwrap();
        let (a, b) = (pot.evaluate(&v).unwrap(), pot.evaluate(&(&r * &v)).unwrap());
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        // The gradient is equivariant.
        let lhs = pot.gradient(&(&r * &v)).unwrap();
        let rhs = &r * pot.gradient(&v).unwrap();
        prop_assert!((lhs - &rhs).norm() < 1e-8 * (1.0 + rhs.norm()));
    }

    #[test]
    fn analytic_gradient_matches_differences(which in 0usize..4, seed: u64) {
        let rep = &reps()[which];
        let pot = random_invariant_potential(rep, 4, seed).unwrap();
        let v = rep.random_unit_vector(&mut stream(seed, 5));
        let exact = pot.gradient(&v).unwrap();
        let fd = finite_difference_gradient(|x| pot.evaluate(x).unwrap(), &v, 1e-5);
        prop_assert!((&exact - fd).norm() <= 1e-5 * exact.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wilson_action_is_gauge_invariant(d in 2usize..=3, l in 2usize..=3, n in 2usize..=3, seed: u64) {
        let spec = LatticeSpec::new(d, l).unwrap();
        let a = LatticeConnection::random(spec, n, seed);
        let gamma = GaugeSection::random(spec, n, seed.wrapping_add(1));
        let b = gauge_transform(&gamma, &a).unwrap();
        prop_assert!((wilson_action(&a) - wilson_action(&b)).abs() < 1e-10);
    }

    #[test]
    fn lagrangian_is_gauge_invariant(seed: u64) {
        let spec = LatticeSpec::new(2, 3).unwrap();
        let rep = Representation::fundamental(2).unwrap();
        let a = LatticeConnection::random(spec, 2, seed);
        let f = MatterField::random(spec, &rep, seed.wrapping_add(2)).unwrap();
        let gamma = GaugeSection::random(spec, 2, seed.wrapping_add(3));
        let pot = PotentialFamily::landau(&rep).unwrap().potential(0.7).unwrap();
        let before = total_lagrangian(&a, &f, &pot).unwrap().total();
        let after = total_lagrangian(
            &gauge_transform(&gamma, &a).unwrap(),
            &gauge_transform_matter(&gamma, &f, &rep).unwrap(),
            &pot,
        )
        .unwrap()
        .total();
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn holonomy_generators_conjugate_under_gauge(seed: u64) {
        let spec = LatticeSpec::new(2, 3).unwrap();
        let a = LatticeConnection::random(spec, 3, seed);
        let gamma = GaugeSection::random(spec, 3, seed.wrapping_add(5));
        let b = gauge_transform(&gamma, &a).unwrap();
        let g0 = gamma.at(0);
        for (h, k) in holonomy_generators(&a).iter().zip(holonomy_generators(&b)) {
            prop_assert!(g0.conjugate(h).max_abs_diff(&k) < 1e-9);
        }
    }

    #[test]
    fn configurations_round_trip_through_text(seed: u64) {
        let spec = LatticeSpec::new(2, 2).unwrap();
        let rep = Representation::fundamental(3).unwrap();
        let cfg = LatticeConfig {
            connection: LatticeConnection::random(spec, 3, seed),
            matter: Some((rep.kind().clone(), MatterField::random(spec, &rep, seed).unwrap())),
        };
        let text = cfg.to_text();
        let back = LatticeConfig::from_text(&text).unwrap();
        prop_assert_eq!(back.connection.max_abs_diff(&cfg.connection).unwrap(), 0.0);
        prop_assert_eq!(back.to_text(), text);
    }
}
