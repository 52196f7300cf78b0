use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use towb::harmonic::{solve_harmonic_from, HarmonicOptions};
use towb::sigspace::{defect, hutchinson_iterate, lebesgue_decompose, sig_inner};
use towb::solenoid::CylinderSpec;
use towb::{
    GridFunction, IfsSystem, IntervalSet, Measure, PathMeasure, SigElement, SolPath,
    TransferOperator, TrigPoly, WeightExpr,
};

const N: usize = 32;

fn doubling(haar: bool) -> TransferOperator {
    let w = if haar { WeightExpr::haar() } else { WeightExpr::constant(1.0) };
    TransferOperator::new(IfsSystem::doubling(w).unwrap(), N).unwrap()
}

fn measure() -> impl Strategy<Value = Measure> {
    (
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], N),
        prop::collection::vec((0.0..1.0f64, 0.01..1.0f64), 0..4),
    )
        .prop_map(|(d, atoms)| Measure::from_density(d).unwrap().with_atoms(atoms).unwrap())
}

fn probability() -> impl Strategy<Value = Measure> {
    measure().prop_filter_map("non-zero", |m| m.normalized().ok())
}

fn interval() -> impl Strategy<Value = IntervalSet> {
    prop_oneof![
        Just(IntervalSet::all()),
        (0u32..16, 1u32..16).prop_map(|(a, w)| {
            let a = a as f64 / 16.0;
            IntervalSet::interval(a, (a + w as f64 / 16.0).min(1.0)).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_reconstructs(mu in measure(), lambda in measure()) {
        let d = lebesgue_decompose(&mu, &lambda).unwrap();
        let back = d.reconstruct(&lambda).unwrap();
        prop_assert!(back.total_variation(&mu).unwrap() < 1e-12);
        // the singular part lives where lambda has no mass
        for j in 0..N {
            prop_assert!(d.singular.density()[j] == 0.0 || lambda.density()[j] == 0.0);
        }
        for a in d.singular.atoms() {
            prop_assert!(lambda.atom_at(a.position).is_none());
        }
    }

    #[test]
    fn cauchy_schwarz(m1 in measure(), m2 in measure(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = GridFunction::from_fn(N, TrigPoly::random(3, &mut rng)).unwrap();
        let g = GridFunction::from_fn(N, TrigPoly::random(3, &mut rng)).unwrap();
        let a = SigElement::new(f, m1).unwrap();
        let b = SigElement::new(g, m2).unwrap();
        let ab = sig_inner(&a, &b).unwrap();
        prop_assert!(ab * ab <= a.norm_squared() * b.norm_squared() * (1.0 + 1e-12) + 1e-15);
        prop_assert_eq!(ab, sig_inner(&b, &a).unwrap());
    }

    #[test]
    fn disjoint_supports_are_orthogonal(split in 1usize..N, x in 0.0..1.0f64) {
        let left: Vec<f64> = (0..N).map(|j| if j < split { 1.0 } else { 0.0 }).collect();
        let right: Vec<f64> = left.iter().map(|v| 1.0 - v).collect();
        let one = GridFunction::constant(N, 1.0).unwrap();
        let a = SigElement::new(one.clone(), Measure::from_density(left).unwrap()).unwrap();
        let b = SigElement::new(one.clone(), Measure::from_density(right).unwrap()).unwrap();
        prop_assert_eq!(sig_inner(&a, &b).unwrap(), 0.0);
        let c = SigElement::new(one, Measure::dirac(N, x).unwrap()).unwrap();
        prop_assert_eq!(sig_inner(&b, &c).unwrap(), 0.0);
    }

    #[test]
    fn defect_is_nonnegative(lambda in probability(), haar in any::<bool>()) {
        let d = defect(&lambda, &doubling(haar)).unwrap();
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn hutchinson_preserves_mass(lambda in probability(), steps in 0usize..4, cantor in any::<bool>()) {
        let sys = if cantor {
            IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap()
        } else {
            IfsSystem::doubling(WeightExpr::constant(1.0)).unwrap()
        };
        let out = hutchinson_iterate(&sys, &lambda, steps).unwrap();
        prop_assert!((out.total() - lambda.total()).abs() < 1e-12);
    }

    #[test]
    fn transfer_is_positive(seed in any::<u64>(), haar in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = TrigPoly::random(6, &mut rng);
        let shift = p.coefficient_bound();
        let rf = doubling(haar).apply_r(&move |x: f64| p.value(x) + shift).unwrap();
        prop_assert!(rf.min() >= -1e-14);
    }

    #[test]
    fn kernel_matches_operator(seed in any::<u64>(), x in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = TrigPoly::random(5, &mut rng);
        let t = doubling(true);
        prop_assert_eq!(t.apply_at(&f, x), t.conditional_kernel(x).integrate(&f));
    }

    #[test]
    fn shift_forward_then_back_is_identity(
        x in 0.0..1.0f64,
        digits in prop::collection::vec(0usize..2, 0..6),
        cantor in any::<bool>(),
    ) {
        let sys = if cantor {
            IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap()
        } else {
            IfsSystem::doubling(WeightExpr::constant(1.0)).unwrap()
        };
        // bases inside a branch image so the forward shift is defined
        let x = sys.branches()[digits.first().copied().unwrap_or(0)].apply(x);
        let p = SolPath::new(&sys, x, digits).unwrap();
        prop_assert!(p.residual(&sys) < 1e-10);
        let q = p.shift_forward(&sys).unwrap();
        prop_assert!(q.residual(&sys) < 1e-10);
        prop_assert_eq!(q.shift_back().unwrap(), p);
    }

    #[test]
    fn kolmogorov_consistency(sets in prop::collection::vec(interval(), 1..4), x in 0.0..1.0f64) {
        let t = doubling(true);
        let pm = PathMeasure::new(
            t,
            GridFunction::constant(N, 1.0).unwrap(),
            Measure::lebesgue(N).unwrap(),
        )
        .unwrap();
        let spec = CylinderSpec::new(sets).unwrap();
        let m = pm.cylinder_mass(x, &spec).unwrap();
        let e = pm.cylinder_mass(x, &spec.extended()).unwrap();
        prop_assert!((m - e).abs() <= 10.0 * pm.residual() + 1e-13);
    }

    #[test]
    fn interval_sets_round_trip(
        parts in prop::collection::vec((0u32..64, 1u32..8), 0..4),
    ) {
        let s = IntervalSet::new(parts.iter().map(|&(a, w)| {
            let a = a as f64 / 64.0;
            (a, (a + w as f64 / 64.0).min(1.0))
        }))
        .unwrap();
        prop_assert_eq!(s.to_string().parse::<IntervalSet>().unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn harmonic_is_scale_invariant(c in 0.01..100.0f64, seed in any::<u64>()) {
        let t = doubling(true);
        let leb = Measure::lebesgue(N).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = TrigPoly::random(2, &mut rng);
        let shift = p.coefficient_bound() + 0.5;
        let start = GridFunction::from_fn(N, move |x: f64| p.value(x) + shift).unwrap();
        let opts = HarmonicOptions::default();
        let a = solve_harmonic_from(&t, &leb, start.clone(), &opts).unwrap();
        let b = solve_harmonic_from(&t, &leb, start.scaled(c).unwrap(), &opts).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(a.h.max_diff(&b.h).unwrap() < 1e-10);
        prop_assert!(a.residual < opts.tol * 10.0);
    }
}
