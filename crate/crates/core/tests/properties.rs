use freeito::cumulants::{
    cumulants_from_moments, moments_from_cumulants, semigroup_cumulants, CumulantSequence,
};
use freeito::ito::{derivation_identity_check, Polynomial};
use freeito::partitions::{count_noncrossing, for_each_noncrossing, SetPartition};
use freeito::rational::{int, ratio, Rational};
use freeito::scalar::{integral_cumulants, mu_norm, mu_norm_power};
use freeito::step::StepFunction;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=12).prop_map(|(p, q)| ratio(p, q))
}

fn nonnegative() -> impl Strategy<Value = Rational> {
    (0i64..=8, 1i64..=6).prop_map(|(p, q)| ratio(p, q))
}

fn sequence(len: usize) -> impl Strategy<Value = CumulantSequence> {
    prop::collection::vec(rational(), len).prop_map(|v| CumulantSequence::truncated(v).unwrap())
}

fn step(values: impl Strategy<Value = Rational>) -> impl Strategy<Value = StepFunction> {
    prop::collection::vec((1i64..=4, values), 1..=3).prop_map(|pieces| {
        let mut breakpoints = vec![int(0)];
        let mut vals = Vec::new();
        for (w, v) in pieces {
            let next = breakpoints.last().unwrap() + ratio(w, 3);
            breakpoints.push(next);
            vals.push(v);
        }
        StepFunction::new(breakpoints, vals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_cumulant_roundtrip(r in sequence(8)) {
        let m = moments_from_cumulants(&r, 8).unwrap();
        let back = cumulants_from_moments(&m, 8).unwrap();
        prop_assert_eq!(back.values(), r.values());
    }

    #[test]
    fn free_convolution_adds_cumulants(r in sequence(6), s in sequence(6)) {
        let sum = r.free_convolve(&s).unwrap();
        for k in 1..=6 {
            prop_assert_eq!(sum.get(k).unwrap(), r.get(k).unwrap() + s.get(k).unwrap());
        }
    }

    #[test]
    fn semigroup_composes(r in sequence(6), t in nonnegative(), s in nonnegative()) {
        let composed = semigroup_cumulants(&r, &t).unwrap().free_convolve(&semigroup_cumulants(&r, &s).unwrap()).unwrap();
        let direct = semigroup_cumulants(&r, &(t + s)).unwrap();
        prop_assert_eq!(composed.values(), direct.values());
    }

    #[test]
    fn indicator_integral_is_semigroup_law(r in sequence(6), t in (1i64..=9).prop_map(|p| ratio(p, 3))) {
        let f = StepFunction::indicator(int(0), t.clone(), int(1)).unwrap();
        let direct = semigroup_cumulants(&r, &t).unwrap();
        prop_assert_eq!(integral_cumulants(&f, &r).prefix(6).unwrap(), direct.prefix(6).unwrap());
    }

    #[test]
    fn mu_norm_triangle_inequality(
        values in prop::collection::vec(nonnegative(), 10),
        f in step(nonnegative()),
        g in step(nonnegative()),
        half in 1usize..=5,
    ) {
        let r = CumulantSequence::truncated(values).unwrap();
        let n = 2 * half;
        let sum = mu_norm(&f.add(&g), &r, n).unwrap();
        prop_assert!(sum <= mu_norm(&f, &r, n).unwrap() + mu_norm(&g, &r, n).unwrap() + 1e-12);
    }

    #[test]
    fn mu_norm_is_homogeneous(values in prop::collection::vec(nonnegative(), 6), f in step(rational()), c in rational()) {
        let r = CumulantSequence::truncated(values).unwrap();
        let scaled = mu_norm_power(&f.scale(&c), &r, 6).unwrap();
        let expected = mu_norm_power(&f, &r, 6).unwrap() * freeito::rational::pow(&c, 6);
        prop_assert_eq!(scaled, expected);
    }

    #[test]
    fn noncommutative_derivative_identity(coeffs in prop::collection::vec(rational(), 1..=6), k in 1usize..=3) {
        prop_assert!(derivation_identity_check(&Polynomial::new(coeffs), k));
    }
}

#[test]
fn enumerated_partitions_are_noncrossing() {
    for n in 1..=9 {
        let mut seen = 0u64;
        for_each_noncrossing(n, |labels, sizes| {
            assert!(SetPartition::from_labels(labels).unwrap().is_noncrossing());
            assert_eq!(sizes.iter().sum::<usize>(), n);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, count_noncrossing(n).unwrap());
    }
}
