//! Ring axioms, Leibniz rule, print/parse round-trip and evaluation
//! homomorphism for exact polynomials.

use nijenhuis::exactpoly::{parse_expression, rational, CompiledPolynomial, Polynomial};
use proptest::prelude::*;

const NV: usize = 3;

fn names() -> Vec<String> {
    (1..=NV).map(|i| format!("u{i}")).collect()
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(
        (prop::collection::vec(0u32..3, NV), -5i64..=5, 1i64..=4),
        0..6,
    )
    .prop_map(|terms| {
        Polynomial::from_terms(NV, terms.into_iter().map(|(e, n, d)| (e, rational(n, d)))).unwrap()
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, NV)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn addition_is_commutative_and_associative(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a - &a, Polynomial::zero(NV));
    }

    #[test]
    fn multiplication_is_a_ring_product(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a * &Polynomial::one(NV), a.clone());
        prop_assert!((&a * &Polynomial::zero(NV)).is_zero());
    }

    #[test]
    fn derivative_satisfies_leibniz(a in poly(), b in poly(), v in 0usize..NV) {
        let lhs = (&a * &b).d(v);
        let rhs = &(&a.d(v) * &b) + &(&a * &b.d(v));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn mixed_partials_commute(a in poly()) {
        prop_assert_eq!(a.d(0).d(1), a.d(1).d(0));
    }

    #[test]
    fn print_then_parse_is_identity(a in poly()) {
        let text = a.format_with(&names());
        prop_assert_eq!(parse_expression(&text, &names()).unwrap(), a);
    }

    #[test]
    fn evaluation_is_multiplicative(a in poly(), b in poly(), x in point()) {
        let ab = (&a * &b).evaluate(&x).unwrap();
        let prod = a.evaluate(&x).unwrap() * b.evaluate(&x).unwrap();
        prop_assert!((ab - prod).abs() <= 1e-12 * (1.0 + ab.abs().max(prod.abs())));
    }

    #[test]
    fn compiled_matches_direct(a in poly(), x in point()) {
        let direct = a.evaluate(&x).unwrap();
        let compiled = CompiledPolynomial::new(&a).eval(&x);
        prop_assert!((direct - compiled).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn exact_evaluation_agrees(a in poly(), xs in prop::collection::vec((-4i64..=4, 1i64..=3), NV)) {
        let exact_point: Vec<_> = xs.iter().map(|&(n, d)| rational(n, d)).collect();
        let float_point: Vec<f64> = xs.iter().map(|&(n, d)| n as f64 / d as f64).collect();
        let exact = a.evaluate_exact(&exact_point).unwrap();
        let approx = a.evaluate(&float_point).unwrap();
        let e: f64 = rational_to_f64(&exact);
        prop_assert!((e - approx).abs() <= 1e-10 * (1.0 + e.abs()));
    }
}

fn rational_to_f64(r: &nijenhuis::exactpoly::Rational) -> f64 {
    let c = Polynomial::constant(1, r.clone());
    c.evaluate(&[0.0]).unwrap()
}

#[test]
fn grammar_examples() {
    let n = ["u1", "u2"];
    let f = parse_expression("u2 - 1/2*u1^2", &n).unwrap();
    assert_eq!(f.coefficient(&[0, 1]), rational(1, 1));
    assert_eq!(f.coefficient(&[2, 0]), rational(-1, 2));
    assert_eq!(f.len(), 2);
    assert_eq!(
        parse_expression("(u1 + u2)^2", &n).unwrap(),
        parse_expression("u1^2 + 2*u1*u2 + u2^2", &n).unwrap()
    );
}
