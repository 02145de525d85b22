//! The quadratic family, its Gram matrices and the identities it satisfies,
//! checked against Cayley–Hamilton reduction and closed forms.

use nijenhuis::exactpoly::{parse_expression, u_names, Polynomial};
use nijenhuis::metric::{
    build_h_family, covariant_at, gram_matrix, pairwise_poisson_h, verify_gram_pattern,
    verify_lifted_identities,
};
use nijenhuis_oracles as oracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sigma(exprs: &[&str]) -> Vec<Polynomial> {
    let names = u_names(exprs.len());
    exprs
        .iter()
        .map(|e| parse_expression(e, &names).unwrap())
        .collect()
}

#[test]
fn family_matches_cayley_hamilton_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..40 {
        let n = 1 + case % 4;
        let s = oracle::random_sigma(&mut rng, n, 2);
        let h = build_h_family(&s).unwrap();
        let o = oracle::h_family_by_cayley_hamilton(&s);
        for (a, b) in h.iter().zip(&o) {
            assert_eq!(a.poly(), b);
        }
    }
}

#[test]
fn n2_family_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let s = oracle::random_sigma(&mut rng, 2, 2);
        let h = build_h_family(&s).unwrap();
        let [h1, h2] = oracle::h_family_n2(&s[0], &s[1]);
        assert_eq!(h[0].poly(), &h1);
        assert_eq!(h[1].poly(), &h2);
    }
}

#[test]
fn gram_pattern_and_unimodularity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let n = 1 + case % 4;
        let s = oracle::random_sigma(&mut rng, n, 2);
        let h = build_h_family(&s).unwrap();
        let g = gram_matrix(&h[0]).unwrap();
        let report = verify_gram_pattern(&g);
        assert!(report.holds && report.pattern_ok);
        let c = report
            .determinant
            .as_constant()
            .expect("constant determinant");
        assert!(
            c == Polynomial::from_int(1, 1).as_constant().unwrap()
                || c == Polynomial::from_int(1, -1).as_constant().unwrap()
        );
        assert_eq!(
            g.determinant(),
            oracle::det_leibniz(&to_matrix(g.as_field()))
        );
    }
}

fn to_matrix(m: &nijenhuis::operator::OperatorField) -> oracle::Matrix {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m.entry(i, j).clone()).collect())
        .collect()
}

#[test]
fn n2_and_n3_gram_shapes() {
    let s = sigma(&["u1", "u2"]);
    let g = gram_matrix(&build_h_family(&s).unwrap()[0]).unwrap();
    assert_eq!(g.entry(0, 0), &Polynomial::zero(2));
    assert_eq!(g.entry(0, 1), &Polynomial::one(2));
    assert_eq!(g.entry(1, 1), &s[0]);
    assert_eq!(g.determinant(), Polynomial::from_int(2, -1));

    let s3 = sigma(&["u1", "u2", "u3"]);
    let g3 = gram_matrix(&build_h_family(&s3).unwrap()[0]).unwrap();
    assert_eq!(g3.entry(1, 2), &s3[0]);
    assert_eq!(g3.entry(2, 2), &(&s3[0].pow(2) + &s3[1]));
    assert_eq!(g3.entry(0, 1), &Polynomial::zero(3));
}

#[test]
fn identities_on_nijenhuis_fixtures() {
    for s in [
        sigma(&["u1", "u2 - 1/2*u1^2"]),
        sigma(&["2", "-5"]),
        sigma(&["1/2", "3", "-1"]),
        sigma(&["1", "2", "3", "4"]),
    ] {
        let h = build_h_family(&s).unwrap();
        let lifted = verify_lifted_identities(&s, &h).unwrap();
        assert!(lifted.holds, "lifted failed for {s:?}");
        assert_eq!(lifted.nonzero().count(), 0);
        assert!(pairwise_poisson_h(&h).unwrap().all_zero());
    }
}

#[test]
fn identities_fail_on_x2() {
    let s = sigma(&["u1", "u2"]);
    let h = build_h_family(&s).unwrap();
    let lifted = verify_lifted_identities(&s, &h).unwrap();
    assert!(!lifted.holds);
    assert!(lifted.nonzero().count() > 0);
    let brackets = pairwise_poisson_h(&h).unwrap();
    assert!(!brackets.all_zero());
}

#[test]
fn covariant_metric_inverts_gram() {
    let s = sigma(&["u1", "u2 - 1/2*u1^2"]);
    let g = gram_matrix(&build_h_family(&s).unwrap()[0]).unwrap();
    let pt = [0.4, -1.2];
    let c = covariant_at(&g, &pt).unwrap();
    let gram = g.as_field().eval_at(&pt).unwrap();
    let id = &gram * &c.g;
    assert!((id - nalgebra::DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    // Central difference of the inverse along u1.
    let h = 1e-6;
    let gp = covariant_at(&g, &[pt[0] + h, pt[1]]).unwrap().g;
    let gm = covariant_at(&g, &[pt[0] - h, pt[1]]).unwrap().g;
    let fd = (gp - gm) / (2.0 * h);
    assert!((fd - &c.dg[0]).amax() < 1e-8);
}
