//! Torsion, bracket and characteristic coefficients against the brute-force
//! vector-field and Leibniz oracles.

use nijenhuis::exactpoly::{parse_expression, u_names, Polynomial};
use nijenhuis::operator::{
    char_coefficients, companion_first, companion_second, guiding_bracket, is_gl_regular_at,
    nijenhuis_torsion, OperatorField,
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

fn to_matrix(l: &OperatorField) -> oracle::Matrix {
    (0..l.dim())
        .map(|i| (0..l.dim()).map(|j| l.entry(i, j).clone()).collect())
        .collect()
}

fn assert_torsion_matches(s: &[Polynomial]) {
    let l = companion_second(s).unwrap();
    let t = nijenhuis_torsion(&l);
    let o = oracle::torsion_by_brackets(&to_matrix(&l));
    let n = s.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                assert_eq!(t.component(k, i, j), &o[k][i][j], "component ({k},{i},{j})");
            }
        }
    }
}

#[test]
fn torsion_matches_bracket_oracle_on_fixtures() {
    assert_torsion_matches(&sigma(&["2", "-3"]));
    assert_torsion_matches(&sigma(&["u1", "u2 - 1/2*u1^2"]));
    assert_torsion_matches(&sigma(&["u1", "u2"]));
}

#[test]
fn fixture_torsion_values() {
    let e2 = companion_second(&sigma(&["u1", "u2 - 1/2*u1^2"])).unwrap();
    assert!(nijenhuis_torsion(&e2).is_zero());
    let x2 = companion_second(&sigma(&["u1", "u2"])).unwrap();
    let t = nijenhuis_torsion(&x2);
    let minus_u1 = -Polynomial::var(2, 0).unwrap();
    assert_eq!(t.component(1, 0, 1), &minus_u1);
    assert_eq!(t.component(1, 1, 0), &-minus_u1.clone());
    assert_eq!(t.nonzero().len(), 2);
}

#[test]
fn torsion_matches_oracle_on_random_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..24 {
        let n = 2 + case % 3;
        let s = oracle::random_sigma(&mut rng, n, 2);
        assert_torsion_matches(&s);
    }
}

#[test]
fn first_companion_torsion_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=3 {
        let s = oracle::random_sigma(&mut rng, n, 2);
        let l = companion_first(&s).unwrap();
        let t = nijenhuis_torsion(&l);
        let o = oracle::torsion_by_brackets(&to_matrix(&l));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(t.component(k, i, j), &o[k][i][j]);
                }
            }
        }
    }
}

/// `⟨L,M⟩` contracted with arbitrary polynomial fields equals the oracle's
/// bracket of those fields when `L` and `M` commute.
#[test]
fn guiding_bracket_is_tensorial_and_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let fixtures = [sigma(&["u1", "u2 - 1/2*u1^2"]), sigma(&["u1", "u2"])];
    for s in &fixtures {
        let l = companion_second(s).unwrap();
        let three = OperatorField::scalar(2, &Polynomial::from_int(2, 3));
        for m in [l.clone(), l.pow(2), l.add(&three).unwrap()] {
            let b = guiding_bracket(&l, &m).unwrap();
            for _ in 0..4 {
                let xi = oracle::random_field(&mut rng, 2, 2);
                let eta = oracle::random_field(&mut rng, 2, 2);
                let direct = oracle::guiding_on_fields(&to_matrix(&l), &to_matrix(&m), &xi, &eta);
                for (k, d) in direct.iter().enumerate() {
                    let mut contracted = Polynomial::zero(2);
                    for i in 0..2 {
                        for j in 0..2 {
                            contracted =
                                &contracted + &(&(&xi[i] * &eta[j]) * b.component(k, i, j));
                        }
                    }
                    assert_eq!(&contracted, d);
                }
            }
        }
    }
}

#[test]
fn self_bracket_is_minus_torsion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=3 {
        let s = oracle::random_sigma(&mut rng, n, 2);
        let l = companion_second(&s).unwrap();
        let b = guiding_bracket(&l, &l).unwrap();
        assert_eq!(b.negate(), nijenhuis_torsion(&l));
    }
}

#[test]
fn char_coefficients_match_leibniz() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let n = 1 + case % 4;
        let s = oracle::random_sigma(&mut rng, n, 2);
        let l = companion_second(&s).unwrap();
        assert_eq!(char_coefficients(&l), s);
        assert_eq!(oracle::char_coefficients_leibniz(&to_matrix(&l)), s);
        // A non-companion operator: both routes still agree.
        let m = l.mul(&l.transpose()).unwrap();
        assert_eq!(
            char_coefficients(&m),
            oracle::char_coefficients_leibniz(&to_matrix(&m))
        );
        assert_eq!(m.determinant(), oracle::det_leibniz(&to_matrix(&m)));
    }
}

#[test]
fn companion_forms_are_gl_regular() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=4 {
        let s = oracle::random_sigma(&mut rng, n, 2);
        let l = companion_second(&s).unwrap();
        let pt = vec![0.3; n];
        assert!(is_gl_regular_at(&l, &pt, 8).unwrap());
        assert!(is_gl_regular_at(&companion_first(&s).unwrap(), &pt, 8).unwrap());
    }
    assert!(!is_gl_regular_at(&OperatorField::identity(2, 2), &[0.0, 0.0], 8).unwrap());
}
