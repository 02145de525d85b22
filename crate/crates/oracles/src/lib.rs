//! Brute-force reference computations for the test suites.
//!
//! Everything here is computed by a route that shares no code path with the
//! library beyond the polynomial ring itself: torsion and brackets from Lie
//! brackets of explicit vector fields, the quadratic family from
//! Cayley–Hamilton reduction of scalar powers, characteristic polynomials
//! from the Leibniz expansion of `det(λ Id − L)`.

use nijenhuis::exactpoly::{rational, Polynomial};
use rand::Rng;

/// Square matrix of polynomials in row-major nested form, `m[k][j] = M^k_j`.
pub type Matrix = Vec<Vec<Polynomial>>;

fn nvars_of(m: &Matrix) -> usize {
    m[0][0].nvars()
}

/// Last row `(σ_n, …, σ_1)`, ones above the diagonal.
pub fn companion(sigma: &[Polynomial]) -> Matrix {
    let n = sigma.len();
    let nv = sigma[0].nvars();
    let mut m = vec![vec![Polynomial::zero(nv); n]; n];
    for (i, row) in m.iter_mut().enumerate().take(n - 1) {
        row[i + 1] = Polynomial::one(nv);
    }
    for j in 0..n {
        m[n - 1][j] = sigma[n - 1 - j].clone();
    }
    m
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let nv = nvars_of(a);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(Polynomial::zero(nv), |acc, s| &acc + &(&a[i][s] * &b[s][j])))
                .collect()
        })
        .collect()
}

/// `M v` for a vector field `v`.
pub fn apply(m: &Matrix, v: &[Polynomial]) -> Vec<Polynomial> {
    let nv = nvars_of(m);
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(Polynomial::zero(nv), |acc, (a, b)| &acc + &(a * b))
        })
        .collect()
}

/// `[X,Y]^a = X^c ∂_c Y^a − Y^c ∂_c X^a`.
pub fn lie_bracket(x: &[Polynomial], y: &[Polynomial]) -> Vec<Polynomial> {
    let n = x.len();
    let nv = x[0].nvars();
    (0..n)
        .map(|a| {
            (0..n).fold(Polynomial::zero(nv), |acc, c| {
                &(&acc + &(&x[c] * &y[a].d(c))) - &(&y[c] * &x[a].d(c))
            })
        })
        .collect()
}

fn add_fields(a: &[Polynomial], b: &[Polynomial]) -> Vec<Polynomial> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub_fields(a: &[Polynomial], b: &[Polynomial]) -> Vec<Polynomial> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `N_L(ξ,η) = [Lξ,Lη] − L[Lξ,η] − L[ξ,Lη] + L²[ξ,η]`.
pub fn torsion_on_fields(l: &Matrix, xi: &[Polynomial], eta: &[Polynomial]) -> Vec<Polynomial> {
    let lxi = apply(l, xi);
    let leta = apply(l, eta);
    let t1 = lie_bracket(&lxi, &leta);
    let t2 = apply(l, &lie_bracket(&lxi, eta));
    let t3 = apply(l, &lie_bracket(xi, &leta));
    let t4 = apply(l, &apply(l, &lie_bracket(xi, eta)));
    add_fields(&sub_fields(&sub_fields(&t1, &t2), &t3), &t4)
}

/// `⟨L,M⟩(ξ,η) = M[Lξ,η] + L[ξ,Mη] − [Lξ,Mη] − LM[ξ,η]`.
pub fn guiding_on_fields(
    l: &Matrix,
    m: &Matrix,
    xi: &[Polynomial],
    eta: &[Polynomial],
) -> Vec<Polynomial> {
    let lxi = apply(l, xi);
    let meta = apply(m, eta);
    let t1 = apply(m, &lie_bracket(&lxi, eta));
    let t2 = apply(l, &lie_bracket(xi, &meta));
    let t3 = lie_bracket(&lxi, &meta);
    let t4 = apply(l, &apply(m, &lie_bracket(xi, eta)));
    sub_fields(&sub_fields(&add_fields(&t1, &t2), &t3), &t4)
}

/// Coordinate field `∂_i` in `nvars` variables.
pub fn coordinate_field(n: usize, nvars: usize, i: usize) -> Vec<Polynomial> {
    (0..n)
        .map(|a| {
            if a == i {
                Polynomial::one(nvars)
            } else {
                Polynomial::zero(nvars)
            }
        })
        .collect()
}

/// `t[k][i][j] = N_L(∂_i, ∂_j)^k`.
pub fn torsion_by_brackets(l: &Matrix) -> Vec<Vec<Vec<Polynomial>>> {
    let n = l.len();
    let nv = nvars_of(l);
    let mut t = vec![vec![vec![Polynomial::zero(nv); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            let v = torsion_on_fields(l, &coordinate_field(n, nv, i), &coordinate_field(n, nv, j));
            for (k, c) in v.into_iter().enumerate() {
                t[k][i][j] = c;
            }
        }
    }
    t
}

/// Coefficients of `L^k` reduced modulo `λ^n = σ_1 λ^{n−1} + … + σ_n`,
/// indexed by the power of `L` (`out[e]` multiplies `L^e`, `e < n`).
pub fn cayley_hamilton_power(sigma: &[Polynomial], k: usize) -> Vec<Polynomial> {
    let n = sigma.len();
    let nv = sigma[0].nvars();
    let mut c = vec![Polynomial::zero(nv); n];
    c[0] = Polynomial::one(nv);
    for _ in 0..k {
        let top = c[n - 1].clone();
        let mut next = vec![Polynomial::zero(nv); n];
        next[1..n].clone_from_slice(&c[..(n - 1)]);
        for (m, s) in sigma.iter().enumerate() {
            // σ_{m+1} multiplies L^{n−1−m}.
            next[n - 1 - m] = &next[n - 1 - m] + &(&top * s);
        }
        c = next;
    }
    c
}

/// `h_1..h_n` in `2n` variables from `h_m = Σ_{i,j} p_i p_j [L^{n−m}] L^{i+j−2}`.
pub fn h_family_by_cayley_hamilton(sigma: &[Polynomial]) -> Vec<Polynomial> {
    let n = sigma.len();
    let lifted: Vec<Polynomial> = sigma.iter().map(|s| s.embed(2 * n, 0).unwrap()).collect();
    let mut h = vec![Polynomial::zero(2 * n); n];
    for i in 0..n {
        for j in 0..n {
            let pij =
                &Polynomial::var(2 * n, n + i).unwrap() * &Polynomial::var(2 * n, n + j).unwrap();
            let red = cayley_hamilton_power(&lifted, i + j);
            for m in 1..=n {
                h[m - 1] = &h[m - 1] + &(&pij * &red[n - m]);
            }
        }
    }
    h
}

/// Closed form for `n = 2`: `h_1 = 2 p_1 p_2 + σ_1 p_2²`, `h_2 = p_1² + σ_2 p_2²`.
pub fn h_family_n2(s1: &Polynomial, s2: &Polynomial) -> [Polynomial; 2] {
    let p1 = Polynomial::var(4, 2).unwrap();
    let p2 = Polynomial::var(4, 3).unwrap();
    let s1 = s1.embed(4, 0).unwrap();
    let s2 = s2.embed(4, 0).unwrap();
    let two = Polynomial::from_int(4, 2);
    [
        &(&two * &(&p1 * &p2)) + &(&s1 * &p2.pow(2)),
        &p1.pow(2) + &(&s2 * &p2.pow(2)),
    ]
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out.into_iter()
        .map(|p| {
            let mut inv = 0;
            for a in 0..n {
                for b in a + 1..n {
                    if p[a] > p[b] {
                        inv += 1;
                    }
                }
            }
            (p, if inv % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

/// Leibniz determinant.
pub fn det_leibniz(m: &Matrix) -> Polynomial {
    let n = m.len();
    let nv = nvars_of(m);
    permutations(n)
        .into_iter()
        .fold(Polynomial::zero(nv), |acc, (p, sign)| {
            let term = (0..n).fold(Polynomial::from_int(nv, sign), |t, r| &t * &m[r][p[r]]);
            &acc + &term
        })
}

/// `σ_1..σ_n` with `det(λ Id − L) = λ^n − Σ σ_k λ^{n−k}`, computed by
/// adjoining `λ` as an extra variable and expanding by Leibniz.
pub fn char_coefficients_leibniz(l: &Matrix) -> Vec<Polynomial> {
    let n = l.len();
    let nv = nvars_of(l);
    let lam = Polynomial::var(nv + 1, nv).unwrap();
    let shifted: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let e = -l[i][j].embed(nv + 1, 0).unwrap();
                    if i == j {
                        &e + &lam
                    } else {
                        e
                    }
                })
                .collect()
        })
        .collect();
    let chi = det_leibniz(&shifted);
    let split = chi.split_trailing(nv);
    (1..=n)
        .map(|k| {
            let key = vec![(n - k) as u32];
            let c = split
                .get(&key)
                .cloned()
                .unwrap_or_else(|| Polynomial::zero(nv));
            -c
        })
        .collect()
}

/// Random polynomial in `nvars` variables of total degree `≤ degree` with
/// small integer and half-integer coefficients; roughly half the monomials vanish.
pub fn random_polynomial<R: Rng>(rng: &mut R, nvars: usize, degree: u32) -> Polynomial {
    let mut terms = Vec::new();
    let mut exps = vec![0u32; nvars];
    loop {
        let d: u32 = exps.iter().sum();
        if d <= degree && rng.gen_bool(0.5) {
            let num = rng.gen_range(-3i64..=3);
            let den = if rng.gen_bool(0.25) { 2 } else { 1 };
            if num != 0 {
                terms.push((exps.clone(), rational(num, den)));
            }
        }
        // Odometer over exponent vectors with entries ≤ degree.
        let mut i = 0;
        loop {
            if i == nvars {
                return Polynomial::from_terms(nvars, terms).unwrap();
            }
            exps[i] += 1;
            if exps[i] <= degree {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
    }
}

/// `n` random coefficients over `u1..un`.
pub fn random_sigma<R: Rng>(rng: &mut R, n: usize, degree: u32) -> Vec<Polynomial> {
    (0..n).map(|_| random_polynomial(rng, n, degree)).collect()
}

/// Random polynomial vector field on `n` variables.
pub fn random_field<R: Rng>(rng: &mut R, n: usize, degree: u32) -> Vec<Polynomial> {
    (0..n).map(|_| random_polynomial(rng, n, degree)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(nv: usize, i: usize) -> Polynomial {
        Polynomial::var(nv, i).unwrap()
    }

    #[test]
    fn cayley_hamilton_n1() {
        let s = vec![var(1, 0)];
        assert_eq!(cayley_hamilton_power(&s, 3), vec![var(1, 0).pow(3)]);
    }

    #[test]
    fn lie_bracket_of_coordinate_fields() {
        let x = vec![var(2, 0), Polynomial::zero(2)];
        let y = vec![Polynomial::zero(2), var(2, 0)];
        // [u1 ∂_1, u1 ∂_2] = u1 ∂_2.
        assert_eq!(lie_bracket(&x, &y), vec![Polynomial::zero(2), var(2, 0)]);
    }

    #[test]
    fn leibniz_matches_cofactor_on_2x2() {
        let m = vec![
            vec![var(2, 0), Polynomial::from_int(2, 2)],
            vec![var(2, 1), Polynomial::from_int(2, 3)],
        ];
        let expected = &(&var(2, 0) * &Polynomial::from_int(2, 3))
            - &(&var(2, 1) * &Polynomial::from_int(2, 2));
        assert_eq!(det_leibniz(&m), expected);
    }
}
