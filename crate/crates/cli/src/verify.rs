//! The `verify` report: every exact identity of the construction, the
//! seeded pointwise compatibility sweep, and their verdicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use nijenhuis::compat::{
    benenti_residual, coordinate_form_sweep, h2_relation_residual, self_adjoint_residual,
};
use nijenhuis::exactpoly::{phase_names, u_names};
use nijenhuis::hierarchy::{generating_identity_residuals, verify_commuting_integrals};
use nijenhuis::metric::{
    pairwise_poisson_h, verify_gram_pattern, verify_lifted_identities, PairwiseBrackets,
};
use nijenhuis::operator::{nijenhuis_torsion, OperatorField};

use crate::config::Problem;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub mode: String,
    pub verdict: String,
    /// `"0"` or the nonzero residual polynomials for symbolic checks; the
    /// largest sampled value for pointwise ones.
    pub residual: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub label: String,
    pub n: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub verdict: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == "pass")
    }

    pub fn failing(&self) -> impl Iterator<Item = &str> {
        self.checks
            .iter()
            .filter(|c| c.verdict != "pass")
            .map(|c| c.name.as_str())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.into()
}

fn symbolic(name: &str, nonzero: Vec<String>) -> Check {
    let ok = nonzero.is_empty();
    Check {
        name: name.into(),
        mode: "symbolic".into(),
        verdict: verdict(ok),
        residual: if ok {
            Value::from("0")
        } else {
            Value::from(nonzero.join("; "))
        },
        tolerance: None,
        points: None,
    }
}

fn operator_nonzero(prefix: &str, f: &OperatorField, names: &[String]) -> Vec<String> {
    let n = f.dim();
    let mut out = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let e = f.entry(r, c);
            if !e.is_zero() {
                out.push(format!(
                    "{prefix}[{}][{}] = {}",
                    r + 1,
                    c + 1,
                    e.format_with(names)
                ));
            }
        }
    }
    out
}

/// `{f_i, f_j} = …` for the nonzero pairs, with indices counted from `base`.
fn bracket_nonzero(name: &str, b: &PairwiseBrackets, names: &[String], base: usize) -> Vec<String> {
    b.nonzero()
        .map(|(i, j, f)| {
            format!(
                "{{{name}{},{name}{}}} = {}",
                i + base,
                j + base,
                f.poly().format_with(names)
            )
        })
        .collect()
}

/// Points drawn uniformly from the ball `|u| ≤ radius` by rejection.
pub fn sample_ball(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
            out.push(v);
        }
    }
    out
}

fn err(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

pub fn verify(problem: &Problem) -> Result<Report, CliError> {
    let sys = &problem.system;
    let n = sys.n();
    let un = u_names(n);
    let pn = phase_names(n);
    let mut checks = Vec::new();

    let torsion = nijenhuis_torsion(&sys.l);
    checks.push(symbolic(
        "torsion",
        torsion
            .nonzero()
            .into_iter()
            .map(|((k, i, j), v)| {
                format!("N^{}_{}{} = {}", k + 1, i + 1, j + 1, v.format_with(&un))
            })
            .collect(),
    ));

    let m2 = verify_gram_pattern(&sys.gram);
    let mut m2_res = Vec::new();
    if !m2.pattern_ok {
        m2_res.push("anti-triangular pattern violated".to_string());
    }
    if !m2.holds {
        m2_res.push(format!("det = {}", m2.determinant.format_with(&un)));
    }
    checks.push(symbolic("gram_pattern", m2_res));

    let lifted = verify_lifted_identities(&sys.sigma, &sys.h).map_err(err)?;
    checks.push(symbolic(
        "lifted_identities",
        lifted.nonzero().map(|p| p.format_with(&pn)).collect(),
    ));

    let hb = pairwise_poisson_h(&sys.h).map_err(err)?;
    checks.push(symbolic("poisson_h", bracket_nonzero("h", &hb, &pn, 1)));

    checks.push(symbolic(
        "self_adjoint",
        operator_nonzero("R", &self_adjoint_residual(&sys.gram, &sys.l), &un),
    ));
    let relation = h2_relation_residual(&sys.h, &sys.sigma).map_err(err)?;
    checks.push(symbolic(
        "h2_relation",
        operator_nonzero("R", &relation, &un),
    ));

    let ben = benenti_residual(&sys.h, &sys.sigma).map_err(err)?;
    checks.push(symbolic(
        "benenti",
        if ben.is_zero() {
            vec![]
        } else {
            vec![ben.poly().format_with(&pn)]
        },
    ));

    let sweep = problem.config.sweep;
    let points = sample_ball(n, sweep.points, sweep.radius, problem.config.seed);
    let c1 = coordinate_form_sweep(&sys.gram, &sys.l, &points, sweep.tolerance).map_err(err)?;
    let worst = match c1.residual {
        nijenhuis::compat::Residual::Pointwise(v) => v,
        nijenhuis::compat::Residual::Symbolic(_) => unreachable!("sweep is pointwise"),
    };
    checks.push(Check {
        name: "compatibility_sweep".into(),
        mode: "pointwise".into(),
        verdict: verdict(c1.verdict),
        residual: serde_json::Number::from_f64(worst).map_or(Value::Null, Value::Number),
        tolerance: Some(sweep.tolerance),
        points: Some(points.len()),
    });

    let gen = generating_identity_residuals(&sys.l, &sys.killing).map_err(err)?;
    let gen_res: Vec<String> = gen
        .iter()
        .enumerate()
        .flat_map(|(k, r)| operator_nonzero(&format!("lambda^{}", n - k), r, &un))
        .collect();
    checks.push(symbolic("generating_identity", gen_res));

    let comm = verify_commuting_integrals(&sys.integrals).map_err(err)?;
    checks.push(symbolic(
        "commutation",
        bracket_nonzero("F", &comm.brackets, &pn, 0),
    ));

    let ok = checks.iter().all(|c| c.verdict == "pass");
    Ok(Report {
        label: sys.label.clone(),
        n,
        seed: problem.config.seed,
        checks,
        verdict: verdict(ok),
    })
}

/// Entries of an operator as strings, row by row.
pub fn poly_rows(f: &OperatorField, names: &[String]) -> Vec<Vec<String>> {
    (0..f.dim())
        .map(|r| {
            (0..f.dim())
                .map(|c| f.entry(r, c).format_with(names))
                .collect()
        })
        .collect()
}
