//! Quantitative Halmos-Savage bounds on a finite outcome space.
//!
//! The convex set of measures is the hull of finitely many generators. Since
//! `Q(A)` is linear in `Q`, its maximum (minimum) over the hull is attained at
//! a generator, so the hypotheses can be checked by scanning generators over
//! every subset. The guaranteed mixture `Q_0` is found as the solution of a
//! max-min (min-max) program over simplex weights, solved by adding the most
//! violated subset as a cut until enumeration confirms optimality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::subsets::{argmin_by, check_outcomes, mask_sum, members, nonempty_masks};

const SUM_TOL: f64 = 1e-12;
const CUT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteMeasureFamily {
    p: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

fn check_probability(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!("{what} has a negative entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!("{what} sums to {s}")));
    }
    Ok(())
}

impl FiniteMeasureFamily {
    pub fn new(p: Vec<f64>, generators: Vec<Vec<f64>>) -> Result<Self> {
        check_outcomes(p.len())?;
        check_probability(&p, "reference measure")?;
        if generators.is_empty() {
            return Err(Error::InvalidParameter("family needs a generator".into()));
        }
        for (g, q) in generators.iter().enumerate() {
            if q.len() != p.len() {
                return Err(Error::ShapeMismatch {
                    expected: p.len(),
                    found: q.len(),
                });
            }
            check_probability(q, &format!("generator {g}"))?;
            if q.iter().zip(&p).any(|(&qi, &pi)| qi > 0.0 && pi == 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "generator {g} is not absolutely continuous"
                )));
            }
        }
        Ok(FiniteMeasureFamily { p, generators })
    }

    pub fn outcomes(&self) -> usize {
        self.p.len()
    }

    pub fn reference(&self) -> &[f64] {
        &self.p
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// The measure `sum_g w_g Q_g`.
    pub fn mixture(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.outcomes())
            .map(|i| {
                self.generators
                    .iter()
                    .zip(weights)
                    .map(|(q, w)| w * q[i])
                    .sum()
            })
            .collect()
    }

    pub fn with_generator(&self, q: Vec<f64>) -> Result<Self> {
        let mut gens = self.generators.clone();
        gens.push(q);
        Self::new(self.p.clone(), gens)
    }

    fn max_generator(&self, mask: u32) -> f64 {
        self.generators
            .iter()
            .map(|q| mask_sum(mask, q))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_generator(&self, mask: u32) -> f64 {
        self.generators
            .iter()
            .map(|q| mask_sum(mask, q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of a hypothesis check. The counterexample lists outcome indices
/// (0-based) of the first failing subset in mask order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HsCheck {
    pub holds: bool,
    pub counterexample: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HsCertificate {
    /// Mixture weights over the generators.
    pub weights: Vec<f64>,
    /// Achieved max-min (HS1) or min-max (HS2) value; infinite when no
    /// subset qualifies.
    pub value: f64,
    pub threshold: f64,
    /// Subset attaining `value` under the mixture.
    pub witness: Option<Vec<usize>>,
    pub pass: bool,
    pub qualifying_sets: usize,
}

fn check_params(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && delta > 0.0 && epsilon.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} and delta {delta} must be positive"
        )));
    }
    Ok(())
}

/// For every `A` with `P(A) > epsilon`, some generator has `Q(A) > delta`.
pub fn verify_hs1(family: &FiniteMeasureFamily, epsilon: f64, delta: f64) -> Result<HsCheck> {
    check_params(epsilon, delta)?;
    let p = family.reference();
    let bad = nonempty_masks(family.outcomes(), |m| {
        mask_sum(m, p) > epsilon && family.max_generator(m) <= delta
    });
    Ok(check_result(bad.first().copied()))
}

/// For every `A` with `P(A) < delta`, some generator has `Q(A) < epsilon`.
pub fn verify_hs2(family: &FiniteMeasureFamily, epsilon: f64, delta: f64) -> Result<HsCheck> {
    check_params(epsilon, delta)?;
    let p = family.reference();
    let bad = nonempty_masks(family.outcomes(), |m| {
        mask_sum(m, p) < delta && family.min_generator(m) >= epsilon
    });
    Ok(check_result(bad.first().copied()))
}

fn check_result(first_bad: Option<u32>) -> HsCheck {
    HsCheck {
        holds: first_bad.is_none(),
        counterexample: first_bad.map(members),
    }
}

/// Mixture maximizing the smallest mass of sets with `P(A) > 4 epsilon`;
/// passes when that mass exceeds `epsilon^2 delta / 2`.
pub fn hs1_find_q0(family: &FiniteMeasureFamily, epsilon: f64, delta: f64) -> Result<HsCertificate> {
    check_params(epsilon, delta)?;
    let p = family.reference();
    let threshold = epsilon * epsilon * delta / 2.0;
    let sets = nonempty_masks(family.outcomes(), |m| mask_sum(m, p) > 4.0 * epsilon);
    let cert = minimax(family, &sets, Sense::MaxMin)?;
    Ok(finish(cert, threshold, sets.len(), |v| v > threshold))
}

/// Mixture minimizing the largest mass of nonempty sets with
/// `P(A) < 2 epsilon delta`; passes when that mass is below `8 epsilon`.
pub fn hs2_find_q0(family: &FiniteMeasureFamily, epsilon: f64, delta: f64) -> Result<HsCertificate> {
    check_params(epsilon, delta)?;
    let p = family.reference();
    let threshold = 8.0 * epsilon;
    let sets = nonempty_masks(family.outcomes(), |m| mask_sum(m, p) < 2.0 * epsilon * delta);
    let cert = minimax(family, &sets, Sense::MinMax)?;
    Ok(finish(cert, threshold, sets.len(), |v| v < threshold))
}

fn finish(
    (weights, value, witness): (Vec<f64>, f64, Option<u32>),
    threshold: f64,
    qualifying_sets: usize,
    passes: impl Fn(f64) -> bool,
) -> HsCertificate {
    HsCertificate {
        weights,
        value,
        threshold,
        witness: witness.map(members),
        pass: witness.is_none() || passes(value),
        qualifying_sets,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    MaxMin,
    MinMax,
}

/// Solves `max_w min_A Q_w(A)` (or `min_w max_A`) over the given sets.
/// Returns the weights, the value re-evaluated by enumeration, and the
/// attaining set. With no sets the value is the empty min (`+inf`) or
/// empty max (`-inf`).
fn minimax(
    family: &FiniteMeasureFamily,
    sets: &[u32],
    sense: Sense,
) -> Result<(Vec<f64>, f64, Option<u32>)> {
    let g = family.generators().len();
    let uniform = vec![1.0 / g as f64; g];
    if sets.is_empty() {
        let empty = match sense {
            Sense::MaxMin => f64::INFINITY,
            Sense::MinMax => f64::NEG_INFINITY,
        };
        return Ok((uniform, empty, None));
    }
    // Orientation: always minimize `sign * Q_w(A)` over sets to find cuts.
    let sign = match sense {
        Sense::MaxMin => 1.0,
        Sense::MinMax => -1.0,
    };
    let worst = |w: &[f64]| {
        let q = family.mixture(w);
        let (i, v) = argmin_by(sets, |m| sign * mask_sum(m, &q)).expect("nonempty");
        (sets[i], sign * v)
    };

    let mut weights = uniform;
    let mut cuts: Vec<u32> = vec![worst(&weights).0];
    for _ in 0..=sets.len() {
        let s = g;
        let mut lp = match sense {
            Sense::MaxMin => LinearProgram::maximize(g + 1),
            Sense::MinMax => LinearProgram::minimize(g + 1),
        };
        lp.set_objective(s, 1.0);
        lp.add_constraint((0..g).map(|j| (j, 1.0)), Relation::Eq, 1.0);
        for &m in &cuts {
            let row = std::iter::once((s, 1.0))
                .chain((0..g).map(|j| (j, -mask_sum(m, &family.generators()[j]))));
            let rel = match sense {
                Sense::MaxMin => Relation::Le,
                Sense::MinMax => Relation::Ge,
            };
            lp.add_constraint(row, rel, 0.0);
        }
        let sol = match lp.solve()? {
            LpStatus::Optimal(sol) => sol,
            _ => return Err(Error::Numerical("minimax program not solvable".into())),
        };
        let mut w: Vec<f64> = sol.x[..g].iter().map(|v| v.max(0.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        weights = w;
        let level = sol.x[s];
        let (m, v) = worst(&weights);
        let violated = match sense {
            Sense::MaxMin => v < level - CUT_TOL,
            Sense::MinMax => v > level + CUT_TOL,
        };
        if !violated || cuts.contains(&m) {
            return Ok((weights, v, Some(m)));
        }
        cuts.push(m);
    }
    let (m, v) = worst(&weights);
    Ok((weights, v, Some(m)))
}
