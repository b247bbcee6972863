//! Diagnostics over finite sequences of markets: ε–δ profiles of the sets
//! of consistent price systems, separating sets, convex mixing of price
//! systems, and the sequence report for the drifted Brownian example.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::cps::{extremal_probability, find_cps, superreplicate};
use crate::error::{Error, Result};
use crate::market::{ConsistentPriceSystem, FiniteMarket, PricingMeasure, EQUIVALENCE_TOL};
use crate::sde::{self, ClosedFormRow, ExampleSixParams};
use crate::subsets::{self, mask_sum, members};

/// Slack when comparing probabilities of sets against a level.
const LEVEL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct SequenceEntry {
    pub market: FiniteMarket,
    pub lambda: f64,
    pub label: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MarketSequence {
    entries: Vec<SequenceEntry>,
}

impl MarketSequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a market after validating it; at most
    /// [`MAX_OUTCOMES`](crate::subsets::MAX_OUTCOMES) leaves.
    pub fn push(&mut self, market: FiniteMarket, lambda: f64, label: impl Into<String>) -> Result<()> {
        market.ensure_valid()?;
        subsets::check_outcomes(market.tree.n_leaves())?;
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1)")));
        }
        self.entries.push(SequenceEntry {
            market,
            lambda,
            label: label.into(),
        });
        Ok(())
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FiniteMarket, f64, S)>,
        S: Into<String>,
    {
        let mut seq = Self::new();
        for (m, l, s) in entries {
            seq.push(m, l, s)?;
        }
        Ok(seq)
    }

    pub fn entries(&self) -> &[SequenceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mixes consistent price systems of one market:
/// `Z = sum a_m Z^m` and `S~ = sum a_m S~^m Z^m / Z`.
pub fn mix_cps(
    market: &FiniteMarket,
    lambda: f64,
    cps: &[ConsistentPriceSystem],
    weights: &[f64],
) -> Result<ConsistentPriceSystem> {
    let tree = &market.tree;
    if cps.is_empty() || cps.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} price systems but {} weights",
            cps.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
    }
    for c in cps {
        if c.shadow.len() != tree.len() || c.measure.leaf_weights().len() != tree.n_leaves() {
            return Err(Error::ShapeMismatch {
                expected: tree.len(),
                found: c.shadow.len(),
            });
        }
    }
    let leaf: Vec<f64> = (0..tree.n_leaves())
        .map(|k| {
            cps.iter()
                .zip(weights)
                .map(|(c, a)| a * c.measure.leaf_weights()[k])
                .sum()
        })
        .collect();
    let measure = PricingMeasure::from_leaf_weights(tree, leaf)?;
    let shadow = (0..tree.len())
        .map(|id| {
            let z = measure.node_mass(id);
            let m: f64 = cps
                .iter()
                .zip(weights)
                .map(|(c, a)| a * c.shadow[id] * c.measure.node_mass(id))
                .sum();
            if z > 0.0 {
                m / z
            } else {
                market.price[id]
            }
        })
        .collect();
    ConsistentPriceSystem::new(market, lambda, measure, shadow)
}

/// `P(A)` together with the range of `Q(A)` over the consistent price
/// systems, for every subset `A` of the outcomes (index = bit mask).
#[derive(Clone, Debug)]
struct SubsetTable {
    p: Vec<f64>,
    q_max: Vec<f64>,
    q_min: Vec<f64>,
}

impl SubsetTable {
    fn build(entry: &SequenceEntry) -> Result<Self> {
        let market = &entry.market;
        if find_cps(market, entry.lambda)?.is_none() {
            return Err(Error::NoConsistentPriceSystem {
                lambda: entry.lambda,
            });
        }
        let k = market.tree.n_leaves();
        let full = 1u32 << k;
        let extremes: Vec<(f64, f64)> = (0..full)
            .into_par_iter()
            .map(|mask| {
                if mask == 0 {
                    return Ok((0.0, 0.0));
                }
                let set = members(mask);
                let hi = extremal_probability(market, entry.lambda, &set, true)?;
                let lo = extremal_probability(market, entry.lambda, &set, false)?;
                match (hi, lo) {
                    (Some(h), Some(l)) => Ok((h, l)),
                    _ => Err(Error::NoConsistentPriceSystem {
                        lambda: entry.lambda,
                    }),
                }
            })
            .collect::<Result<_>>()?;
        Ok(SubsetTable {
            p: (0..full).map(|m| mask_sum(m, &market.leaf_prob)).collect(),
            q_max: extremes.iter().map(|e| e.0).collect(),
            q_min: extremes.iter().map(|e| e.1).collect(),
        })
    }
}

fn tables(seq: &MarketSequence) -> Result<Vec<SubsetTable>> {
    if seq.is_empty() {
        return Err(Error::InvalidParameter("empty market sequence".into()));
    }
    seq.entries().iter().map(SubsetTable::build).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `min { max_Q Q(A) : P(A) >= eps }`.
    Sup,
    /// `min { P(A) : min_Q Q(A) >= eps }`, capped at 1.
    Inf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub delta: f64,
    /// The set attaining `delta` (outcome indices); empty when the level is
    /// vacuous.
    pub set: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContiguityProfile {
    pub kind: ProfileKind,
    pub epsilons: Vec<f64>,
    /// `points[n][j]` is market `n` at `epsilons[j]`.
    pub points: Vec<Vec<ProfilePoint>>,
    /// Minimum over the sequence, per epsilon.
    pub infimum: Vec<f64>,
}

impl ContiguityProfile {
    fn assemble(kind: ProfileKind, epsilons: &[f64], points: Vec<Vec<ProfilePoint>>) -> Self {
        let infimum = (0..epsilons.len())
            .map(|j| points.iter().map(|row| row[j].delta).fold(f64::INFINITY, f64::min))
            .collect();
        ContiguityProfile {
            kind,
            epsilons: epsilons.to_vec(),
            points,
            infimum,
        }
    }

    pub fn delta(&self, n: usize, j: usize) -> f64 {
        self.points[n][j].delta
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("epsilons must be positive".into()));
    }
    Ok(())
}

fn sup_point(t: &SubsetTable, eps: f64) -> ProfilePoint {
    let best = (1..t.p.len())
        .filter(|&m| t.p[m] >= eps - LEVEL_TOL)
        .min_by(|&a, &b| t.q_max[a].total_cmp(&t.q_max[b]).then(a.cmp(&b)));
    match best {
        Some(m) => ProfilePoint {
            delta: t.q_max[m],
            set: members(m as u32),
        },
        None => ProfilePoint {
            delta: f64::INFINITY,
            set: Vec::new(),
        },
    }
}

fn inf_point(t: &SubsetTable, eps: f64) -> ProfilePoint {
    let offending = (1..t.p.len())
        .filter(|&m| t.q_min[m] >= eps - LEVEL_TOL)
        .min_by(|&a, &b| t.p[a].total_cmp(&t.p[b]).then(a.cmp(&b)));
    match offending {
        Some(m) => ProfilePoint {
            delta: t.p[m].min(1.0),
            set: members(m as u32),
        },
        None => ProfilePoint {
            delta: 1.0,
            set: Vec::new(),
        },
    }
}

/// For each market, the smallest achievable `max_Q Q(A)` over sets with
/// `P(A) >= eps`. A level above 1 is vacuous and records `+inf`.
pub fn sup_profile(seq: &MarketSequence, epsilons: &[f64]) -> Result<ContiguityProfile> {
    check_epsilons(epsilons)?;
    let points = tables(seq)?
        .iter()
        .map(|t| epsilons.iter().map(|&e| sup_point(t, e)).collect())
        .collect();
    Ok(ContiguityProfile::assemble(ProfileKind::Sup, epsilons, points))
}

/// For each market, the largest `delta` such that every set with
/// `P(A) < delta` has `min_Q Q(A) < eps`.
pub fn inf_profile(seq: &MarketSequence, epsilons: &[f64]) -> Result<ContiguityProfile> {
    check_epsilons(epsilons)?;
    let points = tables(seq)?
        .iter()
        .map(|t| epsilons.iter().map(|&e| inf_point(t, e)).collect())
        .collect();
    Ok(ContiguityProfile::assemble(ProfileKind::Inf, epsilons, points))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparatingSet {
    pub set: Vec<usize>,
    pub p: f64,
    pub q_max: f64,
}

/// For each market, the set of largest `P`-probability among those with
/// `max_Q Q(A) <= eta` (the empty set if nothing else qualifies).
pub fn separability_scan(seq: &MarketSequence, eta: f64) -> Result<Vec<SeparatingSet>> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} must be nonnegative")));
    }
    Ok(tables(seq)?
        .iter()
        .map(|t| {
            let best = (1..t.p.len())
                .filter(|&m| t.q_max[m] <= eta + LEVEL_TOL)
                .max_by(|&a, &b| t.p[a].total_cmp(&t.p[b]).then(b.cmp(&a)));
            match best {
                Some(m) => SeparatingSet {
                    set: members(m as u32),
                    p: t.p[m],
                    q_max: t.q_max[m],
                },
                None => SeparatingSet {
                    set: Vec::new(),
                    p: 0.0,
                    q_max: 0.0,
                },
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaLCertificate {
    pub set: Vec<usize>,
    pub delta: f64,
    /// `1/sqrt(delta)` on the set, `-2 sqrt(delta)` off it.
    pub payoff: Vec<f64>,
    /// Supremum of `E_Q[payoff]` over the consistent price systems.
    pub dual_value: f64,
    pub primal_value: f64,
    pub holds: bool,
}

/// The claim `1_A / sqrt(delta) - 2 sqrt(delta) 1_{A^c}` and its
/// superreplication price. When every consistent price system gives `A`
/// mass at most `delta <= 1/2`, the price is at most zero: the claim can be
/// reached from nothing, loses at most `2 sqrt(delta)` and pays
/// `1/sqrt(delta)` on `A`.
pub fn lemma_l_certificate(
    market: &FiniteMarket,
    lambda: f64,
    set: &[usize],
    delta: f64,
) -> Result<LemmaLCertificate> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1]")));
    }
    let k = market.tree.n_leaves();
    if set.iter().any(|&i| i >= k) {
        return Err(Error::InvalidParameter("set index out of range".into()));
    }
    let root = delta.sqrt();
    let payoff: Vec<f64> = (0..k)
        .map(|i| if set.contains(&i) { 1.0 / root } else { -2.0 * root })
        .collect();
    let r = superreplicate(market, lambda, &payoff)?;
    Ok(LemmaLCertificate {
        set: set.to_vec(),
        delta,
        holds: r.dual_value <= 1e-9,
        dual_value: r.dual_value,
        primal_value: r.primal_value,
        payoff,
    })
}

/// Certificates for every market and level where the sup-profile is at or
/// below `threshold` (which must not exceed 1/2).
pub fn lemma_l_scan(
    seq: &MarketSequence,
    profile: &ContiguityProfile,
    threshold: f64,
) -> Result<Vec<(usize, f64, LemmaLCertificate)>> {
    if profile.kind != ProfileKind::Sup || profile.points.len() != seq.len() {
        return Err(Error::InvalidParameter("expected the sup-profile of this sequence".into()));
    }
    if !(threshold > 0.0 && threshold <= 0.5) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} outside (0, 1/2]")));
    }
    let mut out = Vec::new();
    for (n, row) in profile.points.iter().enumerate() {
        for (j, pt) in row.iter().enumerate() {
            if pt.delta <= threshold && !pt.set.is_empty() {
                let e = &seq.entries()[n];
                let delta = pt.delta.max(EQUIVALENCE_TOL);
                let cert = lemma_l_certificate(&e.market, e.lambda, &pt.set, delta)?;
                out.push((n, profile.epsilons[j], cert));
            }
        }
    }
    Ok(out)
}

/// How the cost level of each market in the sequence report is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum LambdaRule {
    Zero,
    ThresholdMultiple(f64),
    Fixed(f64),
}

impl LambdaRule {
    pub fn lambda_for(&self, params: &ExampleSixParams) -> Result<f64> {
        let l = match *self {
            LambdaRule::Zero => 0.0,
            LambdaRule::ThresholdMultiple(k) => k * sde::lambda_threshold(params),
            LambdaRule::Fixed(l) => l,
        };
        if (0.0..1.0).contains(&l) {
            Ok(l)
        } else {
            Err(Error::InvalidParameter(format!(
                "rule {self} gives lambda {l} outside [0, 1)"
            )))
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown lambda rule '{s}'"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        match s.trim().split_once(':') {
            None if s.trim() == "zero" => Ok(LambdaRule::Zero),
            Some(("threshold_multiple", v)) => {
                let k = num(v)?;
                if k > 0.0 && k.is_finite() {
                    Ok(LambdaRule::ThresholdMultiple(k))
                } else {
                    Err(bad())
                }
            }
            Some(("fixed", v)) => {
                let l = num(v)?;
                if (0.0..1.0).contains(&l) {
                    Ok(LambdaRule::Fixed(l))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Zero => write!(f, "zero"),
            LambdaRule::ThresholdMultiple(k) => write!(f, "threshold_multiple:{k}"),
            LambdaRule::Fixed(l) => write!(f, "fixed:{l}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub grid_points: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            seed: 42,
            grid_points: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExampleSixRow {
    pub n: usize,
    pub params: ExampleSixParams,
    pub closed: ClosedFormRow,
    /// `|zeta_limit - zeta_n|`.
    pub zeta_gap: f64,
    pub mc: sde::TerminalEstimates,
}

impl ExampleSixRow {
    /// The scaled modified price stays in the spread on the grid.
    pub fn cps_certified(&self) -> bool {
        self.closed.containment_margin > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdicts {
    /// `P(A_n)` strictly increasing and `Q(A_n)` strictly decreasing.
    pub separating: bool,
    /// `zeta_n <= e^2` at every row.
    pub zeta_bounded: bool,
    /// Positive containment margin at every row.
    pub contained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceReport {
    pub rule: LambdaRule,
    pub config: McConfig,
    pub rows: Vec<ExampleSixRow>,
    pub verdicts: Verdicts,
}

/// Closed forms and Monte Carlo estimates for each parameter set, with the
/// cost level chosen by `rule`. Every row uses the same seed.
pub fn section6_report(
    params_list: &[ExampleSixParams],
    rule: LambdaRule,
    config: McConfig,
) -> Result<SequenceReport> {
    if params_list.is_empty() {
        return Err(Error::InvalidParameter("no parameter sets".into()));
    }
    let limit = sde::zeta_limit();
    let rows = params_list
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let params = p.with_lambda(rule.lambda_for(p)?)?;
            let closed = ClosedFormRow::compute(&params, config.grid_points)?;
            Ok(ExampleSixRow {
                n: i + 1,
                params,
                closed,
                zeta_gap: (limit - closed.zeta_n).abs(),
                mc: sde::mc_terminal(&params, config.n_paths, config.seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e2 = std::f64::consts::E.powi(2);
    let verdicts = Verdicts {
        separating: rows.windows(2).all(|w| {
            w[1].closed.pa_closed > w[0].closed.pa_closed
                && w[1].closed.qa_closed < w[0].closed.qa_closed
        }),
        zeta_bounded: rows.iter().all(|r| r.closed.zeta_n <= e2),
        contained: rows.iter().all(ExampleSixRow::cps_certified),
    };
    Ok(SequenceReport {
        rule,
        config,
        rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{ConsistentPriceSystem, PricingMeasure};
    use approx::assert_abs_diff_eq;

    fn binomial(lambda: f64) -> FiniteMarket {
        FiniteMarket::one_period(1.0, 2.0, 0.5, 0.5, 0.5, lambda)
    }

    fn single(lambda: f64) -> MarketSequence {
        MarketSequence::from_entries([(binomial(lambda), lambda, "b")]).unwrap()
    }

    #[test]
    fn sup_profile_of_complete_binomial() {
        let p = sup_profile(&single(0.0), &[0.4, 1.5]).unwrap();
        assert_abs_diff_eq!(p.delta(0, 0), 1.0 / 3.0, epsilon = 1e-9);
        assert_eq!(p.points[0][0].set, vec![0]);
        assert_eq!(p.delta(0, 1), f64::INFINITY);
        assert_eq!(p.infimum[0], p.delta(0, 0));
    }

    #[test]
    fn inf_profile_of_complete_binomial() {
        let p = inf_profile(&single(0.0), &[0.4, 1.0]).unwrap();
        assert_abs_diff_eq!(p.delta(0, 0), 0.5, epsilon = 1e-12);
        assert_eq!(p.points[0][0].set, vec![1]);
        assert_abs_diff_eq!(p.delta(0, 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_spread_saturates_sup_profile() {
        let p = sup_profile(&single(0.9), &[0.4]).unwrap();
        assert!(p.delta(0, 0) > 1.0 - 1e-8);
    }

    #[test]
    fn inf_profile_grows_with_lambda() {
        let a = inf_profile(&single(0.0), &[0.3, 0.5, 0.7]).unwrap();
        let b = inf_profile(&single(0.3), &[0.3, 0.5, 0.7]).unwrap();
        for j in 0..3 {
            assert!(b.delta(0, j) >= a.delta(0, j));
        }
    }

    #[test]
    fn separability_examples() {
        let s = single(0.0);
        let r = separability_scan(&s, 0.34).unwrap();
        assert_eq!(r[0].set, vec![0]);
        assert_abs_diff_eq!(r[0].p, 0.5, epsilon = 1e-15);
        let all = separability_scan(&s, 1.0).unwrap();
        assert_eq!(all[0].set, vec![0, 1]);
        assert_abs_diff_eq!(all[0].p, 1.0, epsilon = 1e-15);
        let none = separability_scan(&s, 0.0).unwrap();
        assert!(none[0].set.is_empty());
        assert_eq!(none[0].p, 0.0);
    }

    #[test]
    fn profiles_need_a_cps() {
        // both prices above the start: arbitrage at any small cost
        let m = FiniteMarket::one_period(1.0, 2.0, 1.5, 0.5, 0.5, 0.0);
        let s = MarketSequence::from_entries([(m, 0.0, "arb")]).unwrap();
        assert!(matches!(
            sup_profile(&s, &[0.5]),
            Err(Error::NoConsistentPriceSystem { .. })
        ));
    }

    fn handmade(market: &FiniteMarket) -> ConsistentPriceSystem {
        // q = 1/3 on the up leaf, shadow (1, 1.2, 0.9)
        let m = PricingMeasure::from_leaf_weights(&market.tree, vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        ConsistentPriceSystem::new(market, 0.4, m, vec![1.0, 1.2, 0.9]).unwrap()
    }

    #[test]
    fn mixing_degenerate_weights() {
        let market = FiniteMarket::one_period(1.0, 2.0, 1.5, 0.5, 0.5, 0.4);
        let a = handmade(&market);
        let b = find_cps(&market, 0.4).unwrap().unwrap();
        let m = mix_cps(&market, 0.4, &[a.clone(), b.clone()], &[1.0, 0.0]).unwrap();
        assert_eq!(m.measure.leaf_weights(), a.measure.leaf_weights());
        for (x, y) in m.shadow.iter().zip(&a.shadow) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        let same = mix_cps(&market, 0.4, &[a.clone(), a.clone()], &[0.3, 0.7]).unwrap();
        for (x, y) in same.shadow.iter().zip(&a.shadow) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
        let half = mix_cps(&market, 0.4, &[a, b], &[0.5, 0.5]).unwrap();
        assert!(half.verify(&market, 0.4).is_empty());
    }

    #[test]
    fn mixing_rejects_bad_weights() {
        let market = FiniteMarket::one_period(1.0, 2.0, 1.5, 0.5, 0.5, 0.4);
        let a = handmade(&market);
        assert!(mix_cps(&market, 0.4, &[a.clone()], &[0.9]).is_err());
        assert!(mix_cps(&market, 0.4, &[a.clone(), a.clone()], &[1.5, -0.5]).is_err());
        assert!(mix_cps(&market, 0.4, &[a], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn lemma_l_payoff_is_free_when_set_is_small() {
        // Q(up) is at most 1/3 + small for lambda = 0.01
        let m = binomial(0.01);
        let s = MarketSequence::from_entries([(m.clone(), 0.01, "b")]).unwrap();
        let p = sup_profile(&s, &[0.5]).unwrap();
        let delta = p.delta(0, 0);
        assert!(delta < 0.5);
        let c = lemma_l_certificate(&m, 0.01, &p.points[0][0].set, delta).unwrap();
        assert!(c.holds, "{c:?}");
        assert!(c.dual_value <= 0.0);
        let scan = lemma_l_scan(&s, &p, 0.5).unwrap();
        assert_eq!(scan.len(), 1);
    }

    #[test]
    fn lambda_rule_parsing() {
        assert_eq!("zero".parse::<LambdaRule>().unwrap(), LambdaRule::Zero);
        assert_eq!(
            "threshold_multiple:1.01".parse::<LambdaRule>().unwrap(),
            LambdaRule::ThresholdMultiple(1.01)
        );
        assert_eq!("fixed:0.3".parse::<LambdaRule>().unwrap(), LambdaRule::Fixed(0.3));
        assert!("fixed:1.3".parse::<LambdaRule>().is_err());
        assert!("sometimes".parse::<LambdaRule>().is_err());
        let r = LambdaRule::ThresholdMultiple(1.01);
        assert_eq!(r.to_string().parse::<LambdaRule>().unwrap(), r);
    }

    fn params(ts: &[f64]) -> Vec<ExampleSixParams> {
        ts.iter()
            .map(|&t| ExampleSixParams::new(t, 0.5, 0.4, 0.0).unwrap())
            .collect()
    }

    #[test]
    fn report_rules() {
        let cfg = McConfig {
            n_paths: 2000,
            seed: 1,
            grid_points: 1000,
        };
        let zero = section6_report(&params(&[2.0, 4.0, 8.0, 16.0]), LambdaRule::Zero, cfg).unwrap();
        assert!(zero.verdicts.separating);
        assert!(zero.rows.iter().all(|r| r.params.lambda() == 0.0));
        let above = section6_report(
            &params(&[2.0, 4.0, 8.0, 16.0]),
            LambdaRule::ThresholdMultiple(1.01),
            cfg,
        )
        .unwrap();
        assert!(above.verdicts.contained && above.verdicts.zeta_bounded);
        let fixed = section6_report(&params(&[2.0]), LambdaRule::Fixed(0.3), cfg).unwrap();
        assert!(fixed.rows[0].cps_certified());
        assert!(fixed.rows[0].closed.lambda_threshold < 0.3);
        assert!(section6_report(&[], LambdaRule::Zero, cfg).is_err());
    }
}
