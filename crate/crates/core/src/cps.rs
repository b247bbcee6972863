//! Consistent price systems, arbitrage and superreplication as linear
//! programs on an event tree.
//!
//! A consistent price system is a pair of an equivalent measure `Q` and a
//! shadow price `S~` inside the bid-ask spread that is a `Q`-martingale.
//! Writing `Z` for the node masses of `Q` and `m = Z * S~`, the martingale
//! property becomes `m(node) = sum m(children)` and the spread condition
//! becomes `(1 - lambda) S Z <= m <= S Z`, so the whole set is a polytope in
//! `(Z, m)`.
//!
//! The strategy-side programs use, per node, the stock bought, the stock
//! sold and the bond thrown away (free disposal). The bond change is then
//! `(1 - lambda) S sell - S buy - disposal`, which is self-financing by
//! construction. The liquidation value `phi0 + min((1 - lambda) S phi1, S phi1)`
//! is concave in the holdings, so lower bounds on it are two linear rows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::market::{
    liquidation_value_with, node_masses, ConsistentPriceSystem, FiniteMarket, Location,
    PricingMeasure, TradingStrategy, Violation, EQUIVALENCE_TOL,
};

/// Existence threshold on the maximal minimum leaf weight.
pub const CPS_EXISTENCE_TOL: f64 = 1e-9;
/// Claims with a superreplication price at most this are attainable from
/// zero endowment.
pub const ATTAIN_TOL: f64 = 1e-9;

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1)")))
    }
}

fn check_claim(market: &FiniteMarket, claim: &[f64]) -> Result<()> {
    if claim.len() != market.tree.n_leaves() {
        return Err(Error::ShapeMismatch {
            expected: market.tree.n_leaves(),
            found: claim.len(),
        });
    }
    if claim.iter().any(|f| !f.is_finite()) {
        return Err(Error::InvalidParameter("claim values must be finite".into()));
    }
    Ok(())
}

/// LP over `(Z, m)` describing the closure of the consistent price systems
/// with leaf weights at least `floor`. Variable `i` is `Z(i)`, variable
/// `n + i` is `m(i)`; `extra` further variables follow.
pub(crate) fn cps_polytope(
    market: &FiniteMarket,
    lambda: f64,
    floor: f64,
    extra: usize,
    maximize: bool,
) -> LinearProgram {
    let tree = &market.tree;
    let n = tree.len();
    let mut lp = if maximize {
        LinearProgram::maximize(2 * n + extra)
    } else {
        LinearProgram::minimize(2 * n + extra)
    };
    lp.add_constraint([(tree.root(), 1.0)], Relation::Eq, 1.0);
    for id in 0..n {
        let children = tree.children(id);
        if !children.is_empty() {
            lp.add_constraint(
                std::iter::once((id, 1.0)).chain(children.iter().map(|&c| (c, -1.0))),
                Relation::Eq,
                0.0,
            );
            lp.add_constraint(
                std::iter::once((n + id, 1.0)).chain(children.iter().map(|&c| (n + c, -1.0))),
                Relation::Eq,
                0.0,
            );
        } else if floor > 0.0 {
            lp.set_bounds(id, floor, f64::INFINITY);
        }
        let s = market.price[id];
        lp.add_constraint([(n + id, 1.0), (id, -(1.0 - lambda) * s)], Relation::Ge, 0.0);
        lp.add_constraint([(n + id, 1.0), (id, -s)], Relation::Le, 0.0);
    }
    lp
}

/// Turns an LP point `(Z, m)` into a measure and a shadow price.
///
/// Leaf shadow prices are `m / Z` clipped into the spread; interior ones are
/// rebuilt as conditional expectations so the martingale property holds to
/// round-off. Nodes without mass get the ask price.
fn extract_cps(market: &FiniteMarket, lambda: f64, x: &[f64]) -> Result<ConsistentPriceSystem> {
    let tree = &market.tree;
    let n = tree.len();
    let raw: Vec<f64> = tree.leaves().iter().map(|&l| x[l].max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let measure = PricingMeasure::from_leaf_weights(tree, weights)?;
    let mut shadow = vec![0.0; n];
    for id in tree.topological_order().into_iter().rev() {
        let s = market.price[id];
        let z = measure.node_mass(id);
        shadow[id] = if z <= 0.0 {
            s
        } else if tree.is_leaf(id) {
            let zraw = x[id];
            let v = if zraw > 0.0 { x[n + id] / zraw } else { s };
            v.clamp((1.0 - lambda) * s, s)
        } else {
            tree.children(id)
                .iter()
                .map(|&c| measure.node_mass(c) / z * shadow[c])
                .sum()
        };
    }
    Ok(ConsistentPriceSystem::new_unchecked(measure, shadow))
}

/// Finds a consistent price system at cost `lambda`, maximizing the smallest
/// leaf weight. `None` when no equivalent one exists.
pub fn find_cps(market: &FiniteMarket, lambda: f64) -> Result<Option<ConsistentPriceSystem>> {
    market.ensure_valid()?;
    check_lambda(lambda)?;
    let tree = &market.tree;
    let n = tree.len();
    let t = 2 * n;
    let mut lp = cps_polytope(market, lambda, 0.0, 1, true);
    lp.set_bounds(t, 0.0, 1.0);
    lp.set_objective(t, 1.0);
    for &l in tree.leaves() {
        lp.add_constraint([(l, 1.0), (t, -1.0)], Relation::Ge, 0.0);
    }
    let sol = match lp.solve()? {
        LpStatus::Optimal(sol) => sol,
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => return Err(Error::Numerical("CPS program unbounded".into())),
    };
    if sol.x[t] <= CPS_EXISTENCE_TOL {
        return Ok(None);
    }
    let cps = extract_cps(market, lambda, &sol.x)?;
    let violations = cps.verify(market, lambda);
    if !violations.is_empty() {
        return Err(Error::Numerical(format!(
            "LP point does not yield a consistent price system: {}",
            violations[0]
        )));
    }
    Ok(Some(cps))
}

/// Column layout of the strategy programs: `buy(i) = i`, `sell(i) = n + i`,
/// `disposal(i) = 2n + i`.
struct StrategyVars {
    n: usize,
}

impl StrategyVars {
    fn count(&self) -> usize {
        3 * self.n
    }

    /// Coefficients of `phi0(leaf) + c * phi1(leaf)` in the trade variables.
    fn leaf_value(&self, market: &FiniteMarket, lambda: f64, leaf: usize, c: f64) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut out = Vec::new();
        for j in market.tree.path_to(leaf) {
            let s = market.price[j];
            out.push((j, c - s));
            out.push((n + j, (1.0 - lambda) * s - c));
            out.push((2 * n + j, -1.0));
        }
        out
    }

    fn strategy(&self, market: &FiniteMarket, lambda: f64, x: &[f64]) -> Result<TradingStrategy> {
        let n = self.n;
        let buy: Vec<f64> = x[..n].iter().map(|v| v.max(0.0)).collect();
        let sell: Vec<f64> = x[n..2 * n].iter().map(|v| v.max(0.0)).collect();
        let delta0: Vec<f64> = (0..n)
            .map(|i| {
                let s = market.price[i];
                (1.0 - lambda) * s * sell[i] - s * buy[i] - x[2 * n + i].max(0.0)
            })
            .collect();
        TradingStrategy::from_trades(&market.tree, buy, sell, delta0)
    }

    /// Adds `phi0(leaf) + c * phi1(leaf) + extra >= rhs` at both spread sides.
    fn add_leaf_floor(
        &self,
        lp: &mut LinearProgram,
        market: &FiniteMarket,
        lambda: f64,
        leaf: usize,
        extra: &[(usize, f64)],
        rhs: f64,
    ) {
        let s = market.price[leaf];
        for c in [(1.0 - lambda) * s, s] {
            let mut row = self.leaf_value(market, lambda, leaf, c);
            row.extend_from_slice(extra);
            lp.add_constraint(row, Relation::Ge, rhs);
        }
    }
}

/// Re-verifies an arbitrage strategy without the LP: self-financing,
/// nonnegative terminal liquidation value and expected terminal value
/// at least one.
pub fn verify_arbitrage(
    strategy: &TradingStrategy,
    market: &FiniteMarket,
    lambda: f64,
) -> Result<Vec<Violation>> {
    let mut out = strategy.check_self_financing(market, lambda);
    let v = liquidation_value_with(strategy, market, lambda)?;
    let tree = &market.tree;
    let mut expected = 0.0;
    for (k, &l) in tree.leaves().iter().enumerate() {
        if v[l] < -1e-9 {
            out.push(Violation {
                location: Location::Node(l),
                field: "terminal",
                message: format!("terminal liquidation value {} < 0", v[l]),
            });
        }
        expected += market.leaf_prob[k] * v[l];
    }
    if expected < 1.0 - 1e-9 {
        out.push(Violation {
            location: Location::Market,
            field: "terminal",
            message: format!("expected terminal value {expected} < 1"),
        });
    }
    Ok(out)
}

/// Searches for a zero-endowment self-financing strategy whose terminal
/// liquidation value is nonnegative with expectation at least one.
pub fn find_arbitrage(market: &FiniteMarket, lambda: f64) -> Result<Option<TradingStrategy>> {
    market.ensure_valid()?;
    check_lambda(lambda)?;
    let tree = &market.tree;
    let vars = StrategyVars { n: tree.len() };
    let base = vars.count();
    let n_leaves = tree.n_leaves();
    let mut lp = LinearProgram::minimize(base + n_leaves);
    for j in 0..base {
        lp.set_objective(j, 1.0);
    }
    for (k, &l) in tree.leaves().iter().enumerate() {
        // liquidation value >= w_k >= 0
        vars.add_leaf_floor(&mut lp, market, lambda, l, &[(base + k, -1.0)], 0.0);
    }
    lp.add_constraint(
        (0..n_leaves).map(|k| (base + k, market.leaf_prob[k])),
        Relation::Ge,
        1.0,
    );
    let sol = match lp.solve()? {
        LpStatus::Optimal(sol) => sol,
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => return Err(Error::Numerical("arbitrage program unbounded".into())),
    };
    let strategy = vars.strategy(market, lambda, &sol.x)?;
    let violations = verify_arbitrage(&strategy, market, lambda)?;
    if !violations.is_empty() {
        return Err(Error::Numerical(format!(
            "LP arbitrage fails re-verification: {}",
            violations[0]
        )));
    }
    Ok(Some(strategy))
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperrepResult {
    /// Maximum of `E_Q[f]` over the closed set of consistent price systems.
    pub dual_value: f64,
    /// Smallest initial bond holding from which `f` can be superreplicated.
    pub primal_value: f64,
    /// Strategy started from `(primal_value, 0)`; its holdings exclude the
    /// initial endowment.
    pub strategy: TradingStrategy,
    /// Dual optimizer. It may lie on the boundary (some leaf weights zero),
    /// so it need not pass [`ConsistentPriceSystem::verify`].
    pub witness: ConsistentPriceSystem,
}

impl SuperrepResult {
    pub fn duality_gap(&self) -> f64 {
        (self.dual_value - self.primal_value).abs()
    }
}

/// Superreplication price of `claim` (one value per leaf) by the primal
/// hedging program and the dual pricing program.
pub fn superreplicate(market: &FiniteMarket, lambda: f64, claim: &[f64]) -> Result<SuperrepResult> {
    market.ensure_valid()?;
    check_lambda(lambda)?;
    check_claim(market, claim)?;
    let tree = &market.tree;
    let n = tree.len();

    let mut dual = cps_polytope(market, lambda, 0.0, 0, true);
    for (k, &l) in tree.leaves().iter().enumerate() {
        dual.set_objective(l, claim[k]);
    }
    let dual_sol = match dual.solve()? {
        LpStatus::Optimal(sol) => sol,
        LpStatus::Infeasible => return Err(Error::ArbitrageUnbounded { lambda }),
        LpStatus::Unbounded => return Err(Error::Numerical("pricing program unbounded".into())),
    };

    let vars = StrategyVars { n };
    let x = vars.count();
    let mut primal = LinearProgram::minimize(x + 1);
    primal.set_free(x);
    primal.set_objective(x, 1.0);
    for (k, &l) in tree.leaves().iter().enumerate() {
        vars.add_leaf_floor(&mut primal, market, lambda, l, &[(x, 1.0)], claim[k]);
    }
    let primal_sol = match primal.solve()? {
        LpStatus::Optimal(sol) => sol,
        LpStatus::Unbounded => return Err(Error::ArbitrageUnbounded { lambda }),
        LpStatus::Infeasible => {
            return Err(Error::Numerical("hedging program infeasible".into()))
        }
    };

    Ok(SuperrepResult {
        dual_value: dual_sol.objective,
        primal_value: primal_sol.x[x],
        strategy: vars.strategy(market, lambda, &primal_sol.x)?,
        witness: extract_cps(market, lambda, &dual_sol.x)?,
    })
}

/// Disposes of the terminal surplus so the liquidation value equals `claim`.
fn dispose_surplus(
    mut strategy: TradingStrategy,
    market: &FiniteMarket,
    lambda: f64,
    claim: &[f64],
) -> Result<TradingStrategy> {
    let v = liquidation_value_with(&strategy, market, lambda)?;
    for (k, &l) in market.tree.leaves().iter().enumerate() {
        let surplus = (v[l] - claim[k]).max(0.0);
        strategy.delta0[l] -= surplus;
        strategy.phi0[l] -= surplus;
    }
    Ok(strategy)
}

/// A zero-endowment strategy whose terminal liquidation value is exactly
/// `claim`, if one exists.
pub fn attain_claim(
    market: &FiniteMarket,
    lambda: f64,
    claim: &[f64],
) -> Result<Option<TradingStrategy>> {
    match superreplicate(market, lambda, claim) {
        Ok(r) => {
            if r.dual_value > ATTAIN_TOL {
                return Ok(None);
            }
            dispose_surplus(r.strategy, market, lambda, claim).map(Some)
        }
        Err(Error::ArbitrageUnbounded { .. }) => {
            // Arbitrage makes every claim superreplicable from zero.
            let tree = &market.tree;
            let vars = StrategyVars { n: tree.len() };
            let mut lp = LinearProgram::minimize(vars.count());
            for j in 0..vars.count() {
                lp.set_objective(j, 1.0);
            }
            for (k, &l) in tree.leaves().iter().enumerate() {
                vars.add_leaf_floor(&mut lp, market, lambda, l, &[], claim[k]);
            }
            match lp.solve()? {
                LpStatus::Optimal(sol) => {
                    let s = vars.strategy(market, lambda, &sol.x)?;
                    dispose_surplus(s, market, lambda, claim).map(Some)
                }
                _ => Ok(None),
            }
        }
        Err(e) => Err(e),
    }
}

/// Interior node whose liquidation value dips below the terminal floor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchachFlag {
    pub strategy: usize,
    pub node: usize,
    pub value: f64,
    pub floor: f64,
}

/// For each strategy, flags interior nodes where the liquidation value is
/// below `-M`, with `M` the worst terminal loss. Requires a consistent price
/// system at every cost level of `lambda_grid`.
pub fn schach_scan(
    market: &FiniteMarket,
    lambda: f64,
    lambda_grid: &[f64],
    strategies: &[TradingStrategy],
) -> Result<Vec<SchachFlag>> {
    market.ensure_valid()?;
    check_lambda(lambda)?;
    for &l in lambda_grid {
        if find_cps(market, l)?.is_none() {
            return Err(Error::NoConsistentPriceSystem { lambda: l });
        }
    }
    let tree = &market.tree;
    let mut flags = Vec::new();
    for (i, s) in strategies.iter().enumerate() {
        let v = liquidation_value_with(s, market, lambda)?;
        let bound = -tree
            .leaves()
            .iter()
            .map(|&l| v[l])
            .fold(f64::INFINITY, f64::min);
        for id in 0..tree.len() {
            if !tree.is_leaf(id) && v[id] < -bound - 1e-9 {
                flags.push(SchachFlag {
                    strategy: i,
                    node: id,
                    value: v[id],
                    floor: -bound,
                });
            }
        }
    }
    Ok(flags)
}

/// Largest or smallest `Q(A)` over consistent price systems with leaf
/// weights at least [`EQUIVALENCE_TOL`]; `A` is given by outcome indices.
/// `None` when there is no such system.
pub fn extremal_probability(
    market: &FiniteMarket,
    lambda: f64,
    subset: &[usize],
    maximize: bool,
) -> Result<Option<f64>> {
    let tree = &market.tree;
    let mut lp = cps_polytope(market, lambda, EQUIVALENCE_TOL, 0, maximize);
    for &k in subset {
        lp.set_objective(tree.leaves()[k], 1.0);
    }
    match lp.solve()? {
        LpStatus::Optimal(sol) => Ok(Some(sol.objective.clamp(0.0, 1.0))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Numerical("probability program unbounded".into())),
    }
}

/// Node masses of a measure given as leaf weights; convenience for callers
/// building systems by hand.
pub fn masses(market: &FiniteMarket, leaf_weight: &[f64]) -> Vec<f64> {
    node_masses(&market.tree, leaf_weight)
}
