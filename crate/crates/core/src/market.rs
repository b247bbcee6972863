//! Finite event-tree markets with one bond (normalized to 1) and one stock.
//!
//! Nodes are indexed densely from 0 with the root at time 0. The children of
//! a node are the atoms of the next-period partition that refine it, so the
//! tree carries the filtration; the leaves are the outcomes of the sample
//! space, ordered by node id.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest tree accepted by [`validate_market`].
pub const MAX_NODES: usize = 1 << 16;
/// Leaf probabilities must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Smallest leaf weight a measure may carry and still count as equivalent.
pub const EQUIVALENCE_TOL: f64 = 1e-9;
/// Tolerance of the bid-ask containment check on shadow prices.
pub const CONTAINMENT_TOL: f64 = 1e-10;
/// Tolerance of the martingale residual check on shadow prices.
pub const MARTINGALE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub parent: Option<usize>,
    pub time: usize,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventTree {
    horizon: usize,
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    /// node id -> leaf index, for leaves only.
    leaf_index: Vec<Option<usize>>,
}

impl EventTree {
    /// Builds a tree from parent pointers and time indices. Only referential
    /// integrity is checked here; the structural invariants are reported by
    /// [`validate_market`].
    pub fn new(horizon: usize, parents: &[Option<usize>], times: &[usize]) -> Result<Self> {
        if parents.len() != times.len() {
            return Err(Error::ShapeMismatch {
                expected: parents.len(),
                found: times.len(),
            });
        }
        let n = parents.len();
        let mut nodes: Vec<Node> = parents
            .iter()
            .zip(times)
            .map(|(&parent, &time)| Node {
                parent,
                time,
                children: Vec::new(),
            })
            .collect();
        for (id, parent) in parents.iter().enumerate() {
            if let Some(p) = *parent {
                if p >= n || p == id {
                    return Err(Error::Parse(format!("node {id} has invalid parent {p}")));
                }
                nodes[p].children.push(id);
            }
        }
        let leaves: Vec<usize> = (0..n).filter(|&i| nodes[i].children.is_empty()).collect();
        let mut leaf_index = vec![None; n];
        for (k, &l) in leaves.iter().enumerate() {
            leaf_index[l] = Some(k);
        }
        Ok(EventTree {
            horizon,
            nodes,
            leaves,
            leaf_index,
        })
    }

    /// Complete tree with `branching` children per node, breadth-first ids.
    pub fn uniform(branching: usize, depth: usize) -> Self {
        let mut parents = vec![None];
        let mut times = vec![0];
        let mut frontier = vec![0usize];
        for t in 1..=depth {
            let mut next = Vec::new();
            for &p in &frontier {
                for _ in 0..branching {
                    next.push(parents.len());
                    parents.push(Some(p));
                    times.push(t);
                }
            }
            frontier = next;
        }
        EventTree::new(depth, &parents, &times).expect("uniform tree is well formed")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaf node ids in outcome order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_index(&self, id: usize) -> Option<usize> {
        self.leaf_index[id]
    }

    pub fn root(&self) -> usize {
        self.nodes
            .iter()
            .position(|n| n.parent.is_none())
            .unwrap_or(0)
    }

    /// Node ids ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack: Vec<usize> = (0..self.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect();
        stack.reverse();
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        order
    }

    /// Root-to-node path, root first.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
            if path.len() > self.len() {
                break;
            }
        }
        path.reverse();
        path
    }

    /// Leaf indices below `id` (a leaf is below itself).
    pub fn leaves_below(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            match self.leaf_index[n] {
                Some(k) => out.push(k),
                None => stack.extend(&self.nodes[n].children),
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteMarket {
    pub tree: EventTree,
    /// Objective probability per leaf, in outcome order.
    pub leaf_prob: Vec<f64>,
    /// Stock price per node.
    pub price: Vec<f64>,
    pub lambda: f64,
}

impl FiniteMarket {
    pub fn new(tree: EventTree, leaf_prob: Vec<f64>, price: Vec<f64>, lambda: f64) -> Self {
        FiniteMarket {
            tree,
            leaf_prob,
            price,
            lambda,
        }
    }

    /// One-period market with root price `s0`, up/down prices and
    /// probabilities. Leaf 0 is the up state.
    pub fn one_period(s0: f64, up: f64, down: f64, p_up: f64, p_down: f64, lambda: f64) -> Self {
        let tree = EventTree::uniform(2, 1);
        FiniteMarket::new(tree, vec![p_up, p_down], vec![s0, up, down], lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        FiniteMarket {
            lambda,
            ..self.clone()
        }
    }

    /// Errors with the full violation list unless the market is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_market(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidMarket(v))
        }
    }

    /// Objective probability of each node (sum of the leaf probabilities
    /// below it).
    pub fn node_prob(&self) -> Vec<f64> {
        node_masses(&self.tree, &self.leaf_prob)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Location {
    Market,
    Node(usize),
    Leaf(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub location: Location,
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn new(location: Location, field: &'static str, message: impl Into<String>) -> Self {
        Violation {
            location,
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Location::Market => write!(f, "{}: {}", self.field, self.message),
            Location::Node(id) => write!(f, "node {id} {}: {}", self.field, self.message),
            Location::Leaf(id) => write!(f, "leaf {id} {}: {}", self.field, self.message),
        }
    }
}

/// Checks every structural and numerical invariant of a market. Never
/// fails; an empty list means the market is valid.
pub fn validate_market(market: &FiniteMarket) -> Vec<Violation> {
    let mut out = Vec::new();
    let tree = &market.tree;
    let n = tree.len();

    if tree.horizon() < 1 {
        out.push(Violation::new(Location::Market, "horizon", "horizon must be at least 1"));
    }
    if n > MAX_NODES {
        out.push(Violation::new(
            Location::Market,
            "nodes",
            format!("{n} nodes exceeds the cap of {MAX_NODES}"),
        ));
    }
    let roots: Vec<usize> = (0..n).filter(|&i| tree.parent(i).is_none()).collect();
    match roots.as_slice() {
        [r] => {
            if tree.node(*r).time != 0 {
                out.push(Violation::new(Location::Node(*r), "time", "root must be at time 0"));
            }
        }
        [] => out.push(Violation::new(Location::Market, "root", "tree has no root")),
        many => out.push(Violation::new(
            Location::Market,
            "root",
            format!("tree has {} roots", many.len()),
        )),
    }
    if tree.topological_order().len() != n {
        out.push(Violation::new(Location::Market, "parent", "parent links contain a cycle"));
    }
    for (id, node) in tree.nodes().iter().enumerate() {
        if let Some(p) = node.parent {
            let pt = tree.node(p).time;
            if node.time != pt + 1 {
                out.push(Violation::new(
                    Location::Node(id),
                    "time",
                    format!("time {} but parent {p} is at time {pt}", node.time),
                ));
            }
        }
        if node.children.is_empty() && node.time != tree.horizon() {
            out.push(Violation::new(
                Location::Node(id),
                "time",
                format!("leaf at time {} before horizon {}", node.time, tree.horizon()),
            ));
        }
    }

    if market.price.len() != n {
        out.push(Violation::new(
            Location::Market,
            "price",
            format!("{} prices for {n} nodes", market.price.len()),
        ));
    } else {
        for (id, &s) in market.price.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                out.push(Violation::new(
                    Location::Node(id),
                    "price",
                    format!("non-positive price {s}"),
                ));
            }
        }
    }

    if market.leaf_prob.len() != tree.n_leaves() {
        out.push(Violation::new(
            Location::Market,
            "leaf_probs",
            format!(
                "{} probabilities for {} leaves",
                market.leaf_prob.len(),
                tree.n_leaves()
            ),
        ));
    } else {
        for (k, &p) in market.leaf_prob.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                out.push(Violation::new(
                    Location::Leaf(tree.leaves()[k]),
                    "leaf_probs",
                    format!("probability {p} is not strictly positive"),
                ));
            }
        }
        let sum: f64 = market.leaf_prob.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            out.push(Violation::new(
                Location::Market,
                "leaf_probs",
                format!("leaf probabilities sum {sum} ≠ 1"),
            ));
        }
    }

    if !(0.0..1.0).contains(&market.lambda) {
        out.push(Violation::new(
            Location::Market,
            "lambda",
            format!("lambda {} outside [0, 1)", market.lambda),
        ));
    }
    out
}

/// Per-node sums of the leaf values below each node.
pub fn node_masses(tree: &EventTree, leaf_values: &[f64]) -> Vec<f64> {
    let mut mass = vec![0.0; tree.len()];
    for id in tree.topological_order().into_iter().rev() {
        mass[id] = match tree.leaf_index(id) {
            Some(k) => leaf_values[k],
            None => tree.children(id).iter().map(|&c| mass[c]).sum(),
        };
    }
    mass
}

/// A probability measure on the leaves together with its node masses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricingMeasure {
    leaf_weight: Vec<f64>,
    node_mass: Vec<f64>,
}

impl PricingMeasure {
    pub fn from_leaf_weights(tree: &EventTree, leaf_weight: Vec<f64>) -> Result<Self> {
        if leaf_weight.len() != tree.n_leaves() {
            return Err(Error::ShapeMismatch {
                expected: tree.n_leaves(),
                found: leaf_weight.len(),
            });
        }
        if leaf_weight.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("leaf weights must be nonnegative".into()));
        }
        let sum: f64 = leaf_weight.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("leaf weights sum to {sum}")));
        }
        let node_mass = node_masses(tree, &leaf_weight);
        Ok(PricingMeasure {
            leaf_weight,
            node_mass,
        })
    }

    pub fn leaf_weights(&self) -> &[f64] {
        &self.leaf_weight
    }

    pub fn node_masses(&self) -> &[f64] {
        &self.node_mass
    }

    pub fn node_mass(&self, id: usize) -> f64 {
        self.node_mass[id]
    }

    /// All leaf weights at least [`EQUIVALENCE_TOL`].
    pub fn is_equivalent(&self) -> bool {
        self.leaf_weight.iter().all(|&w| w >= EQUIVALENCE_TOL)
    }

    /// Probability of a set of leaves given by outcome indices.
    pub fn prob_of(&self, leaves: &[usize]) -> f64 {
        leaves.iter().map(|&k| self.leaf_weight[k]).sum()
    }
}

/// Conditional expectation of `process` one step ahead of `node`.
pub fn conditional_expectation(
    tree: &EventTree,
    process: &[f64],
    measure: &PricingMeasure,
    node: usize,
) -> Result<f64> {
    if process.len() != tree.len() {
        return Err(Error::ShapeMismatch {
            expected: tree.len(),
            found: process.len(),
        });
    }
    let z = measure.node_mass(node);
    if tree.is_leaf(node) {
        return Ok(process[node]);
    }
    if z <= 0.0 {
        return Err(Error::DegenerateConditioning { node });
    }
    Ok(tree
        .children(node)
        .iter()
        .map(|&c| measure.node_mass(c) / z * process[c])
        .sum())
}

/// A measure paired with a shadow price process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistentPriceSystem {
    pub measure: PricingMeasure,
    pub shadow: Vec<f64>,
}

impl ConsistentPriceSystem {
    /// Pairs a measure with a shadow price without checking any invariant;
    /// use [`ConsistentPriceSystem::verify`] for that.
    pub fn new_unchecked(measure: PricingMeasure, shadow: Vec<f64>) -> Self {
        ConsistentPriceSystem { measure, shadow }
    }

    /// Builds and verifies a consistent price system for `market` at `lambda`.
    pub fn new(
        market: &FiniteMarket,
        lambda: f64,
        measure: PricingMeasure,
        shadow: Vec<f64>,
    ) -> Result<Self> {
        let cps = Self::new_unchecked(measure, shadow);
        let v = cps.verify(market, lambda);
        if v.is_empty() {
            Ok(cps)
        } else {
            Err(Error::InvalidMarket(v))
        }
    }

    /// Equivalence, bid-ask containment and martingale checks.
    pub fn verify(&self, market: &FiniteMarket, lambda: f64) -> Vec<Violation> {
        let tree = &market.tree;
        let mut out = Vec::new();
        if self.shadow.len() != tree.len() || self.measure.node_masses().len() != tree.len() {
            out.push(Violation::new(
                Location::Market,
                "shadow",
                "shadow price or measure has the wrong shape",
            ));
            return out;
        }
        for (k, &w) in self.measure.leaf_weights().iter().enumerate() {
            if w < EQUIVALENCE_TOL {
                out.push(Violation::new(
                    Location::Leaf(tree.leaves()[k]),
                    "measure",
                    format!("weight {w:e} below equivalence tolerance"),
                ));
            }
        }
        for id in 0..tree.len() {
            let (s, st) = (market.price[id], self.shadow[id]);
            let excess = ((1.0 - lambda) * s - st).max(st - s);
            if excess > CONTAINMENT_TOL {
                out.push(Violation::new(
                    Location::Node(id),
                    "shadow",
                    format!("shadow price {st} outside [{}, {s}]", (1.0 - lambda) * s),
                ));
            }
            if !tree.is_leaf(id) && self.measure.node_mass(id) > 0.0 {
                let ce = conditional_expectation(tree, &self.shadow, &self.measure, id)
                    .expect("positive node mass");
                let resid = (ce - st).abs();
                if resid > MARTINGALE_TOL {
                    out.push(Violation::new(
                        Location::Node(id),
                        "shadow",
                        format!("martingale residual {resid:e}"),
                    ));
                }
            }
        }
        out
    }
}

/// Adapted holdings with their trade decomposition.
///
/// Trades at a node happen at that node's prices, starting from the
/// holdings of the parent (the root starts from the empty position).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradingStrategy {
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub buy1: Vec<f64>,
    pub sell1: Vec<f64>,
    pub delta0: Vec<f64>,
}

impl TradingStrategy {
    pub fn zero(tree: &EventTree) -> Self {
        let n = tree.len();
        TradingStrategy {
            phi0: vec![0.0; n],
            phi1: vec![0.0; n],
            buy1: vec![0.0; n],
            sell1: vec![0.0; n],
            delta0: vec![0.0; n],
        }
    }

    /// Accumulates holdings from per-node trades.
    pub fn from_trades(
        tree: &EventTree,
        buy1: Vec<f64>,
        sell1: Vec<f64>,
        delta0: Vec<f64>,
    ) -> Result<Self> {
        let n = tree.len();
        for v in [&buy1, &sell1, &delta0] {
            if v.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let mut phi0 = vec![0.0; n];
        let mut phi1 = vec![0.0; n];
        for id in tree.topological_order() {
            let (p0, p1) = tree.parent(id).map_or((0.0, 0.0), |p| (phi0[p], phi1[p]));
            phi0[id] = p0 + delta0[id];
            phi1[id] = p1 + buy1[id] - sell1[id];
        }
        Ok(TradingStrategy {
            phi0,
            phi1,
            buy1,
            sell1,
            delta0,
        })
    }

    /// Buys `units` of stock at the root ask price, financed by the bond,
    /// and holds.
    pub fn buy_and_hold(market: &FiniteMarket, units: f64) -> Self {
        let tree = &market.tree;
        let n = tree.len();
        let root = tree.root();
        let mut buy = vec![0.0; n];
        let mut sell = vec![0.0; n];
        let mut delta0 = vec![0.0; n];
        if units >= 0.0 {
            buy[root] = units;
            delta0[root] = -market.price[root] * units;
        } else {
            sell[root] = -units;
            delta0[root] = (1.0 - market.lambda) * market.price[root] * -units;
        }
        Self::from_trades(tree, buy, sell, delta0).expect("shapes match")
    }

    pub fn len(&self) -> usize {
        self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi0.is_empty()
    }

    /// Violations of the holdings recursion, trade signs and the
    /// self-financing inequality at cost `lambda`.
    pub fn check_self_financing(&self, market: &FiniteMarket, lambda: f64) -> Vec<Violation> {
        const TOL: f64 = 1e-9;
        let tree = &market.tree;
        let mut out = Vec::new();
        if self.len() != tree.len() {
            out.push(Violation::new(Location::Market, "strategy", "wrong shape"));
            return out;
        }
        for id in 0..tree.len() {
            let (p0, p1) = tree
                .parent(id)
                .map_or((0.0, 0.0), |p| (self.phi0[p], self.phi1[p]));
            let scale = 1.0 + self.phi1[id].abs() + self.phi0[id].abs();
            if (self.phi1[id] - (p1 + self.buy1[id] - self.sell1[id])).abs() > TOL * scale {
                out.push(Violation::new(Location::Node(id), "phi1", "holdings recursion broken"));
            }
            if (self.phi0[id] - (p0 + self.delta0[id])).abs() > TOL * scale {
                out.push(Violation::new(Location::Node(id), "phi0", "holdings recursion broken"));
            }
            if self.buy1[id] < -TOL || self.sell1[id] < -TOL {
                out.push(Violation::new(Location::Node(id), "trade", "negative trade"));
            }
            let s = market.price[id];
            let budget = (1.0 - lambda) * s * self.sell1[id] - s * self.buy1[id];
            if self.delta0[id] > budget + TOL * (1.0 + budget.abs()) {
                out.push(Violation::new(
                    Location::Node(id),
                    "delta0",
                    format!("bond change {} exceeds trade proceeds {budget}", self.delta0[id]),
                ));
            }
        }
        out
    }

    pub fn is_self_financing(&self, market: &FiniteMarket, lambda: f64) -> bool {
        self.check_self_financing(market, lambda).is_empty()
    }

    /// `phi0 + phi1 * shadow` per node.
    pub fn frictionless_value(&self, shadow: &[f64]) -> Vec<f64> {
        self.phi0
            .iter()
            .zip(&self.phi1)
            .zip(shadow)
            .map(|((p0, p1), s)| p0 + p1 * s)
            .collect()
    }
}

/// Value of closing the stock position at the bid (long) or ask (short).
pub fn liquidation_value_at(phi0: f64, phi1: f64, price: f64, lambda: f64) -> f64 {
    phi0 + phi1.max(0.0) * (1.0 - lambda) * price - (-phi1).max(0.0) * price
}

/// Liquidation value process of `strategy` at the market's own cost level.
pub fn liquidation_value(strategy: &TradingStrategy, market: &FiniteMarket) -> Result<Vec<f64>> {
    liquidation_value_with(strategy, market, market.lambda)
}

/// Liquidation value process at an explicit cost level.
pub fn liquidation_value_with(
    strategy: &TradingStrategy,
    market: &FiniteMarket,
    lambda: f64,
) -> Result<Vec<f64>> {
    let n = market.tree.len();
    if strategy.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: strategy.len(),
        });
    }
    Ok((0..n)
        .map(|i| liquidation_value_at(strategy.phi0[i], strategy.phi1[i], market.price[i], lambda))
        .collect())
}

/// Whether the liquidation value never drops below `-bound`.
/// `f64::INFINITY` admits every strategy.
pub fn is_admissible(strategy: &TradingStrategy, market: &FiniteMarket, bound: f64) -> Result<bool> {
    if bound < 0.0 || bound.is_nan() {
        return Err(Error::InvalidParameter(format!("admissibility bound {bound} < 0")));
    }
    let v = liquidation_value(strategy, market)?;
    Ok(v.iter().all(|&x| x >= -bound))
}
