//! JSON input formats.
//!
//! A market file looks like
//!
//! ```json
//! {
//!   "horizon": 1,
//!   "nodes": [
//!     {"id": 0, "parent": null, "time": 0, "price": 1.0},
//!     {"id": 1, "parent": 0, "time": 1, "price": 2.0},
//!     {"id": 2, "parent": 0, "time": 1, "price": 0.5}
//!   ],
//!   "leaf_probs": {"1": 0.5, "2": 0.5},
//!   "lambda": 0.1
//! }
//! ```
//!
//! Claims are maps from leaf id to payoff, families are
//! `{"p": [...], "generators": [[...], ...]}` and sequences are arrays of
//! `{"path": "market.json", "lambda": 0.1}` with paths relative to the
//! sequence file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halmos_savage::FiniteMeasureFamily;
use crate::market::{EventTree, FiniteMarket};
use crate::sequence::MarketSequence;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub parent: Option<usize>,
    pub time: usize,
    pub price: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub horizon: usize,
    pub nodes: Vec<NodeSpec>,
    pub leaf_probs: BTreeMap<String, f64>,
    #[serde(default)]
    pub lambda: f64,
}

fn parse_id(key: &str) -> Result<usize> {
    key.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("'{key}' is not a node id")))
}

impl MarketSpec {
    /// Builds the market without validating it.
    pub fn build(&self) -> Result<FiniteMarket> {
        let n = self.nodes.len();
        let mut slots: Vec<Option<&NodeSpec>> = vec![None; n];
        for node in &self.nodes {
            match slots.get_mut(node.id) {
                Some(slot @ None) => *slot = Some(node),
                Some(Some(_)) => return Err(Error::Parse(format!("duplicate node id {}", node.id))),
                None => {
                    return Err(Error::Parse(format!(
                        "node ids must be 0..{n}, found {}",
                        node.id
                    )))
                }
            }
        }
        let nodes: Vec<&NodeSpec> = slots.into_iter().map(|s| s.expect("all ids present")).collect();
        let parents: Vec<Option<usize>> = nodes.iter().map(|s| s.parent).collect();
        let times: Vec<usize> = nodes.iter().map(|s| s.time).collect();
        let tree = EventTree::new(self.horizon, &parents, &times)?;
        let mut probs = vec![None; tree.n_leaves()];
        for (key, &p) in &self.leaf_probs {
            let id = parse_id(key)?;
            match tree.leaf_index(id) {
                Some(k) if id < n => probs[k] = Some(p),
                _ => return Err(Error::Parse(format!("leaf_probs names {id}, which is not a leaf"))),
            }
        }
        let leaf_prob = probs
            .iter()
            .zip(tree.leaves())
            .map(|(p, l)| p.ok_or_else(|| Error::Parse(format!("no probability for leaf {l}"))))
            .collect::<Result<_>>()?;
        let price = nodes.iter().map(|s| s.price).collect();
        Ok(FiniteMarket::new(tree, leaf_prob, price, self.lambda))
    }

    pub fn from_market(market: &FiniteMarket) -> Self {
        let tree = &market.tree;
        MarketSpec {
            horizon: tree.horizon(),
            nodes: (0..tree.len())
                .map(|id| NodeSpec {
                    id,
                    parent: tree.parent(id),
                    time: tree.node(id).time,
                    price: market.price[id],
                })
                .collect(),
            leaf_probs: tree
                .leaves()
                .iter()
                .zip(&market.leaf_prob)
                .map(|(l, &p)| (l.to_string(), p))
                .collect(),
            lambda: market.lambda,
        }
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Parses and validates a market.
pub fn parse_market(text: &str) -> Result<FiniteMarket> {
    let market = from_json::<MarketSpec>(text)?.build()?;
    market.ensure_valid()?;
    Ok(market)
}

pub fn read_market(path: &Path) -> Result<FiniteMarket> {
    parse_market(&read(path)?)
}

pub fn market_to_json(market: &FiniteMarket) -> String {
    serde_json::to_string_pretty(&MarketSpec::from_market(market)).expect("serializable")
}

/// Claim values in outcome order; every leaf must be given exactly once.
pub fn parse_claim(text: &str, market: &FiniteMarket) -> Result<Vec<f64>> {
    let map: BTreeMap<String, f64> = from_json(text)?;
    let tree = &market.tree;
    let mut out = vec![None; tree.n_leaves()];
    for (key, v) in map {
        let id = parse_id(&key)?;
        match (id < tree.len()).then(|| tree.leaf_index(id)).flatten() {
            Some(k) => out[k] = Some(v),
            None => return Err(Error::Parse(format!("claim names {id}, which is not a leaf"))),
        }
    }
    out.iter()
        .zip(tree.leaves())
        .map(|(v, l)| v.ok_or_else(|| Error::Parse(format!("claim has no value for leaf {l}"))))
        .collect()
}

pub fn read_claim(path: &Path, market: &FiniteMarket) -> Result<Vec<f64>> {
    parse_claim(&read(path)?, market)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    p: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

pub fn parse_family(text: &str) -> Result<FiniteMeasureFamily> {
    let spec: FamilySpec = from_json(text)?;
    FiniteMeasureFamily::new(spec.p, spec.generators)
}

pub fn read_family(path: &Path) -> Result<FiniteMeasureFamily> {
    parse_family(&read(path)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceItem {
    path: String,
    lambda: f64,
}

/// Reads a sequence file; market paths are resolved against its directory.
pub fn read_sequence(path: &Path) -> Result<MarketSequence> {
    let items: Vec<SequenceItem> = from_json(&read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seq = MarketSequence::new();
    for item in items {
        let market = read_market(&base.join(&item.path))?;
        seq.push(market, item.lambda, item.path)?;
    }
    if seq.is_empty() {
        return Err(Error::Parse("sequence file lists no markets".into()));
    }
    Ok(seq)
}
