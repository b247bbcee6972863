#![allow(dead_code)]

use asymparb::halmos_savage::FiniteMeasureFamily;
use asymparb::market::{EventTree, FiniteMarket};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Depth 1..=3, 2..=3 children per node, prices in [0.5, 2].
pub fn random_market(rng: &mut ChaCha8Rng, lambda: f64) -> FiniteMarket {
    let depth = rng.random_range(1..=3usize);
    let mut parents = vec![None];
    let mut times = vec![0];
    let mut frontier = vec![0usize];
    for t in 1..=depth {
        let mut next = Vec::new();
        for &p in &frontier {
            for _ in 0..rng.random_range(2..=3usize) {
                next.push(parents.len());
                parents.push(Some(p));
                times.push(t);
            }
        }
        frontier = next;
    }
    let tree = EventTree::new(depth, &parents, &times).unwrap();
    let price = (0..tree.len()).map(|_| rng.random_range(0.5..=2.0)).collect();
    let raw: Vec<f64> = (0..tree.n_leaves()).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|w| w / total).collect();
    FiniteMarket::new(tree, probs, price, lambda)
}

/// Like [`random_market`] but with a martingale price under a random
/// measure, so that a consistent price system exists at every cost level.
pub fn arbitrage_free_market(rng: &mut ChaCha8Rng, lambda: f64) -> FiniteMarket {
    let mut m = random_market(rng, lambda);
    let tree = m.tree.clone();
    let q: Vec<f64> = {
        let raw: Vec<f64> = (0..tree.n_leaves()).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let z = asymparb::market::node_masses(&tree, &q);
    for id in tree.topological_order().into_iter().rev() {
        if !tree.is_leaf(id) {
            m.price[id] = tree.children(id).iter().map(|&c| z[c] * m.price[c]).sum::<f64>() / z[id];
        }
    }
    m
}

pub fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g = Gamma::<f64>::new(1.0, 1.0).unwrap();
    loop {
        let raw: Vec<f64> = (0..k).map(|_| g.sample(rng).max(1e-12)).collect();
        let total: f64 = raw.iter().sum();
        let mut v: Vec<f64> = raw.iter().map(|x| x / total).collect();
        // push the rounding residue into the largest entry
        let resid = 1.0 - v.iter().sum::<f64>();
        let i = (0..k).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        v[i] += resid;
        if (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12 {
            return v;
        }
    }
}

/// `K <= 10` outcomes and `G <= 5` generators, all Dirichlet(1).
pub fn random_family(rng: &mut ChaCha8Rng) -> FiniteMeasureFamily {
    let k = rng.random_range(2..=10usize);
    let g = rng.random_range(1..=5usize);
    let p = dirichlet(rng, k);
    let gens = (0..g).map(|_| dirichlet(rng, k)).collect();
    FiniteMeasureFamily::new(p, gens).unwrap()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral over `[lo, hi]`, `0 < lo < hi`, on panels growing geometrically
/// from `lo`; suited to integrands with a power singularity just left of
/// `lo`.
pub fn geometric_quad(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    assert!(0.0 < lo && lo < hi);
    let mut edges = vec![lo];
    let mut x = lo;
    while x * 2.0 < hi {
        x *= 2.0;
        edges.push(x);
    }
    edges.push(hi);
    // crude first pass fixes the scale for the absolute tolerance
    let crude: f64 = edges
        .windows(2)
        .map(|w| (w[1] - w[0]) / 6.0 * (f(w[0]) + 4.0 * f(0.5 * (w[0] + w[1])) + f(w[1])))
        .sum::<f64>()
        .abs();
    let tol = rel_tol * crude.max(f64::MIN_POSITIVE) / edges.len() as f64;
    edges
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol))
        .sum()
}

/// Largest violation of `liquidation <= frictionless value` and of the
/// supermartingale inequality for the frictionless value under the price
/// system (both zero when the properties hold exactly).
pub fn grr_residuals(
    strategy: &asymparb::market::TradingStrategy,
    market: &FiniteMarket,
    lambda: f64,
    cps: &asymparb::market::ConsistentPriceSystem,
) -> (f64, f64) {
    let tree = &market.tree;
    let v = strategy.frictionless_value(&cps.shadow);
    let liq = asymparb::market::liquidation_value_with(strategy, market, lambda).unwrap();
    let dominance = (0..tree.len()).map(|i| liq[i] - v[i]).fold(0.0, f64::max);
    let supermart = (0..tree.len())
        .filter(|&i| !tree.is_leaf(i))
        .map(|i| {
            asymparb::market::conditional_expectation(tree, &v, &cps.measure, i).unwrap() - v[i]
        })
        .fold(0.0, f64::max);
    (dominance, supermart)
}
