//! Weighted coverings (LP duals of the matching problem) and the pricing
//! constants derived from them.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::constraints::{DifferenceConstraints, Solution, ZERO_VAR};
use crate::error::{Error, Result};
use crate::market::Market;
use crate::matching::{self, MarketAnalysis};
use crate::rational::{pow2, ratio, Rational};

/// Vertex values with `pi(a) + pi(i) >= v_a(i)` on every pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Covering {
    agents: Vec<Rational>,
    items: Vec<Rational>,
}

impl Covering {
    pub fn new(agents: Vec<Rational>, items: Vec<Rational>) -> Self {
        Covering { agents, items }
    }

    pub fn agent(&self, a: usize) -> &Rational {
        &self.agents[a]
    }

    pub fn item(&self, i: usize) -> &Rational {
        &self.items[i]
    }

    pub fn agent_values(&self) -> &[Rational] {
        &self.agents
    }

    pub fn item_values(&self) -> &[Rational] {
        &self.items
    }

    pub fn total(&self) -> Rational {
        self.agents.iter().chain(&self.items).sum()
    }

    /// `pi(a) + pi(i) - v_a(i)`
    pub fn slack(&self, market: &Market, a: usize, i: usize) -> Rational {
        &self.agents[a] + &self.items[i] - market.value(a, i)
    }

    pub fn is_tight(&self, market: &Market, a: usize, i: usize) -> bool {
        self.slack(market, a, i).is_zero()
    }

    pub fn tight_edges(&self, market: &Market) -> BTreeSet<(usize, usize)> {
        (0..market.num_agents())
            .flat_map(|a| (0..market.num_items()).map(move |i| (a, i)))
            .filter(|&(a, i)| self.is_tight(market, a, i))
            .collect()
    }

    /// Feasibility, non-negativity and total value equal to `opt`.
    pub fn check_optimal(&self, market: &Market, opt: &Rational) -> Result<()> {
        if self.agents.len() != market.num_agents() || self.items.len() != market.num_items() {
            return Err(Error::Invariant("covering does not match market shape".into()));
        }
        if let Some(v) = self.agents.iter().chain(&self.items).find(|v| **v < Rational::zero()) {
            return Err(Error::Invariant(format!("negative dual value {v}")));
        }
        for a in 0..market.num_agents() {
            for i in 0..market.num_items() {
                if self.slack(market, a, i) < Rational::zero() {
                    return Err(Error::Invariant(format!(
                        "edge ({}, {}) is not covered",
                        market.agents()[a],
                        market.items()[i]
                    )));
                }
            }
        }
        let total = self.total();
        if &total != opt {
            return Err(Error::Invariant(format!("covering total {total} differs from optimum {opt}")));
        }
        Ok(())
    }
}

/// An optimal non-negative covering: the duals of the matching solver.
pub fn egervary_covering(market: &Market) -> Covering {
    matching::solve(market.values(), market.num_items()).1
}

const MAX_MARGIN_HALVINGS: usize = 256;

/// A covering whose tight edges are exactly the legal edges and whose zero
/// vertices are exactly the vertices some maximum matching leaves exposed.
///
/// Encoded as difference constraints over `pi(a)` and `y(i) = -pi(i)`, with
/// a margin `gamma` separating non-legal slack and always-covered duals from
/// zero; `gamma` is halved from 1 until the system is feasible.
pub fn refined_covering(market: &Market) -> Result<Covering> {
    refined_covering_with(market, &matching::analyze(market))
}

pub fn refined_covering_with(market: &Market, analysis: &MarketAnalysis) -> Result<Covering> {
    let mut gamma = Rational::one();
    for _ in 0..MAX_MARGIN_HALVINGS {
        if let Some(cov) = try_margin(market, analysis, &gamma) {
            cov.check_optimal(market, &analysis.opt_weight)?;
            return Ok(cov);
        }
        gamma /= Rational::from_integer(2.into());
    }
    Err(Error::Invariant(
        "no refined covering found; is every item covered by every maximum matching?".into(),
    ))
}

fn try_margin(market: &Market, analysis: &MarketAnalysis, gamma: &Rational) -> Option<Covering> {
    let mut sys = DifferenceConstraints::new();
    let agent_vars: Vec<usize> = market.agents().iter().map(|a| sys.add_var(format!("pi({a})"))).collect();
    let item_vars: Vec<usize> = market.items().iter().map(|i| sys.add_var(format!("-pi({i})"))).collect();

    for a in 0..market.num_agents() {
        for i in 0..market.num_items() {
            let v = market.value(a, i).clone();
            if analysis.legal_edges.contains(&(a, i)) {
                sys.equal(agent_vars[a], item_vars[i], v);
            } else {
                sys.at_least(agent_vars[a], item_vars[i], v + gamma);
            }
        }
    }
    for (a, &var) in agent_vars.iter().enumerate() {
        if analysis.always_covered_agents.contains(&a) {
            sys.at_least(var, ZERO_VAR, gamma.clone());
        } else {
            sys.equal(var, ZERO_VAR, Rational::zero());
        }
    }
    for (i, &var) in item_vars.iter().enumerate() {
        if analysis.always_covered_items.contains(&i) {
            sys.at_least(ZERO_VAR, var, gamma.clone());
        } else {
            sys.equal(var, ZERO_VAR, Rational::zero());
        }
    }

    match sys.solve() {
        Solution::Feasible(x) => Some(Covering::new(
            agent_vars.iter().map(|&v| x[v].clone()).collect(),
            item_vars.iter().map(|&v| -x[v].clone()).collect(),
        )),
        Solution::Infeasible(_) => None,
    }
}

/// The price-shift constants: `delta` separates tight from non-tight
/// choices, `epsilon` orders strongly connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingParameters {
    pub delta: Rational,
    pub epsilon: Rational,
}

/// `delta = 1/4 * min{non-tight slack, positive item dual, positive agent
/// dual}` (1 when all three sets are empty) and
/// `epsilon = delta / (2 * n * 2^n)` for `n` agents.
pub fn compute_parameters(market: &Market, cov: &Covering) -> PricingParameters {
    let slacks = (0..market.num_agents())
        .flat_map(|a| (0..market.num_items()).map(move |i| (a, i)))
        .map(|(a, i)| cov.slack(market, a, i))
        .filter(|s| !s.is_zero());
    let duals = cov
        .item_values()
        .iter()
        .chain(cov.agent_values())
        .filter(|v| !v.is_zero())
        .cloned();
    let delta = slacks
        .chain(duals)
        .min()
        .map(|m| m * ratio(1, 4))
        .unwrap_or_else(Rational::one);
    let n = market.num_agents().max(1);
    let epsilon = &delta / (Rational::from_integer((2 * n).into()) * pow2(n));
    PricingParameters { delta, epsilon }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tests::m1;
    use crate::matching::{always_covered_vertices, enumerate_max_matchings, legal_edges, opt_weight};
    use crate::rational::int;

    fn cyclic3() -> Market {
        Market::from_entries(
            &["a1", "a2", "a3"],
            &["i1", "i2", "i3"],
            &[
                ("a1", "i1", int(1)),
                ("a1", "i2", int(1)),
                ("a2", "i2", int(1)),
                ("a2", "i3", int(1)),
                ("a3", "i3", int(1)),
                ("a3", "i1", int(1)),
            ],
        )
        .unwrap()
    }

    fn assert_refined(market: &Market) -> Covering {
        let cov = refined_covering(market).unwrap();
        cov.check_optimal(market, &opt_weight(market)).unwrap();
        // oracle: union / intersection over all maximum matchings
        let all = enumerate_max_matchings(market).unwrap();
        let legal: BTreeSet<_> = all.iter().flat_map(|m| m.pairs()).collect();
        assert_eq!(cov.tight_edges(market), legal);
        for a in 0..market.num_agents() {
            let always = all.iter().all(|m| m.item_of(a).is_some());
            assert_eq!(cov.agent(a).is_zero(), !always, "agent {a}");
        }
        for i in 0..market.num_items() {
            let always = all.iter().all(|m| m.agent_of(i).is_some());
            assert_eq!(cov.item(i).is_zero(), !always, "item {i}");
        }
        cov
    }

    #[test]
    fn egervary_examples() {
        let m = m1();
        egervary_covering(&m).check_optimal(&m, &int(5)).unwrap();

        let single = Market::from_entries(&["a"], &["i"], &[("a", "i", int(4))]).unwrap();
        let cov = egervary_covering(&single);
        assert_eq!(cov.agent(0) + cov.item(0), int(4));

        let zeros = Market::from_entries(&["a1", "a2"], &["i1"], &[]).unwrap();
        let cov = egervary_covering(&zeros);
        assert!(cov.agent_values().iter().chain(cov.item_values()).all(Zero::is_zero));
    }

    #[test]
    fn refined_m1() {
        let m = m1();
        let cov = assert_refined(&m);
        assert_eq!(cov.tight_edges(&m), legal_edges(&m));
        assert!(cov.agent_values().iter().chain(cov.item_values()).all(|v| *v > int(0)));
    }

    #[test]
    fn refined_cyclic3() {
        let m = cyclic3();
        let cov = assert_refined(&m);
        assert_eq!(cov.tight_edges(&m).len(), 6);
    }

    #[test]
    fn refined_shared_item() {
        let m = Market::from_entries(&["a1", "a2"], &["i"], &[("a1", "i", int(3)), ("a2", "i", int(3))]).unwrap();
        let cov = assert_refined(&m);
        assert_eq!(cov.item(0), &int(3));
        assert_eq!(cov.agent(0), &int(0));
        assert_eq!(cov.agent(1), &int(0));
        let (agents, _) = always_covered_vertices(&m);
        assert!(agents.is_empty());
    }

    #[test]
    fn parameters_for_the_m1_reference_covering() {
        let m = m1();
        // pi(i1)=2, pi(i2)=1, pi(a1)=pi(a2)=1
        let cov = Covering::new(vec![int(1), int(1)], vec![int(2), int(1)]);
        cov.check_optimal(&m, &int(5)).unwrap();
        assert_eq!(cov.tight_edges(&m), BTreeSet::from([(0, 0), (1, 1)]));
        assert_eq!(cov.slack(&m, 0, 1), int(1));
        assert_eq!(cov.slack(&m, 1, 0), int(1));
        let p = compute_parameters(&m, &cov);
        assert_eq!(p.delta, ratio(1, 4));
        assert_eq!(p.epsilon, ratio(1, 64));
        let half = ratio(1, 2);
        for a in 0..2 {
            for i in 0..2 {
                let s = cov.slack(&m, a, i);
                if !s.is_zero() {
                    assert!(p.delta < &half * s);
                }
            }
        }
        assert!(p.epsilon < &p.delta / (int(2) * int(4)));
    }

    #[test]
    fn degenerate_parameters() {
        let zeros = Market::from_entries(&["a"], &["i"], &[]).unwrap();
        let cov = Covering::new(vec![int(0)], vec![int(0)]);
        assert_eq!(compute_parameters(&zeros, &cov).delta, int(1));

        let single = Market::from_entries(&["a"], &["i"], &[("a", "i", int(4))]).unwrap();
        let cov = Covering::new(vec![int(1)], vec![int(3)]);
        let p = compute_parameters(&single, &cov);
        assert_eq!(p.delta, ratio(1, 4));
        assert_eq!(p.epsilon, ratio(1, 16));
    }
}
