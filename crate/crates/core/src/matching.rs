//! Maximum-weight bipartite matching over exact rationals, plus the
//! legality / coverage analysis built on top of it.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::covering::Covering;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::rational::Rational;

/// A set of disjoint (agent, item) pairs of one market.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    agent_mate: Vec<Option<usize>>,
    item_mate: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(num_agents: usize, num_items: usize) -> Self {
        Matching {
            agent_mate: vec![None; num_agents],
            item_mate: vec![None; num_items],
        }
    }

    pub fn from_pairs(num_agents: usize, num_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut m = Matching::empty(num_agents, num_items);
        for &(a, i) in pairs {
            if a >= num_agents || i >= num_items {
                return Err(Error::InvalidParameter(format!("pair ({a}, {i}) out of range")));
            }
            if m.agent_mate[a].is_some() || m.item_mate[i].is_some() {
                return Err(Error::InvalidParameter(format!("pair ({a}, {i}) reuses a vertex")));
            }
            m.insert(a, i);
        }
        Ok(m)
    }

    pub fn item_of(&self, agent: usize) -> Option<usize> {
        self.agent_mate[agent]
    }

    pub fn agent_of(&self, item: usize) -> Option<usize> {
        self.item_mate[item]
    }

    pub fn contains(&self, agent: usize, item: usize) -> bool {
        self.agent_mate[agent] == Some(item)
    }

    pub fn len(&self) -> usize {
        self.agent_mate.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairs sorted by agent.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.agent_mate
            .iter()
            .enumerate()
            .filter_map(|(a, i)| i.map(|i| (a, i)))
            .collect()
    }

    pub fn weight(&self, market: &Market) -> Rational {
        self.pairs()
            .into_iter()
            .fold(Rational::zero(), |acc, (a, i)| acc + market.value(a, i))
    }

    /// Adds `(agent, item)`; both endpoints must currently be free.
    pub fn insert(&mut self, agent: usize, item: usize) {
        debug_assert!(self.agent_mate[agent].is_none() && self.item_mate[item].is_none());
        self.agent_mate[agent] = Some(item);
        self.item_mate[item] = Some(agent);
    }

    pub fn remove(&mut self, agent: usize, item: usize) {
        debug_assert!(self.contains(agent, item));
        self.agent_mate[agent] = None;
        self.item_mate[item] = None;
    }

    pub fn pair_ids(&self, market: &Market) -> Vec<(String, String)> {
        self.pairs()
            .into_iter()
            .map(|(a, i)| (market.agents()[a].clone(), market.items()[i].clone()))
            .collect()
    }
}

/// Primal-dual (Hungarian) maximum-weight matching for a non-negative weight
/// table. Returns the matching together with an optimal non-negative
/// covering: every matched edge is tight and every exposed vertex has dual 0.
///
/// All exposed agents are grown as roots of one alternating forest; they
/// share a common dual value which is driven down to 0. Ties are broken by
/// scanning agents and items in index order, so results are reproducible.
pub(crate) fn solve(weights: &[Vec<Rational>], num_items: usize) -> (Matching, Covering) {
    let num_agents = weights.len();
    let mut matching = Matching::empty(num_agents, num_items);
    let top = weights.iter().flatten().max().cloned().unwrap_or_else(Rational::zero);
    let mut agent_dual = vec![top.clone(); num_agents];
    let mut item_dual = vec![Rational::zero(); num_items];
    if num_items == 0 || top.is_zero() {
        return (matching, Covering::new(vec![Rational::zero(); num_agents], item_dual));
    }

    let slack = |a: usize, i: usize, ad: &[Rational], id: &[Rational]| &ad[a] + &id[i] - &weights[a][i];

    loop {
        let roots: Vec<usize> = (0..num_agents).filter(|&a| matching.agent_mate[a].is_none()).collect();
        let Some(&first_root) = roots.first() else { break };
        let root_dual = agent_dual[first_root].clone();
        if root_dual.is_zero() {
            break;
        }

        // Grow the alternating forest over tight edges.
        let mut agent_seen = vec![false; num_agents];
        let mut item_parent: Vec<Option<usize>> = vec![None; num_items];
        let mut queue = std::collections::VecDeque::new();
        for &r in &roots {
            agent_seen[r] = true;
            queue.push_back(r);
        }
        let mut free_item = None;
        'grow: while let Some(a) = queue.pop_front() {
            for i in 0..num_items {
                if item_parent[i].is_some() || !slack(a, i, &agent_dual, &item_dual).is_zero() {
                    continue;
                }
                item_parent[i] = Some(a);
                match matching.item_mate[i] {
                    None => {
                        free_item = Some(i);
                        break 'grow;
                    }
                    Some(b) => {
                        agent_seen[b] = true;
                        queue.push_back(b);
                    }
                }
            }
        }

        if let Some(mut i) = free_item {
            // Flip the alternating path ending at the free item.
            loop {
                let a = item_parent[i].expect("path item has a parent");
                let previous = matching.agent_mate[a];
                if let Some(p) = previous {
                    matching.item_mate[p] = None;
                }
                matching.agent_mate[a] = Some(i);
                matching.item_mate[i] = Some(a);
                match previous {
                    Some(p) => i = p,
                    None => break,
                }
            }
            continue;
        }

        let mut delta = root_dual;
        for a in (0..num_agents).filter(|&a| agent_seen[a]) {
            for i in (0..num_items).filter(|&i| item_parent[i].is_none()) {
                let s = slack(a, i, &agent_dual, &item_dual);
                if s < delta {
                    delta = s;
                }
            }
        }
        for a in (0..num_agents).filter(|&a| agent_seen[a]) {
            agent_dual[a] -= &delta;
        }
        for i in (0..num_items).filter(|&i| item_parent[i].is_some()) {
            item_dual[i] += &delta;
        }
    }

    (matching, Covering::new(agent_dual, item_dual))
}

pub fn max_weight_matching(market: &Market) -> Matching {
    solve(market.values(), market.num_items()).0
}

pub fn opt_weight(market: &Market) -> Rational {
    max_weight_matching(market).weight(market)
}

/// Edges contained in at least one maximum-weight matching, found by forcing
/// each edge in turn and re-solving the residual market.
pub fn legal_edges(market: &Market) -> BTreeSet<(usize, usize)> {
    let opt = opt_weight(market);
    let agents: Vec<usize> = (0..market.num_agents()).collect();
    let items: Vec<usize> = (0..market.num_items()).collect();
    let mut legal = BTreeSet::new();
    for a in 0..market.num_agents() {
        let rest_agents: Vec<usize> = agents.iter().copied().filter(|&x| x != a).collect();
        for i in 0..market.num_items() {
            let rest_items: Vec<usize> = items.iter().copied().filter(|&x| x != i).collect();
            let forced = opt_weight(&market.restrict(&rest_agents, &rest_items)) + market.value(a, i);
            if forced == opt {
                legal.insert((a, i));
            }
        }
    }
    legal
}

/// Vertices covered by every maximum-weight matching: exactly those whose
/// deletion lowers the optimum.
pub fn always_covered_vertices(market: &Market) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let opt = opt_weight(market);
    let agents = (0..market.num_agents())
        .filter(|&a| opt_weight(&market.without_agent(a)) < opt)
        .collect();
    let items = (0..market.num_items())
        .filter(|&i| opt_weight(&market.without_item(i)) < opt)
        .collect();
    (agents, items)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketAnalysis {
    pub opt_weight: Rational,
    pub legal_edges: BTreeSet<(usize, usize)>,
    pub always_covered_agents: BTreeSet<usize>,
    pub always_covered_items: BTreeSet<usize>,
}

pub fn analyze(market: &Market) -> MarketAnalysis {
    let (always_covered_agents, always_covered_items) = always_covered_vertices(market);
    MarketAnalysis {
        opt_weight: opt_weight(market),
        legal_edges: legal_edges(market),
        always_covered_agents,
        always_covered_items,
    }
}

/// Repeatedly drops an item whose removal keeps the optimum, scanning from
/// the highest position down, until every remaining item is covered by every
/// maximum-weight matching. Returns the pruned market and the removed ids in
/// removal order.
pub fn prune_uncovered_items(market: &Market) -> (Market, Vec<String>) {
    let opt = opt_weight(market);
    let mut current = market.clone();
    let mut removed = Vec::new();
    'scan: loop {
        for i in (0..current.num_items()).rev() {
            let candidate = current.without_item(i);
            if opt_weight(&candidate) == opt {
                removed.push(current.items()[i].clone());
                current = candidate;
                continue 'scan;
            }
        }
        break;
    }
    (current, removed)
}

/// Bounds for the exhaustive enumeration oracle.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationLimits {
    pub max_per_side: usize,
    pub max_results: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_per_side: 20,
            max_results: 1_000_000,
        }
    }
}

/// Every maximum-weight matching (zero-weight edges included), by
/// branch-and-bound over the agents in order.
pub fn enumerate_max_matchings(market: &Market) -> Result<Vec<Matching>> {
    enumerate_max_matchings_with(market, EnumerationLimits::default())
}

pub fn enumerate_max_matchings_with(market: &Market, limits: EnumerationLimits) -> Result<Vec<Matching>> {
    let (na, ni) = (market.num_agents(), market.num_items());
    if na > limits.max_per_side || ni > limits.max_per_side {
        return Err(Error::InstanceTooLarge {
            what: "matching enumeration",
            detail: format!("{na} agents x {ni} items exceeds {} per side", limits.max_per_side),
        });
    }
    let opt = opt_weight(market);
    // best possible contribution of agents k.. ignoring conflicts
    let mut tail_bound = vec![Rational::zero(); na + 1];
    for a in (0..na).rev() {
        let best = market.values()[a].iter().max().cloned().unwrap_or_else(Rational::zero);
        tail_bound[a] = &tail_bound[a + 1] + best;
    }

    struct Search<'a> {
        market: &'a Market,
        opt: Rational,
        tail_bound: Vec<Rational>,
        current: Matching,
        found: Vec<Matching>,
        limit: usize,
    }

    impl Search<'_> {
        fn go(&mut self, agent: usize, weight: Rational) -> Result<()> {
            if &weight + &self.tail_bound[agent] < self.opt {
                return Ok(());
            }
            if agent == self.market.num_agents() {
                if weight == self.opt {
                    if self.found.len() == self.limit {
                        return Err(Error::InstanceTooLarge {
                            what: "matching enumeration",
                            detail: format!("more than {} maximum matchings", self.limit),
                        });
                    }
                    self.found.push(self.current.clone());
                }
                return Ok(());
            }
            self.go(agent + 1, weight.clone())?;
            for i in 0..self.market.num_items() {
                if self.current.agent_of(i).is_none() {
                    self.current.insert(agent, i);
                    self.go(agent + 1, &weight + self.market.value(agent, i))?;
                    self.current.remove(agent, i);
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        market,
        opt,
        tail_bound,
        current: Matching::empty(na, ni),
        found: Vec::new(),
        limit: limits.max_results,
    };
    search.go(0, Rational::zero())?;
    Ok(search.found)
}
