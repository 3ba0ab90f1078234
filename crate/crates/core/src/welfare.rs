//! Welfare-maximizing dynamic pricing: the ex-post and ex-ante schemes.
//!
//! Both schemes work on the pruned market (every item covered by every
//! maximum matching) with a refined covering `pi`. Before each arrival
//! they build the exchange digraph over the tight edges of what remains,
//! pick the shift branch of every item from a reachability set `S_t`, and
//! post `pi(i) +- shift + j*epsilon` with `j` the item's component index.
//! The maintained matching is updated so that it stays maximum on the
//! remaining market; any agent behaviour the construction rules out is
//! reported as a scheme failure.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::choice::{agent_choice, Adversary, ZeroUtility};
use crate::covering::{compute_parameters, refined_covering, Covering, PricingParameters};
use crate::digraph::{ExchangeDigraph, SccView, Vertex};
use crate::envy::Timing;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::matching::{max_weight_matching, prune_uncovered_items, Matching};
use crate::rational::{int, pow2, Rational};
use crate::trace::{Offer, Trace, TraceBuilder};

/// What remains before step `step`: agents and items (pruned-market
/// positions) and a maximum matching of the remaining tight subgraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicState {
    pub step: usize,
    pub remaining_agents: BTreeSet<usize>,
    pub remaining_items: BTreeSet<usize>,
    pub matching: Matching,
}

impl DynamicState {
    /// `R_t`: remaining agents the matching leaves exposed.
    pub fn unmatched(&self) -> BTreeSet<usize> {
        self.remaining_agents
            .iter()
            .copied()
            .filter(|&a| self.matching.item_of(a).is_none())
            .collect()
    }
}

pub fn build_exchange_digraph(market: &Market, state: &DynamicState, cov: &Covering) -> ExchangeDigraph {
    ExchangeDigraph::build(market, cov, &state.remaining_agents, &state.remaining_items, &state.matching)
}

/// Everything reachable from an exposed agent.
pub fn reach_set_ex_post(state: &DynamicState, graph: &ExchangeDigraph) -> BTreeSet<Vertex> {
    graph.reachable_from(state.unmatched().into_iter().map(Vertex::Agent))
}

/// Everything with a path to a matched agent of dual 0.
pub fn reach_set_ex_ante(state: &DynamicState, graph: &ExchangeDigraph, cov: &Covering) -> BTreeSet<Vertex> {
    graph.reaching(zero_matched(state, cov).into_iter().map(Vertex::Agent))
}

fn zero_matched(state: &DynamicState, cov: &Covering) -> BTreeSet<usize> {
    state
        .remaining_agents
        .iter()
        .copied()
        .filter(|&a| state.matching.item_of(a).is_some() && cov.agent(a).is_zero())
        .collect()
}

/// `pi(i) + delta/2^t + j*eps` inside `S_t`, `pi(i) - delta(1 - 1/2^t) + j*eps`
/// outside.
pub fn post_prices_ex_post(
    state: &DynamicState,
    scc: &SccView,
    s_t: &BTreeSet<Vertex>,
    cov: &Covering,
    params: &PricingParameters,
) -> BTreeMap<usize, Rational> {
    let inside = &params.delta / pow2(state.step);
    let outside = -(&params.delta * (Rational::one() - Rational::one() / pow2(state.step)));
    post_prices(state, scc, s_t, cov, params, inside, outside)
}

/// `pi(i) - delta/2^t + j*eps` inside `S_t`, `pi(i) + delta(1 - 1/2^t) + j*eps`
/// outside.
pub fn post_prices_ex_ante(
    state: &DynamicState,
    scc: &SccView,
    s_t: &BTreeSet<Vertex>,
    cov: &Covering,
    params: &PricingParameters,
) -> BTreeMap<usize, Rational> {
    let inside = -(&params.delta / pow2(state.step));
    let outside = &params.delta * (Rational::one() - Rational::one() / pow2(state.step));
    post_prices(state, scc, s_t, cov, params, inside, outside)
}

fn post_prices(
    state: &DynamicState,
    scc: &SccView,
    s_t: &BTreeSet<Vertex>,
    cov: &Covering,
    params: &PricingParameters,
    inside: Rational,
    outside: Rational,
) -> BTreeMap<usize, Rational> {
    state
        .remaining_items
        .iter()
        .map(|&i| {
            let v = Vertex::Item(i);
            let j = int(scc.index_of(v) as i64);
            let shift = if s_t.contains(&v) { &inside } else { &outside };
            (i, cov.item(i) + shift + j * &params.epsilon)
        })
        .collect()
}

/// Flips the matching along an alternating path of the exchange digraph:
/// item-to-agent arcs leave the matching, agent-to-item arcs enter it.
fn flip_path(matching: &mut Matching, path: &[Vertex]) {
    for w in path.windows(2) {
        if let [Vertex::Item(i), Vertex::Agent(a)] = *w {
            matching.remove(a, i);
        }
    }
    for w in path.windows(2) {
        if let [Vertex::Agent(a), Vertex::Item(i)] = *w {
            matching.insert(a, i);
        }
    }
}

/// Applies the scheme's case analysis for agent `a` choosing `purchase`
/// and returns the state before step `t + 1`. `Err` carries the reason
/// when the choice is one the construction rules out.
#[allow(clippy::too_many_arguments)]
pub fn update_after_purchase(
    market: &Market,
    state: &DynamicState,
    cov: &Covering,
    graph: &ExchangeDigraph,
    scc: &SccView,
    s_t: &BTreeSet<Vertex>,
    notion: Timing,
    a: usize,
    purchase: Option<usize>,
) -> Result<DynamicState, String> {
    let mut matching = state.matching.clone();
    let own = matching.item_of(a);
    let in_s = s_t.contains(&Vertex::Agent(a));
    let zero_dual = cov.agent(a).is_zero();
    let expect_tight = |i: usize| -> Result<(), String> {
        if !state.remaining_items.contains(&i) || !cov.is_tight(market, a, i) {
            return Err(format!("purchase ({a}, {i}) is not a tight edge of the remaining market"));
        }
        Ok(())
    };

    // matched agent buying inside her own component
    let rotate = |matching: &mut Matching, i: usize, x: usize| -> Result<(), String> {
        expect_tight(i)?;
        if !scc.same_component(Vertex::Agent(a), Vertex::Item(i)) {
            return Err(format!("agent {a} bought item {i} outside her component"));
        }
        if i == x {
            matching.remove(a, x);
        } else {
            let cycle = graph
                .shortest_path([Vertex::Item(i)], |v| v == Vertex::Agent(a))
                .ok_or_else(|| format!("no cycle through arc ({a}, {i})"))?;
            flip_path(matching, &cycle);
        }
        Ok(())
    };

    match (notion, own, purchase) {
        (Timing::ExPost, Some(x), Some(i)) if !in_s || !zero_dual => rotate(&mut matching, i, x)?,
        (Timing::ExPost, Some(_), None) if in_s && zero_dual => {
            let path = graph
                .shortest_path(state.unmatched().into_iter().map(Vertex::Agent), |v| v == Vertex::Agent(a))
                .ok_or_else(|| format!("no path from an exposed agent to agent {a}"))?;
            flip_path(&mut matching, &path);
        }
        (Timing::ExPost, None, None) => {}
        (Timing::ExAnte, Some(x), Some(i)) => rotate(&mut matching, i, x)?,
        (Timing::ExAnte, None, Some(i)) if in_s => {
            expect_tight(i)?;
            if !s_t.contains(&Vertex::Item(i)) {
                return Err(format!("exposed agent {a} bought item {i} outside S_t"));
            }
            let targets = zero_matched(state, cov);
            let path = graph
                .shortest_path([Vertex::Item(i)], |v| matches!(v, Vertex::Agent(b) if targets.contains(&b)))
                .ok_or_else(|| format!("no path from item {i} to a matched agent of dual 0"))?;
            flip_path(&mut matching, &path);
        }
        (Timing::ExAnte, None, None) if !in_s => {}
        (_, _, Some(i)) => return Err(format!("agent {a} bought item {i} where she should take nothing")),
        (_, _, None) => return Err(format!("agent {a} took nothing where she should buy")),
    }

    let mut next = state.clone();
    next.step += 1;
    next.remaining_agents.remove(&a);
    if let Some(i) = purchase {
        next.remaining_items.remove(&i);
    }
    next.matching = matching;
    for (b, i) in next.matching.pairs() {
        if !next.remaining_agents.contains(&b) || !next.remaining_items.contains(&i) {
            return Err(format!("matching keeps pair ({b}, {i}) that already left"));
        }
    }
    if let Some(b) = next.unmatched().into_iter().find(|&b| !cov.agent(b).is_zero()) {
        return Err(format!("agent {b} is exposed but has positive dual"));
    }
    Ok(next)
}

/// Internal view of one step, for inspection in tests and tools.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub state: DynamicState,
    pub scc: SccView,
    pub reach_set: BTreeSet<Vertex>,
    /// Posted prices by pruned-market item position.
    pub prices: BTreeMap<usize, Rational>,
    pub agent: usize,
    pub purchase: Option<usize>,
}

/// The precomputed part of a welfare scheme for one market: pruning,
/// refined covering, shift constants and the initial matching.
#[derive(Debug, Clone)]
pub struct WelfareScheme {
    notion: Timing,
    market: Market,
    pruned: Market,
    kept: Vec<usize>,
    removed: Vec<String>,
    covering: Covering,
    params: PricingParameters,
    initial: Matching,
}

impl WelfareScheme {
    pub fn prepare(market: &Market, notion: Timing) -> Result<Self> {
        let (pruned, removed) = prune_uncovered_items(market);
        let kept = pruned
            .items()
            .iter()
            .map(|id| market.item_index(id).expect("pruned items come from the market"))
            .collect();
        let covering = refined_covering(&pruned)?;
        let params = compute_parameters(&pruned, &covering);
        let initial = max_weight_matching(&pruned);
        Ok(WelfareScheme {
            notion,
            market: market.clone(),
            pruned,
            kept,
            removed,
            covering,
            params,
            initial,
        })
    }

    pub fn notion(&self) -> Timing {
        self.notion
    }

    pub fn pruned_market(&self) -> &Market {
        &self.pruned
    }

    pub fn removed_items(&self) -> &[String] {
        &self.removed
    }

    pub fn covering(&self) -> &Covering {
        &self.covering
    }

    pub fn params(&self) -> &PricingParameters {
        &self.params
    }

    /// Original item position of a pruned-market item.
    pub fn original_item(&self, pruned_item: usize) -> usize {
        self.kept[pruned_item]
    }

    pub fn initial_state(&self) -> DynamicState {
        DynamicState {
            step: 1,
            remaining_agents: (0..self.pruned.num_agents()).collect(),
            remaining_items: (0..self.pruned.num_items()).collect(),
            matching: self.initial.clone(),
        }
    }

    pub fn run(&self, adversary: &mut dyn Adversary) -> Result<Trace> {
        self.run_detailed(adversary).map(|(trace, _)| trace)
    }

    pub fn run_detailed(&self, adversary: &mut dyn Adversary) -> Result<(Trace, Vec<StepRecord>)> {
        let mut builder = TraceBuilder::new(&self.market);
        let mut records = Vec::new();
        let mut state = self.initial_state();
        let pruned_of: BTreeMap<usize, usize> = self.kept.iter().enumerate().map(|(k, &i)| (i, k)).collect();

        while !state.remaining_agents.is_empty() {
            let graph = build_exchange_digraph(&self.pruned, &state, &self.covering);
            let scc = graph.components();
            let (s_t, prices) = match self.notion {
                Timing::ExPost => {
                    let s = reach_set_ex_post(&state, &graph);
                    let p = post_prices_ex_post(&state, &scc, &s, &self.covering, &self.params);
                    (s, p)
                }
                Timing::ExAnte => {
                    let s = reach_set_ex_ante(&state, &graph, &self.covering);
                    let p = post_prices_ex_ante(&state, &scc, &s, &self.covering, &self.params);
                    (s, p)
                }
            };
            let offers: BTreeMap<usize, Offer> = builder
                .available()
                .iter()
                .map(|&i| {
                    let offer = match pruned_of.get(&i) {
                        Some(k) => Offer::Price(prices[k].clone()),
                        None => Offer::NotOffered,
                    };
                    (i, offer)
                })
                .collect();

            let remaining: Vec<usize> = state.remaining_agents.iter().copied().collect();
            let a = remaining[adversary.next_arrival(state.step, &remaining)];
            let bought = agent_choice(&self.market, a, &offers, ZeroUtility::Branch, adversary);
            builder.record(a, offers, bought);
            let purchase = bought.map(|i| pruned_of[&i]);

            let next = update_after_purchase(
                &self.pruned,
                &state,
                &self.covering,
                &graph,
                &scc,
                &s_t,
                self.notion,
                a,
                purchase,
            )
            .map_err(|reason| Error::SchemeFailure {
                step: state.step,
                reason,
                trace: Box::new(builder.snapshot()),
            })?;
            records.push(StepRecord {
                state,
                scc,
                reach_set: s_t,
                prices,
                agent: a,
                purchase,
            });
            state = next;
        }
        Ok((builder.finish(), records))
    }
}

/// Prepares and runs a welfare scheme in one go.
pub fn run_welfare_scheme(market: &Market, notion: Timing, adversary: &mut dyn Adversary) -> Result<Trace> {
    WelfareScheme::prepare(market, notion)?.run(adversary)
}
