//! Exhaustive revenue oracles.
//!
//! The dynamic searches only ever post the item that is sold at a step:
//! withholding an item removes comparisons from every envy check and
//! never removes a purchase, so any envy-free schedule can be thinned to
//! one of this form with the same revenue.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::constraints::{DifferenceConstraints, ZERO_VAR};
use crate::error::{Error, Result};
use crate::market::{ArrivalOrder, Market};
use crate::rational::Rational;
use crate::revenue::StaticPricing;
use crate::trace::{Offer, Trace, TraceBuilder};

/// Size limits for the exhaustive oracles.
#[derive(Debug, Clone, Copy)]
pub struct OracleBound {
    pub max_agents: usize,
    pub max_items: usize,
}

impl OracleBound {
    pub const STATIC: OracleBound = OracleBound { max_agents: 7, max_items: 7 };
    pub const GRID: OracleBound = OracleBound { max_agents: 16, max_items: 32 };

    fn check(&self, market: &Market, what: &'static str) -> Result<()> {
        if market.num_agents() > self.max_agents || market.num_items() > self.max_items {
            return Err(Error::InstanceTooLarge {
                what,
                detail: format!(
                    "{} agents x {} items exceeds {} x {}",
                    market.num_agents(),
                    market.num_items(),
                    self.max_agents,
                    self.max_items
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRevenue {
    pub revenue: Rational,
    pub pricing: StaticPricing,
}

/// Best static envy-free revenue with unsold items withheld, by
/// enumerating allocations and taking the greatest feasible prices for
/// each.
pub fn oracle_static_ef_revenue(market: &Market) -> Result<StaticRevenue> {
    oracle_static_ef_revenue_within(market, OracleBound::STATIC)
}

pub fn oracle_static_ef_revenue_within(market: &Market, bound: OracleBound) -> Result<StaticRevenue> {
    bound.check(market, "static envy-free revenue oracle")?;
    let mut best = StaticRevenue {
        revenue: Rational::zero(),
        pricing: StaticPricing {
            prices: (0..market.num_items()).map(|i| (i, Offer::NotOffered)).collect(),
            allocation: Vec::new(),
        },
    };
    let mut assignment: Vec<Option<usize>> = vec![None; market.num_agents()];
    let mut used = vec![false; market.num_items()];
    enumerate_allocations(market, 0, &mut assignment, &mut used, &mut |alloc| {
        if let Some((revenue, prices)) = best_prices(market, alloc) {
            if revenue > best.revenue {
                let allocation = alloc
                    .iter()
                    .enumerate()
                    .filter_map(|(a, i)| i.map(|i| (a, i)))
                    .collect();
                best = StaticRevenue {
                    revenue,
                    pricing: StaticPricing { prices, allocation },
                };
            }
        }
    });
    Ok(best)
}

fn enumerate_allocations(
    market: &Market,
    agent: usize,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    visit: &mut dyn FnMut(&[Option<usize>]),
) {
    if agent == market.num_agents() {
        visit(assignment);
        return;
    }
    enumerate_allocations(market, agent + 1, assignment, used, visit);
    for i in 0..market.num_items() {
        // selling an item the buyer values at 0 never adds revenue
        if used[i] || market.value(agent, i).is_zero() {
            continue;
        }
        used[i] = true;
        assignment[agent] = Some(i);
        enumerate_allocations(market, agent + 1, assignment, used, visit);
        assignment[agent] = None;
        used[i] = false;
    }
}

/// Greatest envy-free prices for a fixed allocation (`None` if there are
/// none).
fn best_prices(market: &Market, alloc: &[Option<usize>]) -> Option<(Rational, BTreeMap<usize, Offer>)> {
    let mut sys = DifferenceConstraints::new();
    let sold: Vec<(usize, usize)> = alloc.iter().enumerate().filter_map(|(a, i)| i.map(|i| (a, i))).collect();
    let var: BTreeMap<usize, usize> = sold.iter().map(|&(_, i)| (i, sys.add_var(format!("p{i}")))).collect();
    for (&_, &p) in &var {
        sys.at_least(p, ZERO_VAR, Rational::zero());
    }
    for a in 0..market.num_agents() {
        match alloc[a] {
            Some(x) => {
                sys.at_least(ZERO_VAR, var[&x], -market.value(a, x).clone());
                for (&i, &p) in &var {
                    if i != x {
                        sys.at_least(p, var[&x], market.value(a, i) - market.value(a, x));
                    }
                }
            }
            None => {
                for (&i, &p) in &var {
                    sys.at_least(p, ZERO_VAR, market.value(a, i).clone());
                }
            }
        }
    }
    let greatest = sys.solve_greatest().ok()?;
    let mut prices: BTreeMap<usize, Offer> = (0..market.num_items()).map(|i| (i, Offer::NotOffered)).collect();
    let mut revenue = Rational::zero();
    for (&i, &p) in &var {
        let value = greatest[p].clone().expect("prices are bounded by the buyer's value");
        revenue += &value;
        prices.insert(i, Offer::Price(value));
    }
    Some((revenue, prices))
}

/// One posted `(item, price)` per step, or nothing.
type Schedule = Vec<Option<(usize, Rational)>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridRevenue {
    pub revenue: Rational,
    /// A schedule attaining it.
    pub trace: Trace,
    /// Search-tree nodes visited.
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Window {
    /// Each agent compares against her own and earlier steps.
    Past,
    /// Each agent compares against every step.
    All,
}

struct GridSearch<'a> {
    market: &'a Market,
    grid: Vec<Rational>,
    window: Window,
    /// item classes: items with identical valuation columns
    class: Vec<usize>,
    suffix_bound: Vec<Rational>,
    best: Rational,
    best_schedule: Option<(Vec<usize>, Schedule)>,
    nodes: u64,
}

impl GridSearch<'_> {
    fn new<'a>(market: &'a Market, grid: &[Rational], window: Window) -> GridSearch<'a> {
        let column = |i: usize| (0..market.num_agents()).map(|a| market.value(a, i).clone()).collect::<Vec<_>>();
        let mut class = Vec::with_capacity(market.num_items());
        for i in 0..market.num_items() {
            let c = (0..i).find(|&j| column(j) == column(i)).map(|j| class[j]).unwrap_or(i);
            class.push(c);
        }
        let mut grid: Vec<Rational> = grid.iter().filter(|p| **p >= Rational::zero()).cloned().collect();
        grid.sort();
        grid.dedup();
        GridSearch {
            market,
            grid,
            window,
            class,
            suffix_bound: Vec::new(),
            best: Rational::zero(),
            best_schedule: None,
            nodes: 0,
        }
    }

    /// Can `agent` buy `offer` (or nothing) given the earlier steps and,
    /// for the all-steps window, without upsetting earlier agents?
    fn admissible(&self, order: &[usize], schedule: &Schedule, agent: usize, offer: &Option<(usize, Rational)>) -> bool {
        let m = self.market;
        let own = match offer {
            Some((i, p)) => m.value(agent, *i) - p,
            None => Rational::zero(),
        };
        if own < Rational::zero() {
            return false;
        }
        for (i, p) in schedule.iter().flatten() {
            if m.value(agent, *i) - p > own {
                return false;
            }
        }
        if self.window == Window::All {
            if let Some((i, p)) = offer {
                for (k, earlier) in schedule.iter().enumerate() {
                    let b = order[k];
                    let theirs = match earlier {
                        Some((j, q)) => m.value(b, *j) - q,
                        None => Rational::zero(),
                    };
                    if m.value(b, *i) - p > theirs {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn search(&mut self, order: &[usize], schedule: &mut Schedule, sold: &mut Vec<bool>, revenue: Rational) {
        self.nodes += 1;
        let t = schedule.len();
        if t == order.len() {
            if revenue > self.best || self.best_schedule.is_none() {
                self.best = revenue;
                self.best_schedule = Some((order.to_vec(), schedule.clone()));
            }
            return;
        }
        if self.best_schedule.is_some() && &revenue + &self.suffix_bound[t] <= self.best {
            return;
        }
        let agent = order[t];
        let mut tried_classes = BTreeSet::new();
        // higher prices first so good schedules are found early
        for i in 0..self.market.num_items() {
            if sold[i] || self.market.value(agent, i).is_zero() || !tried_classes.insert(self.class[i]) {
                continue;
            }
            for p in self.grid.clone().iter().rev() {
                let offer = Some((i, p.clone()));
                if !self.admissible(order, schedule, agent, &offer) {
                    continue;
                }
                sold[i] = true;
                schedule.push(offer);
                self.search(order, schedule, sold, &revenue + p);
                schedule.pop();
                sold[i] = false;
            }
        }
        if self.admissible(order, schedule, agent, &None) {
            schedule.push(None);
            self.search(order, schedule, sold, revenue);
            schedule.pop();
        }
    }

    fn run_order(&mut self, order: &[usize]) {
        let m = self.market;
        let top = self.grid.last().cloned().unwrap_or_else(Rational::zero);
        let mut suffix = vec![Rational::zero(); order.len() + 1];
        for t in (0..order.len()).rev() {
            let best_value = m.values()[order[t]].iter().max().cloned().unwrap_or_else(Rational::zero);
            let cap = if best_value < top { best_value } else { top.clone() };
            suffix[t] = &suffix[t + 1] + cap;
        }
        self.suffix_bound = suffix;
        let mut schedule = Vec::with_capacity(order.len());
        let mut sold = vec![false; m.num_items()];
        self.search(order, &mut schedule, &mut sold, Rational::zero());
    }

    fn into_result(self) -> GridRevenue {
        let (order, schedule) = self.best_schedule.expect("the all-decline schedule is always admissible");
        let mut builder = TraceBuilder::new(self.market);
        for (a, offer) in order.iter().zip(&schedule) {
            let offers = builder
                .available()
                .iter()
                .map(|&i| match offer {
                    Some((j, p)) if *j == i => (i, Offer::Price(p.clone())),
                    _ => (i, Offer::NotOffered),
                })
                .collect();
            builder.record(*a, offers, offer.as_ref().map(|(i, _)| *i));
        }
        GridRevenue {
            revenue: self.best,
            trace: builder.finish(),
            nodes: self.nodes,
        }
    }
}

/// Best ex-post envy-free revenue for a fixed order over schedules whose
/// posted prices come from `grid`, the seller breaking ties.
pub fn oracle_expost_revenue_opt(market: &Market, order: &ArrivalOrder, grid: &[Rational]) -> Result<GridRevenue> {
    OracleBound::GRID.check(market, "ex-post revenue grid search")?;
    let mut search = GridSearch::new(market, grid, Window::Past);
    search.run_order(order.sequence());
    Ok(search.into_result())
}

/// Best strongly envy-free revenue over every arrival order and every
/// schedule with prices from `grid`.
pub fn oracle_strong_dynamic_revenue(market: &Market, grid: &[Rational]) -> Result<GridRevenue> {
    if market.num_agents() > 6 || market.num_items() > 8 {
        return Err(Error::InstanceTooLarge {
            what: "strong dynamic revenue search",
            detail: format!("{} agents x {} items exceeds 6 x 8", market.num_agents(), market.num_items()),
        });
    }
    let mut search = GridSearch::new(market, grid, Window::All);
    let mut order: Vec<usize> = (0..market.num_agents()).collect();
    loop {
        search.run_order(&order);
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(search.into_result())
}

/// Steps `v` to the next lexicographic permutation; false after the last.
pub fn next_permutation(v: &mut [usize]) -> bool {
    let Some(k) = (1..v.len()).rev().find(|&k| v[k - 1] < v[k]) else {
        return false;
    };
    let j = (k..v.len()).rev().find(|&j| v[j] > v[k - 1]).expect("a larger element exists");
    v.swap(k - 1, j);
    v[k..].reverse();
    true
}
