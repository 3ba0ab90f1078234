//! Runs a scheme under every arrival order and every tie decision.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::choice::{agent_choice, draw_order, Adversary, Odometer, ZeroUtility};
use crate::envy::{revenue, social_welfare, verify_envy_free, EnvyNotion, Timing};
use crate::error::{Error, Result};
use crate::market::Market;
use crate::rational::Rational;
use crate::revenue::{run_revenue_ex_ante, run_revenue_ex_post, run_revenue_weak};
use crate::trace::{Offer, Trace, TraceBuilder};
use crate::welfare::WelfareScheme;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeDescriptor {
    WelfareExPost,
    WelfareExAnte,
    /// Fixed prices at every step; agents take an item at zero utility.
    StaticPrices(BTreeMap<usize, Offer>),
    RevenueExPost,
    RevenueExAnte(Option<Rational>),
    RevenueWeak,
}

/// Fixed posted prices, the adversary choosing arrivals and ties.
pub fn run_static_prices(market: &Market, prices: &BTreeMap<usize, Offer>, adversary: &mut dyn Adversary) -> Trace {
    let mut builder = TraceBuilder::new(market);
    let mut remaining: Vec<usize> = (0..market.num_agents()).collect();
    while !remaining.is_empty() {
        let step = builder.step();
        let a = remaining.remove(adversary.next_arrival(step, &remaining));
        let offers: BTreeMap<usize, Offer> = builder
            .available()
            .iter()
            .map(|&i| (i, prices.get(&i).cloned().unwrap_or(Offer::NotOffered)))
            .collect();
        let bought = agent_choice(market, a, &offers, ZeroUtility::Take, adversary);
        builder.record(a, offers, bought);
    }
    builder.finish()
}

pub const DEFAULT_MAX_AGENTS: usize = 6;

/// Calls `visit` on the trace of every branch; returns the branch count.
pub fn for_each_branch(
    market: &Market,
    scheme: &SchemeDescriptor,
    max_agents: usize,
    mut visit: impl FnMut(&Trace) -> Result<()>,
) -> Result<usize> {
    if market.num_agents() > max_agents {
        return Err(Error::InstanceTooLarge {
            what: "exhaustive adversary",
            detail: format!("{} agents exceeds {max_agents}", market.num_agents()),
        });
    }
    let leaves = match scheme {
        SchemeDescriptor::WelfareExPost | SchemeDescriptor::WelfareExAnte => {
            let timing = if *scheme == SchemeDescriptor::WelfareExPost {
                Timing::ExPost
            } else {
                Timing::ExAnte
            };
            let prepared = WelfareScheme::prepare(market, timing)?;
            Odometer::new().for_each(|adv| {
                let trace = prepared.run(adv)?;
                visit(&trace)
            })?
        }
        SchemeDescriptor::StaticPrices(prices) => Odometer::new().for_each(|adv| {
            let trace = run_static_prices(market, prices, adv);
            visit(&trace)
        })?,
        SchemeDescriptor::RevenueExPost => vec![visit(&run_revenue_ex_post(market, None)?)?],
        SchemeDescriptor::RevenueExAnte(delta) => vec![visit(&run_revenue_ex_ante(market, delta.as_ref(), None)?)?],
        SchemeDescriptor::RevenueWeak => Odometer::new().for_each(|adv| {
            let order = draw_order(adv, market.num_agents());
            visit(&run_revenue_weak(market, &order, None)?)
        })?,
    };
    Ok(leaves.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversaryReport {
    pub branches: usize,
    #[serde(serialize_with = "as_strings")]
    pub welfare_values: BTreeSet<Rational>,
    #[serde(serialize_with = "as_strings")]
    pub revenue_values: BTreeSet<Rational>,
    /// Whether every branch passed each notion's verifier.
    pub all_pass: BTreeMap<String, bool>,
}

fn as_strings<S: serde::Serializer>(values: &BTreeSet<Rational>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(values.iter().map(|v| v.to_string()))
}

impl AdversaryReport {
    pub fn min_welfare(&self) -> Option<&Rational> {
        self.welfare_values.first()
    }

    pub fn max_welfare(&self) -> Option<&Rational> {
        self.welfare_values.last()
    }

    pub fn min_revenue(&self) -> Option<&Rational> {
        self.revenue_values.first()
    }

    pub fn max_revenue(&self) -> Option<&Rational> {
        self.revenue_values.last()
    }

    pub fn passes(&self, notion: EnvyNotion) -> bool {
        self.all_pass[notion.name()]
    }
}

/// Folds traces into an [`AdversaryReport`].
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    report: AdversaryReport,
}

impl Default for ReportBuilder {
    fn default() -> Self {
        ReportBuilder {
            report: AdversaryReport {
                branches: 0,
                welfare_values: BTreeSet::new(),
                revenue_values: BTreeSet::new(),
                all_pass: EnvyNotion::ALL.iter().map(|n| (n.name().to_string(), true)).collect(),
            },
        }
    }
}

impl ReportBuilder {
    pub fn add(&mut self, trace: &Trace) -> Result<()> {
        let r = &mut self.report;
        r.branches += 1;
        r.welfare_values.insert(social_welfare(trace));
        r.revenue_values.insert(revenue(trace));
        for notion in EnvyNotion::ALL {
            if verify_envy_free(trace, notion)?.is_some() {
                r.all_pass.insert(notion.name().to_string(), false);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> AdversaryReport {
        self.report
    }
}

/// Aggregated objectives and verifier outcomes over every branch.
pub fn oracle_exhaustive_adversary(market: &Market, scheme: &SchemeDescriptor) -> Result<AdversaryReport> {
    let mut builder = ReportBuilder::default();
    for_each_branch(market, scheme, DEFAULT_MAX_AGENTS, |trace| builder.add(trace))?;
    Ok(builder.finish())
}
