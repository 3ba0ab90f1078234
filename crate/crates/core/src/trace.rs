//! Execution traces of dynamic pricing schemes and their JSON form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ArrivalOrder, Market, MarketFile};
use crate::rational::{format_rational, parse_rational, Rational};

const NOT_OFFERED: &str = "NOT_OFFERED";

/// A posted price, or an item withheld at this step. A withheld item can
/// neither be bought nor envied; it orders above every rational price.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Offer {
    Price(Rational),
    NotOffered,
}

impl Offer {
    pub fn price(&self) -> Option<&Rational> {
        match self {
            Offer::Price(p) => Some(p),
            Offer::NotOffered => None,
        }
    }

    fn to_text(&self) -> String {
        match self {
            Offer::Price(p) => format_rational(p),
            Offer::NotOffered => NOT_OFFERED.to_string(),
        }
    }

    fn from_text(text: &str) -> Result<Offer, String> {
        if text == NOT_OFFERED {
            Ok(Offer::NotOffered)
        } else {
            parse_rational(text).map(Offer::Price)
        }
    }
}

/// One arrival: the agent, the items still unsold, what was posted for
/// each of them, and what (if anything) the agent bought.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub agent: usize,
    pub available: BTreeSet<usize>,
    pub offers: BTreeMap<usize, Offer>,
    pub purchase: Option<usize>,
}

impl Step {
    pub fn sale_price(&self) -> Option<&Rational> {
        self.purchase.and_then(|i| self.offers.get(&i)).and_then(Offer::price)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    market: Market,
    steps: Vec<Step>,
}

impl Trace {
    pub fn new(market: Market) -> Self {
        Trace { market, steps: Vec::new() }
    }

    /// Builds a trace and checks its invariants.
    pub fn from_steps(market: Market, steps: Vec<Step>) -> Result<Self> {
        let trace = Trace { market, steps };
        trace.validate()?;
        Ok(trace)
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub(crate) fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub fn is_complete(&self) -> bool {
        self.steps.len() == self.market.num_agents()
    }

    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.agent).collect()
    }

    pub fn arrival_order(&self) -> Result<ArrivalOrder> {
        ArrivalOrder::new(self.order(), self.market.num_agents())
            .map_err(|_| Error::MalformedTrace("steps do not list every agent exactly once".into()))
    }

    /// `(agent, item)` for every purchase, in step order.
    pub fn allocation(&self) -> Vec<(usize, usize)> {
        self.steps
            .iter()
            .filter_map(|s| s.purchase.map(|i| (s.agent, i)))
            .collect()
    }

    /// Checks the structural invariants: agents arrive at most once,
    /// `I_1` is every item, `I_{t+1} = I_t - purchase`, offers cover exactly
    /// `I_t`, and purchases are of offered, available items.
    pub fn validate(&self) -> Result<()> {
        let malformed = |step: usize, msg: String| Error::MalformedTrace(format!("step {}: {msg}", step + 1));
        let mut seen = vec![false; self.market.num_agents()];
        let mut available: BTreeSet<usize> = (0..self.market.num_items()).collect();
        for (t, step) in self.steps.iter().enumerate() {
            if step.agent >= seen.len() {
                return Err(malformed(t, format!("agent index {} out of range", step.agent)));
            }
            if std::mem::replace(&mut seen[step.agent], true) {
                return Err(malformed(t, format!("agent `{}` arrives twice", self.market.agents()[step.agent])));
            }
            if step.available != available {
                return Err(malformed(t, "available items do not match earlier purchases".into()));
            }
            if !step.offers.keys().copied().eq(available.iter().copied()) {
                return Err(malformed(t, "offers must list exactly the available items".into()));
            }
            if let Some(i) = step.purchase {
                if !available.contains(&i) {
                    return Err(malformed(t, "purchased item is not available".into()));
                }
                if step.offers[&i] == Offer::NotOffered {
                    return Err(malformed(t, "purchased item was not offered".into()));
                }
                available.remove(&i);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TraceFile::from_trace(self)).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Trace> {
        let file: TraceFile = serde_json::from_str(text).map_err(|e| Error::MalformedTrace(e.to_string()))?;
        file.into_trace()
    }
}

/// Incremental construction used by the schemes: tracks `I_t` and fills
/// in `available` on every step.
#[derive(Debug, Clone)]
pub(crate) struct TraceBuilder {
    trace: Trace,
    available: BTreeSet<usize>,
}

impl TraceBuilder {
    pub fn new(market: &Market) -> Self {
        TraceBuilder {
            available: (0..market.num_items()).collect(),
            trace: Trace::new(market.clone()),
        }
    }

    pub fn available(&self) -> &BTreeSet<usize> {
        &self.available
    }

    pub fn step(&self) -> usize {
        self.trace.steps.len() + 1
    }

    pub fn record(&mut self, agent: usize, offers: BTreeMap<usize, Offer>, purchase: Option<usize>) {
        let step = Step {
            agent,
            available: self.available.clone(),
            offers,
            purchase,
        };
        if let Some(i) = purchase {
            self.available.remove(&i);
        }
        self.trace.push(step);
    }

    pub fn snapshot(&self) -> Trace {
        self.trace.clone()
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    market: MarketFile,
    steps: Vec<StepFile>,
}

#[derive(Serialize, Deserialize)]
struct StepFile {
    agent: String,
    available: Vec<String>,
    offers: BTreeMap<String, String>,
    purchase: Option<String>,
}

impl TraceFile {
    fn from_trace(trace: &Trace) -> Self {
        let m = &trace.market;
        let steps = trace
            .steps
            .iter()
            .map(|s| StepFile {
                agent: m.agents()[s.agent].clone(),
                available: s.available.iter().map(|&i| m.items()[i].clone()).collect(),
                offers: s.offers.iter().map(|(&i, o)| (m.items()[i].clone(), o.to_text())).collect(),
                purchase: s.purchase.map(|i| m.items()[i].clone()),
            })
            .collect();
        TraceFile {
            market: MarketFile::from_market(m, None),
            steps,
        }
    }

    fn into_trace(self) -> Result<Trace> {
        let market = self
            .market
            .into_instance()
            .map_err(|e| Error::MalformedTrace(format!("market: {e}")))?
            .market;
        let item = |id: &str, t: usize| {
            market
                .item_index(id)
                .map_err(|_| Error::MalformedTrace(format!("step {t}: unknown item `{id}`")))
        };
        let mut steps = Vec::with_capacity(self.steps.len());
        for (k, s) in self.steps.into_iter().enumerate() {
            let t = k + 1;
            let agent = market
                .agent_index(&s.agent)
                .map_err(|_| Error::MalformedTrace(format!("step {t}: unknown agent `{}`", s.agent)))?;
            let available = s.available.iter().map(|id| item(id, t)).collect::<Result<BTreeSet<_>>>()?;
            let mut offers = BTreeMap::new();
            for (id, text) in &s.offers {
                let offer = Offer::from_text(text)
                    .map_err(|m| Error::MalformedTrace(format!("step {t}: offer for `{id}`: {m}")))?;
                offers.insert(item(id, t)?, offer);
            }
            let purchase = s.purchase.as_deref().map(|id| item(id, t)).transpose()?;
            steps.push(Step {
                agent,
                available,
                offers,
                purchase,
            });
        }
        Trace::from_steps(market, steps)
    }
}
