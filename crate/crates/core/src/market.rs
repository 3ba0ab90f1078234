//! Unit-demand market model and the JSON instance format.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, Rational};

/// Agents, items and a complete valuation table. Valuations are
/// non-negative and stored densely as `values[agent][item]`.
///
/// Agents and items are addressed by their position in the instance; that
/// position is also the "id order" used by every deterministic tie-break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Market {
    agents: Vec<String>,
    items: Vec<String>,
    values: Vec<Vec<Rational>>,
}

impl Market {
    /// Builds a market from a dense table. Panics on shape mismatch or
    /// negative values; use [`Market::from_entries`] for checked input.
    pub fn new(agents: Vec<String>, items: Vec<String>, values: Vec<Vec<Rational>>) -> Self {
        assert_eq!(values.len(), agents.len(), "one valuation row per agent");
        for row in &values {
            assert_eq!(row.len(), items.len(), "one valuation per item");
            assert!(row.iter().all(|v| *v >= Rational::zero()), "valuations must be non-negative");
        }
        Market { agents, items, values }
    }

    /// Builds a market from sparse `(agent, item, value)` entries; absent
    /// pairs are valued 0.
    pub fn from_entries<A, I>(agents: &[A], items: &[I], entries: &[(&str, &str, Rational)]) -> Result<Self>
    where
        A: AsRef<str>,
        I: AsRef<str>,
    {
        let agents: Vec<String> = agents.iter().map(|a| a.as_ref().to_string()).collect();
        let items: Vec<String> = items.iter().map(|i| i.as_ref().to_string()).collect();
        check_unique("agents", &agents)?;
        check_unique("items", &items)?;
        let mut values = vec![vec![Rational::zero(); items.len()]; agents.len()];
        for (agent, item, value) in entries {
            let a = agents
                .iter()
                .position(|x| x == agent)
                .ok_or_else(|| Error::UnknownAgent(agent.to_string()))?;
            let i = items
                .iter()
                .position(|x| x == item)
                .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
            if *value < Rational::zero() {
                return Err(Error::parse(
                    format!("valuations.{agent}.{item}"),
                    "valuation must be non-negative",
                ));
            }
            values[a][i] = value.clone();
        }
        Ok(Market { agents, items, values })
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn value(&self, agent: usize, item: usize) -> &Rational {
        &self.values[agent][item]
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAgent(id.to_string()))
    }

    pub fn item_index(&self, id: &str) -> Result<usize> {
        self.items
            .iter()
            .position(|i| i == id)
            .ok_or_else(|| Error::UnknownItem(id.to_string()))
    }

    /// `v_a(i) - p`, by id.
    pub fn utility(&self, agent: &str, item: &str, price: &Rational) -> Result<Rational> {
        let a = self.agent_index(agent)?;
        let i = self.item_index(item)?;
        Ok(&self.values[a][i] - price)
    }

    /// The sub-market induced by the given agent and item positions (kept in
    /// their original relative order).
    pub fn restrict(&self, agents: &[usize], items: &[usize]) -> Market {
        Market {
            agents: agents.iter().map(|&a| self.agents[a].clone()).collect(),
            items: items.iter().map(|&i| self.items[i].clone()).collect(),
            values: agents
                .iter()
                .map(|&a| items.iter().map(|&i| self.values[a][i].clone()).collect())
                .collect(),
        }
    }

    pub fn without_item(&self, item: usize) -> Market {
        let agents: Vec<usize> = (0..self.num_agents()).collect();
        let items: Vec<usize> = (0..self.num_items()).filter(|&i| i != item).collect();
        self.restrict(&agents, &items)
    }

    pub fn without_agent(&self, agent: usize) -> Market {
        let agents: Vec<usize> = (0..self.num_agents()).filter(|&a| a != agent).collect();
        let items: Vec<usize> = (0..self.num_items()).collect();
        self.restrict(&agents, &items)
    }
}

fn check_unique(field: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::parse(field, format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

/// A permutation of the agents, stored as agent positions in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalOrder(Vec<usize>);

impl ArrivalOrder {
    pub fn new(sequence: Vec<usize>, num_agents: usize) -> Result<Self> {
        let mut seen = vec![false; num_agents];
        if sequence.len() != num_agents {
            return Err(Error::parse(
                "order",
                format!("order lists {} agents, market has {num_agents}", sequence.len()),
            ));
        }
        for &a in &sequence {
            if a >= num_agents || std::mem::replace(&mut seen[a], true) {
                return Err(Error::parse("order", "order is not a permutation of the agents"));
            }
        }
        Ok(ArrivalOrder(sequence))
    }

    pub fn identity(num_agents: usize) -> Self {
        ArrivalOrder((0..num_agents).collect())
    }

    pub fn from_ids<S: AsRef<str>>(market: &Market, ids: &[S]) -> Result<Self> {
        let sequence = ids
            .iter()
            .map(|id| market.agent_index(id.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        ArrivalOrder::new(sequence, market.num_agents())
    }

    pub fn sequence(&self) -> &[usize] {
        &self.0
    }

    /// 1-based arrival position of every agent (`sigma`).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (k, &a) in self.0.iter().enumerate() {
            pos[a] = k + 1;
        }
        pos
    }

    pub fn ids(&self, market: &Market) -> Vec<String> {
        self.0.iter().map(|&a| market.agents()[a].clone()).collect()
    }
}

/// A market together with an optional arrival order, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub market: Market,
    pub order: Option<ArrivalOrder>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct MarketFile {
    pub agents: Vec<String>,
    pub items: Vec<String>,
    #[serde(default)]
    pub valuations: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl MarketFile {
    pub(crate) fn from_market(market: &Market, order: Option<&ArrivalOrder>) -> Self {
        let valuations = market
            .agents
            .iter()
            .enumerate()
            .map(|(a, agent)| {
                let row = market
                    .items
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !market.values[a][*i].is_zero())
                    .map(|(i, item)| (item.clone(), format_rational(&market.values[a][i])))
                    .collect();
                (agent.clone(), row)
            })
            .collect();
        MarketFile {
            agents: market.agents.clone(),
            items: market.items.clone(),
            valuations,
            order: order.map(|o| o.ids(market)),
        }
    }

    pub(crate) fn into_instance(self) -> Result<Instance> {
        check_unique("agents", &self.agents)?;
        check_unique("items", &self.items)?;
        let agent_pos: HashMap<String, usize> =
            self.agents.iter().enumerate().map(|(k, a)| (a.clone(), k)).collect();
        let item_pos: HashMap<&str, usize> =
            self.items.iter().enumerate().map(|(k, i)| (i.as_str(), k)).collect();
        let mut values = vec![vec![Rational::zero(); self.items.len()]; self.agents.len()];
        for (agent, row) in &self.valuations {
            let a = *agent_pos
                .get(agent.as_str())
                .ok_or_else(|| Error::parse(format!("valuations.{agent}"), "unknown agent"))?;
            for (item, text) in row {
                let field = format!("valuations.{agent}.{item}");
                let i = *item_pos
                    .get(item.as_str())
                    .ok_or_else(|| Error::parse(field.as_str(), "unknown item"))?;
                let value = parse_rational(text).map_err(|m| Error::parse(field.as_str(), m))?;
                if value < Rational::zero() {
                    return Err(Error::parse(field, "valuation must be non-negative"));
                }
                values[a][i] = value;
            }
        }
        let market = Market {
            agents: self.agents,
            items: self.items,
            values,
        };
        let order = self
            .order
            .map(|ids| {
                let seq = ids
                    .iter()
                    .map(|id| {
                        agent_pos
                            .get(id)
                            .copied()
                            .ok_or_else(|| Error::parse("order", format!("unknown agent `{id}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ArrivalOrder::new(seq, market.num_agents())
            })
            .transpose()?;
        Ok(Instance { market, order })
    }
}

pub fn load_instance(text: &str) -> Result<Instance> {
    let file: MarketFile =
        serde_json::from_str(text).map_err(|e| Error::parse("instance", e.to_string()))?;
    file.into_instance()
}

pub fn load_market(text: &str) -> Result<Market> {
    load_instance(text).map(|inst| inst.market)
}

pub fn instance_to_json(market: &Market, order: Option<&ArrivalOrder>) -> String {
    let file = MarketFile::from_market(market, order);
    serde_json::to_string_pretty(&file).expect("market serialization cannot fail")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub diagnostics: Vec<Diagnostic>,
    pub num_agents: usize,
    pub num_items: usize,
    pub nonzero_valuations: usize,
}

pub fn validate_market(market: &Market) -> Validation {
    let mut diagnostics = Vec::new();
    if market.num_agents() == 0 {
        diagnostics.push(Diagnostic {
            severity: Severity::Error,
            message: "market has no agents".into(),
        });
    }
    if market.num_items() == 0 {
        diagnostics.push(Diagnostic {
            severity: Severity::Error,
            message: "market has no items".into(),
        });
    }
    if market.num_items() > 0 {
        for (a, row) in market.values.iter().enumerate() {
            if row.iter().all(Zero::is_zero) {
                diagnostics.push(Diagnostic {
                    severity: Severity::Warning,
                    message: format!("agent `{}` values every item at 0", market.agents[a]),
                });
            }
        }
    }
    let nonzero_valuations = market.values.iter().flatten().filter(|v| !v.is_zero()).count();
    Validation {
        diagnostics,
        num_agents: market.num_agents(),
        num_items: market.num_items(),
        nonzero_valuations,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    pub(crate) fn m1() -> Market {
        load_market(
            r#"{"agents":["a1","a2"],"items":["i1","i2"],
                "valuations":{"a1":{"i1":"3","i2":"1"},"a2":{"i1":"2","i2":"2"}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn loads_m1() {
        let m = m1();
        assert_eq!(m.value(0, 0), &int(3));
        assert_eq!(m.value(0, 1), &int(1));
        assert_eq!(m.value(1, 0), &int(2));
        assert_eq!(m.value(1, 1), &int(2));
    }

    #[test]
    fn missing_entries_default_to_zero() {
        let m = load_market(
            r#"{"agents":["a1","a2"],"items":["i1","i2"],
                "valuations":{"a1":{"i1":"3","i2":"1"},"a2":{"i1":"2"}}}"#,
        )
        .unwrap();
        assert_eq!(m.value(1, 1), &int(0));
    }

    #[test]
    fn fractions_stay_exact() {
        let m = load_market(r#"{"agents":["a"],"items":["i"],"valuations":{"a":{"i":"1/3"}}}"#).unwrap();
        assert_eq!(m.value(0, 0), &ratio(1, 3));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let cases = [
            (r#"{"agents":["a"],"items":["i"],"valuations":{"a":{"i":"-1"}}}"#, "valuations.a.i"),
            (r#"{"agents":["a","a"],"items":["i"]}"#, "agents"),
            (r#"{"agents":["a"],"items":["i","i"]}"#, "items"),
            (r#"{"agents":["a"],"items":["i"],"valuations":{"a":{"i":"1/0"}}}"#, "valuations.a.i"),
            (r#"{"agents":["a"],"items":["i"],"valuations":{"a":{"i":"0.5"}}}"#, "valuations.a.i"),
            (r#"{"agents":["a"],"items":["i"],"valuations":{"b":{"i":"1"}}}"#, "valuations.b"),
            (r#"{"agents":["a"],"items":["i"],"order":["z"]}"#, "order"),
            (r#"{"agents":["a"],"items":"#, "instance"),
        ];
        for (text, field) in cases {
            match load_market(text) {
                Err(Error::Parse { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("expected parse error for {text}, got {other:?}"),
            }
        }
    }

    #[test]
    fn utility_examples() {
        let m = m1();
        assert_eq!(m.utility("a1", "i1", &int(2)).unwrap(), int(1));
        assert_eq!(m.utility("a2", "i2", &int(2)).unwrap(), int(0));
        assert!(matches!(m.utility("zz", "i1", &int(0)), Err(Error::UnknownAgent(_))));
        assert!(matches!(m.utility("a1", "zz", &int(0)), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn validation_examples() {
        assert!(validate_market(&m1()).diagnostics.is_empty());

        let lazy = Market::from_entries(&["a1", "a2"], &["i1"], &[("a1", "i1", int(1))]).unwrap();
        let diags = validate_market(&lazy).diagnostics;
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.contains("a2"));

        let empty = Market::from_entries::<&str, &str>(&["a1"], &[], &[]).unwrap();
        let diags = validate_market(&empty).diagnostics;
        assert!(diags.iter().any(|d| d.severity == Severity::Error));
    }

    #[test]
    fn instance_round_trip_keeps_order() {
        let m = m1();
        let order = ArrivalOrder::new(vec![1, 0], 2).unwrap();
        let inst = load_instance(&instance_to_json(&m, Some(&order))).unwrap();
        assert_eq!(inst.market, m);
        assert_eq!(inst.order, Some(order));
    }

    #[test]
    fn arrival_order_must_be_permutation() {
        assert!(ArrivalOrder::new(vec![0, 0], 2).is_err());
        assert!(ArrivalOrder::new(vec![0], 2).is_err());
        assert_eq!(ArrivalOrder::new(vec![1, 0], 2).unwrap().positions(), vec![2, 1]);
    }

    proptest! {
        #[test]
        fn utility_is_linear_in_price(v in 0i64..50, p1n in 0i64..100, p1d in 1i64..9, p2n in 0i64..100, p2d in 1i64..9) {
            let m = Market::from_entries(&["a"], &["i"], &[("a", "i", int(v))]).unwrap();
            let (p1, p2) = (ratio(p1n, p1d), ratio(p2n, p2d));
            let diff = m.utility("a", "i", &p1).unwrap() - m.utility("a", "i", &p2).unwrap();
            prop_assert_eq!(diff, p2 - p1);
        }
    }
}
