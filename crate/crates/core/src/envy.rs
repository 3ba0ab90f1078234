//! Envy-freeness verifiers and the two objectives of a trace.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};
use crate::trace::Trace;

/// Which posted prices an agent compares her purchase against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvyNotion {
    /// Every step of the run.
    Strong,
    /// Steps up to and including the agent's own arrival.
    ExPost,
    /// The agent's arrival and every later step.
    ExAnte,
    /// Only the agent's own step.
    Weak,
}

impl EnvyNotion {
    pub const ALL: [EnvyNotion; 4] = [EnvyNotion::Strong, EnvyNotion::ExPost, EnvyNotion::ExAnte, EnvyNotion::Weak];

    pub fn name(self) -> &'static str {
        match self {
            EnvyNotion::Strong => "strong",
            EnvyNotion::ExPost => "expost",
            EnvyNotion::ExAnte => "exante",
            EnvyNotion::Weak => "weak",
        }
    }
}

impl fmt::Display for EnvyNotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvyNotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EnvyNotion::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| format!("unknown notion `{s}` (expected strong, expost, exante or weak)"))
    }
}

/// The two dynamic notions the pricing schemes target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timing {
    ExPost,
    ExAnte,
}

impl Timing {
    pub fn envy_notion(self) -> EnvyNotion {
        match self {
            Timing::ExPost => EnvyNotion::ExPost,
            Timing::ExAnte => EnvyNotion::ExAnte,
        }
    }
}

/// The 1-based steps `T_a` agent at `position` looks at in a run of `n`.
pub fn time_window(notion: EnvyNotion, position: usize, n: usize) -> RangeInclusive<usize> {
    assert!(1 <= position && position <= n, "position {position} outside 1..={n}");
    match notion {
        EnvyNotion::Strong => 1..=n,
        EnvyNotion::ExPost => 1..=position,
        EnvyNotion::ExAnte => position..=n,
        EnvyNotion::Weak => position..=position,
    }
}

/// An agent who prefers some offer in her window to what she got.
///
/// `item` is the envied item; when the agent's own purchase has negative
/// utility it is her own item at her own step. `gap` is how much better
/// the envied option is (always positive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub agent: String,
    pub step: usize,
    pub item: String,
    #[serde(with = "crate::rational::as_string")]
    pub gap: Rational,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent `{}` envies `{}` at step {} by {}",
            self.agent,
            self.item,
            self.step,
            format_rational(&self.gap)
        )
    }
}

/// Checks a complete trace against `notion`; returns the first violation
/// in (agent arrival, window step, item) order.
pub fn verify_envy_free(trace: &Trace, notion: EnvyNotion) -> Result<Option<Witness>> {
    trace.validate()?;
    if !trace.is_complete() {
        return Err(Error::MalformedTrace("trace does not cover every agent".into()));
    }
    let market = trace.market();
    let steps = trace.steps();
    let n = steps.len();
    let witness = |agent: usize, step: usize, item: usize, gap: Rational| Witness {
        agent: market.agents()[agent].clone(),
        step,
        item: market.items()[item].clone(),
        gap,
    };

    for (k, own) in steps.iter().enumerate() {
        let a = own.agent;
        let position = k + 1;
        let baseline = match own.purchase {
            Some(x) => {
                let price = own.sale_price().expect("validated purchase has a price");
                let u = market.value(a, x) - price;
                if u < Rational::zero() {
                    return Ok(Some(witness(a, position, x, -u)));
                }
                u
            }
            None => Rational::zero(),
        };
        for t in time_window(notion, position, n) {
            for (&i, offer) in &steps[t - 1].offers {
                let Some(p) = offer.price() else { continue };
                let u = market.value(a, i) - p;
                if u > baseline {
                    return Ok(Some(witness(a, t, i, u - &baseline)));
                }
            }
        }
    }
    Ok(None)
}

/// Total value of the allocation to the agents who received it.
pub fn social_welfare(trace: &Trace) -> Rational {
    let m = trace.market();
    trace
        .allocation()
        .into_iter()
        .fold(Rational::zero(), |acc, (a, i)| acc + m.value(a, i))
}

/// Total of all sale prices.
pub fn revenue(trace: &Trace) -> Rational {
    trace
        .steps()
        .iter()
        .filter_map(|s| s.sale_price())
        .fold(Rational::zero(), |acc, p| acc + p)
}
