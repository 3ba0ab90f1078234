//! Agent behaviour: utility-maximizing choices, and the adversaries that
//! pick arrival order and break ties.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market::{ArrivalOrder, Market};
use crate::rational::Rational;
use crate::trace::Offer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Choice {
    Take(usize),
    Decline,
}

impl Choice {
    pub fn item(self) -> Option<usize> {
        match self {
            Choice::Take(i) => Some(i),
            Choice::Decline => None,
        }
    }
}

/// What an agent may do when her best utility is exactly 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroUtility {
    /// Either take a maximizer or leave empty-handed.
    Branch,
    /// Always take a maximizer.
    Take,
}

/// The admissible choices of `agent` facing `offers`: utility maximizers in
/// item order, followed by `Decline` when declining is also optimal.
pub fn choice_options(market: &Market, agent: usize, offers: &BTreeMap<usize, Offer>, zero: ZeroUtility) -> Vec<Choice> {
    let mut best: Option<Rational> = None;
    let mut maximizers = Vec::new();
    for (&i, offer) in offers {
        let Some(p) = offer.price() else { continue };
        let u = market.value(agent, i) - p;
        match &best {
            Some(b) if u < *b => {}
            Some(b) if u == *b => maximizers.push(Choice::Take(i)),
            _ => {
                best = Some(u);
                maximizers = vec![Choice::Take(i)];
            }
        }
    }
    match best {
        Some(b) if b > Rational::zero() => maximizers,
        Some(b) if b.is_zero() => {
            if zero == ZeroUtility::Branch {
                maximizers.push(Choice::Decline);
            }
            maximizers
        }
        _ => vec![Choice::Decline],
    }
}

/// The agent's decision, with ties resolved by `adversary`.
pub fn agent_choice(
    market: &Market,
    agent: usize,
    offers: &BTreeMap<usize, Offer>,
    zero: ZeroUtility,
    adversary: &mut dyn Adversary,
) -> Option<usize> {
    let options = choice_options(market, agent, offers, zero);
    let k = if options.len() == 1 { 0 } else { adversary.choose(agent, &options) };
    options[k].item()
}

/// Resolves everything a pricing scheme leaves open: who arrives next and
/// which of several equally good options an agent takes. Both methods
/// return an index into the slice they are given.
pub trait Adversary {
    fn next_arrival(&mut self, step: usize, remaining: &[usize]) -> usize;
    fn choose(&mut self, agent: usize, options: &[Choice]) -> usize;
}

/// Draws a complete arrival order from an adversary.
pub fn draw_order(adversary: &mut dyn Adversary, num_agents: usize) -> ArrivalOrder {
    let mut remaining: Vec<usize> = (0..num_agents).collect();
    let mut seq = Vec::with_capacity(num_agents);
    for step in 1..=num_agents {
        let k = adversary.next_arrival(step, &remaining);
        seq.push(remaining.remove(k));
    }
    ArrivalOrder::new(seq, num_agents).expect("a drawn order is a permutation")
}

/// Where arrivals come from.
#[derive(Debug, Clone)]
pub enum Arrivals {
    /// Agents in instance order.
    Lexicographic,
    Given(ArrivalOrder),
    Seeded(u64),
}

/// How ties are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    /// The first option: lowest item, taking before declining.
    Lexicographic,
    Seeded(u64),
}

/// An adversary made of an arrival source and a tie-break rule, each
/// with its own random stream.
#[derive(Debug, Clone)]
pub struct Policy {
    arrivals: Arrivals,
    order_rng: Option<ChaCha8Rng>,
    tie: TieBreak,
    tie_rng: Option<ChaCha8Rng>,
}

impl Policy {
    pub fn new(arrivals: Arrivals, tie: TieBreak) -> Self {
        let order_rng = match arrivals {
            Arrivals::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(s)),
            _ => None,
        };
        let tie_rng = match tie {
            TieBreak::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(s)),
            TieBreak::Lexicographic => None,
        };
        Policy {
            arrivals,
            order_rng,
            tie,
            tie_rng,
        }
    }

    pub fn lexicographic() -> Self {
        Policy::new(Arrivals::Lexicographic, TieBreak::Lexicographic)
    }

    pub fn ordered(order: ArrivalOrder) -> Self {
        Policy::new(Arrivals::Given(order), TieBreak::Lexicographic)
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie
    }
}

impl Adversary for Policy {
    fn next_arrival(&mut self, step: usize, remaining: &[usize]) -> usize {
        match &self.arrivals {
            Arrivals::Lexicographic => 0,
            Arrivals::Given(order) => {
                let a = order.sequence()[step - 1];
                remaining.iter().position(|&r| r == a).expect("ordered agent has not arrived yet")
            }
            Arrivals::Seeded(_) => self.order_rng.as_mut().expect("seeded").gen_range(0..remaining.len()),
        }
    }

    fn choose(&mut self, _agent: usize, options: &[Choice]) -> usize {
        match self.tie_rng.as_mut() {
            Some(rng) => rng.gen_range(0..options.len()),
            None => 0,
        }
    }
}

/// Replays a fixed decision prefix and takes option 0 beyond it, recording
/// how many options every decision had. Driving it with [`Odometer`]
/// visits every leaf of the decision tree.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    script: Vec<usize>,
    widths: Vec<usize>,
    arrivals_fixed: Option<ArrivalOrder>,
}

impl Scripted {
    fn decide(&mut self, width: usize) -> usize {
        let k = self.widths.len();
        self.widths.push(width);
        self.script.get(k).copied().unwrap_or(0)
    }
}

impl Adversary for Scripted {
    fn next_arrival(&mut self, step: usize, remaining: &[usize]) -> usize {
        if let Some(order) = &self.arrivals_fixed {
            let a = order.sequence()[step - 1];
            return remaining.iter().position(|&r| r == a).expect("ordered agent has not arrived yet");
        }
        if remaining.len() == 1 {
            return 0;
        }
        self.decide(remaining.len())
    }

    fn choose(&mut self, _agent: usize, options: &[Choice]) -> usize {
        self.decide(options.len())
    }
}

/// Depth-first enumeration of every decision sequence.
#[derive(Debug, Clone, Default)]
pub struct Odometer {
    prefix: Vec<usize>,
    arrivals_fixed: Option<ArrivalOrder>,
    done: bool,
}

impl Odometer {
    /// Enumerates arrival orders and tie decisions.
    pub fn new() -> Self {
        Odometer::default()
    }

    /// Enumerates tie decisions only; arrivals follow `order`.
    pub fn with_order(order: ArrivalOrder) -> Self {
        Odometer {
            arrivals_fixed: Some(order),
            ..Odometer::default()
        }
    }

    /// The adversary for the next leaf, or `None` once all are visited.
    pub fn next_adversary(&mut self) -> Option<Scripted> {
        if self.done {
            return None;
        }
        Some(Scripted {
            script: self.prefix.clone(),
            widths: Vec::new(),
            arrivals_fixed: self.arrivals_fixed.clone(),
        })
    }

    /// Advances past the leaf the given adversary just visited.
    pub fn advance(&mut self, visited: &Scripted) {
        let mut path: Vec<usize> = (0..visited.widths.len())
            .map(|k| visited.script.get(k).copied().unwrap_or(0))
            .collect();
        while let Some(last) = path.pop() {
            let k = path.len();
            if last + 1 < visited.widths[k] {
                path.push(last + 1);
                self.prefix = path;
                return;
            }
        }
        self.done = true;
    }

    /// Calls `leaf` once per complete decision sequence.
    pub fn for_each<T, E>(mut self, mut leaf: impl FnMut(&mut Scripted) -> Result<T, E>) -> Result<Vec<T>, E> {
        let mut out = Vec::new();
        while let Some(mut adv) = self.next_adversary() {
            out.push(leaf(&mut adv)?);
            self.advance(&adv);
        }
        Ok(out)
    }
}
