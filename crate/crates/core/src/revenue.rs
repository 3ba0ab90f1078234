//! Revenue-maximizing schemes and the strong-to-static reduction.
//!
//! All three schemes sell along a maximum matching `M`; an agent with
//! `x_a = M(a)` is only ever steered towards `x_a`. Agents take an item at
//! zero utility. An optional discount lowers every positive offer by the
//! same amount so that every purchase is strict.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::choice::{agent_choice, Adversary, Policy, ZeroUtility};
use crate::covering::{compute_parameters, refined_covering, Covering};
use crate::envy::{verify_envy_free, EnvyNotion, Timing};
use crate::error::{Error, Result};
use crate::market::{ArrivalOrder, Market};
use crate::matching::{max_weight_matching, prune_uncovered_items, Matching};
use crate::rational::{pow2, Rational};
use crate::trace::{Offer, Trace, TraceBuilder};

/// Ex-post: agents `M` leaves exposed first, then the rest by decreasing
/// dual. Ex-ante: covered agents by increasing dual, then the exposed
/// ones. Ties go to the lower position.
pub fn order_for_revenue(matching: &Matching, cov: &Covering, timing: Timing) -> ArrivalOrder {
    let n = cov.agent_values().len();
    let (mut covered, exposed): (Vec<usize>, Vec<usize>) = (0..n).partition(|&a| matching.item_of(a).is_some());
    let seq = match timing {
        Timing::ExPost => {
            covered.sort_by(|&a, &b| cov.agent(b).cmp(cov.agent(a)).then(a.cmp(&b)));
            exposed.into_iter().chain(covered).collect()
        }
        Timing::ExAnte => {
            covered.sort_by(|&a, &b| cov.agent(a).cmp(cov.agent(b)).then(a.cmp(&b)));
            covered.into_iter().chain(exposed).collect()
        }
    };
    ArrivalOrder::new(seq, n).expect("a partition of the agents is a permutation")
}

/// A uniform discount `eps'` applied to every positive offer (prices never
/// go below 0).
fn discounted(offer: Offer, discount: Option<&Rational>) -> Offer {
    match (offer, discount) {
        (Offer::Price(p), Some(d)) if p > Rational::zero() => {
            let q = p - d;
            Offer::Price(if q < Rational::zero() { Rational::zero() } else { q })
        }
        (offer, _) => offer,
    }
}

fn check_discount(discount: Option<&Rational>) -> Result<()> {
    match discount {
        Some(d) if *d <= Rational::zero() => Err(Error::InvalidParameter(format!("discount {d} must be positive"))),
        _ => Ok(()),
    }
}

/// The pruned market with its refined covering and matching, indexed back
/// into the original market.
struct Prepared {
    pruned: Market,
    kept: Vec<usize>,
    covering: Covering,
    matching: Matching,
}

impl Prepared {
    fn new(market: &Market) -> Result<Self> {
        let (pruned, _) = prune_uncovered_items(market);
        let kept = pruned
            .items()
            .iter()
            .map(|id| market.item_index(id).expect("pruned items come from the market"))
            .collect();
        let covering = refined_covering(&pruned)?;
        let matching = max_weight_matching(&pruned);
        Ok(Prepared {
            pruned,
            kept,
            covering,
            matching,
        })
    }

    /// `x_a` as an original-market item position.
    fn target(&self, a: usize) -> Option<usize> {
        self.matching.item_of(a).map(|k| self.kept[k])
    }
}

/// Runs a fixed order where `offers_for(a, step, available)` decides what
/// agent `a` sees and the agent is expected to buy `expected(a)`.
fn sell(
    market: &Market,
    order: &ArrivalOrder,
    adversary: &mut dyn Adversary,
    mut offers_for: impl FnMut(usize, usize, &std::collections::BTreeSet<usize>) -> BTreeMap<usize, Offer>,
    expected: impl Fn(usize) -> Option<usize>,
) -> Result<Trace> {
    let mut builder = TraceBuilder::new(market);
    for &a in order.sequence() {
        let step = builder.step();
        let offers = offers_for(a, step, builder.available());
        let bought = agent_choice(market, a, &offers, ZeroUtility::Take, adversary);
        builder.record(a, offers, bought);
        if bought != expected(a) {
            return Err(Error::SchemeFailure {
                step,
                reason: format!(
                    "agent `{}` bought {:?}, expected {:?}",
                    market.agents()[a],
                    bought.map(|i| &market.items()[i]),
                    expected(a).map(|i| &market.items()[i])
                ),
                trace: Box::new(builder.snapshot()),
            });
        }
    }
    Ok(builder.finish())
}

fn single_offer(
    market: &Market,
    a: usize,
    target: Option<usize>,
    available: &std::collections::BTreeSet<usize>,
    discount: Option<&Rational>,
) -> BTreeMap<usize, Offer> {
    available
        .iter()
        .map(|&i| {
            let offer = if Some(i) == target {
                discounted(Offer::Price(market.value(a, i).clone()), discount)
            } else {
                Offer::NotOffered
            };
            (i, offer)
        })
        .collect()
}

/// Seller-chosen order, ex-post: every covered agent is offered only her
/// matched item at its full value.
pub fn run_revenue_ex_post(market: &Market, discount: Option<&Rational>) -> Result<Trace> {
    check_discount(discount)?;
    let prep = Prepared::new(market)?;
    let order = order_for_revenue(&prep.matching, &prep.covering, Timing::ExPost);
    sell(
        market,
        &order,
        &mut Policy::lexicographic(),
        |a, _, available| single_offer(market, a, prep.target(a), available, discount),
        |a| prep.target(a),
    )
}

/// Upper bound (exclusive) on the shift `delta` of the ex-ante scheme:
/// the smallest non-tight slack or item dual of the pruned market.
pub fn ex_ante_delta_bound(market: &Market) -> Result<Option<Rational>> {
    let prep = Prepared::new(market)?;
    Ok(delta_bound(&prep))
}

fn delta_bound(prep: &Prepared) -> Option<Rational> {
    let m = &prep.pruned;
    let slacks = (0..m.num_agents())
        .flat_map(|a| (0..m.num_items()).map(move |i| (a, i)))
        .map(|(a, i)| prep.covering.slack(m, a, i))
        .filter(|s| !s.is_zero());
    slacks.chain(prep.covering.item_values().iter().cloned()).min()
}

/// The `delta` the ex-ante scheme uses by default.
pub fn ex_ante_default_delta(market: &Market) -> Result<Rational> {
    let prep = Prepared::new(market)?;
    Ok(compute_parameters(&prep.pruned, &prep.covering).delta)
}

/// Seller-chosen order, ex-ante: at step `s` agent `a` sees every
/// remaining item at `pi(a) + pi(i) - delta/2^s + eps`, except `x_a`
/// which lacks the `+ eps`, with `eps = delta / 2^(n+1)`.
pub fn run_revenue_ex_ante(
    market: &Market,
    delta_override: Option<&Rational>,
    discount: Option<&Rational>,
) -> Result<Trace> {
    check_discount(discount)?;
    let prep = Prepared::new(market)?;
    let delta = match delta_override {
        Some(d) => {
            if *d <= Rational::zero() {
                return Err(Error::InvalidParameter(format!("delta {d} must be positive")));
            }
            if let Some(bound) = delta_bound(&prep) {
                if *d >= bound {
                    return Err(Error::InvalidParameter(format!(
                        "delta {d} must be below {bound}, the smallest non-tight slack or item dual"
                    )));
                }
            }
            d.clone()
        }
        None => compute_parameters(&prep.pruned, &prep.covering).delta,
    };
    let n = market.num_agents();
    let epsilon = &delta / pow2(n + 1);
    let order = order_for_revenue(&prep.matching, &prep.covering, Timing::ExAnte);
    let pruned_of: BTreeMap<usize, usize> = prep.kept.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let cov = &prep.covering;

    sell(
        market,
        &order,
        &mut Policy::lexicographic(),
        |a, step, available| {
            let own = prep.matching.item_of(a);
            available
                .iter()
                .map(|&i| {
                    let offer = match (own, pruned_of.get(&i)) {
                        (Some(x), Some(&k)) => {
                            let base = cov.agent(a) + cov.item(k) - &delta / pow2(step);
                            let p = if k == x { base } else { base + &epsilon };
                            discounted(Offer::Price(p), discount)
                        }
                        _ => Offer::NotOffered,
                    };
                    (i, offer)
                })
                .collect()
        },
        |a| prep.target(a),
    )
}

/// Predetermined order: `M` is a maximum matching of the whole market and
/// each agent is offered only `x_a`, at `v_a(x_a)`.
pub fn run_revenue_weak(market: &Market, order: &ArrivalOrder, discount: Option<&Rational>) -> Result<Trace> {
    check_discount(discount)?;
    let matching = max_weight_matching(market);
    sell(
        market,
        order,
        &mut Policy::lexicographic(),
        |a, _, available| single_offer(market, a, matching.item_of(a), available, discount),
        |a| matching.item_of(a),
    )
}

/// One price per item (or withheld) plus the allocation it supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticPricing {
    pub prices: BTreeMap<usize, Offer>,
    pub allocation: Vec<(usize, usize)>,
}

impl StaticPricing {
    pub fn revenue(&self) -> Rational {
        self.allocation
            .iter()
            .filter_map(|(_, i)| self.prices[i].price())
            .fold(Rational::zero(), |acc, p| acc + p)
    }

    /// Every agent weakly prefers her bundle (or nothing) to every priced
    /// item, and no buyer pays more than her value.
    pub fn is_envy_free(&self, market: &Market) -> bool {
        let owned: BTreeMap<usize, usize> = self.allocation.iter().copied().collect();
        (0..market.num_agents()).all(|a| {
            let own = match owned.get(&a) {
                Some(&i) => match self.prices[&i].price() {
                    Some(p) => market.value(a, i) - p,
                    None => return false,
                },
                None => Rational::zero(),
            };
            own >= Rational::zero()
                && self
                    .prices
                    .iter()
                    .filter_map(|(&i, o)| o.price().map(|p| market.value(a, i) - p))
                    .all(|u| u <= own)
        })
    }
}

/// A strongly envy-free trace as a static solution: sold items keep their
/// sale price, unsold items are withheld.
pub fn static_from_strong(trace: &Trace) -> Result<StaticPricing> {
    if let Some(w) = verify_envy_free(trace, EnvyNotion::Strong)? {
        return Err(Error::InvalidParameter(format!("trace is not strongly envy-free: {w}")));
    }
    let mut prices: BTreeMap<usize, Offer> = (0..trace.market().num_items()).map(|i| (i, Offer::NotOffered)).collect();
    for step in trace.steps() {
        if let (Some(i), Some(p)) = (step.purchase, step.sale_price()) {
            prices.insert(i, Offer::Price(p.clone()));
        }
    }
    Ok(StaticPricing {
        prices,
        allocation: trace.allocation(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envy::{revenue, verify_envy_free};
    use crate::lab::generators::{gen_cyclic_triple, gen_harmonic};
    use crate::market::tests::m1;
    use crate::matching::opt_weight;
    use crate::rational::{int, ratio};

    #[test]
    fn ex_post_order_and_revenue_on_m1() {
        let m = m1();
        let prep = Prepared::new(&m).unwrap();
        assert_eq!(order_for_revenue(&prep.matching, &prep.covering, Timing::ExPost).sequence(), &[0, 1]);
        let t = run_revenue_ex_post(&m, None).unwrap();
        assert_eq!(revenue(&t), int(5));
        assert_eq!(t.steps()[0].sale_price(), Some(&int(3)));
        assert_eq!(verify_envy_free(&t, EnvyNotion::ExPost).unwrap(), None);
    }

    #[test]
    fn exposed_agent_position() {
        let m = Market::from_entries(&["a1", "a2"], &["i"], &[("a1", "i", int(3)), ("a2", "i", int(3))]).unwrap();
        let prep = Prepared::new(&m).unwrap();
        let exposed = (0..2).find(|&a| prep.matching.item_of(a).is_none()).unwrap();
        assert_eq!(order_for_revenue(&prep.matching, &prep.covering, Timing::ExPost).sequence()[0], exposed);
        assert_eq!(order_for_revenue(&prep.matching, &prep.covering, Timing::ExAnte).sequence()[1], exposed);
    }

    #[test]
    fn harmonic_ex_post_collects_the_full_sum() {
        let t = run_revenue_ex_post(&gen_harmonic(3), None).unwrap();
        assert_eq!(revenue(&t), ratio(11, 6));
    }

    #[test]
    fn single_pair_revenues() {
        let m = Market::from_entries(&["a"], &["i"], &[("a", "i", int(4))]).unwrap();
        assert_eq!(revenue(&run_revenue_ex_post(&m, None).unwrap()), int(4));
        let t = run_revenue_ex_ante(&m, Some(&int(1)), None).unwrap();
        assert_eq!(revenue(&t), ratio(7, 2));
    }

    #[test]
    fn ex_ante_m1_pays_value_minus_shifts() {
        let m = m1();
        let delta = ratio(1, 4);
        let t = run_revenue_ex_ante(&m, Some(&delta), None).unwrap();
        assert_eq!(revenue(&t), int(5) - &delta / int(2) - &delta / int(4));
        assert!(int(5) - revenue(&t) <= int(2) * &delta);
        assert_eq!(verify_envy_free(&t, EnvyNotion::ExAnte).unwrap(), None);
    }

    #[test]
    fn ex_ante_delta_must_respect_the_bound() {
        let m = m1();
        let bound = ex_ante_delta_bound(&m).unwrap().unwrap();
        assert!(matches!(run_revenue_ex_ante(&m, Some(&bound), None), Err(Error::InvalidParameter(_))));
        assert!(matches!(run_revenue_ex_ante(&m, Some(&int(0)), None), Err(Error::InvalidParameter(_))));
        assert!(ex_ante_default_delta(&m).unwrap() < bound);
    }

    #[test]
    fn weak_scheme_on_fixed_orders() {
        let m = m1();
        let t = run_revenue_weak(&m, &ArrivalOrder::new(vec![1, 0], 2).unwrap(), None).unwrap();
        assert_eq!(revenue(&t), int(5));
        assert_eq!(verify_envy_free(&t, EnvyNotion::Weak).unwrap(), None);

        let c = gen_cyclic_triple();
        let t = run_revenue_weak(&c, &ArrivalOrder::new(vec![2, 0, 1], 3).unwrap(), None).unwrap();
        assert_eq!(revenue(&t), int(3));
    }

    #[test]
    fn exposed_agent_sees_nothing_in_weak_scheme() {
        let m = Market::from_entries(&["a1", "a2"], &["i"], &[("a1", "i", int(3)), ("a2", "i", int(3))]).unwrap();
        let t = run_revenue_weak(&m, &ArrivalOrder::identity(2), None).unwrap();
        let loser = t.steps().iter().find(|s| s.purchase.is_none()).unwrap();
        assert!(loser.offers.values().all(|o| *o == Offer::NotOffered));
        assert_eq!(revenue(&t), opt_weight(&m));
    }

    #[test]
    fn discount_makes_purchases_strict() {
        let m = m1();
        let d = ratio(1, 100);
        let t = run_revenue_ex_post(&m, Some(&d)).unwrap();
        assert_eq!(revenue(&t), int(5) - int(2) * &d);
        assert!(run_revenue_ex_post(&m, Some(&int(0))).is_err());
    }

    #[test]
    fn static_reduction_of_a_constant_schedule() {
        let m = m1();
        let mut b = TraceBuilder::new(&m);
        let prices = BTreeMap::from([(0, Offer::Price(int(2))), (1, Offer::Price(int(1)))]);
        b.record(0, prices.clone(), Some(0));
        b.record(1, BTreeMap::from([(1, Offer::Price(int(1)))]), Some(1));
        let s = static_from_strong(&b.finish()).unwrap();
        assert_eq!(s.prices, prices);
        assert_eq!(s.revenue(), int(3));
        assert!(s.is_envy_free(&m));
    }

    #[test]
    fn static_reduction_rejects_envious_traces() {
        let t = run_revenue_weak(&m1(), &ArrivalOrder::identity(2), None).unwrap();
        // each agent only ever sees her own item at full value, which nobody envies
        let s = static_from_strong(&t).unwrap();
        assert_eq!(s.revenue(), int(5));
        assert!(s.is_envy_free(&m1()));

        let c = gen_cyclic_triple();
        let mut b = TraceBuilder::new(&c);
        b.record(0, BTreeMap::from([(0, Offer::Price(int(1))), (1, Offer::NotOffered), (2, Offer::NotOffered)]), Some(0));
        b.record(1, BTreeMap::from([(1, Offer::Price(int(0))), (2, Offer::NotOffered)]), Some(1));
        b.record(2, BTreeMap::from([(2, Offer::Price(int(1)))]), Some(2));
        assert!(matches!(static_from_strong(&b.finish()), Err(Error::InvalidParameter(_))));
    }
}
