//! Envy-free posted pricing for unit-demand markets.
//!
//! Agents arrive one at a time and buy at most one item at the prices
//! posted for them. The crate has dynamic schemes that maximise welfare
//! or revenue under several envy notions, verifiers for those notions and
//! brute-force oracles for small instances.

#![allow(clippy::needless_range_loop)]

pub mod choice;
pub mod constraints;
pub mod covering;
pub mod digraph;
pub mod envy;
pub mod error;
pub mod lab;
pub mod market;
pub mod matching;
pub mod rational;
pub mod revenue;
pub mod trace;
pub mod welfare;

pub use choice::{Adversary, Arrivals, Choice, Odometer, Policy, Scripted, TieBreak, ZeroUtility};
pub use covering::{compute_parameters, egervary_covering, refined_covering, Covering, PricingParameters};
pub use envy::{revenue as trace_revenue, social_welfare, verify_envy_free, EnvyNotion, Timing, Witness};
pub use error::{Error, Result};
pub use market::{load_instance, load_market, ArrivalOrder, Instance, Market};
pub use matching::{analyze, max_weight_matching, opt_weight, Matching, MarketAnalysis};
pub use rational::Rational;
pub use revenue::{run_revenue_ex_ante, run_revenue_ex_post, run_revenue_weak, StaticPricing};
pub use trace::{Offer, Step, Trace};
pub use welfare::{run_welfare_scheme, WelfareScheme};
