//! Instance generators and brute-force oracles for small markets.

pub mod adversary;
pub mod generators;
pub mod oracles;
