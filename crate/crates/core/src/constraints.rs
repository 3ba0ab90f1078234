//! Systems of difference constraints `x - y >= c`, solved by Bellman-Ford
//! over exact rationals.
//!
//! A constraint `x - y >= c` is the shortest-path relaxation
//! `y <= x + (-c)`, i.e. an arc `x -> y` of length `-c`. Variable 0 is the
//! designated zero; every assignment returned has it fixed at 0.

use num_traits::Zero;

use crate::rational::Rational;

pub const ZERO_VAR: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub x: usize,
    pub y: usize,
    pub bound: Rational,
}

#[derive(Debug, Clone, Default)]
pub struct DifferenceConstraints {
    names: Vec<String>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Feasible(Vec<Rational>),
    /// A cycle of variables whose constraints sum to a contradiction.
    Infeasible(Vec<usize>),
}

impl Solution {
    pub fn assignment(&self) -> Option<&[Rational]> {
        match self {
            Solution::Feasible(v) => Some(v),
            Solution::Infeasible(_) => None,
        }
    }
}

impl DifferenceConstraints {
    pub fn new() -> Self {
        DifferenceConstraints {
            names: vec!["0".to_string()],
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// `x - y >= bound`
    pub fn at_least(&mut self, x: usize, y: usize, bound: Rational) {
        self.constraints.push(Constraint { x, y, bound });
    }

    /// `x - y == value`
    pub fn equal(&mut self, x: usize, y: usize, value: Rational) {
        self.at_least(y, x, -value.clone());
        self.at_least(x, y, value);
    }

    pub fn is_satisfied_by(&self, assignment: &[Rational]) -> bool {
        self.constraints
            .iter()
            .all(|c| &assignment[c.x] - &assignment[c.y] >= c.bound)
    }

    /// Any feasible assignment (with the zero variable at 0), or a
    /// contradictory cycle.
    pub fn solve(&self) -> Solution {
        let n = self.num_vars();
        // virtual source at distance 0 from every variable
        let dist: Vec<Option<Rational>> = vec![Some(Rational::zero()); n];
        match self.bellman_ford(dist) {
            Ok(dist) => {
                let dist: Vec<Rational> = dist.into_iter().map(|d| d.expect("all reachable")).collect();
                let shift = dist[ZERO_VAR].clone();
                Solution::Feasible(dist.into_iter().map(|d| d - &shift).collect())
            }
            Err(cycle) => Solution::Infeasible(cycle),
        }
    }

    /// The pointwise greatest assignment with the zero variable at 0:
    /// shortest-path distances from the zero variable. Variables that no
    /// constraint bounds from above come back as `None` (unbounded).
    pub fn solve_greatest(&self) -> Result<Vec<Option<Rational>>, Vec<usize>> {
        let mut dist = vec![None; self.num_vars()];
        dist[ZERO_VAR] = Some(Rational::zero());
        self.bellman_ford(dist)
    }

    fn bellman_ford(&self, mut dist: Vec<Option<Rational>>) -> Result<Vec<Option<Rational>>, Vec<usize>> {
        let n = self.num_vars();
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut last_relaxed = None;
        for _ in 0..n {
            last_relaxed = None;
            for c in &self.constraints {
                let Some(dx) = &dist[c.x] else { continue };
                let candidate = dx - &c.bound;
                if dist[c.y].as_ref().is_none_or(|dy| candidate < *dy) {
                    dist[c.y] = Some(candidate);
                    pred[c.y] = Some(c.x);
                    last_relaxed = Some(c.y);
                }
            }
            if last_relaxed.is_none() {
                return Ok(dist);
            }
        }
        // still relaxing after n rounds: walk predecessors into the cycle
        let mut v = last_relaxed.expect("relaxation happened");
        for _ in 0..n {
            v = pred[v].expect("relaxed vertex has a predecessor");
        }
        let start = v;
        let mut cycle = vec![start];
        let mut u = pred[start].expect("cycle vertex has a predecessor");
        while u != start {
            cycle.push(u);
            u = pred[u].expect("cycle vertex has a predecessor");
        }
        cycle.reverse();
        Err(cycle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn interval_is_feasible() {
        let mut sys = DifferenceConstraints::new();
        let x = sys.add_var("x");
        sys.at_least(x, ZERO_VAR, int(1));
        sys.at_least(ZERO_VAR, x, int(-2));
        let Solution::Feasible(a) = sys.solve() else { panic!("feasible") };
        assert!(a[x] >= int(1) && a[x] <= int(2));
        assert!(sys.is_satisfied_by(&a));
        assert_eq!(sys.solve_greatest().unwrap()[x], Some(int(2)));
    }

    #[test]
    fn positive_cycle_is_infeasible() {
        let mut sys = DifferenceConstraints::new();
        let x = sys.add_var("x");
        let y = sys.add_var("y");
        sys.at_least(x, y, int(1));
        sys.at_least(y, x, int(0));
        let Solution::Infeasible(cycle) = sys.solve() else { panic!("infeasible") };
        let mut sorted = cycle.clone();
        sorted.sort();
        assert_eq!(sorted, vec![x, y]);
        // the witness cycle's constraints really sum past zero
        let total: Rational = sys
            .constraints()
            .iter()
            .filter(|c| cycle.contains(&c.x) && cycle.contains(&c.y))
            .map(|c| c.bound.clone())
            .sum();
        assert!(total > int(0));
    }

    #[test]
    fn unbounded_variables_are_reported() {
        let mut sys = DifferenceConstraints::new();
        let x = sys.add_var("x");
        sys.at_least(x, ZERO_VAR, int(3));
        assert_eq!(sys.solve_greatest().unwrap()[x], None);
    }

    #[test]
    fn equalities_hold_exactly() {
        let mut sys = DifferenceConstraints::new();
        let x = sys.add_var("x");
        let y = sys.add_var("y");
        sys.equal(x, y, int(5));
        sys.at_least(y, ZERO_VAR, int(0));
        let Solution::Feasible(a) = sys.solve() else { panic!("feasible") };
        assert_eq!(&a[x] - &a[y], int(5));
    }
}
