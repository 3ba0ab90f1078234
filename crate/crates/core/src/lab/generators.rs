//! Instance families: the harmonic gap market, the three-cycle, markets
//! built from 3-regular graphs, and seeded random markets.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ArrivalOrder, Market};
use crate::rational::{int, ratio, Rational};

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// `n` agents and items with `v_{a_j}(i_k) = 1/j` for `k >= j`, else 0.
pub fn gen_harmonic(n: usize) -> Market {
    let values = (1..=n)
        .map(|j| {
            (1..=n)
                .map(|k| if k >= j { ratio(1, j as i64) } else { Rational::zero() })
                .collect()
        })
        .collect();
    Market::new(ids("a", n), ids("i", n), values)
}

/// Three agents on a cycle of three items: `a_j` values `i_j` and
/// `i_{j+1}` (indices mod 3) at 1 and the third item at 0.
pub fn gen_cyclic_triple() -> Market {
    let values = (0..3)
        .map(|j| (0..3).map(|k| if k == j || k == (j + 1) % 3 { int(1) } else { int(0) }).collect())
        .collect();
    Market::new(ids("a", 3), ids("i", 3), values)
}

/// Uniform integer valuations in `[0, max_value]`, drawn row by row from
/// a ChaCha8 stream seeded with `seed`.
pub fn gen_random(num_agents: usize, num_items: usize, max_value: u64, seed: u64) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..num_agents)
        .map(|_| {
            (0..num_items)
                .map(|_| Rational::from_integer(rng.gen_range(0..=max_value).into()))
                .collect()
        })
        .collect();
    Market::new(ids("a", num_agents), ids("i", num_items), values)
}

/// A simple undirected graph on vertices `0..vertices`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn from_json(text: &str) -> Result<Graph> {
        let g: Graph = serde_json::from_str(text).map_err(|e| Error::parse("graph", e.to_string()))?;
        g.check_simple()?;
        Ok(g)
    }

    pub fn complete(n: usize) -> Graph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph { vertices: n, edges }
    }

    pub fn complete_bipartite(left: usize, right: usize) -> Graph {
        let edges = (0..left)
            .flat_map(|u| (0..right).map(move |v| (u, left + v)))
            .collect();
        Graph {
            vertices: left + right,
            edges,
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    fn check_simple(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &self.edges {
            if u >= self.vertices || v >= self.vertices {
                return Err(Error::parse("graph.edges", format!("edge ({u}, {v}) names a missing vertex")));
            }
            if u == v {
                return Err(Error::parse("graph.edges", format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::parse("graph.edges", format!("repeated edge ({u}, {v})")));
            }
        }
        Ok(())
    }

    pub fn check_cubic(&self) -> Result<()> {
        self.check_simple()?;
        if let Some(v) = (0..self.vertices).find(|&v| self.degree(v) != 3) {
            return Err(Error::InvalidParameter(format!(
                "graph is not 3-regular: vertex {v} has degree {}",
                self.degree(v)
            )));
        }
        Ok(())
    }

    pub fn is_vertex_cover(&self, cover: &BTreeSet<usize>) -> bool {
        self.edges.iter().all(|(u, v)| cover.contains(u) || cover.contains(v))
    }

    /// A minimum vertex cover by trying subsets in order of size.
    pub fn min_vertex_cover(&self) -> Result<BTreeSet<usize>> {
        if self.vertices > 24 {
            return Err(Error::InstanceTooLarge {
                what: "vertex cover brute force",
                detail: format!("{} vertices exceeds 24", self.vertices),
            });
        }
        let n = self.vertices;
        (0u32..1 << n)
            .filter(|mask| {
                self.edges
                    .iter()
                    .all(|&(u, v)| mask & (1 << u) != 0 || mask & (1 << v) != 0)
            })
            .min_by_key(|mask| (mask.count_ones(), *mask))
            .map(|mask| (0..n).filter(|&v| mask & (1 << v) != 0).collect())
            .ok_or_else(|| Error::Invariant("the full vertex set is always a cover".into()))
    }
}

/// The pricing market of a 3-regular graph with its two canonical orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexCoverMarket {
    pub market: Market,
    /// Edge agents first (in edge order), then vertex agents.
    pub edge_first: ArrivalOrder,
    /// Vertex agents first, then edge agents.
    pub vertex_first: ArrivalOrder,
}

/// Four items `z{z}_1..z{z}_4` and a vertex agent `v{z}` valuing them at
/// 2 for every vertex; an edge agent `e{u}-{w}` valuing all eight copies
/// of its endpoints at 1 for every edge.
pub fn gen_vertex_cover_market(graph: &Graph) -> Result<VertexCoverMarket> {
    graph.check_cubic()?;
    let n = graph.vertices;
    let m = graph.edges.len();
    let items: Vec<String> = (0..n)
        .flat_map(|z| (1..=4).map(move |k| format!("z{z}_{k}")))
        .collect();
    let agents: Vec<String> = (0..n)
        .map(|z| format!("v{z}"))
        .chain(graph.edges.iter().map(|(u, w)| format!("e{u}-{w}")))
        .collect();
    let copies = |z: usize| 4 * z..4 * z + 4;
    let mut values = vec![vec![Rational::zero(); 4 * n]; n + m];
    for z in 0..n {
        for i in copies(z) {
            values[z][i] = int(2);
        }
    }
    for (k, &(u, w)) in graph.edges.iter().enumerate() {
        for i in copies(u).chain(copies(w)) {
            values[n + k][i] = int(1);
        }
    }
    let market = Market::new(agents, items, values);
    let edge_first = ArrivalOrder::new((n..n + m).chain(0..n).collect(), n + m)?;
    let vertex_first = ArrivalOrder::new((0..n + m).collect(), n + m)?;
    Ok(VertexCoverMarket {
        market,
        edge_first,
        vertex_first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{enumerate_max_matchings, legal_edges, opt_weight};

    #[test]
    fn harmonic_values() {
        let h1 = gen_harmonic(1);
        assert_eq!(h1.value(0, 0), &int(1));
        let h3 = gen_harmonic(3);
        assert_eq!(h3.value(1, 0), &int(0));
        assert_eq!(h3.value(1, 1), &ratio(1, 2));
        assert_eq!(h3.value(1, 2), &ratio(1, 2));
        assert_eq!(h3.utility("a2", "i3", &ratio(1, 2)).unwrap(), int(0));
        assert_eq!(opt_weight(&h3), ratio(11, 6));
    }

    #[test]
    fn cyclic_triple() {
        let c = gen_cyclic_triple();
        assert_eq!(c.value(0, 2), &int(0));
        assert_eq!(c.value(2, 0), &int(1));
        assert_eq!(opt_weight(&c), int(3));
        assert_eq!(legal_edges(&c).len(), 6);
        assert_eq!(enumerate_max_matchings(&c).unwrap().len(), 2);
    }

    #[test]
    fn random_markets_are_seeded() {
        assert!(gen_random(2, 2, 0, 9).values().iter().flatten().all(Zero::is_zero));
        assert_eq!(gen_random(3, 4, 5, 1), gen_random(3, 4, 5, 1));
        assert_ne!(gen_random(3, 4, 5, 1), gen_random(3, 4, 5, 2));
        assert!(gen_random(4, 4, 5, 3).values().iter().flatten().all(|v| *v <= int(5)));
    }

    #[test]
    fn k4_market_shape() {
        let g = Graph::complete(4);
        let vc = gen_vertex_cover_market(&g).unwrap();
        assert_eq!(vc.market.num_items(), 16);
        assert_eq!(vc.market.num_agents(), 10);
        assert_eq!(g.edges.len() * 2, 3 * g.vertices);
        assert_eq!(vc.market.agents()[vc.edge_first.sequence()[0]], "e0-1");
        assert_eq!(vc.market.agents()[vc.vertex_first.sequence()[0]], "v0");
        assert_eq!(g.min_vertex_cover().unwrap().len(), 3);
    }

    #[test]
    fn k33_is_cubic_with_cover_three() {
        let g = Graph::complete_bipartite(3, 3);
        g.check_cubic().unwrap();
        assert_eq!(g.edges.len(), 9);
        assert_eq!(g.min_vertex_cover().unwrap().len(), 3);
    }

    #[test]
    fn rejects_non_cubic_graphs() {
        assert!(gen_vertex_cover_market(&Graph::complete(5)).is_err());
        assert!(Graph::from_json(r#"{"vertices":2,"edges":[[0,0]]}"#).is_err());
        let g = Graph::from_json(r#"{"vertices":4,"edges":[[0,1],[0,2],[0,3],[1,2],[1,3],[2,3]]}"#).unwrap();
        assert_eq!(g, Graph::complete(4));
    }
}
