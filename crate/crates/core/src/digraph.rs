//! The exchange digraph over tight edges and its strongly connected
//! components in a canonical topological order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use crate::covering::Covering;
use crate::market::Market;
use crate::matching::Matching;

/// A vertex of the market graph. Agents order before items, and each side
/// by position, which fixes the tie-break between components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Agent(usize),
    Item(usize),
}

/// Tight edges of the remaining sub-market. Matching edges point item to
/// agent; every other tight edge, and a dummy copy of each matching edge,
/// points agent to item.
#[derive(Debug, Clone)]
pub struct ExchangeDigraph {
    vertices: Vec<Vertex>,
    out: BTreeMap<Vertex, Vec<Vertex>>,
}

impl ExchangeDigraph {
    pub fn build(
        market: &Market,
        cov: &Covering,
        agents: &BTreeSet<usize>,
        items: &BTreeSet<usize>,
        matching: &Matching,
    ) -> Self {
        let vertices: Vec<Vertex> = agents
            .iter()
            .map(|&a| Vertex::Agent(a))
            .chain(items.iter().map(|&i| Vertex::Item(i)))
            .collect();
        let mut out: BTreeMap<Vertex, Vec<Vertex>> = vertices.iter().map(|&v| (v, Vec::new())).collect();
        for &a in agents {
            for &i in items {
                if !cov.is_tight(market, a, i) {
                    continue;
                }
                if matching.contains(a, i) {
                    out.get_mut(&Vertex::Item(i)).expect("item vertex").push(Vertex::Agent(a));
                }
                out.get_mut(&Vertex::Agent(a)).expect("agent vertex").push(Vertex::Item(i));
            }
        }
        ExchangeDigraph { vertices, out }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn successors(&self, v: Vertex) -> &[Vertex] {
        self.out.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_arc(&self, from: Vertex, to: Vertex) -> bool {
        self.successors(from).contains(&to)
    }

    pub fn reverse(&self) -> ExchangeDigraph {
        let mut out: BTreeMap<Vertex, Vec<Vertex>> = self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for (&u, succ) in &self.out {
            for &v in succ {
                out.get_mut(&v).expect("known vertex").push(u);
            }
        }
        ExchangeDigraph {
            vertices: self.vertices.clone(),
            out,
        }
    }

    /// Every vertex reachable from `sources` (sources included).
    pub fn reachable_from(&self, sources: impl IntoIterator<Item = Vertex>) -> BTreeSet<Vertex> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<Vertex> = VecDeque::new();
        for s in sources {
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in self.successors(u) {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Every vertex with a path into `targets` (targets included).
    pub fn reaching(&self, targets: impl IntoIterator<Item = Vertex>) -> BTreeSet<Vertex> {
        self.reverse().reachable_from(targets)
    }

    /// A shortest path (by BFS, scanning successors in order) from any of
    /// `sources` to any vertex satisfying `is_target`, inclusive of both ends.
    pub fn shortest_path(
        &self,
        sources: impl IntoIterator<Item = Vertex>,
        is_target: impl Fn(Vertex) -> bool,
    ) -> Option<Vec<Vertex>> {
        let mut parent: BTreeMap<Vertex, Option<Vertex>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in sources {
            if parent.insert(s, None).is_none() {
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            if is_target(u) {
                let mut path = vec![u];
                let mut cur = u;
                while let Some(Some(p)) = parent.get(&cur) {
                    path.push(*p);
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            for &v in self.successors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(v) {
                    e.insert(Some(u));
                    queue.push_back(v);
                }
            }
        }
        None
    }

    pub fn components(&self) -> SccView {
        SccView::new(self)
    }
}

/// Strongly connected components `C_1 .. C_q` in topological order, each
/// arc between components going from a lower to a higher index. Among the
/// valid orders the one taking, at each point, the available component
/// with the smallest vertex is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccView {
    components: Vec<Vec<Vertex>>,
    index: BTreeMap<Vertex, usize>,
}

impl SccView {
    fn new(g: &ExchangeDigraph) -> Self {
        let raw = tarjan(g);
        let mut comp_of: BTreeMap<Vertex, usize> = BTreeMap::new();
        for (c, members) in raw.iter().enumerate() {
            for &v in members {
                comp_of.insert(v, c);
            }
        }
        let q = raw.len();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); q];
        let mut indegree = vec![0usize; q];
        for &u in g.vertices() {
            for &v in g.successors(u) {
                let (cu, cv) = (comp_of[&u], comp_of[&v]);
                if cu != cv && succ[cu].insert(cv) {
                    indegree[cv] += 1;
                }
            }
        }
        let key = |c: usize| *raw[c].iter().min().expect("component is non-empty");
        let mut heap: BinaryHeap<Reverse<(Vertex, usize)>> =
            (0..q).filter(|&c| indegree[c] == 0).map(|c| Reverse((key(c), c))).collect();
        let mut components = Vec::with_capacity(q);
        while let Some(Reverse((_, c))) = heap.pop() {
            let mut members = raw[c].clone();
            members.sort();
            components.push(members);
            for &d in &succ[c] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    heap.push(Reverse((key(d), d)));
                }
            }
        }
        let index = components
            .iter()
            .enumerate()
            .flat_map(|(j, members)| members.iter().map(move |&v| (v, j + 1)))
            .collect();
        SccView { components, index }
    }

    pub fn components(&self) -> &[Vec<Vertex>] {
        &self.components
    }

    /// 1-based topological index `j` of the component containing `v`.
    pub fn index_of(&self, v: Vertex) -> usize {
        self.index[&v]
    }

    pub fn same_component(&self, u: Vertex, v: Vertex) -> bool {
        self.index_of(u) == self.index_of(v)
    }
}

fn tarjan(g: &ExchangeDigraph) -> Vec<Vec<Vertex>> {
    struct State<'a> {
        g: &'a ExchangeDigraph,
        counter: usize,
        index: BTreeMap<Vertex, usize>,
        low: BTreeMap<Vertex, usize>,
        stack: Vec<Vertex>,
        on_stack: BTreeSet<Vertex>,
        out: Vec<Vec<Vertex>>,
    }

    impl State<'_> {
        fn visit(&mut self, v: Vertex) {
            self.index.insert(v, self.counter);
            self.low.insert(v, self.counter);
            self.counter += 1;
            self.stack.push(v);
            self.on_stack.insert(v);
            for &w in self.g.successors(v) {
                if !self.index.contains_key(&w) {
                    self.visit(w);
                    let lw = self.low[&w];
                    let lv = self.low.get_mut(&v).expect("visited");
                    *lv = (*lv).min(lw);
                } else if self.on_stack.contains(&w) {
                    let iw = self.index[&w];
                    let lv = self.low.get_mut(&v).expect("visited");
                    *lv = (*lv).min(iw);
                }
            }
            if self.low[&v] == self.index[&v] {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("stack holds v");
                    self.on_stack.remove(&w);
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                self.out.push(comp);
            }
        }
    }

    let mut st = State {
        g,
        counter: 0,
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        stack: Vec::new(),
        on_stack: BTreeSet::new(),
        out: Vec::new(),
    };
    for &v in g.vertices() {
        if !st.index.contains_key(&v) {
            st.visit(v);
        }
    }
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tests::m1;
    use crate::rational::int;
    use Vertex::{Agent, Item};

    fn all(n: usize) -> BTreeSet<usize> {
        (0..n).collect()
    }

    #[test]
    fn m1_has_two_pair_components() {
        let m = m1();
        let cov = Covering::new(vec![int(1), int(1)], vec![int(2), int(1)]);
        let mm = Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let g = ExchangeDigraph::build(&m, &cov, &all(2), &all(2), &mm);
        let scc = g.components();
        assert_eq!(
            scc.components(),
            &[vec![Agent(0), Item(0)], vec![Agent(1), Item(1)]]
        );
        assert_eq!(scc.index_of(Item(1)), 2);
        assert!(g.reachable_from([]).is_empty());
    }

    #[test]
    fn cyclic_instance_is_one_component() {
        let m = crate::lab::generators::gen_cyclic_triple();
        let cov = Covering::new(vec![int(0); 3], vec![int(1); 3]);
        let mm = Matching::from_pairs(3, 3, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        let g = ExchangeDigraph::build(&m, &cov, &all(3), &all(3), &mm);
        assert_eq!(g.components().components().len(), 1);

        // with a2 unmatched, everything is still reachable from her
        let partial = Matching::from_pairs(3, 3, &[(0, 0), (2, 2)]).unwrap();
        let g = ExchangeDigraph::build(&m, &cov, &all(3), &all(3), &partial);
        let reach = g.reachable_from([Agent(1)]);
        assert!(reach.contains(&Item(1)) && reach.contains(&Item(2)));
    }

    #[test]
    fn single_pair_forms_a_two_cycle() {
        let m = Market::from_entries(&["a"], &["i"], &[("a", "i", int(4))]).unwrap();
        let cov = Covering::new(vec![int(1)], vec![int(3)]);
        let mm = Matching::from_pairs(1, 1, &[(0, 0)]).unwrap();
        let g = ExchangeDigraph::build(&m, &cov, &all(1), &all(1), &mm);
        assert_eq!(g.components().components(), &[vec![Agent(0), Item(0)]]);
    }

    #[test]
    fn arcs_respect_topological_order() {
        // a1 tight to i1 (matched) and i2; a2 matched to i2
        let m = Market::from_entries(
            &["a1", "a2"],
            &["i1", "i2"],
            &[("a1", "i1", int(2)), ("a1", "i2", int(2)), ("a2", "i2", int(3))],
        )
        .unwrap();
        let cov = Covering::new(vec![int(1), int(2)], vec![int(1), int(1)]);
        let mm = Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let g = ExchangeDigraph::build(&m, &cov, &all(2), &all(2), &mm);
        let scc = g.components();
        for &u in g.vertices() {
            for &v in g.successors(u) {
                assert!(scc.index_of(u) <= scc.index_of(v));
            }
        }
        assert!(scc.index_of(Agent(0)) < scc.index_of(Agent(1)));
        let path = g.shortest_path([Agent(0)], |v| v == Agent(1)).unwrap();
        assert_eq!(path, vec![Agent(0), Item(1), Agent(1)]);
        assert_eq!(g.reaching([Agent(1)]), BTreeSet::from([Agent(0), Agent(1), Item(0), Item(1)]));
    }
}
