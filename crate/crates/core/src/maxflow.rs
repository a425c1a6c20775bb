//! Exact max-flow over rational capacities (Edmonds-Karp). The augmenting
//! path count is bounded by V*E independent of capacities, so termination
//! does not rely on integrality.

use std::collections::VecDeque;

use num_traits::Zero;

use crate::metric::Rational;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: Rational,
    flow: Rational,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

/// Handle to a forward edge; its reverse twin is `id ^ 1`.
pub(crate) type EdgeId = usize;

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        FlowGraph { adj: vec![Vec::new(); nodes], edges: Vec::new() }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: Rational) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, flow: Rational::zero() });
        self.edges.push(Edge { to: from, cap: Rational::zero(), flow: Rational::zero() });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    pub fn flow_on(&self, id: EdgeId) -> &Rational {
        &self.edges[id].flow
    }

    fn residual(&self, id: EdgeId) -> Rational {
        &self.edges[id].cap - &self.edges[id].flow
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> Rational {
        let mut total = Rational::zero();
        loop {
            // BFS for a shortest augmenting path.
            let mut pred: Vec<Option<EdgeId>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &id in &self.adj[u] {
                    let v = self.edges[id].to;
                    if !seen[v] && self.residual(id) > Rational::zero() {
                        seen[v] = true;
                        pred[v] = Some(id);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            // Bottleneck along the path.
            let mut bottleneck: Option<Rational> = None;
            let mut u = t;
            while u != s {
                let id = pred[u].expect("path reaches s");
                let r = self.residual(id);
                bottleneck = Some(match bottleneck {
                    None => r,
                    Some(b) if r < b => r,
                    Some(b) => b,
                });
                u = self.edges[id ^ 1].to;
            }
            let push = bottleneck.expect("t != s");
            let mut u = t;
            while u != s {
                let id = pred[u].expect("path reaches s");
                self.edges[id].flow = &self.edges[id].flow + &push;
                self.edges[id ^ 1].flow = &self.edges[id ^ 1].flow - &push;
                u = self.edges[id ^ 1].to;
            }
            total = total + push;
        }
    }

    /// Nodes reachable from `s` in the residual graph; after `max_flow` this
    /// is the source side of a minimum cut.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let v = self.edges[id].to;
                if !seen[v] && self.residual(id) > Rational::zero() {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}
