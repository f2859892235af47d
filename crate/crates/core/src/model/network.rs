use std::collections::HashMap;

use crate::error::{Error, Result};

/// Road latency `a * x^d + b` for `x` vehicles on the road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latency {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Latency {
    pub fn linear(a: f64, b: f64) -> Self {
        Latency { a, b, d: 1.0 }
    }

    pub fn eval(&self, x: usize) -> f64 {
        let x = x as f64;
        let pow = if self.d == 1.0 {
            x
        } else if self.d.fract() == 0.0 && self.d <= 64.0 {
            x.powi(self.d as i32)
        } else {
            x.powf(self.d)
        };
        self.a * pow + self.b
    }

    pub fn is_linear(&self) -> bool {
        self.d == 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub latency: Latency,
}

/// Directed road network. Nodes and edges are addressed by their index in
/// document order; string ids are kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if seen.insert(n.as_str(), i).is_some() {
                return Err(Error::validation(format!("nodes[{i}]"), format!("duplicate node id {n:?}")));
            }
        }
        let mut edge_ids = HashMap::new();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            let path = |field: &str| format!("edges[{i}].{field}");
            if edge_ids.insert(e.id.as_str(), i).is_some() {
                return Err(Error::validation(path("id"), format!("duplicate edge id {:?}", e.id)));
            }
            if e.tail >= nodes.len() {
                return Err(Error::validation(path("tail"), "unknown node"));
            }
            if e.head >= nodes.len() {
                return Err(Error::validation(path("head"), "unknown node"));
            }
            let Latency { a, b, d } = e.latency;
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::validation(path("a"), "must be finite and nonnegative"));
            }
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::validation(path("b"), "must be finite and nonnegative"));
            }
            if !(d.is_finite() && d >= 1.0) {
                return Err(Error::validation(path("d"), "congestion exponent must be at least 1"));
            }
            outgoing[e.tail].push(i);
        }
        Ok(Network { nodes, edges, outgoing })
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }
}

/// All simple directed paths from `s` to `t`, as edge-index sequences in
/// lexicographic order. `s == t` yields the single empty path.
///
/// Fails with [`Error::PathExplosion`] as soon as more than `cap` paths exist.
pub fn enumerate_paths(net: &Network, s: usize, t: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    assert!(cap >= 1, "path cap must be positive");
    let explosion = || Error::PathExplosion {
        from: net.nodes[s].clone(),
        to: net.nodes[t].clone(),
        cap,
    };
    if s == t {
        return Ok(vec![Vec::new()]);
    }
    let mut paths = Vec::new();
    let mut on_path = vec![false; net.nodes.len()];
    let mut stack: Vec<usize> = Vec::new();
    // Iterative DFS; `cursor[k]` is the next outgoing slot to try at depth k.
    let mut frontier = vec![s];
    let mut cursor = vec![0usize];
    on_path[s] = true;
    while let Some(&node) = frontier.last() {
        let depth = frontier.len() - 1;
        let outs = net.outgoing(node);
        if cursor[depth] >= outs.len() {
            on_path[node] = false;
            frontier.pop();
            cursor.pop();
            stack.pop();
            continue;
        }
        let e = outs[cursor[depth]];
        cursor[depth] += 1;
        let next = net.edges[e].head;
        if next == t {
            let mut p = stack.clone();
            p.push(e);
            paths.push(p);
            if paths.len() > cap {
                return Err(explosion());
            }
        } else if !on_path[next] {
            on_path[next] = true;
            stack.push(e);
            frontier.push(next);
            cursor.push(0);
        }
    }
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, arcs: &[(usize, usize)]) -> Network {
        let nodes = (0..n).map(|i| format!("n{i}")).collect();
        let edges = arcs
            .iter()
            .enumerate()
            .map(|(i, &(tail, head))| Edge { id: format!("e{}", i + 1), tail, head, latency: Latency::linear(5.0, 10.0) })
            .collect();
        Network::new(nodes, edges).unwrap()
    }

    #[test]
    fn latency_examples() {
        let lin = Latency::linear(5.0, 10.0);
        assert_eq!(lin.eval(0), 10.0);
        assert_eq!(lin.eval(4), 30.0);
        assert_eq!(Latency { a: 5.0, b: 10.0, d: 2.0 }.eval(3), 55.0);
    }

    #[test]
    fn corridor_network_paths() {
        // s=0, u=1, v=2, t=3; e1 s->u, e2 s->v, e3 v->u, e4 u->t, e5 v->t
        let g = net(4, &[(0, 1), (0, 2), (2, 1), (1, 3), (2, 3)]);
        let paths = enumerate_paths(&g, 0, 3, 100).unwrap();
        assert_eq!(paths, vec![vec![0, 3], vec![1, 2, 3], vec![1, 4]]);
    }

    #[test]
    fn trivial_cases() {
        let g = net(2, &[(0, 1)]);
        assert_eq!(enumerate_paths(&g, 0, 1, 1).unwrap(), vec![vec![0]]);
        assert_eq!(enumerate_paths(&g, 0, 0, 1).unwrap(), vec![Vec::<usize>::new()]);
        assert!(enumerate_paths(&g, 1, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn cycles_are_not_followed() {
        let g = net(3, &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(enumerate_paths(&g, 0, 2, 10).unwrap(), vec![vec![0, 2]]);
    }

    #[test]
    fn cap_is_enforced() {
        // Two parallel edges per hop over three hops: 8 paths.
        let mut arcs = Vec::new();
        for h in 0..3 {
            arcs.push((h, h + 1));
            arcs.push((h, h + 1));
        }
        let g = net(4, &arcs);
        assert_eq!(enumerate_paths(&g, 0, 3, 8).unwrap().len(), 8);
        assert!(matches!(enumerate_paths(&g, 0, 3, 7), Err(Error::PathExplosion { .. })));
    }

    #[test]
    fn rejects_bad_parameters() {
        let edge = |d| Edge { id: "e".into(), tail: 0, head: 1, latency: Latency { a: 1.0, b: 0.0, d } };
        let nodes = || vec!["a".to_string(), "b".to_string()];
        assert!(Network::new(nodes(), vec![edge(0.5)]).is_err());
        assert!(Network::new(nodes(), vec![edge(1.0), edge(1.0)]).is_err());
        let bad_head = Edge { head: 7, ..edge(1.0) };
        assert!(Network::new(nodes(), vec![bad_head]).is_err());
    }
}
