//! Edmonds-Karp max-flow on small dense graphs, plus a lower-bounded
//! transportation solve used to pick well-conditioned component fractions.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    flow: f64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    /// Adds a directed edge; returns its index (reverse edge is index+1).
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let idx = self.edges.len();
        self.edges.push(Edge { to, cap, flow: 0.0 });
        self.edges.push(Edge { to: from, cap: 0.0, flow: 0.0 });
        self.adj[from].push(idx);
        self.adj[to].push(idx + 1);
        idx
    }

    pub fn flow_on(&self, edge: usize) -> f64 {
        self.edges[edge].flow
    }

    fn residual(&self, e: usize) -> f64 {
        self.edges[e].cap - self.edges[e].flow
    }

    /// Nodes reachable from `from` through residual capacity > eps.
    pub fn reachable(&self, from: usize, eps: f64) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.edges[e].to;
                if !seen[v] && self.residual(e) > eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// BFS augmenting paths until no path with bottleneck > eps remains.
    pub fn max_flow(&mut self, source: usize, sink: usize, eps: f64) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.edges[e].to;
                    if !seen[v] && self.residual(e) > eps {
                        seen[v] = true;
                        prev[v] = Some(e);
                        if v == sink {
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = prev[v].unwrap();
                bottleneck = bottleneck.min(self.residual(e));
                v = self.edges[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = prev[v].unwrap();
                self.edges[e].flow += bottleneck;
                self.edges[e ^ 1].flow -= bottleneck;
                v = self.edges[e ^ 1].to;
            }
            total += bottleneck;
        }
    }
}

/// Bipartite transportation: route `demands[i]` through admissible `edges`
/// into sinks with capacity `caps[j]`. Returns the routed amounts x[i][j]
/// when every demand is met, or None.
///
/// `floors[j]`, when given, additionally requires Σ_i x[i][j] >= floors[j]
/// (solved by the standard lower-bound reduction with an auxiliary pair of
/// terminals and a circulation edge).
pub fn transportation(
    demands: &[f64],
    caps: &[f64],
    edges: &[(usize, usize)],
    floors: Option<&[f64]>,
) -> Option<Vec<Vec<f64>>> {
    let nc = demands.len();
    let ng = caps.len();
    let total: f64 = demands.iter().sum();
    if total == 0.0 {
        return Some(vec![vec![0.0; ng]; nc]);
    }
    let scale = total.max(caps.iter().fold(0.0_f64, |a, &b| a.max(b)));
    let eps = 1e-12 * scale;

    let source = nc + ng;
    let sink = nc + ng + 1;
    match floors {
        None => {
            let mut net = FlowNetwork::new(nc + ng + 2);
            for (i, &d) in demands.iter().enumerate() {
                net.add_edge(source, i, d);
            }
            let mut pair_edges = Vec::with_capacity(edges.len());
            for &(i, j) in edges {
                pair_edges.push((i, j, net.add_edge(i, nc + j, demands[i])));
            }
            for (j, &c) in caps.iter().enumerate() {
                net.add_edge(nc + j, sink, c);
            }
            let value = net.max_flow(source, sink, eps);
            if value < total - 1e-9 * scale {
                return None;
            }
            let mut x = vec![vec![0.0; ng]; nc];
            for (i, j, e) in pair_edges {
                x[i][j] = net.flow_on(e).max(0.0);
            }
            Some(x)
        }
        Some(floors) => {
            // Lower bounds sit on the group->sink arcs and on the mandatory
            // sink->source circulation arc carrying exactly `total`.
            let ss = nc + ng + 2;
            let tt = nc + ng + 3;
            let mut net = FlowNetwork::new(nc + ng + 4);
            for (i, &d) in demands.iter().enumerate() {
                net.add_edge(source, i, d);
            }
            let mut pair_edges = Vec::with_capacity(edges.len());
            for &(i, j) in edges {
                pair_edges.push((i, j, net.add_edge(i, nc + j, demands[i])));
            }
            let mut need = 0.0;
            for (j, &c) in caps.iter().enumerate() {
                let lo = floors[j].clamp(0.0, c);
                net.add_edge(nc + j, sink, c - lo);
                if lo > 0.0 {
                    net.add_edge(ss, sink, lo);
                    net.add_edge(nc + j, tt, lo);
                    need += lo;
                }
            }
            // sink -> source with bounds [total, total].
            net.add_edge(ss, source, total);
            net.add_edge(sink, tt, total);
            need += total;
            let value = net.max_flow(ss, tt, eps);
            if value < need - 1e-9 * scale.max(need) {
                return None;
            }
            let mut x = vec![vec![0.0; ng]; nc];
            for (i, j, e) in pair_edges {
                x[i][j] = net.flow_on(e).max(0.0);
            }
            Some(x)
        }
    }
}

/// Runs the transportation max-flow after snapping all values to a 1e-6 grid
/// (integer-valued f64 arithmetic is exact at this scale). Returns the
/// saturated network, the snapped demand total, the source node, and the
/// tolerated deficit: snapping may round each value by up to half a grid
/// unit, so that much aggregate slop is not evidence of real infeasibility
/// (real margins dwarf it).
fn snapped_max_flow(
    demands: &[f64],
    caps: &[f64],
    edges: &[(usize, usize)],
) -> (FlowNetwork, f64, f64, usize, f64) {
    let snap = |x: f64| (x * 1e6).round();
    let demands: Vec<f64> = demands.iter().map(|&d| snap(d)).collect();
    let caps: Vec<f64> = caps.iter().map(|&c| snap(c)).collect();
    let nc = demands.len();
    let ng = caps.len();
    let total: f64 = demands.iter().sum();
    let source = nc + ng;
    let sink = nc + ng + 1;
    let mut net = FlowNetwork::new(nc + ng + 2);
    for (i, &d) in demands.iter().enumerate() {
        net.add_edge(source, i, d);
    }
    for &(i, j) in edges {
        net.add_edge(i, nc + j, demands[i]);
    }
    for (j, &c) in caps.iter().enumerate() {
        net.add_edge(nc + j, sink, c);
    }
    let value = net.max_flow(source, sink, 0.5);
    let slop = (nc + ng + 1) as f64;
    (net, value, total, source, slop)
}

/// Exact feasibility of the transportation problem on the snapped grid.
pub fn transportation_feasible_exact(
    demands: &[f64],
    caps: &[f64],
    edges: &[(usize, usize)],
) -> bool {
    if demands.iter().sum::<f64>() == 0.0 {
        return true;
    }
    let (_, value, total, _, slop) = snapped_max_flow(demands, caps, edges);
    value >= total - slop
}

/// The minimal deficient campaign set of an infeasible transportation
/// problem: campaigns on the source side of the min cut (their pooled demand
/// exceeds the pooled capacity of every group they can reach). Empty when the
/// problem is feasible.
pub fn transportation_deficient(
    demands: &[f64],
    caps: &[f64],
    edges: &[(usize, usize)],
) -> Vec<usize> {
    if demands.iter().sum::<f64>() == 0.0 {
        return Vec::new();
    }
    let (net, value, total, source, slop) = snapped_max_flow(demands, caps, edges);
    if value >= total - slop {
        return Vec::new();
    }
    let seen = net.reachable(source, 0.5);
    (0..demands.len()).filter(|&i| seen[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_feasible() {
        // Two demands into two sinks, fully connected.
        let x = transportation(&[3.0, 2.0], &[4.0, 4.0], &[(0, 0), (0, 1), (1, 0), (1, 1)], None)
            .unwrap();
        assert!((x[0].iter().sum::<f64>() - 3.0).abs() < 1e-9);
        assert!((x[1].iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_by_admissibility() {
        // Demand 3 can only reach a sink of capacity 2.
        assert!(transportation(&[3.0], &[2.0, 10.0], &[(0, 0)], None).is_none());
        assert!(!transportation_feasible_exact(&[3.0], &[2.0, 10.0], &[(0, 0)]));
    }

    #[test]
    fn floors_respected() {
        // Both sinks must carry at least 2; demand 5 across caps 4/4.
        let x = transportation(
            &[5.0],
            &[4.0, 4.0],
            &[(0, 0), (0, 1)],
            Some(&[2.0, 2.0]),
        )
        .unwrap();
        assert!(x[0][0] >= 2.0 - 1e-9 && x[0][1] >= 2.0 - 1e-9);
        assert!((x[0][0] + x[0][1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn floors_infeasible() {
        // Floor 3 on a sink the single demand cannot reach fully while
        // keeping its own total at 2.
        assert!(transportation(&[2.0], &[4.0, 4.0], &[(0, 0)], Some(&[0.0, 3.0])).is_none());
    }
}
