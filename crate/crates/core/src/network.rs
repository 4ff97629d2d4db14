//! Graph data model for discrete transport networks.
//!
//! A [`Network`] is an undirected simple graph with a positive length and a
//! nonnegative conductivity on every edge and a signed source strength on every
//! node. The topology (edges, lengths, sources) lives behind an [`Arc`] so the
//! optimizer can produce successive conductivity vectors without copying it.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{EdgeFault, Error};
use crate::math;
use crate::Result;

/// Default relative tolerance for `|Σ S_i| ≤ tol · Σ |S_i|`.
pub const DEFAULT_MASS_TOL: f64 = 1e-12;

/// One edge as supplied by a caller; orientation is irrelevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub length: f64,
    pub conductivity: f64,
}

impl EdgeSpec {
    pub fn new(i: usize, j: usize, length: f64, conductivity: f64) -> Self {
        EdgeSpec {
            i,
            j,
            length,
            conductivity,
        }
    }
}

#[derive(Debug)]
struct Topology {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    length: Vec<f64>,
    source: Vec<f64>,
    positions: Vec<Option<Vec<f64>>>,
    // (neighbor, edge index) per node, in edge order
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Immutable network state: shared topology plus a conductivity vector.
#[derive(Debug, Clone)]
pub struct Network {
    topo: Arc<Topology>,
    conductivity: Vec<f64>,
}

impl Network {
    /// Builds a network, storing every edge once with `i < j`.
    pub fn new(node_count: usize, edges: &[EdgeSpec], source: Vec<f64>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyNetwork);
        }
        if source.len() != node_count {
            return Err(Error::DimensionMismatch {
                what: "source",
                expected: node_count,
                found: source.len(),
            });
        }
        if let Some(bad) = source.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "source",
                value: source[bad],
            });
        }
        let mut canon = Vec::with_capacity(edges.len());
        let mut length = Vec::with_capacity(edges.len());
        let mut conductivity = Vec::with_capacity(edges.len());
        for e in edges {
            let key = (e.i.min(e.j), e.i.max(e.j));
            let fault = if e.i >= node_count || e.j >= node_count {
                Some(EdgeFault::IndexOutOfRange)
            } else if e.i == e.j {
                Some(EdgeFault::SelfLoop)
            } else if !e.length.is_finite() || !e.conductivity.is_finite() {
                Some(EdgeFault::NotFinite)
            } else if e.length <= 0.0 {
                Some(EdgeFault::NonPositiveLength)
            } else if e.conductivity < 0.0 {
                Some(EdgeFault::NegativeConductivity)
            } else {
                None
            };
            if let Some(fault) = fault {
                return Err(Error::InvalidEdge {
                    edge: (e.i, e.j),
                    fault,
                });
            }
            canon.push(key);
            length.push(e.length);
            conductivity.push(e.conductivity);
        }
        let mut sorted = canon.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidEdge {
                edge: w[0],
                fault: EdgeFault::Duplicate,
            });
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for (k, &(i, j)) in canon.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        Ok(Network {
            topo: Arc::new(Topology {
                node_count,
                edges: canon,
                length,
                source,
                positions: vec![None; node_count],
                adjacency,
            }),
            conductivity,
        })
    }

    /// Attaches plotting coordinates. They never enter any computation.
    pub fn with_positions(self, positions: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if positions.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                what: "positions",
                expected: self.node_count(),
                found: positions.len(),
            });
        }
        let t = &self.topo;
        let topo = Topology {
            node_count: t.node_count,
            edges: t.edges.clone(),
            length: t.length.clone(),
            source: t.source.clone(),
            positions,
            adjacency: t.adjacency.clone(),
        };
        Ok(Network {
            topo: Arc::new(topo),
            conductivity: self.conductivity,
        })
    }

    /// Same topology and sources, new conductivities.
    pub fn with_conductivity(&self, conductivity: Vec<f64>) -> Result<Self> {
        if conductivity.len() != self.edge_count() {
            return Err(Error::DimensionMismatch {
                what: "conductivity",
                expected: self.edge_count(),
                found: conductivity.len(),
            });
        }
        for (k, &c) in conductivity.iter().enumerate() {
            let fault = if !c.is_finite() {
                EdgeFault::NotFinite
            } else if c < 0.0 {
                EdgeFault::NegativeConductivity
            } else {
                continue;
            };
            return Err(Error::InvalidEdge {
                edge: self.topo.edges[k],
                fault,
            });
        }
        Ok(Network {
            topo: Arc::clone(&self.topo),
            conductivity,
        })
    }

    /// Same topology and conductivities, new sources.
    pub fn with_source(&self, source: Vec<f64>) -> Result<Self> {
        let edges: Vec<EdgeSpec> = self.edge_specs().collect();
        let net = Network::new(self.node_count(), &edges, source)?;
        net.with_positions(self.topo.positions.clone())
    }

    pub fn node_count(&self) -> usize {
        self.topo.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.topo.edges.len()
    }

    /// Canonical `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.topo.edges
    }

    pub fn lengths(&self) -> &[f64] {
        &self.topo.length
    }

    pub fn conductivities(&self) -> &[f64] {
        &self.conductivity
    }

    pub fn sources(&self) -> &[f64] {
        &self.topo.source
    }

    pub fn position(&self, node: usize) -> Option<&[f64]> {
        self.topo.positions[node].as_deref()
    }

    /// `(neighbor, edge index)` pairs of `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.topo.adjacency[node]
    }

    pub fn edge_specs(&self) -> impl Iterator<Item = EdgeSpec> + '_ {
        self.topo
            .edges
            .iter()
            .enumerate()
            .map(move |(k, &(i, j))| EdgeSpec::new(i, j, self.topo.length[k], self.conductivity[k]))
    }

    /// Edge index for the pair, in either orientation.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        if a >= self.node_count() {
            return None;
        }
        self.topo.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, k)| k)
    }

    /// `C_ab`; symmetric in its arguments.
    pub fn conductivity(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index(a, b).map(|k| self.conductivity[k])
    }

    /// `L_ab`; symmetric in its arguments.
    pub fn length(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index(a, b).map(|k| self.topo.length[k])
    }

    /// True when the topology (ignoring conductivities) is a spanning tree.
    pub fn is_tree(&self) -> bool {
        self.edge_count() + 1 == self.node_count()
            && components_above(self, f64::NEG_INFINITY).len() == 1
    }

    pub fn validate(&self, mass_tol: f64) -> ValidationReport {
        validate(self, mass_tol)
    }
}

/// Reason an edge shows up in [`ValidationReport::offending_edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeIssue {
    /// Conductivity is zero; the edge is discarded for connectivity.
    ZeroConductivity,
    /// Edge joins two different positive-conductivity components.
    Bridges,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub mass_balance_defect: f64,
    pub mass_balanced: bool,
    pub positive_subgraph_connected: bool,
    /// Nodes with no incident edge of positive conductivity.
    pub isolated_nodes: Vec<usize>,
    pub offending_edges: Vec<((usize, usize), EdgeIssue)>,
}

impl ValidationReport {
    /// Mass balance and connectivity both hold, so the Kirchhoff system is solvable.
    pub fn is_solvable(&self) -> bool {
        self.mass_balanced && self.positive_subgraph_connected
    }
}

/// Checks global mass conservation and connectivity of the `C > 0` subgraph.
pub fn validate(net: &Network, mass_tol: f64) -> ValidationReport {
    let defect = math::sum(net.sources().iter().copied()).abs();
    let scale = math::sum(net.sources().iter().map(|s| s.abs()));
    let comps = components_above(net, 0.0);
    let mut label = vec![0usize; net.node_count()];
    for (c, nodes) in comps.iter().enumerate() {
        for &n in nodes {
            label[n] = c;
        }
    }
    let isolated_nodes = (0..net.node_count())
        .filter(|&n| {
            net.neighbors(n)
                .iter()
                .all(|&(_, k)| net.conductivities()[k] <= 0.0)
        })
        .collect();
    let mut offending_edges = Vec::new();
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        if net.conductivities()[k] <= 0.0 {
            let issue = if label[i] != label[j] {
                EdgeIssue::Bridges
            } else {
                EdgeIssue::ZeroConductivity
            };
            offending_edges.push(((i, j), issue));
        }
    }
    ValidationReport {
        mass_balance_defect: defect,
        mass_balanced: defect <= mass_tol * scale,
        positive_subgraph_connected: comps.len() == 1,
        isolated_nodes,
        offending_edges,
    }
}

/// Connected components of the subgraph `{C_ij > threshold}`.
///
/// Each component is sorted; components are ordered by their smallest node.
pub fn positive_components(net: &Network, threshold: f64) -> Vec<Vec<usize>> {
    components_above(net, threshold)
}

fn components_above(net: &Network, threshold: f64) -> Vec<Vec<usize>> {
    let n = net.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        if net.conductivities()[k] > threshold {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: f64) -> Network {
        Network::new(2, &[EdgeSpec::new(0, 1, 1.0, c)], vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn single_edge_is_balanced_and_connected() {
        let r = validate(&pair(1.0), DEFAULT_MASS_TOL);
        assert_eq!(r.mass_balance_defect, 0.0);
        assert!(r.positive_subgraph_connected);
        assert!(r.is_solvable());
    }

    #[test]
    fn zero_conductivity_edge_cuts_node_off() {
        let net = Network::new(
            3,
            &[EdgeSpec::new(0, 1, 1.0, 1.0), EdgeSpec::new(1, 2, 1.0, 0.0)],
            vec![1.0, -1.0, 0.0],
        )
        .unwrap();
        let r = validate(&net, DEFAULT_MASS_TOL);
        assert!(!r.positive_subgraph_connected);
        assert_eq!(r.isolated_nodes, vec![2]);
        assert_eq!(r.offending_edges, vec![((1, 2), EdgeIssue::Bridges)]);
    }

    #[test]
    fn star_with_four_leaves() {
        let edges: Vec<_> = (1..5).map(|l| EdgeSpec::new(0, l, 1.0, 0.5)).collect();
        let net = Network::new(5, &edges, vec![4.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        let r = validate(&net, DEFAULT_MASS_TOL);
        assert_eq!(r.mass_balance_defect, 0.0);
        assert!(r.positive_subgraph_connected);
        // adjacency-list traversal: every leaf reachable from the hub
        let mut seen = [false; 5];
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(net.neighbors(v).iter().map(|&(n, _)| n));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn structural_errors_name_the_edge() {
        let e = Network::new(2, &[EdgeSpec::new(0, 2, 1.0, 1.0)], vec![0.0, 0.0]).unwrap_err();
        assert_eq!(
            e,
            Error::InvalidEdge {
                edge: (0, 2),
                fault: EdgeFault::IndexOutOfRange
            }
        );
        let e = Network::new(2, &[EdgeSpec::new(1, 1, 1.0, 1.0)], vec![0.0, 0.0]).unwrap_err();
        assert_eq!(
            e,
            Error::InvalidEdge {
                edge: (1, 1),
                fault: EdgeFault::SelfLoop
            }
        );
        let dup = [EdgeSpec::new(0, 1, 1.0, 1.0), EdgeSpec::new(1, 0, 2.0, 1.0)];
        let e = Network::new(2, &dup, vec![0.0, 0.0]).unwrap_err();
        assert_eq!(
            e,
            Error::InvalidEdge {
                edge: (0, 1),
                fault: EdgeFault::Duplicate
            }
        );
        let e = Network::new(2, &[EdgeSpec::new(0, 1, 0.0, 1.0)], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(
            e,
            Error::InvalidEdge {
                fault: EdgeFault::NonPositiveLength,
                ..
            }
        ));
        let e = Network::new(2, &[EdgeSpec::new(0, 1, 1.0, -1.0)], vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(
            e,
            Error::InvalidEdge {
                fault: EdgeFault::NegativeConductivity,
                ..
            }
        ));
    }

    #[test]
    fn accessors_are_symmetric() {
        let net = Network::new(3, &[EdgeSpec::new(2, 0, 3.0, 0.25)], vec![0.0; 3]).unwrap();
        assert_eq!(net.edges(), &[(0, 2)]);
        assert_eq!(net.conductivity(0, 2), net.conductivity(2, 0));
        assert_eq!(net.length(2, 0), Some(3.0));
        assert_eq!(net.conductivity(0, 1), None);
    }

    #[test]
    fn components_respect_threshold() {
        assert_eq!(positive_components(&pair(1.0), 0.0), vec![vec![0, 1]]);
        assert_eq!(
            positive_components(&pair(1e-12), 1e-10),
            vec![vec![0], vec![1]]
        );
        let path = Network::new(
            3,
            &[
                EdgeSpec::new(0, 1, 1.0, 1.0),
                EdgeSpec::new(1, 2, 1.0, 1e-12),
            ],
            vec![0.0; 3],
        )
        .unwrap();
        assert_eq!(positive_components(&path, 1e-10), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn mass_imbalance_is_reported() {
        let net = Network::new(2, &[EdgeSpec::new(0, 1, 1.0, 1.0)], vec![1.0, -0.5]).unwrap();
        let r = validate(&net, DEFAULT_MASS_TOL);
        assert_eq!(r.mass_balance_defect, 0.5);
        assert!(!r.mass_balanced);
    }

    #[test]
    fn tree_detection() {
        assert!(pair(1.0).is_tree());
        let tri = Network::new(
            3,
            &[
                EdgeSpec::new(0, 1, 1.0, 1.0),
                EdgeSpec::new(1, 2, 1.0, 1.0),
                EdgeSpec::new(0, 2, 1.0, 1.0),
            ],
            vec![0.0; 3],
        )
        .unwrap();
        assert!(!tri.is_tree());
    }
}
