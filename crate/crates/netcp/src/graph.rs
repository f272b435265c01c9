//! Undirected graphs over node indices 0..d with edge lookup and the
//! structure predicates the inference layer dispatches on.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("edge ({a}, {b}) is a self loop")]
    SelfLoop { a: usize, b: usize },
    #[error("edge ({a}, {b}) appears more than once")]
    DuplicateEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) references a node outside 0..{nodes}")]
    EdgeOutOfRange { a: usize, b: usize, nodes: usize },
}

/// Undirected graph; edges are stored with endpoints ordered low-high and
/// indexed in insertion order so per-edge data can live in parallel vectors.
#[derive(Debug, Clone)]
pub struct StatisticalGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    /// Per node: (neighbor, index into `edges`).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl StatisticalGraph {
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut normalized = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop { a, b });
            }
            if a >= node_count || b >= node_count {
                return Err(GraphError::EdgeOutOfRange {
                    a,
                    b,
                    nodes: node_count,
                });
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if normalized.contains(&(lo, hi)) {
                return Err(GraphError::DuplicateEdge { a: lo, b: hi });
            }
            let idx = normalized.len();
            normalized.push((lo, hi));
            adjacency[lo].push((hi, idx));
            adjacency[hi].push((lo, idx));
        }
        Ok(Self {
            node_count,
            edges: normalized,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.edges[edge]
    }

    /// Neighbors of `node` as (neighbor, edge index) pairs.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(nb, _)| *nb == b)
            .map(|(_, e)| *e)
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Connected components, each listed in breadth-first order from its
    /// smallest-index node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count];
        let mut components = Vec::new();
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            let mut order = vec![start];
            seen[start] = true;
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &(nb, _) in &self.adjacency[v] {
                    if !seen[nb] {
                        seen[nb] = true;
                        order.push(nb);
                    }
                }
            }
            components.push(order);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// True when some cycle exists; a graph without cycles (a forest) is the
    /// exactness domain of the tree belief propagation routines.
    pub fn has_cycle(&self) -> bool {
        // In a forest every component with k nodes has exactly k - 1 edges.
        let component_count = self.components().len();
        self.edges.len() + component_count != self.node_count
    }

    pub fn is_forest(&self) -> bool {
        !self.has_cycle()
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() + 1 == self.node_count
    }
}
