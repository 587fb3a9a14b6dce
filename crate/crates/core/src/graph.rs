//! Directed acyclic graphs over named nodes.
//!
//! Node identity is the string name from the graph file; internally each node
//! gets a dense integer id in file order so the hot loops can index arrays.
//! A [`Dag`] is immutable after construction and every structural invariant
//! (no self-loops, no duplicate or bidirected edges, acyclicity) is checked
//! up front.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Dag {
    nodes: Vec<String>,
    /// Edges as (parent, child) id pairs, in file order.
    edges: Vec<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

/// On-disk form: `{"nodes": [...], "edges": [["parent","child"], ...]}`.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

impl Dag {
    pub fn new(nodes: Vec<String>, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let n = nodes.len();
        let mut seen = HashMap::new();
        for name in &nodes {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::DuplicateNode(name.clone()));
            }
        }
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in &edges {
            if p == c {
                return Err(Error::SelfLoop(nodes[p].clone()));
            }
            if parents[c].contains(&p) {
                return Err(Error::DuplicateEdge {
                    parent: nodes[p].clone(),
                    child: nodes[c].clone(),
                });
            }
            if parents[p].contains(&c) {
                return Err(Error::BidirectedEdge {
                    a: nodes[c].clone(),
                    b: nodes[p].clone(),
                });
            }
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let dag = Dag { nodes, edges, parents, children };
        dag.check_acyclic()?;
        Ok(dag)
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm; any leftover node sits on a cycle.
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut queue: Vec<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut removed = 0;
        while let Some(v) = queue.pop() {
            removed += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if removed < n {
            let culprit = (0..n).find(|&v| indeg[v] > 0).unwrap();
            return Err(Error::Cycle(self.nodes[culprit].clone()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        let index: HashMap<&str, NodeId> = file
            .nodes
            .iter()
            .enumerate()
            .map(|(i, name)| (name.as_str(), i))
            .collect();
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, (p, c)) in file.edges.iter().enumerate() {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| Error::UnknownNodeName {
                    name: name.to_string(),
                    index: i,
                })
            };
            edges.push((lookup(p)?, lookup(c)?));
        }
        Dag::new(file.nodes, edges)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(p, c)| (self.nodes[p].clone(), self.nodes[c].clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }

    /// DOT export for visualization.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for name in &self.nodes {
            out.push_str(&format!("  \"{name}\";\n"));
        }
        for &(p, c) in &self.edges {
            out.push_str(&format!("  \"{}\" -> \"{}\";\n", self.nodes[p], self.nodes[c]));
        }
        out.push_str("}\n");
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id]
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_id(&self, name: &str) -> Result<NodeId> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn parents(&self, node: NodeId) -> &[NodeId] {
        &self.parents[node]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node]
    }

    /// Pa ∪ Ch of `node`.
    pub fn pc_set(&self, node: NodeId) -> Vec<NodeId> {
        let mut pc: Vec<NodeId> = self.parents[node]
            .iter()
            .chain(self.children[node].iter())
            .copied()
            .collect();
        pc.sort_unstable();
        pc.dedup();
        pc
    }

    /// True when an edge exists between `a` and `b` in either direction.
    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.parents[b].contains(&a) || self.parents[a].contains(&b)
    }

    /// True iff `node` is the collider of an immorality: it has two parents
    /// with no edge between them in either direction.
    pub fn is_collider(&self, node: NodeId) -> bool {
        let pa = &self.parents[node];
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !self.adjacent(a, b) {
                    return true;
                }
            }
        }
        false
    }

    /// Topological order with ties broken by node id, so the result is
    /// deterministic across runs.
    pub fn topological_order(&self) -> Vec<NodeId> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut heap: BinaryHeap<Reverse<NodeId>> =
            (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        debug_assert_eq!(order.len(), n);
        order
    }
}
