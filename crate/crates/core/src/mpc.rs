//! Maximal parental clique (MPC) enumeration.
//!
//! Three backends compute the same set: a faithful transcription of the
//! arrangement-iterating search, a pivoted recursive clique enumeration on
//! the parent-induced skeleton (the production path), and a subset-scan
//! brute force kept as an oracle. All three return the canonical ordering:
//! cliques sorted by descending size, then lexicographically by member ids,
//! members ascending within each clique.

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId};
use itertools::Itertools;

/// Cap on |PC_T| for the arrangement-iterating backend; 8! = 40320
/// permutations is the largest we are willing to walk.
pub const ARRANGEMENT_CAP: usize = 8;

/// Parent count limit for the brute-force subset scan.
pub const BRUTE_FORCE_LIMIT: usize = 15;

/// The maximal parental cliques of one node, canonically ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpcSet {
    pub node: NodeId,
    pub cliques: Vec<Vec<NodeId>>,
}

impl MpcSet {
    fn canonical(node: NodeId, mut cliques: Vec<Vec<NodeId>>) -> Self {
        for c in &mut cliques {
            c.sort_unstable();
        }
        cliques.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        cliques.dedup();
        MpcSet { node, cliques }
    }

    pub fn clique_names(&self, dag: &Dag) -> Vec<Vec<String>> {
        self.cliques
            .iter()
            .map(|c| c.iter().map(|&v| dag.node_name(v).to_string()).collect())
            .collect()
    }
}

/// Arrangement-iterating backend: for every permutation of PC_T grow a
/// clique greedily, adding X when the clique so far lies inside PC_X and X
/// is a parent of T, then deduplicate across permutations.
pub fn find_mpcs_paper(dag: &Dag, node: NodeId) -> Result<MpcSet> {
    let pc = dag.pc_set(node);
    if pc.len() > ARRANGEMENT_CAP {
        return Err(Error::ArrangementCapExceeded {
            node: dag.node_name(node).to_string(),
            size: pc.len(),
            cap: ARRANGEMENT_CAP,
        });
    }
    let parent_mask: Vec<bool> = pc.iter().map(|&x| dag.parents(node).contains(&x)).collect();
    let mut cliques: Vec<Vec<NodeId>> = Vec::new();
    let k = pc.len();
    for perm in (0..k).permutations(k) {
        let mut clique: Vec<NodeId> = Vec::new();
        for &xi in &perm {
            let x = pc[xi];
            if parent_mask[xi] && clique.iter().all(|&m| dag.adjacent(m, x)) {
                clique.push(x);
            }
        }
        if !clique.is_empty() {
            clique.sort_unstable();
            if !cliques.contains(&clique) {
                cliques.push(clique);
            }
        }
    }
    Ok(MpcSet::canonical(node, cliques))
}

/// Production backend: maximal cliques of the undirected skeleton induced on
/// the parents of `node`, found by pivoted recursive enumeration.
pub fn find_mpcs_fast(dag: &Dag, node: NodeId) -> MpcSet {
    let parents = dag.parents(node).to_vec();
    let n = parents.len();
    if n == 0 {
        return MpcSet::canonical(node, Vec::new());
    }
    // Adjacency bitsets over local parent indices.
    let adj: Vec<u64> = (0..n)
        .map(|i| {
            let mut bits = 0u64;
            for j in 0..n {
                if i != j && dag.adjacent(parents[i], parents[j]) {
                    bits |= 1 << j;
                }
            }
            bits
        })
        .collect();
    let mut out = Vec::new();
    bron_kerbosch(&adj, 0, (1u64 << n) - 1, 0, &mut out);
    let cliques = out
        .into_iter()
        .map(|bits| {
            (0..n)
                .filter(|&i| bits & (1 << i) != 0)
                .map(|i| parents[i])
                .collect()
        })
        .collect();
    MpcSet::canonical(node, cliques)
}

fn bron_kerbosch(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    // Pivot on the candidate covering the most of P.
    let pivot = iter_bits(p | x)
        .max_by_key(|&u| (p & adj[u]).count_ones())
        .unwrap();
    for v in iter_bits(p & !adj[pivot]).collect::<Vec<_>>() {
        let vb = 1u64 << v;
        bron_kerbosch(adj, r | vb, p & adj[v], x & adj[v], out);
        p &= !vb;
        x |= vb;
    }
}

fn iter_bits(mut bits: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if bits == 0 {
            None
        } else {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        }
    })
}

/// Oracle backend: scan all parent subsets, keep cliques, drop strict
/// subsets of other kept cliques.
pub fn brute_force_mpcs(dag: &Dag, node: NodeId) -> Result<MpcSet> {
    let parents = dag.parents(node);
    let n = parents.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceLimitExceeded {
            node: dag.node_name(node).to_string(),
            count: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut cliques: Vec<u32> = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let is_clique = members
            .iter()
            .enumerate()
            .all(|(a, &i)| members[a + 1..].iter().all(|&j| dag.adjacent(parents[i], parents[j])));
        if is_clique {
            cliques.push(mask);
        }
    }
    let maximal: Vec<Vec<NodeId>> = cliques
        .iter()
        .filter(|&&m| !cliques.iter().any(|&other| other != m && other & m == m))
        .map(|&m| (0..n).filter(|&i| m & (1 << i) != 0).map(|i| parents[i]).collect())
        .collect();
    Ok(MpcSet::canonical(node, maximal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;

    fn fig_graph() -> Dag {
        Dag::parse(
            r#"{"nodes": ["X","Y","Z","W","T"],
                "edges": [["X","T"],["Y","T"],["Z","T"],["W","T"],["X","Y"]]}"#,
        )
        .unwrap()
    }

    fn names(dag: &Dag, set: &MpcSet) -> Vec<Vec<String>> {
        set.clique_names(dag)
    }

    #[test]
    fn star_graph_three_mpcs_all_backends() {
        let dag = fig_graph();
        let t = dag.node_id("T").unwrap();
        let expected = vec![vec!["X", "Y"], vec!["Z"], vec!["W"]];
        for set in [
            find_mpcs_paper(&dag, t).unwrap(),
            find_mpcs_fast(&dag, t),
            brute_force_mpcs(&dag, t).unwrap(),
        ] {
            assert_eq!(names(&dag, &set), expected);
        }
    }

    #[test]
    fn single_parent_is_maximal() {
        let dag = Dag::parse(r#"{"nodes": ["A","B"], "edges": [["A","B"]]}"#).unwrap();
        let set = find_mpcs_paper(&dag, 1).unwrap();
        assert_eq!(set.cliques, vec![vec![0]]);
    }

    #[test]
    fn root_node_has_no_cliques() {
        let dag = fig_graph();
        let x = dag.node_id("X").unwrap();
        assert!(find_mpcs_paper(&dag, x).unwrap().cliques.is_empty());
        assert!(find_mpcs_fast(&dag, x).cliques.is_empty());
    }

    #[test]
    fn complete_parent_set_is_one_clique() {
        // A, B, C pairwise adjacent, all parents of T.
        let dag = Dag::parse(
            r#"{"nodes": ["A","B","C","T"],
                "edges": [["A","B"],["A","C"],["B","C"],["A","T"],["B","T"],["C","T"]]}"#,
        )
        .unwrap();
        let set = find_mpcs_fast(&dag, 3);
        assert_eq!(set.cliques, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn disconnected_pair_gives_two_singletons() {
        let dag =
            Dag::parse(r#"{"nodes": ["A","B","T"], "edges": [["A","T"],["B","T"]]}"#).unwrap();
        let set = brute_force_mpcs(&dag, 2).unwrap();
        assert_eq!(set.cliques, vec![vec![0], vec![1]]);
    }

    #[test]
    fn cap_exceeded_reports_node() {
        // T with 9 PC members.
        let nodes: Vec<String> =
            (0..9).map(|i| format!("P{i}")).chain(["T".to_string()]).collect();
        let edges: Vec<(usize, usize)> = (0..9).map(|i| (i, 9)).collect();
        let dag = Dag::new(nodes, edges).unwrap();
        assert!(matches!(
            find_mpcs_paper(&dag, 9),
            Err(Error::ArrangementCapExceeded { size: 9, .. })
        ));
        // The fast backend still runs.
        assert_eq!(find_mpcs_fast(&dag, 9).cliques.len(), 9);
    }

    #[test]
    fn coverage_and_maximality_on_fig_graph() {
        let dag = fig_graph();
        let t = dag.node_id("T").unwrap();
        let set = find_mpcs_fast(&dag, t);
        let parents = dag.parents(t);
        for &p in parents {
            assert!(set.cliques.iter().any(|c| c.contains(&p)), "parent {p} uncovered");
        }
        for clique in &set.cliques {
            for &p in parents {
                if !clique.contains(&p) {
                    assert!(
                        !clique.iter().all(|&m| dag.adjacent(m, p)),
                        "clique {clique:?} extendable by {p}"
                    );
                }
            }
        }
    }
}
