//! Enumerates maximal parental cliques for every node of the shipped graph
//! fixtures and shows that all three backends agree.

use std::fs;
use std::path::Path;

use gmm_mpc::graph::Dag;
use gmm_mpc::mpc::{brute_force_mpcs, find_mpcs_fast, find_mpcs_paper};

fn show(name: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    let dag = Dag::parse(&fs::read_to_string(&path).unwrap()).unwrap();
    println!("{name}:");
    for node in 0..dag.node_count() {
        let fast = find_mpcs_fast(&dag, node);
        let paper = find_mpcs_paper(&dag, node).unwrap();
        let brute = brute_force_mpcs(&dag, node).unwrap();
        assert_eq!(fast, paper);
        assert_eq!(fast, brute);
        let cliques: Vec<String> = fast
            .cliques
            .iter()
            .map(|c| {
                let names: Vec<&str> = c.iter().map(|&id| dag.node_name(id)).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect();
        let collider = if dag.is_collider(node) { "  (collider)" } else { "" };
        println!("  {:<5} -> [{}]{}", dag.node_name(node), cliques.join(" "), collider);
    }
    println!();
}

fn main() {
    show("fig1b.json");
    show("sachs_pc.json");
    show("sachs_mmhc.json");
    show("sachs_gs.json");
}
