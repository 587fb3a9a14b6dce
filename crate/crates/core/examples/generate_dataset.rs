//! Regenerates `data/sachs_synth.csv`, the synthetic flow-cytometry style
//! dataset used by the examples and the acceptance suite.
//!
//! The generator builds a ground-truth clique-mixture model over the 11
//! protein nodes of `data/sachs_pc.json`, draws 7466 rows by ancestral
//! sampling with a fixed seed, and rescales each column to a plausible
//! fluorescence range. Running it twice produces byte-identical output.

use std::fs;
use std::path::Path;

use gmm_mpc::data::NormStats;
use gmm_mpc::eval::sample_denormalized;
use gmm_mpc::graph::Dag;
use gmm_mpc::model::{build_model, BnModel, Link, ModelKind};

const ROWS: usize = 7466;
const SEED: u64 = 7466;

fn node_id(bn: &BnModel, name: &str) -> usize {
    bn.dag.node_id(name).unwrap()
}

/// Overwrite one node's mixture: `branches` maps a branch input set (by name,
/// any order) to its weights, bias and variance.
fn set_node(bn: &mut BnModel, name: &str, pi: &[f64], branches: &[(&[&str], &[f64], f64, f64)]) {
    let node = node_id(bn, name);
    let input_ids: Vec<Vec<usize>> = branches
        .iter()
        .map(|(inputs, _, _, _)| inputs.iter().map(|n| node_id(bn, n)).collect())
        .collect();
    let nm = &mut bn.node_models[node];
    assert_eq!(nm.branches.len(), branches.len(), "branch count mismatch for {name}");
    for branch in nm.branches.iter_mut() {
        let idx = input_ids
            .iter()
            .position(|inp| {
                let mut sorted = inp.clone();
                sorted.sort_unstable();
                sorted == branch.inputs
            })
            .unwrap();
        let (_, weights, bias, variance) = branches[idx];
        // Branch weights follow the model's ascending-id input order, which can
        // differ from the order the caller lists the names in.
        let mut named: Vec<(usize, f64)> =
            input_ids[idx].iter().copied().zip(weights.iter().copied()).collect();
        named.sort_unstable_by_key(|&(id, _)| id);
        branch.weights = named.into_iter().map(|(_, w)| w).collect();
        branch.bias = bias;
        branch.set_variance(variance);
    }
    nm.pi = pi.to_vec();
}

fn ground_truth() -> BnModel {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let text = fs::read_to_string(manifest.join("data/sachs_pc.json")).unwrap();
    let dag = Dag::parse(&text).unwrap();
    let mut bn = build_model(&dag, ModelKind::GmmMpc, Link::Linear, 1).unwrap();

    // Colliders get two well-separated branches; chain nodes stay unimodal
    // with enough unexplained variance that the linear baseline cannot close
    // the gap by variance shrinking alone.
    set_node(&mut bn, "Raf", &[0.4, 0.6], &[
        (&["PKA"], &[0.6], 1.2, 0.25),
        (&["PKC"], &[-0.6], -1.2, 0.25),
    ]);
    set_node(&mut bn, "Mek", &[1.0], &[(&["Raf"], &[0.8], 0.0, 0.5)]);
    set_node(&mut bn, "Erk", &[0.35, 0.65], &[
        (&["Mek"], &[0.7], 1.2, 0.25),
        (&["PKA"], &[-0.5], -1.2, 0.25),
    ]);
    set_node(&mut bn, "PIP2", &[0.55, 0.45], &[
        (&["Plcg"], &[0.6], 1.2, 0.25),
        (&["PIP3"], &[-0.6], -1.2, 0.25),
    ]);
    set_node(&mut bn, "Akt", &[1.0], &[(&["Erk", "PKA"], &[0.7, 0.4], 0.0, 0.5)]);
    set_node(&mut bn, "Jnk", &[1.0], &[(&["PKC"], &[0.7], 0.0, 0.6)]);
    for root in ["Plcg", "PIP3", "PKA", "PKC", "P38"] {
        set_node(&mut bn, root, &[1.0], &[(&[], &[], 0.0, 1.0)]);
    }

    // Per-protein affine rescale into fluorescence-like ranges, column order
    // Raf, Mek, Plcg, PIP2, PIP3, Erk, Akt, PKA, PKC, P38, Jnk.
    bn.normalization = Some(NormStats {
        means: vec![26.0, 18.0, 12.0, 45.0, 30.0, 14.0, 35.0, 420.0, 9.0, 22.0, 16.0],
        stddevs: vec![18.0, 12.0, 8.0, 40.0, 25.0, 10.0, 28.0, 300.0, 6.0, 15.0, 11.0],
    });
    bn
}

fn main() {
    let bn = ground_truth();
    let data = sample_denormalized(&bn, ROWS, SEED).unwrap();
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sachs_synth.csv");
    fs::write(&out, data.to_csv()).unwrap();
    println!("wrote {} rows to {}", ROWS, out.display());
}
