//! Fits a model to the synthetic Sachs data, then draws new rows by ancestral
//! sampling and checks the per-column moments against the source data.

use std::fs;
use std::path::Path;

use gmm_mpc::data::{load_csv, zscore_fit_transform, Dataset};
use gmm_mpc::eval::sample_denormalized;
use gmm_mpc::graph::Dag;
use gmm_mpc::model::{build_model, Link, ModelKind};
use gmm_mpc::optim::{dio_train, Optimizer, TrainConfig};

fn moments(data: &Dataset, col: usize) -> (f64, f64) {
    let n = data.n_rows() as f64;
    let mean = (0..data.n_rows()).map(|j| data.row(j)[col]).sum::<f64>() / n;
    let var = (0..data.n_rows()).map(|j| (data.row(j)[col] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn main() {
    let data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dag = Dag::parse(&fs::read_to_string(data_dir.join("sachs_pc.json")).unwrap()).unwrap();
    let raw = load_csv(&fs::read_to_string(data_dir.join("sachs_synth.csv")).unwrap()).unwrap();
    let train = zscore_fit_transform(&raw).unwrap();

    let mut bn = build_model(&dag, ModelKind::GmmMpc, Link::Linear, 1).unwrap();
    bn.normalization = train.norm_stats.clone();
    let cfg = TrainConfig {
        outer_iterations: 10,
        inner_iterations: 1,
        optimizer: Optimizer::FullEm,
        seed: 7,
        ..TrainConfig::default()
    };
    let (bn, _) = dio_train(bn, &train, &cfg, None).unwrap();

    let samples = sample_denormalized(&bn, 5000, 99).unwrap();
    println!("{:<6} {:>10} {:>10} {:>12} {:>12}", "node", "data mean", "samp mean", "data stddev", "samp stddev");
    for (c, name) in raw.columns.iter().enumerate() {
        let (dm, ds) = moments(&raw, c);
        let (sm, ss) = moments(&samples, c);
        println!("{name:<6} {dm:>10.2} {sm:>10.2} {ds:>12.2} {ss:>12.2}");
    }
}
