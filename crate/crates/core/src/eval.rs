//! Held-out metrics (average minus log-likelihood, BIC, parameter counts),
//! early stopping, ancestral sampling and per-node prediction.

use crate::data::{zscore_invert, Dataset};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::model::{branch_mean, total_loss, BnModel, NodeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub const DEFAULT_PATIENCE: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub avg_minus_loglik: f64,
    pub bic: f64,
    pub param_count: usize,
    pub n_test: usize,
}

/// total_loss / N_test. Evaluation defaults to eps = 0: the stabilizer is a
/// training device, not part of the reported density.
pub fn avg_minus_loglik(bn: &BnModel, test: &Dataset, epsilon: f64) -> Result<f64> {
    if test.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(total_loss(bn, test, epsilon)? / test.n_rows() as f64)
}

/// Counting rule: per branch |w| + 2 (bias, variance), plus K - 1 free
/// mixture coefficients per node. Root nodes therefore count (b, sigma) only.
pub fn param_count(bn: &BnModel) -> usize {
    bn.node_models
        .iter()
        .map(|nm| {
            nm.branches.iter().map(|b| b.inputs.len() + 2).sum::<usize>() + (nm.branches.len() - 1)
        })
        .sum()
}

/// BIC = avg_nll * n + (p/2) ln n.
pub fn bic(avg_minus_loglik: f64, param_count: usize, n_test: usize) -> f64 {
    avg_minus_loglik * n_test as f64 + 0.5 * param_count as f64 * (n_test as f64).ln()
}

pub fn evaluate(bn: &BnModel, test: &Dataset, epsilon: f64) -> Result<EvalResult> {
    let avg = avg_minus_loglik(bn, test, epsilon)?;
    let p = param_count(bn);
    Ok(EvalResult { avg_minus_loglik: avg, bic: bic(avg, p, test.n_rows()), param_count: p, n_test: test.n_rows() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub stop: bool,
    /// 1-based epoch of the best validation value seen so far.
    pub best_epoch: usize,
}

/// Stop once the metric has gone `patience` consecutive epochs without
/// improving on the best value (ties count as no improvement).
pub fn early_stopping(trace: &[f64], patience: usize) -> StopDecision {
    assert!(patience >= 1);
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut streak = 0;
    for (i, &v) in trace.iter().enumerate() {
        if v < best {
            best = v;
            best_epoch = i + 1;
            streak = 0;
        } else {
            streak += 1;
            if streak >= patience {
                return StopDecision { stop: true, best_epoch };
            }
        }
    }
    StopDecision { stop: false, best_epoch }
}

fn rng_for_row(seed: u64, row: u64) -> ChaCha8Rng {
    // Splittable per-row stream so row order (or parallelism) cannot change
    // any individual draw.
    ChaCha8Rng::seed_from_u64(seed ^ row.wrapping_mul(0xD129_0D3E_AEF8_B2C5))
}

fn draw_branch(nm: &NodeModel, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = nm.pi.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, &p) in nm.pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    nm.pi.len() - 1
}

fn draw_node(nm: &NodeModel, inputs: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = draw_branch(nm, rng);
    let mean = branch_mean(&nm.branches[k], &inputs[k], nm.link)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + nm.branches[k].variance().sqrt() * z)
}

/// Ancestral sampling: nodes in topological order, each drawn from a branch
/// chosen by its mixture coefficients. Values are in normalized space.
pub fn sample(bn: &BnModel, count: usize, seed: u64) -> Result<Dataset> {
    let order = bn.dag.topological_order();
    let n = bn.dag.node_count();
    let mut values = vec![0.0; count * n];
    for j in 0..count {
        let mut rng = rng_for_row(seed, j as u64);
        let row_start = j * n;
        for &node in &order {
            let nm = &bn.node_models[node];
            let inputs: Vec<Vec<f64>> = nm
                .branches
                .iter()
                .map(|b| b.inputs.iter().map(|&v| values[row_start + v]).collect())
                .collect();
            values[row_start + node] = draw_node(nm, &inputs, &mut rng)?;
        }
    }
    Ok(Dataset::new(bn.dag.node_names().to_vec(), values))
}

/// Like [`sample`] but mapped back to the original data scale through the
/// model's stored normalization statistics.
pub fn sample_denormalized(bn: &BnModel, count: usize, seed: u64) -> Result<Dataset> {
    let normalized = sample(bn, count, seed)?;
    match &bn.normalization {
        Some(stats) => Ok(zscore_invert(stats, &normalized)),
        None => Ok(normalized),
    }
}

/// Per-row conditional draw of `node` given parent values taken from
/// `parent_rows` (normalized space). Bitwise reproducible for a fixed seed.
pub fn predict_node(
    bn: &BnModel,
    node: NodeId,
    parent_rows: &Dataset,
    seed: u64,
) -> Result<Vec<f64>> {
    let nm = &bn.node_models[node];
    let input_cols: Vec<Vec<usize>> = nm
        .branches
        .iter()
        .map(|b| {
            b.inputs
                .iter()
                .map(|&v| parent_rows.column_index(bn.dag.node_name(v)))
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(parent_rows.n_rows());
    for j in 0..parent_rows.n_rows() {
        let row = parent_rows.row(j);
        let inputs: Vec<Vec<f64>> = input_cols
            .iter()
            .map(|cols| cols.iter().map(|&c| row[c]).collect())
            .collect();
        let mut rng = rng_for_row(seed, j as u64);
        out.push(draw_node(nm, &inputs, &mut rng)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;
    use crate::model::{build_model, Link, ModelKind, LN_2PI};
    use approx::assert_relative_eq;

    #[test]
    fn avg_nll_standard_normal_at_zero() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let data = Dataset::new(vec!["A".into()], vec![0.0]);
        assert_relative_eq!(
            avg_minus_loglik(&bn, &data, 0.0).unwrap(),
            0.5 * LN_2PI,
            epsilon = 1e-12
        );
        let empty = Dataset::new(vec!["A".into()], vec![]);
        assert!(avg_minus_loglik(&bn, &empty, 0.0).is_err());
    }

    #[test]
    fn variance_floor_bounds_nll_below() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        bn.node_models[0].branches[0].set_variance(0.0);
        let data = Dataset::new(vec!["A".into()], vec![0.0]);
        let v = avg_minus_loglik(&bn, &data, 0.0).unwrap();
        assert!(v.is_finite());
        assert_relative_eq!(v, 0.5 * (LN_2PI + 1e-6f64.ln()), epsilon = 1e-9);
    }

    #[test]
    fn param_count_cases() {
        let root = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let bn = build_model(&root, ModelKind::Lg, Link::Linear, 3).unwrap();
        assert_eq!(param_count(&bn), 2);

        let ab = Dag::parse(r#"{"nodes": ["A","B"], "edges": [["A","B"]]}"#).unwrap();
        let bn = build_model(&ab, ModelKind::Lg, Link::Linear, 3).unwrap();
        assert_eq!(param_count(&bn), 5);

        let collider =
            Dag::parse(r#"{"nodes": ["X","Z","T"], "edges": [["X","T"],["Z","T"]]}"#).unwrap();
        let bn = build_model(&collider, ModelKind::GmmMpc, Link::Linear, 3).unwrap();
        assert_eq!(param_count(&bn), 11);
    }

    #[test]
    fn bic_cases() {
        assert_eq!(bic(0.0, 0, 5), 0.0);
        let e = std::f64::consts::E;
        // n = e gives ln n = 1 exactly in the formula sense; use n = 3 nearest
        // integer check instead for the identity, and the table row check:
        let v = bic(17.90, 49, 25000);
        assert!((v - 447748.1).abs() < 0.5, "bic = {v}");
        assert_relative_eq!(bic(1.0, 2, 1), 1.0, epsilon = 1e-12);
        let _ = e;
    }

    #[test]
    fn eval_result_internal_identity() {
        let dag = Dag::parse(r#"{"nodes": ["A","B"], "edges": [["A","B"]]}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let data = Dataset::new(vec!["A".into(), "B".into()], vec![0.1, 0.2, -0.4, 0.9, 1.0, -1.0]);
        let r = evaluate(&bn, &data, 0.0).unwrap();
        let identity = r.avg_minus_loglik * r.n_test as f64
            + 0.5 * r.param_count as f64 * (r.n_test as f64).ln();
        assert_relative_eq!(r.bic, identity, epsilon = 1e-9);
    }

    #[test]
    fn early_stopping_cases() {
        let d = early_stopping(&[5.0, 4.0, 3.0, 2.0], 2);
        assert!(!d.stop);
        assert_eq!(d.best_epoch, 4);

        let d = early_stopping(&[5.0, 4.0, 4.5, 4.6, 4.7], 2);
        assert!(d.stop);
        assert_eq!(d.best_epoch, 2);

        let d = early_stopping(&[3.0, 3.0], 1);
        assert!(d.stop);
        assert_eq!(d.best_epoch, 1);
    }

    #[test]
    fn sampling_moments_and_reproducibility() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let s = sample(&bn, 100_000, 7).unwrap();
        let mean: f64 = (0..s.n_rows()).map(|j| s.row(j)[0]).sum::<f64>() / 1e5;
        let var: f64 = (0..s.n_rows()).map(|j| (s.row(j)[0] - mean).powi(2)).sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.02, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.05, "var = {var}");

        let s2 = sample(&bn, 100_000, 7).unwrap();
        assert_eq!(s.row(123), s2.row(123));
    }

    #[test]
    fn deterministic_branch_prediction() {
        let dag = Dag::parse(r#"{"nodes": ["P","X"], "edges": [["P","X"]]}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let x = dag.node_id("X").unwrap();
        bn.node_models[x].branches[0].weights = vec![2.0];
        bn.node_models[x].branches[0].bias = 1.0;
        bn.node_models[x].branches[0].set_variance(0.0); // floored
        let parents = Dataset::new(vec!["P".into()], vec![0.5, -1.0]);
        let pred = predict_node(&bn, x, &parents, 1).unwrap();
        assert!((pred[0] - 2.0).abs() < 0.01);
        assert!((pred[1] + 1.0).abs() < 0.01);
        assert_eq!(pred, predict_node(&bn, x, &parents, 1).unwrap());
    }

    #[test]
    fn bimodal_sampling_frequencies() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let mut b0 = crate::model::BranchParams::new(vec![]);
        b0.bias = -2.0;
        let mut b1 = crate::model::BranchParams::new(vec![]);
        b1.bias = 2.0;
        bn.node_models[0].branches = vec![b0, b1];
        bn.node_models[0].pi = vec![0.5, 0.5];
        let s = sample(&bn, 100_000, 11).unwrap();
        let frac_neg =
            (0..s.n_rows()).filter(|&j| s.row(j)[0] < 0.0).count() as f64 / 1e5;
        assert!((frac_neg - 0.5).abs() < 0.02, "frac = {frac_neg}");
    }

    #[test]
    fn sampling_respects_topological_order() {
        // Child equals its parent deterministically when w = 1, var floored.
        let dag = Dag::parse(r#"{"nodes": ["B","A"], "edges": [["A","B"]]}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, Link::Linear, 3).unwrap();
        let b = dag.node_id("B").unwrap();
        bn.node_models[b].branches[0].weights = vec![1.0];
        bn.node_models[b].branches[0].set_variance(0.0);
        let s = sample(&bn, 50, 3).unwrap();
        let (bi, ai) = (s.column_index("B").unwrap(), s.column_index("A").unwrap());
        for j in 0..50 {
            assert!((s.row(j)[bi] - s.row(j)[ai]).abs() < 0.01);
        }
    }
}
