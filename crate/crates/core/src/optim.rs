//! Double iteration optimization: an outer loop that refreshes the mixture
//! coefficients with the closed-form EM update, and an inner loop of
//! mini-batch Adam over weights, biases and log-variances with the
//! coefficients frozen. The closed-form M-step for (w, b, sigma) is kept as
//! a full-EM alternative for the linear link.

use crate::data::{minibatches, Dataset};
use crate::error::{Error, Result};
use crate::eval;
use crate::model::{column_map, loss_on_rows, BnModel, Link};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const RIDGE: f64 = 1e-9;
/// Branch effective counts below this leave the branch untouched in the
/// closed-form M-step.
const MIN_BRANCH_WEIGHT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    FullEm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            outer_iterations: 4,
            inner_iterations: 20,
            batch_size: 3000,
            learning_rate: 0.005,
            epsilon: 1e-8,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        for beta in [self.adam_beta1, self.adam_beta2] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
            }
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub loss_per_outer_epoch: Vec<f64>,
    pub val_per_outer_epoch: Vec<f64>,
    /// "inner x outer" bookkeeping string, e.g. "20×4".
    pub epochs: String,
    pub final_train_loss: f64,
    /// Outer epoch (1-based) whose snapshot was kept, when early stopping ran.
    pub best_outer: Option<usize>,
    pub wall_time_seconds: f64,
}

/// Responsibilities indexed [node][row][branch].
pub type Responsibilities = Vec<Vec<Vec<f64>>>;

pub fn compute_responsibilities(
    bn: &BnModel,
    data: &Dataset,
    epsilon: f64,
) -> Result<Responsibilities> {
    let cols = column_map(&bn.dag, data)?;
    bn.node_models
        .iter()
        .map(|nm| {
            (0..data.n_rows())
                .map(|j| nm.responsibilities_row(data.row(j), &cols, epsilon))
                .collect()
        })
        .collect()
}

/// Coefficient update: pi_k = (1/N) sum_j gamma_jk for every node, with the
/// current weights, biases and variances.
pub fn em_pi_update(bn: &mut BnModel, data: &Dataset, epsilon: f64) -> Result<()> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols = column_map(&bn.dag, data)?;
    let n = data.n_rows() as f64;
    for nm in &mut bn.node_models {
        if nm.branches.len() == 1 {
            nm.pi = vec![1.0];
            continue;
        }
        let mut sums = vec![0.0; nm.branches.len()];
        for j in 0..data.n_rows() {
            let gamma = nm.responsibilities_row(data.row(j), &cols, epsilon)?;
            for (s, g) in sums.iter_mut().zip(&gamma) {
                *s += g;
            }
        }
        nm.pi = sums.into_iter().map(|s| s / n).collect();
    }
    Ok(())
}

/// Closed-form M-step for the linear link: per branch, solve the weighted
/// normal equations for (w, b) jointly on the augmented design, then refresh
/// sigma as the responsibility-weighted mean squared residual (floored).
pub fn closed_form_mstep(bn: &mut BnModel, data: &Dataset, gamma: &Responsibilities) -> Result<()> {
    let cols = column_map(&bn.dag, data)?;
    for (ni, nm) in bn.node_models.iter_mut().enumerate() {
        if nm.link != Link::Linear {
            return Err(Error::SigmoidClosedForm(bn.dag.node_name(nm.node).to_string()));
        }
        for (k, branch) in nm.branches.iter_mut().enumerate() {
            let d = branch.inputs.len();
            let n_k: f64 = (0..data.n_rows()).map(|j| gamma[ni][j][k]).sum();
            if n_k < MIN_BRANCH_WEIGHT {
                continue;
            }
            let mut a = DMatrix::zeros(d + 1, d + 1);
            let mut rhs = DVector::zeros(d + 1);
            let mut p = vec![0.0; d + 1];
            for (j, g_row) in gamma[ni].iter().enumerate() {
                let g = g_row[k];
                if g == 0.0 {
                    continue;
                }
                let row = data.row(j);
                for (i, &input) in branch.inputs.iter().enumerate() {
                    p[i] = row[cols[input]];
                }
                p[d] = 1.0;
                let x = row[cols[nm.node]];
                for r in 0..=d {
                    for c in 0..=d {
                        a[(r, c)] += g * p[r] * p[c];
                    }
                    rhs[r] += g * x * p[r];
                }
            }
            for r in 0..=d {
                a[(r, r)] += RIDGE;
            }
            let solution = a.lu().solve(&rhs).ok_or_else(|| Error::SingularSystem {
                node: bn.dag.node_name(nm.node).to_string(),
                branch: k,
            })?;
            branch.weights = solution.as_slice()[..d].to_vec();
            branch.bias = solution[d];
            let mut ss = 0.0;
            for (j, g_row) in gamma[ni].iter().enumerate() {
                let g = g_row[k];
                if g == 0.0 {
                    continue;
                }
                let row = data.row(j);
                let mean: f64 = branch
                    .inputs
                    .iter()
                    .zip(&branch.weights)
                    .map(|(&input, w)| w * row[cols[input]])
                    .sum::<f64>()
                    + branch.bias;
                let r = row[cols[nm.node]] - mean;
                ss += g * r * r;
            }
            branch.set_variance(ss / n_k);
        }
    }
    Ok(())
}

/// Analytic gradient of the batch loss with respect to every (w, b, s),
/// flattened in [`flatten_params`] order. The coefficients are treated as
/// constants, matching the inner phase.
pub fn loss_gradient(bn: &BnModel, data: &Dataset, rows: &[usize], epsilon: f64) -> Result<Vec<f64>> {
    let cols = column_map(&bn.dag, data)?;
    let mut grad = vec![0.0; param_dim(bn)];
    for &j in rows {
        let row = data.row(j);
        let mut offset = 0;
        for nm in &bn.node_models {
            let x = row[cols[nm.node]];
            let gamma = nm.responsibilities_row(row, &cols, epsilon)?;
            for (k, branch) in nm.branches.iter().enumerate() {
                let d = branch.inputs.len();
                let dot: f64 = branch
                    .inputs
                    .iter()
                    .zip(&branch.weights)
                    .map(|(&input, w)| w * row[cols[input]])
                    .sum();
                let (mean, mean_slope) = match nm.link {
                    Link::Linear => (dot + branch.bias, 1.0),
                    Link::Sigmoid => {
                        let s = 1.0 / (1.0 + (-dot).exp());
                        (s + branch.bias, s * (1.0 - s))
                    }
                };
                let var = branch.variance();
                let resid = x - mean;
                if !resid.is_finite() || !gamma[k].is_finite() {
                    return Err(Error::NonFinite {
                        what: "gradient",
                        node: bn.dag.node_name(nm.node).to_string(),
                        branch: k,
                    });
                }
                // dL/dmean = -gamma * (x - mean) / sigma
                let dmean = -gamma[k] * resid / var;
                for (i, &input) in branch.inputs.iter().enumerate() {
                    grad[offset + i] += dmean * mean_slope * row[cols[input]];
                }
                grad[offset + d] += dmean;
                // dL/ds with sigma = exp(s)
                grad[offset + d + 1] += -gamma[k] * (-0.5 + resid * resid / (2.0 * var));
                offset += d + 2;
            }
        }
    }
    Ok(grad)
}

pub fn param_dim(bn: &BnModel) -> usize {
    bn.node_models
        .iter()
        .flat_map(|nm| nm.branches.iter())
        .map(|b| b.inputs.len() + 2)
        .sum()
}

/// Flat layout: per node, per branch, [weights..., bias, log_var].
pub fn flatten_params(bn: &BnModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_dim(bn));
    for nm in &bn.node_models {
        for b in &nm.branches {
            out.extend_from_slice(&b.weights);
            out.push(b.bias);
            out.push(b.log_var);
        }
    }
    out
}

pub fn unflatten_params(bn: &mut BnModel, flat: &[f64]) {
    let mut it = flat.iter();
    for nm in &mut bn.node_models {
        for b in &mut nm.branches {
            for w in &mut b.weights {
                *w = *it.next().unwrap();
            }
            b.bias = *it.next().unwrap();
            b.log_var = *it.next().unwrap();
        }
    }
    debug_assert!(it.next().is_none());
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, beta1, beta2, eps }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    learning_rate: f64,
) -> Result<()> {
    if params.len() != state.m.len() || grad.len() != state.m.len() {
        return Err(Error::DimensionMismatch { expected: state.m.len(), found: grad.len() });
    }
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Run DIO: `outer_iterations` epochs of coefficient update followed by
/// `inner_iterations` mini-batch passes of Adam (or one closed-form M-step
/// when the optimizer is full-EM). With a validation set, early stopping
/// (patience 3 on the validation average NLL) truncates the outer loop and
/// the best snapshot is restored.
pub fn dio_train(
    mut bn: BnModel,
    data: &Dataset,
    config: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<(BnModel, TrainReport)> {
    config.validate()?;
    if config.optimizer == Optimizer::FullEm {
        if let Some(nm) = bn.node_models.iter().find(|nm| nm.link != Link::Linear) {
            return Err(Error::SigmoidClosedForm(bn.dag.node_name(nm.node).to_string()));
        }
    }
    let start = std::time::Instant::now();
    let cols = column_map(&bn.dag, data)?;
    let all_rows: Vec<usize> = (0..data.n_rows()).collect();
    let mut params = flatten_params(&bn);
    let mut adam = AdamState::new(params.len(), config.adam_beta1, config.adam_beta2, config.adam_eps);
    let mut loss_trace = Vec::new();
    let mut val_trace = Vec::new();
    let mut best: Option<(usize, f64, BnModel)> = None;
    let mut pass_index: u64 = 0;
    let mut completed = 0;

    for outer in 1..=config.outer_iterations {
        em_pi_update(&mut bn, data, config.epsilon)?;
        match config.optimizer {
            Optimizer::FullEm => {
                let gamma = compute_responsibilities(&bn, data, config.epsilon)?;
                closed_form_mstep(&mut bn, data, &gamma)?;
                params = flatten_params(&bn);
            }
            Optimizer::Adam => {
                for _ in 0..config.inner_iterations {
                    for batch in minibatches(data.n_rows(), config.batch_size, config.seed, pass_index)
                    {
                        let grad = loss_gradient(&bn, data, &batch, config.epsilon)?;
                        adam_step(&mut adam, &mut params, &grad, config.learning_rate)?;
                        unflatten_params(&mut bn, &params);
                    }
                    pass_index += 1;
                }
            }
        }
        let train_loss = loss_on_rows(&bn, data, &all_rows, &cols, config.epsilon)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { outer });
        }
        loss_trace.push(train_loss);
        completed = outer;
        if let Some(val) = validation {
            let val_nll = eval::avg_minus_loglik(&bn, val, 0.0)?;
            val_trace.push(val_nll);
            if best.as_ref().is_none_or(|(_, b, _)| val_nll < *b) {
                best = Some((outer, val_nll, bn.clone()));
            }
            let decision = eval::early_stopping(&val_trace, eval::DEFAULT_PATIENCE);
            if decision.stop {
                break;
            }
        }
    }

    if let Some((best_outer, _, snapshot)) = &best {
        bn = snapshot.clone();
        let report = TrainReport {
            final_train_loss: loss_trace[best_outer - 1],
            loss_per_outer_epoch: loss_trace,
            val_per_outer_epoch: val_trace,
            epochs: format!("{}×{}", config.inner_iterations, completed),
            best_outer: Some(*best_outer),
            wall_time_seconds: start.elapsed().as_secs_f64(),
        };
        return Ok((bn, report));
    }
    let report = TrainReport {
        final_train_loss: loss_trace.last().copied().unwrap_or(f64::NAN),
        loss_per_outer_epoch: loss_trace,
        val_per_outer_epoch: val_trace,
        epochs: format!("{}×{}", config.inner_iterations, completed),
        best_outer: None,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((bn, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;
    use crate::model::{build_model, total_loss, BranchParams, ModelKind, NodeModel};
    use approx::assert_relative_eq;

    fn single_node_two_branch(pi: Vec<f64>, means: [f64; 2]) -> BnModel {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let mut b0 = BranchParams::new(vec![]);
        b0.bias = means[0];
        let mut b1 = BranchParams::new(vec![]);
        b1.bias = means[1];
        bn.node_models[0] = NodeModel {
            node: 0,
            branches: vec![b0, b1],
            pi,
            link: crate::model::Link::Linear,
            kind: ModelKind::Gmm,
        };
        bn
    }

    #[test]
    fn pi_update_single_branch_is_one() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let data = Dataset::new(vec!["A".into()], vec![0.1, 0.2, 0.9]);
        em_pi_update(&mut bn, &data, 0.0).unwrap();
        assert_eq!(bn.node_models[0].pi, vec![1.0]);
        let empty = Dataset::new(vec!["A".into()], vec![]);
        assert!(matches!(em_pi_update(&mut bn, &empty, 0.0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn pi_update_symmetric_fixed_point() {
        let mut bn = single_node_two_branch(vec![0.5, 0.5], [0.0, 0.0]);
        let data = Dataset::new(vec!["A".into()], vec![0.4, -1.0, 2.0]);
        em_pi_update(&mut bn, &data, 0.0).unwrap();
        assert_relative_eq!(bn.node_models[0].pi[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(bn.node_models[0].pi[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pi_update_matches_hand_computed_responsibilities() {
        let mut bn = single_node_two_branch(vec![0.3, 0.7], [0.0, 1.0]);
        let xs = [0.0, 0.5, 1.0, 2.0];
        let data = Dataset::new(vec!["A".into()], xs.to_vec());
        // independent per-instance ratio oracle
        let phi = |x: f64, m: f64| {
            (-0.5 * (x - m) * (x - m)).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let mut expect = [0.0, 0.0];
        for &x in &xs {
            let (a, b) = (0.3 * phi(x, 0.0), 0.7 * phi(x, 1.0));
            expect[0] += a / (a + b);
            expect[1] += b / (a + b);
        }
        em_pi_update(&mut bn, &data, 0.0).unwrap();
        assert_relative_eq!(bn.node_models[0].pi[0], expect[0] / 4.0, epsilon = 1e-12);
        assert_relative_eq!(bn.node_models[0].pi[1], expect[1] / 4.0, epsilon = 1e-12);
        assert_relative_eq!(bn.node_models[0].pi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mstep_root_node_recovers_gaussian_mle() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let xs = [1.0, 2.0, 3.0, 6.0];
        let data = Dataset::new(vec!["A".into()], xs.to_vec());
        let gamma = vec![vec![vec![1.0]; 4]];
        closed_form_mstep(&mut bn, &data, &gamma).unwrap();
        let mean = 3.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert_relative_eq!(bn.node_models[0].branches[0].bias, mean, epsilon = 1e-7);
        assert_relative_eq!(bn.node_models[0].branches[0].variance(), var, epsilon = 1e-7);
    }

    #[test]
    fn mstep_single_parent_matches_ols() {
        let dag = Dag::parse(r#"{"nodes": ["P","X"], "edges": [["P","X"]]}"#).unwrap();
        let mut bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let p = [0.0, 1.0, 2.0, 3.0, 4.0];
        let x = [0.5, 1.4, 2.7, 3.3, 4.9];
        let values: Vec<f64> = p.iter().zip(&x).flat_map(|(&a, &b)| [a, b]).collect();
        let data = Dataset::new(vec!["P".into(), "X".into()], values);
        let gamma = vec![vec![vec![1.0]; 5], vec![vec![1.0]; 5]];
        closed_form_mstep(&mut bn, &data, &gamma).unwrap();
        // OLS oracle
        let n = 5.0;
        let (pm, xm) = (p.iter().sum::<f64>() / n, x.iter().sum::<f64>() / n);
        let sxy: f64 = p.iter().zip(&x).map(|(&a, &b)| (a - pm) * (b - xm)).sum();
        let sxx: f64 = p.iter().map(|&a| (a - pm) * (a - pm)).sum();
        let slope = sxy / sxx;
        let intercept = xm - slope * pm;
        let branch = &bn.node_models[1].branches[0];
        assert_relative_eq!(branch.weights[0], slope, epsilon = 1e-8);
        assert_relative_eq!(branch.bias, intercept, epsilon = 1e-8);
        let mse: f64 = p
            .iter()
            .zip(&x)
            .map(|(&a, &b)| (b - slope * a - intercept).powi(2))
            .sum::<f64>()
            / n;
        assert_relative_eq!(branch.variance(), mse, epsilon = 1e-8);
    }

    #[test]
    fn mstep_one_hot_gamma_fits_subsets() {
        let mut bn = single_node_two_branch(vec![0.5, 0.5], [0.0, 0.0]);
        let xs = [1.0, 1.2, 5.0, 5.4];
        let data = Dataset::new(vec!["A".into()], xs.to_vec());
        let gamma = vec![vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ]];
        closed_form_mstep(&mut bn, &data, &gamma).unwrap();
        assert_relative_eq!(bn.node_models[0].branches[0].bias, 1.1, epsilon = 1e-8);
        assert_relative_eq!(bn.node_models[0].branches[1].bias, 5.2, epsilon = 1e-8);
    }

    #[test]
    fn gradient_zero_at_symmetric_point() {
        let dag = Dag::parse(r#"{"nodes": ["P","X"], "edges": [["P","X"]]}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let data = Dataset::new(vec!["P".into(), "X".into()], vec![0.0, 0.0]);
        let grad = loss_gradient(&bn, &data, &[0], 0.0).unwrap();
        // bias gradient of node X sits at offset 2 + 1 (after root's b, s and X's w)
        assert_relative_eq!(grad[3], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dag = Dag::parse(
            r#"{"nodes": ["A","B","T"], "edges": [["A","T"],["B","T"]]}"#,
        )
        .unwrap();
        let mut bn = build_model(&dag, ModelKind::GmmMpc, crate::model::Link::Linear, 3).unwrap();
        let t = dag.node_id("T").unwrap();
        bn.node_models[t].pi = vec![0.4, 0.6];
        bn.node_models[t].branches[0].weights = vec![0.7];
        bn.node_models[t].branches[0].bias = -0.3;
        bn.node_models[t].branches[1].weights = vec![-0.2];
        bn.node_models[t].branches[1].bias = 0.8;
        let data = Dataset::new(
            vec!["A".into(), "B".into(), "T".into()],
            vec![0.5, -1.0, 0.2, 1.5, 0.3, -0.7],
        );
        let rows = vec![0, 1];
        let eps = 1e-8;
        let analytic = loss_gradient(&bn, &data, &rows, eps).unwrap();
        let params = flatten_params(&bn);
        let cols = column_map(&bn.dag, &data).unwrap();
        let h = 1e-6;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let mut bn2 = bn.clone();
            unflatten_params(&mut bn2, &plus);
            let lp = loss_on_rows(&bn2, &data, &rows, &cols, eps).unwrap();
            unflatten_params(&mut bn2, &minus);
            let lm = loss_on_rows(&bn2, &data, &rows, &cols, eps).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (analytic[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "param {i}: analytic {} vs fd {fd}",
                analytic[i]
            );
        }
    }

    #[test]
    fn adam_step_cases() {
        let mut state = AdamState::new(2, 0.9, 0.999, 1e-8);
        let mut params = vec![1.0, -2.0];
        adam_step(&mut state, &mut params, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(params, vec![1.0, -2.0]);

        // One step with a constant gradient moves by ~lr in the -sign(g)
        // direction after bias correction.
        let mut state = AdamState::new(1, 0.9, 0.999, 1e-8);
        let mut params = vec![0.0];
        adam_step(&mut state, &mut params, &[3.0], 0.01).unwrap();
        assert_relative_eq!(params[0], -0.01, epsilon = 1e-6);

        // Identical parameters with identical gradients stay identical.
        let mut state = AdamState::new(2, 0.9, 0.999, 1e-8);
        let mut params = vec![0.5, 0.5];
        for _ in 0..10 {
            adam_step(&mut state, &mut params, &[1.3, 1.3], 0.05).unwrap();
        }
        assert_eq!(params[0], params[1]);

        let mut state = AdamState::new(2, 0.9, 0.999, 1e-8);
        assert!(adam_step(&mut state, &mut [0.0], &[1.0], 0.1).is_err());
    }

    #[test]
    fn dio_zero_outer_is_identity() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let data = Dataset::new(vec!["A".into()], vec![1.0, 2.0]);
        let config = TrainConfig { outer_iterations: 0, ..TrainConfig::default() };
        let (out, report) = dio_train(bn.clone(), &data, &config, None).unwrap();
        assert!(report.loss_per_outer_epoch.is_empty());
        assert_eq!(flatten_params(&out), flatten_params(&bn));
    }

    #[test]
    fn dio_full_em_one_epoch_is_ols_for_lg() {
        let dag = Dag::parse(r#"{"nodes": ["P","X"], "edges": [["P","X"]]}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Linear, 3).unwrap();
        let p = [0.0, 1.0, 2.0, 3.0];
        let x = [1.0, 0.8, 2.5, 2.9];
        let values: Vec<f64> = p.iter().zip(&x).flat_map(|(&a, &b)| [a, b]).collect();
        let data = Dataset::new(vec!["P".into(), "X".into()], values);
        let config = TrainConfig {
            outer_iterations: 1,
            optimizer: Optimizer::FullEm,
            epsilon: 0.0,
            ..TrainConfig::default()
        };
        let (out, _) = dio_train(bn, &data, &config, None).unwrap();
        let n = 4.0;
        let (pm, xm) = (p.iter().sum::<f64>() / n, x.iter().sum::<f64>() / n);
        let slope: f64 = p.iter().zip(&x).map(|(&a, &b)| (a - pm) * (b - xm)).sum::<f64>()
            / p.iter().map(|&a| (a - pm) * (a - pm)).sum::<f64>();
        assert_relative_eq!(out.node_models[1].branches[0].weights[0], slope, epsilon = 1e-8);
        assert_relative_eq!(out.node_models[1].branches[0].bias, xm - slope * pm, epsilon = 1e-8);
    }

    #[test]
    fn dio_full_em_rejects_sigmoid() {
        let dag = Dag::parse(r#"{"nodes": ["A"], "edges": []}"#).unwrap();
        let bn = build_model(&dag, ModelKind::Lg, crate::model::Link::Sigmoid, 3).unwrap();
        let data = Dataset::new(vec!["A".into()], vec![1.0]);
        let config = TrainConfig { optimizer: Optimizer::FullEm, ..TrainConfig::default() };
        assert!(matches!(
            dio_train(bn, &data, &config, None),
            Err(Error::SigmoidClosedForm(_))
        ));
    }

    #[test]
    fn dio_deterministic_trace() {
        let mut bn = single_node_two_branch(vec![0.5, 0.5], [-1.0, 1.0]);
        bn.node_models[0].kind = ModelKind::Gmm;
        let xs: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { -1.1 } else { 1.3 }).collect();
        let data = Dataset::new(vec!["A".into()], xs);
        let config = TrainConfig {
            outer_iterations: 3,
            inner_iterations: 4,
            batch_size: 8,
            learning_rate: 0.05,
            seed: 42,
            ..TrainConfig::default()
        };
        let (_, r1) = dio_train(bn.clone(), &data, &config, None).unwrap();
        let (_, r2) = dio_train(bn, &data, &config, None).unwrap();
        assert_eq!(r1.loss_per_outer_epoch, r2.loss_per_outer_epoch);
    }

    #[test]
    fn pi_update_never_increases_loss() {
        // Exact at eps = 0 with all other parameters frozen.
        let mut bn = single_node_two_branch(vec![0.8, 0.2], [-2.0, 2.0]);
        let xs: Vec<f64> = (0..50)
            .map(|i| if i % 3 == 0 { -2.0 + 0.01 * i as f64 } else { 2.0 - 0.01 * i as f64 })
            .collect();
        let data = Dataset::new(vec!["A".into()], xs);
        for _ in 0..8 {
            let before = total_loss(&bn, &data, 0.0).unwrap();
            em_pi_update(&mut bn, &data, 0.0).unwrap();
            let after = total_loss(&bn, &data, 0.0).unwrap();
            assert!(after <= before + 1e-9, "loss rose: {before} -> {after}");
            let sum: f64 = bn.node_models[0].pi.iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }
}
