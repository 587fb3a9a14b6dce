//! Node distribution families: linear Gaussian, ordinary GMM, and the
//! per-MPC mixture, with linear and sigmoid mean links.
//!
//! A node's conditional density is a mixture over branches. Each branch k has
//! weights w, bias b and a variance sigma stored as s = ln(sigma) so that
//! unconstrained gradient steps keep sigma positive. The mixture log-density
//! is ln(sum_k pi_k N_k + eps), evaluated with a max-shift so widely spread
//! branch log-densities do not underflow.

use crate::data::{Dataset, NormStats};
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId};
use crate::mpc::find_mpcs_fast;
use serde::{Deserialize, Serialize};

/// Floor applied to variances after closed-form updates.
pub const VARIANCE_FLOOR: f64 = 1e-6;

pub const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Linear,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lg")]
    Lg,
    #[serde(rename = "gmm")]
    Gmm,
    #[serde(rename = "gmm-mpc")]
    GmmMpc,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lg" => Ok(ModelKind::Lg),
            "gmm" => Ok(ModelKind::Gmm),
            "gmm-mpc" => Ok(ModelKind::GmmMpc),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Link::Linear),
            "sigmoid" => Ok(Link::Sigmoid),
            other => Err(Error::InvalidConfig(format!("unknown link {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            ModelKind::Lg => "lg",
            ModelKind::Gmm => "gmm",
            ModelKind::GmmMpc => "gmm-mpc",
        })
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Link::Linear => "linear",
            Link::Sigmoid => "sigmoid",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BranchParams {
    /// Node ids feeding this branch, ascending.
    pub inputs: Vec<NodeId>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// s = ln(sigma); sigma is the VARIANCE of the branch Gaussian.
    pub log_var: f64,
}

impl BranchParams {
    pub fn new(inputs: Vec<NodeId>) -> Self {
        let k = inputs.len();
        BranchParams { inputs, weights: vec![0.0; k], bias: 0.0, log_var: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.log_var.exp()
    }

    pub fn set_variance(&mut self, variance: f64) {
        self.log_var = variance.max(VARIANCE_FLOOR).ln();
    }
}

#[derive(Debug, Clone)]
pub struct NodeModel {
    pub node: NodeId,
    pub branches: Vec<BranchParams>,
    pub pi: Vec<f64>,
    pub link: Link,
    pub kind: ModelKind,
}

#[derive(Debug, Clone)]
pub struct BnModel {
    pub dag: Dag,
    pub node_models: Vec<NodeModel>,
    pub normalization: Option<NormStats>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean of one branch: w'p + b (linear) or sigmoid(w'p) + b.
pub fn branch_mean(params: &BranchParams, parent_values: &[f64], link: Link) -> Result<f64> {
    if parent_values.len() != params.inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: params.inputs.len(),
            found: parent_values.len(),
        });
    }
    let dot: f64 = params.weights.iter().zip(parent_values).map(|(w, p)| w * p).sum();
    Ok(match link {
        Link::Linear => dot + params.bias,
        Link::Sigmoid => sigmoid(dot) + params.bias,
    })
}

/// Gaussian log-density of x under the branch, with sigma as the variance.
pub fn branch_logpdf(params: &BranchParams, parent_values: &[f64], x: f64, link: Link) -> Result<f64> {
    let mean = branch_mean(params, parent_values, link)?;
    let var = params.variance();
    let d = x - mean;
    Ok(-0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var))
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Branch log-densities weighted by ln(pi): a_k = ln(pi_k) + ln N_k.
fn weighted_branch_logpdfs(
    model: &NodeModel,
    parent_values: &[&[f64]],
    x: f64,
) -> Result<Vec<f64>> {
    model
        .branches
        .iter()
        .zip(parent_values)
        .zip(&model.pi)
        .map(|((b, p), &pi)| {
            let lp = branch_logpdf(b, p, x, model.link)?;
            Ok(if pi > 0.0 { pi.ln() + lp } else { f64::NEG_INFINITY })
        })
        .collect()
}

/// ln(sum_k pi_k N_k + eps), max-shifted.
pub fn node_mixture_logpdf(
    model: &NodeModel,
    parent_values: &[&[f64]],
    x: f64,
    epsilon: f64,
) -> Result<f64> {
    let a = weighted_branch_logpdfs(model, parent_values, x)?;
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mix = if m == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        m + a.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
    };
    Ok(if epsilon > 0.0 { logaddexp(mix, epsilon.ln()) } else { mix })
}

/// gamma_k = pi_k N_k / (sum_k pi_k N_k + eps).
pub fn responsibilities(
    model: &NodeModel,
    parent_values: &[&[f64]],
    x: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let a = weighted_branch_logpdfs(model, parent_values, x)?;
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        // All densities vanished. With eps > 0 the exact ratio is 0; without
        // it the ratio is indeterminate and we fall back to the coefficients.
        return Ok(if epsilon > 0.0 { vec![0.0; a.len()] } else { model.pi.clone() });
    }
    let shifted: Vec<f64> = a.iter().map(|&v| (v - m).exp()).collect();
    let denom: f64 = shifted.iter().sum::<f64>() + epsilon * (-m).exp();
    Ok(shifted.iter().map(|&s| if denom.is_finite() { s / denom } else { 0.0 }).collect())
}

/// Map node id -> dataset column index.
pub fn column_map(dag: &Dag, data: &Dataset) -> Result<Vec<usize>> {
    dag.node_names().iter().map(|name| data.column_index(name)).collect()
}

impl NodeModel {
    /// Gather each branch's input values from a data row.
    pub fn gather_inputs(&self, row: &[f64], cols: &[usize]) -> Vec<Vec<f64>> {
        self.branches
            .iter()
            .map(|b| b.inputs.iter().map(|&v| row[cols[v]]).collect())
            .collect()
    }

    pub fn mixture_logpdf_row(&self, row: &[f64], cols: &[usize], epsilon: f64) -> Result<f64> {
        let inputs = self.gather_inputs(row, cols);
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        node_mixture_logpdf(self, &refs, row[cols[self.node]], epsilon)
    }

    pub fn responsibilities_row(&self, row: &[f64], cols: &[usize], epsilon: f64) -> Result<Vec<f64>> {
        let inputs = self.gather_inputs(row, cols);
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        responsibilities(self, &refs, row[cols[self.node]], epsilon)
    }
}

/// Build a model with the branch structure of the requested family.
/// Parameters start at w = 0, b = 0, sigma = 1, pi uniform. Ordinary-GMM
/// branches additionally stagger their biases; with identical inputs the
/// branches would otherwise receive identical gradients forever.
pub fn build_model(
    dag: &Dag,
    kind: ModelKind,
    link: Link,
    gmm_branch_count: usize,
) -> Result<BnModel> {
    if gmm_branch_count < 1 {
        return Err(Error::InvalidBranchCount);
    }
    let mut node_models = Vec::with_capacity(dag.node_count());
    for node in 0..dag.node_count() {
        let parents = dag.parents(node).to_vec();
        let branches: Vec<BranchParams> = match kind {
            ModelKind::Lg => vec![BranchParams::new(parents)],
            ModelKind::Gmm => {
                if parents.is_empty() {
                    // Roots collapse to a single parentless branch.
                    vec![BranchParams::new(Vec::new())]
                } else {
                    (0..gmm_branch_count)
                        .map(|k| {
                            let mut b = BranchParams::new(parents.clone());
                            b.bias = 0.5 * (k as f64 - (gmm_branch_count - 1) as f64 / 2.0);
                            b
                        })
                        .collect()
                }
            }
            ModelKind::GmmMpc => {
                let mpcs = find_mpcs_fast(dag, node);
                if mpcs.cliques.is_empty() {
                    vec![BranchParams::new(Vec::new())]
                } else {
                    mpcs.cliques.into_iter().map(BranchParams::new).collect()
                }
            }
        };
        let k = branches.len();
        node_models.push(NodeModel {
            node,
            branches,
            pi: vec![1.0 / k as f64; k],
            link,
            kind,
        });
    }
    Ok(BnModel { dag: dag.clone(), node_models, normalization: None })
}

/// Negative log-likelihood of the whole network over all rows of `data`
/// (the loss with the simplex constraint handled analytically, so no
/// penalty term appears here).
pub fn total_loss(bn: &BnModel, data: &Dataset, epsilon: f64) -> Result<f64> {
    let cols = column_map(&bn.dag, data)?;
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    loss_on_rows(bn, data, &rows, &cols, epsilon)
}

/// Same sum restricted to a row subset, in the given deterministic order.
pub fn loss_on_rows(
    bn: &BnModel,
    data: &Dataset,
    rows: &[usize],
    cols: &[usize],
    epsilon: f64,
) -> Result<f64> {
    let mut loss = 0.0;
    for &j in rows {
        let row = data.row(j);
        for nm in &bn.node_models {
            loss -= nm.mixture_logpdf_row(row, cols, epsilon)?;
        }
    }
    Ok(loss)
}

// --- checkpoint serialization -------------------------------------------

#[derive(Serialize, Deserialize)]
struct BranchFile {
    inputs: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    variance: f64,
    pi: f64,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    node: String,
    kind: ModelKind,
    link: Link,
    branches: Vec<BranchFile>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
    normalization: Option<NormStats>,
    node_models: Vec<NodeFile>,
}

impl BnModel {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            nodes: self.dag.node_names().to_vec(),
            edges: self
                .dag
                .edges()
                .iter()
                .map(|&(p, c)| {
                    (self.dag.node_name(p).to_string(), self.dag.node_name(c).to_string())
                })
                .collect(),
            normalization: self.normalization.clone(),
            node_models: self
                .node_models
                .iter()
                .map(|nm| NodeFile {
                    node: self.dag.node_name(nm.node).to_string(),
                    kind: nm.kind,
                    link: nm.link,
                    branches: nm
                        .branches
                        .iter()
                        .zip(&nm.pi)
                        .map(|(b, &pi)| BranchFile {
                            inputs: b
                                .inputs
                                .iter()
                                .map(|&v| self.dag.node_name(v).to_string())
                                .collect(),
                            weights: b.weights.clone(),
                            bias: b.bias,
                            variance: b.variance(),
                            pi,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut edges = Vec::with_capacity(file.edges.len());
        let index: std::collections::HashMap<String, NodeId> = file
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Checkpoint(format!("unknown node {name:?}")))
        };
        for (p, c) in &file.edges {
            edges.push((lookup(p)?, lookup(c)?));
        }
        let dag = Dag::new(file.nodes, edges)?;
        let mut node_models = Vec::with_capacity(file.node_models.len());
        for nf in file.node_models {
            let node = lookup(&nf.node)?;
            let mut branches = Vec::with_capacity(nf.branches.len());
            let mut pi = Vec::with_capacity(nf.branches.len());
            for bf in nf.branches {
                let inputs: Vec<NodeId> =
                    bf.inputs.iter().map(|n| lookup(n)).collect::<Result<_>>()?;
                if bf.weights.len() != inputs.len() {
                    return Err(Error::Checkpoint(format!(
                        "branch weight count mismatch at node {:?}",
                        nf.node
                    )));
                }
                let mut b = BranchParams { inputs, weights: bf.weights, bias: bf.bias, log_var: 0.0 };
                b.set_variance(bf.variance);
                branches.push(b);
                pi.push(bf.pi);
            }
            node_models.push(NodeModel { node, branches, pi, link: nf.link, kind: nf.kind });
        }
        node_models.sort_by_key(|nm| nm.node);
        Ok(BnModel { dag, node_models, normalization: file.normalization })
    }
}
