//! CSV ingestion, z-normalization, k-fold splitting and mini-batch index
//! generation. A [`Dataset`] is immutable after load; batch index order is a
//! pure function of (seed, pass index).

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-column normalization statistics (population standard deviation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub columns: Vec<String>,
    /// Row-major N x n matrix.
    values: Vec<f64>,
    n_rows: usize,
    pub norm_stats: Option<NormStats>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, values: Vec<f64>) -> Self {
        let n_cols = columns.len();
        assert!(n_cols > 0 && values.len().is_multiple_of(n_cols));
        let n_rows = values.len() / n_cols;
        Dataset { columns, values, n_rows, norm_stats: None }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.columns.len();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Copy the given rows into a new dataset, keeping the normalization
    /// statistics (if any).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let n = self.columns.len();
        let mut values = Vec::with_capacity(rows.len() * n);
        for &j in rows {
            values.extend_from_slice(self.row(j));
        }
        Dataset {
            columns: self.columns.clone(),
            values,
            n_rows: rows.len(),
            norm_stats: self.norm_stats.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for j in 0..self.n_rows {
            let row: Vec<String> = self.row(j).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parse a headered, comma-separated, all-numeric CSV.
pub fn load_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Csv("file is empty".to_string()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let n_cols = columns.len();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::RaggedRow { row: lineno + 1, expected: n_cols, found: fields.len() });
        }
        for (i, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::NonNumericCell {
                row: lineno + 1,
                cell: field.trim().to_string(),
                column: columns[i].clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: lineno + 1,
                    cell: field.trim().to_string(),
                    column: columns[i].clone(),
                });
            }
            values.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { columns, values, n_rows, norm_stats: None })
}

/// Compute per-column mean and population stddev on `train` and return the
/// standardized copy with the statistics attached.
pub fn zscore_fit_transform(train: &Dataset) -> Result<Dataset> {
    if train.n_rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = train.n_cols();
    let mut means = vec![0.0; n];
    let mut stddevs = vec![0.0; n];
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..train.n_rows {
            sum += train.row(j)[i];
        }
        let mean = sum / train.n_rows as f64;
        let mut ss = 0.0;
        for j in 0..train.n_rows {
            let d = train.row(j)[i] - mean;
            ss += d * d;
        }
        let sd = (ss / train.n_rows as f64).sqrt();
        if sd <= 1e-12 {
            return Err(Error::ZeroVariance(train.columns[i].clone()));
        }
        means[i] = mean;
        stddevs[i] = sd;
    }
    let stats = NormStats { means, stddevs };
    Ok(zscore_apply(&stats, train))
}

/// Standardize `other` with statistics fitted elsewhere (the train fold).
pub fn zscore_apply(stats: &NormStats, other: &Dataset) -> Dataset {
    let n = other.n_cols();
    let mut values = Vec::with_capacity(other.values.len());
    for j in 0..other.n_rows {
        for (i, &v) in other.row(j).iter().enumerate().take(n) {
            values.push((v - stats.means[i]) / stats.stddevs[i]);
        }
    }
    Dataset {
        columns: other.columns.clone(),
        values,
        n_rows: other.n_rows,
        norm_stats: Some(stats.clone()),
    }
}

/// Undo standardization; inverse of [`zscore_apply`].
pub fn zscore_invert(stats: &NormStats, data: &Dataset) -> Dataset {
    let n = data.n_cols();
    let mut values = Vec::with_capacity(data.values.len());
    for j in 0..data.n_rows {
        for (i, &v) in data.row(j).iter().enumerate().take(n) {
            values.push(v * stats.stddevs[i] + stats.means[i]);
        }
    }
    Dataset { columns: data.columns.clone(), values, n_rows: data.n_rows, norm_stats: None }
}

/// Seeded k-fold split. The permuted rows are partitioned into k folds; the
/// first `n mod k` folds take the extra row. Returns (train, test) row-index
/// pairs per fold.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || n_rows < k {
        return Err(Error::InvalidFolds { k, n: n_rows });
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test: Vec<usize> = perm[start..start + size].to_vec();
        let train: Vec<usize> =
            perm[..start].iter().chain(perm[start + size..].iter()).copied().collect();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

/// Mini-batch row-index slices for one pass: a shuffle keyed by
/// (seed, pass_index), chunked; the last batch may be short.
pub fn minibatches(n_rows: usize, batch_size: usize, seed: u64, pass_index: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1);
    let mut perm: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ pass_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    perm.shuffle(&mut rng);
    perm.chunks(batch_size).map(|c| c.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_small_csv() {
        let data = load_csv("a,b\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(data.n_rows(), 3);
        assert_eq!(data.n_cols(), 2);
        assert_eq!(data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn load_header_only_is_empty() {
        assert!(matches!(load_csv("a,b\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn load_rejects_bad_rows() {
        assert!(matches!(load_csv("a,b\n1,2\n3\n"), Err(Error::RaggedRow { row: 3, .. })));
        assert!(matches!(
            load_csv("a,b\n1,x\n"),
            Err(Error::NonNumericCell { row: 2, .. })
        ));
    }

    #[test]
    fn zscore_population_stddev() {
        let data = Dataset::new(vec!["c".into()], vec![1.0, 2.0, 3.0]);
        let z = zscore_fit_transform(&data).unwrap();
        // sd = sqrt(2/3)
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z.row(0)[0] + expect).abs() < 1e-10);
        assert!(z.row(1)[0].abs() < 1e-10);
        assert!((z.row(2)[0] - expect).abs() < 1e-10);
    }

    #[test]
    fn zscore_idempotent_on_standardized() {
        let data = Dataset::new(vec!["c".into()], vec![-1.0, 0.0, 1.0]);
        let z1 = zscore_fit_transform(&data).unwrap();
        let z2 = zscore_fit_transform(&z1).unwrap();
        for j in 0..3 {
            assert!((z1.row(j)[0] - z2.row(j)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn zscore_rejects_constant_column() {
        let data = Dataset::new(vec!["c".into()], vec![2.0, 2.0, 2.0]);
        assert!(matches!(zscore_fit_transform(&data), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn zscore_round_trip() {
        let data = Dataset::new(vec!["c".into(), "d".into()], vec![1.0, 10.0, 2.0, 30.0, 3.0, 50.0]);
        let z = zscore_fit_transform(&data).unwrap();
        let stats = z.norm_stats.clone().unwrap();
        let back = zscore_invert(&stats, &z);
        for j in 0..3 {
            for i in 0..2 {
                assert!((back.row(j)[i] - data.row(j)[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kfold_exact_divisibility() {
        let folds = kfold_split(10, 5, 7).unwrap();
        let mut seen = [false; 10];
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 8);
            for &r in test {
                assert!(!seen[r]);
                seen[r] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn kfold_remainder_distribution() {
        let folds = kfold_split(7, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn kfold_deterministic() {
        assert_eq!(kfold_split(20, 4, 99).unwrap(), kfold_split(20, 4, 99).unwrap());
        assert!(kfold_split(3, 5, 0).is_err());
    }

    #[test]
    fn minibatch_coverage() {
        let batches = minibatches(5, 2, 3, 0);
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let mut all: Vec<usize> = batches.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn minibatch_whole_dataset_when_large() {
        let batches = minibatches(4, 10, 0, 0);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 4);
    }

    #[test]
    fn minibatch_deterministic_per_pass() {
        assert_eq!(minibatches(100, 7, 5, 2), minibatches(100, 7, 5, 2));
        assert_ne!(minibatches(100, 7, 5, 2), minibatches(100, 7, 5, 3));
    }
}
