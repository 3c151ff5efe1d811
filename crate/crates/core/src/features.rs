//! PCA compression of scattering features.
//!
//! The top-k subspace comes from a symmetric eigendecomposition of whichever
//! is smaller: the `d × d` covariance or the `n × n` Gram matrix of the
//! centered samples. With `d ≈ 90 000` features and a few thousand images the
//! Gram route is the one that runs in practice.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major sample matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} values do not fill {rows}x{cols}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidInput(format!(
                    "row {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }
}

/// Mean, orthonormal principal directions (rows) and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    components: Vec<f64>,
    explained: Vec<f64>,
}

impl PcaModel {
    /// Reassembles a model, e.g. after deserialization.
    pub fn from_parts(mean: Vec<f64>, components: Vec<f64>, explained: Vec<f64>) -> Result<Self> {
        let (d, k) = (mean.len(), explained.len());
        if d == 0 || k == 0 || components.len() != k * d {
            return Err(Error::InvalidInput(format!(
                "inconsistent PCA parts: mean {d}, components {}, explained {k}",
                components.len()
            )));
        }
        if mean
            .iter()
            .chain(&components)
            .chain(&explained)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("non-finite PCA parameter".into()));
        }
        Ok(Self {
            mean,
            components,
            explained,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.explained.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `k × d`, row-major.
    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.components[i * d..(i + 1) * d]
    }

    pub fn explained(&self) -> &[f64] {
        &self.explained
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_components())
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((c, x), m)| c * (x - m))
                    .sum()
            })
            .collect()
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "PCA model expects {} features, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|i| self.transform_row(x.row(i)))
            .collect();
        FeatureMatrix::new(x.rows(), self.n_components(), rows.concat())
    }

    /// Maps PCA coordinates back to feature space: `mean + y · components`.
    pub fn inverse_transform(&self, y: &FeatureMatrix) -> Result<FeatureMatrix> {
        if y.cols() != self.n_components() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                self.n_components(),
                y.cols()
            )));
        }
        let mut values = Vec::with_capacity(y.rows() * self.dim());
        for coords in y.iter_rows() {
            let mut row = self.mean.clone();
            for (i, &a) in coords.iter().enumerate() {
                for (r, c) in row.iter_mut().zip(self.component(i)) {
                    *r += a * c;
                }
            }
            values.extend(row);
        }
        FeatureMatrix::new(y.rows(), self.dim(), values)
    }
}

fn column_means(x: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenpairs sorted by non-increasing eigenvalue; ties keep solver order.
fn sorted_eigen(matrix: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(matrix);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Largest-magnitude entry positive; the lowest index wins ties.
fn fix_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fits the top-`k` principal subspace. Variances use the `n - 1`
/// normalization.
pub fn pca_fit(x: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    let max = (n - 1).min(d);
    if k == 0 || k > max {
        return Err(Error::InvalidComponentCount { k, max });
    }
    let mean = column_means(x);
    let centered_row =
        |i: usize| -> Vec<f64> { x.row(i).iter().zip(&mean).map(|(v, m)| v - m).collect() };

    // (variance numerator λ, direction or None when λ is numerically zero)
    let mut candidates: Vec<(f64, Option<Vec<f64>>)> = Vec::with_capacity(k);
    if d <= n {
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let c = centered_row(i);
            for a in 0..d {
                for b in a..d {
                    cov[(a, b)] += c[a] * c[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }
        for (lambda, v) in sorted_eigen(cov).into_iter().take(k) {
            candidates.push((lambda, Some(v)));
        }
    } else {
        let offsets: Vec<f64> = (0..n).map(|i| dot(&centered_row(i), &mean)).collect();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ci = centered_row(i);
                (i..n).map(|j| dot(&ci, x.row(j)) - offsets[i]).collect()
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for (i, row) in upper.iter().enumerate() {
            for (off, &g) in row.iter().enumerate() {
                gram[(i, i + off)] = g;
                gram[(i + off, i)] = g;
            }
        }
        let pairs = sorted_eigen(gram);
        let top = pairs.first().map_or(0.0, |p| p.0).max(0.0);
        let threshold = top * (n as f64) * f64::EPSILON * 16.0;
        let mapped: Vec<(f64, Option<Vec<f64>>)> = pairs
            .into_par_iter()
            .take(k)
            .map(|(lambda, u)| {
                if lambda <= threshold || lambda <= 0.0 {
                    return (lambda, None);
                }
                // X_cᵀ u / sqrt(λ)
                let weight_sum: f64 = u.iter().sum();
                let mut v = vec![0.0; d];
                for (r, &ur) in u.iter().enumerate() {
                    v.iter_mut()
                        .zip(x.row(r))
                        .for_each(|(acc, xv)| *acc += ur * xv);
                }
                let scale = lambda.sqrt();
                v.iter_mut()
                    .zip(&mean)
                    .for_each(|(acc, m)| *acc = (*acc - weight_sum * m) / scale);
                (lambda, Some(v))
            })
            .collect();
        candidates.extend(mapped);
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    let mut pending = Vec::new();
    for (slot, (lambda, v)) in candidates.into_iter().enumerate() {
        explained.push(lambda.max(0.0) / (n - 1) as f64);
        match v {
            Some(mut v) => {
                orthogonalize(&mut v, &basis);
                if normalize(&mut v) > 1e-6 {
                    basis.push(v);
                    continue;
                }
                pending.push(slot);
                basis.push(Vec::new());
            }
            None => {
                pending.push(slot);
                basis.push(Vec::new());
            }
        }
    }
    // Null directions: complete the basis with orthogonalized unit vectors.
    let mut next_axis = 0;
    for slot in pending {
        let filled: Vec<Vec<f64>> = basis.iter().filter(|b| !b.is_empty()).cloned().collect();
        loop {
            let mut e = vec![0.0; d];
            e[next_axis] = 1.0;
            next_axis += 1;
            orthogonalize(&mut e, &filled);
            if normalize(&mut e) * (d as f64).sqrt() >= std::f64::consts::FRAC_1_SQRT_2 {
                basis[slot] = e;
                break;
            }
        }
    }
    for v in basis.iter_mut() {
        fix_sign(v);
    }
    PcaModel::from_parts(mean, basis.concat(), explained)
}

pub fn pca_transform(model: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    model.transform(x)
}
