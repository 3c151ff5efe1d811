//! One-vs-rest linear SVM and the repeated stratified cross-validation
//! harness.
//!
//! A degree-1 polynomial kernel gives an affine decision function, so each
//! class gets a primal weight vector. Every binary problem minimizes
//! `½‖w‖² + ½b² + C Σ max(0, 1 - yᵢ(w·xᵢ + b))` by dual coordinate descent
//! (the bias is an extra feature fixed at 1).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{pca_fit, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    /// Hinge-loss weight `C`.
    pub c_reg: f64,
    /// Epoch cap per binary problem.
    pub max_iter: usize,
    /// Stop when the projected-gradient spread falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            c_reg: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl TrainParams {
    fn validate(&self) -> Result<()> {
        if !(self.c_reg.is_finite() && self.c_reg > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "C must be positive, got {}",
                self.c_reg
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "solver tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: Vec<String>,
    /// One row of length `dim` per class.
    weights: Vec<f64>,
    biases: Vec<f64>,
    dim: usize,
    params: TrainParams,
}

impl LinearModel {
    pub fn from_parts(
        classes: Vec<String>,
        weights: Vec<f64>,
        biases: Vec<f64>,
        params: TrainParams,
    ) -> Result<Self> {
        let c = classes.len();
        if c == 0 || biases.len() != c || !weights.len().is_multiple_of(c) || weights.is_empty() {
            return Err(Error::InvalidInput(format!(
                "inconsistent linear model: {c} classes, {} weights, {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite model parameter".into()));
        }
        Ok(Self {
            dim: weights.len() / c,
            classes,
            weights,
            biases,
            params,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn class_weights(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    /// Per-class scores `w_c·x + b_c`.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| dot(self.class_weights(c), row) + self.biases[c])
            .collect()
    }

    /// Index of the highest score; the lowest index wins ties.
    pub fn predict_index(&self, row: &[f64]) -> usize {
        let scores = self.scores(row);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict_indices(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        Ok(x.iter_rows().map(|r| self.predict_index(r)).collect())
    }

    fn check_dim(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols() != self.dim {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual coordinate descent for one binary hinge-loss problem, `y ∈ {±1}`.
fn solve_binary(
    x: &FeatureMatrix,
    y: &[f64],
    params: &TrainParams,
    stream: u64,
) -> (Vec<f64>, f64) {
    let (n, d) = (x.rows(), x.cols());
    let diag: Vec<f64> = x.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let upper = params.c_reg;
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);

    for _ in 0..params.max_iter {
        order.shuffle(&mut rng);
        let (mut max_pg, mut min_pg) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let row = x.row(i);
            let g = y[i] * (dot(&w, row) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, upper);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    w.iter_mut().zip(row).for_each(|(wv, xv)| *wv += step * xv);
                    b += step;
                }
            }
        }
        if max_pg - min_pg < params.tol {
            break;
        }
    }
    (w, b)
}

fn class_list<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    labels
        .iter()
        .map(|l| l.as_ref().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Trains one-vs-rest classifiers; classes are ordered lexicographically.
pub fn train<S: AsRef<str> + Sync>(
    x: &FeatureMatrix,
    labels: &[S],
    params: &TrainParams,
) -> Result<LinearModel> {
    params.validate()?;
    if labels.len() != x.rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} samples",
            labels.len(),
            x.rows()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidInput(
            "training needs at least 2 samples".into(),
        ));
    }
    let classes = class_list(labels);
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(classes.len()));
    }
    let solved: Vec<(Vec<f64>, f64)> = classes
        .par_iter()
        .enumerate()
        .map(|(c, class)| {
            let y: Vec<f64> = labels
                .iter()
                .map(|l| if l.as_ref() == class { 1.0 } else { -1.0 })
                .collect();
            solve_binary(x, &y, params, c as u64)
        })
        .collect();
    let mut weights = Vec::with_capacity(classes.len() * x.cols());
    let mut biases = Vec::with_capacity(classes.len());
    for (w, b) in solved {
        weights.extend(w);
        biases.push(b);
    }
    LinearModel::from_parts(classes, weights, biases, *params)
}

pub fn predict(model: &LinearModel, x: &FeatureMatrix) -> Result<Vec<String>> {
    Ok(model
        .predict_indices(x)?
        .into_iter()
        .map(|c| model.classes[c].clone())
        .collect())
}

/// Fraction of rows whose prediction matches `labels`.
pub fn accuracy<S: AsRef<str>>(
    model: &LinearModel,
    x: &FeatureMatrix,
    labels: &[S],
) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} samples",
            labels.len(),
            x.rows()
        )));
    }
    let predicted = model.predict_indices(x)?;
    let hits = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, l)| model.classes[p] == l.as_ref())
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvParams {
    pub folds: usize,
    pub repeats: usize,
    pub pca_k: usize,
    pub train: TrainParams,
    /// Seeds the fold assignment.
    pub seed: u64,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            folds: 2,
            repeats: 10,
            pca_k: 30,
            train: TrainParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// `fold_accuracies[repeat][fold]`.
    pub fold_accuracies: Vec<Vec<f64>>,
    /// Mean over folds, one per repeat.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across repeats (0 for a single repeat).
    pub std_dev: f64,
    pub seed: u64,
}

impl CvReport {
    fn from_folds(fold_accuracies: Vec<Vec<f64>>, seed: u64) -> Self {
        let accuracies: Vec<f64> = fold_accuracies
            .iter()
            .map(|f| f.iter().sum::<f64>() / f.len() as f64)
            .collect();
        let r = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / r;
        let std_dev = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            fold_accuracies,
            accuracies,
            mean,
            std_dev,
            seed,
        }
    }

    /// `repeat,fold,accuracy` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,fold,accuracy\n");
        for (r, folds) in self.fold_accuracies.iter().enumerate() {
            for (f, a) in folds.iter().enumerate() {
                out.push_str(&format!("{r},{f},{a}\n"));
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "mean accuracy {:.4} ± {:.4} over {} repeats of {}-fold cross-validation (seed {})",
            self.mean,
            self.std_dev,
            self.accuracies.len(),
            self.fold_accuracies.first().map_or(0, Vec::len),
            self.seed
        )
    }
}

/// Stratified random split: each class is shuffled and dealt round-robin.
pub fn stratified_folds<S: AsRef<str>>(
    labels: &[S],
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let mut assignment = vec![Vec::new(); folds];
    let mut dealt = 0;
    for class in class_list(labels) {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_ref() == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < folds {
            return Err(Error::Stratification {
                label: class,
                count: members.len(),
                folds,
            });
        }
        members.shuffle(rng);
        for i in members {
            assignment[dealt % folds].push(i);
            dealt += 1;
        }
    }
    for fold in assignment.iter_mut() {
        fold.sort_unstable();
    }
    Ok(assignment)
}

/// Which samples the PCA basis is fitted on inside a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaScope {
    TrainingFold,
    /// Fits on train and test together. Leaks test information; exists to
    /// demonstrate the difference.
    AllSamples,
}

/// Fits PCA and the classifier on `train_idx`, scores on `test_idx`.
pub fn split_accuracy<S: AsRef<str> + Sync>(
    x: &FeatureMatrix,
    labels: &[S],
    train_idx: &[usize],
    test_idx: &[usize],
    pca_k: usize,
    params: &TrainParams,
    scope: PcaScope,
) -> Result<f64> {
    let train_x = x.select_rows(train_idx)?;
    let test_x = x.select_rows(test_idx)?;
    let pca = match scope {
        PcaScope::TrainingFold => pca_fit(&train_x, pca_k)?,
        PcaScope::AllSamples => {
            let all: Vec<usize> = train_idx.iter().chain(test_idx).copied().collect();
            pca_fit(&x.select_rows(&all)?, pca_k)?
        }
    };
    let train_labels: Vec<&str> = train_idx.iter().map(|&i| labels[i].as_ref()).collect();
    let test_labels: Vec<&str> = test_idx.iter().map(|&i| labels[i].as_ref()).collect();
    let model = train(&pca.transform(&train_x)?, &train_labels, params)?;
    accuracy(&model, &pca.transform(&test_x)?, &test_labels)
}

/// Repeated stratified k-fold cross-validation with PCA fitted inside each
/// training fold.
pub fn cross_validate<S: AsRef<str> + Sync>(
    x: &FeatureMatrix,
    labels: &[S],
    params: &CvParams,
) -> Result<CvReport> {
    if labels.len() != x.rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} samples",
            labels.len(),
            x.rows()
        )));
    }
    if params.repeats == 0 {
        return Err(Error::InvalidConfig("need at least one repeat".into()));
    }
    params.train.validate()?;
    // Fail on stratification before spawning work.
    stratified_folds(
        labels,
        params.folds,
        &mut ChaCha8Rng::seed_from_u64(params.seed),
    )?;

    let fold_accuracies = (0..params.repeats)
        .into_par_iter()
        .map(|repeat| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(repeat as u64);
            let folds = stratified_folds(labels, params.folds, &mut rng)?;
            (0..params.folds)
                .map(|held_out| {
                    let train_idx: Vec<usize> = folds
                        .iter()
                        .enumerate()
                        .filter(|(f, _)| *f != held_out)
                        .flat_map(|(_, idx)| idx.iter().copied())
                        .collect();
                    split_accuracy(
                        x,
                        labels,
                        &train_idx,
                        &folds[held_out],
                        params.pca_k,
                        &params.train,
                        PcaScope::TrainingFold,
                    )
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(fold_accuracies, params.seed))
}
