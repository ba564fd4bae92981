//! Cluster-and-regress refinement of predictor sets.
//!
//! Each training round assigns every sample to the mode that predicts it with
//! the least L2 error, then refits each mode by ridge regression on the
//! samples assigned to it. Modes that attract no samples are left untouched.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::designed::{PredictorMatrix, PredictorSet, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{PatchDataset, ReferenceVector, TargetBlock};

/// Columns evaluated per batched product during assignment.
const ASSIGN_CHUNK: usize = 256;

/// Fixed-point threshold on the max-norm change of all matrices.
const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Tikhonov weight on the raw `[0, 255]` pixel scale.
    pub lambda: f64,
    pub iterations: u32,
    pub record_trace: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            iterations: 100,
            record_trace: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidIterations);
        }
        Ok(())
    }
}

/// Best mode per dataset column, lowest index on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `‖y_i − M_{labels[i]} x_i‖₂`
    pub per_sample_error: Vec<f64>,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn total_squared_error(&self) -> f64 {
        self.per_sample_error.iter().map(|e| e * e).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Sum of squared prediction errors under the assignment of this round.
    pub total_squared_error: f64,
    pub cluster_sizes: Vec<usize>,
    /// Labels that differ from the previous round; every sample counts on the
    /// first round.
    pub reassignments: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<IterationRecord>,
    pub iterations_run: u32,
}

/// `‖y − Mx‖₂`
pub fn prediction_error(m: &PredictorMatrix, x: &ReferenceVector, y: &TargetBlock) -> Result<f64> {
    let (rows, cols) = m.matrix.shape();
    if x.len() != cols || y.len() != rows {
        return Err(Error::ShapeMismatch(format!(
            "{rows}x{cols} matrix against reference {} and block {}",
            x.len(),
            y.len()
        )));
    }
    let mut sq = 0.0;
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += m.matrix[(r, c)] * x.0[c];
        }
        let d = y.0[r] - acc;
        sq += d * d;
    }
    Ok(sq.sqrt())
}

fn stacked_matrix(set: &PredictorSet) -> DMatrix<f64> {
    let g = set.geometry();
    let n = g.block_len();
    let mut stacked = DMatrix::zeros(set.len() * n, g.ref_len());
    for (p, mode) in set.modes().iter().enumerate() {
        stacked.rows_mut(p * n, n).copy_from(&mode.matrix);
    }
    stacked
}

/// Labels every sample with the mode of least prediction error.
pub fn assign_clusters(dataset: &PatchDataset, set: &PredictorSet) -> Result<ClusterAssignment> {
    if dataset.geometry() != set.geometry() {
        return Err(Error::GeometryMismatch {
            dataset: dataset.geometry().block_size(),
            set: set.geometry().block_size(),
        });
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if set.is_empty() {
        return Err(Error::EmptyPredictorSet);
    }
    let stacked = stacked_matrix(set);
    let n = set.geometry().block_len();
    let k = set.len();
    let s = dataset.count();

    let chunks: Vec<(usize, usize)> = (0..s)
        .step_by(ASSIGN_CHUNK)
        .map(|start| (start, ASSIGN_CHUNK.min(s - start)))
        .collect();
    let results: Vec<Vec<(usize, f64)>> = chunks
        .par_iter()
        .map(|&(start, len)| {
            let x = dataset.x().columns(start, len);
            let y = dataset.y().columns(start, len);
            let pred = &stacked * x;
            (0..len)
                .map(|b| {
                    let yb = y.column(b);
                    let pb = pred.column(b);
                    let mut best = (0, f64::INFINITY);
                    for p in 0..k {
                        let mut sq = 0.0;
                        for r in 0..n {
                            let d = yb[r] - pb[p * n + r];
                            sq += d * d;
                        }
                        if sq < best.1 {
                            best = (p, sq);
                        }
                    }
                    (best.0, best.1.sqrt())
                })
                .collect()
        })
        .collect();

    let (labels, per_sample_error) = results.into_iter().flatten().unzip();
    Ok(ClusterAssignment {
        labels,
        per_sample_error,
    })
}

/// Lower Cholesky factor of `a`, in place. Fails on a pivot that is not
/// clearly positive relative to the largest diagonal entry.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<()> {
    let m = a.nrows();
    let scale = (0..m).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    for j in 0..m {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if d.is_nan() || d <= tol {
            return Err(Error::SingularSystem { column: j, pivot: d });
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in j + 1..m {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ z = b` for each column of `b`, in place.
fn cholesky_solve(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let m = l.nrows();
    for col in 0..b.ncols() {
        let mut z = b.column_mut(col);
        for i in 0..m {
            let mut v = z[i];
            for k in 0..i {
                v -= l[(i, k)] * z[k];
            }
            z[i] = v / l[(i, i)];
        }
        for i in (0..m).rev() {
            let mut v = z[i];
            for k in i + 1..m {
                v -= l[(k, i)] * z[k];
            }
            z[i] = v / l[(i, i)];
        }
    }
}

/// Ridge map `Y Xᵀ (X Xᵀ + λI)⁻¹` for references `x` (`m x S`) and targets
/// `y` (`n x S`), returned as an `n x m` matrix.
pub fn ridge_update(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "x has {} columns, y has {}",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut gram = x * x.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    // M G = Y Xᵀ with G symmetric, so G Mᵀ = X Yᵀ
    let mut rhs = x * y.transpose();
    cholesky_in_place(&mut gram)?;
    cholesky_solve(&gram, &mut rhs);
    Ok(rhs.transpose())
}

fn check_training_inputs(dataset: &PatchDataset, init: &PredictorSet, config: &TrainingConfig) -> Result<()> {
    config.validate()?;
    if dataset.geometry() != init.geometry() {
        return Err(Error::GeometryMismatch {
            dataset: dataset.geometry().block_size(),
            set: init.geometry().block_size(),
        });
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if init.is_empty() {
        return Err(Error::EmptyPredictorSet);
    }
    Ok(())
}

/// Refines `init` on `dataset`: `config.iterations` rounds of assignment
/// followed by per-cluster ridge updates. Stops early only at an exact fixed
/// point (no label changes and no matrix moved by more than 1e-12).
pub fn train(
    dataset: &PatchDataset,
    init: &PredictorSet,
    config: &TrainingConfig,
) -> Result<(PredictorSet, TrainingTrace)> {
    check_training_inputs(dataset, init, config)?;
    let k = init.len();
    let mut matrices: Vec<DMatrix<f64>> = init.modes().iter().map(|m| m.matrix.clone()).collect();
    let mut current = init.clone();
    let mut previous_labels: Option<Vec<usize>> = None;
    let mut trace = TrainingTrace::default();

    for _ in 0..config.iterations {
        let assignment = assign_clusters(dataset, &current)?;
        let reassignments = match &previous_labels {
            Some(prev) => prev
                .iter()
                .zip(&assignment.labels)
                .filter(|(a, b)| a != b)
                .count(),
            None => assignment.labels.len(),
        };

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in assignment.labels.iter().enumerate() {
            members[l].push(i);
        }
        let updated: Vec<Option<DMatrix<f64>>> = members
            .par_iter()
            .map(|cols| {
                if cols.is_empty() {
                    return Ok(None);
                }
                let xj = dataset.x().select_columns(cols.iter());
                let yj = dataset.y().select_columns(cols.iter());
                ridge_update(&xj, &yj, config.lambda).map(Some)
            })
            .collect::<Result<_>>()?;

        let mut max_change: f64 = 0.0;
        for (old, new) in matrices.iter_mut().zip(updated) {
            if let Some(new) = new {
                max_change = max_change.max((&new - &*old).amax());
                *old = new;
            }
        }

        if config.record_trace {
            trace.records.push(IterationRecord {
                total_squared_error: assignment.total_squared_error(),
                cluster_sizes: members.iter().map(Vec::len).collect(),
                reassignments,
            });
        }
        trace.iterations_run += 1;

        current = rebuild(init, &matrices, config, trace.iterations_run)?;
        if previous_labels.is_some() && reassignments == 0 && max_change < FIXED_POINT_TOL {
            break;
        }
        previous_labels = Some(assignment.labels);
    }

    Ok((current, trace))
}

fn rebuild(
    init: &PredictorSet,
    matrices: &[DMatrix<f64>],
    config: &TrainingConfig,
    iterations: u32,
) -> Result<PredictorSet> {
    let modes = init
        .modes()
        .iter()
        .zip(matrices)
        .map(|(mode, m)| PredictorMatrix::new(mode.label.clone(), m.clone()))
        .collect();
    PredictorSet::new(
        init.geometry(),
        modes,
        Provenance::RipTrained,
        config.lambda,
        iterations,
    )
}
