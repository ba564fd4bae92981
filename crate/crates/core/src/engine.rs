//! Runtime prediction and the two evaluation protocols.
//!
//! Every product here goes through [`dot`], so a mode evaluated alone and the
//! same mode evaluated as a slice of a [`StackedPredictor`] give bit-identical
//! results.

use std::fmt;

use rayon::prelude::*;

use crate::designed::{PredictorMatrix, PredictorSet, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{
    extract_block, extract_reference, AvailabilityMask, BlockGeometry, Plane, ReferenceVector, TargetBlock,
};

const PEAK: f64 = 255.0;

/// Fixed-order dot product with four partial sums.
#[inline]
fn dot(weights: impl Iterator<Item = f64>, x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    for (k, (w, v)) in weights.zip(x).enumerate() {
        acc[k & 3] += w * v;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn check_shapes(rows: usize, cols: usize, x: &ReferenceVector) -> Result<()> {
    if x.len() != cols {
        return Err(Error::ShapeMismatch(format!(
            "{rows}x{cols} predictor applied to a reference vector of length {}",
            x.len()
        )));
    }
    Ok(())
}

/// `ŷ = M x`, unclamped.
pub fn predict(m: &PredictorMatrix, x: &ReferenceVector) -> Result<TargetBlock> {
    let (rows, cols) = m.matrix.shape();
    check_shapes(rows, cols, x)?;
    let estimate = (0..rows)
        .map(|r| dot(m.matrix.row(r).iter().copied(), x.as_slice()))
        .collect();
    Ok(TargetBlock(estimate))
}

/// All modes of a set concatenated vertically, stored row-major so that one
/// pass over the weights yields every mode's estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPredictor {
    geometry: BlockGeometry,
    k: usize,
    weights: Vec<f64>,
}

impl StackedPredictor {
    #[inline]
    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// `(k N², 3N + 1)`
    pub fn shape(&self) -> (usize, usize) {
        (self.k * self.geometry.block_len(), self.geometry.ref_len())
    }

    /// Row `r` of the stacked matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        let m = self.geometry.ref_len();
        &self.weights[r * m..(r + 1) * m]
    }

    /// Multiply-accumulates per [`predict_all`] call: `k · N² · (3N + 1)`.
    pub fn multiply_accumulates(&self) -> usize {
        self.weights.len()
    }

    /// Mode choice through a single stacked product.
    pub fn select_mode(&self, x: &ReferenceVector, y: &TargetBlock) -> Result<ModeChoice> {
        let estimates = predict_all(self, x)?;
        choose(estimates.into_iter(), y)
    }
}

pub fn stack(set: &PredictorSet) -> Result<StackedPredictor> {
    if set.is_empty() {
        return Err(Error::EmptyPredictorSet);
    }
    let g = set.geometry();
    let mut weights = Vec::with_capacity(set.len() * g.block_len() * g.ref_len());
    for mode in set.modes() {
        for r in 0..mode.matrix.nrows() {
            weights.extend(mode.matrix.row(r).iter().copied());
        }
    }
    Ok(StackedPredictor {
        geometry: g,
        k: set.len(),
        weights,
    })
}

/// One stacked product sliced into `k` estimates.
pub fn predict_all(stacked: &StackedPredictor, x: &ReferenceVector) -> Result<Vec<TargetBlock>> {
    let (rows, cols) = stacked.shape();
    check_shapes(rows, cols, x)?;
    let n = stacked.geometry.block_len();
    let all: Vec<f64> = stacked
        .weights
        .chunks_exact(cols)
        .map(|row| dot(row.iter().copied(), x.as_slice()))
        .collect();
    Ok(all.chunks_exact(n).map(|c| TargetBlock(c.to_vec())).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeChoice {
    pub mode: usize,
    pub estimate: TargetBlock,
    /// `‖y − ŷ‖₂`
    pub error: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn choose(estimates: impl Iterator<Item = TargetBlock>, y: &TargetBlock) -> Result<ModeChoice> {
    let mut best: Option<(usize, TargetBlock, f64)> = None;
    for (p, est) in estimates.enumerate() {
        if est.len() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "estimate of length {} against block of length {}",
                est.len(),
                y.len()
            )));
        }
        let sq = squared_distance(y.as_slice(), est.as_slice());
        if best.as_ref().is_none_or(|b| sq < b.2) {
            best = Some((p, est, sq));
        }
    }
    let (mode, estimate, sq) = best.ok_or(Error::EmptyPredictorSet)?;
    Ok(ModeChoice {
        mode,
        estimate,
        error: sq.sqrt(),
    })
}

/// Mode of least L2 error against the true block, lowest index on ties.
pub fn select_mode(set: &PredictorSet, x: &ReferenceVector, y: &TargetBlock) -> Result<ModeChoice> {
    let estimates = set
        .modes()
        .iter()
        .map(|m| predict(m, x))
        .collect::<Result<Vec<_>>>()?;
    choose(estimates.into_iter(), y)
}

/// PSNR against an 8-bit peak. Zero error is kept apart from any finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Self {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (PEAK * PEAK / mse).log10())
        }
    }

    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4} dB"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(squared_distance(a, b) / a.len() as f64)
}

pub fn psnr(a: &[f64], b: &[f64]) -> Result<Psnr> {
    mse(a, b).map(Psnr::from_mse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// References always come from the original image.
    Best,
    /// References come from the evolving reconstruction, no residuals.
    Worst,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Best => "best",
            Protocol::Worst => "worst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRecord {
    pub row: usize,
    pub col: usize,
    pub mode: usize,
    /// Squared L2 error of the chosen estimate against the original block.
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub image_id: String,
    pub geometry: BlockGeometry,
    pub protocol: Protocol,
    pub provenance: Provenance,
    pub mode_histogram: Vec<usize>,
    pub blocks: Vec<BlockRecord>,
    pub mse: f64,
    pub psnr: Psnr,
}

fn histogram(blocks: &[BlockRecord], k: usize) -> Vec<usize> {
    let mut h = vec![0; k];
    for b in blocks {
        h[b.mode] += 1;
    }
    h
}

/// Predicts every full block on the `N`-grid from original-image references.
pub fn best_case_evaluate(plane: &Plane, set: &PredictorSet) -> Result<EvaluationReport> {
    best_case_predict(plane, set).map(|(_, report)| report)
}

/// [`best_case_evaluate`] that also returns the plane of chosen estimates.
/// Pixels outside the block grid are left at zero.
pub fn best_case_predict(plane: &Plane, set: &PredictorSet) -> Result<(Plane, EvaluationReport)> {
    let g = set.geometry();
    let n = g.block_size();
    let (rows, cols) = (plane.height() / n, plane.width() / n);
    if rows == 0 || cols == 0 {
        return Err(Error::ImageTooSmall {
            width: plane.width(),
            height: plane.height(),
            block_size: n,
        });
    }
    let stacked = stack(set)?;
    let positions: Vec<(usize, usize)> = (0..rows)
        .flat_map(|a| (0..cols).map(move |b| (a * n, b * n)))
        .collect();
    let choices = positions
        .par_iter()
        .map(|&(r, c)| {
            let x = extract_reference(plane, r, c, g, None)?;
            let y = extract_block(plane, r, c, g)?;
            stacked.select_mode(&x, &y)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut prediction = Plane::filled(plane.width(), plane.height(), 0.0);
    let mut blocks = Vec::with_capacity(positions.len());
    let mut total = 0.0;
    for (&(r, c), choice) in positions.iter().zip(choices) {
        write_block(&mut prediction, r, c, n, &choice.estimate);
        let sq = choice.error * choice.error;
        total += sq;
        blocks.push(BlockRecord {
            row: r,
            col: c,
            mode: choice.mode,
            squared_error: sq,
        });
    }
    let mse = total / (blocks.len() * g.block_len()) as f64;
    let report = EvaluationReport {
        image_id: String::new(),
        geometry: g,
        protocol: Protocol::Best,
        provenance: set.provenance(),
        mode_histogram: histogram(&blocks, set.len()),
        blocks,
        mse,
        psnr: Psnr::from_mse(mse),
    };
    Ok((prediction, report))
}

fn write_block(plane: &mut Plane, r: usize, c: usize, n: usize, block: &TargetBlock) {
    for j in 0..n {
        for i in 0..n {
            plane.set(r + j, c + i, block.0[j * n + i]);
        }
    }
}

/// Raster-order reconstruction with no residuals: the top-left block is
/// copied, every other block is the best prediction (chosen against the
/// original) from already reconstructed references.
///
/// The returned plane keeps real values; the report scores its write-out
/// quantization against the original.
pub fn worst_case_reconstruct(plane: &Plane, set: &PredictorSet) -> Result<(Plane, EvaluationReport)> {
    let g = set.geometry();
    let n = g.block_size();
    let (w, h) = (plane.width(), plane.height());
    if w % n != 0 || h % n != 0 || w == 0 || h == 0 {
        return Err(Error::DimensionNotMultiple {
            width: w,
            height: h,
            block_size: n,
        });
    }
    let stacked = stack(set)?;
    // undecoded samples are NaN so any non-causal read would poison the output
    let mut recon = Plane::filled(w, h, f64::NAN);
    let mut mask = AvailabilityMask::new(w, h);
    let mut blocks = Vec::with_capacity((w / n) * (h / n));

    for r in (0..h).step_by(n) {
        for c in (0..w).step_by(n) {
            let y = extract_block(plane, r, c, g)?;
            if r == 0 && c == 0 {
                write_block(&mut recon, 0, 0, n, &y);
            } else {
                let x = extract_reference(&recon, r, c, g, Some(&mask))?;
                let choice = stacked.select_mode(&x, &y)?;
                write_block(&mut recon, r, c, n, &choice.estimate);
                blocks.push(BlockRecord {
                    row: r,
                    col: c,
                    mode: choice.mode,
                    squared_error: choice.error * choice.error,
                });
            }
            mask.mark_block(r, c, n);
        }
    }

    let written = recon.quantized();
    let mse = mse(written.data(), plane.data())?;
    let report = EvaluationReport {
        image_id: String::new(),
        geometry: g,
        protocol: Protocol::Worst,
        provenance: set.provenance(),
        mode_histogram: histogram(&blocks, set.len()),
        blocks,
        mse,
        psnr: Psnr::from_mse(mse),
    };
    Ok((recon, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designed::{build_angular_matrix, build_dc_matrix, build_uniform_angular_set, DcStyle};
    use nalgebra::DMatrix;

    fn geom(n: usize) -> BlockGeometry {
        BlockGeometry::new(n).unwrap()
    }

    #[test]
    fn vertical_copy() {
        let g = geom(8);
        let m = build_angular_matrix(g, 90.0).unwrap();
        let mut x = vec![0.0; 25];
        for i in 0..8 {
            x[1 + i] = 10.0 + i as f64;
        }
        let y = predict(&m, &ReferenceVector(x)).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                assert_eq!(y.0[j * 8 + i], 10.0 + i as f64);
            }
        }
        let dc = build_dc_matrix(g, DcStyle::FullAverage);
        let y = predict(&dc, &ReferenceVector(vec![42.0; 25])).unwrap();
        assert!(y.0.iter().all(|&v| (v - 42.0).abs() < 1e-12));
        assert!(predict(&dc, &ReferenceVector(vec![1.0; 3])).is_err());
    }

    #[test]
    fn stacked_shape_and_cost() {
        let set = build_uniform_angular_set(geom(8), 5).unwrap();
        let s = stack(&set).unwrap();
        assert_eq!(s.shape(), (320, 25));
        assert_eq!(s.k(), 5);
        for p in 0..5 {
            for r in 0..64 {
                let want: Vec<f64> = set.modes()[p].matrix.row(r).iter().copied().collect();
                assert_eq!(s.row(p * 64 + r), want.as_slice());
            }
        }
        let zeros = predict_all(&s, &ReferenceVector(vec![0.0; 25])).unwrap();
        assert!(zeros.iter().all(|b| b.0.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let g = geom(4);
        let m = build_angular_matrix(g, 90.0).unwrap();
        let set = PredictorSet::new(g, vec![m.clone(), m], Provenance::RipTrained, 0.0, 0).unwrap();
        let x = ReferenceVector((0..13).map(f64::from).collect());
        let y = TargetBlock(vec![3.0; 16]);
        assert_eq!(select_mode(&set, &x, &y).unwrap().mode, 0);
        assert_eq!(stack(&set).unwrap().select_mode(&x, &y).unwrap().mode, 0);
    }

    #[test]
    fn exact_mode_is_found() {
        let g = geom(4);
        let set = build_uniform_angular_set(g, 5).unwrap();
        let x = ReferenceVector((0..13).map(|v| (v * v) as f64).collect());
        let y = predict(&set.modes()[3], &x).unwrap();
        let choice = select_mode(&set, &x, &y).unwrap();
        assert_eq!(choice.mode, 3);
        assert_eq!(choice.error, 0.0);
    }

    #[test]
    fn psnr_values() {
        let a = vec![10.0; 16];
        assert_eq!(psnr(&a, &a).unwrap(), Psnr::Infinite);
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!((psnr(&a, &b).unwrap().db() - 48.1308).abs() < 1e-3);
        let c = vec![0.0; 4];
        let d = vec![255.0; 4];
        assert!(psnr(&c, &d).unwrap().db().abs() < 1e-12);
        assert!(matches!(psnr(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(psnr(&c, &a), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn best_case_single_block_uses_mid_gray() {
        let g = geom(4);
        let plane = Plane::from_fn(4, 4, |r, c| (r * 4 + c) as f64 * 10.0);
        let m = PredictorMatrix::new("ramp", DMatrix::from_fn(16, 13, |r, c| (r + c) as f64 / 100.0));
        let set = PredictorSet::new(g, vec![m.clone()], Provenance::RipTrained, 0.0, 0).unwrap();
        let report = best_case_evaluate(&plane, &set).unwrap();
        let est = predict(&m, &ReferenceVector(vec![128.0; 13])).unwrap();
        let want = mse(&est.0, plane.data()).unwrap();
        assert!((report.mse - want).abs() < 1e-9 * want);
        assert_eq!(report.blocks.len(), 1);
    }

    #[test]
    fn best_case_rejects_tiny_images() {
        let set = build_uniform_angular_set(geom(8), 5).unwrap();
        assert!(matches!(
            best_case_evaluate(&Plane::filled(7, 20, 1.0), &set),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn worst_case_requires_multiples() {
        let set = build_uniform_angular_set(geom(8), 5).unwrap();
        assert!(matches!(
            worst_case_reconstruct(&Plane::filled(20, 16, 1.0), &set),
            Err(Error::DimensionNotMultiple { .. })
        ));
    }

    #[test]
    fn worst_case_constant_image_is_exact() {
        let set = build_uniform_angular_set(geom(8), 9).unwrap();
        let plane = Plane::filled(32, 24, 77.0);
        let (recon, report) = worst_case_reconstruct(&plane, &set).unwrap();
        assert!(report.psnr.is_infinite());
        assert!(recon.data().iter().all(|&v| (v - 77.0).abs() < 1e-9));
        assert_eq!(report.blocks.len(), 4 * 3 - 1);
    }
}
