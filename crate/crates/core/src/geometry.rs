//! Block and reference-sample layout, pixel gathering, and training patch
//! sampling.
//!
//! A block of size `N` at top-left pixel `(r, c)` is predicted from `3N + 1`
//! reference samples, laid out as:
//!
//! | index           | pixel                         |
//! |-----------------|-------------------------------|
//! | `0`             | corner `(r-1, c-1)`           |
//! | `1 ..= N`       | top row `(r-1, c ..c+N)`      |
//! | `N+1 ..= 2N`    | top-right `(r-1, c+N..c+2N)`  |
//! | `2N+1 ..= 3N`   | left column `(r..r+N, c-1)`   |

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Value used for every reference sample when none is available.
pub const MID_GRAY: f64 = 128.0;

/// Number of reference samples feeding an `N x N` block.
pub fn reference_length(block_size: usize) -> Result<usize> {
    if block_size < 1 {
        return Err(Error::InvalidBlockSize(block_size));
    }
    Ok(3 * block_size + 1)
}

/// Square block geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockGeometry {
    block_size: usize,
}

impl BlockGeometry {
    pub fn new(block_size: usize) -> Result<Self> {
        reference_length(block_size)?;
        Ok(Self { block_size })
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// `3N + 1`, the number of reference samples.
    #[inline]
    pub fn ref_len(&self) -> usize {
        3 * self.block_size + 1
    }

    /// `N^2`, the number of predicted pixels.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.block_size * self.block_size
    }

    #[inline]
    pub fn top_index(&self, col: usize) -> usize {
        1 + col
    }

    #[inline]
    pub fn left_index(&self, row: usize) -> usize {
        2 * self.block_size + 1 + row
    }

    /// Image coordinate of reference sample `index` for a block at `(r, c)`,
    /// as signed values since the sample may lie outside the image.
    pub fn reference_position(&self, r: usize, c: usize, index: usize) -> (isize, isize) {
        let n = self.block_size;
        let (r, c) = (r as isize, c as isize);
        if index == 0 {
            (r - 1, c - 1)
        } else if index <= 2 * n {
            (r - 1, c + index as isize - 1)
        } else {
            (r + (index - 2 * n - 1) as isize, c - 1)
        }
    }
}

/// A single-channel image holding real-valued samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} plane needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Rounds half-up and clamps every sample to `[0, 255]`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    /// The plane after write-out quantization, still held as reals.
    pub fn quantized(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(quantize(v))).collect(),
        }
    }

    fn check_block(&self, r: usize, c: usize, n: usize) -> Result<()> {
        if r + n > self.height || c + n > self.width {
            return Err(Error::BlockOutOfBounds {
                row: r,
                col: c,
                size: n,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Round half-up and clamp to the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Per-pixel availability used while reconstructing an image block by block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityMask {
    width: usize,
    height: usize,
    available: Vec<bool>,
}

impl AvailabilityMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            available: vec![false; width * height],
        }
    }

    #[inline]
    pub fn is_available(&self, row: usize, col: usize) -> bool {
        self.available[row * self.width + col]
    }

    pub fn mark_block(&mut self, r: usize, c: usize, n: usize) {
        for row in r..(r + n).min(self.height) {
            let start = row * self.width + c;
            let end = row * self.width + (c + n).min(self.width);
            self.available[start..end].fill(true);
        }
    }
}

/// The `3N + 1` reference samples of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceVector(pub Vec<f64>);

impl ReferenceVector {
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `N^2` pixels of a block, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBlock(pub Vec<f64>);

impl TargetBlock {
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Gathers the reference samples of the block at `(r, c)`.
///
/// Samples outside the image, or not marked in `mask`, are unavailable.
/// Unavailable samples copy the nearest preceding available sample in layout
/// order; a leading run of unavailable samples copies the first available
/// one. With nothing available every entry is [`MID_GRAY`].
pub fn extract_reference(
    plane: &Plane,
    r: usize,
    c: usize,
    geometry: BlockGeometry,
    mask: Option<&AvailabilityMask>,
) -> Result<ReferenceVector> {
    plane.check_block(r, c, geometry.block_size())?;
    let len = geometry.ref_len();
    let mut values: Vec<Option<f64>> = Vec::with_capacity(len);
    for index in 0..len {
        let (row, col) = geometry.reference_position(r, c, index);
        let inside =
            row >= 0 && col >= 0 && (row as usize) < plane.height() && (col as usize) < plane.width();
        let sample = if inside {
            let (row, col) = (row as usize, col as usize);
            match mask {
                Some(m) if !m.is_available(row, col) => None,
                _ => Some(plane.get(row, col)),
            }
        } else {
            None
        };
        values.push(sample);
    }

    let Some(first) = values.iter().flatten().next().copied() else {
        return Ok(ReferenceVector(vec![MID_GRAY; len]));
    };
    let mut last = first;
    let filled = values
        .into_iter()
        .map(|v| {
            if let Some(v) = v {
                last = v;
            }
            last
        })
        .collect();
    Ok(ReferenceVector(filled))
}

/// Row-major copy of the `N x N` block at `(r, c)`.
pub fn extract_block(plane: &Plane, r: usize, c: usize, geometry: BlockGeometry) -> Result<TargetBlock> {
    let n = geometry.block_size();
    plane.check_block(r, c, n)?;
    let mut values = Vec::with_capacity(geometry.block_len());
    for row in r..r + n {
        let start = row * plane.width() + c;
        values.extend_from_slice(&plane.data()[start..start + n]);
    }
    Ok(TargetBlock(values))
}

/// Where a training column came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SourceId {
    pub image: u32,
    pub row: u32,
    pub col: u32,
}

/// Paired reference vectors (columns of `x`) and target blocks (columns of
/// `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    geometry: BlockGeometry,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    sources: Vec<SourceId>,
}

impl PatchDataset {
    pub fn new(
        geometry: BlockGeometry,
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        sources: Vec<SourceId>,
    ) -> Result<Self> {
        if x.nrows() != geometry.ref_len() || y.nrows() != geometry.block_len() {
            return Err(Error::ShapeMismatch(format!(
                "dataset rows {}/{} do not match geometry {}/{}",
                x.nrows(),
                y.nrows(),
                geometry.ref_len(),
                geometry.block_len()
            )));
        }
        if x.ncols() != y.ncols() || x.ncols() != sources.len() {
            return Err(Error::ShapeMismatch(format!(
                "dataset column counts differ: x {}, y {}, sources {}",
                x.ncols(),
                y.ncols(),
                sources.len()
            )));
        }
        Ok(Self {
            geometry,
            x,
            y,
            sources,
        })
    }

    /// Builds a dataset from per-sample vectors; `sources` may be omitted.
    pub fn from_samples(
        geometry: BlockGeometry,
        samples: &[(ReferenceVector, TargetBlock)],
    ) -> Result<Self> {
        let (m, n) = (geometry.ref_len(), geometry.block_len());
        let mut x = DMatrix::zeros(m, samples.len());
        let mut y = DMatrix::zeros(n, samples.len());
        for (j, (xr, yb)) in samples.iter().enumerate() {
            if xr.len() != m || yb.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "sample {j} has lengths {}/{}, expected {m}/{n}",
                    xr.len(),
                    yb.len()
                )));
            }
            x.column_mut(j).copy_from_slice(xr.as_slice());
            y.column_mut(j).copy_from_slice(yb.as_slice());
        }
        let sources = vec![
            SourceId {
                image: 0,
                row: 0,
                col: 0
            };
            samples.len()
        ];
        Self::new(geometry, x, y, sources)
    }

    /// Concatenates per-image datasets; part `i` gets image id `i`.
    pub fn concat(geometry: BlockGeometry, parts: &[PatchDataset]) -> Result<Self> {
        let total: usize = parts.iter().map(|p| p.count()).sum();
        let mut x = DMatrix::zeros(geometry.ref_len(), total);
        let mut y = DMatrix::zeros(geometry.block_len(), total);
        let mut sources = Vec::with_capacity(total);
        let mut offset = 0;
        for (i, part) in parts.iter().enumerate() {
            if part.geometry != geometry {
                return Err(Error::GeometryMismatch {
                    dataset: part.geometry.block_size(),
                    set: geometry.block_size(),
                });
            }
            let s = part.count();
            x.columns_mut(offset, s).copy_from(&part.x);
            y.columns_mut(offset, s).copy_from(&part.y);
            sources.extend(part.sources.iter().map(|src| SourceId {
                image: i as u32,
                ..*src
            }));
            offset += s;
        }
        Self::new(geometry, x, y, sources)
    }

    /// Reorders columns: column `j` of the result is column `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.count() {
            return Err(Error::ShapeMismatch("permutation length".into()));
        }
        let x = self.x.select_columns(order);
        let y = self.y.select_columns(order);
        let sources = order.iter().map(|&j| self.sources[j]).collect();
        Self::new(self.geometry, x, y, sources)
    }

    #[inline]
    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    #[inline]
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    #[inline]
    pub fn sources(&self) -> &[SourceId] {
        &self.sources
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Number of rows and columns of block positions whose references all lie
/// inside the image: `r in 1..=H-N`, `c in 1..=W-2N`.
pub fn valid_position_grid(width: usize, height: usize, geometry: BlockGeometry) -> (usize, usize) {
    let n = geometry.block_size();
    let rows = height.saturating_sub(n);
    let cols = width.saturating_sub(2 * n);
    (rows, cols)
}

/// Draws `count` block positions uniformly with replacement among those with
/// fully in-image references, and gathers their reference/target pairs.
pub fn sample_patches(
    plane: &Plane,
    geometry: BlockGeometry,
    count: usize,
    seed: u64,
) -> Result<PatchDataset> {
    let (rows, cols) = valid_position_grid(plane.width(), plane.height(), geometry);
    if rows == 0 || cols == 0 {
        return Err(Error::NoValidPosition {
            width: plane.width(),
            height: plane.height(),
            block_size: geometry.block_size(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(geometry.ref_len(), count);
    let mut y = DMatrix::zeros(geometry.block_len(), count);
    let mut sources = Vec::with_capacity(count);
    for j in 0..count {
        let pick = rng.random_range(0..rows * cols);
        let (r, c) = (1 + pick / cols, 1 + pick % cols);
        let reference = extract_reference(plane, r, c, geometry, None)?;
        let block = extract_block(plane, r, c, geometry)?;
        x.column_mut(j).copy_from_slice(reference.as_slice());
        y.column_mut(j).copy_from_slice(block.as_slice());
        sources.push(SourceId {
            image: 0,
            row: r as u32,
            col: c as u32,
        });
    }
    PatchDataset::new(geometry, x, y, sources)
}
