//! Hand-crafted predictors written as linear maps from the reference vector
//! to the block: angular interpolation, DC and planar.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::BlockGeometry;

/// Mode counts supported by [`build_uniform_angular_set`].
pub const UNIFORM_MODE_COUNTS: [usize; 8] = [5, 9, 13, 17, 21, 25, 29, 33];

/// HEVC `intraPredAngle` for modes 2..=34, in 1/32 sample units.
pub const HEVC_ANGLE_PARAMS: [i32; 33] = [
    32, 26, 21, 17, 13, 9, 5, 2, 0, -2, -5, -9, -13, -17, -21, -26, -32, -26, -21, -17, -13, -9,
    -5, -2, 0, 2, 5, 9, 13, 17, 21, 26, 32,
];

/// Weights this close to 0 or 1 are snapped; they only arise from rounding in
/// the ray intersection.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    DesignedUniform,
    DesignedHevc,
    RipTrained,
}

impl Provenance {
    pub fn code(self) -> u8 {
        match self {
            Provenance::DesignedUniform => 0,
            Provenance::DesignedHevc => 1,
            Provenance::RipTrained => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Provenance::DesignedUniform),
            1 => Some(Provenance::DesignedHevc),
            2 => Some(Provenance::RipTrained),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Provenance::DesignedUniform => "designed-uniform",
            Provenance::DesignedHevc => "designed-hevc",
            Provenance::RipTrained => "rip-trained",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One prediction mode: a `N^2 x (3N+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrix {
    pub mode_id: usize,
    pub label: String,
    pub matrix: DMatrix<f64>,
}

impl PredictorMatrix {
    pub fn new(label: impl Into<String>, matrix: DMatrix<f64>) -> Self {
        Self {
            mode_id: 0,
            label: label.into(),
            matrix,
        }
    }

    pub fn fits(&self, geometry: BlockGeometry) -> bool {
        self.matrix.shape() == (geometry.block_len(), geometry.ref_len())
    }
}

/// An ordered collection of modes sharing one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    geometry: BlockGeometry,
    modes: Vec<PredictorMatrix>,
    provenance: Provenance,
    lambda: f64,
    iterations_trained: u32,
}

impl PredictorSet {
    /// Renumbers `mode_id` to `0..k` and checks every shape.
    pub fn new(
        geometry: BlockGeometry,
        mut modes: Vec<PredictorMatrix>,
        provenance: Provenance,
        lambda: f64,
        iterations_trained: u32,
    ) -> Result<Self> {
        for (i, mode) in modes.iter_mut().enumerate() {
            if !mode.fits(geometry) {
                return Err(Error::ShapeMismatch(format!(
                    "mode {i} is {}x{}, expected {}x{}",
                    mode.matrix.nrows(),
                    mode.matrix.ncols(),
                    geometry.block_len(),
                    geometry.ref_len()
                )));
            }
            mode.mode_id = i;
        }
        Ok(Self {
            geometry,
            modes,
            provenance,
            lambda,
            iterations_trained,
        })
    }

    #[inline]
    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    #[inline]
    pub fn modes(&self) -> &[PredictorMatrix] {
        &self.modes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn iterations_trained(&self) -> u32 {
        self.iterations_trained
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if !(45.0..=225.0).contains(&theta) {
        return Err(Error::InvalidAngle(theta));
    }
    Ok(())
}

/// Where a ray from a pixel center meets the reference border.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    /// On the line `y = -0.5` at horizontal position `x`.
    Top(f64),
    /// On the line `x = -0.5` at vertical position `y`.
    Left(f64),
}

/// Block-local frame: pixel `(j, i)` has center `(i + 0.5, j + 0.5)`, the top
/// reference row lies on `y = -0.5` and the left column on `x = -0.5`.
/// `theta` is measured counter-clockwise from the +x axis with y pointing up.
fn cross_border(j: usize, i: usize, theta: f64) -> Crossing {
    let (x0, y0) = (i as f64 + 0.5, j as f64 + 0.5);
    let up = y0 + 0.5;
    let left = x0 + 0.5;
    if theta == 90.0 {
        return Crossing::Top(x0);
    }
    if theta == 180.0 {
        return Crossing::Left(y0);
    }
    if theta < 90.0 {
        // up-right: always reaches the top row
        let shift = up / (theta.to_radians().tan());
        return Crossing::Top(x0 + shift);
    }
    if theta < 180.0 {
        // up-left: top row if the crossing is right of the corner
        let run_per_rise = -1.0 / theta.to_radians().tan();
        let x = x0 - up * run_per_rise;
        if x >= -0.5 {
            return Crossing::Top(x);
        }
        let rise_per_run = 1.0 / run_per_rise;
        return Crossing::Left(y0 - left * rise_per_run);
    }
    // down-left
    let drop_per_run = (theta - 180.0).to_radians().tan();
    Crossing::Left(y0 + left * drop_per_run)
}

/// Splits a border position into the two neighbouring reference samples.
/// `samples` maps positions `-0.5, 0.5, ..., last` to reference indices.
fn interpolate(pos: f64, sample_count: usize, index_of: impl Fn(usize) -> usize) -> Vec<(usize, f64)> {
    // sample k sits at position k - 0.5
    let s = pos + 0.5;
    let last = (sample_count - 1) as f64;
    if s >= last - SNAP {
        return vec![(index_of(sample_count - 1), 1.0)];
    }
    let s = s.max(0.0);
    let lower = s.floor();
    let mut w = s - lower;
    let k = lower as usize;
    if w < SNAP {
        return vec![(index_of(k), 1.0)];
    }
    if w > 1.0 - SNAP {
        return vec![(index_of(k + 1), 1.0)];
    }
    if w > 1.0 {
        w = 1.0;
    }
    vec![(index_of(k), 1.0 - w), (index_of(k + 1), w)]
}

/// Angular predictor: every pixel is a two-tap interpolation of the reference
/// border along direction `theta` (degrees, 90 = up, 180 = left).
pub fn build_angular_matrix(geometry: BlockGeometry, theta: f64) -> Result<PredictorMatrix> {
    check_angle(theta)?;
    let n = geometry.block_size();
    let mut m = DMatrix::zeros(geometry.block_len(), geometry.ref_len());
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            // corner, then top row and top-right: 2N+1 samples along y = -0.5
            // corner, then left column: N+1 samples along x = -0.5
            let taps = match cross_border(j, i, theta) {
                Crossing::Top(x) => interpolate(x, 2 * n + 1, |k| k),
                Crossing::Left(y) => {
                    interpolate(y, n + 1, |k| if k == 0 { 0 } else { 2 * n + k })
                }
            };
            for (col, w) in taps {
                m[(row, col)] += w;
            }
        }
    }
    Ok(PredictorMatrix::new(format!("angular {theta:.3}"), m))
}

/// `mode_count` angles spread evenly over `[45, 225]`, both ends included.
pub fn uniform_angles(mode_count: usize) -> Result<Vec<f64>> {
    if !UNIFORM_MODE_COUNTS.contains(&mode_count) {
        return Err(Error::UnsupportedModeCount(mode_count));
    }
    let step = 180.0 / (mode_count - 1) as f64;
    Ok((0..mode_count).map(|p| 45.0 + p as f64 * step).collect())
}

pub fn build_uniform_angular_set(geometry: BlockGeometry, mode_count: usize) -> Result<PredictorSet> {
    let modes = uniform_angles(mode_count)?
        .into_iter()
        .map(|theta| build_angular_matrix(geometry, theta))
        .collect::<Result<Vec<_>>>()?;
    PredictorSet::new(geometry, modes, Provenance::DesignedUniform, 0.0, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStyle {
    /// Mean of all `3N + 1` reference samples.
    FullAverage,
    /// Mean of the `N` top and `N` left samples.
    Hevc,
}

pub fn build_dc_matrix(geometry: BlockGeometry, style: DcStyle) -> PredictorMatrix {
    let (rows, cols) = (geometry.block_len(), geometry.ref_len());
    let n = geometry.block_size();
    match style {
        DcStyle::FullAverage => {
            PredictorMatrix::new("dc", DMatrix::from_element(rows, cols, 1.0 / cols as f64))
        }
        DcStyle::Hevc => {
            let w = 1.0 / (2 * n) as f64;
            let mut m = DMatrix::zeros(rows, cols);
            for row in 0..rows {
                for k in 0..n {
                    m[(row, geometry.top_index(k))] = w;
                    m[(row, geometry.left_index(k))] = w;
                }
            }
            PredictorMatrix::new("dc", m)
        }
    }
}

/// HEVC planar with real weights. The below-left sample is replaced by the
/// last left-column sample.
pub fn build_planar_matrix(geometry: BlockGeometry) -> PredictorMatrix {
    let n = geometry.block_size();
    let denom = (2 * n) as f64;
    let top_right = n + 1;
    let below_left = 3 * n;
    let mut m = DMatrix::zeros(geometry.block_len(), geometry.ref_len());
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            m[(row, geometry.left_index(j))] += (n - 1 - i) as f64 / denom;
            m[(row, top_right)] += (i + 1) as f64 / denom;
            m[(row, geometry.top_index(i))] += (n - 1 - j) as f64 / denom;
            m[(row, below_left)] += (j + 1) as f64 / denom;
        }
    }
    PredictorMatrix::new("planar", m)
}

/// Direction of HEVC angular mode `mode` (2..=34) in the `[45, 225]`
/// convention.
pub fn hevc_mode_angle(mode: usize) -> f64 {
    assert!((2..=34).contains(&mode), "HEVC angular modes are 2..=34");
    let a = f64::from(HEVC_ANGLE_PARAMS[mode - 2]) / 32.0;
    if mode >= 18 {
        90.0 - a.atan().to_degrees()
    } else {
        180.0 + a.atan().to_degrees()
    }
}

/// Planar, DC and the 33 HEVC angular directions, in HEVC mode order.
pub fn build_hevc_set(geometry: BlockGeometry) -> Result<PredictorSet> {
    let mut modes = Vec::with_capacity(35);
    modes.push(build_planar_matrix(geometry));
    modes.push(build_dc_matrix(geometry, DcStyle::Hevc));
    for mode in 2..=34 {
        let mut m = build_angular_matrix(geometry, hevc_mode_angle(mode))?;
        m.label = format!("hevc {mode} ({})", m.label);
        modes.push(m);
    }
    PredictorSet::new(geometry, modes, Provenance::DesignedHevc, 0.0, 0)
}
