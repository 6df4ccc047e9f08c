//! Video-level feature construction and normalization.
//!
//! Frames are mean-pooled into one vector, audio is optionally appended, and
//! the result is centered and scaled (z-norm or PCA whitening) before a final
//! optional L2 normalization.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};

/// Most frames a video may carry (1 fps over the first six minutes).
pub const MAX_FRAMES: usize = 360;

/// Default stabilizer for both normalizers.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Norms at or below this are treated as the zero vector.
pub const L2_ZERO_THRESHOLD: f64 = 1e-12;

/// Per-frame features of one video, `T × D` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    frames: Matrix,
}

impl FrameFeatures {
    pub fn new(frames: Matrix) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::Empty("frame matrix"));
        }
        if frames.rows() > MAX_FRAMES {
            return Err(Error::Malformed(format!(
                "{} frames exceeds the limit of {MAX_FRAMES}",
                frames.rows()
            )));
        }
        Ok(Self { frames })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(t * d);
        for r in rows {
            check_dim(d, r.len(), "frame row")?;
            data.extend_from_slice(r);
        }
        Self::new(Matrix::from_vec(t, d, data)?)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.frames
    }
}

/// Averages frames into one vector.
pub fn mean_pool(f: &FrameFeatures) -> Vec<f64> {
    let t = f.frame_count();
    let mut sum = vec![0.0; f.dim()];
    for r in 0..t {
        linalg::axpy(1.0, f.frames.row(r), &mut sum);
    }
    let inv = 1.0 / t as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    sum
}

/// Appends the audio vector after the RGB vector.
pub fn concat_audio(rgb: &[f64], audio: &[f64]) -> Result<Vec<f64>> {
    if !rgb.iter().chain(audio).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("feature passed to concat_audio".into()));
    }
    let mut out = Vec::with_capacity(rgb.len() + audio.len());
    out.extend_from_slice(rgb);
    out.extend_from_slice(audio);
    Ok(out)
}

/// Outcome of [`l2_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct L2Normalized {
    pub values: Vec<f64>,
    /// Set when the input norm was at or below [`L2_ZERO_THRESHOLD`] and the
    /// input was returned unchanged.
    pub degenerate: bool,
}

pub fn l2_normalize(x: &[f64]) -> L2Normalized {
    let n = linalg::norm2(x);
    if n > L2_ZERO_THRESHOLD {
        L2Normalized {
            values: x.iter().map(|v| v / n).collect(),
            degenerate: false,
        }
    } else {
        L2Normalized {
            values: x.to_vec(),
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    ZNorm,
    PcaWhitening,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::ZNorm => "znorm",
            NormKind::PcaWhitening => "pca",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "znorm" | "z-norm" => Ok(NormKind::ZNorm),
            "pca" | "pca-whitening" => Ok(NormKind::PcaWhitening),
            other => Err(Error::Config(format!("unknown normalizer {other:?}"))),
        }
    }
}

/// The scaling half of a fitted normalizer.
#[derive(Debug, Clone, PartialEq)]
pub enum NormScale {
    /// Per-dimension standard deviations, each at least epsilon.
    StdDev(Vec<f64>),
    /// Whitening transform; row i is eigenvector i divided by
    /// `sqrt(eigenvalue_i + epsilon)`.
    Whitening(Matrix),
}

/// Fitted normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerStats {
    pub mean: Vec<f64>,
    pub scale: NormScale,
    pub epsilon: f64,
    pub l2_after: bool,
}

impl NormalizerStats {
    pub fn kind(&self) -> NormKind {
        match self.scale {
            NormScale::StdDev(_) => NormKind::ZNorm,
            NormScale::Whitening(_) => NormKind::PcaWhitening,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Identity normalizer of dimension `d`: zero mean, unit scale, no L2.
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: NormScale::StdDev(vec![1.0; d]),
            epsilon: DEFAULT_EPSILON,
            l2_after: false,
        }
    }

    pub fn with_l2(mut self, l2_after: bool) -> Self {
        self.l2_after = l2_after;
        self
    }

    /// Centers, scales, then optionally L2-normalizes `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len(), "normalizer input")?;
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let scaled = match &self.scale {
            NormScale::StdDev(sd) => centered.iter().zip(sd).map(|(v, s)| v / s).collect(),
            NormScale::Whitening(w) => w.matvec(&centered),
        };
        Ok(if self.l2_after {
            l2_normalize(&scaled).values
        } else {
            scaled
        })
    }
}

/// Fits whichever normalizer `kind` names.
pub fn fit<I, V>(kind: NormKind, data: I, epsilon: f64) -> Result<NormalizerStats>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    match kind {
        NormKind::ZNorm => fit_znorm(data, epsilon),
        NormKind::PcaWhitening => fit_pca_whitening(data, epsilon),
    }
}

/// Fits per-dimension mean and population standard deviation.
///
/// Single pass (Welford). Standard deviations below `epsilon` are clamped.
pub fn fit_znorm<I, V>(data: I, epsilon: f64) -> Result<NormalizerStats>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    let mut n = 0usize;
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for sample in data {
        let x = sample.as_ref();
        if n == 0 {
            mean = vec![0.0; x.len()];
            m2 = vec![0.0; x.len()];
        }
        check_dim(mean.len(), x.len(), "z-norm sample")?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("z-norm sample {n}")));
        }
        n += 1;
        let inv = 1.0 / n as f64;
        for ((m, s), &v) in mean.iter_mut().zip(&mut m2).zip(x) {
            let delta = v - *m;
            *m += delta * inv;
            *s += delta * (v - *m);
        }
    }
    if n < 2 {
        return Err(Error::Empty("z-norm fit needs at least 2 samples"));
    }
    let sd = m2
        .iter()
        .map(|s| (s / n as f64).sqrt().max(epsilon))
        .collect();
    Ok(NormalizerStats {
        mean,
        scale: NormScale::StdDev(sd),
        epsilon,
        l2_after: false,
    })
}

/// Fits a PCA whitening transform from the population covariance.
pub fn fit_pca_whitening<I, V>(data: I, epsilon: f64) -> Result<NormalizerStats>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    let mut n = 0usize;
    let mut mean: Vec<f64> = Vec::new();
    let mut comoment = Matrix::zeros(0, 0);
    let mut delta_old = Vec::new();
    for sample in data {
        let x = sample.as_ref();
        if n == 0 {
            mean = vec![0.0; x.len()];
            comoment = Matrix::zeros(x.len(), x.len());
            delta_old = vec![0.0; x.len()];
        }
        check_dim(mean.len(), x.len(), "whitening sample")?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("whitening sample {n}")));
        }
        n += 1;
        let inv = 1.0 / n as f64;
        for ((d, m), &v) in delta_old.iter_mut().zip(mean.iter_mut()).zip(x) {
            *d = v - *m;
            *m += *d * inv;
        }
        // C += (x - mean_old)(x - mean_new)ᵀ
        let delta_new: Vec<f64> = x.iter().zip(&mean).map(|(v, m)| v - m).collect();
        comoment.add_outer(&delta_old, &delta_new);
    }
    if n < 2 {
        return Err(Error::Empty("whitening fit needs at least 2 samples"));
    }
    let d = mean.len();
    let inv_n = 1.0 / n as f64;
    let cov = Matrix::from_fn(d, d, |r, c| {
        0.5 * (comoment[(r, c)] + comoment[(c, r)]) * inv_n
    });
    let eig = linalg::symmetric_eigen(&cov)?;
    let transform = Matrix::from_fn(d, d, |r, c| {
        eig.vectors[(r, c)] / (eig.values[r].max(0.0) + epsilon).sqrt()
    });
    Ok(NormalizerStats {
        mean,
        scale: NormScale::Whitening(transform),
        epsilon,
        l2_after: false,
    })
}
