//! Seeded white noise, its complexification, and filtering through `H_Omega`.
//!
//! Every realization is drawn from its own ChaCha20 stream keyed by
//! `(seed, trial, realization)`, so any single realization can be regenerated
//! without replaying the others.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::locop::LocOpSpectrum;
use crate::tfcore::{TfGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Independent real and imaginary parts, each of variance `sigma^2 / 2`.
    Complex,
    /// Real Gaussian entries of variance `sigma^2`.
    Real,
    /// `N_k + i N_{k+K'}` built from a batch of another kind.
    Complexified,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Complex => "complex",
            NoiseKind::Real => "real",
            NoiseKind::Complexified => "complexified",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complex" => Ok(NoiseKind::Complex),
            "real" => Ok(NoiseKind::Real),
            "complexified" => Ok(NoiseKind::Complexified),
            other => Err(Error::config(format!("unknown noise kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBatch {
    grid: TfGrid,
    realizations: Vec<Vec<C64>>,
    sigma: f64,
    kind: NoiseKind,
    seed: u64,
}

impl NoiseBatch {
    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn realizations(&self) -> &[Vec<C64>] {
        &self.realizations
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Standard deviation of the entries: `E|entry|^2 = sigma^2`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// ChaCha20 key for one realization.
fn stream_key(seed: u64, trial: u64, realization: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&realization.to_le_bytes());
    key[24..].copy_from_slice(b"maskrec\0");
    key
}

/// Draws `count` realizations for trial 0 of `seed`.
pub fn sample_noise(
    grid: TfGrid,
    count: usize,
    sigma: f64,
    kind: NoiseKind,
    seed: u64,
) -> Result<NoiseBatch> {
    sample_noise_trial(grid, count, sigma, kind, seed, 0)
}

/// Draws `count` realizations for a given trial. Entries are standard normal
/// draws multiplied by a single scale factor, so batches with the same keys
/// differ only by that factor.
pub fn sample_noise_trial(
    grid: TfGrid,
    count: usize,
    sigma: f64,
    kind: NoiseKind,
    seed: u64,
    trial: u64,
) -> Result<NoiseBatch> {
    if count == 0 {
        return Err(Error::config("need at least one noise realization"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!("noise level must be positive, got {sigma}")));
    }
    let scale = match kind {
        NoiseKind::Complex => sigma * FRAC_1_SQRT_2,
        NoiseKind::Real => sigma,
        NoiseKind::Complexified => {
            return Err(Error::config("complexified batches are built with complexify()"))
        }
    };
    let n = grid.n();
    let realizations = (0..count as u64)
        .map(|k| {
            let mut rng = ChaCha20Rng::from_seed(stream_key(seed, trial, k));
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            if kind == NoiseKind::Complex {
                (0..n)
                    .map(|_| {
                        let re = draw();
                        let im = draw();
                        C64::new(re * scale, im * scale)
                    })
                    .collect()
            } else {
                (0..n).map(|_| C64::new(draw() * scale, 0.0)).collect()
            }
        })
        .collect();
    Ok(NoiseBatch { grid, realizations, sigma, kind, seed })
}

/// Pairs realization `k` with `k + K'`, `K' = floor(K/2)`, into `N_k + i N_{k+K'}`.
/// The result has `E|entry|^2 = 2 sigma^2`; a trailing odd realization is unused.
pub fn complexify(batch: &NoiseBatch) -> Result<NoiseBatch> {
    let k = batch.len();
    if k < 2 {
        return Err(Error::config(format!("complexification needs K >= 2, got {k}")));
    }
    Ok(NoiseBatch {
        grid: batch.grid,
        realizations: complexify_vectors(&batch.realizations),
        sigma: batch.sigma * std::f64::consts::SQRT_2,
        kind: NoiseKind::Complexified,
        seed: batch.seed,
    })
}

/// `a_k + i a_{k+K'}` for `k < K' = floor(K/2)`.
pub fn complexify_vectors(vs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let half = vs.len() / 2;
    (0..half)
        .map(|k| {
            vs[k]
                .iter()
                .zip(&vs[k + half])
                .map(|(a, b)| a + C64::i() * b)
                .collect()
        })
        .collect()
}

/// `y_k = H n_k` for every realization.
pub fn filter_batch(batch: &NoiseBatch, h: &DMatrix<C64>) -> Result<Vec<Vec<C64>>> {
    filter_vectors(batch.realizations(), h)
}

pub fn filter_vectors(vs: &[Vec<C64>], h: &DMatrix<C64>) -> Result<Vec<Vec<C64>>> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension { expected: h.nrows(), actual: h.ncols() });
    }
    vs.iter()
        .map(|v| {
            check_len(h.ncols(), v.len())?;
            let y = h * DVector::from_column_slice(v);
            Ok(y.as_slice().to_vec())
        })
        .collect()
}

/// `alpha[k][m] = <n_k, f_m>`.
pub fn eigen_coefficients(batch: &NoiseBatch, spec: &LocOpSpectrum) -> Result<DMatrix<C64>> {
    let n = spec.grid().n();
    check_len(n, batch.grid.n())?;
    let v = spec.eigenvectors();
    let mut out = DMatrix::<C64>::zeros(batch.len(), n);
    for (k, real) in batch.realizations.iter().enumerate() {
        for m in 0..n {
            out[(k, m)] = v.column(m).iter().zip(real).map(|(f, x)| x * f.conj()).sum();
        }
    }
    Ok(out)
}
