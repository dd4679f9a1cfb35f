//! Recovery of a binary time-frequency mask from a few filtered white-noise
//! observations, on a discrete Gabor lattice.
//!
//! The pipeline: white noise `N_k` is filtered by the localization operator
//! `H_Omega`, the filtered outputs are analyzed with a reconstruction window
//! `phi`, their spectrograms are averaged into `rho`, and the mask estimate is
//! the level set `rho >= max(rho) / 4`.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod locop;
pub mod maskgeom;
pub mod noise;
pub mod pgm;
pub mod tfcore;

pub use error::{Error, Result};
pub use estimator::{
    average_spectrogram, estimate_mask, estimate_mask_real, level_set, AvgSpectrogram, MaskEstimate,
};
pub use locop::{assemble_locop, check_largeness, spectrum, theta, LocOpSpectrum, ThetaField};
pub use maskgeom::{error_report, make_mask, ErrorReport, Mask, ShapeSpec};
pub use noise::{complexify, filter_batch, sample_noise, NoiseBatch, NoiseKind};
pub use tfcore::{istft, make_window, stft, TfGrid, TfMatrix, Window, WindowLabel, C64};
