//! One Monte Carlo trial and the ordered parallel loop over trials.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::Scenario;
use crate::error::{Error, Result};
use crate::estimator::{
    average_spectrogram, estimate_mask, real_average_spectrogram_from, AvgSpectrogram,
    MaskEstimate,
};
use crate::locop::assemble_locop;
use crate::maskgeom::{error_report, make_mask, ErrorReport, Mask};
use crate::noise::{filter_vectors, sample_noise_trial, NoiseKind};
use crate::tfcore::{make_window, TfGrid, Window, C64};

/// Everything about a scenario that does not depend on the trial index.
#[derive(Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub grid: TfGrid,
    pub truth: Mask,
    pub g: Window,
    pub phi: Window,
    pub h: DMatrix<C64>,
}

impl Prepared {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = TfGrid::new(scenario.n)?;
        let truth = make_mask(grid, &scenario.shape)?;
        let g = make_window(grid, scenario.model_window)?;
        let phi = make_window(grid, scenario.recon_window)?;
        let h = assemble_locop(&truth, &g)?;
        Ok(Prepared { scenario: scenario.clone(), grid, truth, g, phi, h })
    }

    /// Same truth and operator with a different `K`, `sigma` or noise kind.
    pub fn with_noise(&self, k: usize, sigma: f64, noise: NoiseKind) -> Result<Self> {
        let scenario = Scenario { k, sigma, noise, ..self.scenario.clone() };
        scenario.validate()?;
        Ok(Prepared {
            scenario,
            grid: self.grid,
            truth: self.truth.clone(),
            g: self.g.clone(),
            phi: self.phi.clone(),
            h: self.h.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    pub error: ErrorReport,
    pub success_at_r: Vec<bool>,
    pub estimate_measure: f64,
    pub threshold: f64,
    pub max_rho: f64,
    pub wall_time: f64,
}

/// Full output of one trial, kept for the artifact-emitting first trial.
#[derive(Debug)]
pub struct TrialArtifacts {
    pub result: TrialResult,
    pub rho: AvgSpectrogram,
    pub estimate: MaskEstimate,
}

/// Estimation from raw observations. Only the noise kind is needed to decide
/// whether to complexify; the noise level is not an input.
pub fn estimate_from_observations(
    noise: &[Vec<C64>],
    kind: NoiseKind,
    h: &DMatrix<C64>,
    phi: &Window,
) -> Result<(AvgSpectrogram, MaskEstimate)> {
    let rho = match kind {
        NoiseKind::Complex => average_spectrogram(&filter_vectors(noise, h)?, phi)?,
        NoiseKind::Real => real_average_spectrogram_from(noise, h, phi)?,
        NoiseKind::Complexified => {
            return Err(Error::config("trials draw complex or real noise"))
        }
    };
    let est = estimate_mask(&rho)?;
    Ok((rho, est))
}

pub fn run_trial_full(p: &Prepared, trial_index: usize) -> Result<TrialArtifacts> {
    let start = Instant::now();
    let s = &p.scenario;
    let batch = sample_noise_trial(p.grid, s.k, s.sigma, s.noise, s.seed, trial_index as u64)?;
    let (rho, estimate) = estimate_from_observations(batch.realizations(), s.noise, &p.h, &p.phi)?;
    let error = error_report(&p.truth, &estimate.mask)?;
    let result = TrialResult {
        trial_index,
        seed: s.seed,
        success_at_r: s.r_list.iter().map(|&r| error.contained_within(r)).collect(),
        error,
        estimate_measure: estimate.mask.measure(),
        threshold: estimate.threshold,
        max_rho: estimate.max_rho,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(TrialArtifacts { result, rho: rho.with_sigma_known(s.sigma), estimate })
}

pub fn run_trial(p: &Prepared, trial_index: usize) -> Result<TrialResult> {
    run_trial_full(p, trial_index).map(|a| a.result)
}

/// Worker pool of the requested size; `None` uses the rayon default.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs trials `0..trials` on `pool`; results come back in trial order.
pub fn run_trials(p: &Prepared, pool: &rayon::ThreadPool) -> Result<Vec<TrialResult>> {
    pool.install(|| {
        (0..p.scenario.trials).into_par_iter().map(|t| run_trial(p, t)).collect()
    })
}
