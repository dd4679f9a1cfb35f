//! The averaged observed spectrogram `rho` and its thresholded level sets.
//!
//! Nothing here takes a noise level: the estimate thresholds `rho` relative to
//! its own maximum, so it cannot depend on `sigma`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::maskgeom::Mask;
use crate::noise::{complexify_vectors, filter_vectors, NoiseBatch};
use crate::tfcore::{GaborPlan, TfField, TfGrid, Window, WindowLabel, C64};

/// Fraction of `max rho` used as the estimation threshold.
pub const THRESHOLD_FRACTION: f64 = 0.25;

/// Smallest real batch accepted by [`estimate_mask_real`].
pub const MIN_REAL_BATCH: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct AvgSpectrogram {
    rho: TfField,
    k: usize,
    window_label: WindowLabel,
    sigma_known: Option<f64>,
}

impl AvgSpectrogram {
    pub fn rho(&self) -> &TfField {
        &self.rho
    }

    pub fn grid(&self) -> TfGrid {
        self.rho.grid()
    }

    /// Number of averaged realizations.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window_label(&self) -> WindowLabel {
        self.window_label
    }

    /// Noise level attached for reporting. Never read by the estimator.
    pub fn sigma_known(&self) -> Option<f64> {
        self.sigma_known
    }

    pub fn with_sigma_known(mut self, sigma: f64) -> Self {
        self.sigma_known = Some(sigma);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskEstimate {
    pub mask: Mask,
    pub threshold: f64,
    pub max_rho: f64,
}

impl AsRef<Mask> for MaskEstimate {
    fn as_ref(&self) -> &Mask {
        &self.mask
    }
}

/// `rho(z) = (1/K) sum_k n |stft(y_k, phi)(z)|^2`, on the same density scale
/// as `locop::theta`.
pub fn average_spectrogram(filtered: &[Vec<C64>], phi: &Window) -> Result<AvgSpectrogram> {
    if filtered.is_empty() {
        return Err(Error::config("average spectrogram needs at least one realization"));
    }
    let grid = phi.grid();
    let plan = GaborPlan::new(grid);
    let mut rho = TfField::zeros(grid);
    for y in filtered {
        let v = plan.analyze(y, phi)?;
        for (r, c) in rho.values_mut().iter_mut().zip(v.values()) {
            *r += c.norm_sqr();
        }
    }
    let scale = grid.n() as f64 / filtered.len() as f64;
    for r in rho.values_mut() {
        *r *= scale;
    }
    Ok(AvgSpectrogram { rho, k: filtered.len(), window_label: phi.label(), sigma_known: None })
}

/// `{z : rho(z) >= max(rho) / 4}`, ties included.
pub fn estimate_mask(rho: &AvgSpectrogram) -> Result<MaskEstimate> {
    let max_rho = rho.rho.max();
    if !max_rho.is_finite() {
        return Err(Error::Numeric(format!("non-finite spectrogram maximum {max_rho}")));
    }
    if max_rho <= 0.0 {
        return Err(Error::Degenerate("averaged spectrogram is identically zero".into()));
    }
    let threshold = max_rho * THRESHOLD_FRACTION;
    Ok(MaskEstimate { mask: threshold_cells(&rho.rho, threshold), threshold, max_rho })
}

/// `S_delta = {z : rho(z) >= delta}` for a fixed `delta > 0`.
pub fn level_set(rho: &AvgSpectrogram, delta: f64) -> Result<Mask> {
    if !(delta > 0.0) {
        return Err(Error::config(format!("level must be positive, got {delta}")));
    }
    Ok(threshold_cells(&rho.rho, delta))
}

fn threshold_cells(rho: &TfField, t: f64) -> Mask {
    let cells = rho.values().iter().map(|&r| r >= t).collect();
    Mask::from_cells(rho.grid(), cells).expect("field and mask share a grid")
}

/// Complexified pipeline: `K' = floor(K/2)` pairs `N_k + i N_{k+K'}`, filtered,
/// averaged and thresholded. Works for real and complex batches alike.
pub fn estimate_mask_real(
    batch: &NoiseBatch,
    h: &DMatrix<C64>,
    phi: &Window,
) -> Result<MaskEstimate> {
    real_average_spectrogram(batch, h, phi).and_then(|rho| estimate_mask(&rho))
}

/// The `rho` behind [`estimate_mask_real`], built from `K'` terms.
pub fn real_average_spectrogram(
    batch: &NoiseBatch,
    h: &DMatrix<C64>,
    phi: &Window,
) -> Result<AvgSpectrogram> {
    real_average_spectrogram_from(batch.realizations(), h, phi)
}

/// [`real_average_spectrogram`] on bare realizations.
pub fn real_average_spectrogram_from(
    noise: &[Vec<C64>],
    h: &DMatrix<C64>,
    phi: &Window,
) -> Result<AvgSpectrogram> {
    if noise.len() < MIN_REAL_BATCH {
        return Err(Error::config(format!(
            "real-noise estimation needs K >= {MIN_REAL_BATCH}, got {}",
            noise.len()
        )));
    }
    let paired = complexify_vectors(noise);
    average_spectrogram(&filter_vectors(&paired, h)?, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locop::{assemble_locop, spectrum, theta};
    use crate::maskgeom::{make_mask, ShapeSpec};
    use crate::noise::{filter_batch, sample_noise, sample_noise_trial, NoiseKind};
    use crate::tfcore::{make_window, stft};

    fn grid(n: usize) -> TfGrid {
        TfGrid::new(n).unwrap()
    }

    fn field(grid: TfGrid, f: impl Fn(usize, usize) -> f64) -> AvgSpectrogram {
        let n = grid.n();
        let vals = (0..n * n).map(|i| f(i / n, i % n)).collect();
        AvgSpectrogram {
            rho: TfField::from_values(grid, vals).unwrap(),
            k: 1,
            window_label: WindowLabel::Gaussian,
            sigma_known: None,
        }
    }

    #[test]
    fn zero_input_gives_zero_rho_and_degenerate_estimate() {
        let gr = grid(16);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let rho = average_spectrogram(&vec![vec![C64::new(0.0, 0.0); 16]; 3], &phi).unwrap();
        assert!(rho.rho().values().iter().all(|&r| r == 0.0));
        assert_eq!(rho.k(), 3);
        assert!(matches!(estimate_mask(&rho), Err(Error::Degenerate(_))));
        assert!(matches!(average_spectrogram(&[], &phi), Err(Error::Config(_))));
    }

    #[test]
    fn rho_matches_direct_stft_average() {
        let gr = grid(16);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let b = sample_noise(gr, 3, 1.0, NoiseKind::Complex, 5).unwrap();
        let rho = average_spectrogram(b.realizations(), &phi).unwrap();
        for (idx, r) in rho.rho().values().iter().enumerate() {
            let direct: f64 = b
                .realizations()
                .iter()
                .map(|y| 16.0 * stft(y, &phi).unwrap().values()[idx].norm_sqr())
                .sum::<f64>()
                / 3.0;
            assert!((r - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn indicator_rho_recovers_disc() {
        let gr = grid(32);
        let disc = make_mask(gr, &"disc:20".parse::<ShapeSpec>().unwrap()).unwrap();
        let rho = field(gr, |x, xi| if disc.get(x, xi) { 1.0 } else { 0.0 });
        let est = estimate_mask(&rho).unwrap();
        assert_eq!(est.mask, disc);
        assert_eq!(est.threshold, 0.25);
        assert_eq!(est.max_rho, 1.0);
    }

    #[test]
    fn ties_at_threshold_are_included() {
        let gr = grid(16);
        let rho = field(gr, |x, _| match x {
            0 => 4.0,
            1 => 1.0,
            _ => 0.5,
        });
        let est = estimate_mask(&rho).unwrap();
        assert_eq!(est.threshold, 1.0);
        assert_eq!(est.mask.count(), 32);
        assert!(est.mask.get(1, 7));
    }

    #[test]
    fn level_set_edge_cases() {
        let gr = grid(16);
        let rho = field(gr, |x, xi| if (x + xi) % 3 == 0 { 0.0 } else { (x * xi) as f64 + 1.0 });
        assert!(level_set(&rho, 1e9).unwrap().is_empty());
        let tiny = level_set(&rho, f64::MIN_POSITIVE).unwrap();
        for x in 0..16 {
            for xi in 0..16 {
                assert_eq!(tiny.get(x, xi), rho.rho().get(x, xi) > 0.0);
            }
        }
        let est = estimate_mask(&rho).unwrap();
        assert_eq!(level_set(&rho, est.max_rho / 4.0).unwrap(), est.mask);
        assert!(matches!(level_set(&rho, 0.0), Err(Error::Config(_))));
        assert!(matches!(level_set(&rho, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn sigma_scaling_and_mask_invariance() {
        let gr = grid(32);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let mask = make_mask(gr, &"disc:20".parse::<ShapeSpec>().unwrap()).unwrap();
        let h = assemble_locop(&mask, &phi).unwrap();
        let base = average_spectrogram(
            &filter_batch(&sample_noise(gr, 8, 1.0, NoiseKind::Complex, 3).unwrap(), &h).unwrap(),
            &phi,
        )
        .unwrap();
        let reference = estimate_mask(&base).unwrap().mask;
        for sigma in [1e-3, 0.3, 2.0, 7.5, 1e4] {
            let b = sample_noise(gr, 8, sigma, NoiseKind::Complex, 3).unwrap();
            let rho = average_spectrogram(&filter_batch(&b, &h).unwrap(), &phi).unwrap();
            for (a, r) in rho.rho().values().iter().zip(base.rho().values()) {
                assert!((a - sigma * sigma * r).abs() <= 1e-12 * sigma * sigma * r.max(1e-3));
            }
            assert_eq!(estimate_mask(&rho).unwrap().mask, reference, "sigma {sigma}");
        }
    }

    #[test]
    fn positive_rescaling_keeps_estimate() {
        let gr = grid(16);
        let rho = field(gr, |x, xi| ((x * 7 + xi * 3) % 11) as f64);
        let est = estimate_mask(&rho).unwrap();
        for c in [1e-8, 0.5, 3.0, 1e8] {
            let scaled = AvgSpectrogram { rho: rho.rho().scaled(c), ..rho.clone() };
            assert_eq!(estimate_mask(&scaled).unwrap().mask, est.mask);
        }
    }

    #[test]
    fn estimate_is_nonempty_with_threshold_in_range() {
        let gr = grid(16);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let mask = make_mask(gr, &"disc:10".parse::<ShapeSpec>().unwrap()).unwrap();
        let h = assemble_locop(&mask, &phi).unwrap();
        for seed in 0..10 {
            let b = sample_noise(gr, 4, 1.0, NoiseKind::Complex, seed).unwrap();
            let est =
                estimate_mask(&average_spectrogram(&filter_batch(&b, &h).unwrap(), &phi).unwrap())
                    .unwrap();
            assert!(est.threshold > 0.0 && est.threshold <= est.max_rho);
            assert!(!est.mask.is_empty());
        }
    }

    #[test]
    fn real_pipeline_uses_half_the_batch() {
        let gr = grid(16);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let mask = make_mask(gr, &"disc:10".parse::<ShapeSpec>().unwrap()).unwrap();
        let h = assemble_locop(&mask, &phi).unwrap();
        let b = sample_noise(gr, 4, 1.0, NoiseKind::Real, 9).unwrap();
        let rho = real_average_spectrogram(&b, &h, &phi).unwrap();
        assert_eq!(rho.k(), 2);
        let r = b.realizations();
        let manual: Vec<Vec<C64>> = (0..2)
            .map(|k| r[k].iter().zip(&r[k + 2]).map(|(a, c)| a + C64::i() * c).collect())
            .collect();
        let direct = average_spectrogram(&filter_vectors(&manual, &h).unwrap(), &phi).unwrap();
        assert_eq!(rho, direct);
        assert_eq!(
            estimate_mask_real(&b, &h, &phi).unwrap(),
            estimate_mask(&direct).unwrap()
        );

        let small = sample_noise(gr, 3, 1.0, NoiseKind::Real, 9).unwrap();
        assert!(matches!(estimate_mask_real(&small, &h, &phi), Err(Error::Config(_))));
        let complex = sample_noise(gr, 4, 1.0, NoiseKind::Complex, 9).unwrap();
        assert!(estimate_mask_real(&complex, &h, &phi).is_ok());
    }

    #[test]
    fn rho_converges_to_theta() {
        // rho(z) is a mean of 2000 Exp(theta(z)) draws, so (rho - theta) / (theta / sqrt(2000))
        // is close to standard normal per cell; 5 bounds its sup over the grid comfortably.
        let gr = grid(32);
        let phi = make_window(gr, WindowLabel::Gaussian).unwrap();
        let mask = make_mask(gr, &"disc:20".parse::<ShapeSpec>().unwrap()).unwrap();
        let h = assemble_locop(&mask, &phi).unwrap();
        let th = theta(&spectrum(&h, mask.measure()).unwrap(), &phi).unwrap();
        let filtered: Vec<Vec<C64>> = (0..20)
            .flat_map(|t| {
                let b = sample_noise_trial(gr, 100, 1.0, NoiseKind::Complex, 11, t).unwrap();
                filter_batch(&b, &h).unwrap()
            })
            .collect();
        let rho = average_spectrogram(&filtered, &phi).unwrap();
        let se = 1.0 / 2000f64.sqrt();
        let worst = rho
            .rho()
            .values()
            .iter()
            .zip(th.values.values())
            .filter(|(_, &t)| t > 1e-3)
            .map(|(a, t)| (a - t).abs() / (t * se))
            .fold(0.0, f64::max);
        assert!(worst < 5.0, "standardized sup gap {worst}");
        let total = (rho.rho().sum() - th.values.sum()).abs() / th.values.sum();
        assert!(total < 0.02, "relative mass gap {total}");
    }
}
