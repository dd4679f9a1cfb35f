//! Discrete Gabor analysis and synthesis on the full `n x n` time-frequency lattice.
//!
//! A signal of length `n` lives on the cyclic group `Z_n`. Sample `k` stands for
//! continuous time `(k - n/2) / sqrt(n)`, so the time-frequency plane is an
//! `n x n` torus of cells with side `1/sqrt(n)` and measure `1/n`.
//!
//! The transform uses hop 1 and all `n` frequencies,
//!
//! ```text
//! V(x, xi) = n^{-1/2} sum_t f(t) conj(g(t - x)) exp(-2 pi i xi t / n),
//! ```
//!
//! which is an isometry from `C^n` into the lattice with counting norm whenever
//! `||g|| = 1`. A squared modulus `|V|^2` on the lattice is therefore a mass per
//! cell; multiplying by `n` gives the corresponding continuous density.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

pub type C64 = Complex64;

/// Number of wrap-around periods summed when periodizing a window.
const PERIODIZATION_PERIODS: i64 = 5;

/// Discretization of the time-frequency plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TfGrid {
    n: usize,
}

impl TfGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::config(format!("grid size must be at least 4, got {n}")));
        }
        Ok(TfGrid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Measure of a single lattice cell, `1/n`.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Side length of a lattice cell, `1/sqrt(n)`.
    #[inline]
    pub fn cell_side(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    /// Total measure of the plane, equal to `n`.
    #[inline]
    pub fn plane_measure(&self) -> f64 {
        self.n as f64
    }

    /// Number of lattice cells, `n^2`.
    #[inline]
    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn index(&self, x: usize, xi: usize) -> usize {
        x * self.n + xi
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n, idx % self.n)
    }

    /// Shortest cyclic offset of an index difference, in cells.
    #[inline]
    pub fn wrap_offset(&self, d: usize) -> usize {
        let d = d % self.n;
        d.min(self.n - d)
    }

    /// Torus norm of the lattice point `(x, xi)` in continuous units.
    pub fn torus_norm(&self, x: usize, xi: usize) -> f64 {
        let a = self.wrap_offset(x) as f64;
        let b = self.wrap_offset(xi) as f64;
        (a * a + b * b).sqrt() * self.cell_side()
    }

    /// Torus distance between two lattice points in continuous units.
    pub fn torus_distance(&self, z: (usize, usize), w: (usize, usize)) -> f64 {
        let n = self.n;
        self.torus_norm((z.0 + n - w.0 % n) % n, (z.1 + n - w.1 % n) % n)
    }

    /// Plane diameter of the torus in continuous units.
    pub fn diameter(&self) -> f64 {
        let h = (self.n / 2) as f64;
        (2.0 * h * h).sqrt() * self.cell_side()
    }

    /// Continuous time coordinate of sample `k`.
    #[inline]
    pub fn time_of(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.cell_side()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowLabel {
    /// `2^{1/4} exp(-pi t^2)`.
    Gaussian,
    /// The Gaussian multiplied by `t^2`.
    GaussianT2,
    Custom,
}

impl fmt::Display for WindowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowLabel::Gaussian => "gaussian",
            WindowLabel::GaussianT2 => "gaussian_t2",
            WindowLabel::Custom => "custom",
        })
    }
}

impl FromStr for WindowLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(WindowLabel::Gaussian),
            "gaussian_t2" | "gaussian-t2" => Ok(WindowLabel::GaussianT2),
            "custom" => Ok(WindowLabel::Custom),
            other => Err(Error::config(format!("unknown window label '{other}'"))),
        }
    }
}

/// A unit-norm window on the grid.
#[derive(Clone, Debug)]
pub struct Window {
    grid: TfGrid,
    samples: Vec<C64>,
    label: WindowLabel,
}

impl Window {
    /// Builds a custom window, normalizing it to unit norm.
    pub fn from_samples(grid: TfGrid, samples: Vec<C64>) -> Result<Self> {
        check_len(grid.n(), samples.len())?;
        let norm = l2_norm(&samples);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::config("window samples must have finite, nonzero norm"));
        }
        let samples = samples.into_iter().map(|s| s / norm).collect();
        Ok(Window { grid, samples, label: WindowLabel::Custom })
    }

    /// Returns a copy with every sample multiplied by `factor`, breaking the
    /// unit-norm invariant. Only meant for negative controls in verification.
    #[doc(hidden)]
    pub fn with_corrupted_norm(&self, factor: f64) -> Self {
        Window {
            grid: self.grid,
            samples: self.samples.iter().map(|s| s * factor).collect(),
            label: self.label,
        }
    }

    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn label(&self) -> WindowLabel {
        self.label
    }

    /// Sample at a cyclic index.
    #[inline]
    pub fn at(&self, k: isize) -> C64 {
        let n = self.grid.n() as isize;
        self.samples[k.rem_euclid(n) as usize]
    }
}

/// Builds one of the two analytic windows, periodized over the `n`-cycle and
/// normalized to unit norm. The window is centered at index `n/2`.
pub fn make_window(grid: TfGrid, label: WindowLabel) -> Result<Window> {
    let n = grid.n();
    let side = grid.cell_side();
    let period = n as f64 * side;
    let amp = 2f64.powf(0.25);
    let gaussian = |k: usize| -> f64 {
        let t = grid.time_of(k);
        (-PERIODIZATION_PERIODS / 2..=PERIODIZATION_PERIODS / 2)
            .map(|p| {
                let s = t + p as f64 * period;
                amp * (-PI * s * s).exp()
            })
            .sum()
    };
    let raw: Vec<C64> = match label {
        WindowLabel::Gaussian => (0..n).map(|k| C64::new(gaussian(k), 0.0)).collect(),
        WindowLabel::GaussianT2 => (0..n)
            .map(|k| {
                let t = grid.time_of(k);
                C64::new(gaussian(k) * t * t, 0.0)
            })
            .collect(),
        WindowLabel::Custom => {
            return Err(Error::config("custom windows are built from samples, not by label"))
        }
    };
    let mut w = Window::from_samples(grid, raw)?;
    w.label = label;
    Ok(w)
}

/// Complex values on the lattice, indexed `(x, xi)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TfMatrix {
    grid: TfGrid,
    values: Vec<C64>,
}

impl TfMatrix {
    pub fn zeros(grid: TfGrid) -> Self {
        TfMatrix { grid, values: vec![C64::new(0.0, 0.0); grid.cells()] }
    }

    pub fn from_values(grid: TfGrid, values: Vec<C64>) -> Result<Self> {
        check_len(grid.cells(), values.len())?;
        Ok(TfMatrix { grid, values })
    }

    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, xi: usize) -> C64 {
        self.values[self.grid.index(x, xi)]
    }

    /// Counting-measure energy `sum |V(z)|^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Counting-measure inner product `sum self(z) conj(other(z))`.
    pub fn inner(&self, other: &TfMatrix) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }

    /// Squared modulus per cell.
    pub fn spectrogram(&self) -> TfField {
        TfField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }
}

/// Real values on the lattice, indexed `(x, xi)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TfField {
    grid: TfGrid,
    values: Vec<f64>,
}

impl TfField {
    pub fn zeros(grid: TfGrid) -> Self {
        TfField { grid, values: vec![0.0; grid.cells()] }
    }

    pub fn from_values(grid: TfGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.cells(), values.len())?;
        Ok(TfField { grid, values })
    }

    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, xi: usize) -> f64 {
        self.values[self.grid.index(x, xi)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Continuous `L^1` norm: `sum |v| * cell_measure`.
    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_measure()
    }

    pub fn scaled(&self, c: f64) -> TfField {
        TfField { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }
}

/// FFT plans for repeated analysis and synthesis on one grid.
#[derive(Clone)]
pub struct GaborPlan {
    grid: TfGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for GaborPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaborPlan").field("grid", &self.grid).finish()
    }
}

impl GaborPlan {
    pub fn new(grid: TfGrid) -> Self {
        let mut planner = FftPlanner::new();
        GaborPlan {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
            scale: 1.0 / (grid.n() as f64).sqrt(),
        }
    }

    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn analyze(&self, f: &[C64], g: &Window) -> Result<TfMatrix> {
        self.check_window(g)?;
        check_len(self.grid.n(), f.len())?;
        let n = self.grid.n();
        let mut out = TfMatrix::zeros(self.grid);
        let gs = g.samples();
        for (x, row) in out.values.chunks_exact_mut(n).enumerate() {
            for (t, slot) in row.iter_mut().enumerate() {
                *slot = f[t] * gs[(t + n - x) % n].conj();
            }
            self.forward.process(row);
            for v in row.iter_mut() {
                *v *= self.scale;
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, coeffs: &TfMatrix, g: &Window) -> Result<Vec<C64>> {
        self.check_window(g)?;
        if coeffs.grid != self.grid {
            return Err(Error::Dimension { expected: self.grid.n(), actual: coeffs.grid.n() });
        }
        let n = self.grid.n();
        let gs = g.samples();
        let mut out = vec![C64::new(0.0, 0.0); n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for (x, row) in coeffs.values.chunks_exact(n).enumerate() {
            if row.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                continue;
            }
            buf.copy_from_slice(row);
            self.inverse.process(&mut buf);
            for (t, o) in out.iter_mut().enumerate() {
                *o += buf[t] * gs[(t + n - x) % n];
            }
        }
        for o in out.iter_mut() {
            *o *= self.scale;
        }
        Ok(out)
    }

    fn check_window(&self, g: &Window) -> Result<()> {
        if g.grid != self.grid {
            return Err(Error::Dimension { expected: self.grid.n(), actual: g.grid.n() });
        }
        Ok(())
    }
}

/// Short-time Fourier transform of `f` with window `g` on the full lattice.
pub fn stft(f: &[C64], g: &Window) -> Result<TfMatrix> {
    GaborPlan::new(g.grid()).analyze(f, g)
}

/// Adjoint of [`stft`]; inverts it on its range.
pub fn istft(coeffs: &TfMatrix, g: &Window) -> Result<Vec<C64>> {
    GaborPlan::new(g.grid()).synthesize(coeffs, g)
}

/// `exp(2 pi i k / n)` for `k = 0..n`.
pub(crate) fn unit_roots(n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect()
}

/// Time-frequency shift `pi(z) f(t) = exp(2 pi i xi t / n) f(t - x)`.
pub fn tf_shift(f: &[C64], z: (usize, usize)) -> Vec<C64> {
    let n = f.len();
    let roots = unit_roots(n);
    let (x, xi) = (z.0 % n, z.1 % n);
    (0..n).map(|t| roots[(xi * t) % n] * f[(t + n - x) % n]).collect()
}

/// `sum_t a(t) conj(b(t))`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn l2_norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Reproducing kernel `K_g(z, w) = <pi(w) g, pi(z) g>`.
///
/// With the lattice normalization, `V f(z) = cell_measure * sum_w V f(w) K_g(z, w)`.
pub fn reproducing_kernel(g: &Window, z: (usize, usize), w: (usize, usize)) -> Result<C64> {
    let n = g.grid().n();
    if z.0 >= n || z.1 >= n || w.0 >= n || w.1 >= n {
        return Err(Error::config(format!("lattice point out of range for n = {n}")));
    }
    Ok(inner(&tf_shift(g.samples(), w), &tf_shift(g.samples(), z)))
}

/// Cross-ambiguity mass `|V_phi g(z)|^2` per cell. Sums to one for unit windows.
pub fn ambiguity_mass(g: &Window, phi: &Window) -> Result<TfField> {
    Ok(stft(g.samples(), phi)?.spectrogram())
}

/// First moment `int |V_phi g(z)|^2 |z| dz` of the cross-ambiguity density.
pub fn window_moment(g: &Window, phi: &Window) -> Result<f64> {
    let mass = ambiguity_mass(g, phi)?;
    let grid = g.grid();
    let n = grid.n();
    Ok((0..grid.cells())
        .map(|i| mass.values()[i] * grid.torus_norm(i / n, i % n))
        .sum())
}

/// Continuous `L^1` norm `int |V_phi phi|` of a window's ambiguity function.
///
/// Diagnostic only; no estimator depends on it.
pub fn ambiguity_l1(phi: &Window) -> Result<f64> {
    let v = stft(phi.samples(), phi)?;
    let n = phi.grid().n() as f64;
    Ok(v.values().iter().map(|c| c.norm() * n.sqrt()).sum::<f64>() / n)
}

/// Cyclic 2-D convolution `(a * b)(z) = sum_w a(w) b(z - w)` on the lattice.
pub fn cyclic_convolve(a: &TfField, b: &TfField) -> Result<TfField> {
    let grid = a.grid();
    if b.grid() != grid {
        return Err(Error::Dimension { expected: grid.n(), actual: b.grid().n() });
    }
    let n = grid.n();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let transform = |vals: &[f64], fft: &Arc<dyn Fft<f64>>| -> Vec<C64> {
        let mut buf: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
        fft2(&mut buf, n, fft);
        buf
    };
    let mut prod: Vec<C64> = transform(a.values(), &fwd)
        .into_iter()
        .zip(transform(b.values(), &fwd))
        .map(|(x, y)| x * y)
        .collect();
    fft2(&mut prod, n, &inv);
    let scale = 1.0 / grid.cells() as f64;
    TfField::from_values(grid, prod.iter().map(|c| c.re * scale).collect())
}

fn fft2(buf: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            buf[r * n + c] = col[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TfGrid {
        TfGrid::new(n).unwrap()
    }

    fn det_signal(n: usize, salt: u64) -> Vec<C64> {
        // Small deterministic pseudo-random signal, independent of the crate RNG.
        let mut s = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| C64::new(next(), next())).collect()
    }

    #[test]
    fn grid_rejects_small_sizes() {
        assert!(TfGrid::new(3).is_err());
        let g = grid(16);
        assert!((g.cell_measure() * g.cells() as f64 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_unit_real_and_symmetric() {
        let w = make_window(grid(64), WindowLabel::Gaussian).unwrap();
        assert!((l2_norm(w.samples()) - 1.0).abs() < 1e-12);
        for j in 1..32 {
            let a = w.samples()[32 + j];
            let b = w.samples()[32 - j];
            assert!(a.im == 0.0 && (a - b).norm() < 1e-12);
        }
        // peak at the center
        assert!(w.samples()[32].re >= w.samples()[31].re);
    }

    #[test]
    fn gaussian_t2_vanishes_at_center() {
        let w = make_window(grid(64), WindowLabel::GaussianT2).unwrap();
        assert_eq!(w.samples()[32].norm(), 0.0);
        assert!((l2_norm(w.samples()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_is_config_error() {
        assert!(matches!("hann".parse::<WindowLabel>(), Err(Error::Config(_))));
        assert!(make_window(grid(16), WindowLabel::Custom).is_err());
    }

    #[test]
    fn stft_of_window_at_origin() {
        let g = make_window(grid(32), WindowLabel::Gaussian).unwrap();
        let v = stft(g.samples(), &g).unwrap();
        assert!((v.get(0, 0) - C64::new(1.0 / 32f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stft_of_zero_vanishes() {
        let g = make_window(grid(16), WindowLabel::Gaussian).unwrap();
        let v = stft(&vec![C64::new(0.0, 0.0); 16], &g).unwrap();
        assert_eq!(v.energy(), 0.0);
        assert!(istft(&TfMatrix::zeros(grid(16)), &g).unwrap().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_length_mismatch() {
        let g = make_window(grid(16), WindowLabel::Gaussian).unwrap();
        assert!(matches!(stft(&vec![C64::new(1.0, 0.0); 15], &g), Err(Error::Dimension { .. })));
        let other = TfMatrix::zeros(grid(8));
        assert!(istft(&other, &g).is_err());
    }

    /// Direct summation of the defining formula.
    fn stft_bruteforce(f: &[C64], g: &Window) -> Vec<C64> {
        let n = f.len();
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            for xi in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..n {
                    let phase = -2.0 * PI * ((xi * t) % n) as f64 / n as f64;
                    acc += f[t] * g.at(t as isize - x as isize).conj() * C64::from_polar(1.0, phase);
                }
                out.push(acc / (n as f64).sqrt());
            }
        }
        out
    }

    #[test]
    fn delta_stft_matches_direct_sum() {
        let n = 16;
        let g = make_window(grid(n), WindowLabel::Gaussian).unwrap();
        let mut delta = vec![C64::new(0.0, 0.0); n];
        delta[0] = C64::new(1.0, 0.0);
        let v = stft(&delta, &g).unwrap();
        let oracle = stft_bruteforce(&delta, &g);
        for x in 0..n {
            for xi in 0..n {
                let expect = g.at(-(x as isize)).norm() / (n as f64).sqrt();
                assert!((v.get(x, xi).norm() - expect).abs() < 1e-12);
                assert!((v.get(x, xi) - oracle[x * n + xi]).norm() < 1e-12);
            }
        }
        let back = istft(&v, &g).unwrap();
        for (t, b) in back.iter().enumerate() {
            assert!((b - delta[t]).norm() < 1e-10);
        }
    }

    #[test]
    fn random_signal_matches_direct_sum() {
        let n = 12;
        let g = make_window(grid(n), WindowLabel::GaussianT2).unwrap();
        let f = det_signal(n, 3);
        let v = stft(&f, &g).unwrap();
        for (a, b) in v.values().iter().zip(stft_bruteforce(&f, &g)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn isometry_and_inverse() {
        let n = 32;
        let g = make_window(grid(n), WindowLabel::Gaussian).unwrap();
        let plan = GaborPlan::new(grid(n));
        for salt in 0..100 {
            let f = det_signal(n, salt);
            let v = plan.analyze(&f, &g).unwrap();
            let nf: f64 = f.iter().map(|c| c.norm_sqr()).sum();
            assert!((v.energy() - nf).abs() < 1e-10);
            let back = plan.synthesize(&v, &g).unwrap();
            assert!(back.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-10));
        }
    }

    #[test]
    fn adjoint_consistency() {
        let n = 16;
        let gr = grid(n);
        let g = make_window(gr, WindowLabel::GaussianT2).unwrap();
        for salt in 0..10 {
            let f = det_signal(n, salt);
            let coeffs: Vec<C64> = (0..n).flat_map(|k| det_signal(n, 1000 + salt * 31 + k as u64)).collect();
            let big_f = TfMatrix::from_values(gr, coeffs).unwrap();
            let lhs = stft(&f, &g).unwrap().inner(&big_f);
            let rhs = inner(&f, &istft(&big_f, &g).unwrap());
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn covariance_under_shifts() {
        let n = 16;
        let g = make_window(grid(n), WindowLabel::Gaussian).unwrap();
        let f = det_signal(n, 9);
        let z0 = (3, 5);
        let v = stft(&f, &g).unwrap();
        let vs = stft(&tf_shift(&f, z0), &g).unwrap();
        for x in 0..n {
            for xi in 0..n {
                let a = vs.get(x, xi).norm();
                let b = v.get((x + n - z0.0) % n, (xi + n - z0.1) % n).norm();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kernel_diagonal_and_bound() {
        let n = 16;
        let g = make_window(grid(n), WindowLabel::GaussianT2).unwrap();
        assert!((reproducing_kernel(&g, (2, 3), (2, 3)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        for x in 0..n {
            for xi in 0..n {
                assert!(reproducing_kernel(&g, (0, 0), (x, xi)).unwrap().norm() <= 1.0 + 1e-12);
            }
        }
        assert!(reproducing_kernel(&g, (n, 0), (0, 0)).is_err());
    }

    #[test]
    fn reproducing_formula_constant_is_cell_measure() {
        // Brute-force check of the discrete reproducing formula at n = 8.
        let n = 8;
        let gr = grid(n);
        let g = make_window(gr, WindowLabel::Gaussian).unwrap();
        let f = det_signal(n, 77);
        let v = stft(&f, &g).unwrap();
        for x in 0..n {
            for xi in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for wx in 0..n {
                    for wxi in 0..n {
                        acc += v.get(wx, wxi) * reproducing_kernel(&g, (x, xi), (wx, wxi)).unwrap();
                    }
                }
                assert!((acc * gr.cell_measure() - v.get(x, xi)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_moment_near_continuum_value() {
        // For phi = g = Gaussian, |V_g g|^2 = exp(-pi |z|^2) and the moment is 1/2.
        let g = make_window(grid(64), WindowLabel::Gaussian).unwrap();
        let m = window_moment(&g, &g).unwrap();
        assert!((m - 0.5).abs() < 0.01, "moment {m}");
        let mass = ambiguity_mass(&g, &g).unwrap();
        assert!((mass.sum() - 1.0).abs() < 1e-12);
        // ||V_g g||_1 = int exp(-pi|z|^2/2) = 2 in the continuum.
        assert!((ambiguity_l1(&g).unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn cyclic_convolution_matches_direct_sum() {
        let n = 8;
        let gr = grid(n);
        let a: Vec<f64> = det_signal(n * n, 4).iter().map(|c| c.re).collect();
        let b: Vec<f64> = det_signal(n * n, 5).iter().map(|c| c.im).collect();
        let fa = TfField::from_values(gr, a.clone()).unwrap();
        let fb = TfField::from_values(gr, b.clone()).unwrap();
        let conv = cyclic_convolve(&fa, &fb).unwrap();
        for x in 0..n {
            for xi in 0..n {
                let mut acc = 0.0;
                for wx in 0..n {
                    for wxi in 0..n {
                        acc += a[wx * n + wxi] * b[((x + n - wx) % n) * n + (xi + n - wxi) % n];
                    }
                }
                assert!((conv.get(x, xi) - acc).abs() < 1e-12);
            }
        }
    }
}
