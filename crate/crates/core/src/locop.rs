//! The time-frequency localization operator `H_Omega = V* chi_Omega V`, its
//! spectrum, the auxiliary field `theta` and the largeness condition.
//!
//! All lattice sums below are in counting units, which coincide with the
//! continuous integrals `int ... dz` once spectrogram values are read as
//! densities (`n |V|^2`) integrated against the cell measure `1/n`.

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::maskgeom::{boundary_distance, Mask};
use crate::tfcore::{
    ambiguity_mass, cyclic_convolve, window_moment, GaborPlan, TfField, TfGrid, Window, C64,
};

/// Tolerated eigenvalue excursion outside `[0, 1]` before clamping.
pub const EIGEN_RANGE_TOL: f64 = 1e-8;

/// Eigenvalue floor guaranteed on the first `|Omega|/2` indices under largeness.
pub const PLATEAU_LEVEL: f64 = 0.75;

fn same_grid(mask: &Mask, g: &Window) -> Result<TfGrid> {
    if mask.grid() != g.grid() {
        return Err(Error::Dimension { expected: mask.grid().n(), actual: g.grid().n() });
    }
    Ok(mask.grid())
}

/// Matrix of `f -> istft(chi_Omega * stft(f, g), g)`.
///
/// Entries are summed from the kernel
/// `k(t, s) = (1/n) sum_x g(t-x) conj(g(s-x)) C_x(t-s)`, where `C_x` is the
/// inverse DFT of row `x` of the mask. Only the lower triangle is computed; the
/// upper one is its conjugate mirror.
pub fn assemble_locop(mask: &Mask, g: &Window) -> Result<DMatrix<C64>> {
    let grid = same_grid(mask, g)?;
    let n = grid.n();
    let inverse = FftPlanner::new().plan_fft_inverse(n);
    let gs = g.samples();
    let mut h = DMatrix::<C64>::zeros(n, n);
    let mut row_kernel = vec![C64::new(0.0, 0.0); n];
    for x in 0..n {
        let mut any = false;
        for (xi, slot) in row_kernel.iter_mut().enumerate() {
            let on = mask.get(x, xi);
            any |= on;
            *slot = C64::new(if on { 1.0 } else { 0.0 }, 0.0);
        }
        if !any {
            continue;
        }
        inverse.process(&mut row_kernel);
        for t in 0..n {
            let gt = gs[(t + n - x) % n];
            if gt.re == 0.0 && gt.im == 0.0 {
                continue;
            }
            for s in 0..=t {
                let gs_ = gs[(s + n - x) % n].conj();
                h[(t, s)] += gt * gs_ * row_kernel[(t + n - s) % n];
            }
        }
    }
    let scale = grid.cell_measure();
    for t in 0..n {
        h[(t, t)] = C64::new(h[(t, t)].re * scale, 0.0);
        for s in 0..t {
            let v = h[(t, s)] * scale;
            h[(t, s)] = v;
            h[(s, t)] = v.conj();
        }
    }
    Ok(h)
}

/// Eigen-decomposition of `H_Omega`, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct LocOpSpectrum {
    grid: TfGrid,
    eigenvalues: Vec<f64>,
    /// Column `m` holds `f_m`.
    eigenvectors: DMatrix<C64>,
    omega_measure: f64,
}

impl LocOpSpectrum {
    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, m: usize) -> Vec<C64> {
        self.eigenvectors.column(m).iter().copied().collect()
    }

    pub fn omega_measure(&self) -> f64 {
        self.omega_measure
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Number of indices `m <= |Omega|/2` (1-based) with `lambda_m < 3/4`.
    pub fn plateau_violations(&self) -> usize {
        let upto = ((self.omega_measure / 2.0).floor() as usize).min(self.eigenvalues.len());
        self.eigenvalues[..upto].iter().filter(|&&l| l < PLATEAU_LEVEL).count()
    }
}

/// Full dense decomposition of a Hermitian operator matrix.
pub fn spectrum(h: &DMatrix<C64>, omega_measure: f64) -> Result<LocOpSpectrum> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension { expected: n, actual: h.ncols() });
    }
    let grid = TfGrid::new(n)?;
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let l = eig.eigenvalues[src];
        if !l.is_finite() || l < -EIGEN_RANGE_TOL || l > 1.0 + EIGEN_RANGE_TOL {
            return Err(Error::Model(format!("eigenvalue {l} outside [0, 1]")));
        }
        eigenvalues.push(l.clamp(0.0, 1.0));
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(LocOpSpectrum { grid, eigenvalues, eigenvectors, omega_measure })
}

/// Assembles and decomposes `H_Omega` in one step.
pub fn locop_spectrum(mask: &Mask, g: &Window) -> Result<LocOpSpectrum> {
    spectrum(&assemble_locop(mask, g)?, mask.measure())
}

/// `max_{m,k < m_max} | sum_{z in Omega} V f_m(z) conj(V f_k(z)) - lambda_m delta_{mk} |`.
pub fn double_orthogonality_defect(
    spec: &LocOpSpectrum,
    mask: &Mask,
    g: &Window,
    m_max: usize,
) -> Result<f64> {
    let grid = same_grid(mask, g)?;
    if spec.grid != grid {
        return Err(Error::Dimension { expected: grid.n(), actual: spec.grid.n() });
    }
    let m_max = m_max.min(grid.n());
    let plan = GaborPlan::new(grid);
    let coeffs = (0..m_max)
        .map(|m| plan.analyze(&spec.eigenvector(m), g))
        .collect::<Result<Vec<_>>>()?;
    let inside: Vec<usize> = (0..grid.cells()).filter(|&i| mask.cells()[i]).collect();
    let mut worst = 0f64;
    for m in 0..m_max {
        for k in 0..m_max {
            let gram: C64 = inside
                .iter()
                .map(|&i| coeffs[m].values()[i] * coeffs[k].values()[i].conj())
                .sum();
            let target = if m == k { spec.eigenvalues[m] } else { 0.0 };
            worst = worst.max((gram - target).norm());
        }
    }
    Ok(worst)
}

/// `theta(z) = sum_m |lambda_m V_phi f_m(z)|^2`, read as a density.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaField {
    pub values: TfField,
}

impl ThetaField {
    pub fn get(&self, x: usize, xi: usize) -> f64 {
        self.values.get(x, xi)
    }

    pub fn l1(&self) -> f64 {
        self.values.l1()
    }
}

/// `sum_m w(lambda_m) n |stft(f_m, phi)(z)|^2` over eigenvectors with nonzero weight.
fn weighted_eigen_spectrogram(
    spec: &LocOpSpectrum,
    phi: &Window,
    weight: impl Fn(f64) -> f64,
) -> Result<TfField> {
    let grid = spec.grid;
    if phi.grid() != grid {
        return Err(Error::Dimension { expected: grid.n(), actual: phi.grid().n() });
    }
    let plan = GaborPlan::new(grid);
    let density = grid.n() as f64;
    let mut acc = TfField::zeros(grid);
    for (m, &l) in spec.eigenvalues.iter().enumerate() {
        let w = weight(l);
        if w == 0.0 {
            continue;
        }
        let v = plan.analyze(&spec.eigenvector(m), phi)?;
        for (a, c) in acc.values_mut().iter_mut().zip(v.values()) {
            *a += w * density * c.norm_sqr();
        }
    }
    Ok(acc)
}

/// The auxiliary field `theta`. The density factor `n` makes the full-mask
/// case exactly `theta = 1`; its mean at unit noise variance is `E rho`.
pub fn theta(spec: &LocOpSpectrum, phi: &Window) -> Result<ThetaField> {
    Ok(ThetaField { values: weighted_eigen_spectrogram(spec, phi, |l| l * l)? })
}

/// `chi_Omega * |V_phi g|^2`, the smoothed mask.
pub fn smoothed_mask(mask: &Mask, g: &Window, phi: &Window) -> Result<TfField> {
    let grid = same_grid(mask, g)?;
    let chi = TfField::from_values(
        grid,
        mask.cells().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
    )?;
    cyclic_convolve(&chi, &ambiguity_mass(g, phi)?)
}

/// `max_z | sum_m lambda_m |V_phi f_m(z)|^2 - (chi_Omega * |V_phi g|^2)(z) |`,
/// comparing the eigen route against a direct FFT convolution.
pub fn theta_first_moment(
    spec: &LocOpSpectrum,
    phi: &Window,
    mask: &Mask,
    g: &Window,
) -> Result<f64> {
    let eigen = weighted_eigen_spectrogram(spec, phi, |l| l)?;
    let conv = smoothed_mask(mask, g, phi)?;
    Ok(eigen
        .values()
        .iter()
        .zip(conv.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Largeness {
    pub pass: bool,
    /// `|Omega|`.
    pub lhs: f64,
    /// `max(2, 8 M(g, g) |dOmega|)`.
    pub rhs: f64,
    pub perimeter: f64,
    pub moment: f64,
}

/// `|Omega| >= max(2, 8 int |V_g g(z)|^2 |z| dz * |dOmega|)`.
pub fn check_largeness(mask: &Mask, g: &Window) -> Result<Largeness> {
    same_grid(mask, g)?;
    let moment = window_moment(g, g)?;
    let perimeter = mask.perimeter();
    let lhs = mask.measure();
    let rhs = (8.0 * moment * perimeter).max(2.0);
    Ok(Largeness { pass: lhs >= rhs, lhs, rhs, perimeter, moment })
}

/// Both sides of `||chi * psi - (int psi) chi||_1 <= int |psi(z)| |z| dz * |dOmega|`
/// for a lattice mass `psi`.
pub fn regularization_bound(mask: &Mask, psi: &TfField) -> Result<(f64, f64)> {
    let grid = mask.grid();
    if psi.grid() != grid {
        return Err(Error::Dimension { expected: grid.n(), actual: psi.grid().n() });
    }
    let n = grid.n();
    let chi = TfField::from_values(
        grid,
        mask.cells().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
    )?;
    let total = psi.sum();
    let conv = cyclic_convolve(&chi, psi)?;
    let lhs = conv
        .values()
        .iter()
        .zip(chi.values())
        .map(|(c, x)| (c - total * x).abs())
        .sum::<f64>()
        * grid.cell_measure();
    let moment: f64 = (0..grid.cells())
        .map(|i| psi.values()[i].abs() * grid.torus_norm(i / n, i % n))
        .sum();
    Ok((lhs, moment * mask.perimeter()))
}

/// Largest excess of `|chi_Omega(z) - theta(z)|` over `4 * tail(R)`, where
/// `R = dist(z, dOmega)` and `tail(R)` is the mass of `psi = |V_phi g|^2` at
/// `|w| >= R`. Non-positive when the far-field decay bound holds everywhere.
pub fn far_field_excess(theta: &ThetaField, mask: &Mask, psi: &TfField) -> Result<f64> {
    let grid = mask.grid();
    let n = grid.n();
    let mut radial: Vec<(f64, f64)> =
        (0..grid.cells()).map(|i| (grid.torus_norm(i / n, i % n), psi.values()[i])).collect();
    radial.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix[k] = mass of entries k.. in radial order
    let mut suffix = vec![0.0; radial.len() + 1];
    for k in (0..radial.len()).rev() {
        suffix[k] = suffix[k + 1] + radial[k].1;
    }
    let tail = |r: f64| -> f64 {
        let k = radial.partition_point(|e| e.0 < r);
        suffix[k]
    };
    let dist = boundary_distance(mask);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.cells() {
        let chi = if mask.cells()[i] { 1.0 } else { 0.0 };
        let gap = (chi - theta.values.values()[i]).abs();
        let bound = 4.0 * tail(dist.values()[i]);
        worst = worst.max(gap - bound);
    }
    Ok(worst)
}
