//! Invariant checks at oracle-friendly sizes, each reported as a measured
//! defect against a fixed tolerance.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::locop::{
    assemble_locop, double_orthogonality_defect, regularization_bound, spectrum,
    theta, theta_first_moment,
};
use crate::maskgeom::{make_mask, Mask, ShapeSpec};
use crate::noise::{eigen_coefficients, filter_batch, sample_noise, NoiseKind};
use crate::tfcore::{
    ambiguity_mass, inner, istft, l2_norm, make_window, reproducing_kernel, stft, tf_shift,
    TfGrid, WindowLabel, C64,
};

pub const VERIFY_N_RANGE: (usize, usize) = (8, 64);
pub const DEFAULT_N_LIST: [usize; 3] = [8, 16, 32];

pub const TOL_ISOMETRY: f64 = 1e-12;
pub const TOL_RECONSTRUCTION: f64 = 1e-12;
pub const TOL_REPRODUCING: f64 = 1e-12;
pub const TOL_TRACE: f64 = 1e-9;
pub const TOL_DOUBLE_ORTH: f64 = 1e-8;
pub const TOL_FIRST_MOMENT: f64 = 1e-8;
pub const TOL_THETA_OPERATOR: f64 = 1e-10;
pub const TOL_EXPANSION: f64 = 1e-9;
pub const TOL_PARSEVAL: f64 = 1e-10;
/// Slack on the regularization inequality; the check is one-sided.
pub const TOL_REGULARIZATION: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Multiplies the analysis window's samples, breaking its unit norm.
    pub corrupt_window_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub n: usize,
    pub defect: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.defect <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}  n={:<3} {:<34} defect={:.3e}  tol={:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.n,
            self.name,
            self.defect,
            self.tolerance
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }
}

fn random_signal(rng: &mut ChaCha20Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

fn random_mask(rng: &mut ChaCha20Rng, grid: TfGrid) -> Mask {
    Mask::from_fn(grid, |_, _| rng.random_bool(0.3))
}

fn masks(rng: &mut ChaCha20Rng, grid: TfGrid) -> Result<Vec<(&'static str, Mask)>> {
    let disc = ShapeSpec::Disc { center: None, measure: grid.plane_measure() / 4.0 };
    Ok(vec![
        ("disc", make_mask(grid, &disc)?),
        ("random", random_mask(rng, grid)),
        ("empty", Mask::empty(grid)),
    ])
}

/// Runs every check on every `n`. Fails fast only on configuration errors.
pub fn run_verify(n_list: &[usize], seed: u64, opts: &VerifyOptions) -> Result<VerifyReport> {
    if n_list.is_empty() {
        return Err(Error::config("n-list must not be empty"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| !(VERIFY_N_RANGE.0..=VERIFY_N_RANGE.1).contains(&n)) {
        return Err(Error::config(format!(
            "verification sizes must lie in [{}, {}], got {n}",
            VERIFY_N_RANGE.0, VERIFY_N_RANGE.1
        )));
    }
    let mut report = VerifyReport::default();
    for &n in n_list {
        verify_size(n, seed, opts, &mut report.checks)?;
    }
    Ok(report)
}

fn verify_size(n: usize, seed: u64, opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let grid = TfGrid::new(n)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (n as u64).rotate_left(32));
    let mut push = |name: String, defect: f64, tolerance: f64| {
        // NaN defects must fail
        let defect = if defect.is_nan() { f64::INFINITY } else { defect };
        out.push(Check { name, n, defect, tolerance });
    };
    let clean = make_window(grid, WindowLabel::Gaussian)?;
    let g = match opts.corrupt_window_norm {
        Some(c) => clean.with_corrupted_norm(c),
        None => clean.clone(),
    };
    let t2 = make_window(grid, WindowLabel::GaussianT2)?;

    // transform identities
    let signals: Vec<Vec<C64>> = (0..4).map(|_| random_signal(&mut rng, n)).collect();
    let mut iso = 0f64;
    let mut rec = 0f64;
    for f in &signals {
        let v = stft(f, &g)?;
        let e = l2_norm(f).powi(2);
        iso = iso.max((v.energy() - e).abs() / e);
        let back = istft(&v, &g)?;
        let err: f64 = back.iter().zip(f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        rec = rec.max(err / e.sqrt());
    }
    push("stft isometry".into(), iso, TOL_ISOMETRY);
    push("istft(stft f) = f".into(), rec, TOL_RECONSTRUCTION);

    let f = &signals[0];
    let v = stft(f, &g)?;
    let probes = [(0, 0), (n / 3, n / 2), (n - 1, 1)];
    let mut rep = 0f64;
    for &z in &probes {
        let mut acc = C64::new(0.0, 0.0);
        for wx in 0..n {
            for wxi in 0..n {
                acc += v.get(wx, wxi) * reproducing_kernel(&g, z, (wx, wxi))?;
            }
        }
        rep = rep.max((acc * grid.cell_measure() - v.get(z.0, z.1)).norm());
    }
    push("reproducing formula".into(), rep / l2_norm(f), TOL_REPRODUCING);

    // operator identities
    for (label, mask) in masks(&mut rng, grid)? {
        let h = assemble_locop(&mask, &g)?;
        let trace: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        push(format!("trace = |Omega| ({label})"), (trace - mask.measure()).abs(), TOL_TRACE);
        let spec = match spectrum(&h, mask.measure()) {
            Ok(s) => s,
            Err(e @ (Error::Model(_) | Error::Numeric(_))) => {
                eprintln!("n={n} {label}: {e}");
                push(format!("spectrum in [0, 1] ({label})"), f64::INFINITY, 0.0);
                continue;
            }
            Err(e) => return Err(e),
        };
        push(
            format!("double orthogonality ({label})"),
            double_orthogonality_defect(&spec, &mask, &g, 8)?,
            TOL_DOUBLE_ORTH,
        );
        let spec_t2 = spectrum(&assemble_locop(&mask, &t2)?, mask.measure())?;
        for (pair, s, model) in [("g=phi", &spec, &g), ("g=t2", &spec_t2, &t2)] {
            push(
                format!("theta first moment ({label}, {pair})"),
                theta_first_moment(s, &clean, &mask, model)?,
                TOL_FIRST_MOMENT,
            );
        }
        let th = theta(&spec, &clean)?;
        let mut worst = 0f64;
        for x in 0..n {
            for xi in 0..n {
                let p = DVector::from_vec(tf_shift(clean.samples(), (x, xi)));
                worst = worst.max(((&h * p).norm_squared() - th.get(x, xi)).abs());
            }
        }
        push(format!("theta = |H pi(z) phi|^2 ({label})"), worst, TOL_THETA_OPERATOR);

        let batch = sample_noise(grid, 3, 1.0, NoiseKind::Complex, seed)?;
        let alpha = eigen_coefficients(&batch, &spec)?;
        let filtered = filter_batch(&batch, &h)?;
        let (mut expansion, mut parseval) = (0f64, 0f64);
        for (k, (noise, y)) in batch.realizations().iter().zip(&filtered).enumerate() {
            let mut recon = vec![C64::new(0.0, 0.0); n];
            for (m, &l) in spec.eigenvalues().iter().enumerate() {
                let fm = spec.eigenvector(m);
                for (r, e) in recon.iter_mut().zip(&fm) {
                    *r += alpha[(k, m)] * l * e;
                }
            }
            let err: f64 = recon.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            expansion = expansion.max(err.sqrt() / l2_norm(noise));
            let energy: f64 = (0..n).map(|m| alpha[(k, m)].norm_sqr()).sum();
            let e = inner(noise, noise).re;
            parseval = parseval.max((energy - e).abs() / e);
        }
        push(format!("noise eigen-expansion ({label})"), expansion, TOL_EXPANSION);
        push(format!("coefficient Parseval ({label})"), parseval, TOL_PARSEVAL);

        let (lhs, rhs) = regularization_bound(&mask, &ambiguity_mass(&g, &g)?)?;
        push(format!("regularization bound ({label})"), (lhs - rhs).max(0.0), TOL_REGULARIZATION);
    }
    Ok(())
}

/// Prints each check and a final tally to stdout.
pub fn print_report(report: &VerifyReport) {
    for c in &report.checks {
        println!("{c}");
    }
    let failed = report.failures().len();
    println!("{} checks, {} failed", report.checks.len(), failed);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let rep = run_verify(&[8, 16], 1, &VerifyOptions::default()).unwrap();
        for c in &rep.checks {
            assert!(c.passed(), "{c}");
        }
        assert!(rep.checks.iter().any(|c| c.name.contains("empty")));
    }

    #[test]
    fn corrupted_norm_fails_isometry() {
        let opts = VerifyOptions { corrupt_window_norm: Some(1.01) };
        let rep = run_verify(&[8], 1, &opts).unwrap();
        assert!(!rep.passed());
        let iso = rep.checks.iter().find(|c| c.name == "stft isometry").unwrap();
        assert!(!iso.passed());
        
    }

    #[test]
    fn sizes_are_range_checked() {
        let o = VerifyOptions::default();
        assert!(matches!(run_verify(&[4], 1, &o), Err(Error::Config(_))));
        assert!(matches!(run_verify(&[128], 1, &o), Err(Error::Config(_))));
        assert!(matches!(run_verify(&[], 1, &o), Err(Error::Config(_))));
    }
}
