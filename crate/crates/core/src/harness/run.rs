//! The `simulate`, `sweep` and `spectrum` commands.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::config::Scenario;
use super::output::{fmt_f64, mean, median, r_column, write_csv, write_field_pgm};
use super::trial::{run_trial_full, run_trials, thread_pool, Prepared, TrialResult};
use crate::error::{Error, Result};
use crate::locop::{check_largeness, spectrum, Largeness, LocOpSpectrum};
use crate::maskgeom::{Mask, ShapeSpec};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn trials_header(r_list: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "trial",
        "seed",
        "n",
        "K",
        "sigma",
        "noise",
        "sym_diff",
        "perimeter",
        "containment_radius",
        "ratio",
        "estimate_measure",
        "threshold",
        "max_rho",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(r_list.iter().map(|&r| r_column("success_r", r)));
    h.push("wall_time_s".into());
    h
}

pub fn trial_row(s: &Scenario, t: &TrialResult) -> Vec<String> {
    let mut row = vec![
        t.trial_index.to_string(),
        t.seed.to_string(),
        s.n.to_string(),
        s.k.to_string(),
        fmt_f64(s.sigma),
        s.noise.to_string(),
        fmt_f64(t.error.sym_diff_measure),
        fmt_f64(t.error.perimeter),
        fmt_f64(t.error.containment_radius),
        fmt_f64(t.error.ratio),
        fmt_f64(t.estimate_measure),
        fmt_f64(t.threshold),
        fmt_f64(t.max_rho),
    ];
    row.extend(t.success_at_r.iter().map(|&b| u8::from(b).to_string()));
    row.push(format!("{:.6}", t.wall_time));
    row
}

/// Fraction of trials contained at each radius of the scenario's `r_list`.
pub fn success_rates(results: &[TrialResult], r_count: usize) -> Vec<f64> {
    (0..r_count)
        .map(|j| {
            results.iter().filter(|t| t.success_at_r[j]).count() as f64 / results.len() as f64
        })
        .collect()
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub trials: Vec<TrialResult>,
    pub success_rates: Vec<f64>,
}

/// Runs every trial, writes `trials.csv`, and images of the first trial.
pub fn run_simulate(s: &Scenario, out_dir: &Path, threads: Option<usize>) -> Result<SimulateOutcome> {
    let p = Prepared::new(s)?;
    let pool = thread_pool(threads)?;
    ensure_dir(out_dir)?;
    let first = run_trial_full(&p, 0)?;
    let trials = run_trials(&p, &pool)?;
    let rows: Vec<Vec<String>> = trials.iter().map(|t| trial_row(s, t)).collect();
    write_csv(&out_dir.join("trials.csv"), &trials_header(&s.r_list), &rows)?;
    fs::write(out_dir.join("scenario.txt"), s.to_config_text())?;
    p.truth.save_pgm(&out_dir.join("truth.pgm"))?;
    first.estimate.mask.save_pgm(&out_dir.join("estimate.pgm"))?;
    p.truth.symmetric_difference(&first.estimate.mask)?.save_pgm(&out_dir.join("symdiff.pgm"))?;
    write_field_pgm(out_dir, "rho", first.rho.rho())?;
    let success_rates = success_rates(&trials, s.r_list.len());
    Ok(SimulateOutcome { trials, success_rates })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    Sigma,
    Measure,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "K",
            SweepAxis::Sigma => "sigma",
            SweepAxis::Measure => "measure",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "K" | "k" => Ok(SweepAxis::K),
            "sigma" => Ok(SweepAxis::Sigma),
            "measure" => Ok(SweepAxis::Measure),
            other => Err(Error::config(format!(
                "unknown sweep axis '{other}' (expected K, sigma or measure)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub measure: f64,
    pub perimeter: f64,
    pub mean_sym_diff: f64,
    pub median_sym_diff: f64,
    pub mean_ratio: f64,
    pub success_rates: Vec<f64>,
    /// Per-trial outcomes, used for paired comparisons across the sweep.
    pub trials: Vec<TrialResult>,
}

/// Scenario with the swept field set to `value`.
pub fn sweep_point(s: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario> {
    let mut out = s.clone();
    match axis {
        SweepAxis::K => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::config(format!("K values must be positive integers, got {value}")));
            }
            out.k = value as usize;
        }
        SweepAxis::Sigma => out.sigma = value,
        SweepAxis::Measure => match &s.shape {
            ShapeSpec::Disc { center, .. } => {
                out.shape = ShapeSpec::Disc { center: *center, measure: value }
            }
            other => {
                return Err(Error::config(format!(
                    "measure sweeps need a disc shape, got '{other}'"
                )))
            }
        },
    }
    out.validate()?;
    Ok(out)
}

/// One summary row per value, written to `summary.csv`. A K sweep also writes
/// `decay_fit.csv` with the fitted failure decay rate per radius.
pub fn run_sweep(
    s: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("sweep values must be sorted ascending"));
    }
    let points = values.iter().map(|&v| sweep_point(s, axis, v)).collect::<Result<Vec<_>>>()?;
    let pool = thread_pool(threads)?;
    ensure_dir(out_dir)?;
    let mut rows = Vec::with_capacity(points.len());
    let mut base: Option<Prepared> = None;
    for (point, &value) in points.iter().zip(values) {
        // K and sigma sweeps share the truth and the operator
        let p = match (&base, axis) {
            (Some(b), SweepAxis::K | SweepAxis::Sigma) => {
                b.with_noise(point.k, point.sigma, point.noise)?
            }
            _ => Prepared::new(point)?,
        };
        let trials = run_trials(&p, &pool)?;
        let sym: Vec<f64> = trials.iter().map(|t| t.error.sym_diff_measure).collect();
        let ratio: Vec<f64> = trials.iter().map(|t| t.error.ratio).collect();
        rows.push(SweepRow {
            value,
            measure: p.truth.measure(),
            perimeter: p.truth.perimeter(),
            mean_sym_diff: mean(&sym),
            median_sym_diff: median(&sym),
            mean_ratio: mean(&ratio),
            success_rates: success_rates(&trials, s.r_list.len()),
            trials,
        });
        if base.is_none() {
            base = Some(p);
        }
    }
    write_summary(&out_dir.join("summary.csv"), axis, s, &rows)?;
    if axis == SweepAxis::K {
        let fits = decay_fits(&rows, &s.r_list);
        let header: Vec<String> =
            ["r", "rate", "intercept", "points"].iter().map(|s| s.to_string()).collect();
        let body = fits
            .iter()
            .map(|f| {
                vec![fmt_f64(f.r), fmt_f64(f.rate), fmt_f64(f.intercept), f.points.to_string()]
            })
            .collect::<Vec<_>>();
        write_csv(&out_dir.join("decay_fit.csv"), &header, &body)?;
    }
    Ok(rows)
}

fn write_summary(path: &Path, axis: SweepAxis, s: &Scenario, rows: &[SweepRow]) -> Result<()> {
    let mut header: Vec<String> = [
        "axis",
        "value",
        "trials",
        "measure",
        "perimeter",
        "mean_sym_diff",
        "median_sym_diff",
        "mean_ratio",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(s.r_list.iter().map(|&r| r_column("success_r", r)));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                axis.to_string(),
                fmt_f64(r.value),
                r.trials.len().to_string(),
                fmt_f64(r.measure),
                fmt_f64(r.perimeter),
                fmt_f64(r.mean_sym_diff),
                fmt_f64(r.median_sym_diff),
                fmt_f64(r.mean_ratio),
            ];
            row.extend(r.success_rates.iter().map(|&x| fmt_f64(x)));
            row
        })
        .collect::<Vec<_>>();
    write_csv(path, &header, &body)
}

/// Least-squares fit of `ln(failure rate) = intercept - rate * K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub r: f64,
    pub rate: f64,
    pub intercept: f64,
    /// Sweep points with a failure rate strictly between 0 and 1.
    pub points: usize,
}

pub fn decay_fits(rows: &[SweepRow], r_list: &[f64]) -> Vec<DecayFit> {
    r_list
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|row| {
                    let fail = 1.0 - row.success_rates[j];
                    (fail > 0.0 && fail < 1.0).then(|| (row.value, fail.ln()))
                })
                .collect();
            let (rate, intercept) = if pts.len() < 2 {
                (f64::NAN, f64::NAN)
            } else {
                let (mx, my) = (
                    pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64,
                    pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64,
                );
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let slope = sxy / sxx;
                (-slope, my - slope * mx)
            };
            DecayFit { r, rate, intercept, points: pts.len() }
        })
        .collect()
}

#[derive(Debug)]
pub struct SpectrumReport {
    pub spectrum: LocOpSpectrum,
    pub largeness: Largeness,
    pub plateau_violations: usize,
    pub truth: Mask,
}

/// Eigenvalues of `H_Omega` with the largeness verdict; noise fields are ignored.
pub fn spectrum_report(s: &Scenario) -> Result<SpectrumReport> {
    let p = Prepared::new(s)?;
    let spec = spectrum(&p.h, p.truth.measure())?;
    let largeness = check_largeness(&p.truth, &p.g)?;
    Ok(SpectrumReport {
        plateau_violations: spec.plateau_violations(),
        spectrum: spec,
        largeness,
        truth: p.truth,
    })
}

/// Writes `spectrum.csv`, one row per eigenvalue.
pub fn run_spectrum(s: &Scenario, out_dir: &Path) -> Result<SpectrumReport> {
    let rep = spectrum_report(s)?;
    ensure_dir(out_dir)?;
    let header: Vec<String> = [
        "index",
        "lambda",
        "measure",
        "perimeter",
        "trace",
        "largeness_pass",
        "largeness_rhs",
        "plateau_violations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let trace = rep.spectrum.trace();
    let body = rep
        .spectrum
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(m, &l)| {
            vec![
                (m + 1).to_string(),
                fmt_f64(l),
                fmt_f64(rep.truth.measure()),
                fmt_f64(rep.truth.perimeter()),
                fmt_f64(trace),
                u8::from(rep.largeness.pass).to_string(),
                fmt_f64(rep.largeness.rhs),
                rep.plateau_violations.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(&out_dir.join("spectrum.csv"), &header, &body)?;
    Ok(rep)
}
