use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maskrec::harness::config::{parse_list, Preset, Scenario};
use maskrec::harness::verify::{print_report, DEFAULT_N_LIST};
use maskrec::harness::{run_simulate, run_spectrum, run_sweep, run_verify, SweepAxis, VerifyOptions};
use maskrec::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "maskrec", version, about = "Time-frequency mask recovery from filtered noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run seeded trials; write trials.csv and images of the first trial.
    Simulate(Common),
    /// Repeat the trials over values of K, sigma or disc measure; write summary.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept field: K, sigma or measure.
        #[arg(long)]
        axis: String,
        /// Comma-separated ascending values.
        #[arg(long)]
        values: String,
    },
    /// Eigenvalues of the localization operator; write spectrum.csv.
    Spectrum(Common),
    /// Check the numerical identities at small sizes; exit 1 on any failure.
    Verify {
        /// Comma-separated sizes in [8, 64].
        #[arg(long, default_value_t = DEFAULT_N_LIST.map(|n| n.to_string()).join(","))]
        n_list: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Negative control: scale the window by this factor.
        #[arg(long, hide = true)]
        corrupt_window_norm: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Key/value scenario file, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting scenario: figure1-left or figure1-right.
    #[arg(long, default_value = "figure1-left")]
    scenario_preset: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "MASKREC_THREADS")]
    threads: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = self.scenario_preset.parse::<Preset>()?.scenario();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(t) = self.trials {
            s.trials = t;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not KEY=VALUE")))?;
            s.set(k, v)?;
        }
        s.validate()?;
        Ok(s)
    }
}

fn fmt_rates(r_list: &[f64], rates: &[f64]) -> String {
    r_list.iter().zip(rates).map(|(r, x)| format!("r={r}: {:.0}%", 100.0 * x)).collect::<Vec<_>>().join(", ")
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(c) => {
            let s = c.scenario()?;
            let out = run_simulate(&s, &c.out_dir, c.threads)?;
            println!(
                "{} trials written to {}; contained: {}",
                out.trials.len(),
                c.out_dir.display(),
                fmt_rates(&s.r_list, &out.success_rates)
            );
            Ok(0)
        }
        Command::Sweep { common, axis, values } => {
            let s = common.scenario()?;
            let axis: SweepAxis = axis.parse()?;
            let rows = run_sweep(&s, axis, &parse_list(&values)?, &common.out_dir, common.threads)?;
            for r in &rows {
                println!(
                    "{axis}={}: median sym_diff {:.4}, mean ratio {:.4}; contained: {}",
                    r.value,
                    r.median_sym_diff,
                    r.mean_ratio,
                    fmt_rates(&s.r_list, &r.success_rates)
                );
            }
            Ok(0)
        }
        Command::Spectrum(c) => {
            let s = c.scenario()?;
            let rep = run_spectrum(&s, &c.out_dir)?;
            println!(
                "|Omega| = {:.6}, perimeter = {:.6}, trace = {:.12}, largeness {} (rhs {:.4}), \
                 plateau violations {}",
                rep.truth.measure(),
                rep.truth.perimeter(),
                rep.spectrum.trace(),
                if rep.largeness.pass { "passes" } else { "fails" },
                rep.largeness.rhs,
                rep.plateau_violations
            );
            Ok(0)
        }
        Command::Verify { n_list, seed, corrupt_window_norm } => {
            let sizes = parse_list(&n_list)?
                .into_iter()
                .map(|x| {
                    if x.fract() == 0.0 && x > 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(Error::Config(format!("not a size: {x}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let report = run_verify(&sizes, seed, &VerifyOptions { corrupt_window_norm })?;
            print_report(&report);
            if report.passed() {
                Ok(0)
            } else {
                for c in report.failures() {
                    eprintln!("failed: {c}");
                }
                Ok(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("maskrec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
