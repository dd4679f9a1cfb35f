//! Scenario configuration, seeded parallel trials, verification, and artifacts.

pub mod config;
pub mod output;
pub mod run;
pub mod trial;
pub mod verify;

pub use config::{Preset, Scenario};
pub use run::{
    run_simulate, run_spectrum, run_sweep, spectrum_report, SimulateOutcome, SpectrumReport,
    SweepAxis, SweepRow,
};
pub use trial::{run_trial, run_trials, thread_pool, Prepared, TrialResult};
pub use verify::{run_verify, VerifyOptions, VerifyReport};
