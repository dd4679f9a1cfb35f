//! Paired Monte Carlo comparisons of estimation pipelines.

use maskrec::harness::config::Preset;
use maskrec::harness::trial::{estimate_from_observations, run_trials, thread_pool, Prepared};
use maskrec::noise::sample_noise_trial;
use maskrec::{error_report, NoiseKind};

const R: f64 = 5.05;
const TRIALS: usize = 50;

#[test]
fn complex_noise_through_complexification_matches_direct_pipeline() {
    let mut s = Preset::Figure1Left.scenario();
    s.r_list = vec![R];
    s.trials = TRIALS;
    let p = Prepared::new(&s).unwrap();
    let direct = run_trials(&p, &thread_pool(None).unwrap()).unwrap();
    let direct_rate = direct.iter().filter(|t| t.success_at_r[0]).count() as f64 / TRIALS as f64;

    let mut ok = 0;
    for t in 0..TRIALS as u64 {
        // 2K complex draws pair into K complexified ones
        let b = sample_noise_trial(p.grid, 2 * s.k, 1.0, NoiseKind::Complex, s.seed ^ 0x5eed, t).unwrap();
        let (_, est) = estimate_from_observations(b.realizations(), NoiseKind::Real, &p.h, &p.phi).unwrap();
        if error_report(&p.truth, &est.mask).unwrap().contained_within(R) {
            ok += 1;
        }
    }
    let via_rate = ok as f64 / TRIALS as f64;
    assert!(
        (direct_rate - via_rate).abs() <= 0.10,
        "direct {direct_rate}, complexified complex {via_rate}"
    );
}
