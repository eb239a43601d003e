//! Long-running recovery checks, run with `--ignored`.

use simodel::dynamics::{run_trial, InitSpec, Schedule, SgdConfig};
use simodel::landscape::LinkFunction;
use simodel::measures::InputDistribution;

fn gegenbauer_config(init: InitSpec, eps: f64, k: f64) -> SgdConfig {
    let d = 100;
    let schedule = Schedule::SGe3 { exponent: 4 };
    let mut c = SgdConfig::new(
        LinkFunction::gegenbauer_orthonormal(4, d),
        InputDistribution::sphere(d),
        schedule,
        eps,
    );
    c.max_steps = schedule.horizon(d, eps, k);
    c.init = init;
    c.seed = 5;
    c
}

#[test]
#[ignore = "about a minute per trial"]
fn gegenbauer_planted_above_zero_recovers_at_small_step() {
    let planted = gegenbauer_config(InitSpec::Planted { m0: 0.4 }, 0.05, 0.2);
    let random = gegenbauer_config(InitSpec::HalfSphere, 0.05, 0.2);
    for k in 0..4 {
        assert!(run_trial(&planted, k).unwrap().hitting_time(0.9).is_some());
        assert!(run_trial(&random, k).unwrap().hitting_time(0.9).is_none());
    }
}

#[test]
fn gegenbauer_planted_collapses_to_equator_at_large_step() {
    let mut c = gegenbauer_config(InitSpec::Planted { m0: 0.4 }, 0.5, 1.0);
    c.max_steps = 20_000;
    for k in 0..3 {
        let t = run_trial(&c, k).unwrap();
        assert!((t.m_initial - 0.4).abs() < 1e-12);
        assert!(t.m_final.abs() < 0.2, "{}", t.m_final);
    }
}
