//! A seed ensemble under a stepped SNR schedule: the mean error around each
//! change point.

use molcomm_noma::protocol::{member_seed, run_seed_ensemble, ProtocolConfig, Schedule};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let cfg = ProtocolConfig {
        n_iter: 400,
        n_eval: 500,
        ..ProtocolConfig::default()
    };
    let schedule = Schedule::snr_steps(cfg.n_iter);
    let seeds: Vec<u64> = (0..20).map(|i| member_seed(5, i)).collect();
    let (_, rows) = run_seed_ensemble(&Scenario::baseline(2), &cfg, &schedule, &seeds)?;
    let mean = |a: usize, b: usize| rows[a..b].iter().map(|r| r.mean).sum::<f64>() / (b - a) as f64;
    for b in schedule.breakpoints() {
        println!(
            "change at {b:3}: before {:.3e}, just after {:.3e}, 80-99 after {:.3e}",
            mean(b - 20, b),
            mean(b, b + 10),
            mean(b + 80, b + 100)
        );
    }
    Ok(())
}
