//! Simulated error rates against the exact ones, with 3-sigma bands.

use molcomm_noma::analytic::Engine;
use molcomm_noma::gains::GainMatrix;
use molcomm_noma::mcs::{run_mcs, Detection, RunPlan};
use molcomm_noma::optimizer::optimize_thresholds;
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let engine = Engine::new();
    for (snr, offsets) in [(-20.0, vec![0.0, 0.3]), (-30.0, vec![0.0, 0.0]), (10.0, vec![0.0, 0.0])] {
        let mut s = Scenario::baseline(2).with_offsets(offsets.clone());
        s.set_snr_db(snr);
        let g = GainMatrix::build(&s)?;
        let tree = optimize_thresholds(&engine, &g, s.physical.noise_mean)?;
        let exact = engine.noma(&g, s.physical.noise_mean, &tree)?;
        let plan = RunPlan::new(Detection::Noma { tree }, &s, 42).with_symbols(200_000);
        let emp = run_mcs(&s, &plan)?;
        println!(
            "SNR {snr:5.1} dB offsets {offsets:?}: exact {:.4e}  simulated {:.4e}  3 sigma {:.1e}  agree {}",
            exact.system,
            emp.p_e_sys,
            3.0 * emp.sigma_sys(&exact.per_tx),
            emp.agrees_with(&exact)
        );
    }
    Ok(())
}
