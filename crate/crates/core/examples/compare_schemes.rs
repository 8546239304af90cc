//! Mutual information of MDMA, TDMA and NOMA under several offset cases
//! across SNR.

use molcomm_noma::analytic::Engine;
use molcomm_noma::optimizer::{compare_ma, grid_from_range, OffsetCase, SweepParameter, SweepSpec};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let spec = SweepSpec {
        parameter: SweepParameter::SnrDb,
        grid: grid_from_range(-40.0, 10.0, 20.0)?,
        cases: OffsetCase::ALL.to_vec(),
        random_samples: 40,
        seed: 3,
    };
    let rows = compare_ma(&Engine::new(), &Scenario::baseline(2), &spec)?;
    println!("{:>7} {:>8} {:>8} {:>10}", "snr_db", "scheme", "I_sys", "P_e,sys");
    for r in rows {
        println!("{:7.1} {:>8} {:8.4} {:10.3e}", r.point, r.label, r.mi_system, r.p_e_sys);
    }
    Ok(())
}
