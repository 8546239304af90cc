//! One run of the pilot-based protocol: thresholds adapt, the receiver
//! asks for an offset change when errors pile up, and the error falls.

use molcomm_noma::protocol::{run_protocol, ProtocolConfig, Schedule};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let cfg = ProtocolConfig {
        n_iter: 200,
        ..ProtocolConfig::default()
    };
    let t = run_protocol(&Scenario::baseline(2), &cfg, &Schedule::default(), 2024)?;
    for r in t.records.iter().filter(|r| r.iteration % 20 == 0 || r.beacon) {
        println!(
            "iter {:4}  P_e,sys {:.3e}  I_WCAM {:7.1}  beacon {:5}  offsets {:?}",
            r.iteration,
            r.p_e_sys,
            r.i_wcam,
            r.beacon,
            r.offsets.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
