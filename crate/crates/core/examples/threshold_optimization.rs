//! Optimal SIC thresholds and the error curve around them.

use molcomm_noma::analytic::Engine;
use molcomm_noma::gains::GainMatrix;
use molcomm_noma::optimizer::{optimize_thresholds, threshold_scan};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let engine = Engine::new();
    let s = Scenario::baseline(2).with_emitted(vec![1e6, 5e5]);
    let g = GainMatrix::build(&s)?;
    let noise = s.physical.noise_mean;

    let tree = optimize_thresholds(&engine, &g, noise)?;
    println!("optimal tree {:?}", tree.levels());
    println!("P_e per TX {:?}", engine.noma(&g, noise, &tree)?.per_tx);

    let (tau1, rows) = threshold_scan(&engine, &g, noise, 700)?;
    println!("\nscan (TX 1 root optimum {tau1}):");
    for r in rows.iter().step_by(50) {
        println!(
            "  tau {:4}  P_e,1 {:.3e}  P_e,2 {:.3e}",
            r.tau, r.p_e_1, r.p_e_2_coupled
        );
    }
    Ok(())
}
