//! Hit probability of a passive receiver and the resulting gain matrix for
//! two transmitters at different distances.

use molcomm_noma::channel::{hit_probability, peak_time};
use molcomm_noma::gains::GainMatrix;
use molcomm_noma::scenario::{Scenario, MICRON};

fn main() -> molcomm_noma::Result<()> {
    let mut s = Scenario::baseline(2).with_isi_length(2).with_offsets(vec![0.0, 0.3]);
    s.physical.distances = vec![8.0 * MICRON, 12.0 * MICRON];
    let p = &s.physical;

    for (i, &d) in p.distances.iter().enumerate() {
        let tp = peak_time(d, p.diffusion, 0.0)?;
        println!("TX {} at {:.0} um: peak after {:.4} s", i + 1, d / MICRON, tp);
        for t in [0.25 * tp, tp, 4.0 * tp, 1.0, 2.0] {
            println!("  P_hit({t:.4} s) = {:.3e}", hit_probability(t, d, p)?);
        }
    }

    // gains.get(i, j, l): mean molecules from TX i, l slots back, at TX j's sampling time.
    let g = GainMatrix::build(&s)?;
    println!("\nmean contributions with N_TX = {:?}", s.tx.emitted);
    for j in 0..2 {
        for i in 0..2 {
            let row: Vec<String> = (0..=s.isi_length())
                .map(|l| format!("{:10.2}", g.get(i, j, l)))
                .collect();
            println!("  sampler {} <- TX {}: {}", j + 1, i + 1, row.join(" "));
        }
    }
    Ok(())
}
