//! Exact error probabilities of NOMA, MDMA and TDMA at the default setup.

use molcomm_noma::analytic::Engine;
use molcomm_noma::ma_schemes::Scheme;
use molcomm_noma::optimizer::optimize_scheme;
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let engine = Engine::new();
    for (label, offsets) in [("synchronized", vec![0.0, 0.0]), ("offset by T/2", vec![0.0, 0.5])] {
        for snr in [f64::INFINITY, 0.0, -20.0] {
            let mut s = Scenario::baseline(2).with_offsets(offsets.clone());
            s.set_snr_db(snr);
            println!("{label}, SNR {snr} dB");
            for scheme in [Scheme::Noma, Scheme::Mdma, Scheme::Tdma] {
                let opt = optimize_scheme(&engine, &s, scheme)?;
                let r = &opt.result;
                println!(
                    "  {:5} P_e = {:?}  sys {:.3e}  I_sys {:.4}  thresholds {:?}",
                    scheme.name(),
                    r.per_tx.iter().map(|p| format!("{p:.2e}")).collect::<Vec<_>>(),
                    r.system,
                    r.mi_system,
                    opt.thresholds
                );
            }
        }
    }
    Ok(())
}
