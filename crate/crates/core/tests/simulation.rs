//! Monte-Carlo simulator against the exact engine, plus the Poisson sampler
//! against its distribution.

use molcomm_noma::analytic::Engine;
use molcomm_noma::channel::draw_poisson;
use molcomm_noma::gains::GainMatrix;
use molcomm_noma::ma_schemes::{ScalarThresholds, Scheme};
use molcomm_noma::mcs::{run_mcs, Detection, RunPlan};
use molcomm_noma::optimizer::{optimize_scheme, optimize_thresholds};
use molcomm_noma::rng::{Purpose, StreamSource};
use molcomm_noma::scenario::Scenario;
use statrs::distribution::{DiscreteCDF, Poisson};

fn scenario(snr: f64, offsets: Vec<f64>, n2: f64, l: usize) -> Scenario {
    let mut s = Scenario::baseline(2)
        .with_isi_length(l)
        .with_offsets(offsets)
        .with_emitted(vec![1e6, n2]);
    s.set_snr_db(snr);
    s
}

#[test]
fn sampler_passes_kolmogorov_smirnov() {
    let n = 100_000;
    let crit = 1.628 / (n as f64).sqrt();
    let source = StreamSource::new(7);
    for (idx, lam) in [0.3, 4.0, 75.0, 2_500.0, 1e6].into_iter().enumerate() {
        let mut rng = source.stream(Purpose::Reception, idx as u64);
        let mut x: Vec<u64> = (0..n).map(|_| draw_poisson(lam, &mut rng).unwrap()).collect();
        x.sort_unstable();
        let dist = Poisson::new(lam).unwrap();
        let mut d: f64 = 0.0;
        let mut i = 0;
        let (lo, hi) = (x[0], x[n - 1]);
        for k in lo..=hi {
            while i < n && x[i] <= k {
                i += 1;
            }
            d = d.max((i as f64 / n as f64 - dist.cdf(k)).abs());
        }
        assert!(d < crit, "lambda {lam}: D = {d}, critical {crit}");
    }
}

#[test]
fn noma_agrees_in_the_noisy_regime() {
    // Error rates between 1e-3 and 0.3, where a 3σ check has teeth.
    let e = Engine::new();
    let cases = [
        scenario(-20.0, vec![0.0, 0.3], 5e5, 1),
        scenario(-30.0, vec![0.0, 0.0], 5e5, 0),
        scenario(-25.0, vec![0.2, 0.7], 1e6, 1),
    ];
    for (i, s) in cases.iter().enumerate() {
        let g = GainMatrix::build(s).unwrap();
        let tree = optimize_thresholds(&e, &g, s.physical.noise_mean).unwrap();
        let exact = e.noma(&g, s.physical.noise_mean, &tree).unwrap();
        let plan = RunPlan::new(Detection::Noma { tree }, s, 100 + i as u64).with_symbols(300_000);
        let emp = run_mcs(s, &plan).unwrap();
        assert!(exact.system > 1e-3, "case {i} is not in the noisy regime");
        assert!(
            emp.agrees_with(&exact),
            "case {i}: simulated {} vs exact {} (3σ = {})",
            emp.p_e_sys,
            exact.system,
            3.0 * emp.sigma_sys(&exact.per_tx)
        );
    }
}

#[test]
fn orthogonal_schemes_agree() {
    let e = Engine::new();
    let s = scenario(-25.0, vec![0.0, 0.0], 1e6, 1);
    for (scheme, seed) in [(Scheme::Mdma, 5), (Scheme::Tdma, 6)] {
        let opt = optimize_scheme(&e, &s, scheme).unwrap();
        let th = ScalarThresholds(opt.thresholds.clone());
        let detection = match scheme {
            Scheme::Mdma => Detection::Mdma { thresholds: th },
            _ => Detection::Tdma { thresholds: th },
        };
        let emp = run_mcs(&s, &RunPlan::new(detection, &s, seed).with_symbols(300_000)).unwrap();
        assert!(
            emp.agrees_with(&opt.result),
            "{scheme:?}: {} vs {}",
            emp.p_e_sys,
            opt.result.system
        );
    }
}

#[test]
fn runs_replay_and_seeds_matter() {
    let s = scenario(-20.0, vec![0.0, 0.4], 1e6, 1);
    let g = GainMatrix::build(&s).unwrap();
    let tree = optimize_thresholds(&Engine::new(), &g, s.physical.noise_mean).unwrap();
    let plan = RunPlan::new(Detection::Noma { tree }, &s, 11).with_symbols(50_000);
    let a = run_mcs(&s, &plan).unwrap();
    assert_eq!(a, run_mcs(&s, &plan).unwrap());
    let other = RunPlan { seed: 12, ..plan };
    assert_ne!(a.per_tx, run_mcs(&s, &other).unwrap().per_tx);
}
