mod common;

use common::{gain, noma_oracle, scalar_oracle};
use molcomm_noma::analytic::Engine;
use molcomm_noma::gains::GainMatrix;
use molcomm_noma::ma_schemes::{ScalarThresholds, ThresholdTree};
use molcomm_noma::optimizer::optimize_thresholds;
use molcomm_noma::scenario::{Scenario, MICRON};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (1usize..=3, 0usize..=1).prop_flat_map(|(k, l)| {
        (
            prop::collection::vec(6.0f64..14.0, k),
            prop::collection::vec(0.0f64..1.0, k),
            prop::collection::vec(1e5f64..1e6, k),
            prop::option::of(-20.0f64..20.0),
        )
            .prop_map(move |(d, off, n, snr)| {
                let mut s = Scenario::baseline(k)
                    .with_isi_length(l)
                    .with_offsets(off)
                    .with_emitted(n);
                s.physical.distances = d.iter().map(|x| x * MICRON).collect();
                s.set_snr_db(snr.unwrap_or(f64::INFINITY));
                s
            })
    })
}

fn random_tree(k: usize, top: u64, seeds: &[u64]) -> ThresholdTree {
    let mut it = seeds.iter().cycle();
    let levels = (0..k)
        .map(|j| (0..1usize << j).map(|_| it.next().unwrap() % (top + 1)).collect())
        .collect();
    ThresholdTree::from_levels(levels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gain_matrix_matches_formula(s in scenario_strategy()) {
        let g = GainMatrix::build(&s).unwrap();
        for i in 0..s.num_tx() {
            for j in 0..s.num_tx() {
                for l in 0..=s.isi_length() {
                    let want = gain(&s, i, j, l);
                    prop_assert!((g.get(i, j, l) - want).abs() <= 1e-12 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn noma_matches_enumeration(s in scenario_strategy(), seeds in prop::collection::vec(any::<u64>(), 7)) {
        let engine = Engine::new();
        let g = GainMatrix::build(&s).unwrap();
        let noise = s.physical.noise_mean;
        let top = (2.0 * g.max_mean() + noise + 5.0) as u64;
        for tree in [random_tree(s.num_tx(), top, &seeds), optimize_thresholds(&engine, &g, noise).unwrap()] {
            let got = engine.noma(&g, noise, &tree).unwrap();
            let want = noma_oracle(&s, &tree);
            for (a, b) in got.per_tx.iter().zip(&want) {
                prop_assert!((a - b).abs() < TOL, "engine {a} vs oracle {b}");
            }
            let mean = want.iter().sum::<f64>() / want.len() as f64;
            prop_assert!((got.system - mean).abs() < TOL);
        }
    }

    #[test]
    fn scalar_schemes_match_enumeration(s in scenario_strategy(), seeds in prop::collection::vec(any::<u64>(), 3)) {
        let engine = Engine::new();
        let g = GainMatrix::build(&s).unwrap();
        let noise = s.physical.noise_mean;
        let top = (2.0 * g.max_mean() + noise + 5.0) as u64;
        let taus: Vec<u64> = (0..s.num_tx()).map(|j| seeds[j] % (top + 1)).collect();
        let th = ScalarThresholds(taus.clone());
        let mdma = engine.mdma(&g, noise, &th).unwrap();
        let tdma = engine.tdma(&g, noise, &th).unwrap();
        for (a, b) in mdma.per_tx.iter().zip(scalar_oracle(&s, &taus, false)) {
            prop_assert!((a - b).abs() < TOL, "mdma {a} vs {b}");
        }
        for (a, b) in tdma.per_tx.iter().zip(scalar_oracle(&s, &taus, true)) {
            prop_assert!((a - b).abs() < TOL, "tdma {a} vs {b}");
        }
    }
}

#[test]
fn closed_form_single_link() {
    // K = 1, L = 0, no noise, tau = 1: an error needs s = 1 and no molecule.
    let engine = Engine::new();
    for lam in [0.5, 5.0, 20.0] {
        let mut s = Scenario::baseline(1).with_isi_length(0);
        let per_molecule = gain(&s, 0, 0, 0) / s.tx.emitted[0];
        s.tx.emitted = vec![lam / per_molecule];
        s.tx.budget = s.tx.emitted[0];
        let g = GainMatrix::build(&s).unwrap();
        let p = engine.noma(&g, 0.0, &ThresholdTree::uniform(1, 1)).unwrap().system;
        let want = (-lam).exp() / 2.0;
        assert!((p - want).abs() < 1e-14 * want.max(1e-300) + 1e-16, "{p} vs {want}");
    }
}
