use molcomm_noma::protocol::{member_seed, run_protocol, run_seed_ensemble, ProtocolConfig, Schedule, Trajectory};
use molcomm_noma::scenario::Scenario;

fn short(n_iter: usize) -> ProtocolConfig {
    ProtocolConfig {
        n_iter,
        n_eval: 300,
        ..ProtocolConfig::default()
    }
}

fn entry_steps(t: &Trajectory) -> u64 {
    t.records
        .windows(2)
        .flat_map(|w| {
            w[0].thresholds
                .iter()
                .zip(&w[1].thresholds)
                .map(|(a, b)| a.abs_diff(*b))
        })
        .max()
        .unwrap_or(0)
}

#[test]
fn replay_is_bit_identical() {
    let s = Scenario::baseline(3);
    let cfg = short(40);
    let a = run_protocol(&s, &cfg, &Schedule::default(), 9).unwrap();
    assert_eq!(a, run_protocol(&s, &cfg, &Schedule::default(), 9).unwrap());
    assert_ne!(a, run_protocol(&s, &cfg, &Schedule::default(), 10).unwrap());
}

#[test]
fn state_stays_in_range() {
    let s = Scenario::baseline(2);
    let cfg = ProtocolConfig {
        enable_ntx_opt: true,
        ..short(80)
    };
    let k = 2.0f64;
    let i_max = cfg.n_pilot as f64 * k / (2f64.powf(k - 1.0) - 1.0);
    let i_min = -(cfg.n_pilot as f64) * k;
    for seed in 0..6 {
        let t = run_protocol(&s, &cfg, &Schedule::default(), member_seed(3, seed)).unwrap();
        for r in &t.records {
            assert!(r.offsets.iter().all(|o| (0.0..1.0).contains(o)), "{:?}", r.offsets);
            assert!((1.0..=s.tx.budget).contains(&r.emitted[1]), "{}", r.emitted[1]);
            assert_eq!(r.emitted[0], s.tx.budget);
            assert!(r.i_wcam >= i_min && r.i_wcam <= i_max, "I_WCAM {}", r.i_wcam);
        }
        // Each pilot moves a consulted entry by at most Δτ.
        assert!(entry_steps(&t) <= cfg.n_pilot as u64 * cfg.delta_tau);
    }
}

#[test]
fn offsets_move_only_on_beacons() {
    let s = Scenario::baseline(2);
    let t = run_protocol(&s, &short(60), &Schedule::default(), 4).unwrap();
    for w in t.records.windows(2) {
        if !w[1].beacon {
            assert_eq!(w[0].offsets, w[1].offsets);
        }
    }
    let frozen = ProtocolConfig {
        delta_s_max: 0.0,
        ..short(60)
    };
    let t = run_protocol(&s, &frozen, &Schedule::default(), 4).unwrap();
    assert!(t.records.windows(2).all(|w| w[0].offsets == w[1].offsets));
}

#[test]
fn ensemble_ignores_worker_count() {
    let s = Scenario::baseline(2);
    let cfg = short(30);
    let seeds: Vec<u64> = (0..6).map(|i| member_seed(1, i)).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_seed_ensemble(&s, &cfg, &Schedule::snr_steps(30), &seeds).unwrap())
    };
    let (ta, sa) = run(1);
    let (tb, sb) = run(3);
    assert_eq!(ta, tb);
    assert_eq!(sa, sb);
}

#[test]
fn error_rate_falls_from_the_initial_thresholds() {
    // Starting from τ = 1 everywhere, the K = 2 ensemble improves markedly.
    let s = Scenario::baseline(2);
    let seeds: Vec<u64> = (0..8).map(|i| member_seed(2, i)).collect();
    let (_, stats) = run_seed_ensemble(&s, &short(150), &Schedule::default(), &seeds).unwrap();
    let head = stats[0].mean;
    let tail = stats[140..].iter().map(|r| r.mean).sum::<f64>() / 10.0;
    assert!(tail < head / 10.0, "head {head}, tail {tail}");
}
