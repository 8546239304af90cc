//! Monte-Carlo link-level simulator.
//!
//! Slots are simulated in fixed-size batches. Each batch owns three
//! streams keyed by its index (data bits, reception, jitter) and starts by
//! simulating `warmup` untallied slots, so a batch's tallies depend only on
//! the seed and the batch index. Batches run concurrently and their counts
//! are added, which keeps results identical for any worker count.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{system_mi, BepResult};
use crate::channel::{poisson_draw_unchecked, RedrawPolicy};
use crate::error::{Error, Result};
use crate::gains::GainMatrix;
use crate::ma_schemes::{detect_scalar, masked_sum, sic_detect_mask, ScalarThresholds, Scheme, ThresholdTree};
use crate::rng::{Purpose, StreamSource};
use crate::scenario::Scenario;

pub const DEFAULT_BATCH_SLOTS: u64 = 4096;
pub const DEFAULT_MIN_ERRORS: u64 = 100;
pub const DEFAULT_MAX_SYMBOLS: u64 = 100_000_000;

// Batches per adaptive round; fixed so the stopping point does not depend
// on the worker count.
const ROUND_BATCHES: u64 = 16;
// Frames up to this many bits get a precomputed table of Poisson samplers.
const TABLE_BITS: usize = 16;

/// Scheme plus its thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Detection {
    Mdma { thresholds: ScalarThresholds },
    Tdma { thresholds: ScalarThresholds },
    Noma { tree: ThresholdTree },
}

impl Detection {
    pub fn scheme(&self) -> Scheme {
        match self {
            Detection::Mdma { .. } => Scheme::Mdma,
            Detection::Tdma { .. } => Scheme::Tdma,
            Detection::Noma { .. } => Scheme::Noma,
        }
    }

    fn num_tx(&self) -> usize {
        match self {
            Detection::Mdma { thresholds } | Detection::Tdma { thresholds } => thresholds.len(),
            Detection::Noma { tree } => tree.num_tx(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StopRule {
    /// Exactly this many tallied slots.
    Fixed { symbols: u64 },
    /// Until every TX has `min_errors` errors or `max_symbols` slots ran.
    Adaptive { min_errors: u64, max_symbols: u64 },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Adaptive {
            min_errors: DEFAULT_MIN_ERRORS,
            max_symbols: DEFAULT_MAX_SYMBOLS,
        }
    }
}

/// How a simulation is run. Streams are keyed by (seed, purpose, batch
/// index) with `batch_slots` tallied slots per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub detection: Detection,
    pub stop: StopRule,
    /// Untallied slots simulated at the start of every batch; at least L.
    pub warmup: usize,
    pub seed: u64,
    pub batch_slots: u64,
}

impl RunPlan {
    /// Adaptive plan with warm-up L.
    pub fn new(detection: Detection, scenario: &Scenario, seed: u64) -> Self {
        RunPlan {
            detection,
            stop: StopRule::default(),
            warmup: scenario.isi_length(),
            seed,
            batch_slots: DEFAULT_BATCH_SLOTS,
        }
    }

    pub fn with_symbols(mut self, symbols: u64) -> Self {
        self.stop = StopRule::Fixed { symbols };
        self
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if self.warmup < scenario.isi_length() {
            return Err(Error::config("mcs.warmup", "warm-up must cover at least L slots"));
        }
        if self.batch_slots == 0 {
            return Err(Error::config("mcs.batch_slots", "must be >= 1"));
        }
        if self.detection.num_tx() != scenario.num_tx() {
            return Err(Error::Dimension("thresholds and scenario disagree on K".into()));
        }
        match self.stop {
            StopRule::Fixed { symbols: 0 } => Err(Error::config("mcs.symbols", "symbol count must be >= 1")),
            StopRule::Adaptive { max_symbols: 0, .. } => {
                Err(Error::config("mcs.max_symbols", "symbol cap must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        lo: (center - half).max(0.0).min(p),
        hi: (center + half).min(1.0).max(p),
    }
}

/// p ± 3 sqrt(p(1-p)/n), clipped to [0, 1].
pub fn three_sigma_interval(errors: u64, trials: u64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let p = errors as f64 / trials as f64;
    let s = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    Interval {
        lo: (p - s).max(0.0),
        hi: (p + s).min(1.0),
    }
}

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxEstimate {
    /// `confusion[s][ŝ]`.
    pub confusion: [[u64; 2]; 2],
    pub trials: u64,
    pub errors: u64,
    pub p_e: f64,
    pub wilson_95: Interval,
    pub three_sigma: Interval,
}

impl TxEstimate {
    fn from_confusion(confusion: [[u64; 2]; 2]) -> Self {
        let trials = confusion.iter().flatten().sum();
        let errors = confusion[0][1] + confusion[1][0];
        TxEstimate {
            confusion,
            trials,
            errors,
            p_e: if trials == 0 {
                0.0
            } else {
                errors as f64 / trials as f64
            },
            wilson_95: wilson_interval(errors, trials, Z_95),
            three_sigma: three_sigma_interval(errors, trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResult {
    pub scheme: Scheme,
    /// Tallied slots.
    pub slots: u64,
    pub per_tx: Vec<TxEstimate>,
    pub p_e_sys: f64,
}

impl EmpiricalResult {
    /// Binomial standard deviation of P̂_e,sys for true per-TX error
    /// probabilities `p`, taken as (1/K) Σ σ_i. This bounds the exact value
    /// from above whatever the correlation between TXs.
    pub fn sigma_sys(&self, p: &[f64]) -> f64 {
        let k = self.per_tx.len() as f64;
        self.per_tx
            .iter()
            .zip(p)
            .map(|(t, &p)| {
                if t.trials == 0 {
                    0.0
                } else {
                    (p * (1.0 - p) / t.trials as f64).sqrt()
                }
            })
            .sum::<f64>()
            / k
    }

    /// |P̂_e,sys - P_e,sys| within 3σ, σ taken at the analytic per-TX values.
    pub fn agrees_with(&self, analytic: &BepResult) -> bool {
        (self.p_e_sys - analytic.system).abs() <= 3.0 * self.sigma_sys(&analytic.per_tx)
    }

    pub fn total_errors(&self) -> u64 {
        self.per_tx.iter().map(|t| t.errors).sum()
    }
}

/// Plug-in MI of each TX from its 2x2 joint histogram of (s, ŝ).
pub fn empirical_mi(result: &EmpiricalResult) -> Result<Vec<f64>> {
    result
        .per_tx
        .iter()
        .map(|t| {
            if t.trials == 0 {
                return Err(Error::domain("empirical MI needs at least one trial"));
            }
            let n = t.trials as f64;
            let c = t.confusion;
            let ps = [(c[0][0] + c[0][1]) as f64 / n, (c[1][0] + c[1][1]) as f64 / n];
            let pr = [(c[0][0] + c[1][0]) as f64 / n, (c[0][1] + c[1][1]) as f64 / n];
            let mut mi = 0.0;
            for s in 0..2 {
                for r in 0..2 {
                    let pj = c[s][r] as f64 / n;
                    if pj > 0.0 {
                        mi += pj * (pj / (ps[s] * pr[r])).log2();
                    }
                }
            }
            Ok(mi.max(0.0))
        })
        .collect()
}

/// System MI from the empirical per-TX values (sum, or mean for TDMA).
pub fn empirical_system_mi(result: &EmpiricalResult) -> Result<f64> {
    Ok(system_mi(&empirical_mi(result)?, result.scheme))
}

/// Draws received counts for a fixed gain matrix. Small frames use a table
/// of samplers indexed by (sampling point, frame bits).
pub(crate) struct Receiver {
    gains: GainMatrix,
    noise: f64,
    table: Option<Vec<Option<Poisson<f64>>>>,
}

impl Receiver {
    pub(crate) fn new(gains: GainMatrix, noise: f64) -> Self {
        let n = gains.frame_bits();
        let table = (n <= TABLE_BITS).then(|| {
            (0..gains.num_tx())
                .flat_map(|j| {
                    let row = gains.row(j).to_vec();
                    (0..1u64 << n).map(move |bits| {
                        let mu = noise + masked_sum(bits, &row);
                        (mu > 0.0).then(|| Poisson::new(mu).expect("finite positive mean"))
                    })
                })
                .collect()
        });
        Receiver { gains, noise, table }
    }

    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, j: usize, frame: u64, rng: &mut R) -> u64 {
        match &self.table {
            Some(t) => match &t[(j << self.gains.frame_bits()) | frame as usize] {
                Some(d) => d.sample(rng) as u64,
                None => 0,
            },
            None => poisson_draw_unchecked(self.noise + masked_sum(frame, self.gains.row(j)), rng),
        }
    }
}

/// Per-slot sampling-time jitter: rebuilds each sampling point's row.
pub(crate) struct JitteredGains<'a> {
    scenario: &'a Scenario,
    peaks: Vec<f64>,
    scratch: GainMatrix,
}

impl<'a> JitteredGains<'a> {
    pub(crate) fn new(scenario: &'a Scenario) -> Self {
        JitteredGains {
            scenario,
            peaks: scenario.peak_times(),
            scratch: GainMatrix::zeros(scenario.num_tx(), scenario.isi_length()),
        }
    }

    pub(crate) fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &GainMatrix {
        let s = self.scenario;
        let dev = s.sampling.draw_deviations(s.num_tx(), rng);
        for (j, d) in dev.into_iter().enumerate() {
            self.scratch
                .fill_row(j, &s.physical, &s.tx.offsets, &s.tx.emitted, self.peaks[j] + d);
        }
        &self.scratch
    }
}

/// Gains with the jitter drawn once, used by the fixed and per-iteration
/// policies.
pub(crate) fn frozen_jitter_gains(scenario: &Scenario, rng: &mut impl Rng) -> GainMatrix {
    JitteredGains::new(scenario).redraw(rng).clone()
}

type Confusion = Vec<[[u64; 2]; 2]>;

struct Context<'a> {
    scenario: &'a Scenario,
    plan: &'a RunPlan,
    source: StreamSource,
    receiver: Receiver,
    per_symbol_jitter: bool,
}

impl Context<'_> {
    fn run_batch(&self, batch: u64, slots: u64) -> Confusion {
        let k = self.scenario.num_tx();
        let n = self.scenario.frame_bits();
        let frame_mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let tx_mask = (1u64 << k) - 1;
        let own_mask: Vec<u64> = (0..k)
            .map(|j| (0..=self.scenario.isi_length()).fold(0u64, |m, l| m | 1 << (l * k + j)))
            .collect();
        let mut bits_rng = self.source.stream(Purpose::DataBits, batch);
        let mut rx_rng = self.source.stream(Purpose::Reception, batch);
        let mut jitter_rng = self.source.stream(Purpose::Jitter, batch);
        let mut jitter = self.per_symbol_jitter.then(|| JitteredGains::new(self.scenario));
        let mut confusion = vec![[[0u64; 2]; 2]; k];
        let mut samples = vec![0u64; k];
        let warmup = self.plan.warmup as u64;
        let first_slot = batch as i128 * self.plan.batch_slots as i128;
        let mut frame = 0u64;
        for s in 0..warmup + slots {
            let global = first_slot + s as i128 - warmup as i128;
            let owner = global.rem_euclid(k as i128) as usize;
            let r: u64 = bits_rng.random();
            let current = match self.plan.detection {
                Detection::Tdma { .. } => (r & 1) << owner,
                _ => r & tx_mask,
            };
            frame = ((frame << k) | current) & frame_mask;
            if s < warmup {
                continue;
            }
            let jittered = jitter.as_mut().map(|j| j.redraw(&mut jitter_rng).clone());
            let draw = |j: usize, frame: u64, rng: &mut rand_chacha::ChaCha8Rng| match &jittered {
                Some(g) => poisson_draw_unchecked(self.scenario.physical.noise_mean + masked_sum(frame, g.row(j)), rng),
                None => self.receiver.draw(j, frame, rng),
            };
            match &self.plan.detection {
                Detection::Noma { tree } => {
                    for (j, x) in samples.iter_mut().enumerate() {
                        *x = draw(j, frame, &mut rx_rng);
                    }
                    let decided = sic_detect_mask(&samples, tree);
                    for (j, c) in confusion.iter_mut().enumerate() {
                        c[((current >> j) & 1) as usize][((decided >> j) & 1) as usize] += 1;
                    }
                }
                Detection::Mdma { thresholds } => {
                    // Each TX has its own molecule type: only its own pulses count.
                    for (j, c) in confusion.iter_mut().enumerate() {
                        let x = draw(j, frame & own_mask[j], &mut rx_rng);
                        c[((current >> j) & 1) as usize][detect_scalar(x, thresholds.get(j)) as usize] += 1;
                    }
                }
                Detection::Tdma { thresholds } => {
                    let x = draw(owner, frame, &mut rx_rng);
                    confusion[owner][((current >> owner) & 1) as usize]
                        [detect_scalar(x, thresholds.get(owner)) as usize] += 1;
                }
            }
        }
        confusion
    }

    fn run_batches(&self, first: u64, total_slots: u64) -> Confusion {
        let b = self.plan.batch_slots;
        let count = total_slots.div_ceil(b);
        let parts: Vec<Confusion> = (0..count)
            .into_par_iter()
            .map(|i| self.run_batch(first + i, b.min(total_slots - i * b)))
            .collect();
        let mut sum = vec![[[0u64; 2]; 2]; self.scenario.num_tx()];
        for p in parts {
            add(&mut sum, &p);
        }
        sum
    }
}

fn add(into: &mut Confusion, other: &Confusion) {
    for (a, b) in into.iter_mut().zip(other) {
        for s in 0..2 {
            for r in 0..2 {
                a[s][r] += b[s][r];
            }
        }
    }
}

/// Simulates `scenario` under `plan`.
pub fn run_mcs(scenario: &Scenario, plan: &RunPlan) -> Result<EmpiricalResult> {
    scenario.validate()?;
    plan.validate(scenario)?;
    let source = StreamSource::new(plan.seed);
    let noise = scenario.physical.noise_mean;
    let jitter = scenario.sampling.jitter_width > 0.0;
    let per_symbol_jitter = jitter && scenario.sampling.redraw_policy == RedrawPolicy::PerSymbol;
    // Without per-symbol redraws the single draw is the run's "iteration".
    let gains = if jitter && !per_symbol_jitter {
        frozen_jitter_gains(scenario, &mut source.stream(Purpose::Jitter, u64::MAX))
    } else {
        GainMatrix::build(scenario)?
    };
    let ctx = Context {
        scenario,
        plan,
        source,
        receiver: Receiver::new(gains, noise),
        per_symbol_jitter,
    };
    let (slots, confusion) = match plan.stop {
        StopRule::Fixed { symbols } => (symbols, ctx.run_batches(0, symbols)),
        StopRule::Adaptive {
            min_errors,
            max_symbols,
        } => {
            let round = ROUND_BATCHES * plan.batch_slots;
            let mut done = 0u64;
            let mut sum = vec![[[0u64; 2]; 2]; scenario.num_tx()];
            while done < max_symbols {
                let slots = round.min(max_symbols - done);
                add(&mut sum, &ctx.run_batches(done / plan.batch_slots, slots));
                done += slots;
                if sum.iter().all(|c| c[0][1] + c[1][0] >= min_errors) {
                    break;
                }
            }
            (done, sum)
        }
    };
    let per_tx: Vec<TxEstimate> = confusion.into_iter().map(TxEstimate::from_confusion).collect();
    let p_e_sys = per_tx.iter().map(|t| t.p_e).sum::<f64>() / per_tx.len() as f64;
    Ok(EmpiricalResult {
        scheme: plan.detection.scheme(),
        slots,
        per_tx,
        p_e_sys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_link(mean: f64) -> Scenario {
        let mut s = Scenario::baseline(1).with_isi_length(0);
        let n = 1e6 * mean / s.reference_mean();
        s.tx.emitted = vec![n];
        s.tx.budget = n.max(1e6);
        s
    }

    #[test]
    fn no_signal_misses_every_one() {
        let s = Scenario::baseline(2).with_emitted(vec![0.0, 0.0]);
        let plan = RunPlan::new(
            Detection::Mdma {
                thresholds: ScalarThresholds::uniform(2, 1),
            },
            &s,
            3,
        )
        .with_symbols(20_000);
        let r = run_mcs(&s, &plan).unwrap();
        for t in &r.per_tx {
            assert_eq!(t.confusion[0][1], 0);
            assert_eq!(t.confusion[1][1], 0);
            assert!(t.three_sigma.contains(0.5));
        }
        let mi = empirical_mi(&r).unwrap();
        assert!(mi.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn single_link_closed_form() {
        let s = single_link(5.0);
        let tree = ThresholdTree::uniform(1, 1);
        let plan = RunPlan::new(Detection::Noma { tree }, &s, 11).with_symbols(1_000_000);
        let r = run_mcs(&s, &plan).unwrap();
        let p = (-5.0f64).exp() / 2.0;
        let sigma = (p * (1.0 - p) / 1e6).sqrt();
        assert!((r.p_e_sys - p).abs() <= 3.0 * sigma, "{} vs {p}", r.p_e_sys);
        assert_eq!(r.per_tx[0].confusion[0][1], 0);
    }

    #[test]
    fn error_free_link_carries_one_bit() {
        let s = single_link(400.0);
        let plan = RunPlan::new(
            Detection::Mdma {
                thresholds: ScalarThresholds(vec![1]),
            },
            &s,
            1,
        )
        .with_symbols(10_000);
        let r = run_mcs(&s, &plan).unwrap();
        assert_eq!(r.per_tx[0].errors, 0);
        assert!((empirical_mi(&r).unwrap()[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn result_does_not_depend_on_thread_count() {
        let mut s = Scenario::baseline(2);
        s.set_snr_db(10.0);
        let tree = ThresholdTree::from_levels(vec![vec![300], vec![10, 300]]).unwrap();
        let plan = RunPlan::new(Detection::Noma { tree }, &s, 5).with_symbols(50_000);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_mcs(&s, &plan).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_mcs(&s, &plan).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn adaptive_stops_on_errors() {
        let s = single_link(5.0);
        let mut plan = RunPlan::new(
            Detection::Mdma {
                thresholds: ScalarThresholds(vec![1]),
            },
            &s,
            2,
        );
        plan.batch_slots = 1000;
        let r = run_mcs(&s, &plan).unwrap();
        assert!(r.per_tx[0].errors >= DEFAULT_MIN_ERRORS);
        assert_eq!(r.slots % (ROUND_BATCHES * 1000), 0);
        plan.stop = StopRule::Adaptive {
            min_errors: 1_000_000,
            max_symbols: 2500,
        };
        assert_eq!(run_mcs(&s, &plan).unwrap().slots, 2500);
    }

    #[test]
    fn tdma_tallies_only_owners() {
        let s = Scenario::baseline(3);
        let plan = RunPlan::new(
            Detection::Tdma {
                thresholds: ScalarThresholds::uniform(3, 1),
            },
            &s,
            9,
        )
        .with_symbols(3000);
        let r = run_mcs(&s, &plan).unwrap();
        assert!(r.per_tx.iter().all(|t| t.trials == 1000));
    }

    #[test]
    fn intervals_contain_estimate() {
        for (e, n) in [(0, 10), (10, 10), (3, 7), (1, 1_000_000)] {
            let p = e as f64 / n as f64;
            assert!(wilson_interval(e, n, Z_95).contains(p));
            assert!(three_sigma_interval(e, n).contains(p));
        }
    }

    #[test]
    fn plan_validation() {
        let s = Scenario::baseline(2);
        let mut plan = RunPlan::new(
            Detection::Mdma {
                thresholds: ScalarThresholds::uniform(2, 1),
            },
            &s,
            0,
        );
        plan.warmup = 0;
        assert!(run_mcs(&s, &plan).is_err());
        plan.warmup = 1;
        plan.detection = Detection::Mdma {
            thresholds: ScalarThresholds::uniform(3, 1),
        };
        assert!(run_mcs(&s, &plan).is_err());
    }
}
