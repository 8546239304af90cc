//! Pilot-symbol adaptation of thresholds, offsets and molecule counts.
//!
//! One iteration runs a threshold block, a worst-case-offset block and,
//! when enabled, a molecule-count block, each on its own pilots, then
//! freezes everything and measures the system BEP on fresh data symbols
//! with real SIC. The link keeps its ISI history across all blocks.
//!
//! All randomness comes from streams keyed by (seed, purpose, iteration,
//! block), so a run is a pure function of its inputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{poisson_draw_unchecked, RedrawPolicy};
use crate::error::{Error, Result};
use crate::gains::GainMatrix;
use crate::ma_schemes::{known_prefix_detect_mask, masked_sum, prefix_of_mask, sic_detect_mask, ThresholdTree};
use crate::mcs::Receiver;
use crate::rng::{mix64, Purpose, StreamSource};
use crate::scenario::{noise_from_snr, Scenario, MICRON};

const BLOCK_THRESHOLDS: u64 = 0;
const BLOCK_WCAM: u64 = 1;
const BLOCK_NTX: u64 = 2;
const BLOCK_EVAL: u64 = 3;
const BLOCK_SHARED: u64 = 4;
const BLOCK_ITERATION_JITTER: u64 = 5;

/// Where the offsets start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialOffsets {
    /// i.i.d. uniform on [0, T), drawn from the run seed.
    #[default]
    Random,
    /// The scenario's own offsets.
    Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_pilot: usize,
    pub n_iter: usize,
    /// Threshold step Δτ in molecules.
    pub delta_tau: u64,
    /// Multiplier α_N of the molecule-count update.
    pub alpha_n: f64,
    /// WCAM delay bound Δ_s,max in seconds.
    pub delta_s_max: f64,
    /// Beacon trigger level; N_pilot/10 when unset.
    pub tau_wcam: Option<f64>,
    /// Feedback erasure probability p_e,f.
    pub p_ef: f64,
    pub enable_wcam: bool,
    pub enable_ntx_opt: bool,
    pub n_eval: usize,
    /// Every tree entry starts here.
    pub tau_init: u64,
    /// Starting N_TX,2 when the molecule-count block runs.
    pub n_tx_init: f64,
    /// Probability that a TX hears a beacon.
    pub beacon_reliability: f64,
    /// Run all algorithms on one pilot block per iteration.
    pub shared_block: bool,
    pub initial_offsets: InitialOffsets,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_pilot: 100,
            n_iter: 1000,
            delta_tau: 1,
            alpha_n: 0.1,
            delta_s_max: 1.0,
            tau_wcam: None,
            p_ef: 0.0,
            enable_wcam: true,
            enable_ntx_opt: false,
            n_eval: 1000,
            tau_init: 1,
            n_tx_init: 1e6,
            beacon_reliability: 1.0,
            shared_block: false,
            initial_offsets: InitialOffsets::Random,
        }
    }
}

impl ProtocolConfig {
    pub fn tau_wcam(&self) -> f64 {
        self.tau_wcam.unwrap_or(self.n_pilot as f64 / 10.0)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.n_pilot == 0 {
            return Err(Error::config("protocol.n_pilot", "must be >= 1"));
        }
        if self.n_eval == 0 {
            return Err(Error::config("protocol.n_eval", "must be >= 1"));
        }
        if self.delta_tau == 0 {
            return Err(Error::config("protocol.delta_tau", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.alpha_n) {
            return Err(Error::config("protocol.alpha_n", "must lie in [0, 1)"));
        }
        if !(self.delta_s_max >= 0.0 && self.delta_s_max.is_finite()) {
            return Err(Error::config("protocol.delta_s_max", "must be finite and >= 0"));
        }
        if !self.tau_wcam().is_finite() {
            return Err(Error::config("protocol.tau_wcam", "must be finite"));
        }
        if !unit(self.p_ef) {
            return Err(Error::config("protocol.p_ef", "must lie in [0, 1]"));
        }
        if !unit(self.beacon_reliability) {
            return Err(Error::config("protocol.beacon_reliability", "must lie in [0, 1]"));
        }
        if self.enable_wcam && scenario.num_tx() < 2 {
            return Err(Error::config(
                "protocol.enable_wcam",
                "the offset mechanism needs at least 2 TXs",
            ));
        }
        if self.enable_ntx_opt {
            if scenario.num_tx() != 2 {
                return Err(Error::Unsupported(
                    "molecule-count adaptation is defined for exactly 2 TXs".into(),
                ));
            }
            let budget = scenario.tx.budget;
            if !(self.n_tx_init >= 1.0 && self.n_tx_init <= budget) {
                return Err(Error::config(
                    "protocol.n_tx_init",
                    format!("must lie in [1, {budget}]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Change {
    SnrDb {
        value: f64,
    },
    /// New distance of one TX (0-based), in micrometres.
    Distance {
        tx: usize,
        micrometers: f64,
    },
}

/// A change applied right before iteration `at` (0-based) runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub at: usize,
    pub change: Change,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<ScheduleEvent>,
}

impl Schedule {
    /// SNR 0 dB, then 33.3, 66.7 and 100 dB at a quarter, half and three
    /// quarters of the run.
    pub fn snr_steps(n_iter: usize) -> Schedule {
        let steps = [0.0, 100.0 / 3.0, 200.0 / 3.0, 100.0];
        Schedule {
            events: steps
                .iter()
                .enumerate()
                .map(|(i, &v)| ScheduleEvent {
                    at: i * n_iter / 4,
                    change: Change::SnrDb { value: v },
                })
                .collect(),
        }
    }

    /// d_1 = 8 µm, then 10 µm and 12 µm at a third and two thirds of the run.
    pub fn distance_steps(n_iter: usize) -> Schedule {
        Schedule {
            events: [8.0, 10.0, 12.0]
                .iter()
                .enumerate()
                .map(|(i, &d)| ScheduleEvent {
                    at: i * n_iter / 3,
                    change: Change::Distance { tx: 0, micrometers: d },
                })
                .collect(),
        }
    }

    /// Iterations at which something changes after the start.
    pub fn breakpoints(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.events.iter().map(|e| e.at).filter(|&a| a > 0).collect();
        b.dedup();
        b
    }

    pub fn validate(&self, scenario: &Scenario, n_iter: usize) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if e.at >= n_iter.max(1) {
                return Err(Error::config(
                    "schedule",
                    format!("event {i} at iteration {} is outside the run of {n_iter}", e.at),
                ));
            }
            if i > 0 && self.events[i - 1].at > e.at {
                return Err(Error::config("schedule", "events must be sorted by iteration"));
            }
            match e.change {
                Change::SnrDb { value } if value.is_nan() => {
                    return Err(Error::config("schedule", "SNR must be a number"));
                }
                Change::Distance { tx, micrometers } => {
                    if tx >= scenario.num_tx() {
                        return Err(Error::config("schedule", format!("no TX {tx}")));
                    }
                    if !(micrometers > 0.0 && micrometers.is_finite()) {
                        return Err(Error::config("schedule", "distance must be > 0"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Live protocol state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolState {
    pub tree: ThresholdTree,
    pub offsets: Vec<f64>,
    pub emitted: Vec<f64>,
    /// I_WCAM at the end of the last offset block.
    pub i_wcam: f64,
    /// Iterations in which the RX sent a beacon.
    pub beacons: Vec<usize>,
    /// Offset-sequence position of each TX (beacons it heard).
    pub sequence_position: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub p_e_sys: f64,
    pub p_e: Vec<f64>,
    pub beacon: bool,
    pub i_wcam: f64,
    pub offsets: Vec<f64>,
    pub emitted: Vec<f64>,
    pub thresholds: Vec<u64>,
}

impl IterationRecord {
    /// Short stable digest of the threshold snapshot.
    pub fn threshold_digest(&self) -> String {
        let h = self
            .thresholds
            .iter()
            .fold(0x243f_6a88_85a3_08d3u64, |h, &t| mix64(h ^ t));
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

/// What one pilot block did.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockOutcome {
    /// Pilot detection errors summed over TXs.
    pub errors: u64,
    pub threshold_updates: u64,
    pub i_wcam: f64,
    pub beacon: bool,
    pub ntx_updates: u64,
}

/// Channel as the protocol sees it: current scenario plus jitter state.
struct Link {
    scenario: Scenario,
    per_symbol: bool,
    deviations: Vec<f64>,
    receiver: Receiver,
    scratch: GainMatrix,
}

impl Link {
    fn new(scenario: Scenario, deviations: Vec<f64>) -> Result<Self> {
        let per_symbol =
            scenario.sampling.jitter_width > 0.0 && scenario.sampling.redraw_policy == RedrawPolicy::PerSymbol;
        let scratch = GainMatrix::zeros(scenario.num_tx(), scenario.isi_length());
        let receiver = Receiver::new(scratch.clone(), 0.0);
        let mut link = Link {
            scenario,
            per_symbol,
            deviations,
            receiver,
            scratch,
        };
        link.rebuild()?;
        Ok(link)
    }

    fn rebuild(&mut self) -> Result<()> {
        let s = &self.scenario;
        s.validate()?;
        if !self.per_symbol {
            let times: Vec<f64> = s
                .peak_times()
                .iter()
                .zip(&self.deviations)
                .map(|(t, d)| t + d)
                .collect();
            let gains = GainMatrix::at_times(&s.physical, &s.tx.offsets, &s.tx.emitted, &times)?;
            self.receiver = Receiver::new(gains, s.physical.noise_mean);
        }
        Ok(())
    }

    fn sample<R: Rng, J: Rng>(&mut self, frame: u64, rx: &mut R, jitter: &mut J, out: &mut [u64]) {
        if self.per_symbol {
            let s = &self.scenario;
            let peaks = s.peak_times();
            let dev = s.sampling.draw_deviations(s.num_tx(), jitter);
            for (j, x) in out.iter_mut().enumerate() {
                self.scratch
                    .fill_row(j, &s.physical, &s.tx.offsets, &s.tx.emitted, peaks[j] + dev[j]);
                *x = poisson_draw_unchecked(s.physical.noise_mean + masked_sum(frame, self.scratch.row(j)), rx);
            }
        } else {
            for (j, x) in out.iter_mut().enumerate() {
                *x = self.receiver.draw(j, frame, rx);
            }
        }
    }
}

/// One protocol run, steppable block by block.
pub struct ProtocolRun {
    config: ProtocolConfig,
    schedule: Schedule,
    source: StreamSource,
    link: Link,
    state: ProtocolState,
    frame: u64,
    iteration: usize,
    samples: Vec<u64>,
}

impl ProtocolRun {
    pub fn new(scenario: &Scenario, config: &ProtocolConfig, schedule: &Schedule, seed: u64) -> Result<Self> {
        scenario.validate()?;
        config.validate(scenario)?;
        schedule.validate(scenario, config.n_iter)?;
        let source = StreamSource::new(seed);
        let k = scenario.num_tx();
        let period = scenario.physical.symbol_period;
        let mut s = scenario.clone();
        if config.initial_offsets == InitialOffsets::Random {
            let mut rng = source.stream(Purpose::InitialOffsets, 0);
            s.tx.offsets = (0..k).map(|_| rng.random::<f64>() * period).collect();
        }
        if config.enable_ntx_opt {
            s.tx.emitted = vec![s.tx.budget, config.n_tx_init];
        }
        let deviations = if s.sampling.jitter_width > 0.0 {
            s.sampling
                .draw_deviations(k, &mut source.stream(Purpose::Jitter, u64::MAX))
        } else {
            vec![0.0; k]
        };
        let mut history = source.stream(Purpose::DataBits, u64::MAX);
        let tx_mask = (1u64 << k) - 1;
        let mut frame = 0u64;
        for _ in 0..s.isi_length() {
            frame = (frame << k) | (history.random::<u64>() & tx_mask);
        }
        let state = ProtocolState {
            tree: ThresholdTree::uniform(k, config.tau_init),
            offsets: s.tx.offsets.clone(),
            emitted: s.tx.emitted.clone(),
            i_wcam: 0.0,
            beacons: Vec::new(),
            sequence_position: vec![0; k],
        };
        let mut run = ProtocolRun {
            config: config.clone(),
            schedule: schedule.clone(),
            source,
            link: Link::new(s, deviations)?,
            state,
            frame,
            iteration: 0,
            samples: vec![0; k],
        };
        run.apply_schedule()?;
        Ok(run)
    }

    pub fn state(&self) -> &ProtocolState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.link.scenario
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn frame_mask(&self) -> u64 {
        let n = self.link.scenario.frame_bits();
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    fn apply_schedule(&mut self) -> Result<()> {
        let due: Vec<Change> = self
            .schedule
            .events
            .iter()
            .filter(|e| e.at == self.iteration)
            .map(|e| e.change)
            .collect();
        if due.is_empty() {
            return Ok(());
        }
        for change in due {
            let s = &mut self.link.scenario;
            match change {
                Change::SnrDb { value } => {
                    s.physical.noise_mean = noise_from_snr(s.reference_mean(), value);
                }
                Change::Distance { tx, micrometers } => s.physical.distances[tx] = micrometers * MICRON,
            }
        }
        self.link.rebuild()
    }

    fn set_offsets(&mut self, offsets: Vec<f64>) -> Result<()> {
        self.state.offsets = offsets.clone();
        self.link.scenario.tx.offsets = offsets;
        self.link.rebuild()
    }

    fn set_emitted(&mut self, emitted: Vec<f64>) -> Result<()> {
        self.state.emitted = emitted.clone();
        self.link.scenario.tx.emitted = emitted;
        self.link.rebuild()
    }

    /// Runs one pilot block with the selected algorithms acting on it.
    fn pilot_block(&mut self, block: u64, thresholds: bool, wcam: bool, ntx: bool) -> Result<BlockOutcome> {
        let k = self.link.scenario.num_tx();
        let it = self.iteration as u64;
        let mut bits = self.source.stream2(Purpose::PilotBits, it, block);
        let mut rx = self.source.stream2(Purpose::Reception, it, block);
        let mut jitter = self.source.stream2(Purpose::Jitter, it, block);
        let mut erasure = self.source.stream2(Purpose::FeedbackErasure, it, block);
        let tx_mask = (1u64 << k) - 1;
        let frame_mask = self.frame_mask();
        let step = self.config.delta_tau;
        let unequal_weight = if k > 1 {
            1.0 / ((1u64 << (k - 1)) - 1) as f64
        } else {
            0.0
        };
        let mut out = BlockOutcome::default();
        let mut i_wcam = 0.0;
        for _ in 0..self.config.n_pilot {
            let truth = bits.random::<u64>() & tx_mask;
            self.frame = ((self.frame << k) | truth) & frame_mask;
            let frame = self.frame;
            self.link.sample(frame, &mut rx, &mut jitter, &mut self.samples);
            let decided = known_prefix_detect_mask(&self.samples, &self.state.tree, truth);
            let wrong = (decided ^ truth) & tx_mask;
            out.errors += u64::from(wrong.count_ones());
            if thresholds {
                for j in 0..k {
                    if (wrong >> j) & 1 == 1 {
                        let entry = self.state.tree.entry_mut(j, prefix_of_mask(truth, j));
                        *entry = if (truth >> j) & 1 == 0 {
                            *entry + step
                        } else {
                            entry.saturating_sub(step)
                        };
                        out.threshold_updates += 1;
                    }
                }
            }
            if wcam && wrong != 0 {
                let all_equal = truth == 0 || truth == tx_mask;
                let n = f64::from(wrong.count_ones());
                i_wcam += if all_equal { -n } else { n * unequal_weight };
            }
            if ntx && (truth >> 1) & 1 == 1 {
                let s1 = truth & 1;
                let ok1 = wrong & 1 == 0;
                let ok2 = (wrong >> 1) & 1 == 0;
                let factor = if s1 == 0 && !ok1 && ok2 {
                    Some(1.0 - self.config.alpha_n)
                } else if !ok2 && !(s1 == 0 && !ok1) {
                    Some(1.0 + self.config.alpha_n)
                } else {
                    None
                };
                if let Some(f) = factor {
                    if erasure.random::<f64>() >= self.config.p_ef {
                        let budget = self.link.scenario.tx.budget;
                        let n2 = (self.state.emitted[1] * f).clamp(1.0, budget);
                        if n2 != self.state.emitted[1] {
                            self.set_emitted(vec![budget, n2])?;
                        }
                        out.ntx_updates += 1;
                    }
                }
            }
        }
        if wcam {
            out.i_wcam = i_wcam;
            self.state.i_wcam = i_wcam;
            if i_wcam > self.config.tau_wcam() {
                out.beacon = true;
                self.state.beacons.push(self.iteration);
                self.apply_beacon()?;
            }
        }
        Ok(out)
    }

    fn apply_beacon(&mut self) -> Result<()> {
        let period = self.link.scenario.physical.symbol_period;
        let mut loss = self.source.stream(Purpose::BeaconLoss, self.iteration as u64);
        let mut offsets = self.state.offsets.clone();
        for (i, t) in offsets.iter_mut().enumerate() {
            if loss.random::<f64>() >= self.config.beacon_reliability {
                continue;
            }
            let pos = self.state.sequence_position[i];
            let mut seq = self.source.stream(Purpose::OffsetSequence, pos);
            let shift = (0..=i).map(|_| seq.random::<f64>()).last().unwrap_or(0.0) * self.config.delta_s_max;
            let wrapped = (*t + shift).rem_euclid(period);
            *t = if wrapped >= period { 0.0 } else { wrapped };
            self.state.sequence_position[i] += 1;
        }
        if offsets != self.state.offsets {
            self.set_offsets(offsets)?;
        }
        Ok(())
    }

    /// Threshold adaptation on its own pilot block.
    pub fn threshold_block(&mut self) -> Result<BlockOutcome> {
        self.pilot_block(BLOCK_THRESHOLDS, true, false, false)
    }

    /// Worst-case-offset detection on its own pilot block; may send a beacon.
    pub fn wcam_block(&mut self) -> Result<BlockOutcome> {
        self.pilot_block(BLOCK_WCAM, false, true, false)
    }

    /// Molecule-count adaptation of TX 2 on its own pilot block.
    pub fn ntx_block(&mut self) -> Result<BlockOutcome> {
        if !self.config.enable_ntx_opt {
            return Err(Error::Unsupported("molecule-count adaptation is disabled".into()));
        }
        self.pilot_block(BLOCK_NTX, false, false, true)
    }

    /// Frozen-parameter BEP estimate on `n_eval` data symbols with real SIC.
    pub fn evaluate(&mut self) -> Vec<f64> {
        let k = self.link.scenario.num_tx();
        let it = self.iteration as u64;
        let mut bits = self.source.stream2(Purpose::DataBits, it, BLOCK_EVAL);
        let mut rx = self.source.stream2(Purpose::Reception, it, BLOCK_EVAL);
        let mut jitter = self.source.stream2(Purpose::Jitter, it, BLOCK_EVAL);
        let tx_mask = (1u64 << k) - 1;
        let frame_mask = self.frame_mask();
        let mut errors = vec![0u64; k];
        for _ in 0..self.config.n_eval {
            let truth = bits.random::<u64>() & tx_mask;
            self.frame = ((self.frame << k) | truth) & frame_mask;
            let frame = self.frame;
            self.link.sample(frame, &mut rx, &mut jitter, &mut self.samples);
            let wrong = sic_detect_mask(&self.samples, &self.state.tree) ^ truth;
            for (j, e) in errors.iter_mut().enumerate() {
                *e += (wrong >> j) & 1;
            }
        }
        errors.iter().map(|&e| e as f64 / self.config.n_eval as f64).collect()
    }

    /// One full iteration.
    pub fn step(&mut self) -> Result<IterationRecord> {
        if self.link.scenario.sampling.jitter_width > 0.0
            && self.link.scenario.sampling.redraw_policy == RedrawPolicy::PerIteration
        {
            let k = self.link.scenario.num_tx();
            let mut rng = self
                .source
                .stream2(Purpose::Jitter, self.iteration as u64, BLOCK_ITERATION_JITTER);
            self.link.deviations = self.link.scenario.sampling.draw_deviations(k, &mut rng);
            self.link.rebuild()?;
        }
        let wcam = self.config.enable_wcam;
        let ntx = self.config.enable_ntx_opt;
        let beacon = if self.config.shared_block {
            self.pilot_block(BLOCK_SHARED, true, wcam, ntx)?.beacon
        } else {
            self.threshold_block()?;
            let beacon = if wcam { self.wcam_block()?.beacon } else { false };
            if ntx {
                self.ntx_block()?;
            }
            beacon
        };
        let p_e = self.evaluate();
        let record = IterationRecord {
            iteration: self.iteration,
            p_e_sys: p_e.iter().sum::<f64>() / p_e.len() as f64,
            p_e,
            beacon,
            i_wcam: self.state.i_wcam,
            offsets: self.state.offsets.clone(),
            emitted: self.state.emitted.clone(),
            thresholds: self.state.tree.flatten(),
        };
        self.iteration += 1;
        if self.iteration < self.config.n_iter {
            self.apply_schedule()?;
        }
        Ok(record)
    }
}

/// Runs the full protocol for one seed.
pub fn run_protocol(
    scenario: &Scenario,
    config: &ProtocolConfig,
    schedule: &Schedule,
    seed: u64,
) -> Result<Trajectory> {
    let mut run = ProtocolRun::new(scenario, config, schedule, seed)?;
    let records = (0..config.n_iter).map(|_| run.step()).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { seed, records })
}

/// Seed of ensemble member `index` under a master seed.
pub fn member_seed(master: u64, index: u64) -> u64 {
    StreamSource::new(master).child(index).seed()
}

/// Per-iteration ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub iteration: usize,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    /// Fraction of members that sent a beacon.
    pub beacon_rate: f64,
    /// |t_off,1 - t_off,2| statistics, two-TX runs only.
    pub offset_diff_mean: Option<f64>,
    pub offset_diff_p5: Option<f64>,
    pub offset_diff_p95: Option<f64>,
}

/// Linear-interpolation percentile of sorted data, q in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn ensemble_statistics(trajectories: &[Trajectory]) -> Vec<EnsembleRow> {
    let n_iter = trajectories.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let n = trajectories.len() as f64;
    (0..n_iter)
        .map(|it| {
            let mut pe: Vec<f64> = trajectories.iter().map(|t| t.records[it].p_e_sys).collect();
            pe.sort_by(f64::total_cmp);
            let two = trajectories[0].records[it].offsets.len() == 2;
            let mut diff: Vec<f64> = if two {
                trajectories
                    .iter()
                    .map(|t| (t.records[it].offsets[0] - t.records[it].offsets[1]).abs())
                    .collect()
            } else {
                Vec::new()
            };
            diff.sort_by(f64::total_cmp);
            EnsembleRow {
                iteration: it,
                mean: pe.iter().sum::<f64>() / n,
                median: percentile(&pe, 0.5),
                p5: percentile(&pe, 0.05),
                p25: percentile(&pe, 0.25),
                p75: percentile(&pe, 0.75),
                p95: percentile(&pe, 0.95),
                beacon_rate: trajectories.iter().filter(|t| t.records[it].beacon).count() as f64 / n,
                offset_diff_mean: two.then(|| diff.iter().sum::<f64>() / n),
                offset_diff_p5: two.then(|| percentile(&diff, 0.05)),
                offset_diff_p95: two.then(|| percentile(&diff, 0.95)),
            }
        })
        .collect()
}

/// Runs every seed (concurrently) and aggregates.
pub fn run_seed_ensemble(
    scenario: &Scenario,
    config: &ProtocolConfig,
    schedule: &Schedule,
    seeds: &[u64],
) -> Result<(Vec<Trajectory>, Vec<EnsembleRow>)> {
    if seeds.is_empty() {
        return Err(Error::config("protocol.seeds", "need at least one seed"));
    }
    let trajectories = seeds
        .par_iter()
        .map(|&s| run_protocol(scenario, config, schedule, s))
        .collect::<Result<Vec<_>>>()?;
    let stats = ensemble_statistics(&trajectories);
    Ok((trajectories, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(k: usize) -> ProtocolConfig {
        ProtocolConfig {
            n_iter: 5,
            n_eval: 200,
            enable_wcam: k > 1,
            initial_offsets: InitialOffsets::Scenario,
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn error_free_single_link_keeps_thresholds() {
        let s = Scenario::baseline(1).with_isi_length(0);
        let mut run = ProtocolRun::new(&s, &quiet(1), &Schedule::default(), 1).unwrap();
        let out = run.threshold_block().unwrap();
        assert_eq!(out.errors, 0);
        assert_eq!(run.state().tree.flatten(), vec![1]);
    }

    #[test]
    fn high_threshold_walks_down() {
        let s = Scenario::baseline(1).with_isi_length(0);
        let cfg = ProtocolConfig {
            tau_init: 400,
            ..quiet(1)
        };
        let mut run = ProtocolRun::new(&s, &cfg, &Schedule::default(), 4).unwrap();
        let out = run.threshold_block().unwrap();
        // every bit-1 is missed at τ = 400 > λ̃ + 5√λ̃, so τ drops once per one
        let ones = out.threshold_updates;
        assert!((30..=70).contains(&ones), "{ones}");
        assert_eq!(run.state().tree.get(0, 0), 400 - ones);
    }

    #[test]
    fn wcam_inert_without_delay_bound() {
        let s = Scenario::baseline(2);
        let cfg = ProtocolConfig {
            delta_s_max: 0.0,
            n_iter: 20,
            ..quiet(2)
        };
        let t = run_protocol(&s, &cfg, &Schedule::default(), 9).unwrap();
        assert!(t.records.iter().all(|r| r.offsets == vec![0.0, 0.0]));
        assert!(t.records.iter().any(|r| r.beacon));
    }

    #[test]
    fn aligned_pair_fires_beacon_and_moves() {
        let s = Scenario::baseline(2);
        let cfg = ProtocolConfig { n_iter: 10, ..quiet(2) };
        let t = run_protocol(&s, &cfg, &Schedule::default(), 3).unwrap();
        let first = t.records.iter().position(|r| r.beacon).expect("a beacon");
        assert!(first < 7);
        assert_ne!(t.records.last().unwrap().offsets, vec![0.0, 0.0]);
        for r in &t.records {
            assert!(r.offsets.iter().all(|&o| (0.0..1.0).contains(&o)));
        }
    }

    #[test]
    fn erased_or_zero_multiplier_freezes_ntx() {
        let s = Scenario::baseline(2);
        for cfg in [
            ProtocolConfig {
                enable_ntx_opt: true,
                p_ef: 1.0,
                n_tx_init: 5e5,
                ..quiet(2)
            },
            ProtocolConfig {
                enable_ntx_opt: true,
                alpha_n: 0.0,
                n_tx_init: 5e5,
                ..quiet(2)
            },
        ] {
            let t = run_protocol(&s, &cfg, &Schedule::default(), 2).unwrap();
            assert!(t.records.iter().all(|r| r.emitted == vec![1e6, 5e5]));
        }
        let cfg = ProtocolConfig {
            enable_ntx_opt: true,
            p_ef: 0.5,
            n_tx_init: 5e5,
            ..quiet(2)
        };
        let a = run_protocol(&s, &cfg, &Schedule::default(), 2).unwrap();
        let b = run_protocol(&s, &cfg, &Schedule::default(), 2).unwrap();
        assert_eq!(a, b);
        assert!(a.records.iter().all(|r| (1.0..=1e6).contains(&r.emitted[1])));
    }

    #[test]
    fn config_errors() {
        let one = Scenario::baseline(1);
        let cfg = ProtocolConfig {
            enable_wcam: true,
            ..quiet(1)
        };
        assert!(ProtocolRun::new(&one, &cfg, &Schedule::default(), 0).is_err());
        let three = Scenario::baseline(3);
        let cfg = ProtocolConfig {
            enable_ntx_opt: true,
            ..quiet(3)
        };
        assert!(matches!(
            ProtocolRun::new(&three, &cfg, &Schedule::default(), 0),
            Err(Error::Unsupported(_))
        ));
        let late = Schedule {
            events: vec![ScheduleEvent {
                at: 5,
                change: Change::SnrDb { value: 0.0 },
            }],
        };
        assert!(ProtocolRun::new(&three, &quiet(3), &late, 0).is_err());
    }

    #[test]
    fn empty_run_and_single_seed_ensemble() {
        let s = Scenario::baseline(2);
        let cfg = ProtocolConfig { n_iter: 0, ..quiet(2) };
        assert!(run_protocol(&s, &cfg, &Schedule::default(), 1)
            .unwrap()
            .records
            .is_empty());
        let cfg = quiet(2);
        let (t, stats) = run_seed_ensemble(&s, &cfg, &Schedule::default(), &[7]).unwrap();
        for (r, e) in t[0].records.iter().zip(&stats) {
            for v in [e.mean, e.median, e.p5, e.p95] {
                assert_eq!(v, r.p_e_sys);
            }
        }
    }

    #[test]
    fn schedule_recipes() {
        let s = Schedule::snr_steps(1000);
        assert_eq!(s.breakpoints(), vec![250, 500, 750]);
        let d = Schedule::distance_steps(1000);
        assert_eq!(d.breakpoints(), vec![333, 666]);
    }

    #[test]
    fn percentiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.05), 0.2);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }
}
