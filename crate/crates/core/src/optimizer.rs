//! Exhaustive-search reference optimizers and the sweeps built on them.
//!
//! Thresholds are chosen TX by TX. For a fixed upstream tree every entry
//! τ_j^b of TX j is separable, so each entry is a one-dimensional problem
//! over the integers [0, G] with G = ceil(λ_max + 10 √λ_max). The whole
//! grid is scored at once by spreading each frame's Poisson mass over a
//! dense array and taking prefix and suffix sums, then the winner is
//! polished by a ±1 descent that uses the analytic engine's own arithmetic,
//! so the returned tree is a local optimum under exact re-evaluation too.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::poisson::{cdf_sf_unchecked, pmf_unchecked};
use crate::analytic::{
    check_noise, frame_means, level_rates, node, prefix_masses, scalar_history, scalar_node_rates, BepResult, Engine,
};
use crate::error::{Error, Result};
use crate::gains::GainMatrix;
use crate::ma_schemes::{ScalarThresholds, Scheme, ThresholdTree};
use crate::rng::{Purpose, StreamSource};
use crate::scenario::Scenario;

use rand::Rng;

/// Default number of random offset samples for the (r) case.
pub const DEFAULT_RANDOM_SAMPLES: usize = 200;

/// Ratio of the geometric N_TX grid used by the (s-o) search.
pub const NTX_GRID_RATIO: f64 = 1.05;

/// Smallest non-zero N_TX of the (s-o) grid, as a fraction of the budget.
pub const NTX_GRID_FLOOR: f64 = 1e-3;

// Mass below this is dropped from the dense scoring arrays.
const NEGLIGIBLE: f64 = 1e-300;
// Above this many cached (frame, prefix) pairs per level, cache per node.
const LEVEL_CACHE_LIMIT: usize = 1 << 25;

/// ceil(λ_max + 10 √λ_max), the largest threshold worth scoring.
pub fn search_limit(gains: &GainMatrix, noise: f64) -> u64 {
    let lmax = noise + gains.max_mean();
    (lmax + 10.0 * lmax.sqrt()).ceil().max(1.0) as u64
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    pp: f64,
    mu: f64,
    one: bool,
}

/// Exact node sums in frame order, bit-identical to the engine's.
fn node_sums_at(entries: &[Entry], tau: u64) -> (f64, f64) {
    let (mut one, mut zero) = (0.0, 0.0);
    for e in entries {
        let (c, s) = cdf_sf_unchecked(tau as i64 - 1, e.mu);
        if e.one {
            one += e.pp * c;
        } else {
            zero += e.pp * s;
        }
    }
    (one, zero)
}

fn add_window(arr: &mut [f64], mu: f64, weight: f64) {
    let limit = arr.len() - 1;
    if mu == 0.0 {
        arr[0] += weight;
        return;
    }
    let mode = mu.floor() as u64;
    let peak = weight * pmf_unchecked(mode, mu);
    if peak < NEGLIGIBLE {
        return;
    }
    if (mode as usize) <= limit {
        arr[mode as usize] += peak;
    }
    let mut p = peak;
    let mut k = mode;
    while k > 0 {
        p *= k as f64 / mu;
        k -= 1;
        if p < NEGLIGIBLE {
            break;
        }
        if (k as usize) <= limit {
            arr[k as usize] += p;
        }
    }
    let mut p = peak;
    let mut k = mode;
    while (k as usize) < limit {
        k += 1;
        p *= mu / k as f64;
        if p < NEGLIGIBLE {
            break;
        }
        arr[k as usize] += p;
    }
}

/// Grid argmin of f(τ) = Σ_one w·CDF(τ-1; μ) + Σ_zero w·SF(τ-1; μ) over
/// [0, limit]; the smallest τ wins ties.
fn dense_argmin(entries: &[Entry], limit: u64) -> u64 {
    let mut merged: Vec<(u64, bool, f64)> = entries.iter().map(|e| (e.mu.to_bits(), e.one, e.pp)).collect();
    merged.sort_by_key(|a| (a.0, a.1));
    let mut terms: Vec<(f64, bool, f64)> = Vec::with_capacity(merged.len());
    for (mu, one, w) in merged {
        match terms.last_mut() {
            Some(last) if last.0.to_bits() == mu && last.1 == one => last.2 += w,
            _ => terms.push((f64::from_bits(mu), one, w)),
        }
    }
    let len = limit as usize + 1;
    let mut one_mass = vec![0.0; len];
    let mut zero_mass = vec![0.0; len];
    for &(mu, one, w) in &terms {
        if w > 0.0 {
            add_window(if one { &mut one_mass } else { &mut zero_mass }, mu, w);
        }
    }
    let mut zero_suffix = vec![0.0; len + 1];
    for k in (0..len).rev() {
        zero_suffix[k] = zero_suffix[k + 1] + zero_mass[k];
    }
    let (mut best, mut best_tau) = (f64::INFINITY, 0u64);
    let mut one_prefix = 0.0;
    for tau in 0..len {
        let f = one_prefix + zero_suffix[tau];
        if f < best {
            best = f;
            best_tau = tau as u64;
        }
        one_prefix += one_mass[tau];
    }
    best_tau
}

/// Moves each τ by ±1 while the objective strictly decreases, repeating
/// over all entries until none moves.
fn descend<F>(taus: &mut [u64], sums: &mut [(f64, f64)], node_eval: impl Fn(usize, u64) -> (f64, f64), objective: F)
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    loop {
        let mut moved = false;
        for b in 0..taus.len() {
            loop {
                let current = objective(sums);
                let mut best: Option<(u64, (f64, f64), f64)> = None;
                let below = taus[b].checked_sub(1);
                for cand in below.into_iter().chain(std::iter::once(taus[b] + 1)) {
                    let s = node_eval(b, cand);
                    let saved = sums[b];
                    sums[b] = s;
                    let v = objective(sums);
                    sums[b] = saved;
                    if v < current && best.is_none_or(|(_, _, bv)| v < bv) {
                        best = Some((cand, s, v));
                    }
                }
                match best {
                    Some((cand, s, _)) => {
                        taus[b] = cand;
                        sums[b] = s;
                        moved = true;
                    }
                    None => break,
                }
            }
        }
        if !moved {
            break;
        }
    }
}

fn level_objective(sums: &[(f64, f64)], scale: f64) -> f64 {
    let one: Vec<f64> = sums.iter().map(|s| s.0).collect();
    let zero: Vec<f64> = sums.iter().map(|s| s.1).collect();
    level_rates(&one, &zero, scale).bep()
}

/// Collects the (prefix mass, mean, class) of every frame for the listed
/// prefixes of TX j.
fn collect_entries(
    gains: &GainMatrix,
    noise: f64,
    tree: &ThresholdTree,
    j: usize,
    prefixes: &[usize],
) -> Vec<Vec<Entry>> {
    let k = gains.num_tx();
    let n = gains.frame_bits();
    let mut out = vec![Vec::new(); prefixes.len()];
    let mut mu = vec![0.0; k];
    let mut pp = vec![0.0; (1usize << (k + 1)) - 1];
    for bits in 0..1u64 << n {
        frame_means(bits, gains, noise, &mut mu);
        prefix_masses(tree, &mu, j, &mut pp);
        let one = (bits >> j) & 1 == 1;
        for (slot, &b) in out.iter_mut().zip(prefixes) {
            let p = pp[node(j, b)];
            if p != 0.0 {
                slot.push(Entry { pp: p, mu: mu[j], one });
            }
        }
    }
    out
}

/// Sequential per-TX threshold search for tree-based SIC.
pub fn optimize_thresholds(engine: &Engine, gains: &GainMatrix, noise: f64) -> Result<ThresholdTree> {
    check_noise(noise)?;
    let k = gains.num_tx();
    let n = gains.frame_bits();
    engine.check_bits(n)?;
    let limit = search_limit(gains, noise);
    let scale = 0.5f64.powi(n as i32 - 1);
    let mut tree = ThresholdTree::uniform(k, 0);
    for j in 0..k {
        let width = 1usize << j;
        let all: Vec<usize> = (0..width).collect();
        let per_level = (1usize << n).saturating_mul(width) <= LEVEL_CACHE_LIMIT;
        let cached = if per_level {
            collect_entries(gains, noise, &tree, j, &all)
        } else {
            Vec::new()
        };
        let entries_of = |b: usize| -> Vec<Entry> {
            if per_level {
                cached[b].clone()
            } else {
                collect_entries(gains, noise, &tree, j, &[b]).pop().unwrap_or_default()
            }
        };
        let node_entries: Vec<Vec<Entry>> = (0..width).map(entries_of).collect();
        let mut taus: Vec<u64> = node_entries.iter().map(|e| dense_argmin(e, limit)).collect();
        let mut sums: Vec<(f64, f64)> = node_entries
            .iter()
            .zip(&taus)
            .map(|(e, &t)| node_sums_at(e, t))
            .collect();
        descend(
            &mut taus,
            &mut sums,
            |b, t| node_sums_at(&node_entries[b], t),
            |s| level_objective(s, scale),
        );
        for (b, t) in taus.into_iter().enumerate() {
            tree.set(j, b, t);
        }
    }
    Ok(tree)
}

/// Per-TX threshold search for MDMA or TDMA.
pub fn optimize_scalar_thresholds(
    engine: &Engine,
    gains: &GainMatrix,
    noise: f64,
    scheme: Scheme,
) -> Result<ScalarThresholds> {
    if scheme == Scheme::Noma {
        return Err(Error::Unsupported("NOMA uses a threshold tree".into()));
    }
    check_noise(noise)?;
    engine.check_bits(gains.isi_length() + 1)?;
    let limit = search_limit(gains, noise);
    let taus = (0..gains.num_tx())
        .map(|j| {
            let history = scalar_history(gains, j, scheme);
            let entries: Vec<Entry> = (0..1u64 << history.len())
                .map(|bits| Entry {
                    pp: 1.0,
                    mu: noise + crate::ma_schemes::masked_sum(bits, &history),
                    one: bits & 1 == 1,
                })
                .collect();
            let mut taus = [dense_argmin(&entries, limit)];
            let rate = |t: u64| {
                let r = scalar_node_rates(&history, noise, t);
                (r.miss, r.false_alarm)
            };
            let mut sums = [rate(taus[0])];
            descend(&mut taus, &mut sums, |_, t| rate(t), |s| 0.5 * (s[0].0 + s[0].1));
            taus[0]
        })
        .collect();
    Ok(ScalarThresholds(taus))
}

/// Optimal thresholds and the resulting BEP/MI for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub thresholds: Vec<u64>,
    pub result: BepResult,
}

/// Builds the gains of `scenario`, optimizes the thresholds of `scheme`
/// and evaluates it.
pub fn optimize_scheme(engine: &Engine, scenario: &Scenario, scheme: Scheme) -> Result<Optimized> {
    let gains = GainMatrix::build(scenario)?;
    let noise = scenario.physical.noise_mean;
    match scheme {
        Scheme::Noma => {
            let tree = optimize_thresholds(engine, &gains, noise)?;
            let result = engine.noma(&gains, noise, &tree)?;
            Ok(Optimized {
                thresholds: tree.flatten(),
                result,
            })
        }
        Scheme::Mdma | Scheme::Tdma => {
            let th = optimize_scalar_thresholds(engine, &gains, noise, scheme)?;
            let result = if scheme == Scheme::Mdma {
                engine.mdma(&gains, noise, &th)?
            } else {
                engine.tdma(&gains, noise, &th)?
            };
            Ok(Optimized {
                thresholds: th.0,
                result,
            })
        }
    }
}

/// One point of the threshold scan: P_e,1 against τ_1, and P_e,2 against
/// τ_2^0 with τ_1 optimal and τ_2^1 tied to τ_2^0 + round(λ̃_1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScanRow {
    pub tau: u64,
    pub p_e_1: f64,
    pub p_e_2_coupled: f64,
}

/// Threshold scan of a two-TX NOMA link over τ = 0..=max_tau.
pub fn threshold_scan(
    engine: &Engine,
    gains: &GainMatrix,
    noise: f64,
    max_tau: u64,
) -> Result<(u64, Vec<ThresholdScanRow>)> {
    if gains.num_tx() != 2 {
        return Err(Error::Unsupported("the threshold scan needs exactly 2 TXs".into()));
    }
    let tau1 = optimize_thresholds(engine, gains, noise)?.get(0, 0);
    let shift = gains.own(0).round() as u64;
    let rows = (0..=max_tau)
        .into_par_iter()
        .map(|tau| {
            let first = ThresholdTree::from_levels(vec![vec![tau], vec![0, 0]])?;
            let p_e_1 = engine.noma_rates(gains, noise, &first)?[0].bep();
            let coupled = ThresholdTree::from_levels(vec![vec![tau1], vec![tau, tau + shift]])?;
            let p_e_2_coupled = engine.noma_rates(gains, noise, &coupled)?[1].bep();
            Ok(ThresholdScanRow {
                tau,
                p_e_1,
                p_e_2_coupled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tau1, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtxCell {
    pub n_tx_2: f64,
    pub delta_n_tx: f64,
    /// None when N_TX,1 = N_TX,2 + ΔN_TX exceeds the budget.
    pub p_e_sys: Option<f64>,
    pub thresholds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtxHeatmap {
    pub cells: Vec<NtxCell>,
    /// Per N_TX,2 column, the ΔN_TX with the lowest P_e,sys.
    pub argmin: Vec<(f64, Option<f64>)>,
}

/// P_e,sys over (N_TX,2, ΔN_TX) for a two-TX scenario, thresholds
/// optimized per cell.
pub fn optimize_ntx_pair(engine: &Engine, scenario: &Scenario, n_tx_2: &[f64], delta: &[f64]) -> Result<NtxHeatmap> {
    if scenario.num_tx() != 2 {
        return Err(Error::Unsupported("the N_TX heatmap needs exactly 2 TXs".into()));
    }
    if n_tx_2.is_empty() || delta.is_empty() {
        return Err(Error::config("grid", "N_TX heatmap grids must be non-empty"));
    }
    let budget = scenario.tx.budget;
    let pairs: Vec<(f64, f64)> = n_tx_2
        .iter()
        .flat_map(|&n2| delta.iter().map(move |&d| (n2, d)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(n2, d)| {
            let n1 = n2 + d;
            if !(n2 >= 0.0 && d >= 0.0) {
                return Err(Error::config("n_tx_grid", "N_TX,2 and ΔN_TX must be >= 0"));
            }
            if n1 > budget {
                return Ok(NtxCell {
                    n_tx_2: n2,
                    delta_n_tx: d,
                    p_e_sys: None,
                    thresholds: vec![],
                });
            }
            let s = scenario.clone().with_emitted(vec![n1, n2]);
            let opt = optimize_scheme(engine, &s, Scheme::Noma)?;
            Ok(NtxCell {
                n_tx_2: n2,
                delta_n_tx: d,
                p_e_sys: Some(opt.result.system),
                thresholds: opt.thresholds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = n_tx_2
        .iter()
        .map(|&n2| {
            let best = cells
                .iter()
                .filter(|c| c.n_tx_2 == n2)
                .filter_map(|c| c.p_e_sys.map(|p| (c.delta_n_tx, p)))
                .fold(None, |acc: Option<(f64, f64)>, (d, p)| match acc {
                    Some((_, bp)) if bp <= p => acc,
                    _ => Some((d, p)),
                });
            (n2, best.map(|b| b.0))
        })
        .collect();
    Ok(NtxHeatmap { cells, argmin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetCell {
    pub t_off_1: f64,
    pub t_off_2: f64,
    pub p_e_sys: f64,
    pub thresholds: Vec<u64>,
}

/// Offsets i·T/n for i = 0..n.
pub fn offset_grid(n: usize, period: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * period / n as f64).collect()
}

/// P_e,sys over a grid of (t_off,1, t_off,2), thresholds optimized per cell.
pub fn offset_heatmap(engine: &Engine, scenario: &Scenario, grid: &[f64]) -> Result<Vec<OffsetCell>> {
    if scenario.num_tx() != 2 {
        return Err(Error::Unsupported("the offset heatmap needs exactly 2 TXs".into()));
    }
    if grid.is_empty() {
        return Err(Error::config("grid", "offset grid must be non-empty"));
    }
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b))).collect();
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let s = scenario.clone().with_offsets(vec![a, b]);
            let opt = optimize_scheme(engine, &s, Scheme::Noma)?;
            Ok(OffsetCell {
                t_off_1: a,
                t_off_2: b,
                p_e_sys: opt.result.system,
                thresholds: opt.thresholds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetCase {
    /// All offsets 0.
    Synchronized,
    /// All offsets 0, N_TX searched under the budget.
    SynchronizedOptimized,
    /// i.i.d. uniform offsets, averaged over samples.
    Random,
    /// t_off,i = i·T/K.
    Even,
}

impl OffsetCase {
    pub const ALL: [OffsetCase; 4] = [
        OffsetCase::Synchronized,
        OffsetCase::SynchronizedOptimized,
        OffsetCase::Random,
        OffsetCase::Even,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OffsetCase::Synchronized => "noma-s",
            OffsetCase::SynchronizedOptimized => "noma-so",
            OffsetCase::Random => "noma-r",
            OffsetCase::Even => "noma-e",
        }
    }
}

pub fn even_offsets(k: usize, period: f64) -> Vec<f64> {
    offset_grid(k, period)
}

/// Offset sample `index` of the random case; sample i always starts with
/// the same values whatever K is.
pub fn random_offsets(source: &StreamSource, index: u64, k: usize, period: f64) -> Vec<f64> {
    let mut rng = source.stream(Purpose::OffsetSamples, index);
    (0..k).map(|_| rng.random::<f64>() * period).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    SnrDb,
    NumTx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub cases: Vec<OffsetCase>,
    pub random_samples: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("sweep.grid", "grid must be non-empty"));
        }
        if self.grid.iter().any(|v| v.is_nan()) {
            return Err(Error::config("sweep.grid", "grid values must be numbers"));
        }
        let up = self.grid.windows(2).all(|w| w[0] < w[1]);
        let down = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(Error::config("sweep.grid", "grid must be strictly monotone"));
        }
        if self.parameter == SweepParameter::NumTx
            && self.grid.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0 && *v <= 64.0))
        {
            return Err(Error::config("sweep.grid", "K values must be integers in [1, 64]"));
        }
        if self.cases.contains(&OffsetCase::Random) && self.random_samples == 0 {
            return Err(Error::config("sweep.random_samples", "must be >= 1"));
        }
        Ok(())
    }
}

/// min, min+step, ... up to max inclusive (with a small tolerance).
pub fn grid_from_range(min: f64, step: f64, max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::config("grid", "need finite min <= max and step > 0"));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub point: f64,
    pub label: String,
    pub mi_system: f64,
    pub p_e_sys: f64,
    /// Emissions used (the searched ones for the (s-o) case, the last
    /// sample's for the random case).
    pub emitted: Vec<f64>,
}

/// Geometric N_TX grid: budget·ratio^-k down to floor·budget, then 0.
pub fn ntx_grid(budget: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut n = budget;
    while n >= NTX_GRID_FLOOR * budget * (1.0 - 1e-12) && n > 0.0 {
        grid.push(n);
        n /= NTX_GRID_RATIO;
    }
    grid.push(0.0);
    grid
}

/// NOMA evaluation with zero-emission TXs dropped; dropped TXs get
/// P_e = 1/2 and no information.
fn noma_without_silent(engine: &Engine, scenario: &Scenario) -> Result<BepResult> {
    let keep: Vec<usize> = (0..scenario.num_tx())
        .filter(|&i| scenario.tx.emitted[i] > 0.0)
        .collect();
    if keep.len() == scenario.num_tx() {
        return Ok(optimize_scheme(engine, scenario, Scheme::Noma)?.result);
    }
    let k = scenario.num_tx();
    let mut rates = vec![
        crate::analytic::ErrorRates {
            false_alarm: 0.0,
            miss: 1.0
        };
        k
    ];
    if !keep.is_empty() {
        let sub = optimize_scheme(engine, &scenario.subset(&keep), Scheme::Noma)?.result;
        for (pos, &i) in keep.iter().enumerate() {
            rates[i] = sub.rates[pos];
        }
    }
    Ok(BepResult::from_rates(Scheme::Noma, rates))
}

/// Synchronized NOMA with N_TX searched to maximize the system MI.
///
/// With two TXs, every pair with one TX at the budget and the other on the
/// geometric grid is tried. With more TXs the search is greedy in index
/// order: TX 1 stays at the budget and TX j is set to its best grid value
/// while the TXs after it are silent.
pub fn optimize_ntx_synchronized(engine: &Engine, scenario: &Scenario) -> Result<(Vec<f64>, BepResult)> {
    let k = scenario.num_tx();
    let budget = scenario.tx.budget;
    let base = scenario.clone().with_offsets(vec![0.0; k]);
    let grid = ntx_grid(budget);
    let pick_best =
        |cands: Vec<Vec<f64>>, eval: &(dyn Fn(&[f64]) -> Result<BepResult> + Sync)| -> Result<(Vec<f64>, BepResult)> {
            let scored = cands
                .par_iter()
                .map(|c| eval(c).map(|r| (c.clone(), r)))
                .collect::<Result<Vec<_>>>()?;
            let mut best: Option<(Vec<f64>, BepResult)> = None;
            for (c, r) in scored {
                if best.as_ref().is_none_or(|(_, b)| r.mi_system > b.mi_system) {
                    best = Some((c, r));
                }
            }
            Ok(best.expect("candidate list is never empty"))
        };
    match k {
        1 => {
            let s = base.with_emitted(vec![budget]);
            Ok((vec![budget], optimize_scheme(engine, &s, Scheme::Noma)?.result))
        }
        2 => {
            let mut cands: Vec<Vec<f64>> = grid.iter().map(|&g| vec![budget, g]).collect();
            cands.extend(grid.iter().skip(1).map(|&g| vec![g, budget]));
            pick_best(cands, &|c| {
                noma_without_silent(engine, &base.clone().with_emitted(c.to_vec()))
            })
        }
        _ => {
            let mut emitted = vec![0.0; k];
            emitted[0] = budget;
            for j in 1..k {
                let keep: Vec<usize> = (0..=j).collect();
                let cands: Vec<Vec<f64>> = grid
                    .iter()
                    .map(|&g| {
                        let mut e = emitted.clone();
                        e[j] = g;
                        e
                    })
                    .collect();
                let (e, _) = pick_best(cands, &|c| {
                    noma_without_silent(engine, &base.clone().with_emitted(c.to_vec()).subset(&keep))
                })?;
                emitted = e;
            }
            let result = noma_without_silent(engine, &base.with_emitted(emitted.clone()))?;
            Ok((emitted, result))
        }
    }
}

/// Scenario at one sweep point.
pub fn scenario_at(base: &Scenario, parameter: SweepParameter, value: f64) -> Scenario {
    match parameter {
        SweepParameter::SnrDb => {
            let mut s = base.clone();
            s.set_snr_db(value);
            s
        }
        SweepParameter::NumTx => {
            let k = value as usize;
            let mut s = base.clone();
            s.physical.distances = vec![base.physical.distances[0]; k];
            s.tx.offsets = vec![0.0; k];
            s.tx.emitted = vec![base.tx.emitted[0]; k];
            s
        }
    }
}

/// I_sys of MDMA, TDMA and the requested NOMA offset cases at every sweep
/// point. All TXs emit the budget except in the (s-o) case; MDMA and TDMA
/// are evaluated synchronized.
pub fn compare_ma(engine: &Engine, base: &Scenario, spec: &SweepSpec) -> Result<Vec<CompareRow>> {
    spec.validate()?;
    let source = StreamSource::new(spec.seed);
    let period = base.physical.symbol_period;
    let mut rows = Vec::new();
    for &point in &spec.grid {
        let mut s = scenario_at(base, spec.parameter, point);
        let k = s.num_tx();
        s.tx.emitted = vec![s.tx.budget; k];
        s.tx.offsets = vec![0.0; k];
        let row = |label: &str, r: &BepResult, emitted: Vec<f64>| CompareRow {
            point,
            label: label.to_string(),
            mi_system: r.mi_system,
            p_e_sys: r.system,
            emitted,
        };
        for scheme in [Scheme::Mdma, Scheme::Tdma] {
            let r = optimize_scheme(engine, &s, scheme)?.result;
            rows.push(row(scheme.name(), &r, s.tx.emitted.clone()));
        }
        for &case in &spec.cases {
            match case {
                OffsetCase::Synchronized => {
                    let r = optimize_scheme(engine, &s, Scheme::Noma)?.result;
                    rows.push(row(case.label(), &r, s.tx.emitted.clone()));
                }
                OffsetCase::SynchronizedOptimized => {
                    let (e, r) = optimize_ntx_synchronized(engine, &s)?;
                    rows.push(row(case.label(), &r, e));
                }
                OffsetCase::Even => {
                    let e = s.clone().with_offsets(even_offsets(k, period));
                    let r = optimize_scheme(engine, &e, Scheme::Noma)?.result;
                    rows.push(row(case.label(), &r, s.tx.emitted.clone()));
                }
                OffsetCase::Random => {
                    let results = (0..spec.random_samples as u64)
                        .into_par_iter()
                        .map(|i| {
                            let r = s.clone().with_offsets(random_offsets(&source, i, k, period));
                            optimize_scheme(engine, &r, Scheme::Noma).map(|o| o.result)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let n = results.len() as f64;
                    rows.push(CompareRow {
                        point,
                        label: case.label().to_string(),
                        mi_system: results.iter().map(|r| r.mi_system).sum::<f64>() / n,
                        p_e_sys: results.iter().map(|r| r.system).sum::<f64>() / n,
                        emitted: s.tx.emitted.clone(),
                    });
                }
            }
        }
    }
    Ok(rows)
}
