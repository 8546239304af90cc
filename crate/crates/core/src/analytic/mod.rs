//! Exact bit-error probability and mutual information by enumerating every
//! transmitted symbol frame and every decoded SIC prefix.
//!
//! For NOMA a single pass over the 2^{K(L+1)} frames runs the prefix
//! recursion down the whole threshold tree: at node (j, b) the prefix mass
//! splits into "decoded 0" with probability CDF(τ_j^b - 1; μ_j(S)) and
//! "decoded 1" with the complementary upper tail. Both tails are evaluated
//! directly so small error probabilities keep their relative precision.

pub mod poisson;

use serde::{Deserialize, Serialize};

pub use poisson::{poisson_cdf, poisson_pmf, poisson_sf};

use crate::error::{Error, Result};
pub use crate::gains::GainMatrix;
use crate::ma_schemes::{masked_sum, prefix_index, tdma_owner, ScalarThresholds, Scheme, SymbolFrame, ThresholdTree};
use poisson::cdf_sf_unchecked;

/// Frames with more bits than this are refused unless the cap is raised.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Conditional error probabilities of one TX.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    /// P(ŝ = 1 | s = 0), i.e. 1 - P_{j,0}.
    pub false_alarm: f64,
    /// P(ŝ = 0 | s = 1), i.e. P_{j,1}.
    pub miss: f64,
}

impl ErrorRates {
    pub fn bep(&self) -> f64 {
        0.5 * (self.miss + self.false_alarm)
    }

    pub fn mutual_information(&self) -> f64 {
        binary_channel_mi(self.false_alarm, self.miss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BepResult {
    pub scheme: Scheme,
    pub per_tx: Vec<f64>,
    pub system: f64,
    pub mi_per_tx: Vec<f64>,
    pub mi_system: f64,
    pub rates: Vec<ErrorRates>,
}

impl BepResult {
    pub fn from_rates(scheme: Scheme, rates: Vec<ErrorRates>) -> Self {
        let per_tx: Vec<f64> = rates.iter().map(ErrorRates::bep).collect();
        let mi_per_tx: Vec<f64> = rates.iter().map(ErrorRates::mutual_information).collect();
        let k = per_tx.len() as f64;
        BepResult {
            scheme,
            system: per_tx.iter().sum::<f64>() / k,
            mi_system: system_mi(&mi_per_tx, scheme),
            per_tx,
            mi_per_tx,
            rates,
        }
    }
}

fn entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// MI of a binary channel with equiprobable input, in bits.
pub fn binary_channel_mi(false_alarm: f64, miss: f64) -> f64 {
    let p_one = 0.5 * (false_alarm + 1.0 - miss);
    let mi = entropy(p_one) - 0.5 * (entropy(false_alarm) + entropy(miss));
    mi.clamp(0.0, 1.0)
}

/// System MI per symbol period: TDMA carries one TX per slot.
pub fn system_mi(per_tx: &[f64], scheme: Scheme) -> f64 {
    let sum: f64 = per_tx.iter().sum();
    match scheme {
        Scheme::Tdma => sum / per_tx.len() as f64,
        Scheme::Mdma | Scheme::Noma => sum,
    }
}

/// Flat index of tree node (j, b).
#[inline]
pub(crate) fn node(j: usize, b: usize) -> usize {
    (1 << j) - 1 + b
}

/// Per-node sums over frames in frame order: for node (j, b),
/// `one` collects prefix mass × P(decode 0) over frames with s_j = 1 and
/// `zero` collects prefix mass × P(decode 1) over frames with s_j = 0.
#[derive(Debug, Clone)]
pub(crate) struct NodeSums {
    pub one: Vec<f64>,
    pub zero: Vec<f64>,
    /// 2^{-(n-1)}, the weight of a frame given s_j.
    pub scale: f64,
}

impl NodeSums {
    pub fn rates(&self, j: usize) -> ErrorRates {
        let range = node(j, 0)..node(j + 1, 0);
        level_rates(&self.one[range.clone()], &self.zero[range], self.scale)
    }
}

/// Rates of one TX from its per-prefix node sums.
#[inline]
pub(crate) fn level_rates(one: &[f64], zero: &[f64], scale: f64) -> ErrorRates {
    ErrorRates {
        miss: one.iter().sum::<f64>() * scale,
        false_alarm: zero.iter().sum::<f64>() * scale,
    }
}

/// Prefix masses pp_j(b | S) for levels 0..=upto, written at `node(j, b)`.
/// `mu` must hold the frame's mean at each sampling point.
#[inline]
pub(crate) fn prefix_masses(tree: &ThresholdTree, mu: &[f64], upto: usize, pp: &mut [f64]) {
    pp[0] = 1.0;
    for j in 0..upto {
        let width = 1usize << j;
        for b in 0..width {
            let p = pp[node(j, b)];
            let (lo, hi) = (node(j + 1, 2 * b), node(j + 1, 2 * b + 1));
            if p == 0.0 {
                pp[lo] = 0.0;
                pp[hi] = 0.0;
                continue;
            }
            let (c, s) = cdf_sf_unchecked(tree.get(j, b) as i64 - 1, mu[j]);
            pp[lo] = p * c;
            pp[hi] = p * s;
        }
    }
}

pub(crate) fn frame_means(bits: u64, gains: &GainMatrix, noise: f64, mu: &mut [f64]) {
    for (j, m) in mu.iter_mut().enumerate() {
        *m = noise + masked_sum(bits, gains.row(j));
    }
}

pub(crate) fn check_noise(noise: f64) -> Result<()> {
    if noise >= 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "noise mean must be finite and >= 0, got {noise}"
        )))
    }
}

/// Exhaustive enumeration engine with a guard on the frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Engine {
    cap: usize,
}

impl Default for Engine {
    fn default() -> Self {
        Engine {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// At most 63 bits can be enumerated.
    pub fn with_cap(cap: usize) -> Self {
        Engine { cap: cap.min(63) }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub(crate) fn check_bits(&self, bits: usize) -> Result<()> {
        if bits > self.cap {
            Err(Error::EnumerationCap { bits, cap: self.cap })
        } else {
            Ok(())
        }
    }

    pub(crate) fn noma_node_sums(&self, gains: &GainMatrix, noise: f64, tree: &ThresholdTree) -> Result<NodeSums> {
        let k = gains.num_tx();
        if tree.num_tx() != k {
            return Err(Error::Dimension(format!("{}-TX tree for {k} TXs", tree.num_tx())));
        }
        check_noise(noise)?;
        let n = gains.frame_bits();
        self.check_bits(n)?;
        let nodes = (1usize << k) - 1;
        let mut sums = NodeSums {
            one: vec![0.0; nodes],
            zero: vec![0.0; nodes],
            scale: 0.5f64.powi(n as i32 - 1),
        };
        let mut mu = vec![0.0; k];
        // one spare level so the last split has somewhere to write
        let mut pp = vec![0.0; (1usize << (k + 1)) - 1];
        for bits in 0..1u64 << n {
            frame_means(bits, gains, noise, &mut mu);
            pp[0] = 1.0;
            for (j, &m) in mu.iter().enumerate() {
                let sj = (bits >> j) & 1;
                for b in 0..1usize << j {
                    let at = node(j, b);
                    let p = pp[at];
                    let (lo, hi) = (node(j + 1, 2 * b), node(j + 1, 2 * b + 1));
                    if p == 0.0 {
                        pp[lo] = 0.0;
                        pp[hi] = 0.0;
                        continue;
                    }
                    let (c, s) = cdf_sf_unchecked(tree.get(j, b) as i64 - 1, m);
                    if sj == 1 {
                        sums.one[at] += p * c;
                    } else {
                        sums.zero[at] += p * s;
                    }
                    pp[lo] = p * c;
                    pp[hi] = p * s;
                }
            }
        }
        Ok(sums)
    }

    /// Conditional error probabilities of every TX under tree-based SIC.
    pub fn noma_rates(&self, gains: &GainMatrix, noise: f64, tree: &ThresholdTree) -> Result<Vec<ErrorRates>> {
        let sums = self.noma_node_sums(gains, noise, tree)?;
        Ok((0..gains.num_tx()).map(|j| sums.rates(j)).collect())
    }

    /// Per-TX and system BEP and MI for NOMA with SIC.
    pub fn noma(&self, gains: &GainMatrix, noise: f64, tree: &ThresholdTree) -> Result<BepResult> {
        Ok(BepResult::from_rates(
            Scheme::Noma,
            self.noma_rates(gains, noise, tree)?,
        ))
    }

    /// P_{j,x}: probability that TX j is decoded as 0 given s_j[0] = x.
    pub fn p_j_x(&self, j: usize, x: u8, gains: &GainMatrix, noise: f64, tree: &ThresholdTree) -> Result<f64> {
        check_tx(j, gains.num_tx())?;
        let r = self.noma_rates(gains, noise, tree)?[j];
        Ok(if x == 0 { 1.0 - r.false_alarm } else { r.miss })
    }

    /// P_e,j under NOMA.
    pub fn bep_tx(&self, j: usize, gains: &GainMatrix, noise: f64, tree: &ThresholdTree) -> Result<f64> {
        check_tx(j, gains.num_tx())?;
        Ok(self.noma_rates(gains, noise, tree)?[j].bep())
    }

    pub fn mdma_rates(&self, gains: &GainMatrix, noise: f64, thresholds: &ScalarThresholds) -> Result<Vec<ErrorRates>> {
        self.scalar_rates(gains, noise, thresholds, Scheme::Mdma)
    }

    pub fn tdma_rates(&self, gains: &GainMatrix, noise: f64, thresholds: &ScalarThresholds) -> Result<Vec<ErrorRates>> {
        self.scalar_rates(gains, noise, thresholds, Scheme::Tdma)
    }

    pub fn mdma(&self, gains: &GainMatrix, noise: f64, thresholds: &ScalarThresholds) -> Result<BepResult> {
        Ok(BepResult::from_rates(
            Scheme::Mdma,
            self.mdma_rates(gains, noise, thresholds)?,
        ))
    }

    pub fn tdma(&self, gains: &GainMatrix, noise: f64, thresholds: &ScalarThresholds) -> Result<BepResult> {
        Ok(BepResult::from_rates(
            Scheme::Tdma,
            self.tdma_rates(gains, noise, thresholds)?,
        ))
    }

    fn scalar_rates(
        &self,
        gains: &GainMatrix,
        noise: f64,
        thresholds: &ScalarThresholds,
        scheme: Scheme,
    ) -> Result<Vec<ErrorRates>> {
        let k = gains.num_tx();
        if thresholds.len() != k {
            return Err(Error::Dimension(format!("{} thresholds for {k} TXs", thresholds.len())));
        }
        check_noise(noise)?;
        self.check_bits(gains.isi_length() + 1)?;
        Ok((0..k)
            .map(|j| {
                let history = scalar_history(gains, j, scheme);
                scalar_node_rates(&history, noise, thresholds.get(j))
            })
            .collect())
    }
}

fn check_tx(j: usize, k: usize) -> Result<()> {
    if j < k {
        Ok(())
    } else {
        Err(Error::Dimension(format!("TX index {j} out of range for {k} TXs")))
    }
}

/// Gains of the L+1 history bits seen at TX j's sampling point for a
/// scalar-threshold scheme; entry 0 is TX j's own current pulse.
pub(crate) fn scalar_history(gains: &GainMatrix, j: usize, scheme: Scheme) -> Vec<f64> {
    let k = gains.num_tx();
    (0..=gains.isi_length())
        .map(|l| match scheme {
            Scheme::Mdma => gains.get(j, j, l),
            Scheme::Tdma => gains.get(tdma_owner(j, l, k), j, l),
            Scheme::Noma => unreachable!("NOMA has no scalar history"),
        })
        .collect()
}

pub(crate) fn scalar_node_rates(history: &[f64], noise: f64, tau: u64) -> ErrorRates {
    let n = history.len();
    let (mut one, mut zero) = (0.0, 0.0);
    for bits in 0..1u64 << n {
        let mu = noise + masked_sum(bits, history);
        let (c, s) = cdf_sf_unchecked(tau as i64 - 1, mu);
        if bits & 1 == 1 {
            one += c;
        } else {
            zero += s;
        }
    }
    let scale = 0.5f64.powi(n as i32 - 1);
    ErrorRates {
        miss: one * scale,
        false_alarm: zero * scale,
    }
}

fn check_prefix(j: usize, prefix: &[u8], frame: &SymbolFrame, tree: &ThresholdTree, gains: &GainMatrix) -> Result<()> {
    check_tx(j, gains.num_tx())?;
    if prefix.len() != j {
        return Err(Error::Dimension(format!(
            "TX {j} needs a prefix of {j} bits, got {}",
            prefix.len()
        )));
    }
    if tree.num_tx() != gains.num_tx() {
        return Err(Error::Dimension("tree and gains disagree on K".into()));
    }
    if frame.num_tx() != gains.num_tx() || frame.isi_length() != gains.isi_length() {
        return Err(Error::Dimension("frame shape does not match the gain matrix".into()));
    }
    Ok(())
}

/// Probability that TX j is decoded as 0 for the given frame and decoded
/// prefix: CDF(τ_j^prefix - 1; S·Λ_j + λ_n).
pub fn p_prev(
    j: usize,
    frame: &SymbolFrame,
    prefix: &[u8],
    tree: &ThresholdTree,
    gains: &GainMatrix,
    noise: f64,
) -> Result<f64> {
    check_prefix(j, prefix, frame, tree, gains)?;
    check_noise(noise)?;
    let mu = noise + frame.dot(gains.row(j));
    Ok(cdf_sf_unchecked(tree.get(j, prefix_index(prefix)) as i64 - 1, mu).0)
}

/// Probability that SIC produces exactly `prefix` for TXs 0..j given the frame.
pub fn prefix_probability(
    j: usize,
    prefix: &[u8],
    frame: &SymbolFrame,
    tree: &ThresholdTree,
    gains: &GainMatrix,
    noise: f64,
) -> Result<f64> {
    check_prefix(j, prefix, frame, tree, gains)?;
    check_noise(noise)?;
    let mut prob = 1.0;
    for i in 0..j {
        let mu = noise + frame.dot(gains.row(i));
        let (c, s) = cdf_sf_unchecked(tree.get(i, prefix_index(&prefix[..i])) as i64 - 1, mu);
        prob *= if prefix[i] == 0 { c } else { s };
    }
    Ok(prob)
}
