//! Received-signal composition for MDMA, TDMA and NOMA, and the threshold
//! and SIC detectors.
//!
//! TX indices are 0-based throughout. Symbol frames pack bit s_i[l] at
//! position `l*K + i` of a `u64`, slot 0 being the current one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mdma,
    Tdma,
    Noma,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mdma => "mdma",
            Scheme::Tdma => "tdma",
            Scheme::Noma => "noma",
        }
    }
}

/// Joint transmitted symbols of K TXs over the current and L past slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolFrame {
    bits: u64,
    num_tx: usize,
    isi_length: usize,
}

impl SymbolFrame {
    pub fn new(bits: u64, num_tx: usize, isi_length: usize) -> Result<Self> {
        let n = num_tx * (isi_length + 1);
        if num_tx == 0 || n > 64 {
            return Err(Error::Dimension(format!("frame of {n} bits is not representable")));
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::Dimension(format!("bits set beyond the {n}-bit frame")));
        }
        Ok(SymbolFrame {
            bits,
            num_tx,
            isi_length,
        })
    }

    pub fn zeros(num_tx: usize, isi_length: usize) -> Result<Self> {
        Self::new(0, num_tx, isi_length)
    }

    /// Frame with the given bits, `rows[l][i] = s_i[l]`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let mut bits = 0u64;
        for (l, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Dimension("ragged symbol frame".into()));
            }
            for (i, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(Error::domain("symbol bits must be 0 or 1"));
                }
                bits |= u64::from(b) << (l * k + i);
            }
        }
        Self::new(bits, k, rows.len().saturating_sub(1))
    }

    /// Every frame of the given shape, in increasing bit order.
    pub fn all(num_tx: usize, isi_length: usize) -> impl Iterator<Item = SymbolFrame> {
        let n = num_tx * (isi_length + 1);
        (0..1u64 << n).map(move |bits| SymbolFrame {
            bits,
            num_tx,
            isi_length,
        })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn isi_length(&self) -> usize {
        self.isi_length
    }

    pub fn len(&self) -> usize {
        self.num_tx * (self.isi_length + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// s_i[l].
    pub fn bit(&self, i: usize, l: usize) -> u8 {
        ((self.bits >> (l * self.num_tx + i)) & 1) as u8
    }

    /// Σ over set bits of `row`, i.e. S·Λ.
    pub fn dot(&self, row: &[f64]) -> f64 {
        masked_sum(self.bits, row)
    }
}

#[inline]
pub(crate) fn masked_sum(mut bits: u64, row: &[f64]) -> f64 {
    let mut sum = 0.0;
    while bits != 0 {
        let b = bits.trailing_zeros() as usize;
        sum += row[b];
        bits &= bits - 1;
    }
    sum
}

/// Per-TX SIC thresholds, indexed by the decoded prefix of upstream TXs.
///
/// TX j (0-based) holds 2^j entries. The prefix index reads the decoded
/// bits ŝ_0..ŝ_{j-1} as a binary number with ŝ_0 most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdTree {
    levels: Vec<Vec<u64>>,
}

impl ThresholdTree {
    /// Every entry set to `tau`.
    pub fn uniform(num_tx: usize, tau: u64) -> Self {
        ThresholdTree {
            levels: (0..num_tx).map(|j| vec![tau; 1 << j]).collect(),
        }
    }

    pub fn from_levels(levels: Vec<Vec<u64>>) -> Result<Self> {
        for (j, level) in levels.iter().enumerate() {
            if level.len() != 1 << j {
                return Err(Error::Dimension(format!(
                    "TX {} needs {} thresholds, got {}",
                    j + 1,
                    1usize << j,
                    level.len()
                )));
            }
        }
        Ok(ThresholdTree { levels })
    }

    pub fn num_tx(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<u64>] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &[u64] {
        &self.levels[j]
    }

    pub fn get(&self, j: usize, prefix: usize) -> u64 {
        self.levels[j][prefix]
    }

    pub fn set(&mut self, j: usize, prefix: usize, tau: u64) {
        self.levels[j][prefix] = tau;
    }

    pub fn entry_mut(&mut self, j: usize, prefix: usize) -> &mut u64 {
        &mut self.levels[j][prefix]
    }

    /// Total number of entries, 2^K - 1.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Entries flattened level by level.
    pub fn flatten(&self) -> Vec<u64> {
        self.levels.iter().flatten().copied().collect()
    }
}

/// Prefix index of bits ŝ_0..ŝ_{j-1}, ŝ_0 most significant.
pub fn prefix_index(prefix: &[u8]) -> usize {
    prefix.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// Same as `prefix_index` for the low `j` bits of a TX-ordered mask.
#[inline]
pub(crate) fn prefix_of_mask(mask: u64, j: usize) -> usize {
    let mut idx = 0usize;
    for i in 0..j {
        idx = (idx << 1) | ((mask >> i) & 1) as usize;
    }
    idx
}

/// One threshold per TX.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarThresholds(pub Vec<u64>);

impl ScalarThresholds {
    pub fn uniform(num_tx: usize, tau: u64) -> Self {
        ScalarThresholds(vec![tau; num_tx])
    }

    pub fn get(&self, j: usize) -> u64 {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check(j: usize, frame: &SymbolFrame, gains: &GainMatrix) -> Result<()> {
    if j >= gains.num_tx() {
        return Err(Error::Dimension(format!(
            "TX index {j} out of range for {} TXs",
            gains.num_tx()
        )));
    }
    if frame.num_tx() != gains.num_tx() || frame.isi_length() != gains.isi_length() {
        return Err(Error::Dimension("frame shape does not match the gain matrix".into()));
    }
    Ok(())
}

/// TX index that owned slot `l` back from TX j's current TDMA slot.
pub fn tdma_owner(j: usize, l: usize, num_tx: usize) -> usize {
    (j + num_tx - l % num_tx) % num_tx
}

/// Mean at TX j's sampling point counting only TX j's own pulses.
pub fn mean_mdma(j: usize, frame: &SymbolFrame, gains: &GainMatrix, noise: f64) -> Result<f64> {
    check(j, frame, gains)?;
    let mut mean = noise;
    for l in 0..=gains.isi_length() {
        if frame.bit(j, l) == 1 {
            mean += gains.get(j, j, l);
        }
    }
    Ok(mean)
}

/// Mean at TX j's sampling point when each past slot belonged to one TX in
/// descending cyclic order.
pub fn mean_tdma(j: usize, frame: &SymbolFrame, gains: &GainMatrix, noise: f64) -> Result<f64> {
    check(j, frame, gains)?;
    let k = gains.num_tx();
    let mut mean = noise;
    for l in 0..=gains.isi_length() {
        let owner = tdma_owner(j, l, k);
        if frame.bit(owner, l) == 1 {
            mean += gains.get(owner, j, l);
        }
    }
    Ok(mean)
}

/// Mean at TX j's sampling point with every TX active in every slot.
pub fn mean_noma(j: usize, frame: &SymbolFrame, gains: &GainMatrix, noise: f64) -> Result<f64> {
    check(j, frame, gains)?;
    Ok(noise + frame.dot(gains.row(j)))
}

/// 1 iff `sample >= tau`.
#[inline]
pub fn detect_scalar(sample: u64, tau: u64) -> u8 {
    u8::from(sample >= tau)
}

/// Tree-based SIC: TX j is compared against the threshold selected by the
/// bits already decoded for TXs 0..j.
pub fn sic_detect(samples: &[u64], tree: &ThresholdTree) -> Result<Vec<u8>> {
    if samples.len() != tree.num_tx() {
        return Err(Error::Dimension(format!(
            "{} samples for a {}-TX tree",
            samples.len(),
            tree.num_tx()
        )));
    }
    let mask = sic_detect_mask(samples, tree);
    Ok((0..samples.len()).map(|j| ((mask >> j) & 1) as u8).collect())
}

/// `sic_detect` returning the decisions as a TX-ordered bit mask.
#[inline]
pub fn sic_detect_mask(samples: &[u64], tree: &ThresholdTree) -> u64 {
    let mut mask = 0u64;
    let mut prefix = 0usize;
    for (j, &x) in samples.iter().enumerate() {
        let bit = detect_scalar(x, tree.get(j, prefix));
        mask |= u64::from(bit) << j;
        prefix = (prefix << 1) | usize::from(bit);
    }
    mask
}

/// Detection with the threshold selected by a known prefix (pilot truth)
/// instead of the decoded one. Returns the decisions as a mask.
#[inline]
pub fn known_prefix_detect_mask(samples: &[u64], tree: &ThresholdTree, truth: u64) -> u64 {
    let mut mask = 0u64;
    for (j, &x) in samples.iter().enumerate() {
        let bit = detect_scalar(x, tree.get(j, prefix_of_mask(truth, j)));
        mask |= u64::from(bit) << j;
    }
    mask
}

/// Classical subtraction SIC: after deciding TX i, subtract
/// `round(means[i][j])` from every downstream sample j before comparing it
/// against `base[j]`.
pub fn subtraction_sic_detect(samples: &[u64], base: &[u64], means: &[Vec<f64>]) -> Result<Vec<u8>> {
    let k = samples.len();
    if base.len() != k || means.len() != k || means.iter().any(|m| m.len() != k) {
        return Err(Error::Dimension("subtraction SIC inputs must all cover K TXs".into()));
    }
    let mut out = vec![0u8; k];
    for j in 0..k {
        let cancelled: i128 = (0..j)
            .filter(|&i| out[i] == 1)
            .map(|i| means[i][j].round() as i128)
            .sum();
        let residual = i128::from(samples[j]) - cancelled;
        out[j] = u8::from(residual >= i128::from(base[j]));
    }
    Ok(out)
}

/// Tree equivalent to subtraction SIC with the same rounding:
/// τ_j^b = base_j + Σ_{i<j} b_i · round(means[i][j]).
pub fn tree_from_subtraction(base: &[u64], means: &[Vec<f64>]) -> Result<ThresholdTree> {
    let k = base.len();
    if means.len() != k || means.iter().any(|m| m.len() != k) {
        return Err(Error::Dimension("means must be K x K".into()));
    }
    let levels = (0..k)
        .map(|j| {
            (0..1usize << j)
                .map(|b| {
                    let shift: u64 = (0..j)
                        .filter(|&i| (b >> (j - 1 - i)) & 1 == 1)
                        .map(|i| means[i][j].round() as u64)
                        .sum();
                    base[j] + shift
                })
                .collect()
        })
        .collect();
    ThresholdTree::from_levels(levels)
}
