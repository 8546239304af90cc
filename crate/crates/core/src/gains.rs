//! Mean contribution of every TX, in every past slot, at every sampling point.

use serde::{Deserialize, Serialize};

use crate::channel::{hit_probability_raw, PhysicalParams};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// λ_{i,j}[l] for source i, sampling point j, slot l (all 0-based).
///
/// Row j is the vector Λ_j laid out in symbol-frame order, entry `l*K + i`,
/// so the noiseless mean at sampling point j for a frame is a masked sum of
/// the row. A pulse of TX i emitted `l` slots back is observed at age
/// `t_s,j - t_off,i + l*T`; a non-positive age means the pulse has not been
/// emitted yet at that instant and the entry is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    num_tx: usize,
    isi_length: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    /// Jitter-free gains at the peak sampling instants.
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let times = scenario.peak_times();
        Self::at_times(&scenario.physical, &scenario.tx.offsets, &scenario.tx.emitted, &times)
    }

    /// Gains for explicit sampling instants.
    pub fn at_times(physical: &PhysicalParams, offsets: &[f64], emitted: &[f64], times: &[f64]) -> Result<Self> {
        let k = physical.num_tx();
        if offsets.len() != k || emitted.len() != k || times.len() != k {
            return Err(Error::Dimension(format!(
                "expected {k} offsets, emissions and sampling times"
            )));
        }
        let mut g = Self::zeros(k, physical.isi_length);
        for (j, &t) in times.iter().enumerate() {
            g.fill_row(j, physical, offsets, emitted, t);
        }
        Ok(g)
    }

    /// Builds directly from per-entry values, `values[j][l][i]`.
    pub fn from_entries(values: &[Vec<Vec<f64>>]) -> Result<Self> {
        let k = values.len();
        let l1 = values.first().map_or(0, Vec::len);
        if k == 0 || l1 == 0 {
            return Err(Error::Dimension("empty gain matrix".into()));
        }
        let mut g = Self::zeros(k, l1 - 1);
        for (j, row) in values.iter().enumerate() {
            if row.len() != l1 || row.iter().any(|r| r.len() != k) {
                return Err(Error::Dimension("ragged gain matrix".into()));
            }
            for (l, slot) in row.iter().enumerate() {
                for (i, &v) in slot.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::domain("gain entries must be finite and >= 0"));
                    }
                    g.data[(j * l1 + l) * k + i] = v;
                }
            }
        }
        Ok(g)
    }

    pub(crate) fn zeros(num_tx: usize, isi_length: usize) -> Self {
        GainMatrix {
            num_tx,
            isi_length,
            data: vec![0.0; num_tx * num_tx * (isi_length + 1)],
        }
    }

    /// Recomputes row j for sampling instant `t_s`.
    pub(crate) fn fill_row(&mut self, j: usize, physical: &PhysicalParams, offsets: &[f64], emitted: &[f64], t_s: f64) {
        let k = self.num_tx;
        let n = self.frame_bits();
        let volume = physical.rx_volume();
        let row = &mut self.data[j * n..(j + 1) * n];
        for l in 0..=self.isi_length {
            for i in 0..k {
                let age = t_s - offsets[i] + l as f64 * physical.symbol_period;
                row[l * k + i] = if age > 0.0 {
                    emitted[i] * hit_probability_raw(age, physical.distances[i], volume, physical.diffusion)
                } else {
                    0.0
                };
            }
        }
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn isi_length(&self) -> usize {
        self.isi_length
    }

    pub fn frame_bits(&self) -> usize {
        self.num_tx * (self.isi_length + 1)
    }

    /// λ_{i,j}[l].
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[j * self.frame_bits() + l * self.num_tx + i]
    }

    /// λ̃_j, TX j's own current-slot contribution.
    pub fn own(&self, j: usize) -> f64 {
        self.get(j, j, 0)
    }

    /// Λ_j in frame order.
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.frame_bits();
        &self.data[j * n..(j + 1) * n]
    }

    /// Largest noiseless mean reachable at any sampling point.
    pub fn max_mean(&self) -> f64 {
        (0..self.num_tx)
            .map(|j| self.row(j).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Current-slot matrix `m[i][j] = λ_{i,j}[0]`.
    pub fn current_slot(&self) -> Vec<Vec<f64>> {
        (0..self.num_tx)
            .map(|i| (0..self.num_tx).map(|j| self.get(i, j, 0)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let s = Scenario::baseline(1).with_isi_length(0);
        let g = GainMatrix::build(&s).unwrap();
        assert_eq!(g.frame_bits(), 1);
        assert!((g.own(0) - 308.360_659_607_538_55).abs() < 1e-9);
    }

    #[test]
    fn symmetric_pair() {
        let g = GainMatrix::build(&Scenario::baseline(2)).unwrap();
        assert_eq!(g.get(0, 1, 0), g.get(1, 0, 0));
        assert_eq!(g.get(0, 1, 1), g.get(1, 0, 1));
        assert!((g.get(0, 0, 1) - 2.830_261_500_747_042_5).abs() < 1e-12);
    }

    #[test]
    fn late_emission_moves_to_previous_slot() {
        let s = Scenario::baseline(2).with_offsets(vec![0.0, 0.5]);
        let g = GainMatrix::build(&s).unwrap();
        // TX 2 emits at 0.5 s, after TX 1's sampling instant at 1/60 s.
        assert_eq!(g.get(1, 0, 0), 0.0);
        assert!((g.get(1, 0, 1) - 7.628_583_407_411_607_5).abs() < 1e-12);
        // TX 1's pulse is 0.5 s old at TX 2's sampling instant.
        assert!((g.get(0, 1, 0) - 7.628_583_407_411_607_5).abs() < 1e-12);
    }

    #[test]
    fn row_layout_follows_frame_order() {
        let s = Scenario::baseline(3).with_offsets(vec![0.0, 0.03, 0.6]);
        let g = GainMatrix::build(&s).unwrap();
        for j in 0..3 {
            for l in 0..2 {
                for i in 0..3 {
                    assert_eq!(g.row(j)[l * 3 + i], g.get(i, j, l));
                }
            }
        }
    }
}
