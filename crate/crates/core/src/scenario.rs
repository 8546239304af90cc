//! A complete network description: geometry, emissions and sampling.

use serde::{Deserialize, Serialize};

use crate::channel::{hit_probability_raw, PhysicalParams, SamplingModel, TxConfig};
use crate::error::{Error, Result};

/// Micrometres to metres.
pub const MICRON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub physical: PhysicalParams,
    pub tx: TxConfig,
    pub sampling: SamplingModel,
}

impl Scenario {
    /// `k` TXs at 10 µm, r = 1 µm, D = 1e-9 m²/s, T = 1 s, L = 1, no noise,
    /// synchronized, every TX emitting the full budget of 1e6 molecules.
    pub fn baseline(k: usize) -> Self {
        Scenario {
            physical: PhysicalParams {
                distances: vec![10.0 * MICRON; k],
                rx_radius: MICRON,
                diffusion: 1e-9,
                symbol_period: 1.0,
                isi_length: 1,
                noise_mean: 0.0,
            },
            tx: TxConfig {
                offsets: vec![0.0; k],
                emitted: vec![1e6; k],
                budget: 1e6,
            },
            sampling: SamplingModel::default(),
        }
    }

    pub fn num_tx(&self) -> usize {
        self.physical.num_tx()
    }

    pub fn isi_length(&self) -> usize {
        self.physical.isi_length
    }

    /// Number of bits in one symbol frame, K(L+1).
    pub fn frame_bits(&self) -> usize {
        self.num_tx() * (self.isi_length() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.tx.validate(self.num_tx(), self.physical.symbol_period)?;
        self.sampling.validate()?;
        if self.frame_bits() > 64 {
            return Err(Error::config(
                "isi_length",
                format!("K(L+1) = {} exceeds the 64-bit frame limit", self.frame_bits()),
            ));
        }
        Ok(())
    }

    /// Jitter-free sampling instants t_p,j.
    pub fn peak_times(&self) -> Vec<f64> {
        SamplingModel::peak_times(&self.physical, &self.tx)
    }

    /// Peak mean of TX 1 at its own sampling point; the SNR reference.
    pub fn reference_mean(&self) -> f64 {
        let d = self.physical.distances[0];
        let t = d * d / (6.0 * self.physical.diffusion);
        self.tx.emitted[0] * hit_probability_raw(t, d, self.physical.rx_volume(), self.physical.diffusion)
    }

    /// Sets the noise mean from an SNR in dB relative to `reference_mean`.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.physical.noise_mean = noise_from_snr(self.reference_mean(), snr_db);
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.tx.offsets = offsets;
        self
    }

    pub fn with_emitted(mut self, emitted: Vec<f64>) -> Self {
        self.tx.emitted = emitted;
        self
    }

    pub fn with_isi_length(mut self, l: usize) -> Self {
        self.physical.isi_length = l;
        self
    }

    /// Copy keeping only the listed TXs, in the given order.
    pub fn subset(&self, keep: &[usize]) -> Scenario {
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut s = self.clone();
        s.physical.distances = pick(&self.physical.distances);
        s.tx.offsets = pick(&self.tx.offsets);
        s.tx.emitted = pick(&self.tx.emitted);
        s
    }
}

/// λ_n = reference / 10^(SNR/20); infinite SNR means no noise.
pub fn noise_from_snr(reference: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        reference / 10f64.powf(snr_db / 20.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_conversion() {
        let mut s = Scenario::baseline(2);
        let r = s.reference_mean();
        assert!((r - 308.360_659_607_538_55).abs() < 1e-9);
        s.set_snr_db(20.0);
        assert!((s.physical.noise_mean - r / 10.0).abs() < 1e-12);
        s.set_snr_db(f64::INFINITY);
        assert_eq!(s.physical.noise_mean, 0.0);
        assert!((noise_from_snr(r, -50.0) / r - 10f64.powf(2.5)).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(Scenario::baseline(3).validate().is_ok());
        let s = Scenario::baseline(2).with_offsets(vec![0.0, 1.0]);
        assert!(s.validate().is_err());
        let s = Scenario::baseline(2).with_emitted(vec![1e6, 2e6]);
        assert!(s.validate().is_err());
        let s = Scenario::baseline(9).with_isi_length(7);
        assert!(s.validate().is_err());
    }

    #[test]
    fn subset_keeps_order() {
        let s = Scenario::baseline(3)
            .with_offsets(vec![0.1, 0.2, 0.3])
            .with_emitted(vec![1.0, 2.0, 3.0]);
        let t = s.subset(&[2, 0]);
        assert_eq!(t.tx.offsets, vec![0.3, 0.1]);
        assert_eq!(t.tx.emitted, vec![3.0, 1.0]);
        assert_eq!(t.num_tx(), 2);
    }
}
