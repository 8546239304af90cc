//! Diffusion channel physics: hit probability of a point-source pulse at a
//! passive spherical receiver, Poisson signal means, peak times and the
//! stochastic draws used by the simulators.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Above this ratio r/d the uniform-concentration assumption is no longer
/// considered accurate.
pub const UCA_RATIO_LIMIT: f64 = 0.15;

/// Geometry, diffusion and noise parameters of the network. SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Distance of every TX from the RX centre (m). Its length is K.
    pub distances: Vec<f64>,
    /// RX radius (m).
    pub rx_radius: f64,
    /// Diffusion coefficient (m²/s).
    pub diffusion: f64,
    /// Symbol period T (s).
    pub symbol_period: f64,
    /// Number of past slots contributing ISI.
    pub isi_length: usize,
    /// Mean of the additive Poisson noise (molecules).
    pub noise_mean: f64,
}

impl PhysicalParams {
    pub fn num_tx(&self) -> usize {
        self.distances.len()
    }

    pub fn rx_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.rx_radius.powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(Error::config("num_tx", "at least one TX is required"));
        }
        if let Some(d) = self.distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::config("distances", format!("distance {d} must be > 0")));
        }
        if !(self.rx_radius > 0.0 && self.rx_radius.is_finite()) {
            return Err(Error::config("rx_radius", "must be > 0"));
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(Error::config("diffusion", "must be > 0"));
        }
        if !(self.symbol_period > 0.0 && self.symbol_period.is_finite()) {
            return Err(Error::config("symbol_period", "must be > 0"));
        }
        if !(self.noise_mean >= 0.0 && self.noise_mean.is_finite()) {
            return Err(Error::config("noise_mean", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// TX indices (0-based) whose link violates r < 0.15·d. Such links are
    /// still simulated; callers surface these as warnings.
    pub fn uca_violations(&self) -> Vec<usize> {
        self.distances
            .iter()
            .enumerate()
            .filter(|(_, d)| self.rx_radius >= UCA_RATIO_LIMIT * **d)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-TX emission configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    /// Emission instant inside the slot, in [0, T).
    pub offsets: Vec<f64>,
    /// Molecules released for a bit-1 (real-valued).
    pub emitted: Vec<f64>,
    /// Molecule budget per TX.
    pub budget: f64,
}

impl TxConfig {
    pub fn validate(&self, num_tx: usize, symbol_period: f64) -> Result<()> {
        if self.offsets.len() != num_tx {
            return Err(Error::config(
                "offsets",
                format!("expected {num_tx} offsets, got {}", self.offsets.len()),
            ));
        }
        if self.emitted.len() != num_tx {
            return Err(Error::config(
                "n_tx",
                format!("expected {num_tx} molecule counts, got {}", self.emitted.len()),
            ));
        }
        if let Some(t) = self.offsets.iter().find(|t| !(**t >= 0.0 && **t < symbol_period)) {
            return Err(Error::config("offsets", format!("offset {t} outside [0, T)")));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::config("n_tx_max", "budget must be finite and >= 0"));
        }
        if let Some(n) = self.emitted.iter().find(|n| !(**n >= 0.0 && **n <= self.budget)) {
            return Err(Error::config(
                "n_tx",
                format!("molecule count {n} outside [0, {}]", self.budget),
            ));
        }
        Ok(())
    }
}

/// When the sampling-time jitter is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedrawPolicy {
    #[default]
    PerSymbol,
    PerIteration,
    Fixed,
}

/// Sampling-time acquisition model: t_s,j is uniform on a window of width
/// `jitter_width` around the peak time of TX j.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SamplingModel {
    pub jitter_width: f64,
    pub redraw_policy: RedrawPolicy,
}

impl SamplingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_width >= 0.0 && self.jitter_width.is_finite()) {
            return Err(Error::config("jitter", "jitter width must be finite and >= 0"));
        }
        Ok(())
    }

    /// Peak sampling instants, no jitter.
    pub fn peak_times(physical: &PhysicalParams, tx: &TxConfig) -> Vec<f64> {
        physical
            .distances
            .iter()
            .zip(&tx.offsets)
            .map(|(d, off)| d * d / (6.0 * physical.diffusion) + off)
            .collect()
    }

    /// Jitter deviations, one per TX, each uniform on [-Δp/2, Δp/2].
    pub fn draw_deviations<R: Rng + ?Sized>(&self, num_tx: usize, rng: &mut R) -> Vec<f64> {
        (0..num_tx)
            .map(|_| draw_sampling_time(0.0, self.jitter_width, rng))
            .collect()
    }
}

#[inline]
pub(crate) fn hit_probability_raw(t: f64, d: f64, rx_volume: f64, diffusion: f64) -> f64 {
    let spread = 4.0 * diffusion * t;
    rx_volume / (PI * spread).powf(1.5) * (-d * d / spread).exp()
}

/// Probability that a molecule released at distance `d` is inside the RX
/// volume `t` seconds after release.
pub fn hit_probability(t: f64, d: f64, params: &PhysicalParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("hit probability needs t > 0, got {t}")));
    }
    if !(d > 0.0) {
        return Err(Error::domain(format!("hit probability needs d > 0, got {d}")));
    }
    Ok(hit_probability_raw(t, d, params.rx_volume(), params.diffusion))
}

/// Poisson mean of the received count for `n_tx` released molecules.
pub fn mean_signal(n_tx: f64, t: f64, d: f64, params: &PhysicalParams) -> Result<f64> {
    if !(n_tx >= 0.0) {
        return Err(Error::domain(format!("molecule count must be >= 0, got {n_tx}")));
    }
    Ok(n_tx * hit_probability(t, d, params)?)
}

/// Time of the maximum of the hit probability, shifted by the TX offset.
pub fn peak_time(d: f64, diffusion: f64, t_off: f64) -> Result<f64> {
    if !(d > 0.0 && diffusion > 0.0) {
        return Err(Error::domain("peak time needs d > 0 and D > 0"));
    }
    Ok(d * d / (6.0 * diffusion) + t_off)
}

/// Uniform draw on [t_p - Δp/2, t_p + Δp/2]; exactly `t_p` when Δp = 0.
pub fn draw_sampling_time<R: Rng + ?Sized>(t_p: f64, width: f64, rng: &mut R) -> f64 {
    if width <= 0.0 {
        return t_p;
    }
    t_p + width * (rng.random::<f64>() - 0.5)
}

/// Exact Poisson draw for any mean >= 0.
pub fn draw_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::domain(format!(
            "Poisson mean must be finite and >= 0, got {mean}"
        )));
    }
    Ok(poisson_draw_unchecked(mean, rng))
}

#[inline]
pub(crate) fn poisson_draw_unchecked<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive, non-finite or > 1.8e19 means.
    let dist = Poisson::new(mean).expect("Poisson mean within sampler range");
    dist.sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamSource};

    fn params() -> PhysicalParams {
        PhysicalParams {
            distances: vec![10e-6],
            rx_radius: 1e-6,
            diffusion: 1e-9,
            symbol_period: 1.0,
            isi_length: 1,
            noise_mean: 0.0,
        }
    }

    // 60-digit evaluation of the hit probability at the peak.
    const P_PEAK_10UM: f64 = 3.083_606_596_075_385_5e-4;

    #[test]
    fn peak_value_matches_high_precision() {
        let p = params();
        let tp = peak_time(10e-6, 1e-9, 0.0).unwrap();
        assert!((tp - 1.0 / 60.0).abs() < 1e-15);
        let v = hit_probability(tp, 10e-6, &p).unwrap();
        assert!((v / P_PEAK_10UM - 1.0).abs() < 1e-13, "{v}");
        let lam = mean_signal(1e6, tp, 10e-6, &p).unwrap();
        assert!((lam - 308.360_659_607_538_55).abs() < 1e-9);
    }

    #[test]
    fn limits_vanish() {
        let p = params();
        assert!(hit_probability(1e-6, 10e-6, &p).unwrap() < 1e-300);
        assert!(hit_probability(1e9, 10e-6, &p).unwrap() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let p = params();
        assert!(hit_probability(0.0, 10e-6, &p).is_err());
        assert!(hit_probability(1.0, 0.0, &p).is_err());
        assert!(mean_signal(-1.0, 1.0, 10e-6, &p).is_err());
        assert!(draw_poisson(-0.5, &mut StreamSource::new(1).stream(Purpose::Reception, 0)).is_err());
    }

    #[test]
    fn peak_time_scaling() {
        let base = peak_time(10e-6, 1e-9, 0.0).unwrap();
        assert!((peak_time(10e-6, 1e-9, 0.4).unwrap() - (base + 0.4)).abs() < 1e-15);
        assert!((peak_time(20e-6, 1e-9, 0.0).unwrap() / base - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unimodal_and_decreasing_in_distance() {
        let mut p = params();
        for &d in &[5e-6, 10e-6, 20e-6] {
            for &diff in &[1e-10, 1e-9, 5e-9] {
                p.diffusion = diff;
                let tp = peak_time(d, diff, 0.0).unwrap();
                let at = |t| hit_probability(t, d, &p).unwrap();
                assert!(at(0.5 * tp) < at(tp));
                assert!(at(2.0 * tp) < at(tp));
                assert!(at(tp * 1.001) < at(tp) && at(tp * 0.999) < at(tp));
                assert!(hit_probability(tp, d * 1.1, &p).unwrap() < at(tp));
            }
        }
    }

    #[test]
    fn mean_is_linear_in_emission() {
        let p = params();
        for &t in &[0.01, 0.0166, 0.3, 2.0] {
            let one = mean_signal(123_456.0, t, 10e-6, &p).unwrap();
            let two = mean_signal(246_912.0, t, 10e-6, &p).unwrap();
            assert!((two / one - 2.0).abs() < 1e-12);
            assert_eq!(mean_signal(0.0, t, 10e-6, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn uca_flagging() {
        let mut p = params();
        assert!(p.uca_violations().is_empty());
        p.distances = vec![10e-6, 5e-6];
        assert_eq!(p.uca_violations(), vec![1]);
    }

    #[test]
    fn sampling_time_support_and_mean() {
        let mut rng = StreamSource::new(9).stream(Purpose::Jitter, 0);
        assert_eq!(draw_sampling_time(0.3, 0.0, &mut rng), 0.3);
        let (tp, w, n) = (0.5, 0.1, 100_000);
        let mut sum = 0.0;
        for _ in 0..n {
            let t = draw_sampling_time(tp, w, &mut rng);
            assert!(t >= tp - w / 2.0 && t <= tp + w / 2.0);
            sum += t;
        }
        let mean = sum / n as f64;
        assert!((mean - tp).abs() < 3.0 * w / (12.0 * n as f64).sqrt());
    }

    #[test]
    fn poisson_moments() {
        let mut rng = StreamSource::new(3).stream(Purpose::Reception, 0);
        assert_eq!(draw_poisson(0.0, &mut rng).unwrap(), 0);
        let lam = 308.3;
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = draw_poisson(lam, &mut rng).unwrap() as f64;
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - lam).abs() < 1.0);
        assert!((var / lam - 1.0).abs() < 0.02);

        let tiny = (0..100_000)
            .filter(|_| draw_poisson(1e-6, &mut rng).unwrap() != 0)
            .count();
        assert!(tiny <= 3);
    }
}
