//! Brute-force reference shared by the oracle and acceptance tests. Gains
//! come straight from the diffusion formula, Poisson tails from statrs, and
//! every decision path of the SIC tree is walked explicitly.

use std::f64::consts::PI;

use molcomm_noma::ma_schemes::ThresholdTree;
use molcomm_noma::scenario::Scenario;
use statrs::distribution::{DiscreteCDF, Poisson};

pub fn hit(t: f64, d: f64, r: f64, diff: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let v = 4.0 / 3.0 * PI * r.powi(3);
    v / (4.0 * PI * diff * t).powf(1.5) * (-d * d / (4.0 * diff * t)).exp()
}

/// Mean contribution of TX i's pulse l slots back at TX j's sampling time.
pub fn gain(s: &Scenario, i: usize, j: usize, l: usize) -> f64 {
    let p = &s.physical;
    let t_s = p.distances[j].powi(2) / (6.0 * p.diffusion) + s.tx.offsets[j];
    let age = t_s - s.tx.offsets[i] + l as f64 * p.symbol_period;
    s.tx.emitted[i] * hit(age, p.distances[i], p.rx_radius, p.diffusion)
}

/// P(n < tau) for n ~ Poisson(mean).
pub fn below(mean: f64, tau: u64) -> f64 {
    if tau == 0 {
        0.0
    } else if mean == 0.0 {
        1.0
    } else {
        Poisson::new(mean).unwrap().cdf(tau - 1)
    }
}

pub struct Frames {
    k: usize,
    l: usize,
}

impl Frames {
    fn count(&self) -> u64 {
        1 << (self.k * (self.l + 1))
    }

    fn bit(&self, frame: u64, i: usize, l: usize) -> bool {
        (frame >> (l * self.k + i)) & 1 == 1
    }
}

pub fn noma_oracle(s: &Scenario, tree: &ThresholdTree) -> Vec<f64> {
    let k = s.num_tx();
    let fr = Frames { k, l: s.isi_length() };
    let noise = s.physical.noise_mean;
    (0..k)
        .map(|j| {
            let mut total = 0.0;
            for f in 0..fr.count() {
                let means: Vec<f64> = (0..=j)
                    .map(|x| {
                        let mut m = noise;
                        for i in 0..k {
                            for l in 0..=fr.l {
                                if fr.bit(f, i, l) {
                                    m += gain(s, i, x, l);
                                }
                            }
                        }
                        m
                    })
                    .collect();
                // Walk every decision path of TXs 0..j.
                let mut paths = vec![(0usize, 1.0f64)];
                for (i, &m) in means.iter().enumerate().take(j) {
                    let mut next = Vec::with_capacity(paths.len() * 2);
                    for (prefix, p) in paths {
                        let lo = below(m, tree.get(i, prefix));
                        next.push((prefix << 1, p * lo));
                        next.push(((prefix << 1) | 1, p * (1.0 - lo)));
                    }
                    paths = next;
                }
                for (prefix, p) in paths {
                    let lo = below(means[j], tree.get(j, prefix));
                    let err = if fr.bit(f, j, 0) { lo } else { 1.0 - lo };
                    total += p * err;
                }
            }
            total / fr.count() as f64
        })
        .collect()
}

pub fn scalar_oracle(s: &Scenario, taus: &[u64], tdma: bool) -> Vec<f64> {
    let k = s.num_tx();
    let fr = Frames { k, l: s.isi_length() };
    (0..k)
        .map(|j| {
            let mut total = 0.0;
            for f in 0..fr.count() {
                let mut m = s.physical.noise_mean;
                for l in 0..=fr.l {
                    let src = if tdma { (j + k - l % k) % k } else { j };
                    if fr.bit(f, src, l) {
                        m += gain(s, src, j, l);
                    }
                }
                let lo = below(m, taus[j]);
                let owner_bit = fr.bit(f, j, 0);
                total += if owner_bit { lo } else { 1.0 - lo };
            }
            total / fr.count() as f64
        })
        .collect()
}
