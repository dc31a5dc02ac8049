use std::collections::VecDeque;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const MOCAP_RATE_HZ: f64 = 200.0;
const HISTORY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MocapSample {
    pub timestamp: f64,
    pub position: Point3<f64>,
    pub valid: bool,
}

/// Interval with no usable marker data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutWindow {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MocapConfig {
    pub rate: f64,
    pub noise_sigma: f64,
    pub dropouts: Vec<DropoutWindow>,
}

impl Default for MocapConfig {
    fn default() -> Self {
        Self {
            rate: MOCAP_RATE_HZ,
            noise_sigma: 0.0005,
            dropouts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MocapSensor {
    pub config: MocapConfig,
    history: VecDeque<MocapSample>,
}

impl MocapSensor {
    pub fn new(config: MocapConfig) -> Self {
        Self {
            config,
            history: VecDeque::with_capacity(HISTORY),
        }
    }

    fn dropped(&self, t: f64) -> bool {
        self.config.dropouts.iter().any(|w| t >= w.start && t < w.end)
    }

    /// Take one sample of `truth` at time `t`. `blind` forces an invalid sample.
    pub fn sample<R: Rng>(&mut self, t: f64, truth: &Point3<f64>, blind: bool, rng: &mut R) -> MocapSample {
        let valid = !blind && !self.dropped(t);
        let mut position = *truth;
        if valid && self.config.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.config.noise_sigma).expect("sigma checked at validation");
            position += Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        }
        let s = MocapSample { timestamp: t, position, valid };
        self.history.push_back(s);
        while self.history.len() > HISTORY {
            let valid = self.history.iter().filter(|s| s.valid).count();
            if self.history[0].valid && valid <= 2 {
                // keep the last two fixes through a dropout
                let gap = self.history.iter().position(|s| !s.valid).expect("more samples than fixes");
                self.history.remove(gap);
            } else {
                self.history.pop_front();
            }
        }
        s
    }

    /// Recent samples, oldest first. The two latest valid samples are
    /// always kept however long ago they were taken.
    pub fn history(&self) -> Vec<MocapSample> {
        self.history.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_samples_are_exact() {
        let mut sensor = MocapSensor::new(MocapConfig {
            noise_sigma: 0.0,
            ..MocapConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Point3::new(0.1, 0.2, 0.3);
        assert_eq!(sensor.sample(0.0, &p, false, &mut rng).position, p);
    }

    #[test]
    fn dropouts_mark_invalid() {
        let mut sensor = MocapSensor::new(MocapConfig {
            dropouts: vec![DropoutWindow { start: 1.0, end: 1.2 }],
            ..MocapConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Point3::origin();
        assert!(sensor.sample(0.995, &p, false, &mut rng).valid);
        assert!(!sensor.sample(1.0, &p, false, &mut rng).valid);
        assert!(sensor.sample(1.2, &p, false, &mut rng).valid);
        assert!(!sensor.sample(1.3, &p, true, &mut rng).valid);
        assert_eq!(sensor.history().len(), 4);
    }

    #[test]
    fn long_dropout_keeps_last_fixes() {
        let mut sensor = MocapSensor::new(MocapConfig {
            noise_sigma: 0.0,
            dropouts: vec![DropoutWindow { start: 1.0, end: 2.0 }],
            ..MocapConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 190..300 {
            sensor.sample(k as f64 * 0.005, &Point3::new(k as f64, 0.0, 0.0), false, &mut rng);
        }
        let h = sensor.history();
        assert_eq!(h.len(), HISTORY);
        let fixes: Vec<f64> = h.iter().filter(|s| s.valid).map(|s| s.position.x).collect();
        assert_eq!(fixes, vec![198.0, 199.0]);
        assert!((h.last().unwrap().timestamp - 1.495).abs() < 1e-12);
    }

    #[test]
    fn noise_has_configured_spread() {
        let mut sensor = MocapSensor::new(MocapConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let mut sum2 = 0.0;
        for k in 0..n {
            let s = sensor.sample(k as f64 / MOCAP_RATE_HZ, &Point3::origin(), false, &mut rng);
            sum2 += s.position.x * s.position.x;
        }
        let sigma = (sum2 / n as f64).sqrt();
        assert!((sigma - 0.0005).abs() < 0.00002, "{sigma}");
    }
}
