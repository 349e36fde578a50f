//! Incremental relevance statistics of a feature against the TD error.
//!
//! For a feature `phi` with sample count `T` (times it was nonzero), support
//! size `omega` and decay `eps`, the moving estimate of the inner product of
//! `phi` with a signal `E` is
//!
//! ```text
//! H(phi, E) = (T-1)/T * omega * (1 - eps) * sum_t eps^(T-t) E(s_t) phi(s_t)
//! ```
//!
//! with the newest sample carrying weight `eps^0 = 1` inside the sum. The
//! relevance `rho` uses `E = delta`, the observed error `obs` uses
//! `E = |delta|`, and the split criterion is `C = obs - rho`: it is large
//! exactly when errors of both signs cancel inside the feature's support,
//! the signature of under-resolution.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RelevanceStats {
    samples: u64,
    acc_rho: f64,
    acc_obs: f64,
    omega: f64,
    eps: f64,
}

impl RelevanceStats {
    /// `omega` is the cached support volume of the feature; `eps` in (0, 1)
    /// controls how much weight the moving average puts on recent samples.
    pub fn new(omega: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidDecay(eps));
        }
        Ok(RelevanceStats { samples: 0, acc_rho: 0.0, acc_obs: 0.0, omega, eps })
    }

    /// Number of recorded samples (`T`).
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Records one step where the feature was nonzero. Callers filter to
    /// active features; `phi_value` is the feature's (normalized) value.
    pub fn record(&mut self, phi_value: f64, delta: f64) {
        debug_assert!(phi_value != 0.0, "record() is only called for active features");
        self.samples += 1;
        self.acc_rho = self.eps * self.acc_rho + delta * phi_value;
        self.acc_obs = self.eps * self.acc_obs + delta.abs() * phi_value;
        // |delta| phi >= delta phi pointwise for nonnegative features, and
        // both accumulators decay identically.
        debug_assert!(
            phi_value < 0.0 || self.acc_obs >= self.acc_rho.abs() - 1e-12 * self.acc_obs.abs().max(1.0),
            "observed-error accumulator fell below |rho| accumulator"
        );
    }

    fn read(&self, acc: f64) -> f64 {
        if self.samples <= 1 {
            return 0.0;
        }
        let t = self.samples as f64;
        (t - 1.0) / t * self.omega * (1.0 - self.eps) * acc
    }

    /// Estimate of the inner product of the feature with the TD error.
    pub fn rho(&self) -> f64 {
        self.read(self.acc_rho)
    }

    /// Estimate of the inner product with the absolute TD error.
    pub fn obs(&self) -> f64 {
        self.read(self.acc_obs)
    }

    /// Split criterion `C = obs - rho`.
    pub fn criterion(&self) -> f64 {
        self.obs() - self.rho()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the H sum over a recorded trace; the oracle the
    /// incremental accumulators are checked against.
    fn h_sum(trace: &[(f64, f64)], omega: f64, eps: f64, magnitude: bool) -> f64 {
        let t_count = trace.len() as f64;
        if trace.len() <= 1 {
            return 0.0;
        }
        let sum: f64 = trace
            .iter()
            .enumerate()
            .map(|(t, &(phi, delta))| {
                let e = if magnitude { delta.abs() } else { delta };
                eps.powi((trace.len() - 1 - t) as i32) * e * phi
            })
            .sum();
        (t_count - 1.0) / t_count * omega * (1.0 - eps) * sum
    }

    #[test]
    fn decay_outside_unit_interval_is_rejected() {
        assert!(matches!(RelevanceStats::new(1.0, 0.0), Err(Error::InvalidDecay(_))));
        assert!(matches!(RelevanceStats::new(1.0, 1.0), Err(Error::InvalidDecay(_))));
        assert!(RelevanceStats::new(1.0, 0.99).is_ok());
    }

    #[test]
    fn empty_stats_are_zero() {
        let s = RelevanceStats::new(2.0, 0.9).unwrap();
        assert_eq!(s.rho(), 0.0);
        assert_eq!(s.obs(), 0.0);
        assert_eq!(s.criterion(), 0.0);
    }

    #[test]
    fn single_sample_reads_zero() {
        // the (T-1)/T factor wipes the first sample
        let mut s = RelevanceStats::new(1.0, 0.9).unwrap();
        s.record(1.0, 123.0);
        assert_eq!(s.rho(), 0.0);
        assert_eq!(s.obs(), 0.0);
    }

    #[test]
    fn two_sample_expansion() {
        let (omega, eps) = (3.0, 0.9);
        let mut s = RelevanceStats::new(omega, eps).unwrap();
        s.record(0.5, 2.0); // v1 = 1.0
        s.record(1.0, -1.0); // v2 = -1.0
        let expected = 0.5 * omega * (1.0 - eps) * (eps * 1.0 + (-1.0));
        assert_abs_diff_eq!(s.rho(), expected, epsilon = 1e-15);
        let expected_obs = 0.5 * omega * (1.0 - eps) * (eps * 1.0 + 1.0);
        assert_abs_diff_eq!(s.obs(), expected_obs, epsilon = 1e-15);
    }

    #[test]
    fn incremental_matches_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &eps in &[0.5, 0.9, 0.99] {
            for &omega in &[0.25, 1.0, 2.0] {
                let mut s = RelevanceStats::new(omega, eps).unwrap();
                let mut trace = Vec::new();
                for _ in 0..1000 {
                    let phi = rng.random_range(0.01..2.0);
                    let delta = rng.random_range(-5.0..5.0);
                    trace.push((phi, delta));
                    s.record(phi, delta);
                }
                let rho_direct = h_sum(&trace, omega, eps, false);
                let obs_direct = h_sum(&trace, omega, eps, true);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-30);
                assert!(rel(s.rho(), rho_direct) < 1e-10, "{} vs {}", s.rho(), rho_direct);
                assert!(rel(s.obs(), obs_direct) < 1e-10);
            }
        }
    }

    #[test]
    fn constant_sign_delta_gives_zero_criterion() {
        let mut s = RelevanceStats::new(1.0, 0.99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            s.record(rng.random_range(0.01..1.5), rng.random_range(0.0..4.0));
        }
        // |delta| = delta bitwise, so the accumulators are identical
        assert_eq!(s.criterion(), 0.0);
    }

    #[test]
    fn alternating_delta_cancels_rho_but_not_obs() {
        let mut s = RelevanceStats::new(1.0, 0.99).unwrap();
        for i in 0..100 {
            let delta = if i % 2 == 0 { 1.0 } else { -1.0 };
            s.record(1.0, delta);
        }
        assert!(s.rho().abs() < 0.01 * s.obs());
        assert!(s.obs() > 0.0);
        assert!(s.criterion() > 0.0);
    }

    #[test]
    fn sign_cancellation_beats_constant_sign() {
        // same |delta| sequence, alternating vs constant sign
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let magnitudes: Vec<f64> = (0..300).map(|_| rng.random_range(0.1..2.0)).collect();
        let mut alternating = RelevanceStats::new(1.0, 0.95).unwrap();
        let mut constant = RelevanceStats::new(1.0, 0.95).unwrap();
        for (i, &m) in magnitudes.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            alternating.record(1.0, sign * m);
            constant.record(1.0, m);
        }
        assert!(alternating.criterion() > constant.criterion());
        assert_eq!(constant.criterion(), 0.0);
    }

    #[test]
    fn criterion_nonnegative_for_nonnegative_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mut s = RelevanceStats::new(rng.random_range(0.1..2.0), 0.9).unwrap();
            for _ in 0..200 {
                s.record(rng.random_range(0.001..2.0), rng.random_range(-3.0..3.0));
            }
            assert!(s.criterion() >= 0.0);
        }
    }

    #[test]
    fn omega_scales_linearly() {
        let mut a = RelevanceStats::new(1.0, 0.9).unwrap();
        let mut b = RelevanceStats::new(2.0, 0.9).unwrap();
        for i in 0..20 {
            let delta = (i as f64 * 0.7).sin();
            a.record(0.5, delta);
            b.record(0.5, delta);
        }
        assert_abs_diff_eq!(b.rho(), 2.0 * a.rho(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.obs(), 2.0 * a.obs(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.criterion(), 2.0 * a.criterion(), epsilon = 1e-15);
    }
}
