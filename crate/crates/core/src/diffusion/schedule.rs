//! Noise schedule and the closed-form corruption / posterior formulas.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Precomputed variance schedule over steps `1..=t_max`.
///
/// The retained signal fraction `bar_alpha(t)` falls linearly: the noise share
/// `1 - bar_alpha(t)` ramps from `s * alpha_min` at the first step to
/// `s * alpha_max` at the last, so `s` scales the whole corruption band. The
/// convention `bar_alpha(0) = 1` (an untouched signal) anchors the per-step
/// ratios `alpha(t) = bar_alpha(t) / bar_alpha(t-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<T> {
    s: T,
    alpha_min: T,
    alpha_max: T,
    bar_alpha: Vec<T>,
    alpha: Vec<T>,
}

impl<T: Scalar> NoiseSchedule<T> {
    pub fn build(t_max: usize, s: T, alpha_min: T, alpha_max: T) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::invalid("t_max", "schedule needs at least one step"));
        }
        if !(s > T::zero() && s < T::one()) {
            return Err(Error::invalid("s", format!("{s} outside (0, 1)")));
        }
        if !(alpha_min > T::zero() && alpha_min < alpha_max && alpha_max < T::one()) {
            return Err(Error::invalid(
                "alpha_min/alpha_max",
                format!("need 0 < {alpha_min} < {alpha_max} < 1"),
            ));
        }
        let mut bar_alpha = Vec::with_capacity(t_max);
        let mut alpha = Vec::with_capacity(t_max);
        let mut prev_bar = T::one();
        for t in 1..=t_max {
            let ramp = if t_max == 1 {
                T::zero()
            } else {
                T::from_usize(t - 1).expect("step fits in scalar")
                    / T::from_usize(t_max - 1).expect("step fits in scalar")
            };
            let noise_share = s * (alpha_min + ramp * (alpha_max - alpha_min));
            let bar = T::one() - noise_share;
            alpha.push(bar / prev_bar);
            bar_alpha.push(bar);
            prev_bar = bar;
        }
        Ok(NoiseSchedule {
            s,
            alpha_min,
            alpha_max,
            bar_alpha,
            alpha,
        })
    }

    /// Number of steps.
    pub fn t_max(&self) -> usize {
        self.bar_alpha.len()
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn alpha_min(&self) -> T {
        self.alpha_min
    }

    pub fn alpha_max(&self) -> T {
        self.alpha_max
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_max() {
            return Err(Error::StepOutOfRange {
                t,
                t_max: self.t_max(),
            });
        }
        Ok(())
    }

    /// Retained signal fraction after `t` steps; `t = 0` is the clean signal.
    pub fn bar_alpha(&self, t: usize) -> Result<T> {
        if t == 0 {
            return Ok(T::one());
        }
        self.check_step(t)?;
        Ok(self.bar_alpha[t - 1])
    }

    /// Per-step signal ratio `bar_alpha(t) / bar_alpha(t-1)`.
    pub fn alpha(&self, t: usize) -> Result<T> {
        self.check_step(t)?;
        Ok(self.alpha[t - 1])
    }

    /// Coefficients of the posterior mean `c_noisy * e_t + c_clean * e0` and
    /// the posterior variance at step `t`.
    pub fn posterior_coefficients(&self, t: usize) -> Result<(T, T, T)> {
        self.check_step(t)?;
        let bar_t = self.bar_alpha(t)?;
        let bar_prev = self.bar_alpha(t - 1)?;
        let alpha_t = self.alpha(t)?;
        let denom = T::one() - bar_t;
        let c_noisy = alpha_t.sqrt() * (T::one() - bar_prev) / denom;
        let c_clean = bar_prev.sqrt() * (T::one() - alpha_t) / denom;
        let variance = (T::one() - alpha_t) * (T::one() - bar_prev) / denom;
        Ok((c_noisy, c_clean, variance))
    }
}

/// Corrupt a clean vector to step `t` with the supplied noise draw:
/// `sqrt(bar_alpha(t)) * e0 + sqrt(1 - bar_alpha(t)) * eps`.
pub fn forward_noise<T: Scalar>(
    e0: &[T],
    t: usize,
    schedule: &NoiseSchedule<T>,
    eps: &[T],
) -> Result<Vec<T>> {
    schedule.check_step(t)?;
    if e0.len() != eps.len() {
        return Err(Error::DimensionMismatch {
            context: "signal vs noise length",
            expected: e0.len(),
            got: eps.len(),
        });
    }
    let bar = schedule.bar_alpha(t)?;
    let signal = bar.sqrt();
    let noise = (T::one() - bar).sqrt();
    Ok(e0
        .iter()
        .zip(eps)
        .map(|(&x, &e)| signal * x + noise * e)
        .collect())
}

/// Mean and variance of the one-step denoising posterior at step `t`, given
/// the noisy vector and the clean vector it came from.
///
/// At `t = 1` the posterior collapses onto the clean vector: the mean equals
/// `e0` and the variance is exactly zero.
pub fn posterior_stats<T: Scalar>(
    e_t: &[T],
    e0: &[T],
    t: usize,
    schedule: &NoiseSchedule<T>,
) -> Result<(Vec<T>, T)> {
    if e_t.len() != e0.len() {
        return Err(Error::DimensionMismatch {
            context: "noisy vs clean length",
            expected: e0.len(),
            got: e_t.len(),
        });
    }
    let (c_noisy, c_clean, variance) = schedule.posterior_coefficients(t)?;
    let mean = e_t
        .iter()
        .zip(e0)
        .map(|(&n, &c)| c_noisy * n + c_clean * c)
        .collect();
    Ok((mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> NoiseSchedule<f64> {
        NoiseSchedule::build(10, 0.1, 0.1, 0.9).unwrap()
    }

    #[test]
    fn noise_share_ramps_linearly_between_the_stated_endpoints() {
        let sched = reference();
        assert_relative_eq!(1.0 - sched.bar_alpha(1).unwrap(), 0.01, epsilon = 1e-12);
        assert_relative_eq!(1.0 - sched.bar_alpha(5).unwrap(), 0.0455555555555, epsilon = 1e-9);
        assert_relative_eq!(1.0 - sched.bar_alpha(10).unwrap(), 0.09, epsilon = 1e-12);
        assert_relative_eq!(sched.alpha(1).unwrap(), 0.99, epsilon = 1e-12);
    }

    #[test]
    fn bar_alpha_decreases_and_stays_in_unit_interval() {
        let sched = NoiseSchedule::<f64>::build(50, 0.3, 0.05, 0.95).unwrap();
        let mut prev = 1.0;
        for t in 1..=50 {
            let bar = sched.bar_alpha(t).unwrap();
            assert!(bar > 0.0 && bar < 1.0);
            assert!(bar < prev);
            prev = bar;
        }
    }

    #[test]
    fn single_step_schedule_uses_the_lower_endpoint() {
        let sched = NoiseSchedule::<f64>::build(1, 0.1, 0.1, 0.9).unwrap();
        assert_relative_eq!(1.0 - sched.bar_alpha(1).unwrap(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(NoiseSchedule::<f64>::build(0, 0.1, 0.1, 0.9).is_err());
        assert!(NoiseSchedule::<f64>::build(10, 0.0, 0.1, 0.9).is_err());
        assert!(NoiseSchedule::<f64>::build(10, 1.0, 0.1, 0.9).is_err());
        assert!(NoiseSchedule::<f64>::build(10, 0.1, 0.9, 0.1).is_err());
        assert!(NoiseSchedule::<f64>::build(10, 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn forward_noise_matches_hand_computation() {
        // bar_alpha = 0.75 is not on the reference schedule, so build one where
        // step 1 lands exactly there: 1 - s * alpha_min = 0.75.
        let sched = NoiseSchedule::<f64>::build(1, 0.5, 0.5, 0.9).unwrap();
        assert_relative_eq!(sched.bar_alpha(1).unwrap(), 0.75, epsilon = 1e-15);
        let noisy = forward_noise(&[1.0, 0.0], 1, &sched, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(noisy[0], 1.3660254, epsilon = 1e-6);
        assert_relative_eq!(noisy[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn forward_noise_validates_step_and_shape() {
        let sched = reference();
        assert!(forward_noise(&[1.0], 0, &sched, &[1.0]).is_err());
        assert!(forward_noise(&[1.0], 11, &sched, &[1.0]).is_err());
        assert!(forward_noise(&[1.0, 2.0], 1, &sched, &[1.0]).is_err());
    }

    #[test]
    fn posterior_at_step_one_returns_the_clean_vector_exactly() {
        let sched = reference();
        let (mean, var) = posterior_stats(&[5.0, -3.0], &[0.25, 0.5], 1, &sched).unwrap();
        assert_eq!(mean, vec![0.25, 0.5]);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn posterior_mean_coefficients_recombine_to_the_previous_signal_level() {
        // Feeding e_t = sqrt(bar_t) * e and e0 = e must give sqrt(bar_{t-1}) * e.
        let sched = reference();
        for t in 2..=10 {
            let bar_t: f64 = sched.bar_alpha(t).unwrap();
            let bar_prev = sched.bar_alpha(t - 1).unwrap();
            let e = [1.0, -2.0, 0.5];
            let e_t: Vec<f64> = e.iter().map(|&x| bar_t.sqrt() * x).collect();
            let (mean, var) = posterior_stats(&e_t, &e, t, &sched).unwrap();
            for (m, &x) in mean.iter().zip(&e) {
                assert_relative_eq!(*m, bar_prev.sqrt() * x, epsilon = 1e-12);
            }
            assert!(var > 0.0);
        }
    }
}
