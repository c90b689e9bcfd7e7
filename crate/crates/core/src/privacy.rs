//! zCDP accounting and per-round Gaussian noise calibration.
//!
//! Round 1 releases clipped class sums (sensitivity `kappa`); every later
//! round releases a retraining update where one sample can move two class
//! rows, giving sensitivity `sqrt(2) * kappa`. The total zCDP budget implied
//! by `(epsilon, delta)` is split evenly over the planned `J` rounds.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::hdc::AssociativeMemory;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub delta: f64,
    pub kappa: f64,
    /// Planned number of rounds.
    pub rounds: usize,
}

impl PrivacySpec {
    pub fn validate(&self) -> Result<()> {
        check_eps_delta(self.epsilon, self.delta)?;
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("round count must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub sigma: Vec<f64>,
    pub rho_max: f64,
    pub rho_per_round: Vec<f64>,
}

impl NoiseSchedule {
    /// Standard deviation for 1-based round `j`.
    pub fn sigma(&self, j: usize) -> f64 {
        self.sigma[j - 1]
    }

    /// Budget spent after rounds `1..=j`.
    pub fn rho_spent(&self, j: usize) -> f64 {
        compose(&self.rho_per_round[..j.min(self.rho_per_round.len())])
    }
}

fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_delta(delta)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Largest zCDP budget that still converts to `(epsilon, delta)`-DP.
pub fn rho_max(epsilon: f64, delta: f64) -> Result<f64> {
    check_eps_delta(epsilon, delta)?;
    let l = (1.0 / delta).ln();
    // (sqrt(e + l) - sqrt(l))^2 rewritten as e^2 / (sqrt(e + l) + sqrt(l))^2
    // to avoid cancellation when epsilon is small next to ln(1/delta)
    let s = (epsilon + l).sqrt() + l.sqrt();
    Ok((epsilon / s).powi(2))
}

/// l2-sensitivity of the release in 1-based round `j`.
pub fn sensitivity(j: usize, kappa: f64) -> Result<f64> {
    match j {
        0 => Err(Error::invalid("rounds are numbered from 1")),
        1 => Ok(kappa),
        _ => Ok(std::f64::consts::SQRT_2 * kappa),
    }
}

pub fn noise_schedule(spec: &PrivacySpec) -> Result<NoiseSchedule> {
    spec.validate()?;
    let rho = rho_max(spec.epsilon, spec.delta)?;
    let j = spec.rounds as f64;
    let sigma1 = spec.kappa * (j / (2.0 * rho)).sqrt();
    let sigma: Vec<f64> =
        (1..=spec.rounds).map(|r| if r == 1 { sigma1 } else { std::f64::consts::SQRT_2 * sigma1 }).collect();
    let rho_per_round = (1..=spec.rounds)
        .zip(&sigma)
        .map(|(r, s)| {
            let delta = sensitivity(r, spec.kappa)?;
            Ok(delta * delta / (2.0 * s * s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseSchedule { sigma, rho_max: rho, rho_per_round })
}

/// zCDP budgets add under composition.
pub fn compose(rhos: &[f64]) -> f64 {
    rhos.iter().sum()
}

pub fn zcdp_to_dp(rho: f64, delta: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be >= 0, got {rho}")));
    }
    check_delta(delta)?;
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// Add i.i.d. `N(0, sigma^2)` noise to every coordinate of every class,
/// including all-zero classes.
pub fn add_noise<R: rand::Rng + ?Sized>(am: &AssociativeMemory, sigma: f64, rng: &mut R) -> Result<AssociativeMemory> {
    let mut out = am.clone();
    add_noise_in_place(&mut out, sigma, rng)?;
    Ok(out)
}

pub fn add_noise_in_place<R: rand::Rng + ?Sized>(am: &mut AssociativeMemory, sigma: f64, rng: &mut R) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    for n in 0..am.num_classes() {
        for v in am.class_mut(n).values_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(())
}

/// Independent RNG substream for one (user, round) pair.
///
/// Streams are keyed by position rather than by draw order, so running users
/// in parallel or in a different order cannot change any noise sample.
pub fn noise_rng(seed: u64, user: usize, round: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((user as u64) << 32) | (round as u64 & 0xffff_ffff));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdc::Hypervector;
    use proptest::prelude::*;

    #[test]
    fn rho_max_reference_value() {
        assert!((rho_max(20.0, 1e-5).unwrap() - 4.930922).abs() < 1e-5);
        assert!(rho_max(1e-12, 1e-5).unwrap() < 1e-20);
        assert!(rho_max(0.0, 1e-5).is_err());
        assert!(rho_max(1.0, 1.0).is_err());
    }

    #[test]
    fn sensitivity_regimes() {
        assert_eq!(sensitivity(1, 50.0).unwrap(), 50.0);
        assert!((sensitivity(3, 50.0).unwrap() - 70.7107).abs() < 1e-4);
        assert!(sensitivity(0, 50.0).is_err());
    }

    #[test]
    fn schedule_reference_values() {
        let s = noise_schedule(&PrivacySpec { epsilon: 20.0, delta: 1e-5, kappa: 100.0, rounds: 40 }).unwrap();
        assert!((s.sigma[0] - 201.40).abs() < 0.01);
        for &sg in &s.sigma[1..] {
            assert!((sg - 284.82).abs() < 0.01);
        }
        assert!((compose(&s.rho_per_round) - s.rho_max).abs() < 1e-9 * s.rho_max);
    }

    #[test]
    fn single_round_schedule() {
        let s = noise_schedule(&PrivacySpec { epsilon: 5.0, delta: 1e-6, kappa: 3.0, rounds: 1 }).unwrap();
        assert!((s.sigma[0] - 3.0 / (2.0 * s.rho_max).sqrt()).abs() < 1e-12);
        assert!((s.rho_per_round[0] - s.rho_max).abs() < 1e-12 * s.rho_max);
    }

    #[test]
    fn compose_and_convert() {
        assert_eq!(compose(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(compose(&[]), 0.0);
        assert_eq!(zcdp_to_dp(0.0, 1e-5).unwrap(), 0.0);
        assert!((zcdp_to_dp(4.930922, 1e-5).unwrap() - 20.0).abs() < 1e-4);
        assert!(zcdp_to_dp(-1.0, 1e-5).is_err());
    }

    #[test]
    fn zero_sigma_noise_is_identity_and_seeded_noise_repeats() {
        let am = AssociativeMemory::from_classes(vec![
            Hypervector::new(vec![1.0, -2.0, 0.5]).unwrap(),
            Hypervector::zeros(3),
        ])
        .unwrap();
        assert_eq!(add_noise(&am, 0.0, &mut noise_rng(1, 0, 1)).unwrap(), am);
        let a = add_noise(&am, 2.0, &mut noise_rng(9, 3, 4)).unwrap();
        let b = add_noise(&am, 2.0, &mut noise_rng(9, 3, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.num_classes(), a.dim()), (2, 3));
        // zero classes are noised too
        assert!(!a.class(1).is_zero());
        assert_ne!(a, add_noise(&am, 2.0, &mut noise_rng(9, 4, 3)).unwrap());
    }

    proptest! {
        #[test]
        fn composition_identity(
            eps in 0.01f64..100.0,
            log_delta in -12.0f64..-1.0,
            kappa in 0.01f64..1e3,
            rounds in 1usize..200,
        ) {
            let delta = 10f64.powf(log_delta);
            let s = noise_schedule(&PrivacySpec { epsilon: eps, delta, kappa, rounds }).unwrap();
            let total = compose(&s.rho_per_round);
            prop_assert!((total - s.rho_max).abs() <= 1e-9 * s.rho_max);
            let back = zcdp_to_dp(s.rho_max, delta).unwrap();
            prop_assert!((back - eps).abs() <= 1e-6 * eps);
            for &sg in &s.sigma[1..] {
                prop_assert!((sg / s.sigma[0] - std::f64::consts::SQRT_2).abs() < 1e-12);
            }
        }

        #[test]
        fn sigma_is_linear_in_kappa(kappa in 0.1f64..100.0, rounds in 1usize..50) {
            let a = noise_schedule(&PrivacySpec { epsilon: 10.0, delta: 1e-5, kappa, rounds }).unwrap();
            let b = noise_schedule(&PrivacySpec { epsilon: 10.0, delta: 1e-5, kappa: 2.0 * kappa, rounds }).unwrap();
            for (x, y) in a.sigma.iter().zip(&b.sigma) {
                prop_assert!((y - 2.0 * x).abs() <= 1e-12 * y);
            }
        }

        #[test]
        fn zcdp_to_dp_is_monotone(r1 in 0.0f64..50.0, dr in 1e-6f64..10.0) {
            prop_assert!(zcdp_to_dp(r1 + dr, 1e-5).unwrap() > zcdp_to_dp(r1, 1e-5).unwrap());
        }
    }
}
