//! Uplink rate, computation/transmission energy and completion time for the
//! users of one FL deployment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::hdc::check_dim;
use crate::{Error, Result};

/// Noise PSD for -174 dBm/Hz, in W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Path loss in dB at `dist_km` kilometres.
pub fn path_loss_db(dist_km: f64) -> f64 {
    128.1 + 37.6 * dist_km.log10()
}

pub fn gain_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Distance to the base station; informational once `g` is known.
    #[serde(default)]
    pub distance_m: f64,
    pub g: f64,
    #[serde(rename = "D")]
    pub samples: usize,
    #[serde(rename = "N_classes")]
    pub num_classes: usize,
    /// Cycles per dimension per sample in round 1.
    #[serde(rename = "C_init")]
    pub c_init: f64,
    /// Cycles per dimension per sample in each retraining round.
    #[serde(rename = "C_ret")]
    pub c_ret: f64,
    pub e: f64,
    pub p_max: f64,
    pub f_max: f64,
}

impl UserProfile {
    /// Round-1 cycles per dimension, `D * C_init`.
    pub fn z(&self) -> f64 {
        self.samples as f64 * self.c_init
    }

    /// Retraining cycles per dimension, `D * C_ret`.
    pub fn g_ret(&self) -> f64 {
        self.samples as f64 * self.c_ret
    }

    /// Total CPU cycles over `j` rounds at dimension `d`.
    pub fn total_cycles(&self, d: f64, j: f64) -> f64 {
        d * (self.z() + (j - 1.0) * self.g_ret())
    }

    /// Bits uploaded per round.
    pub fn payload_bits(&self, d: f64, q: f64) -> f64 {
        self.num_classes as f64 * d * q
    }

    /// `p_max * g / N0`, the link's bandwidth-normalised SNR scale.
    pub fn snr_scale(&self, n0: f64) -> f64 {
        self.p_max * self.g / n0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g", self.g),
            ("C_init", self.c_init),
            ("C_ret", self.c_ret),
            ("p_max", self.p_max),
            ("f_max", self.f_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples == 0 || self.num_classes == 0 {
            return Err(Error::invalid("D and N_classes must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.e) {
            return Err(Error::invalid(format!("error ratio must lie in [0, 1], got {}", self.e)));
        }
        Ok(())
    }
}

/// Network-wide constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Total uplink bandwidth, Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Completion-time budget, s.
    #[serde(rename = "T")]
    pub deadline: f64,
    /// Noise power spectral density, W/Hz.
    #[serde(rename = "N0")]
    pub n0: f64,
    pub gamma: f64,
    /// Bits per uploaded hypervector coordinate.
    #[serde(default = "one")]
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { bandwidth: 10e6, deadline: 30.0, n0: dbm_per_hz_to_watts(-174.0), gamma: 1e-28, q: 1.0 }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("B", self.bandwidth), ("T", self.deadline), ("N0", self.n0), ("gamma", self.gamma), ("q", self.q)]
        {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Decision variables of the energy problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceAllocation {
    pub d: f64,
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
}

impl ResourceAllocation {
    pub fn num_users(&self) -> usize {
        self.t.len()
    }

    pub fn check_lengths(&self, users: usize) -> Result<()> {
        for len in [self.t.len(), self.b.len(), self.p.len(), self.f.len()] {
            check_dim(users, len)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute_round1: f64,
    pub compute_retrain_total: f64,
    pub transmit_total: f64,
    pub total: f64,
}

/// FDMA uplink rate in bit/s; zero bandwidth gives zero rate.
pub fn rate(b: f64, p: f64, g: f64, n0: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    b * (p * g / (n0 * b)).ln_1p() / std::f64::consts::LN_2
}

pub fn tx_time(num_classes: usize, d: f64, r: f64, q: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {r}")));
    }
    Ok(num_classes as f64 * d * q / r)
}

fn comp(cycles_per_dim: f64, d: f64, f: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(f > 0.0) {
        return Err(Error::invalid(format!("CPU frequency must be positive, got {f}")));
    }
    let work = cycles_per_dim * d;
    Ok((work / f, gamma * work * f * f))
}

/// Round-1 (time, energy) at dimension `d` and frequency `f`.
pub fn comp_round1(profile: &UserProfile, d: f64, f: f64, gamma: f64) -> Result<(f64, f64)> {
    comp(profile.z(), d, f, gamma)
}

/// (time, energy) of one retraining round.
pub fn comp_retrain(profile: &UserProfile, d: f64, f: f64, gamma: f64) -> Result<(f64, f64)> {
    comp(profile.g_ret(), d, f, gamma)
}

/// `C_sim + e * C_up`.
pub fn retrain_cycles(c_sim: f64, c_up: f64, e: f64) -> f64 {
    c_sim + e * c_up
}

pub fn tx_energy(t: f64, p: f64) -> f64 {
    t * p
}

pub fn total_energy(
    profiles: &[UserProfile],
    alloc: &ResourceAllocation,
    j_d: f64,
    gamma: f64,
) -> Result<EnergyBreakdown> {
    alloc.check_lengths(profiles.len())?;
    if !(j_d >= 1.0) {
        return Err(Error::invalid(format!("round count must be >= 1, got {j_d}")));
    }
    let mut e = EnergyBreakdown::default();
    for (i, u) in profiles.iter().enumerate() {
        let f2 = alloc.f[i] * alloc.f[i];
        e.compute_round1 += gamma * u.z() * alloc.d * f2;
        e.compute_retrain_total += (j_d - 1.0) * gamma * u.g_ret() * alloc.d * f2;
        e.transmit_total += j_d * tx_energy(alloc.t[i], alloc.p[i]);
    }
    e.total = e.compute_round1 + e.compute_retrain_total + e.transmit_total;
    Ok(e)
}

/// Compute time over all rounds plus `j_d` transmissions of length `t`.
pub fn completion_time_with_t(profile: &UserProfile, d: f64, f: f64, t: f64, j_d: f64) -> f64 {
    profile.total_cycles(d, j_d) / f + j_d * t
}

/// Completion time of user `i` when it transmits at the rate its `(b, p)`
/// supports.
pub fn completion_time(
    profile: &UserProfile,
    alloc: &ResourceAllocation,
    i: usize,
    j_d: f64,
    sys: &SystemConfig,
) -> Result<f64> {
    let f = alloc.f[i];
    if !(f > 0.0) {
        return Err(Error::invalid(format!("user {i}: CPU frequency must be positive")));
    }
    let r = rate(alloc.b[i], alloc.p[i], profile.g, sys.n0);
    let t = tx_time(profile.num_classes, alloc.d, r, sys.q)?;
    Ok(completion_time_with_t(profile, alloc.d, f, t, j_d))
}

/// Knobs for random deployments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub users: usize,
    pub radius_m: f64,
    /// Users closer than this are pushed out to it (path loss is undefined at 0).
    pub min_distance_m: f64,
    pub samples_per_user: usize,
    pub num_classes: usize,
    pub c_enc: f64,
    pub c_agg: f64,
    pub c_sim: f64,
    pub c_up: f64,
    pub e: f64,
    pub p_max: f64,
    pub f_max: f64,
    /// Multiply each gain by an exponential (Rayleigh power) draw.
    pub rayleigh: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 50,
            radius_m: 500.0,
            min_distance_m: 10.0,
            samples_per_user: 1200,
            num_classes: 10,
            c_enc: 28.0 * 28.0 * 2.0,
            c_agg: 28.0 * 28.0 * 2.0,
            c_sim: 10.0 * 10.0,
            c_up: 8.0,
            e: 0.4,
            p_max: 1e-3,
            f_max: 2.3e9,
            rayleigh: false,
        }
    }
}

/// A set of users plus the network they share; the JSON scenario file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub users: Vec<UserProfile>,
}

/// Users dropped uniformly over a disk around the base station.
pub fn gen_scenario(seed: u64, cfg: &ScenarioConfig) -> Result<Vec<UserProfile>> {
    if !(cfg.radius_m > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    if !(cfg.min_distance_m >= 0.0) || cfg.min_distance_m > cfg.radius_m {
        return Err(Error::invalid("minimum distance must lie in [0, radius]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_init = cfg.c_enc + cfg.c_agg;
    let c_ret = retrain_cycles(cfg.c_sim, cfg.c_up, cfg.e);
    let users: Vec<UserProfile> = (0..cfg.users)
        .map(|_| {
            // sqrt of a uniform gives a uniform density over the disk area
            let r = cfg.radius_m * rng.gen::<f64>().sqrt();
            let dist = r.max(cfg.min_distance_m);
            let mut g = gain_from_loss_db(path_loss_db(dist / 1000.0));
            if cfg.rayleigh {
                let h: f64 = Exp1.sample(&mut rng);
                g *= h;
            }
            UserProfile {
                distance_m: dist,
                g,
                samples: cfg.samples_per_user,
                num_classes: cfg.num_classes,
                c_init,
                c_ret,
                e: cfg.e,
                p_max: cfg.p_max,
                f_max: cfg.f_max,
            }
        })
        .collect();
    for u in &users {
        u.validate()?;
    }
    Ok(users)
}
