//! Feasibility certificate for a dimension and the initial point of the
//! solver.
//!
//! At full CPU speed every user has at most `t_max` seconds per round to
//! transmit. A dimension is feasible iff every `t_max` is positive and the
//! bandwidths needed to deliver the payload in `t_max` at full power fit into
//! the budget.

use serde::{Deserialize, Serialize};

use crate::convergence::{j_of_d, ConvergenceModel};
use crate::error::Infeasibility;
use crate::optimizer::{allocate, b_min_lambert, FullPowerLink, AUDIT_TOL};
use crate::system_model::{ResourceAllocation, SystemConfig, UserProfile};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolatedCondition {
    None,
    TmaxNonpositive,
    /// Includes users that no finite bandwidth can serve in `t_max`.
    BandwidthBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub d_checked: f64,
    pub j_d: f64,
    pub t_max: Vec<f64>,
    /// Smallest bandwidth meeting `t_max` at full power; infinite when no
    /// bandwidth does.
    pub b_min_at_tmax: Vec<f64>,
    /// `p_max g / N0` per user.
    pub c: Vec<f64>,
    pub bandwidth_required: f64,
    pub feasible: bool,
    pub violated_condition: ViolatedCondition,
    pub first_violating_user: Option<usize>,
}

/// Transmission time left per round when computing at `f_max`.
pub fn t_max(profile: &UserProfile, d: f64, j_d: f64, deadline: f64) -> f64 {
    (deadline - profile.total_cycles(d, j_d) / profile.f_max) / j_d
}

pub fn certify(profiles: &[UserProfile], d: f64, j_d: f64, sys: &SystemConfig) -> Result<FeasibilityReport> {
    if profiles.is_empty() {
        return Err(Error::EmptyInput("no users"));
    }
    if !(d > 0.0) || !(j_d > 0.0) {
        return Err(Error::invalid(format!("need d > 0 and J > 0, got {d}, {j_d}")));
    }
    let t_max: Vec<f64> = profiles.iter().map(|u| t_max(u, d, j_d, sys.deadline)).collect();
    let c: Vec<f64> = profiles.iter().map(|u| u.snr_scale(sys.n0)).collect();
    let mut violated = ViolatedCondition::None;
    let mut first = None;
    let mut b_min = Vec::with_capacity(profiles.len());
    for (i, (u, &t)) in profiles.iter().zip(&t_max).enumerate() {
        let b = if t > 0.0 {
            match b_min_lambert(t, u.g, u.p_max, sys.n0, u.payload_bits(d, sys.q)) {
                Ok(b) => b,
                Err(Error::Infeasible(_)) => {
                    if first.is_none() {
                        violated = ViolatedCondition::BandwidthBudget;
                        first = Some(i);
                    }
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            }
        } else {
            if first.is_none() {
                violated = ViolatedCondition::TmaxNonpositive;
                first = Some(i);
            }
            f64::INFINITY
        };
        b_min.push(b);
    }
    let required: f64 = b_min.iter().sum();
    if first.is_none() && required > sys.bandwidth {
        violated = ViolatedCondition::BandwidthBudget;
    }
    Ok(FeasibilityReport {
        d_checked: d,
        j_d,
        t_max,
        b_min_at_tmax: b_min,
        c,
        bandwidth_required: required,
        feasible: violated == ViolatedCondition::None,
        violated_condition: violated,
        first_violating_user: first,
    })
}

fn report_error(report: &FeasibilityReport, available: f64) -> Error {
    let user = report.first_violating_user.unwrap_or(0);
    Error::Infeasible(match report.violated_condition {
        ViolatedCondition::TmaxNonpositive => Infeasibility::NoTransmissionTime { user },
        ViolatedCondition::BandwidthBudget if report.bandwidth_required.is_infinite() => {
            Infeasibility::LinkBudget { user }
        }
        _ => Infeasibility::BandwidthBudget { required: report.bandwidth_required, available },
    })
}

fn full_power_links(profiles: &[UserProfile], d: f64, sys: &SystemConfig) -> Vec<FullPowerLink> {
    profiles.iter().map(|u| FullPowerLink { c: u.snr_scale(sys.n0), payload: u.payload_bits(d, sys.q) }).collect()
}

/// Bandwidth split minimising total full-power airtime, subject to every
/// user meeting its `t_max`.
pub fn init_bandwidth(
    profiles: &[UserProfile],
    d: f64,
    sys: &SystemConfig,
    model: &ConvergenceModel,
) -> Result<Vec<f64>> {
    let j = j_of_d(model, d)?;
    let report = certify(profiles, d, j, sys)?;
    if !report.feasible {
        return Err(report_error(&report, sys.bandwidth));
    }
    let links = full_power_links(profiles, d, sys);
    Ok(allocate(&report.b_min_at_tmax, sys.bandwidth, |i, b| links[i].time_slope(b))?.b)
}

/// Feasible starting point at dimension `d`: full power, airtime-minimising
/// bandwidth, and the slowest CPU that still meets the deadline.
pub fn init_allocation(
    profiles: &[UserProfile],
    d: f64,
    sys: &SystemConfig,
    model: &ConvergenceModel,
) -> Result<ResourceAllocation> {
    let j = j_of_d(model, d)?;
    let b = init_bandwidth(profiles, d, sys, model)?;
    let links = full_power_links(profiles, d, sys);
    let t: Vec<f64> = links.iter().zip(&b).map(|(l, &b)| l.time(b)).collect();
    let f = profiles
        .iter()
        .zip(&t)
        .enumerate()
        .map(|(i, (u, &ti))| {
            let room = sys.deadline - j * ti;
            let f = u.total_cycles(d, j) / room;
            if !(room > 0.0) || f > u.f_max * (1.0 + AUDIT_TOL) {
                return Err(Error::Infeasible(Infeasibility::Deadline { user: i }));
            }
            Ok(f.min(u.f_max))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = profiles.iter().map(|u| u.p_max).collect();
    Ok(ResourceAllocation { d, t, b, p, f })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionInit {
    /// Smallest certified grid dimension.
    pub d: Option<f64>,
    pub reports: Vec<FeasibilityReport>,
}

/// Certify grid dimensions in ascending order and stop at the first
/// feasible one.
pub fn init_dimension(
    grid: &[f64],
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
) -> Result<DimensionInit> {
    let mut reports = Vec::new();
    for &d in grid {
        let report = certify(profiles, d, j_of_d(model, d)?, sys)?;
        let ok = report.feasible;
        reports.push(report);
        if ok {
            return Ok(DimensionInit { d: Some(d), reports });
        }
    }
    Ok(DimensionInit { d: None, reports })
}
