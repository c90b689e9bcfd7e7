//! Alternating minimisation of total energy over the hypervector dimension
//! and the per-user transmission time, bandwidth, power and CPU frequency.
//!
//! One outer iteration picks `d` with the resources held fixed, then sweeps
//! `t -> f -> (b, p)` at that `d` until the objective stops moving. Every
//! accepted iterate is feasible and no worse than the previous one; a step
//! that would break either property ends the run and the last good iterate
//! is returned with a diagnostic.

pub mod kkt;
mod lambert;

pub use kkt::{allocate, FullPowerLink, KktState, Link};
pub use lambert::{b_min_lambert, lambert_w, Branch};

use serde::{Deserialize, Serialize};

use crate::convergence::{dj_dd, j_of_d, ConvergenceModel};
use crate::error::Infeasibility;
use crate::feasibility;
use crate::system_model::{rate, total_energy, EnergyBreakdown, ResourceAllocation, SystemConfig, UserProfile};
use crate::{Error, Result};

/// Relative slack used when checking constraints of a computed point.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Admissible dimensions, ascending.
    pub d_grid: Vec<f64>,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Relative objective change that counts as converged.
    pub tol_objective: f64,
    /// Sample points used to bracket roots in the dimension step.
    pub scan_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            d_grid: (3..=10).map(|k| 1000.0 * k as f64).collect(),
            max_inner: 50,
            max_outer: 50,
            tol_objective: 1e-8,
            scan_points: 400,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_grid.is_empty() {
            return Err(Error::EmptyInput("dimension grid"));
        }
        if self.d_grid.windows(2).any(|w| !(w[0] < w[1])) || !(self.d_grid[0] > 0.0) {
            return Err(Error::invalid("dimension grid must be positive and strictly ascending"));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.scan_points < 2 {
            return Err(Error::invalid("iteration caps must be >= 1 and scan points >= 2"));
        }
        if !(self.tol_objective > 0.0) {
            return Err(Error::invalid("objective tolerance must be positive"));
        }
        Ok(())
    }
}

/// Which variables the solver may move.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// Everything is optimised.
    Proposed,
    /// `d` is pinned.
    FixedDimension { d: f64 },
    /// Every user transmits at `p_max`; bandwidth minimises total airtime.
    FixedPower,
}

/// Per-user constants of the energy as a function of `d` alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSubproblemCoeffs {
    /// `gamma D C_init f^2`
    pub y: Vec<f64>,
    /// `gamma D C_ret f^2`
    pub r: Vec<f64>,
    /// `t p`
    pub q: Vec<f64>,
}

impl DimSubproblemCoeffs {
    pub fn new(profiles: &[UserProfile], alloc: &ResourceAllocation, gamma: f64) -> Self {
        let f2 = |i: usize| alloc.f[i] * alloc.f[i];
        DimSubproblemCoeffs {
            y: profiles.iter().enumerate().map(|(i, u)| gamma * u.z() * f2(i)).collect(),
            r: profiles.iter().enumerate().map(|(i, u)| gamma * u.g_ret() * f2(i)).collect(),
            q: alloc.t.iter().zip(&alloc.p).map(|(t, p)| t * p).collect(),
        }
    }

    fn sums(&self) -> (f64, f64, f64) {
        (self.y.iter().sum(), self.r.iter().sum(), self.q.iter().sum())
    }

    /// `sum_i (Y_i - R_i) d + R_i J(d) d + Q_i J(d)`.
    pub fn energy(&self, model: &ConvergenceModel, d: f64) -> Result<f64> {
        let (y, r, q) = self.sums();
        let j = j_of_d(model, d)?;
        Ok((y - r) * d + r * j * d + q * j)
    }

    pub fn derivative(&self, model: &ConvergenceModel, d: f64) -> Result<f64> {
        let (y, r, q) = self.sums();
        let j = j_of_d(model, d)?;
        let dj = dj_dd(model, d)?;
        Ok((y - r) + r * (dj * d + j) + q * dj)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Stationary,
    DeadlineBoundary,
    GridEndpoint,
    /// The scan found no feasible continuous point; the best feasible grid
    /// point was taken directly.
    GridFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimStep {
    /// Chosen grid dimension.
    pub d: f64,
    /// Best continuous candidate before projection.
    pub continuous: f64,
    pub kind: CandidateKind,
}

/// Worst deadline slack over users at dimension `d` with `f` and `t` held
/// fixed; positive means some user runs late.
fn deadline_excess(
    profiles: &[UserProfile],
    alloc: &ResourceAllocation,
    sys: &SystemConfig,
    model: &ConvergenceModel,
    d: f64,
) -> Result<f64> {
    let j = j_of_d(model, d)?;
    Ok(profiles
        .iter()
        .enumerate()
        .map(|(i, u)| u.total_cycles(d, j) / alloc.f[i] + j * alloc.t[i] - sys.deadline)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let f_lo = f(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi {
            break;
        }
        let fm = f(mid)?;
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Choose `d` with `(t, b, p, f)` fixed.
///
/// The energy's stationary points and the per-user deadline boundaries are
/// bracketed on a scan of `[min grid, max grid]` and refined by bisection;
/// together with feasible interval ends they form the candidate set. The
/// cheapest candidate is projected to the nearest deadline-feasible grid
/// point (ties to the smaller `d`).
pub fn dim_step(
    profiles: &[UserProfile],
    alloc: &ResourceAllocation,
    sys: &SystemConfig,
    model: &ConvergenceModel,
    cfg: &SolverConfig,
) -> Result<DimStep> {
    let coeffs = DimSubproblemCoeffs::new(profiles, alloc, sys.gamma);
    let tol = AUDIT_TOL * sys.deadline;
    let feasible = |d: f64| -> Result<bool> { Ok(deadline_excess(profiles, alloc, sys, model, d)? <= tol) };
    let (lo, hi) = (cfg.d_grid[0], *cfg.d_grid.last().expect("validated"));

    let mut candidates: Vec<(f64, CandidateKind)> = Vec::new();
    for d in [lo, hi] {
        if feasible(d)? {
            candidates.push((d, CandidateKind::GridEndpoint));
        }
    }
    if hi > lo {
        let n = cfg.scan_points;
        let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let mut prev: Option<(f64, f64, f64)> = None;
        for &x in &xs {
            let de = coeffs.derivative(model, x)?;
            let ex = deadline_excess(profiles, alloc, sys, model, x)? - tol;
            if let Some((px, pde, pex)) = prev {
                if (pde > 0.0) != (de > 0.0) {
                    let root = bisect(px, x, |d| coeffs.derivative(model, d))?;
                    if feasible(root)? {
                        candidates.push((root, CandidateKind::Stationary));
                    }
                }
                if (pex > 0.0) != (ex > 0.0) {
                    let edge = bisect(px, x, |d| Ok(deadline_excess(profiles, alloc, sys, model, d)? - tol))?;
                    // step to the feasible side of the bracket
                    let side = if pex <= 0.0 { edge.min(x).max(px) } else { edge };
                    let side = if feasible(side)? {
                        Some(side)
                    } else {
                        [px, x].into_iter().find(|&v| feasible(v).unwrap_or(false))
                    };
                    if let Some(s) = side {
                        candidates.push((s, CandidateKind::DeadlineBoundary));
                    }
                }
            }
            prev = Some((x, de, ex));
        }
    }

    let grid_ok: Vec<f64> = cfg.d_grid.iter().copied().filter(|&d| feasible(d).unwrap_or(false)).collect();
    if grid_ok.is_empty() {
        return Err(Error::Infeasible(Infeasibility::NoFeasibleDimension));
    }

    let mut best: Option<(f64, f64, CandidateKind)> = None;
    for (d, kind) in candidates {
        let e = coeffs.energy(model, d)?;
        if best.is_none_or(|(_, be, _)| e < be) {
            best = Some((d, e, kind));
        }
    }
    let Some((continuous, _, kind)) = best else {
        let mut pick = (grid_ok[0], coeffs.energy(model, grid_ok[0])?);
        for &d in &grid_ok[1..] {
            let e = coeffs.energy(model, d)?;
            if e < pick.1 {
                pick = (d, e);
            }
        }
        return Ok(DimStep { d: pick.0, continuous: pick.0, kind: CandidateKind::GridFallback });
    };
    let mut d = grid_ok[0];
    for &g in &grid_ok[1..] {
        // strict: equidistant points keep the smaller d
        if (g - continuous).abs() < (d - continuous).abs() {
            d = g;
        }
    }
    Ok(DimStep { d, continuous, kind })
}

fn check_lengths(profiles: &[UserProfile], alloc: &ResourceAllocation) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::EmptyInput("no users"));
    }
    alloc.check_lengths(profiles.len())
}

/// Shortest transmission times the current `(b, p)` allow.
///
/// Fails with `Deadline` when a user's shortest time already overruns what
/// the deadline leaves after computing at the current frequency.
pub fn time_step(
    profiles: &[UserProfile],
    alloc: &ResourceAllocation,
    sys: &SystemConfig,
    j_d: f64,
) -> Result<Vec<f64>> {
    check_lengths(profiles, alloc)?;
    profiles
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let r = rate(alloc.b[i], alloc.p[i], u.g, sys.n0);
            if !(r > 0.0) {
                return Err(Error::Infeasible(Infeasibility::LinkBudget { user: i }));
            }
            let t_min = u.payload_bits(alloc.d, sys.q) / r;
            let t_bar = (sys.deadline - u.total_cycles(alloc.d, j_d) / alloc.f[i]) / j_d;
            if t_min > t_bar + AUDIT_TOL * sys.deadline / j_d {
                return Err(Error::Infeasible(Infeasibility::Deadline { user: i }));
            }
            Ok(t_min)
        })
        .collect()
}

/// Slowest CPU frequencies that still meet the deadline.
pub fn freq_step(profiles: &[UserProfile], t: &[f64], d: f64, j_d: f64, sys: &SystemConfig) -> Result<Vec<f64>> {
    crate::hdc::check_dim(profiles.len(), t.len())?;
    profiles
        .iter()
        .zip(t)
        .enumerate()
        .map(|(i, (u, &ti))| {
            let room = sys.deadline - j_d * ti;
            if !(room > 0.0) {
                return Err(Error::Infeasible(Infeasibility::NoTransmissionTime { user: i }));
            }
            let f = u.total_cycles(d, j_d) / room;
            if f > u.f_max * (1.0 + AUDIT_TOL) {
                return Err(Error::Infeasible(Infeasibility::FrequencyCap { user: i, required: f, cap: u.f_max }));
            }
            Ok(f.min(u.f_max))
        })
        .collect()
}

/// Power that makes `t * rate(b, p) = N d q` hold with equality.
pub fn power_of_bandwidth(b: f64, t: f64, g: f64, n0: f64, num_classes: usize, d: f64, q: f64) -> f64 {
    Link { g, n0, payload: num_classes as f64 * d * q, t }.power(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthStep {
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    pub b_min: Vec<f64>,
    pub kkt: KktState,
}

/// Bandwidth split (and the matching tight powers) minimising transmission
/// energy for fixed times `t`.
pub fn bandwidth_step(profiles: &[UserProfile], t: &[f64], d: f64, sys: &SystemConfig) -> Result<BandwidthStep> {
    crate::hdc::check_dim(profiles.len(), t.len())?;
    let links: Vec<Link> = profiles
        .iter()
        .zip(t)
        .map(|(u, &t)| Link { g: u.g, n0: sys.n0, payload: u.payload_bits(d, sys.q), t })
        .collect();
    let b_min = profiles
        .iter()
        .zip(&links)
        .enumerate()
        .map(|(i, (u, l))| b_min_lambert(l.t, u.g, u.p_max, sys.n0, l.payload).map_err(|e| e.for_user(i)))
        .collect::<Result<Vec<_>>>()?;
    let kkt = allocate(&b_min, sys.bandwidth, |i, b| links[i].energy_slope(b))?;
    let p = kkt.b.iter().zip(&links).zip(profiles).map(|((&b, l), u)| l.power(b).min(u.p_max)).collect();
    Ok(BandwidthStep { b: kkt.b.clone(), p, b_min, kkt })
}

/// Sum over users of `t * p(b)`, the transmission energy of one round.
pub fn transmit_objective(profiles: &[UserProfile], t: &[f64], d: f64, sys: &SystemConfig, b: &[f64]) -> f64 {
    profiles
        .iter()
        .zip(t)
        .zip(b)
        .map(|((u, &t), &b)| Link { g: u.g, n0: sys.n0, payload: u.payload_bits(d, sys.q), t }.energy(b))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub user: Option<usize>,
    pub constraint: String,
    pub value: f64,
    pub limit: f64,
}

/// Check every constraint of the energy problem at `alloc`.
pub fn audit(
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
    alloc: &ResourceAllocation,
) -> Result<Vec<Violation>> {
    check_lengths(profiles, alloc)?;
    let j = j_of_d(model, alloc.d)?;
    let mut out = Vec::new();
    let mut push = |user, constraint: &str, value: f64, limit: f64| {
        out.push(Violation { user, constraint: constraint.to_string(), value, limit })
    };
    for (i, u) in profiles.iter().enumerate() {
        let (t, b, p, f) = (alloc.t[i], alloc.b[i], alloc.p[i], alloc.f[i]);
        if !(t >= 0.0 && b >= 0.0 && p >= 0.0 && f > 0.0) {
            push(Some(i), "nonnegativity", t.min(b).min(p).min(f), 0.0);
            continue;
        }
        let done = u.total_cycles(alloc.d, j) / f + j * t;
        if done > sys.deadline * (1.0 + AUDIT_TOL) {
            push(Some(i), "completion_time", done, sys.deadline);
        }
        let payload = u.payload_bits(alloc.d, sys.q);
        let sent = t * rate(b, p, u.g, sys.n0);
        if sent < payload * (1.0 - AUDIT_TOL) {
            push(Some(i), "rate", sent, payload);
        }
        if p > u.p_max * (1.0 + 1e-12) {
            push(Some(i), "power_cap", p, u.p_max);
        }
        if f > u.f_max * (1.0 + 1e-12) {
            push(Some(i), "frequency_cap", f, u.f_max);
        }
    }
    let total_b: f64 = alloc.b.iter().sum();
    if total_b > sys.bandwidth * (1.0 + AUDIT_TOL) {
        push(None, "bandwidth_budget", total_b, sys.bandwidth);
    }
    Ok(out)
}

pub fn objective(
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
    alloc: &ResourceAllocation,
) -> Result<EnergyBreakdown> {
    total_energy(profiles, alloc, j_of_d(model, alloc.d)?, sys.gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    Outer,
    Inner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub level: TraceLevel,
    pub outer: usize,
    pub inner: usize,
    pub d: f64,
    pub objective: f64,
    /// Bandwidth multiplier of the last KKT solve, when there was one.
    pub lambda: Option<f64>,
    /// `|sum b - B| / B` after the step.
    pub budget_residual: f64,
    /// Largest relative stationarity residual over unclamped users.
    pub kkt_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: ResourceAllocation,
    pub energy: EnergyBreakdown,
    pub j_d: f64,
    pub trace: Vec<TraceRow>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Why the run stopped early, if it did.
    pub diagnostic: Option<String>,
}

fn kkt_residual(profiles: &[UserProfile], t: &[f64], d: f64, sys: &SystemConfig, step: &BandwidthStep) -> Option<f64> {
    let lambda = step.kkt.lambda;
    if lambda <= 0.0 {
        return None;
    }
    profiles
        .iter()
        .enumerate()
        .filter(|&(i, _)| !step.kkt.clamped[i] && step.b[i] < sys.bandwidth)
        .map(|(i, u)| {
            let link = Link { g: u.g, n0: sys.n0, payload: u.payload_bits(d, sys.q), t: t[i] };
            (link.energy_slope(step.b[i]) + lambda).abs() / lambda
        })
        .reduce(f64::max)
}

/// Inner sweeps at fixed `d` starting from `start` (whose `d` is the target).
fn resource_step(
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
    cfg: &SolverConfig,
    scheme: Scheme,
    start: &ResourceAllocation,
    outer: usize,
) -> Result<(ResourceAllocation, Vec<TraceRow>)> {
    let d = start.d;
    if scheme == Scheme::FixedPower {
        let alloc = feasibility::init_allocation(profiles, d, sys, model)?;
        let e = objective(profiles, sys, model, &alloc)?.total;
        let row = TraceRow {
            level: TraceLevel::Inner,
            outer,
            inner: 1,
            d,
            objective: e,
            lambda: None,
            budget_residual: budget_residual(&alloc, sys),
            kkt_residual: None,
        };
        return Ok((alloc, vec![row]));
    }
    let j = j_of_d(model, d)?;
    let mut cur = start.clone();
    let mut rows: Vec<TraceRow> = Vec::new();
    for l in 1..=cfg.max_inner {
        let t = time_step(profiles, &cur, sys, j)?;
        let f = freq_step(profiles, &t, d, j, sys)?;
        let bw = bandwidth_step(profiles, &t, d, sys)?;
        let next = ResourceAllocation { d, t: t.clone(), b: bw.b.clone(), p: bw.p.clone(), f };
        let e = objective(profiles, sys, model, &next)?.total;
        rows.push(TraceRow {
            level: TraceLevel::Inner,
            outer,
            inner: l,
            d,
            objective: e,
            lambda: Some(bw.kkt.lambda),
            budget_residual: budget_residual(&next, sys),
            kkt_residual: kkt_residual(profiles, &t, d, sys, &bw),
        });
        cur = next;
        if let [.., prev, last] = rows.as_slice() {
            if (prev.objective - last.objective).abs() <= cfg.tol_objective * prev.objective {
                break;
            }
        }
    }
    Ok((cur, rows))
}

fn budget_residual(alloc: &ResourceAllocation, sys: &SystemConfig) -> f64 {
    (alloc.b.iter().sum::<f64>() - sys.bandwidth).abs() / sys.bandwidth
}

fn infeasible_init(violations: &[Violation]) -> Error {
    let v = &violations[0];
    let who = v.user.map_or_else(|| "system".to_string(), |u| format!("user {u}"));
    Error::invalid(format!(
        "initial allocation violates {} ({who}: {:.6e} vs limit {:.6e})",
        v.constraint, v.value, v.limit
    ))
}

/// Run the alternating solver from a feasible `init`.
pub fn solve(
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
    init: &ResourceAllocation,
    cfg: &SolverConfig,
    scheme: Scheme,
) -> Result<Solution> {
    sys.validate()?;
    cfg.validate()?;
    model.validate()?;
    for u in profiles {
        u.validate()?;
    }
    let violations = audit(profiles, sys, model, init)?;
    if !violations.is_empty() {
        return Err(infeasible_init(&violations));
    }

    let mut cur = init.clone();
    let mut energy = objective(profiles, sys, model, &cur)?;
    let mut trace = vec![TraceRow {
        level: TraceLevel::Outer,
        outer: 0,
        inner: 0,
        d: cur.d,
        objective: energy.total,
        lambda: None,
        budget_residual: budget_residual(&cur, sys),
        kkt_residual: None,
    }];
    let mut converged = false;
    let mut diagnostic = None;
    let mut outer_iterations = 0;

    for k in 1..=cfg.max_outer {
        let d_new = match scheme {
            Scheme::FixedDimension { .. } => cur.d,
            _ => match dim_step(profiles, &cur, sys, model, cfg) {
                Ok(step) => step.d,
                Err(e) => {
                    diagnostic = Some(format!("dimension step failed: {e}"));
                    break;
                }
            },
        };
        let warm = ResourceAllocation { d: d_new, ..cur.clone() };
        let attempt = resource_step(profiles, sys, model, cfg, scheme, &warm, k).or_else(|warm_err| {
            // the old resources may not fit the new dimension; restart from
            // the feasibility initializer there
            let fresh = feasibility::init_allocation(profiles, d_new, sys, model).map_err(|_| warm_err)?;
            resource_step(profiles, sys, model, cfg, scheme, &fresh, k)
        });
        let (next, rows) = match attempt {
            Ok(v) => v,
            Err(e) => {
                diagnostic = Some(format!("resource step at d = {d_new} failed: {e}"));
                break;
            }
        };
        let violations = audit(profiles, sys, model, &next)?;
        if let Some(v) = violations.first() {
            diagnostic = Some(format!(
                "iterate at d = {d_new} violates {} (user {:?}); kept previous iterate",
                v.constraint, v.user
            ));
            break;
        }
        let e_next = objective(profiles, sys, model, &next)?;
        if e_next.total > energy.total * (1.0 + 1e-12) {
            diagnostic = Some(format!(
                "iterate at d = {d_new} would raise energy from {:.9e} to {:.9e}; kept previous iterate",
                energy.total, e_next.total
            ));
            break;
        }
        outer_iterations = k;
        let settled = next.d == cur.d && (energy.total - e_next.total).abs() <= cfg.tol_objective * energy.total;
        trace.extend(rows);
        trace.push(TraceRow {
            level: TraceLevel::Outer,
            outer: k,
            inner: 0,
            d: next.d,
            objective: e_next.total,
            lambda: None,
            budget_residual: budget_residual(&next, sys),
            kkt_residual: None,
        });
        cur = next;
        energy = e_next;
        if settled {
            converged = true;
            break;
        }
    }

    Ok(Solution { j_d: j_of_d(model, cur.d)?, allocation: cur, energy, trace, outer_iterations, converged, diagnostic })
}

/// Initialise with the feasibility procedure, then solve under `scheme`.
pub fn solve_scheme(
    profiles: &[UserProfile],
    sys: &SystemConfig,
    model: &ConvergenceModel,
    cfg: &SolverConfig,
    scheme: Scheme,
) -> Result<Solution> {
    cfg.validate()?;
    let d0 = match scheme {
        Scheme::FixedDimension { d } => d,
        _ => feasibility::init_dimension(&cfg.d_grid, profiles, sys, model)?
            .d
            .ok_or(Error::Infeasible(Infeasibility::NoFeasibleDimension))?,
    };
    let init = feasibility::init_allocation(profiles, d0, sys, model)?;
    solve(profiles, sys, model, &init, cfg, scheme)
}
