//! Budget-constrained allocation of a shared resource among users with
//! convex, decreasing costs, via bisection on the budget multiplier.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::Infeasibility;
use crate::{Error, Result};

/// Outcome of one multiplier search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktState {
    pub lambda: f64,
    /// `max(b_i(lambda), lower_i)` per user.
    pub b: Vec<f64>,
    /// `sum_i b_i`.
    pub phi: f64,
    /// Users pinned at their lower bound.
    pub clamped: Vec<bool>,
    pub iterations: usize,
}

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 400;

/// Minimise `sum_i F_i(b_i)` subject to `sum_i b_i <= budget`,
/// `b_i >= lower[i]`, where `deriv(i, b) = F_i'(b)` is negative and
/// increasing in `b`.
///
/// Each `b_i(lambda)` solves `F_i'(b) + lambda = 0` by bisection on
/// `[lower_i, budget]`; `lambda` is bisected until the budget is met from
/// below. The returned bandwidths are taken on the feasible side of the
/// bracket, so `phi <= budget` always holds.
pub fn allocate<F>(lower: &[f64], budget: f64, deriv: F) -> Result<KktState>
where
    F: Fn(usize, f64) -> f64,
{
    if lower.is_empty() {
        return Err(Error::EmptyInput("no users to allocate to"));
    }
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!("budget must be positive, got {budget}")));
    }
    let required: f64 = lower.iter().sum();
    if !(required <= budget * (1.0 + 1e-12)) || lower.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::Infeasible(Infeasibility::BandwidthBudget { required, available: budget }));
    }

    let eval = |lambda: f64| -> (Vec<f64>, f64) {
        let b: Vec<f64> = lower
            .iter()
            .enumerate()
            .map(|(i, &lo)| root_of_derivative(|b| deriv(i, b), lo.min(budget), budget, lambda))
            .collect();
        let phi = b.iter().sum();
        (b, phi)
    };

    let (b0, phi0) = eval(0.0);
    if phi0 <= budget {
        // only possible when a single user takes the whole budget; its
        // multiplier is then the marginal cost at the cap
        let lambda =
            b0.iter().enumerate().filter(|&(_, &b)| b >= budget).map(|(i, &b)| -deriv(i, b)).fold(0.0, f64::max);
        return Ok(finish(lambda, b0, phi0, lower, 0));
    }

    let share = budget / lower.len() as f64;
    let mut hi = (0..lower.len()).map(|i| deriv(i, share.max(lower[i])).abs()).fold(0.0, f64::max);
    if !(hi > 0.0) || !hi.is_finite() {
        hi = 1.0;
    }
    let mut at_hi = eval(hi);
    let mut doublings = 0;
    while at_hi.1 > budget {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!(
                "multiplier bracket not found after {MAX_DOUBLINGS} doublings (phi = {:.6e}, budget = {budget:.6e})",
                at_hi.1
            )));
        }
        hi *= 2.0;
        at_hi = eval(hi);
    }

    let mut lo = 0.0;
    let mut phi_lo = phi0;
    let mut iterations = doublings;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-15 * hi || at_hi.1 >= budget * (1.0 - 1e-14) {
            break;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let at_mid = eval(mid);
        debug_assert!(at_mid.1 <= phi_lo * (1.0 + 1e-12) && at_mid.1 >= at_hi.1 * (1.0 - 1e-12));
        if at_mid.1 > budget {
            lo = mid;
            phi_lo = at_mid.1;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }
    Ok(finish(hi, at_hi.0, at_hi.1, lower, iterations))
}

fn finish(lambda: f64, b: Vec<f64>, phi: f64, lower: &[f64], iterations: usize) -> KktState {
    let clamped = b.iter().zip(lower).map(|(b, lo)| b <= lo).collect();
    KktState { lambda, b, phi, clamped, iterations }
}

/// Solve `deriv(b) = -lambda` on `[lo, hi]` for increasing `deriv`, clamping
/// to the interval ends.
fn root_of_derivative(deriv: impl Fn(f64) -> f64, lo: f64, hi: f64, lambda: f64) -> f64 {
    if deriv(lo) >= -lambda {
        return lo;
    }
    if deriv(hi) <= -lambda {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a <= 1e-15 * b {
            break;
        }
        if deriv(mid) < -lambda {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// `exp(u) (1 - u) - 1`, accurate for small `u`.
fn exp_one_minus(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // -sum_{k>=2} (k-1) u^k / k!
        let mut term = u; // u^k / k! for k = 1
        let mut sum = 0.0;
        for k in 2..20 {
            term *= u / k as f64;
            sum -= (k - 1) as f64 * term;
        }
        sum
    } else {
        u.exp() * (1.0 - u) - 1.0
    }
}

/// `ln(1 + x) - x / (1 + x)`, accurate for small `x`.
fn log_gap(x: f64) -> f64 {
    if x < 1e-2 {
        // sum_{k>=2} (-1)^k (k-1)/k x^k
        let mut pow = x;
        let mut sum = 0.0;
        for k in 2..24 {
            pow *= x;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (k - 1) as f64 / k as f64 * pow;
        }
        sum
    } else {
        x.ln_1p() - x / (1.0 + x)
    }
}

/// One user's uplink with its transmission time held fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub g: f64,
    pub n0: f64,
    /// Bits per round.
    pub payload: f64,
    pub t: f64,
}

impl Link {
    fn u(&self, b: f64) -> f64 {
        LN_2 * self.payload / (self.t * b)
    }

    /// Power that makes the rate constraint tight at bandwidth `b`.
    pub fn power(&self, b: f64) -> f64 {
        self.n0 * b / self.g * self.u(b).exp_m1()
    }

    /// Transmission energy `t * p(b)` per round.
    pub fn energy(&self, b: f64) -> f64 {
        self.t * self.power(b)
    }

    /// `d energy / d b`.
    pub fn energy_slope(&self, b: f64) -> f64 {
        self.n0 * self.t / self.g * exp_one_minus(self.u(b))
    }
}

/// Transmission time at full power, `payload / (b log2(1 + c / b))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullPowerLink {
    /// `p_max g / N0`.
    pub c: f64,
    pub payload: f64,
}

impl FullPowerLink {
    pub fn time(&self, b: f64) -> f64 {
        self.payload * LN_2 / (b * (self.c / b).ln_1p())
    }

    pub fn time_slope(&self, b: f64) -> f64 {
        let x = self.c / b;
        let bl = b * x.ln_1p();
        -self.payload * LN_2 * log_gap(x) / (bl * bl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_match_direct_forms_where_both_are_accurate() {
        for u in [0.099f64, 0.05, 0.01] {
            let direct = u.exp() * (1.0 - u) - 1.0;
            // the direct form itself loses ~1e-12 to cancellation here
            assert!((exp_one_minus(u) - direct).abs() <= 1e-10 * direct.abs());
        }
        for x in [0.0099f64, 0.005, 0.001] {
            let direct = x.ln_1p() - x / (1.0 + x);
            assert!((log_gap(x) - direct).abs() <= 1e-10 * direct.abs());
        }
    }

    #[test]
    fn slopes_match_finite_differences() {
        let link = Link { g: 1e-11, n0: 4e-21, payload: 4e4, t: 0.05 };
        let fpl = FullPowerLink { c: 2e6, payload: 4e4 };
        for b in [1e4, 1e5, 1e6, 1e7] {
            let h = 1e-5 * b;
            let fd = (link.energy(b + h) - link.energy(b - h)) / (2.0 * h);
            assert!((fd - link.energy_slope(b)).abs() <= 1e-6 * fd.abs());
            let fd = (fpl.time(b + h) - fpl.time(b - h)) / (2.0 * h);
            assert!((fd - fpl.time_slope(b)).abs() <= 1e-6 * fd.abs());
        }
    }

    #[test]
    fn single_user_takes_everything_and_twins_split_evenly() {
        let link = Link { g: 1e-11, n0: 4e-21, payload: 4e4, t: 0.05 };
        let s = allocate(&[1e3], 1e6, |_, b| link.energy_slope(b)).unwrap();
        assert_eq!(s.b, vec![1e6]);
        assert_eq!(s.lambda, -link.energy_slope(1e6));
        let s = allocate(&[1e3, 1e3], 1e6, |_, b| link.energy_slope(b)).unwrap();
        assert!((s.b[0] - 5e5).abs() <= 1e-9 * 5e5);
        assert!((s.b[0] - s.b[1]).abs() <= 1e-9 * 5e5);
        assert!(s.phi <= 1e6);
    }

    #[test]
    fn over_budget_lower_bounds_are_infeasible() {
        let err = allocate(&[6e5, 6e5], 1e6, |_, _| -1.0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(Infeasibility::BandwidthBudget { .. })));
    }
}
