//! Real Lambert W (branches 0 and -1) and the minimum bandwidth that carries
//! a payload at full power.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::Infeasibility;
use crate::{Error, Result};

const INV_E: f64 = 1.0 / E;
const MAX_ITER: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Principal branch, `W >= -1`.
    Principal,
    /// Lower branch, `W <= -1`, defined on `[-1/e, 0)`.
    Lower,
}

/// Solve `w * exp(w) = x` on the requested real branch.
pub fn lambert_w(x: f64, branch: Branch) -> Result<f64> {
    if x.is_nan() || x < -INV_E * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::invalid(format!("lambert_w: {x} is below -1/e")));
    }
    // distance to the branch point, floored at zero for arguments within
    // rounding of -1/e
    let p2 = (2.0 * (1.0 + E * x)).max(0.0);
    match branch {
        Branch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            if x.is_infinite() {
                return Ok(f64::INFINITY);
            }
            let w0 = if p2 < 0.5 {
                let p = p2.sqrt();
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if x < 3.0 {
                // crude but on the right side of the branch point
                0.5 * x.ln_1p()
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            };
            Ok(halley(x, w0))
        }
        Branch::Lower => {
            if x >= 0.0 {
                return Err(Error::invalid(format!("lambert_w lower branch needs x < 0, got {x}")));
            }
            let w0 = if p2 < 0.5 {
                let p = p2.sqrt();
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            };
            Ok(halley(x, w0))
        }
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    if w == -1.0 {
        return w;
    }
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = w - f / denom;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs().max(1.0);
        w = next;
        if done {
            break;
        }
    }
    w
}

/// Smallest bandwidth `b` with `t * b * log2(1 + c / b) >= payload`, where
/// `c = p_max * g / N0`.
///
/// With `k = ln2 * payload / (t * c)` the answer is
/// `b = -a / (W_{-1}(-k e^{-k}) + k)` and `a = ln2 * payload / t`. Since
/// `b log2(1 + c/b)` increases towards `c / ln2` as `b` grows, no bandwidth
/// suffices once `k >= 1`; that case returns `Infeasible(LinkBudget)` with
/// user index 0, which callers overwrite.
pub fn b_min_lambert(t: f64, g: f64, p_max: f64, n0: f64, payload_bits: f64) -> Result<f64> {
    if !(t > 0.0) || !(payload_bits > 0.0) {
        return Err(Error::invalid("b_min needs positive time and payload"));
    }
    let c = p_max * g / n0;
    let a = LN_2 * payload_bits / t;
    let k = a / c;
    if !(k < 1.0) || !k.is_finite() {
        return Err(Error::Infeasible(Infeasibility::LinkBudget { user: 0 }));
    }
    let w = lambert_w(-k * (-k).exp(), Branch::Lower)?;
    let denom = w + k;
    if !(denom < 0.0) {
        // the argument rounded onto the branch point
        return Err(Error::Infeasible(Infeasibility::LinkBudget { user: 0 }));
    }
    let b = -a / denom;
    Ok(polish_b_min(b, k, c))
}

/// Newton steps on `ln(1 + x) = k x`, `x = c / b`, to recover the digits the
/// Lambert argument loses near the branch point.
fn polish_b_min(b: f64, k: f64, c: f64) -> f64 {
    let mut x = c / b;
    for _ in 0..3 {
        let g = x.ln_1p() - k * x;
        let dg = 1.0 / (1.0 + x) - k;
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = x - g / dg;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        x = next;
    }
    c / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defining_values() {
        assert_eq!(lambert_w(0.0, Branch::Principal).unwrap(), 0.0);
        assert!((lambert_w(E, Branch::Principal).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w(-INV_E, Branch::Lower).unwrap() + 1.0).abs() < 1e-7);
        assert!((lambert_w(-INV_E, Branch::Principal).unwrap() + 1.0).abs() < 1e-7);
        assert!((lambert_w(-0.1, Branch::Lower).unwrap() + 3.577152).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(lambert_w(-0.5, Branch::Principal).is_err());
        assert!(lambert_w(0.0, Branch::Lower).is_err());
        assert!(lambert_w(1.0, Branch::Lower).is_err());
        assert!(lambert_w(f64::NAN, Branch::Principal).is_err());
    }

    #[test]
    fn b_min_rejects_impossible_links() {
        // c / ln2 is the rate ceiling
        let (g, p, n0) = (1e-10, 1e-3, 4e-21);
        let ceiling = p * g / n0 / LN_2;
        assert!(b_min_lambert(1.0, g, p, n0, 1.01 * ceiling).is_err());
        let b = b_min_lambert(1.0, g, p, n0, 0.5 * ceiling).unwrap();
        let r = b * (p * g / (n0 * b)).ln_1p() / LN_2;
        assert!((r - 0.5 * ceiling).abs() <= 1e-10 * r);
    }
}
