//! Dimension-to-rounds model `J(d) = mu + nu / (1 + exp(beta * (ln d - alpha)))`
//! and a least-squares fitter for it.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceModel {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ConvergenceModel {
    /// Parameters fitted for `epsilon = 20` in the reference experiments.
    pub const REFERENCE: ConvergenceModel = ConvergenceModel { mu: 15.25, nu: 99.99, alpha: 7.80, beta: 5.69 };

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu >= 0.0
            && self.nu > 0.0
            && self.beta > 0.0
            && [self.mu, self.nu, self.alpha, self.beta].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::invalid(format!("convergence model needs mu >= 0, nu > 0, beta > 0, got {self:?}")));
        }
        Ok(())
    }

    /// Logistic factor `1 / (1 + exp(beta (ln d - alpha)))`.
    fn logistic(&self, d: f64) -> f64 {
        1.0 / (1.0 + (self.beta * (d.ln() - self.alpha)).exp())
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        ConvergenceModel { mu: v[0], nu: v[1], alpha: v[2], beta: v[3] }
    }
}

fn check_d(d: f64) -> Result<()> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!("dimension must be positive, got {d}")));
    }
    Ok(())
}

pub fn j_of_d(model: &ConvergenceModel, d: f64) -> Result<f64> {
    check_d(d)?;
    Ok(model.mu + model.nu * model.logistic(d))
}

pub fn dj_dd(model: &ConvergenceModel, d: f64) -> Result<f64> {
    check_d(d)?;
    let s = model.logistic(d);
    // -nu beta E / (d (1 + E)^2) with s = 1 / (1 + E)
    Ok(-model.nu * model.beta * s * (1.0 - s) / d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub model: ConvergenceModel,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub d: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

const GRID: usize = 5;
const MAX_ITER: usize = 500;

/// Least-squares fit of the model to `(d, J)` points.
///
/// Levenberg–Marquardt from each node of a 5x5 `(alpha, beta)` grid, with
/// `alpha` spanning `ln 1000 ..= ln 20000` and `beta` spanning `0.5 ..= 10`;
/// `mu` and `nu` start at the minimum and range of the observations. The best
/// local minimum wins (earliest start on exact ties).
pub fn fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 points to fit, got {}", points.len())));
    }
    for &(d, j) in points {
        check_d(d)?;
        if !j.is_finite() {
            return Err(Error::invalid(format!("non-finite round count at d = {d}")));
        }
    }
    let mut ds: Vec<f64> = points.iter().map(|p| p.0).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.len() < 4 {
        return Err(Error::invalid("need at least 4 distinct dimensions"));
    }

    let (jmin, jmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let (a_lo, a_hi) = (1000f64.ln(), 20000f64.ln());
    let mut best: Option<(f64, Vector4<f64>)> = None;
    for ia in 0..GRID {
        for ib in 0..GRID {
            let alpha = a_lo + (a_hi - a_lo) * ia as f64 / (GRID - 1) as f64;
            let beta = 0.5 + 9.5 * ib as f64 / (GRID - 1) as f64;
            let start = Vector4::new(jmin, jmax - jmin, alpha, beta);
            let (cost, theta) = levenberg_marquardt(points, start);
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, theta));
            }
        }
    }
    let (cost, theta) = best.expect("grid is non-empty");
    Ok(FitResult { model: canonical(ConvergenceModel::from_vector(&theta)), residual: (2.0 * cost).sqrt() })
}

/// The model is symmetric under `(mu, nu, beta) -> (mu + nu, -nu, -beta)`;
/// prefer the representative with `beta > 0`.
fn canonical(m: ConvergenceModel) -> ConvergenceModel {
    if m.beta < 0.0 {
        ConvergenceModel { mu: m.mu + m.nu, nu: -m.nu, alpha: m.alpha, beta: -m.beta }
    } else {
        m
    }
}

/// Half the sum of squared residuals.
fn cost(points: &[(f64, f64)], theta: &Vector4<f64>) -> f64 {
    let m = ConvergenceModel::from_vector(theta);
    0.5 * points
        .iter()
        .map(|&(d, j)| {
            let r = m.mu + m.nu * m.logistic(d) - j;
            r * r
        })
        .sum::<f64>()
}

/// Normal equations `J^T J` and gradient `J^T r` at `theta`.
fn normal_equations(points: &[(f64, f64)], theta: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
    let m = ConvergenceModel::from_vector(theta);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for &(d, j) in points {
        let x = d.ln();
        let s = m.logistic(d);
        let ds = s * (1.0 - s);
        let row = Vector4::new(1.0, s, m.nu * m.beta * ds, -m.nu * (x - m.alpha) * ds);
        let r = m.mu + m.nu * s - j;
        jtj += row * row.transpose();
        jtr += row * r;
    }
    (jtj, jtr)
}

fn levenberg_marquardt(points: &[(f64, f64)], start: Vector4<f64>) -> (f64, Vector4<f64>) {
    let mut theta = start;
    let mut c = cost(points, &theta);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        if c == 0.0 {
            break;
        }
        let (jtj, jtr) = normal_equations(points, &theta);
        if jtr.amax() <= 1e-30 {
            break;
        }
        let scale = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..4 {
                // Marquardt scaling, floored so flat directions stay regular
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * scale);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 4.0;
                continue;
            };
            let candidate = theta + step;
            let cc = cost(points, &candidate);
            if cc.is_finite() && cc < c {
                let small_step = step.norm() <= 1e-15 * (theta.norm() + 1e-15);
                let small_gain = c - cc <= 1e-18 * c;
                theta = candidate;
                c = cc;
                lambda = (lambda / 3.0).max(1e-15);
                improved = !(small_step || small_gain);
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (c, theta)
}
