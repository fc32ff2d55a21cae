//! Policy gradient of the dLQR cost and its finite-difference oracle.

use rayon::prelude::*;

use crate::cost::{self, CostReport};
use crate::error::{Error, Result};
use crate::matops::{Matrix, SolverConfig};
use crate::model::{self, Controller, Plant, SecondMoment};

/// Default central-difference step (scaled per coordinate by `1 + |θᵢ|`).
pub const FD_STEP: f64 = 1e-6;

/// Number of times a coordinate step is halved when a perturbed controller
/// leaves the stabilizing set.
pub const FD_MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientTriple {
    pub d_a_k: Matrix,
    pub d_b_k: Matrix,
    pub d_c_k: Matrix,
    /// Frobenius norm of `[0 ∇C_K; ∇B_K ∇A_K]`.
    pub norm: f64,
}

impl GradientTriple {
    pub fn new(d_a_k: Matrix, d_b_k: Matrix, d_c_k: Matrix) -> Self {
        let norm = (d_a_k.norm_squared() + d_b_k.norm_squared() + d_c_k.norm_squared()).sqrt();
        Self {
            d_a_k,
            d_b_k,
            d_c_k,
            norm,
        }
    }

    /// The gradient laid out like a controller, so it can be stepped along.
    pub fn as_controller(&self) -> Controller {
        Controller {
            a_k: self.d_a_k.clone(),
            b_k: self.d_b_k.clone(),
            c_k: self.d_c_k.clone(),
        }
    }

    /// Same ordering as [`Controller::params`].
    pub fn params(&self) -> Vec<f64> {
        self.as_controller().params()
    }

    pub fn from_params(n: usize, m: usize, d: usize, params: &[f64]) -> Result<Self> {
        let c = Controller::from_params(n, m, d, params)?;
        Ok(Self::new(c.a_k, c.b_k, c.c_k))
    }

    pub fn distance(&self, other: &GradientTriple) -> f64 {
        self.as_controller().distance(&other.as_controller())
    }

    /// `‖self − other‖ / max(‖self‖, ‖other‖)`; zero when both vanish.
    pub fn relative_error(&self, other: &GradientTriple) -> f64 {
        let denom = self.norm.max(other.norm);
        if denom == 0.0 {
            0.0
        } else {
            self.distance(other) / denom
        }
    }
}

/// Gradient formulas evaluated with `P` and `Σ` taken from `report`.
///
/// With the report held fixed the three blocks are affine in the controller
/// matrices, which is what the stationarity analysis relies on.
pub fn gradient_from_report(
    plant: &Plant,
    controller: &Controller,
    report: &CostReport,
) -> GradientTriple {
    let (a, b, c, r) = (plant.a(), plant.b(), plant.c(), plant.r());
    let (ak, bk, ck) = (&controller.a_k, &controller.b_k, &controller.c_k);
    let (p11, p12, p22) = (report.p11(), report.p12(), report.p22());
    let (s11, s12, s22) = (report.s11(), report.s12(), report.s22());
    let bt = b.transpose();
    let p12t = p12.transpose();
    let bk_c = bk * c;

    // ∇C_K = 2Bᵀ(P₁₁A + P₁₂B_KC)Σ₁₂ + 2((R + BᵀP₁₁B)C_K + BᵀP₁₂A_K)Σ₂₂
    let d_c_k = (&bt * (&p11 * a + &p12 * &bk_c) * &s12
        + ((r + &bt * &p11 * b) * ck + &bt * &p12 * ak) * &s22)
        * 2.0;

    // shared rows of P·A_cl
    let row_x = &p12t * a + &p22 * &bk_c;
    let row_xi = &p12t * b * ck + &p22 * ak;

    // ∇B_K = 2(P₁₂ᵀA + P₂₂B_KC)Σ₁₁Cᵀ + 2(P₁₂ᵀBC_K + P₂₂A_K)Σ₁₂ᵀCᵀ
    let d_b_k = (&row_x * &s11 * c.transpose() + &row_xi * s12.transpose() * c.transpose()) * 2.0;

    // ∇A_K = 2(P₁₂ᵀBC_K + P₂₂A_K)Σ₂₂ + 2(P₁₂ᵀA + P₂₂B_KC)Σ₁₂
    let d_a_k = (&row_xi * &s22 + &row_x * &s12) * 2.0;

    GradientTriple::new(d_a_k, d_b_k, d_c_k)
}

pub fn analytic_gradient(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
) -> Result<GradientTriple> {
    let report = cost::evaluate(plant, controller, x)?;
    Ok(gradient_from_report(plant, controller, &report))
}

/// Like [`analytic_gradient`] but also returns the cost report.
pub fn evaluate_with_gradient(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
) -> Result<(CostReport, GradientTriple)> {
    let report = cost::evaluate(plant, controller, x)?;
    let grad = gradient_from_report(plant, controller, &report);
    Ok((report, grad))
}

/// Central differences of `f` at `theta`, one coordinate at a time.
///
/// Coordinate `i` combines the quotients at `h = step·(1 + |θᵢ|)` and `h/2`
/// by Richardson extrapolation; whenever `f` reports the
/// perturbed point as infeasible (`None`) the step is halved, at most
/// `max_halvings` times. On exhaustion the offending coordinate index is
/// returned. Coordinates are processed independently, so the result does not
/// depend on evaluation order.
pub fn central_difference<F>(
    f: F,
    theta: &[f64],
    step: f64,
    max_halvings: usize,
) -> std::result::Result<Vec<f64>, usize>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let mut h = step * (1.0 + theta[i].abs());
            let mut point = theta.to_vec();
            for _ in 0..=max_halvings {
                let mut quotient = |h: f64| {
                    point[i] = theta[i] + h;
                    let up = f(&point)?;
                    point[i] = theta[i] - h;
                    let down = f(&point)?;
                    Some((up - down) / (2.0 * h))
                };
                // Richardson over h and h/2 cancels the h² error term, which
                // dominates near the stability boundary
                if let (Some(coarse), Some(fine)) = (quotient(h), quotient(h / 2.0)) {
                    return Ok((4.0 * fine - coarse) / 3.0);
                }
                h *= 0.5;
            }
            Err(i)
        })
        .collect()
}

pub fn finite_difference_gradient(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
    step: f64,
) -> Result<GradientTriple> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    controller.check_against(plant)?;
    let cfg = SolverConfig::default();
    model::stabilizing_closed_loop(plant, controller, &cfg)?;
    let (n, m, d) = (plant.n(), plant.m(), plant.d());
    let theta = controller.params();
    let objective = |p: &[f64]| -> Option<f64> {
        let k = Controller::from_params(n, m, d, p).ok()?;
        cost::evaluate_with(plant, &k, x, &cfg).ok().map(|r| r.j)
    };
    match central_difference(objective, &theta, step, FD_MAX_HALVINGS) {
        Ok(g) => GradientTriple::from_params(n, m, d, &g),
        Err(i) => {
            // report the radius at the smallest step that was tried
            let h = step * (1.0 + theta[i].abs()) * 0.5f64.powi(FD_MAX_HALVINGS as i32);
            let rho = [h, -h]
                .iter()
                .filter_map(|dh| {
                    let mut p = theta.clone();
                    p[i] += dh;
                    let k = Controller::from_params(n, m, d, &p).ok()?;
                    model::closed_loop_radius(plant, &k).ok()
                })
                .fold(0.0, f64::max);
            Err(Error::NotStabilizing { rho })
        }
    }
}

/// Norm of the policy gradient; zero exactly on the stationary set 𝕂ₛ.
pub fn stationarity_residual(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
) -> Result<f64> {
    Ok(analytic_gradient(plant, controller, x)?.norm)
}
