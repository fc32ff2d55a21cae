//! Closed-form observable stationary controller and its verification.
//!
//! The candidate is the observer-based controller built from the LQR gain
//! `K*` and the filter gain `L*`, moved along its similarity orbit by
//! `T* = X₂₂X₁₂⁻¹`. The filter Riccati equation is driven by the Schur
//! complement `Δ_X = X₁₁ − X₁₂X₂₂⁻¹X₁₂ᵀ`.

use crate::cost::{self, CostReport};
use crate::error::{Error, Result};
use crate::gradient;
use crate::matops::{self, Matrix, SolverConfig};
use crate::model::{self, Controller, Plant, SecondMoment};
use crate::similarity::{self, Transform};

/// Tolerance every certificate residual must meet.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Relative singular-value threshold for `X₁₂`.
pub const SINGULAR_REL_TOL: f64 = similarity::SINGULAR_REL_TOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryResiduals {
    pub gradient_norm: f64,
    /// `‖P₁₂ᵀΣ₁₂ + P₂₂Σ₂₂‖_F`.
    pub sigma_identity: f64,
    /// `‖P₁₂ᵀX₁₂ + P₂₂X₂₂‖_F`.
    pub moment_identity: f64,
    /// `‖C_K + K̂Σ₁₂Σ₂₂⁻¹‖_F` with `K̂` from the Schur complement of `P`.
    pub first_order_c_k: f64,
    /// `‖B_K + P₂₂⁻¹P₁₂ᵀL̂‖_F`.
    pub first_order_b_k: f64,
    /// `‖A_K + P₂₂⁻¹P₁₂ᵀ(A − L̂C − BK̂)Σ₁₂Σ₂₂⁻¹‖_F`.
    pub first_order_a_k: f64,
    /// `‖−P₂₂⁻¹P₁₂ᵀ − I‖_F` evaluated at the observer-form controller
    /// obtained by undoing `T = X₂₂X₁₂⁻¹`.
    pub dagger_identity: f64,
    /// Control Riccati residual of `P̂ = P₁₁ − P₁₂P₂₂⁻¹P₁₂ᵀ`.
    pub control_riccati: f64,
    /// Filter Riccati residual of `Σ̂ = Σ₁₁ − Σ₁₂Σ₂₂⁻¹Σ₁₂ᵀ` driven by `Δ_X`.
    pub filter_riccati: f64,
}

impl StationaryResiduals {
    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("gradient_norm", self.gradient_norm),
            ("sigma_identity", self.sigma_identity),
            ("moment_identity", self.moment_identity),
            ("first_order_c_k", self.first_order_c_k),
            ("first_order_b_k", self.first_order_b_k),
            ("first_order_a_k", self.first_order_a_k),
            ("dagger_identity", self.dagger_identity),
            ("control_riccati", self.control_riccati),
            ("filter_riccati", self.filter_riccati),
        ]
    }

    pub fn max(&self) -> f64 {
        self.named().iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.named().iter().all(|(_, v)| *v <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCertificate {
    pub k_star: Controller,
    pub k_dagger: Controller,
    pub t_star: Transform,
    pub k_gain: Matrix,
    pub l_gain: Matrix,
    pub p_hat: Matrix,
    pub sigma_hat: Matrix,
    /// `ρ(A − B·K*)`.
    pub rho_control: f64,
    /// `ρ(A − L*·C)`.
    pub rho_filter: f64,
    pub j: f64,
    pub residuals: StationaryResiduals,
}

fn x12_inverse(x: &SecondMoment) -> Result<Matrix> {
    matops::checked_inverse(&x.x12(), SINGULAR_REL_TOL, "X12").map_err(|_| Error::SingularX12)
}

pub fn stationary_candidate(plant: &Plant, x: &SecondMoment) -> Result<StationaryCertificate> {
    stationary_candidate_with(plant, x, &SolverConfig::default())
}

pub fn stationary_candidate_with(
    plant: &Plant,
    x: &SecondMoment,
    cfg: &SolverConfig,
) -> Result<StationaryCertificate> {
    x.check_against(plant)?;
    if !x.is_positive_definite() {
        return Err(Error::NotPositiveDefinite("X"));
    }
    let x12_inv = x12_inverse(x)?;
    let (a, b, c) = (plant.a(), plant.b(), plant.c());

    let p_hat = matops::solve_dare_control(a, b, plant.q(), plant.r(), cfg)?;
    let k_gain = matops::control_gain(a, b, plant.r(), &p_hat)?;
    let delta_x = x.schur_complement()?;
    let sigma_hat = matops::solve_dare_filter(a, c, &delta_x, cfg)?;
    let l_gain = matops::filter_gain(a, c, &sigma_hat)?;

    let k_dagger = model::observer_based(plant, &k_gain, &l_gain)?;
    // generic when d > m: the kernel of A − LC meets the kernel of K
    if !model::is_observable_controller(&k_dagger) {
        return Err(Error::NotObservable);
    }
    let t_star = Transform::new(x.x22() * &x12_inv)?;
    let k_star = similarity::apply(&k_dagger, &t_star)?;

    let rho_control = matops::spectral_radius(&(a - b * &k_gain))?;
    let rho_filter = matops::spectral_radius(&(a - &l_gain * c))?;
    let report = cost::evaluate_with(plant, &k_star, x, cfg)?;
    let residuals = residuals_from_report(plant, x, &k_star, &report)?;

    Ok(StationaryCertificate {
        k_star,
        k_dagger,
        t_star,
        k_gain,
        l_gain,
        p_hat,
        sigma_hat,
        rho_control,
        rho_filter,
        j: report.j,
        residuals,
    })
}

/// Evaluates every stationarity identity at `candidate`.
///
/// Requires a stabilizing, observable candidate (so that `P₂₂ ≻ 0`) and an
/// invertible `X₁₂`.
pub fn verify_stationary(
    plant: &Plant,
    x: &SecondMoment,
    candidate: &Controller,
) -> Result<StationaryResiduals> {
    let report = cost::evaluate(plant, candidate, x)?;
    residuals_from_report(plant, x, candidate, &report)
}

fn residuals_from_report(
    plant: &Plant,
    x: &SecondMoment,
    candidate: &Controller,
    report: &CostReport,
) -> Result<StationaryResiduals> {
    let (a, b, c, r) = (plant.a(), plant.b(), plant.c(), plant.r());
    let (p11, p12, p22) = (report.p11(), report.p12(), report.p22());
    let (s11, s12, s22) = (report.s11(), report.s12(), report.s22());
    let p22_inv = matops::checked_inverse(&p22, SINGULAR_REL_TOL, "P22")?;
    let s22_inv = matops::checked_inverse(&s22, SINGULAR_REL_TOL, "Sigma22")?;
    x12_inverse(x)?;

    let grad = gradient::gradient_from_report(plant, candidate, report);
    let sigma_identity = (p12.transpose() * &s12 + &p22 * &s22).norm();
    let moment_identity = (p12.transpose() * x.x12() + &p22 * x.x22()).norm();

    let p_hat = matops::symmetrize(&(&p11 - &p12 * &p22_inv * p12.transpose()));
    let sigma_hat = matops::symmetrize(&(&s11 - &s12 * &s22_inv * s12.transpose()));
    let k_hat = matops::control_gain(a, b, r, &p_hat)?;
    let l_hat = matops::filter_gain(a, c, &sigma_hat)?;
    let left = -(&p22_inv * p12.transpose());
    let right = &s12 * &s22_inv;
    let first_order_c_k = (&candidate.c_k + &k_hat * &right).norm();
    let first_order_b_k = (&candidate.b_k - &left * &l_hat).norm();
    let first_order_a_k = (&candidate.a_k - &left * (a - &l_hat * c - b * &k_hat) * &right).norm();

    // undo T = X₂₂X₁₂⁻¹ to land on the observer-form representative
    let undo = Transform::new(x.x12() * x.x22().try_inverse().ok_or(Error::Singular("X22"))?)?;
    let dagger = similarity::apply(candidate, &undo)?;
    let dagger_report = cost::evaluate(plant, &dagger, x)?;
    let dp22_inv = matops::checked_inverse(&dagger_report.p22(), SINGULAR_REL_TOL, "P22")?;
    let n = plant.n();
    let dagger_identity =
        (-(dp22_inv * dagger_report.p12().transpose()) - Matrix::identity(n, n)).norm();

    let control_riccati = matops::dare_control_residual(a, b, plant.q(), r, &p_hat)?;
    let filter_riccati = matops::dare_filter_residual(a, c, &x.schur_complement()?, &sigma_hat)?;

    Ok(StationaryResiduals {
        gradient_norm: grad.norm,
        sigma_identity,
        moment_identity,
        first_order_c_k,
        first_order_b_k,
        first_order_a_k,
        dagger_identity,
        control_riccati,
        filter_riccati,
    })
}
