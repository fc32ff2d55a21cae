//! Similarity transformations of the controller state.
//!
//! `𝒯_T(𝖪) = (T A_K T⁻¹, T B_K, C_K T⁻¹)` leaves the closed-loop spectrum
//! unchanged but not the cost: with `T̄ = blockdiag(I, T)` one has
//! `J(𝒯_T(𝖪)) = Tr(P_K T̄⁻¹ X T̄⁻ᵀ)`. Writing `H = T⁻¹` this is the convex
//! quadratic `g(H)`, whose unique minimizer gives the optimal transform.

use rayon::prelude::*;

use crate::cost::{self, CostReport};
use crate::error::{Error, Result};
use crate::matops::{self, Matrix};
use crate::model::{self, Controller, Plant, SecondMoment};

/// `‖T·T⁻¹ − I‖_F` allowed for a valid transform, relative to
/// `1 + ‖T‖_F‖T⁻¹‖_F`.
pub const INVERSE_TOL: f64 = 1e-10;

/// Transforms with `σ_min(T) < RCOND_MIN · σ_max(T)` are rejected.
pub const RCOND_MIN: f64 = 1e-12;

/// Relative singular-value threshold for `X₁₂` and `P₁₂`.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

/// Relative tolerance on `∇_H g(H*)` after computing the optimal transform.
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    t: Matrix,
    t_inv: Matrix,
}

impl Transform {
    pub fn new(t: Matrix) -> Result<Self> {
        if t.nrows() != t.ncols() {
            return Err(Error::NonSquare {
                rows: t.nrows(),
                cols: t.ncols(),
            });
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("T"));
        }
        let t_inv =
            matops::checked_inverse(&t, RCOND_MIN, "T").map_err(|_| Error::SingularTransform)?;
        Self::from_pair(t, t_inv)
    }

    /// Builds the transform from `H = T⁻¹`.
    pub fn from_inverse(h: Matrix) -> Result<Self> {
        let inv = Self::new(h)?;
        Self::from_pair(inv.t_inv, inv.t)
    }

    fn from_pair(t: Matrix, t_inv: Matrix) -> Result<Self> {
        let n = t.nrows();
        // ‖TH − I‖ is only as small as eps·κ(T) allows
        let tol = INVERSE_TOL * (1.0 + t.norm() * t_inv.norm());
        if (&t * &t_inv - Matrix::identity(n, n)).norm() > tol {
            return Err(Error::SingularTransform);
        }
        Ok(Self { t, t_inv })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            t: Matrix::identity(n, n),
            t_inv: Matrix::identity(n, n),
        }
    }

    pub fn scalar(t: f64) -> Result<Self> {
        Self::new(Matrix::from_element(1, 1, t))
    }

    /// `t·I` in dimension `n`.
    pub fn scaled_identity(n: usize, t: f64) -> Result<Self> {
        Self::new(Matrix::identity(n, n) * t)
    }

    pub fn t(&self) -> &Matrix {
        &self.t
    }

    pub fn t_inv(&self) -> &Matrix {
        &self.t_inv
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Transform equal to applying `self` first and then `next`, i.e. `T_next·T_self`.
    pub fn then(&self, next: &Transform) -> Result<Transform> {
        if next.n() != self.n() {
            return Err(Error::DimensionMismatch(
                "transforms of different size".into(),
            ));
        }
        Self::from_pair(&next.t * &self.t, &self.t_inv * &next.t_inv)
    }

    /// `T̄⁻¹ = blockdiag(I, T⁻¹)`.
    pub fn block_inverse(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::identity(2 * n, 2 * n);
        m.view_mut((n, n), (n, n)).copy_from(&self.t_inv);
        m
    }
}

pub fn apply(controller: &Controller, transform: &Transform) -> Result<Controller> {
    if controller.n() != transform.n() {
        return Err(Error::DimensionMismatch(format!(
            "transform is {0}x{0} but controller order is {1}",
            transform.n(),
            controller.n()
        )));
    }
    let (t, h) = (&transform.t, &transform.t_inv);
    Ok(Controller {
        a_k: t * &controller.a_k * h,
        b_k: t * &controller.b_k,
        c_k: &controller.c_k * h,
    })
}

/// `T̄⁻¹ X T̄⁻ᵀ`.
pub fn transformed_moment(x: &Matrix, transform: &Transform) -> Matrix {
    let tb = transform.block_inverse();
    &tb * x * tb.transpose()
}

/// `T̄⁻ᵀ P_K T̄⁻¹`, the value matrix of the transformed controller.
pub fn transformed_value_matrix(report: &CostReport, transform: &Transform) -> Matrix {
    let tb = transform.block_inverse();
    tb.transpose() * &report.p * tb
}

/// `J(𝒯_T(𝖪))` from a single Lyapunov solve for `𝖪`.
pub fn transformed_cost(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
    transform: &Transform,
) -> Result<f64> {
    Orbit::new(plant, controller, x)?.cost(transform)
}

/// The similarity orbit of one controller, with `P_K` solved once.
#[derive(Debug, Clone)]
pub struct Orbit {
    controller: Controller,
    report: CostReport,
}

impl Orbit {
    pub fn new(plant: &Plant, controller: &Controller, x: &SecondMoment) -> Result<Self> {
        let report = cost::evaluate(plant, controller, x)?;
        Ok(Self {
            controller: controller.clone(),
            report,
        })
    }

    pub fn from_report(controller: Controller, report: CostReport) -> Self {
        Self { controller, report }
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn report(&self) -> &CostReport {
        &self.report
    }

    pub fn cost(&self, transform: &Transform) -> Result<f64> {
        if transform.n() != self.controller.n() {
            return Err(Error::DimensionMismatch(
                "transform does not match controller order".into(),
            ));
        }
        Ok(g_value(&self.report, transform.t_inv()))
    }

    /// Costs along many transforms, evaluated in parallel; output order
    /// follows the input.
    pub fn costs(&self, transforms: &[Transform]) -> Result<Vec<f64>> {
        transforms.par_iter().map(|t| self.cost(t)).collect()
    }

    pub fn member(&self, transform: &Transform) -> Result<Controller> {
        apply(&self.controller, transform)
    }
}

/// `g(H) = Tr(P T̄⁻¹ X T̄⁻ᵀ)` with `T̄⁻¹ = blockdiag(I, H)`.
pub fn g_value(report: &CostReport, h: &Matrix) -> f64 {
    let n = report.n();
    let mut tb = Matrix::identity(2 * n, 2 * n);
    tb.view_mut((n, n), (n, n)).copy_from(h);
    let moved = &tb * &report.x * tb.transpose();
    report.p.component_mul(&moved).sum()
}

/// `∇_H g(H) = 2(P₁₂ᵀX₁₂ + P₂₂HX₂₂)`.
pub fn g_gradient(report: &CostReport, h: &Matrix) -> Matrix {
    let (x12, x22) = x_blocks(report);
    (report.p12().transpose() * x12 + report.p22() * h * x22) * 2.0
}

/// Second derivative of `g` along `Z`: `2Tr(P₂₂ Z X₂₂ Zᵀ)`.
pub fn g_hessian_form(report: &CostReport, z: &Matrix) -> f64 {
    let (_, x22) = x_blocks(report);
    2.0 * (report.p22() * z * x22 * z.transpose()).trace()
}

/// `2λ_min(P₂₂)λ_min(X₂₂)`, the strong-convexity modulus of `g`.
pub fn g_convexity_modulus(report: &CostReport) -> f64 {
    let (_, x22) = x_blocks(report);
    2.0 * matops::min_eigenvalue(&report.p22()) * matops::min_eigenvalue(&x22)
}

fn x_blocks(report: &CostReport) -> (Matrix, Matrix) {
    let n = report.n();
    (
        report.x.view((0, n), (n, n)).into_owned(),
        report.x.view((n, n), (n, n)).into_owned(),
    )
}

/// Cost-minimizing transform over the orbit of `controller`.
pub fn optimal_transform(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
) -> Result<Transform> {
    if !x.is_positive_definite() {
        return Err(Error::NotPositiveDefinite("X"));
    }
    let report = cost::evaluate(plant, controller, x)?;
    optimal_transform_from_report(controller, &report)
}

/// As [`optimal_transform`] for an already evaluated controller.
pub fn optimal_transform_from_report(
    controller: &Controller,
    report: &CostReport,
) -> Result<Transform> {
    if !model::is_observable_controller(controller) {
        return Err(Error::NotObservable);
    }
    let (x12, x22) = x_blocks(report);
    let p12 = report.p12();
    let p22 = report.p22();
    if matops::inverse_condition(&x12) < SINGULAR_REL_TOL {
        return Err(Error::OptimalTransformNotFound("X12"));
    }
    if matops::inverse_condition(&p12) < SINGULAR_REL_TOL {
        return Err(Error::OptimalTransformNotFound("P12"));
    }
    let x22_inv = matops::checked_inverse(&x22, SINGULAR_REL_TOL, "X22")?;
    let p22_inv = matops::checked_inverse(&p22, SINGULAR_REL_TOL, "P22")?;

    // H* = −P₂₂⁻¹P₁₂ᵀX₁₂X₂₂⁻¹ solves the linear condition P₂₂HX₂₂ = −P₁₂ᵀX₁₂;
    // a couple of refinement steps recover the digits lost to κ(P₂₂)κ(X₂₂)
    let rhs = p12.transpose() * &x12;
    let mut h = -(&p22_inv * &rhs * &x22_inv);
    for _ in 0..2 {
        let r = &rhs + &p22 * &h * &x22;
        h -= &p22_inv * r * &x22_inv;
    }
    let transform =
        Transform::from_inverse(h).map_err(|_| Error::OptimalTransformNotFound("P12"))?;

    let residual = optimality_residual(report, &transform);
    let scale = rhs.norm() + p22.norm() * transform.t_inv().norm() * x22.norm();
    if residual > OPTIMALITY_TOL * (1.0 + scale) {
        return Err(Error::SolverDiverged {
            iterations: 0,
            residual,
        });
    }
    Ok(transform)
}

/// `‖∇_H g(T⁻¹)‖_F`; zero exactly at the optimal transform.
pub fn optimality_residual(report: &CostReport, transform: &Transform) -> f64 {
    g_gradient(report, transform.t_inv()).norm()
}
