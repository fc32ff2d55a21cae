//! Exact dLQR cost through the closed-loop Lyapunov pair.
//!
//! For a stabilizing controller the value matrix `P` solves
//! `P = W_cl + A_clᵀ P A_cl` and the state correlation `Σ` solves
//! `Σ = X + A_cl Σ A_clᵀ`. The cost is `Tr(P X)`, which must coincide with
//! `Tr(W_cl Σ)`; both solves are done independently and reconciled.

use crate::error::{Error, Result};
use crate::matops::{self, Matrix, SolverConfig};
use crate::model::{self, Controller, Plant, SecondMoment};

/// Relative tolerance for `Tr(PX) = Tr(W_cl Σ)`, further scaled by
/// `1 + ‖A_cl‖²_F` since both solves lose accuracy on non-normal loops.
pub const TRACE_DUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub p: Matrix,
    pub sigma: Matrix,
    /// `Tr(P X)`.
    pub j: f64,
    /// `Tr(blockdiag(Q, C_KᵀRC_K) Σ)`.
    pub j_dual: f64,
    pub x: Matrix,
    pub rho: f64,
}

fn block(m: &Matrix, i: usize, j: usize) -> Matrix {
    let n = m.nrows() / 2;
    m.view((i * n, j * n), (n, n)).into_owned()
}

impl CostReport {
    pub fn n(&self) -> usize {
        self.p.nrows() / 2
    }
    pub fn p11(&self) -> Matrix {
        block(&self.p, 0, 0)
    }
    pub fn p12(&self) -> Matrix {
        block(&self.p, 0, 1)
    }
    pub fn p22(&self) -> Matrix {
        block(&self.p, 1, 1)
    }
    pub fn s11(&self) -> Matrix {
        block(&self.sigma, 0, 0)
    }
    pub fn s12(&self) -> Matrix {
        block(&self.sigma, 0, 1)
    }
    pub fn s22(&self) -> Matrix {
        block(&self.sigma, 1, 1)
    }

    pub fn min_eig_p(&self) -> f64 {
        matops::min_eigenvalue(&self.p)
    }
    pub fn min_eig_sigma(&self) -> f64 {
        matops::min_eigenvalue(&self.sigma)
    }

    /// Value function `V(x̄) = x̄ᵀ P x̄`.
    pub fn value(&self, xbar: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(xbar);
        (v.transpose() * &self.p * v)[(0, 0)]
    }
}

pub fn evaluate(plant: &Plant, controller: &Controller, x: &SecondMoment) -> Result<CostReport> {
    evaluate_with(plant, controller, x, &SolverConfig::default())
}

pub fn evaluate_with(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
    cfg: &SolverConfig,
) -> Result<CostReport> {
    x.check_against(plant)?;
    let cl = model::stabilizing_closed_loop(plant, controller, cfg)?;
    let rho = cl.spectral_radius();
    let p = matops::solve_dlyap_dual(&cl.a_cl, &cl.w_cl, cfg)?;
    let sigma = matops::solve_dlyap_primal(&cl.a_cl, x.matrix(), cfg)?;
    let j = p.component_mul(x.matrix()).sum();
    let j_dual = cl.w_cl.component_mul(&sigma).sum();
    let gap = (j - j_dual).abs();
    if gap > TRACE_DUALITY_TOL * (1.0 + j.abs()) * (1.0 + cl.a_cl.norm_squared()) {
        return Err(Error::SolverDiverged {
            iterations: 0,
            residual: gap,
        });
    }
    Ok(CostReport {
        p,
        sigma,
        j,
        j_dual,
        x: x.matrix().clone(),
        rho,
    })
}

/// Frobenius residuals of the six block Lyapunov equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResiduals {
    pub p11: f64,
    pub p12: f64,
    pub p22: f64,
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl BlockResiduals {
    pub fn max(&self) -> f64 {
        [self.p11, self.p12, self.p22, self.s11, self.s12, self.s22]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("P11", self.p11),
            ("P12", self.p12),
            ("P22", self.p22),
            ("Sigma11", self.s11),
            ("Sigma12", self.s12),
            ("Sigma22", self.s22),
        ]
    }
}

/// Tolerance applied to [`block_lyapunov_residuals`].
pub fn block_residual_tolerance(report: &CostReport) -> f64 {
    1e-9 * (1.0 + report.p.norm() + report.sigma.norm())
}

/// Evaluates each block equation written out in terms of the plant and
/// controller matrices, independently of the assembled closed loop.
pub fn block_lyapunov_residuals(
    plant: &Plant,
    controller: &Controller,
    report: &CostReport,
) -> Result<BlockResiduals> {
    controller.check_against(plant)?;
    if report.n() != plant.n() {
        return Err(Error::DimensionMismatch(
            "report does not match plant".into(),
        ));
    }
    let (a, b, c, q, r) = (plant.a(), plant.b(), plant.c(), plant.q(), plant.r());
    let (ak, bk, ck) = (&controller.a_k, &controller.b_k, &controller.c_k);
    let (p11, p12, p22) = (report.p11(), report.p12(), report.p22());
    let (s11, s12, s22) = (report.s11(), report.s12(), report.s22());
    let n = plant.n();
    let x11 = report.x.view((0, 0), (n, n)).into_owned();
    let x12 = report.x.view((0, n), (n, n)).into_owned();
    let x22 = report.x.view((n, n), (n, n)).into_owned();

    let at = a.transpose();
    let ct_bkt = c.transpose() * bk.transpose();
    let b_ck = b * ck;
    let bk_c = bk * c;

    let rp11 = &p11
        - (q + &at * &p11 * a
            + &ct_bkt * p12.transpose() * a
            + &at * &p12 * &bk_c
            + &ct_bkt * &p22 * &bk_c);
    let rp12 = &p12
        - (&at * &p11 * &b_ck
            + &ct_bkt * p12.transpose() * &b_ck
            + &at * &p12 * ak
            + &ct_bkt * &p22 * ak);
    let rp22 = &p22
        - (ck.transpose() * r * ck
            + ak.transpose() * p12.transpose() * &b_ck
            + b_ck.transpose() * &p12 * ak
            + b_ck.transpose() * &p11 * &b_ck
            + ak.transpose() * &p22 * ak);

    let rs11 = &s11
        - (&x11
            + a * &s11 * &at
            + &b_ck * s12.transpose() * &at
            + a * &s12 * b_ck.transpose()
            + &b_ck * &s22 * b_ck.transpose());
    let rs12 = &s12
        - (&x12
            + a * &s11 * &ct_bkt
            + &b_ck * s12.transpose() * &ct_bkt
            + a * &s12 * ak.transpose()
            + &b_ck * &s22 * ak.transpose());
    let rs22 = &s22
        - (&x22
            + &bk_c * &s11 * &ct_bkt
            + ak * s12.transpose() * &ct_bkt
            + &bk_c * &s12 * ak.transpose()
            + ak * &s22 * ak.transpose());

    Ok(BlockResiduals {
        p11: rp11.norm(),
        p12: rp12.norm(),
        p22: rp22.norm(),
        s11: rs11.norm(),
        s12: rs12.norm(),
        s22: rs22.norm(),
    })
}

/// `J(to) − J(from)` computed without subtracting two nearly equal costs.
///
/// With `D = A_cl(to) − A_cl(from)` the value-matrix increment solves
/// `Δ = ΔW + DᵀPA + AᵀPD + DᵀPD + A_cl(to)ᵀ Δ A_cl(to)`, where `P`, `A`
/// belong to `from`. The weight change is expanded from the exact
/// parameter difference so the result keeps relative accuracy for tiny
/// steps.
pub fn cost_difference(
    plant: &Plant,
    from: &Controller,
    from_report: &CostReport,
    to: &Controller,
    cfg: &SolverConfig,
) -> Result<f64> {
    let n = plant.n();
    let cl_from = model::assemble(plant, from)?;
    let cl_to = model::stabilizing_closed_loop(plant, to, cfg)?;
    let d = &cl_to.a_cl - &cl_from.a_cl;
    let dc = &to.c_k - &from.c_k;
    let r = plant.r();
    let mut forcing = Matrix::zeros(2 * n, 2 * n);
    forcing.view_mut((n, n), (n, n)).copy_from(
        &(dc.transpose() * r * &from.c_k
            + from.c_k.transpose() * r * &dc
            + dc.transpose() * r * &dc),
    );
    let p = &from_report.p;
    let pa = p * &cl_from.a_cl;
    let pd = p * &d;
    forcing += d.transpose() * &pa + pa.transpose() * &d + d.transpose() * pd;
    let forcing = matops::symmetrize(&forcing);
    let delta = matops::solve_dlyap_dual(&cl_to.a_cl, &forcing, cfg)?;
    Ok(delta.component_mul(&from_report.x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example1() -> (Plant, SecondMoment) {
        (
            Plant::scalar(1.1, 5.0, 1.0).unwrap(),
            SecondMoment::scalar(1.0, 0.25, 1.0).unwrap(),
        )
    }

    #[test]
    fn example_one_cost_and_value_matrix() {
        let (plant, x) = example1();
        let rep = evaluate(&plant, &Controller::scalar(-0.944, 1.1, -0.944), &x).unwrap();
        assert_relative_eq!(rep.j, 15.443, epsilon = 1e-3);
        assert_relative_eq!(
            rep.p,
            Matrix::from_row_slice(2, 2, &[12.3061, -6.2700, -6.2700, 6.2719]),
            epsilon = 1e-4
        );
        assert_relative_eq!(rep.j, rep.j_dual, max_relative = 1e-12);
        assert_relative_eq!(rep.rho, 0.156, epsilon = 1e-12);
    }

    #[test]
    fn zero_moment_gives_zero_cost() {
        let (plant, _) = example1();
        let rep = evaluate(
            &plant,
            &Controller::scalar(-0.944, 1.1, -0.944),
            &SecondMoment::zeros(1),
        )
        .unwrap();
        assert_eq!(rep.j, 0.0);
        assert_eq!(rep.sigma, Matrix::zeros(2, 2));
    }

    #[test]
    fn not_stabilizing_is_an_error() {
        let (plant, x) = example1();
        let err = evaluate(&plant, &Controller::zeros(1, 1, 1), &x).unwrap_err();
        assert!(matches!(err, Error::NotStabilizing { rho } if (rho - 1.1).abs() < 1e-12));
    }

    #[test]
    fn block_residuals_vanish_for_valid_report() {
        let (plant, x) = example1();
        let k = Controller::scalar(-0.944, 1.1, -0.944);
        let rep = evaluate(&plant, &k, &x).unwrap();
        let res = block_lyapunov_residuals(&plant, &k, &rep).unwrap();
        assert!(res.max() <= block_residual_tolerance(&rep), "{res:?}");
    }

    #[test]
    fn perturbed_p12_is_detected() {
        let (plant, x) = example1();
        let k = Controller::scalar(-0.944, 1.1, -0.944);
        let mut rep = evaluate(&plant, &k, &x).unwrap();
        rep.p[(0, 1)] += 1e-3;
        rep.p[(1, 0)] += 1e-3;
        let res = block_lyapunov_residuals(&plant, &k, &rep).unwrap();
        assert!(res.p12 >= 1e-4, "{res:?}");
    }

    #[test]
    fn scalar_block_equations_match_direct_substitution() {
        // For n = 1 every block equation is a scalar identity; substitute by hand.
        let (plant, x) = example1();
        let (ak, bk, ck) = (-0.944, 1.1, -0.944);
        let rep = evaluate(&plant, &Controller::scalar(ak, bk, ck), &x).unwrap();
        let (p11, p12, p22) = (rep.p[(0, 0)], rep.p[(0, 1)], rep.p[(1, 1)]);
        let a = 1.1;
        let lhs = 5.0 + a * a * p11 + 2.0 * a * bk * p12 + bk * bk * p22;
        assert_relative_eq!(p11, lhs, max_relative = 1e-12);
        let lhs = a * p11 * ck + bk * p12 * ck + a * p12 * ak + bk * p22 * ak;
        assert_relative_eq!(p12, lhs, max_relative = 1e-12);
        let lhs = ck * ck + 2.0 * ak * p12 * ck + ck * ck * p11 + ak * ak * p22;
        assert_relative_eq!(p22, lhs, max_relative = 1e-12);
    }

    #[test]
    fn cost_difference_matches_direct_difference() {
        let (plant, x) = example1();
        let from = Controller::scalar(-0.944, 1.1, -0.944);
        let to = Controller::scalar(-0.9, 1.5, -0.8);
        let rep = evaluate(&plant, &from, &x).unwrap();
        let direct = evaluate(&plant, &to, &x).unwrap().j - rep.j;
        let diff = cost_difference(&plant, &from, &rep, &to, &SolverConfig::default()).unwrap();
        assert_relative_eq!(diff, direct, max_relative = 1e-10);
    }

    #[test]
    fn cost_difference_keeps_precision_for_tiny_steps() {
        let (plant, x) = example1();
        let from = Controller::scalar(-0.944, 1.1, -0.944);
        let rep = evaluate(&plant, &from, &x).unwrap();
        let h = 1e-9;
        let to = Controller::scalar(-0.944, 1.1, -0.944 + h);
        let diff = cost_difference(&plant, &from, &rep, &to, &SolverConfig::default()).unwrap();
        // first-order prediction from a central difference at a coarser step
        let g = {
            let s = 1e-5;
            let up = evaluate(&plant, &Controller::scalar(-0.944, 1.1, -0.944 + s), &x)
                .unwrap()
                .j;
            let dn = evaluate(&plant, &Controller::scalar(-0.944, 1.1, -0.944 - s), &x)
                .unwrap()
                .j;
            (up - dn) / (2.0 * s)
        };
        let exact_step = (-0.944 + h) - (-0.944);
        assert_relative_eq!(diff, g * exact_step, max_relative = 1e-5);
    }
}
