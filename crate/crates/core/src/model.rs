//! Plant, full-order dynamic controller and the closed loop they form.

use crate::error::{Error, Result};
use crate::matops::{self, Matrix, RankReport, SolverConfig};

/// Discrete-time plant `x⁺ = Ax + Bu`, `y = Cx` with stage cost `xᵀQx + uᵀRu`.
///
/// Construction enforces the standing assumptions: `Q ⪰ 0`, `R ≻ 0`, `C` of
/// full row rank, `(A, B)` controllable and `(C, A)`, `(Q^{1/2}, A)`
/// observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    q: Matrix,
    r: Matrix,
}

impl Plant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NonSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::DimensionMismatch(
                "state dimension must be positive".into(),
            ));
        }
        let m = b.ncols();
        let d = c.nrows();
        if b.nrows() != n || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n}xm",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || d == 0 {
            return Err(Error::DimensionMismatch(format!(
                "C is {}x{}, expected dx{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        if q.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("Q must be {n}x{n}")));
        }
        if r.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!("R must be {m}x{m}")));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("Q", &q), ("R", &r)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        if !matops::is_symmetric(&q, 1e-12) {
            return Err(Error::NotSymmetric("Q"));
        }
        if !matops::is_symmetric(&r, 1e-12) {
            return Err(Error::NotSymmetric("R"));
        }
        if !matops::is_psd(&q) {
            return Err(Error::NotPositiveSemidefinite("Q"));
        }
        if !matops::is_pd(&r) {
            return Err(Error::NotPositiveDefinite("R"));
        }
        if matops::rank(&c) != d {
            return Err(Error::RankDeficientOutput);
        }
        let report = matops::rank_tests(&a, &b, &c, &q);
        if !report.controllable {
            return Err(Error::AssumptionViolated(
                "(A, B) is not controllable".into(),
            ));
        }
        if !report.observable_ca {
            return Err(Error::AssumptionViolated("(C, A) is not observable".into()));
        }
        if !report.observable_qa {
            return Err(Error::AssumptionViolated(
                "(Q^1/2, A) is not observable".into(),
            ));
        }
        Ok(Self { a, b, c, q, r })
    }

    /// Scalar plant with `B = C = 1`.
    pub fn scalar(a: f64, q: f64, r: f64) -> Result<Self> {
        let one = Matrix::from_element(1, 1, 1.0);
        Self::new(
            Matrix::from_element(1, 1, a),
            one.clone(),
            one,
            Matrix::from_element(1, 1, q),
            Matrix::from_element(1, 1, r),
        )
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension `d`.
    pub fn d(&self) -> usize {
        self.c.nrows()
    }

    pub fn rank_tests(&self) -> RankReport {
        matops::rank_tests(&self.a, &self.b, &self.c, &self.q)
    }
}

/// Full-order dynamic controller `ξ⁺ = A_K ξ + B_K y`, `u = C_K ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub a_k: Matrix,
    pub b_k: Matrix,
    pub c_k: Matrix,
}

impl Controller {
    pub fn new(a_k: Matrix, b_k: Matrix, c_k: Matrix) -> Result<Self> {
        let n = a_k.nrows();
        if a_k.ncols() != n {
            return Err(Error::NonSquare {
                rows: a_k.nrows(),
                cols: a_k.ncols(),
            });
        }
        if b_k.nrows() != n || c_k.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "controller blocks A_K {}x{}, B_K {}x{}, C_K {}x{} are inconsistent",
                a_k.nrows(),
                a_k.ncols(),
                b_k.nrows(),
                b_k.ncols(),
                c_k.nrows(),
                c_k.ncols()
            )));
        }
        Ok(Self { a_k, b_k, c_k })
    }

    pub fn scalar(a_k: f64, b_k: f64, c_k: f64) -> Self {
        Self {
            a_k: Matrix::from_element(1, 1, a_k),
            b_k: Matrix::from_element(1, 1, b_k),
            c_k: Matrix::from_element(1, 1, c_k),
        }
    }

    pub fn zeros(n: usize, m: usize, d: usize) -> Self {
        Self {
            a_k: Matrix::zeros(n, n),
            b_k: Matrix::zeros(n, d),
            c_k: Matrix::zeros(m, n),
        }
    }

    pub fn n(&self) -> usize {
        self.a_k.nrows()
    }
    pub fn m(&self) -> usize {
        self.c_k.nrows()
    }
    pub fn d(&self) -> usize {
        self.b_k.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.a_k.len() + self.b_k.len() + self.c_k.len()
    }

    pub fn check_against(&self, plant: &Plant) -> Result<()> {
        if self.a_k.shape() != (plant.n(), plant.n())
            || self.b_k.shape() != (plant.n(), plant.d())
            || self.c_k.shape() != (plant.m(), plant.n())
        {
            return Err(Error::DimensionMismatch(format!(
                "controller (n={}, m={}, d={}) does not match plant (n={}, m={}, d={})",
                self.n(),
                self.m(),
                self.d(),
                plant.n(),
                plant.m(),
                plant.d()
            )));
        }
        Ok(())
    }

    /// Flattened parameters: `A_K`, then `B_K`, then `C_K`, each row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for mat in [&self.a_k, &self.b_k, &self.c_k] {
            for i in 0..mat.nrows() {
                for j in 0..mat.ncols() {
                    out.push(mat[(i, j)]);
                }
            }
        }
        out
    }

    /// Inverse of [`Controller::params`].
    pub fn from_params(n: usize, m: usize, d: usize, params: &[f64]) -> Result<Self> {
        let expected = n * n + n * d + m * n;
        if params.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} controller parameters, got {}",
                params.len()
            )));
        }
        let (a, rest) = params.split_at(n * n);
        let (b, c) = rest.split_at(n * d);
        Ok(Self {
            a_k: Matrix::from_row_slice(n, n, a),
            b_k: Matrix::from_row_slice(n, d, b),
            c_k: Matrix::from_row_slice(m, n, c),
        })
    }

    /// Frobenius distance in parameter space.
    pub fn distance(&self, other: &Controller) -> f64 {
        ((&self.a_k - &other.a_k).norm_squared()
            + (&self.b_k - &other.b_k).norm_squared()
            + (&self.c_k - &other.c_k).norm_squared())
        .sqrt()
    }

    /// Compact block `[0 C_K; B_K A_K]` of size `(m+n)×(d+n)`.
    pub fn compact(&self) -> Matrix {
        let (n, m, d) = (self.n(), self.m(), self.d());
        let mut k = Matrix::zeros(m + n, d + n);
        k.view_mut((0, d), (m, n)).copy_from(&self.c_k);
        k.view_mut((m, 0), (n, d)).copy_from(&self.b_k);
        k.view_mut((m, d), (n, n)).copy_from(&self.a_k);
        k
    }

    pub fn scaled(&self, s: f64) -> Controller {
        Controller {
            a_k: &self.a_k * s,
            b_k: &self.b_k * s,
            c_k: &self.c_k * s,
        }
    }

    pub fn add(&self, other: &Controller) -> Controller {
        Controller {
            a_k: &self.a_k + &other.a_k,
            b_k: &self.b_k + &other.b_k,
            c_k: &self.c_k + &other.c_k,
        }
    }
}

/// Second moment `X = E[x̄₀x̄₀ᵀ]` of the joint initial plant/controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    x: Matrix,
}

impl SecondMoment {
    pub fn new(x: Matrix) -> Result<Self> {
        if x.nrows() != x.ncols() {
            return Err(Error::NonSquare {
                rows: x.nrows(),
                cols: x.ncols(),
            });
        }
        if !x.nrows().is_multiple_of(2) || x.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "X must be 2n x 2n, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("X"));
        }
        if !matops::is_symmetric(&x, 1e-12) {
            return Err(Error::NotSymmetric("X"));
        }
        let x = matops::symmetrize(&x);
        if !matops::is_psd(&x) {
            return Err(Error::NotPositiveSemidefinite("X"));
        }
        Ok(Self { x })
    }

    /// `[[x11, x12], [x12, x22]]` for scalar plants.
    pub fn scalar(x11: f64, x12: f64, x22: f64) -> Result<Self> {
        Self::new(Matrix::from_row_slice(2, 2, &[x11, x12, x12, x22]))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: Matrix::zeros(2 * n, 2 * n),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows() / 2
    }

    pub fn x11(&self) -> Matrix {
        let n = self.n();
        self.x.view((0, 0), (n, n)).into_owned()
    }
    pub fn x12(&self) -> Matrix {
        let n = self.n();
        self.x.view((0, n), (n, n)).into_owned()
    }
    pub fn x22(&self) -> Matrix {
        let n = self.n();
        self.x.view((n, n), (n, n)).into_owned()
    }

    pub fn is_positive_definite(&self) -> bool {
        matops::is_pd(&self.x)
    }

    /// Schur complement `Δ_X = X₁₁ − X₁₂X₂₂⁻¹X₁₂ᵀ`.
    pub fn schur_complement(&self) -> Result<Matrix> {
        let x22_inv = matops::checked_inverse(&self.x22(), 1e-12, "X22")?;
        let x12 = self.x12();
        Ok(matops::symmetrize(
            &(self.x11() - &x12 * x22_inv * x12.transpose()),
        ))
    }

    pub fn check_against(&self, plant: &Plant) -> Result<()> {
        if self.n() != plant.n() {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, plant needs {}x{}",
                self.x.nrows(),
                self.x.ncols(),
                2 * plant.n(),
                2 * plant.n()
            )));
        }
        Ok(())
    }
}

/// Closed-loop matrix `Ā + B̄𝖪C̄` and stage weight `blockdiag(Q, C_KᵀRC_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_cl: Matrix,
    pub w_cl: Matrix,
}

impl ClosedLoop {
    pub fn spectral_radius(&self) -> f64 {
        matops::spectral_radius(&self.a_cl).unwrap_or(f64::INFINITY)
    }
}

pub fn assemble(plant: &Plant, controller: &Controller) -> Result<ClosedLoop> {
    controller.check_against(plant)?;
    let n = plant.n();
    let mut a_cl = Matrix::zeros(2 * n, 2 * n);
    a_cl.view_mut((0, 0), (n, n)).copy_from(plant.a());
    a_cl.view_mut((0, n), (n, n))
        .copy_from(&(plant.b() * &controller.c_k));
    a_cl.view_mut((n, 0), (n, n))
        .copy_from(&(&controller.b_k * plant.c()));
    a_cl.view_mut((n, n), (n, n)).copy_from(&controller.a_k);

    let mut w_cl = Matrix::zeros(2 * n, 2 * n);
    w_cl.view_mut((0, 0), (n, n)).copy_from(plant.q());
    w_cl.view_mut((n, n), (n, n))
        .copy_from(&(controller.c_k.transpose() * plant.r() * &controller.c_k));
    Ok(ClosedLoop { a_cl, w_cl })
}

/// Closed-loop spectral radius.
pub fn closed_loop_radius(plant: &Plant, controller: &Controller) -> Result<f64> {
    let cl = assemble(plant, controller)?;
    matops::spectral_radius(&cl.a_cl)
}

pub fn is_stabilizing(plant: &Plant, controller: &Controller) -> bool {
    closed_loop_radius(plant, controller)
        .map(|rho| SolverConfig::default().is_stable_radius(rho))
        .unwrap_or(false)
}

/// Assembles the closed loop, failing with `NotStabilizing` outside 𝕂.
pub fn stabilizing_closed_loop(
    plant: &Plant,
    controller: &Controller,
    cfg: &SolverConfig,
) -> Result<ClosedLoop> {
    let cl = assemble(plant, controller)?;
    let rho = matops::spectral_radius(&cl.a_cl)?;
    if !cfg.is_stable_radius(rho) {
        return Err(Error::NotStabilizing { rho });
    }
    Ok(cl)
}

/// Kalman observability of `(C_K, A_K)`.
pub fn is_observable_controller(controller: &Controller) -> bool {
    matops::observable(&controller.c_k, &controller.a_k)
}

/// Observer-based controller `A_K = A − BK − LC`, `B_K = L`, `C_K = −K`.
pub fn observer_based(plant: &Plant, k_gain: &Matrix, l_gain: &Matrix) -> Result<Controller> {
    let (n, m, d) = (plant.n(), plant.m(), plant.d());
    if k_gain.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!("K must be {m}x{n}")));
    }
    if l_gain.shape() != (n, d) {
        return Err(Error::DimensionMismatch(format!("L must be {n}x{d}")));
    }
    Ok(Controller {
        a_k: plant.a() - plant.b() * k_gain - l_gain * plant.c(),
        b_k: l_gain.clone(),
        c_k: -k_gain,
    })
}

/// Truncated cost `Σ_{t<horizon} Tr(W_cl A_clᵗ X (A_clᵀ)ᵗ)`, propagating the
/// second moment forward.
pub fn rollout_cost(
    plant: &Plant,
    controller: &Controller,
    x: &SecondMoment,
    horizon: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    x.check_against(plant)?;
    let cl = stabilizing_closed_loop(plant, controller, &SolverConfig::default())?;
    let a_t = cl.a_cl.transpose();
    let mut moment = x.matrix().clone();
    let mut total = 0.0;
    for _ in 0..horizon {
        total += cl.w_cl.component_mul(&moment).sum();
        moment = &cl.a_cl * moment * &a_t;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example1() -> Plant {
        Plant::scalar(1.1, 5.0, 1.0).unwrap()
    }

    fn example2() -> Plant {
        Plant::scalar(0.9, 5.0, 1.0).unwrap()
    }

    #[test]
    fn assemble_example_controller() {
        let k = Controller::scalar(-0.944, 1.1, -0.944);
        let cl = assemble(&example1(), &k).unwrap();
        assert_relative_eq!(
            cl.a_cl,
            Matrix::from_row_slice(2, 2, &[1.1, -0.944, 1.1, -0.944]),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            cl.w_cl,
            Matrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 0.891136]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn assemble_zero_controller_is_block_diagonal() {
        let cl = assemble(&example1(), &Controller::zeros(1, 1, 1)).unwrap();
        assert_eq!(cl.a_cl, Matrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn assemble_rejects_mismatched_controller() {
        let err = assemble(&example1(), &Controller::zeros(2, 1, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn stabilizing_examples() {
        assert!(is_stabilizing(
            &example1(),
            &Controller::scalar(-0.944, 1.1, -0.944)
        ));
        assert!(!is_stabilizing(&example1(), &Controller::zeros(1, 1, 1)));
        assert!(is_stabilizing(&example2(), &Controller::zeros(1, 1, 1)));
        assert_relative_eq!(
            closed_loop_radius(&example1(), &Controller::scalar(-0.944, 1.1, -0.944)).unwrap(),
            0.156,
            epsilon = 1e-12
        );
    }

    #[test]
    fn observability_of_controllers() {
        assert!(is_observable_controller(&Controller::scalar(0.3, 1.0, 2.0)));
        assert!(!is_observable_controller(&Controller::scalar(
            0.3, 1.0, 0.0
        )));
        let k = Controller::new(
            Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]),
            Matrix::zeros(2, 1),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        assert!(!is_observable_controller(&k));
    }

    #[test]
    fn observer_based_examples() {
        let k = Matrix::from_element(1, 1, 0.9437);
        let l = Matrix::from_element(1, 1, 1.1);
        let ctrl = observer_based(&example1(), &k, &l).unwrap();
        assert_relative_eq!(ctrl.a_k[(0, 0)], -0.9437, epsilon = 1e-12);
        assert_relative_eq!(ctrl.b_k[(0, 0)], 1.1);
        assert_relative_eq!(ctrl.c_k[(0, 0)], -0.9437);

        let zero = observer_based(&example1(), &Matrix::zeros(1, 1), &Matrix::zeros(1, 1)).unwrap();
        assert_eq!(zero, Controller::scalar(1.1, 0.0, 0.0));

        let ctrl = observer_based(
            &example2(),
            &Matrix::from_element(1, 1, 0.7654),
            &Matrix::from_element(1, 1, 0.9),
        )
        .unwrap();
        assert_relative_eq!(ctrl.a_k[(0, 0)], -0.7654, epsilon = 1e-12);
        assert_relative_eq!(ctrl.b_k[(0, 0)], 0.9);
        assert_relative_eq!(ctrl.c_k[(0, 0)], -0.7654);
    }

    #[test]
    fn rollout_edge_cases() {
        let plant = example1();
        let k = Controller::scalar(-0.944, 1.1, -0.944);
        let x = SecondMoment::scalar(1.0, 0.25, 1.0).unwrap();
        let cl = assemble(&plant, &k).unwrap();
        let one_step = rollout_cost(&plant, &k, &x, 1).unwrap();
        assert_relative_eq!(one_step, (&cl.w_cl * x.matrix()).trace(), epsilon = 1e-14);
        assert_eq!(
            rollout_cost(&plant, &k, &SecondMoment::zeros(1), 50).unwrap(),
            0.0
        );
        assert_relative_eq!(
            rollout_cost(&plant, &k, &x, 200).unwrap(),
            15.443,
            epsilon = 1e-3
        );
        assert!(matches!(
            rollout_cost(&plant, &Controller::zeros(1, 1, 1), &x, 10),
            Err(Error::NotStabilizing { .. })
        ));
        assert!(rollout_cost(&plant, &k, &x, 0).is_err());
    }

    #[test]
    fn params_round_trip() {
        let k = Controller::new(
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            Matrix::from_row_slice(2, 1, &[5.0, 6.0]),
            Matrix::from_row_slice(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]),
        )
        .unwrap();
        let p = k.params();
        assert_eq!(p, (1..=12).map(f64::from).collect::<Vec<_>>());
        assert_eq!(Controller::from_params(2, 3, 1, &p).unwrap(), k);
        assert!(Controller::from_params(2, 3, 1, &p[1..]).is_err());
    }

    #[test]
    fn compact_block_layout() {
        let k = Controller::scalar(-0.944, 4.4, -0.236);
        assert_eq!(
            k.compact(),
            Matrix::from_row_slice(2, 2, &[0.0, -0.236, 4.4, -0.944])
        );
    }

    #[test]
    fn plant_validation() {
        let one = Matrix::from_element(1, 1, 1.0);
        assert!(matches!(
            Plant::new(
                one.clone(),
                one.clone(),
                one.clone(),
                one.clone(),
                Matrix::zeros(1, 1)
            ),
            Err(Error::NotPositiveDefinite("R"))
        ));
        assert!(matches!(
            Plant::new(one.clone(), one.clone(), one.clone(), -&one, one.clone()),
            Err(Error::NotPositiveSemidefinite("Q"))
        ));
        // decoupled second state
        let err = Plant::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2),
            one.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
        // repeated output rows
        let err = Plant::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
            Matrix::identity(2, 2),
            one,
        )
        .unwrap_err();
        assert_eq!(err, Error::RankDeficientOutput);
    }

    #[test]
    fn second_moment_blocks_and_schur() {
        let x = SecondMoment::scalar(1.0, 0.25, 1.0).unwrap();
        assert_eq!(x.x12()[(0, 0)], 0.25);
        assert_relative_eq!(
            x.schur_complement().unwrap()[(0, 0)],
            0.9375,
            epsilon = 1e-15
        );
        assert!(SecondMoment::scalar(1.0, 2.0, 1.0).is_err());
        assert!(SecondMoment::new(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
    }
}
