//! Dense linear-algebra kernels: discrete Lyapunov and Riccati solvers,
//! spectral radius and Kalman rank tests.
//!
//! Everything here works on small dense matrices. Lyapunov equations whose
//! dimension is at most [`KRONECKER_MAX_DIM`] are solved exactly through the
//! Kronecker-vectorized linear system; larger ones use the doubling
//! iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Largest Lyapunov dimension solved by Kronecker vectorization.
pub const KRONECKER_MAX_DIM: usize = 12;

/// Relative singular-value threshold used by the Kalman rank tests.
pub const RANK_TOL: f64 = 1e-9;

/// Relative floor for the PSD test: `λ_min ≥ -PSD_TOL · ‖M‖_F`.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Threshold on the successive-iterate (or residual) Frobenius distance,
    /// relative to `1 + ‖P‖_F`. Riccati iterations raise it to the rounding
    /// floor of their gain solve when that is larger.
    pub tol: f64,
    pub max_iter: usize,
    /// Operators are treated as stable only when `ρ < 1 - stability_margin`.
    pub stability_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            stability_margin: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.stability_margin) {
            return Err(Error::InvalidConfig(format!(
                "stability_margin must lie in [0, 1), got {}",
                self.stability_margin
            )));
        }
        Ok(())
    }

    pub fn is_stable_radius(&self, rho: f64) -> bool {
        rho < 1.0 - self.stability_margin
    }
}

fn require_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn require_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    let n = require_square(m)?;
    if n == 0 {
        return Ok(0.0);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral radius argument"));
    }
    Ok(m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Matrix, rel_tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).norm() <= rel_tol * (1.0 + m.norm())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn is_psd(m: &Matrix) -> bool {
    min_eigenvalue(m) >= -PSD_TOL * m.norm()
}

pub fn is_pd(m: &Matrix) -> bool {
    min_eigenvalue(m) > PSD_TOL * m.norm()
}

/// Ratio of the smallest to the largest singular value (0 for the zero matrix).
pub fn inverse_condition(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Inverse that refuses numerically singular input (`σ_min < rel_tol · σ_max`).
pub fn checked_inverse(m: &Matrix, rel_tol: f64, what: &'static str) -> Result<Matrix> {
    require_square(m)?;
    if inverse_condition(m) < rel_tol {
        return Err(Error::Singular(what));
    }
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

/// Residual of `P = W + AᵀPA`, relative to the size of the terms involved
/// (`1 + ‖P‖ + ‖W‖ + ‖A‖²‖P‖`), which is what a backward-stable solve can
/// guarantee.
pub fn dlyap_dual_residual(a: &Matrix, w: &Matrix, p: &Matrix) -> f64 {
    let scale = 1.0 + p.norm() + w.norm() + a.norm_squared() * p.norm();
    (p - w - a.transpose() * p * a).norm() / scale
}

fn check_lyapunov_inputs(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<usize> {
    cfg.validate()?;
    let n = require_square(a)?;
    require_shape(w, n, n, "Lyapunov weight")?;
    if a.iter().chain(w.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Lyapunov data"));
    }
    let rho = spectral_radius(a)?;
    if !cfg.is_stable_radius(rho) {
        return Err(Error::Unstable { rho });
    }
    Ok(n)
}

/// Solves `P = W + AᵀPA` for stable `A`.
pub fn solve_dlyap_dual(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    let n = check_lyapunov_inputs(a, w, cfg)?;
    let p = if n <= KRONECKER_MAX_DIM {
        kronecker_solve(a, w, cfg)?
    } else {
        doubling_solve(a, w, cfg)?
    };
    let residual = dlyap_dual_residual(a, w, &p);
    if residual > cfg.tol {
        return Err(Error::SolverDiverged {
            iterations: 0,
            residual,
        });
    }
    Ok(p)
}

/// Solves `Σ = W + AΣAᵀ` for stable `A`.
pub fn solve_dlyap_primal(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    solve_dlyap_dual(&a.transpose(), w, cfg)
}

/// Direct solve of `(I - Aᵀ⊗Aᵀ) vec(P) = vec(W)` with a few rounds of
/// iterative refinement.
pub fn solve_dlyap_kronecker(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    check_lyapunov_inputs(a, w, cfg)?;
    kronecker_solve(a, w, cfg)
}

/// Doubling iteration `P ← P + AₖᵀPAₖ`, `Aₖ ← Aₖ²`.
pub fn solve_dlyap_doubling(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    check_lyapunov_inputs(a, w, cfg)?;
    doubling_solve(a, w, cfg)
}

fn kronecker_solve(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    let n = a.nrows();
    let at = a.transpose();
    let op = Matrix::identity(n * n, n * n) - at.kronecker(&at);
    let lu = op.lu();
    let rhs = nalgebra::DVector::from_column_slice(w.as_slice());
    let sol = lu.solve(&rhs).ok_or(Error::Singular("I - A^T (x) A^T"))?;
    let mut p = symmetrize(&Matrix::from_column_slice(n, n, sol.as_slice()));
    for _ in 0..3 {
        let r = w + &at * &p * a - &p;
        if r.norm() <= 1e-3 * cfg.tol * (1.0 + p.norm()) {
            break;
        }
        let rv = nalgebra::DVector::from_column_slice(r.as_slice());
        let Some(delta) = lu.solve(&rv) else { break };
        p += Matrix::from_column_slice(n, n, delta.as_slice());
        p = symmetrize(&p);
    }
    Ok(p)
}

fn doubling_solve(a: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    let mut p = symmetrize(w);
    let mut ak = a.clone();
    for iter in 1..=cfg.max_iter {
        let inc = ak.transpose() * &p * &ak;
        p = symmetrize(&(&p + &inc));
        ak = &ak * &ak;
        if inc.norm() <= cfg.tol * (1.0 + p.norm()) * 1e-3 || ak.norm() == 0.0 {
            return Ok(p);
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverDiverged {
                iterations: iter,
                residual: f64::INFINITY,
            });
        }
    }
    Err(Error::SolverDiverged {
        iterations: cfg.max_iter,
        residual: dlyap_dual_residual(a, w, &p),
    })
}

/// `(R + BᵀPB)⁻¹ BᵀPA`.
pub fn control_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    s.lu()
        .solve(&(bt_p * a))
        .ok_or(Error::Singular("R + B^T P B"))
}

/// `AΣCᵀ (CΣCᵀ)⁻¹`.
pub fn filter_gain(a: &Matrix, c: &Matrix, sigma: &Matrix) -> Result<Matrix> {
    let s = c * sigma * c.transpose();
    if inverse_condition(&s) < 1e-14 {
        return Err(Error::SingularInnovation);
    }
    // L S = AΣCᵀ  ⇔  S Lᵀ = C Σ Aᵀ (S symmetric)
    let lt = s
        .lu()
        .solve(&(c * sigma * a.transpose()))
        .ok_or(Error::SingularInnovation)?;
    Ok(lt.transpose())
}

/// Residual of the control Riccati equation, relative to `1 + ‖P‖_F`.
pub fn dare_control_residual(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    p: &Matrix,
) -> Result<f64> {
    let k = control_gain(a, b, r, p)?;
    let at_p = a.transpose() * p;
    let rhs = q + &at_p * a - &at_p * b * k;
    Ok((p - rhs).norm() / (1.0 + p.norm()))
}

/// Residual of the filter Riccati equation, relative to `1 + ‖Σ‖_F`.
pub fn dare_filter_residual(a: &Matrix, c: &Matrix, w: &Matrix, sigma: &Matrix) -> Result<f64> {
    let l = filter_gain(a, c, sigma)?;
    let a_s = a * sigma;
    let rhs = w + &a_s * a.transpose() - l * c * a_s.transpose();
    Ok((sigma - rhs).norm() / (1.0 + sigma.norm()))
}

// Successive iterates cannot agree more closely than the rounding error of the
// gain solve, which grows with the condition number of the matrix inverted.
fn rounding_floor(tol: f64, inverted: &Matrix) -> f64 {
    tol.max(16.0 * f64::EPSILON / inverse_condition(inverted))
}

/// Stabilizing solution of `P = Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA`, by
/// fixed-point iteration from `P₀ = Q`.
///
/// `R` only needs `R + BᵀPB` to stay invertible along the iteration, which
/// lets the filter equation be posed through duality with `R = 0`.
pub fn solve_dare_control(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    cfg: &SolverConfig,
) -> Result<Matrix> {
    cfg.validate()?;
    let n = require_square(a)?;
    let m = b.ncols();
    require_shape(b, n, m, "B")?;
    require_shape(q, n, n, "Q")?;
    require_shape(r, m, m, "R")?;
    if !controllable(a, b) {
        return Err(Error::AssumptionViolated(
            "(A, B) is not controllable".into(),
        ));
    }
    // ker Q = ker Q^{1/2}, so the observability test can run on Q directly.
    if !observable(q, a) {
        return Err(Error::AssumptionViolated(
            "(Q^1/2, A) is not observable".into(),
        ));
    }

    let at = a.transpose();
    let mut p = symmetrize(q);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let k = control_gain(a, b, r, &p)?;
        let at_p = &at * &p;
        let next = symmetrize(&(q + &at_p * a - &at_p * b * k));
        residual = (&next - &p).norm() / (1.0 + next.norm());
        let floor = rounding_floor(cfg.tol, &(r + b.transpose() * &p * b));
        p = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= floor {
            let k = control_gain(a, b, r, &p)?;
            let rho = spectral_radius(&(a - b * k))?;
            if rho >= 1.0 {
                return Err(Error::SolverDiverged {
                    iterations: cfg.max_iter,
                    residual,
                });
            }
            return Ok(p);
        }
    }
    Err(Error::SolverDiverged {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Stabilizing solution of `Σ = W + AΣAᵀ − AΣCᵀ(CΣCᵀ)⁻¹CΣAᵀ`, by fixed-point
/// iteration from `Σ₀ = W`.
pub fn solve_dare_filter(a: &Matrix, c: &Matrix, w: &Matrix, cfg: &SolverConfig) -> Result<Matrix> {
    cfg.validate()?;
    let n = require_square(a)?;
    let d = c.nrows();
    require_shape(c, d, n, "C")?;
    require_shape(w, n, n, "filter weight")?;
    if !observable(c, a) {
        return Err(Error::AssumptionViolated("(C, A) is not observable".into()));
    }

    let at = a.transpose();
    let mut sigma = symmetrize(w);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let l = filter_gain(a, c, &sigma)?;
        let a_s = a * &sigma;
        let next = symmetrize(&(w + &a_s * &at - l * c * a_s.transpose()));
        residual = (&next - &sigma).norm() / (1.0 + next.norm());
        let floor = rounding_floor(cfg.tol, &(c * &sigma * c.transpose()));
        sigma = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= floor {
            let l = filter_gain(a, c, &sigma)?;
            let rho = spectral_radius(&(a - l * c))?;
            if rho >= 1.0 {
                return Err(Error::SolverDiverged {
                    iterations: cfg.max_iter,
                    residual,
                });
            }
            return Ok(sigma);
        }
    }
    Err(Error::SolverDiverged {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Numerical rank with the relative threshold [`RANK_TOL`].
pub fn rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// `[C; CA; …; CAⁿ⁻¹]`.
pub fn observability_matrix(c: &Matrix, a: &Matrix) -> Matrix {
    controllability_matrix(&a.transpose(), &c.transpose()).transpose()
}

pub fn controllable(a: &Matrix, b: &Matrix) -> bool {
    a.nrows() == b.nrows() && rank(&controllability_matrix(a, b)) == a.nrows()
}

pub fn observable(c: &Matrix, a: &Matrix) -> bool {
    c.ncols() == a.nrows() && rank(&observability_matrix(c, a)) == a.nrows()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankReport {
    pub controllable: bool,
    pub observable_ca: bool,
    pub observable_qa: bool,
}

impl RankReport {
    pub fn all(&self) -> bool {
        self.controllable && self.observable_ca && self.observable_qa
    }
}

/// Kalman rank verdicts for `(A, B)`, `(C, A)` and `(Q^{1/2}, A)`.
pub fn rank_tests(a: &Matrix, b: &Matrix, c: &Matrix, q: &Matrix) -> RankReport {
    RankReport {
        controllable: controllable(a, b),
        observable_ca: observable(c, a),
        observable_qa: observable(q, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_relative_eq!(
            spectral_radius(&Matrix::identity(2, 2)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_eq!(spectral_radius(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        // rank one: eigenvalues {0, trace}
        let a = m(2, 2, &[1.1, -0.944, 1.1, -0.944]);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.156, epsilon = 1e-12);
        // complex pair on a circle of radius 0.5
        let rot = m(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert_relative_eq!(spectral_radius(&rot).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn spectral_radius_rejects_rectangular() {
        assert_eq!(
            spectral_radius(&Matrix::zeros(2, 3)),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn dlyap_scalar_geometric_series() {
        let p = solve_dlyap_dual(&m(1, 1, &[0.5]), &m(1, 1, &[1.0]), &cfg()).unwrap();
        assert_relative_eq!(p[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
        let s = solve_dlyap_primal(&m(1, 1, &[0.5]), &m(1, 1, &[1.0]), &cfg()).unwrap();
        assert_relative_eq!(s[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn dlyap_zero_dynamics_returns_weight() {
        let q = m(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = solve_dlyap_dual(&Matrix::zeros(2, 2), &q, &cfg()).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-15);
        let s = solve_dlyap_primal(&Matrix::zeros(2, 2), &q, &cfg()).unwrap();
        assert_relative_eq!(s, q, epsilon = 1e-15);
    }

    #[test]
    fn dlyap_rank_one_example() {
        let a = m(2, 2, &[1.1, -0.944, 1.1, -0.944]);
        let w = m(2, 2, &[5.0, 0.0, 0.0, 0.944 * 0.944]);
        let p = solve_dlyap_dual(&a, &w, &cfg()).unwrap();
        let expected = m(2, 2, &[12.3061, -6.2700, -6.2700, 6.2719]);
        assert_relative_eq!(p, expected, epsilon = 1e-4);
    }

    #[test]
    fn dlyap_primal_is_dual_of_transpose() {
        let a = m(3, 3, &[0.2, 0.5, -0.1, 0.0, 0.4, 0.3, -0.2, 0.1, 0.6]);
        let w = m(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5]);
        let s = solve_dlyap_primal(&a, &w, &cfg()).unwrap();
        let p = solve_dlyap_dual(&a.transpose(), &w, &cfg()).unwrap();
        assert_relative_eq!(s, p, epsilon = 1e-14);
        assert!((&s - &w - &a * &s * a.transpose()).norm() < 1e-12);
    }

    #[test]
    fn dlyap_rejects_unstable() {
        let err = solve_dlyap_dual(&m(1, 1, &[1.0]), &m(1, 1, &[1.0]), &cfg()).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
        // inside the margin
        let tight = SolverConfig {
            stability_margin: 0.1,
            ..cfg()
        };
        let err = solve_dlyap_dual(&m(1, 1, &[0.95]), &m(1, 1, &[1.0]), &tight).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn doubling_agrees_with_kronecker() {
        let a = m(3, 3, &[0.9, 0.2, 0.0, -0.3, 0.5, 0.4, 0.1, 0.0, -0.7]);
        let w = Matrix::identity(3, 3);
        let k = solve_dlyap_kronecker(&a, &w, &cfg()).unwrap();
        let d = solve_dlyap_doubling(&a, &w, &cfg()).unwrap();
        assert!((&k - &d).norm() < 1e-10);
    }

    #[test]
    fn large_dimension_uses_doubling_path() {
        let n = KRONECKER_MAX_DIM + 2;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 0.5;
            if i + 1 < n {
                a[(i, i + 1)] = 0.3;
            }
        }
        let w = Matrix::identity(n, n);
        let p = solve_dlyap_dual(&a, &w, &cfg()).unwrap();
        assert!(dlyap_dual_residual(&a, &w, &p) < 1e-12);
        assert!(is_pd(&p));
    }

    #[test]
    fn dare_control_scalar_roots() {
        let one = m(1, 1, &[1.0]);
        let q = m(1, 1, &[5.0]);
        for (a, expected) in [(1.1, 6.038078), (0.9, 5.688904)] {
            let p = solve_dare_control(&m(1, 1, &[a]), &one, &q, &one, &cfg()).unwrap();
            // q = 5, r = 1: positive root of p² − (4 + a²)p − 5 = 0
            let lin = 4.0 + a * a;
            let root = (lin + (lin * lin + 20.0).sqrt()) / 2.0;
            assert_relative_eq!(p[(0, 0)], root, epsilon = 1e-10);
            assert_relative_eq!(p[(0, 0)], expected, epsilon = 1e-5);
        }
    }

    #[test]
    fn dare_control_zero_dynamics() {
        let q = m(1, 1, &[3.0]);
        let p = solve_dare_control(
            &m(1, 1, &[0.0]),
            &m(1, 1, &[2.0]),
            &q,
            &m(1, 1, &[0.7]),
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-15);
    }

    #[test]
    fn dare_control_rejects_uncontrollable() {
        let a = Matrix::identity(2, 2);
        let b = m(2, 1, &[1.0, 0.0]);
        let err = solve_dare_control(&a, &b, &Matrix::identity(2, 2), &m(1, 1, &[1.0]), &cfg())
            .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
    }

    #[test]
    fn dare_filter_scalar_cancellation() {
        let one = m(1, 1, &[1.0]);
        for a in [1.1, 0.9] {
            let s = solve_dare_filter(&m(1, 1, &[a]), &one, &m(1, 1, &[0.9375]), &cfg()).unwrap();
            assert_relative_eq!(s[(0, 0)], 0.9375, epsilon = 1e-15);
        }
    }

    #[test]
    fn dare_filter_duality_with_control_form() {
        let a = m(2, 2, &[1.0, 0.3, -0.2, 0.8]);
        let c = m(1, 2, &[1.0, 0.5]);
        let w = m(2, 2, &[1.0, 0.1, 0.1, 0.6]);
        let filt = solve_dare_filter(&a, &c, &w, &cfg()).unwrap();
        let ctrl = solve_dare_control(
            &a.transpose(),
            &c.transpose(),
            &w,
            &Matrix::zeros(1, 1),
            &cfg(),
        )
        .unwrap();
        assert!((&filt - &ctrl).norm() < 1e-9);
        let l = filter_gain(&a, &c, &filt).unwrap();
        assert!(spectral_radius(&(&a - l * &c)).unwrap() < 1.0);
        assert!(dare_filter_residual(&a, &c, &w, &filt).unwrap() < 1e-11);
    }

    #[test]
    fn dare_control_gain_stabilizes() {
        let a = m(2, 2, &[1.2, 0.5, 0.0, 0.9]);
        let b = m(2, 1, &[0.0, 1.0]);
        let q = Matrix::identity(2, 2);
        let r = m(1, 1, &[0.5]);
        let p = solve_dare_control(&a, &b, &q, &r, &cfg()).unwrap();
        assert!(is_pd(&p));
        let k = control_gain(&a, &b, &r, &p).unwrap();
        assert!(spectral_radius(&(&a - &b * k)).unwrap() < 1.0);
        assert!(dare_control_residual(&a, &b, &q, &r, &p).unwrap() < 1e-11);
    }

    #[test]
    fn rank_test_examples() {
        let one = m(1, 1, &[1.0]);
        let rep = rank_tests(&m(1, 1, &[1.1]), &one, &one, &m(1, 1, &[5.0]));
        assert!(rep.all());

        let rep = rank_tests(
            &Matrix::identity(2, 2),
            &m(2, 1, &[1.0, 0.0]),
            &m(1, 2, &[1.0, 0.0]),
            &Matrix::identity(2, 2),
        );
        assert!(!rep.controllable);
        assert!(!rep.observable_ca);
        assert!(rep.observable_qa);

        let rep = rank_tests(
            &m(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            &m(2, 1, &[0.0, 1.0]),
            &m(1, 2, &[1.0, 0.0]),
            &Matrix::identity(2, 2),
        );
        assert!(rep.all());
    }

    #[test]
    fn rank_of_zero_matrix() {
        assert_eq!(rank(&Matrix::zeros(3, 2)), 0);
        assert_eq!(rank(&m(2, 2, &[1.0, 2.0, 2.0, 4.0])), 1);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { tol: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iter: 0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            stability_margin: 1.0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }
}
