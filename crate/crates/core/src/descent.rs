//! Gradient descent over `(A_K, B_K, C_K)` restricted to the stabilizing set.
//!
//! Each iteration proposes a step along the negative gradient, rejects
//! trial points outside 𝕂 before touching the cost, and backtracks until
//! the Armijo condition holds. The trial step is `step0` on the first
//! iteration and a Barzilai–Borwein estimate afterwards (when enabled); the
//! Armijo test always decides acceptance. The decrease `J(𝖪) − J(𝖪⁺)` is
//! obtained from a Lyapunov equation for the difference, which stays
//! accurate when the two costs agree to many digits.

use rand::Rng;

use crate::cost::{self, CostReport};
use crate::error::{Error, Result};
use crate::gradient::{self, GradientTriple};
use crate::matops::{self, SolverConfig};
use crate::model::{self, Controller, Plant, SecondMoment};
use crate::sampling;
use crate::similarity;

/// Relative noise applied to the Riccati gains by [`random_stabilizing_init`].
pub const DEFAULT_INIT_NOISE: f64 = 0.5;

const BB_MIN_STEP: f64 = 1e-10;
const BB_MAX_STEP: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub step0: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Backtracking halvings tried before the run is declared stuck.
    pub max_backtracks: usize,
    pub barzilai_borwein: bool,
    pub solver: SolverConfig,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            step0: 1e-2,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            max_iter: 100_000,
            grad_tol: 1e-8,
            max_backtracks: 60,
            barzilai_borwein: true,
            solver: SolverConfig::default(),
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be a positive finite number");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be > 0");
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be >= 1");
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentStatus {
    Converged,
    MaxIter,
    /// Every trial point of the last line search left the stabilizing set.
    StabilityBoundary,
    /// The line search found stabilizing points but none passed Armijo.
    Stalled,
}

impl DescentStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DescentStatus::Converged => "converged",
            DescentStatus::MaxIter => "max_iter",
            DescentStatus::StabilityBoundary => "stability_boundary",
            DescentStatus::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub controller: Controller,
    pub j: f64,
    pub grad_norm: f64,
    /// Step that produced this iterate (0 for the initial point).
    pub step: f64,
    /// Certified `J(previous) − J(this)` (0 for the initial point).
    pub decrease: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub iterates: Vec<Iterate>,
    pub status: DescentStatus,
}

impl DescentTrace {
    pub fn last(&self) -> &Iterate {
        self.iterates
            .last()
            .expect("trace always holds the initial point")
    }

    pub fn final_controller(&self) -> &Controller {
        &self.last().controller
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }
}

struct Point {
    controller: Controller,
    report: CostReport,
    grad: GradientTriple,
}

impl Point {
    fn new(
        plant: &Plant,
        controller: Controller,
        x: &SecondMoment,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let report = cost::evaluate_with(plant, &controller, x, cfg)?;
        let grad = gradient::gradient_from_report(plant, &controller, &report);
        Ok(Self {
            controller,
            report,
            grad,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn descend(
    plant: &Plant,
    x: &SecondMoment,
    init: &Controller,
    cfg: &DescentConfig,
) -> Result<DescentTrace> {
    cfg.validate()?;
    init.check_against(plant)?;
    x.check_against(plant)?;
    let solver = &cfg.solver;
    let mut cur = Point::new(plant, init.clone(), x, solver)?;
    let mut iterates = vec![Iterate {
        controller: cur.controller.clone(),
        j: cur.report.j,
        grad_norm: cur.grad.norm,
        step: 0.0,
        decrease: 0.0,
        rho: cur.report.rho,
    }];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    let status = loop {
        if cur.grad.norm <= cfg.grad_tol {
            break DescentStatus::Converged;
        }
        if iterates.len() > cfg.max_iter {
            break DescentStatus::MaxIter;
        }
        let theta = cur.controller.params();
        let g = cur.grad.params();
        let g2 = cur.grad.norm * cur.grad.norm;
        let mut step = match (&prev, cfg.barzilai_borwein) {
            (Some((theta_prev, g_prev)), true) => {
                let s: Vec<f64> = theta.iter().zip(theta_prev).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 0.0 {
                    (dot(&s, &s) / sy).clamp(BB_MIN_STEP, BB_MAX_STEP)
                } else {
                    cfg.step0
                }
            }
            _ => cfg.step0,
        };

        let mut accepted = None;
        let mut last_feasible = false;
        for _ in 0..cfg.max_backtracks {
            let trial = cur.controller.add(&cur.grad.as_controller().scaled(-step));
            let rho = model::closed_loop_radius(plant, &trial)?;
            if !solver.is_stable_radius(rho) {
                last_feasible = false;
                step *= cfg.backtrack_factor;
                continue;
            }
            last_feasible = true;
            let decrease =
                match cost::cost_difference(plant, &cur.controller, &cur.report, &trial, solver) {
                    Ok(delta) => -delta,
                    Err(_) => {
                        last_feasible = false;
                        step *= cfg.backtrack_factor;
                        continue;
                    }
                };
            if decrease >= cfg.armijo_c * step * g2 {
                // next to the boundary the full evaluation can still fail
                match Point::new(plant, trial, x, solver) {
                    Ok(next) => {
                        accepted = Some((next, decrease));
                        break;
                    }
                    Err(_) => last_feasible = false,
                }
            }
            step *= cfg.backtrack_factor;
        }

        let Some((next, decrease)) = accepted else {
            break if last_feasible {
                DescentStatus::Stalled
            } else {
                DescentStatus::StabilityBoundary
            };
        };
        prev = Some((theta, g));
        iterates.push(Iterate {
            controller: next.controller.clone(),
            j: next.report.j,
            grad_norm: next.grad.norm,
            step,
            decrease,
            rho: next.report.rho,
        });
        cur = next;
    };

    Ok(DescentTrace { iterates, status })
}

/// Random stabilizing observable controller with the default noise level.
pub fn random_stabilizing_init(plant: &Plant, seed: u64) -> Result<Controller> {
    random_stabilizing_init_with(plant, seed, DEFAULT_INIT_NOISE)
}

/// Observer-based controller from Riccati gains perturbed entrywise by
/// `noise·(1 + |g|)·N(0, 1)`, resampled until the result is stabilizing and
/// observable. The noise level halves after every 100 rejected draws.
///
/// The base state-feedback gain solves the control Riccati equation; the
/// base observer gain solves the filter equation with unit weight.
pub fn random_stabilizing_init_with(plant: &Plant, seed: u64, noise: f64) -> Result<Controller> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise must be finite and >= 0, got {noise}"
        )));
    }
    let cfg = SolverConfig::default();
    let (a, b, c) = (plant.a(), plant.b(), plant.c());
    let n = plant.n();
    let p = matops::solve_dare_control(a, b, plant.q(), plant.r(), &cfg)?;
    let k0 = matops::control_gain(a, b, plant.r(), &p)?;
    let s = matops::solve_dare_filter(a, c, &matops::Matrix::identity(n, n), &cfg)?;
    let l0 = matops::filter_gain(a, c, &s)?;

    let mut rng = sampling::rng(seed);
    let perturb = |g: &matops::Matrix, scale: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        g.map(|v| v + scale * (1.0 + v.abs()) * rng.sample::<f64, _>(rand_distr::StandardNormal))
    };
    let mut scale = noise;
    for attempt in 1..=sampling::MAX_ATTEMPTS {
        // hard plants rarely survive the full noise level
        if attempt % 100 == 0 {
            scale *= 0.5;
        }
        let k = perturb(&k0, scale, &mut rng);
        let l = perturb(&l0, scale, &mut rng);
        let ctrl = model::observer_based(plant, &k, &l)?;
        if model::is_stabilizing(plant, &ctrl) && model::is_observable_controller(&ctrl) {
            return Ok(ctrl);
        }
    }
    Err(Error::InitFailed {
        attempts: sampling::MAX_ATTEMPTS,
    })
}

/// Representative of the similarity orbit of `controller` with the lowest
/// cost, used to compare controllers up to a change of controller state.
pub fn canonicalize(
    plant: &Plant,
    x: &SecondMoment,
    controller: &Controller,
) -> Result<Controller> {
    let t = similarity::optimal_transform(plant, controller, x)?;
    similarity::apply(controller, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary;

    fn example(a: f64) -> (Plant, SecondMoment) {
        (
            Plant::scalar(a, 5.0, 1.0).unwrap(),
            SecondMoment::scalar(1.0, 0.25, 1.0).unwrap(),
        )
    }

    #[test]
    fn config_validation() {
        assert!(DescentConfig::default().validate().is_ok());
        let bad = DescentConfig {
            backtrack_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DescentConfig {
            step0: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn infinite_tolerance_returns_init() {
        let (plant, x) = example(1.1);
        let init = Controller::scalar(-0.944, 1.1, -0.944);
        let cfg = DescentConfig {
            grad_tol: f64::INFINITY,
            ..Default::default()
        };
        let trace = descend(&plant, &x, &init, &cfg).unwrap();
        assert_eq!(trace.status, DescentStatus::Converged);
        assert_eq!(trace.steps(), 0);
        assert_eq!(trace.final_controller(), &init);
    }

    #[test]
    fn starting_at_the_stationary_point_stops_immediately() {
        let (plant, x) = example(1.1);
        let cert = stationary::stationary_candidate(&plant, &x).unwrap();
        let trace = descend(&plant, &x, &cert.k_star, &DescentConfig::default()).unwrap();
        assert_eq!(trace.status, DescentStatus::Converged);
        assert_eq!(trace.steps(), 0);
    }

    #[test]
    fn unstable_init_is_an_error() {
        let (plant, x) = example(1.1);
        assert!(matches!(
            descend(
                &plant,
                &x,
                &Controller::zeros(1, 1, 1),
                &DescentConfig::default()
            ),
            Err(Error::NotStabilizing { .. })
        ));
    }

    #[test]
    fn observer_init_reaches_the_stationary_point() {
        let (plant, x) = example(1.1);
        let init = random_stabilizing_init_with(&plant, 0, 0.0).unwrap();
        let trace = descend(&plant, &x, &init, &DescentConfig::default()).unwrap();
        assert_eq!(trace.status, DescentStatus::Converged);
        let cert = stationary::stationary_candidate(&plant, &x).unwrap();
        assert!(trace.final_controller().distance(&cert.k_star) <= 1e-4);
    }

    #[test]
    fn accepted_steps_satisfy_armijo() {
        let (plant, x) = example(0.9);
        let init = random_stabilizing_init(&plant, 4).unwrap();
        let cfg = DescentConfig {
            max_iter: 200,
            ..Default::default()
        };
        let trace = descend(&plant, &x, &init, &cfg).unwrap();
        for w in trace.iterates.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(b.decrease >= cfg.armijo_c * b.step * a.grad_norm * a.grad_norm);
            assert!(b.j <= a.j + 1e-12 * (1.0 + a.j));
            assert!(cfg.solver.is_stable_radius(b.rho));
        }
    }

    #[test]
    fn zero_noise_init_is_the_observer_controller() {
        let (plant, _) = example(1.1);
        let a = random_stabilizing_init_with(&plant, 0, 0.0).unwrap();
        let b = random_stabilizing_init_with(&plant, 99, 0.0).unwrap();
        assert_eq!(a, b);
        assert!(model::is_stabilizing(&plant, &a));
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let (plant, _) = example(1.1);
        for seed in 0..100 {
            let k = random_stabilizing_init(&plant, seed).unwrap();
            assert_eq!(k, random_stabilizing_init(&plant, seed).unwrap());
            assert!(model::is_stabilizing(&plant, &k));
            assert!(model::is_observable_controller(&k));
        }
    }

    #[test]
    fn canonical_form_is_orbit_invariant() {
        let (plant, x) = example(1.1);
        let k = Controller::scalar(-0.6, 2.0, -0.4);
        let moved = similarity::apply(&k, &similarity::Transform::scalar(-3.0).unwrap()).unwrap();
        let a = canonicalize(&plant, &x, &k).unwrap();
        let b = canonicalize(&plant, &x, &moved).unwrap();
        assert!(a.distance(&b) < 1e-10);
    }
}
