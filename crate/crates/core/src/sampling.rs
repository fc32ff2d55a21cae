//! Seeded random problem instances for tests, sweeps and multi-start runs.
//!
//! Every generator draws from a `ChaCha8Rng`, so a seed fixes the output on
//! every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matops::{self, Matrix};
use crate::model::{self, Controller, Plant, SecondMoment};
use crate::similarity::{self, Transform};

/// Attempts made by the rejection samplers before giving up.
pub const MAX_ATTEMPTS: usize = 1000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random plant satisfying the standing assumptions, with `Q = I`, `R = I`
/// and `A` scaled to spectral radius in `[0.5, 1.3]` (open-loop unstable
/// about half the time). Draws whose unit-weight Riccati solutions fail or
/// exceed [`MAX_RICCATI_NORM`] are skipped: they are nearly uncontrollable
/// or undetectable, and no double-precision iteration resolves them.
pub fn random_plant(seed: u64, n: usize, m: usize, d: usize) -> Result<Plant> {
    if n == 0 || m == 0 || d == 0 || d > n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= d <= n and m >= 1, got n={n} m={m} d={d}"
        )));
    }
    let mut rng = rng(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut a = normal_matrix(&mut rng, n, n);
        let rho = matops::spectral_radius(&a)?;
        if rho < 1e-3 {
            continue;
        }
        let target = rng.random_range(0.5..1.3);
        a *= target / rho;
        let b = normal_matrix(&mut rng, n, m);
        let c = normal_matrix(&mut rng, d, n);
        if let Ok(p) = Plant::new(a, b, c, Matrix::identity(n, n), Matrix::identity(m, m)) {
            if well_posed(&p) {
                return Ok(p);
            }
        }
    }
    Err(Error::InitFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// Bound on `‖P‖_F` and `‖Σ‖_F` for the Riccati solutions of a sampled plant.
pub const MAX_RICCATI_NORM: f64 = 1e6;

fn well_posed(p: &Plant) -> bool {
    let cfg = matops::SolverConfig::default();
    let eye = Matrix::identity(p.n(), p.n());
    let control = matops::solve_dare_control(p.a(), p.b(), p.q(), p.r(), &cfg);
    let filter = matops::solve_dare_filter(p.a(), p.c(), &eye, &cfg);
    matches!((control, filter), (Ok(x), Ok(s)) if x.norm() <= MAX_RICCATI_NORM && s.norm() <= MAX_RICCATI_NORM)
}

/// `X = GGᵀ/(2n) + ½I` with Gaussian `G`, so `X ≻ 0` and `X₁₂` is
/// generically invertible.
pub fn random_second_moment(seed: u64, n: usize) -> Result<SecondMoment> {
    let mut rng = rng(seed);
    for _ in 0..MAX_ATTEMPTS {
        let g = normal_matrix(&mut rng, 2 * n, 2 * n);
        let x = &g * g.transpose() / (2 * n) as f64 + Matrix::identity(2 * n, 2 * n) * 0.5;
        let x = SecondMoment::new(matops::symmetrize(&x))?;
        if matops::inverse_condition(&x.x12()) > 1e-3 {
            return Ok(x);
        }
    }
    Err(Error::InitFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// Random well-conditioned `T = I + G/√n` (sign of `det` arbitrary).
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Transform> {
    for _ in 0..MAX_ATTEMPTS {
        let t = Matrix::identity(n, n) + normal_matrix(rng, n, n) / (n as f64).sqrt();
        if matops::inverse_condition(&t) > 1e-2 {
            return Transform::new(t);
        }
    }
    Err(Error::InitFailed {
        attempts: MAX_ATTEMPTS,
    })
}

/// Generic stabilizing, observable controller: a perturbed observer-based
/// controller moved by a random similarity transform, then perturbed in
/// every entry (by `0.05·N(0, 1)`, halved every 20 rejections).
pub fn random_stabilizing_controller<R: Rng + ?Sized>(
    rng: &mut R,
    plant: &Plant,
) -> Result<Controller> {
    let mut base = Controller::zeros(plant.n(), plant.m(), plant.d());
    let mut scale = 0.1;
    for attempt in 0..MAX_ATTEMPTS {
        // a base too close to the boundary, or with a very sensitive loop,
        // never survives the noise: redraw it and shrink the noise
        if attempt % 20 == 0 {
            let seed = rng.random::<u64>();
            base = crate::descent::random_stabilizing_init_with(
                plant,
                seed,
                crate::descent::DEFAULT_INIT_NOISE,
            )?;
            scale *= 0.5;
        }
        let t = random_transform(rng, plant.n())?;
        let moved = similarity::apply(&base, &t)?;
        let noise = Controller {
            a_k: normal_matrix(rng, plant.n(), plant.n()),
            b_k: normal_matrix(rng, plant.n(), plant.d()),
            c_k: normal_matrix(rng, plant.m(), plant.n()),
        };
        let k = moved.add(&noise.scaled(scale));
        if model::is_stabilizing(plant, &k) && model::is_observable_controller(&k) {
            return Ok(k);
        }
    }
    Err(Error::InitFailed {
        attempts: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plants_are_deterministic_in_seed() {
        assert_eq!(
            random_plant(7, 3, 2, 1).unwrap(),
            random_plant(7, 3, 2, 1).unwrap()
        );
        assert_ne!(
            random_plant(7, 3, 2, 1).unwrap(),
            random_plant(8, 3, 2, 1).unwrap()
        );
    }

    #[test]
    fn second_moment_is_positive_definite() {
        for seed in 0..10 {
            let x = random_second_moment(seed, 2).unwrap();
            assert!(x.is_positive_definite());
        }
    }

    #[test]
    fn random_controllers_are_stabilizing_and_observable() {
        let mut r = rng(3);
        for (n, m, d) in [(1, 1, 1), (2, 1, 2), (3, 2, 1)] {
            let plant = random_plant(n as u64, n, m, d).unwrap();
            for _ in 0..5 {
                let k = random_stabilizing_controller(&mut r, &plant).unwrap();
                assert!(model::is_stabilizing(&plant, &k));
                assert!(model::is_observable_controller(&k));
            }
        }
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        assert!(random_plant(0, 2, 1, 3).is_err());
        assert!(random_plant(0, 0, 1, 1).is_err());
    }
}
