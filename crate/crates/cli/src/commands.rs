use std::fs;
use std::io::Write;
use std::path::Path;

use dlqr_core::cost;
use dlqr_core::descent::{self, DescentConfig, DescentStatus, DescentTrace};
use dlqr_core::gradient::{self, GradientTriple};
use dlqr_core::problem::ControllerJson;
use dlqr_core::sampling;
use dlqr_core::stationary;
use dlqr_core::{Controller, Plant, Problem, SecondMoment};
use serde_json::{json, Value};

use crate::args::{
    CommonArgs, DescendArgs, EvalArgs, GradcheckArgs, LandscapeArgs, StationaryArgs,
};
use crate::format::{matrix, matrix_json, sig17};
use crate::sweep::{self, SweepSpec};
use crate::{CliError, CliResult};

/// Analytic gradient used by `gradcheck`; swapped out in tests.
pub type GradientFn =
    dyn Fn(&Plant, &Controller, &SecondMoment) -> dlqr_core::Result<GradientTriple> + Sync;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_problem(common: &CommonArgs) -> CliResult<Problem> {
    Ok(Problem::parse(&read(&common.problem)?)?)
}

/// Controller from inline JSON, a JSON file, or the problem's seed controller.
pub fn load_controller(source: Option<&str>, problem: &Problem) -> CliResult<Controller> {
    let k = match source {
        Some(s) if s.trim_start().starts_with('{') => ControllerJson::parse(s)?.to_controller()?,
        Some(path) => ControllerJson::parse(&read(Path::new(path))?)?.to_controller()?,
        None => problem.seed_controller.clone().ok_or_else(|| {
            CliError::Input("no --controller given and the problem has no seed_controller".into())
        })?,
    };
    k.check_against(&problem.plant)?;
    Ok(k)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit_json(out: &mut dyn Write, v: &Value) -> CliResult {
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).expect("reports serialize")
    )
    .map_err(CliError::stdout)
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(CliError::stdout)?
    };
}

fn controller_text(k: &Controller) -> String {
    format!(
        "A_K = {}  B_K = {}  C_K = {}",
        matrix(&k.a_k),
        matrix(&k.b_k),
        matrix(&k.c_k)
    )
}

fn controller_json(k: &Controller) -> Value {
    serde_json::to_value(ControllerJson::from_controller(k)).expect("controllers serialize")
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let problem = load_problem(&args.common)?;
    let k = load_controller(args.controller.as_deref(), &problem)?;
    let report = cost::evaluate(&problem.plant, &k, &problem.x)?;
    let residuals = cost::block_lyapunov_residuals(&problem.plant, &k, &report)?;
    let tol = cost::block_residual_tolerance(&report);
    let ok = residuals.max() <= tol;

    if args.common.json {
        let res: serde_json::Map<String, Value> = residuals
            .named()
            .iter()
            .map(|(n, v)| (n.to_string(), json!(v)))
            .collect();
        emit_json(
            out,
            &json!({
                "J": report.j,
                "J_dual": report.j_dual,
                "rho": report.rho,
                "min_eig_P": report.min_eig_p(),
                "min_eig_Sigma": report.min_eig_sigma(),
                "P": matrix_json(&report.p),
                "Sigma": matrix_json(&report.sigma),
                "block_residuals": res,
                "block_residual_tol": tol,
                "controller": controller_json(&k),
            }),
        )?;
    } else {
        say!(out, "J                 {}", sig17(report.j));
        say!(out, "J (dual form)     {}", sig17(report.j_dual));
        say!(out, "rho(A_cl)         {}", sig17(report.rho));
        say!(out, "lambda_min(P)     {}", sig17(report.min_eig_p()));
        say!(out, "lambda_min(Sigma) {}", sig17(report.min_eig_sigma()));
        say!(out, "P     = {}", matrix(&report.p));
        say!(out, "Sigma = {}", matrix(&report.sigma));
        say!(out, "block residuals (tol {tol:.3e}):");
        for (name, v) in residuals.named() {
            say!(out, "  {name:<8} {v:.3e}");
        }
    }
    if let Some(path) = &args.common.out {
        let text = serde_json::to_string_pretty(&json!({"J": report.j, "rho": report.rho}))
            .expect("serializes");
        write_file(path, text.as_bytes())?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "block Lyapunov residual {:.3e} exceeds {tol:.3e}",
            residuals.max()
        )))
    }
}

pub fn stationary(args: &StationaryArgs, out: &mut dyn Write) -> CliResult {
    let problem = load_problem(&args.common)?;
    let cert = stationary::stationary_candidate(&problem.plant, &problem.x)?;
    let ok = cert.residuals.all_within(args.tol);

    let body = json!({
        "K_star": controller_json(&cert.k_star),
        "K_dagger": controller_json(&cert.k_dagger),
        "T_star": matrix_json(cert.t_star.t()),
        "K_gain": matrix_json(&cert.k_gain),
        "L_gain": matrix_json(&cert.l_gain),
        "P_hat": matrix_json(&cert.p_hat),
        "Sigma_hat": matrix_json(&cert.sigma_hat),
        "J": cert.j,
        "rho_control": cert.rho_control,
        "rho_filter": cert.rho_filter,
        "residuals": cert.residuals.named().iter().map(|(n, v)| (n.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "tol": args.tol,
        "verified": ok,
    });
    if args.common.json {
        emit_json(out, &body)?;
    } else {
        say!(out, "K_star    {}", controller_text(&cert.k_star));
        say!(out, "K_dagger  {}", controller_text(&cert.k_dagger));
        say!(out, "K_gain    {}", matrix(&cert.k_gain));
        say!(out, "L_gain    {}", matrix(&cert.l_gain));
        say!(out, "T_star    {}", matrix(cert.t_star.t()));
        say!(out, "P_hat     {}", matrix(&cert.p_hat));
        say!(out, "Sigma_hat {}", matrix(&cert.sigma_hat));
        say!(out, "J(K_star) {}", sig17(cert.j));
        say!(
            out,
            "rho(A - B K) {:.6}  rho(A - L C) {:.6}",
            cert.rho_control,
            cert.rho_filter
        );
        say!(out, "residuals (tol {:.1e}):", args.tol);
        for (name, v) in cert.residuals.named() {
            let mark = if v <= args.tol { "ok" } else { "FAIL" };
            say!(out, "  {name:<16} {v:.3e}  {mark}");
        }
    }
    if let Some(path) = &args.common.out {
        write_file(
            path,
            serde_json::to_string_pretty(&body)
                .expect("serializes")
                .as_bytes(),
        )?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "largest residual {:.3e} exceeds {:.1e}",
            cert.residuals.max(),
            args.tol
        )))
    }
}

pub fn landscape_spec(args: &LandscapeArgs, problem: &Problem) -> CliResult<SweepSpec> {
    let base = match (&args.controller, &problem.seed_controller) {
        (None, None) if args.orbit.is_none() => {
            let p = &problem.plant;
            Controller::zeros(p.n(), p.m(), p.d())
        }
        _ => load_controller(args.controller.as_deref(), problem)?,
    };
    let spec = match &args.orbit {
        Some(range) => SweepSpec::orbit(base, range.parse()?)?,
        None => {
            let axes = args
                .axes
                .iter()
                .map(|a| a.parse())
                .collect::<dlqr_core::Result<Vec<_>>>()?;
            SweepSpec::grid(base, axes)?
        }
    };
    Ok(spec)
}

pub fn landscape(args: &LandscapeArgs, out: &mut dyn Write) -> CliResult {
    let problem = load_problem(&args.common)?;
    let spec = landscape_spec(args, &problem)?;
    let cells = sweep::evaluate(&problem, &spec)?;
    let mut csv = Vec::new();
    sweep::write_csv(&cells, &mut csv).map_err(CliError::stdout)?;

    let Some(path) = &args.common.out else {
        return out.write_all(&csv).map_err(CliError::stdout);
    };
    write_file(path, &csv)?;
    let stabilizing = cells.iter().filter(|c| c.stabilizing()).count();
    let best = sweep::minimum(&cells);
    if args.common.json {
        emit_json(
            out,
            &json!({
                "cells": cells.len(),
                "stabilizing": stabilizing,
                "min": best.map(|c| json!({"axis1": c.axis1, "axis2": c.axis2, "J": c.j})),
                "out": path.display().to_string(),
            }),
        )?;
    } else {
        say!(
            out,
            "{} cells ({stabilizing} stabilizing) written to {}",
            cells.len(),
            path.display()
        );
        if let Some(c) = best {
            match c.axis2 {
                Some(a2) => say!(
                    out,
                    "minimum J = {} at ({}, {})",
                    sig17(c.j.unwrap_or(f64::NAN)),
                    sig17(c.axis1),
                    sig17(a2)
                ),
                None => say!(
                    out,
                    "minimum J = {} at {}",
                    sig17(c.j.unwrap_or(f64::NAN)),
                    sig17(c.axis1)
                ),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub errors: Vec<f64>,
    pub max_error: f64,
}

/// Compares `grad` against central differences on `trials` random
/// stabilizing controllers (plus `extra`).
pub fn run_gradcheck(
    problem: &Problem,
    trials: usize,
    seed: u64,
    step: f64,
    extra: Option<&Controller>,
    grad: &GradientFn,
) -> CliResult<GradcheckReport> {
    let mut rng = sampling::rng(seed);
    let mut controllers: Vec<Controller> = extra.into_iter().cloned().collect();
    for _ in 0..trials {
        controllers.push(sampling::random_stabilizing_controller(
            &mut rng,
            &problem.plant,
        )?);
    }
    let mut errors = Vec::with_capacity(controllers.len());
    for k in &controllers {
        let analytic = grad(&problem.plant, k, &problem.x)?;
        let fd = gradient::finite_difference_gradient(&problem.plant, k, &problem.x, step)?;
        errors.push(analytic.relative_error(&fd));
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(GradcheckReport { errors, max_error })
}

pub fn gradcheck(args: &GradcheckArgs, grad: &GradientFn, out: &mut dyn Write) -> CliResult {
    let problem = load_problem(&args.common)?;
    let extra = match &args.controller {
        Some(src) => Some(load_controller(Some(src), &problem)?),
        None => None,
    };
    if args.trials == 0 && extra.is_none() {
        return Err(CliError::Input(
            "nothing to check: --trials is 0 and no --controller given".into(),
        ));
    }
    let report = run_gradcheck(
        &problem,
        args.trials,
        args.seed,
        args.step,
        extra.as_ref(),
        grad,
    )?;
    let ok = report.max_error <= args.tol;
    let body = json!({
        "trials": report.errors.len(),
        "max_relative_error": report.max_error,
        "tol": args.tol,
        "relative_errors": report.errors,
        "passed": ok,
    });
    if args.common.json {
        emit_json(out, &body)?;
    } else {
        say!(out, "controllers checked       {}", report.errors.len());
        say!(
            out,
            "max relative discrepancy  {:.3e} (tol {:.1e})",
            report.max_error,
            args.tol
        );
        say!(out, "{}", if ok { "PASS" } else { "FAIL" });
    }
    if let Some(path) = &args.common.out {
        write_file(
            path,
            serde_json::to_string_pretty(&body)
                .expect("serializes")
                .as_bytes(),
        )?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "analytic and finite-difference gradients differ by {:.3e} > {:.1e}",
            report.max_error, args.tol
        )))
    }
}

pub fn descent_config(args: &DescendArgs) -> DescentConfig {
    DescentConfig {
        step0: args.step0,
        backtrack_factor: args.backtrack,
        armijo_c: args.armijo,
        max_iter: args.max_iter,
        grad_tol: args.tol,
        barzilai_borwein: !args.no_bb,
        ..DescentConfig::default()
    }
}

/// `iter,J,grad_norm,step` rows.
pub fn trace_csv(trace: &DescentTrace) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "J", "grad_norm", "step"])
        .expect("in-memory write");
    for (i, it) in trace.iterates.iter().enumerate() {
        w.write_record([
            i.to_string(),
            sig17(it.j),
            sig17(it.grad_norm),
            sig17(it.step),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn descend(args: &DescendArgs, out: &mut dyn Write) -> CliResult {
    let problem = load_problem(&args.common)?;
    let (plant, x) = (&problem.plant, &problem.x);
    let init = match &args.controller {
        Some(src) => load_controller(Some(src), &problem)?,
        None => descent::random_stabilizing_init_with(plant, args.seed, args.init_noise)?,
    };
    let cfg = descent_config(args);
    let trace = descent::descend(plant, x, &init, &cfg)?;
    if let Some(path) = &args.common.out {
        write_file(path, &trace_csv(&trace))?;
    }

    let last = trace.last();
    let candidate = stationary::stationary_candidate(plant, x).ok();
    let distance = candidate
        .as_ref()
        .map(|c| last.controller.distance(&c.k_star));
    let canonical_distance = candidate.as_ref().and_then(|c| {
        descent::canonicalize(plant, x, &last.controller)
            .ok()
            .map(|k| k.distance(&c.k_star))
    });
    let j_gap = candidate.as_ref().map(|c| last.j - c.j);
    let converged = trace.status == DescentStatus::Converged;

    if args.common.json {
        emit_json(
            out,
            &json!({
                "status": trace.status.as_str(),
                "steps": trace.steps(),
                "J": last.j,
                "grad_norm": last.grad_norm,
                "controller": controller_json(&last.controller),
                "init": controller_json(&init),
                "distance_to_stationary": distance,
                "canonical_distance_to_stationary": canonical_distance,
                "J_minus_stationary": j_gap,
            }),
        )?;
    } else {
        say!(out, "status     {}", trace.status.as_str());
        say!(out, "steps      {}", trace.steps());
        say!(out, "J          {}", sig17(last.j));
        say!(out, "grad_norm  {}", sig17(last.grad_norm));
        say!(out, "final      {}", controller_text(&last.controller));
        match (distance, canonical_distance, j_gap) {
            (Some(d), cd, Some(gap)) => {
                say!(out, "distance to stationary candidate {d:.3e}");
                if let Some(cd) = cd {
                    say!(out, "distance after optimal transform {cd:.3e}");
                }
                say!(out, "J - J(K_star)                    {gap:.3e}");
            }
            _ => say!(out, "no closed-form stationary candidate for this problem"),
        }
    }
    if converged {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "descent stopped with status {}",
            trace.status.as_str()
        )))
    }
}
