//! Pathwise Malliavin derivatives of the intensity and of the running
//! maximum F = M_T.
//!
//! Cox model, derivative in the intensity Brownian direction:
//!
//! ```text
//! D_t lambda_s = sigma2 sqrt(lambda_s) exp{ -int_t^s (kappa/2 + C/lambda_r) dr },
//! C = kappa*theta/2 - sigma2^2/8,
//! D_t F = 1_{t <= tau} int_t^tau mu_bar(s) D_t lambda_s ds   (magnitude).
//! ```
//!
//! The sign of the Cox `D1` term is applied by the Clark-Ocone assembler,
//! not here; both readings of the theorem stay testable that way.
//!
//! Hawkes, price-Brownian direction: `D_t F = sigma1 1_{t <= tau}`.
//!
//! Jump direction `D2` is the plain difference quotient of the max under an
//! inserted event: pure re-evaluation for Cox, a common-random-number
//! cascade replay for Hawkes.

use crate::error::{Error, Result};
use crate::model::{CoxParams, HawkesParams, JumpSpec};
use crate::path::{PerturbedPath, SimPath, insert_event_cascade};

/// Floor below which the `C/lambda` integrand is treated as singular.
pub const EPS_LAMBDA: f64 = 1e-12;

/// `C = kappa*theta/2 - sigma2^2/8`, the coefficient of the `1/lambda` term.
pub fn c_sigma(p: &CoxParams) -> f64 {
    0.5 * p.kappa * p.theta - p.sigma2 * p.sigma2 / 8.0
}

/// One sample of a first-derivative integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1Sample {
    pub t: f64,
    pub value: f64,
}

/// One sample of a jump-direction derivative: perturbed max minus `M_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2Sample {
    pub t: f64,
    pub z: f64,
    pub value: f64,
}

fn lambda_checked(lam: f64, idx: usize, clamp: bool) -> Result<f64> {
    if lam <= EPS_LAMBDA {
        if clamp {
            Ok(EPS_LAMBDA)
        } else {
            Err(Error::IntensityHitZero { idx, floor: EPS_LAMBDA })
        }
    } else {
        Ok(lam)
    }
}

/// `D_{t_s} lambda_{t_t}` for a Cox path, trapezoid rule for the exponent.
pub fn d1_lambda_cir(
    p: &CoxParams,
    path: &SimPath,
    s_idx: usize,
    t_idx: usize,
    clamp: bool,
) -> Result<f64> {
    assert!(s_idx <= t_idx && t_idx < path.grid.len());
    let c = c_sigma(p);
    let dt = path.grid.dt();
    let g = |idx: usize| -> Result<f64> {
        Ok(0.5 * p.kappa + c / lambda_checked(path.lambda[idx], idx, clamp)?)
    };
    let mut integral = 0.0;
    for k in s_idx..t_idx {
        integral += 0.5 * dt * (g(k)? + g(k + 1)?);
    }
    let lam_t = lambda_checked(path.lambda[t_idx], t_idx, clamp)?;
    Ok(p.sigma2 * lam_t.sqrt() * (-integral).exp())
}

/// `D_t F` magnitudes for a Cox path at every grid node:
/// `1_{t <= tau} int_t^tau mu_bar(s) D_t lambda_s ds`, trapezoid in `s`.
///
/// Backward recursion over cells: the interval integral at node `k` is the
/// decayed integral at `k+1` plus one trapezoid cell, so each step only sees
/// the bounded per-cell decay `exp(-int_k^{k+1} g)` and the whole vector
/// costs O(n).
pub fn d1_max_cox_all(
    p: &CoxParams,
    spec: &JumpSpec,
    path: &SimPath,
    clamp: bool,
) -> Result<Vec<f64>> {
    let n = path.grid.n_steps;
    let tau = path.tau_idx;
    let c = c_sigma(p);
    let dt = path.grid.dt();
    let mut lam = Vec::with_capacity(n + 1);
    for (idx, &l) in path.lambda.iter().enumerate() {
        lam.push(lambda_checked(l, idx, clamp)?);
    }
    // q(s) = mu_bar(s) sigma2 sqrt(lambda_s); g(s) = kappa/2 + C/lambda_s.
    let q: Vec<f64> = (0..=n)
        .map(|k| spec.mu_bar(path.grid.time(k)) * p.sigma2 * lam[k].sqrt())
        .collect();
    let g: Vec<f64> = lam.iter().map(|&l| 0.5 * p.kappa + c / l).collect();

    let mut out = vec![0.0; n + 1];
    let mut acc = 0.0; // int_t^tau q(s) e^{-(G(s)-G(t))} ds at t = k+1
    for k in (0..tau).rev() {
        let decay = (-0.5 * dt * (g[k] + g[k + 1])).exp();
        acc = decay * acc + 0.5 * dt * (q[k] + decay * q[k + 1]);
        out[k] = acc;
    }
    Ok(out)
}

/// `D_t F` magnitude for a Cox path at one node.
pub fn d1_max_cox(
    p: &CoxParams,
    spec: &JumpSpec,
    path: &SimPath,
    t_idx: usize,
    clamp: bool,
) -> Result<f64> {
    if t_idx > path.tau_idx {
        return Ok(0.0);
    }
    Ok(d1_max_cox_all(p, spec, path, clamp)?[t_idx])
}

/// `D_t F = sigma1 1_{t <= tau}` for a Hawkes path.
pub fn d1_max_hawkes(p: &HawkesParams, path: &SimPath, t_idx: usize) -> f64 {
    if t_idx <= path.tau_idx { p.sigma1 } else { 0.0 }
}

/// `D_{t,z} F = max{M_t, M_{t,T} + J(z)} - M_T` for a Cox path: inserting an
/// event only shifts the log-price after `t` by its own jump.
pub fn d2_max_cox(spec: &JumpSpec, path: &SimPath, t_idx: usize, z: f64) -> f64 {
    let j = spec.jump_fn.eval(z);
    let m_t = path.m[t_idx];
    let m_total = path.max_over_nodes();
    m_t.max(path.tail_max(t_idx) + j) - m_total
}

/// `D_{t,z} F = max{M_t, sup_{t<=s<=T} Z_s + K} - M_T` for a Hawkes path,
/// where `Z` is the cascade replay with an event inserted at `(t, z)`.
/// Returns the value together with the replay.
pub fn d2_max_hawkes(
    p: &HawkesParams,
    spec: &JumpSpec,
    base: &SimPath,
    t_idx: usize,
    z: f64,
) -> Result<(f64, PerturbedPath)> {
    let pert = insert_event_cascade(p, spec, base, t_idx)?.at(z);
    let value = d2_from_perturbed(base, &pert);
    Ok((value, pert))
}

/// The `D2` value of an already-computed replay.
pub fn d2_from_perturbed(base: &SimPath, pert: &PerturbedPath) -> f64 {
    let m_t = base.m[pert.t_idx];
    m_t.max(pert.sup_z_tail() + pert.k) - base.max_over_nodes()
}
