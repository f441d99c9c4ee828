//! Clark-Ocone assembly and verification for F = M_T:
//!
//! ```text
//! F = E[F] + int phi_S dW^S  (-/+) int phi_L dW + int int psi d(N - compensator)
//! ```
//!
//! `phi_S(t) = sigma1 P(tau >= t | F_t)`, `phi_L` is the Cox intensity-Brownian
//! integrand `E[ int_t^tau mu_bar D1 lambda | F_t ]` (magnitude; the sign in
//! front of its dW integral is a run option because the source formulas
//! disagree), and `psi(t,z) = E[D2 F | F_t]`.
//!
//! Conditional expectations come either from closed forms or from nested
//! Monte Carlo: continuations branched from the time-t state `(X_t,
//! lambda_t, M_t)`, each with its own derived RNG stream family, so reports
//! are reproducible for any worker count.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::first_passage::{AlphaConstants, Dynamics, ExitTimeQuery, StateSnapshot, psi_jump};
use crate::malliavin::{d1_max_cox_all, d2_from_perturbed};
use crate::model::{JumpSpec, SimGrid};
use crate::path::{
    SimPath, insert_event_cascade, running_max_and_tau, simulate_cox_segment,
    simulate_hawkes_segment,
};
use crate::rng::StreamFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrownianMode {
    /// The reflection formula `sigma1 * 2(1 - Phi((M_t - X_t)/(sigma1 sqrt(T-t))))`.
    /// Exact for the continuous jump-free diffusion only; rejected when
    /// jumps are enabled.
    Closed,
    NestedMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpMode {
    ClosedForm,
    NestedMc,
}

/// Sign in front of the Cox intensity-Brownian integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// Minus, as in the representation theorem.
    Theorem,
    /// Plus, reading the derivative display literally.
    Raw,
}

impl SignConvention {
    fn factor(self) -> f64 {
        match self {
            SignConvention::Theorem => -1.0,
            SignConvention::Raw => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandEstimate {
    pub t: f64,
    pub z: Option<f64>,
    pub value: f64,
    pub se: f64,
    pub method: &'static str,
    pub n_inner: usize,
}

/// Replace the tail of `base` from node `t_idx` with a fresh simulation
/// branched from the time-t state. The stitched path carries the fresh
/// tail's noise and (for Hawkes) thinning field, so cascade replays work.
pub fn continue_from(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    t_idx: usize,
    fam: &StreamFamily,
) -> SimPath {
    let grid = &base.grid;
    let x0 = base.x[t_idx];
    let lam0 = base.lambda[t_idx];
    let seg = match dynamics {
        Dynamics::Cox(p) => simulate_cox_segment(p, spec, grid, t_idx, x0, lam0, fam),
        Dynamics::Hawkes(p) => simulate_hawkes_segment(p, spec, grid, t_idx, x0, lam0, fam),
    };
    let mut x = base.x[..t_idx].to_vec();
    x.extend_from_slice(&seg.x);
    let mut lambda = base.lambda[..t_idx].to_vec();
    lambda.extend_from_slice(&seg.lambda);
    let mut w_s = base.w_s_incr[..t_idx].to_vec();
    w_s.extend_from_slice(&seg.w_s);
    let mut w = base.w_incr[..t_idx.min(base.w_incr.len())].to_vec();
    w.extend_from_slice(&seg.w);
    let (m, tau_idx) = running_max_and_tau(&x);
    SimPath {
        model: base.model,
        grid: grid.clone(),
        w_s_incr: w_s,
        w_incr: w,
        lambda,
        x,
        m,
        tau_idx,
        events: seg.events,
        m_cont: 0.0,
        field: seg.field,
    }
}

/// Sample mean and SE of F = M_T over fresh paths. `bridge` switches the
/// per-path functional to the Brownian-bridge-refined continuous maximum.
pub fn estimate_ef(
    dynamics: Dynamics,
    spec: &JumpSpec,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
    bridge: bool,
) -> (f64, f64) {
    assert!(n_paths >= 2);
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let fam = StreamFamily::new(seed, i as u64);
            let path = dynamics.simulate(spec, grid, &fam);
            if bridge { path.m_cont } else { path.max_over_nodes() }
        })
        .collect();
    mean_se(&values)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n.max(2) - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-cell integrand values along one outer path.
struct CellIntegrands {
    /// phi_S(t_k): price-Brownian integrand.
    phi_s: Vec<f64>,
    /// phi_L(t_k): Cox intensity-Brownian integrand magnitude (empty
    /// otherwise).
    phi_l: Vec<f64>,
    /// psi(t_k, z_i) per atom (Cox) or the single strip value (Hawkes).
    psi: Vec<Vec<f64>>,
}

struct NestedBatch {
    phi_s: (f64, f64),
    phi_l: (f64, f64),
    psi: Vec<(f64, f64)>,
}

fn sigma1_of(d: Dynamics) -> f64 {
    match d {
        Dynamics::Cox(p) => p.sigma1,
        Dynamics::Hawkes(p) => p.sigma1,
    }
}

/// One batch of `n_inner` continuations from node `t_idx`; estimates
/// phi_S, phi_L and every psi(t_idx, z) from the same branch set.
fn nested_batch(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    t_idx: usize,
    n_inner: usize,
    fam: &StreamFamily,
    clamp: bool,
    want_psi: bool,
) -> Result<NestedBatch> {
    let sigma1 = sigma1_of(dynamics);
    let m_t = base.m[t_idx];
    let n_psi = if !want_psi || !spec.enabled() {
        0
    } else {
        match dynamics {
            Dynamics::Cox(_) => spec.atoms.len(),
            Dynamics::Hawkes(_) => 1,
        }
    };
    let mut phi_s = Vec::with_capacity(n_inner);
    let mut phi_l = Vec::with_capacity(n_inner);
    let mut psi = vec![Vec::with_capacity(n_inner); n_psi];
    for inner in 0..n_inner {
        let child = fam.child(t_idx as u64, inner as u64);
        let cont = continue_from(dynamics, spec, base, t_idx, &child);
        let tail_max = cont.tail_max(t_idx);
        // tau >= t iff the tail reaches the running maximum again.
        phi_s.push(if tail_max >= m_t { sigma1 } else { 0.0 });
        match dynamics {
            Dynamics::Cox(p) => {
                let d1 = d1_max_cox_all(p, spec, &cont, clamp)?;
                phi_l.push(if t_idx <= cont.tau_idx { d1[t_idx] } else { 0.0 });
                let m_total = cont.max_over_nodes();
                for (slot, &(z, _)) in psi.iter_mut().zip(&spec.atoms) {
                    let j = spec.jump_fn.eval(z);
                    slot.push(m_t.max(tail_max + j) - m_total);
                }
            }
            Dynamics::Hawkes(p) => {
                if n_psi > 0 {
                    // Insert on the continuation (its field replays the
                    // same tail randomness).
                    let z = 0.5 * cont.lambda[t_idx]; // any on-strip mark
                    let pert = insert_event_cascade(p, spec, &cont, t_idx)?.at(z);
                    psi[0].push(d2_from_perturbed(&cont, &pert));
                }
            }
        }
    }
    Ok(NestedBatch {
        phi_s: mean_se(&phi_s),
        phi_l: if phi_l.is_empty() { (0.0, 0.0) } else { mean_se(&phi_l) },
        psi: psi.iter().map(|v| mean_se(v)).collect(),
    })
}

/// `sigma1 * 2 (1 - Phi((M_t - X_t) / (sigma1 sqrt(T - t))))`, the exact
/// continuous-diffusion integrand.
pub fn phi_closed(base: &SimPath, t_idx: usize, sigma1: f64) -> f64 {
    let rem = base.grid.horizon - base.grid.time(t_idx);
    if rem <= 0.0 {
        return if base.x[t_idx] >= base.m[t_idx] { sigma1 } else { 0.0 };
    }
    if sigma1 <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let gap = (base.m[t_idx] - base.x[t_idx]) / (sigma1 * rem.sqrt());
    sigma1 * 2.0 * (1.0 - normal.cdf(gap))
}

fn psi_closed(
    dynamics: Dynamics,
    base: &SimPath,
    t_idx: usize,
    consts: &AlphaConstants,
    k_jump: f64,
) -> Result<f64> {
    let q = ExitTimeQuery {
        t: base.grid.time(t_idx),
        horizon: base.grid.horizon,
        b: 0.0,
        e: 0.0,
        state: StateSnapshot {
            x: base.x[t_idx],
            lambda: base.lambda[t_idx],
            m: base.m[t_idx],
        },
    };
    let _ = dynamics;
    psi_jump(&q, consts, k_jump)
}

/// Estimate `phi_S` (and `phi_L` for Cox) at one node of a frozen path.
pub fn brownian_integrand(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    t_idx: usize,
    n_inner: usize,
    fam: &StreamFamily,
    clamp: bool,
) -> Result<(IntegrandEstimate, Option<IntegrandEstimate>)> {
    let batch = nested_batch(dynamics, spec, base, t_idx, n_inner, fam, clamp, false)?;
    let t = base.grid.time(t_idx);
    let phi_s = IntegrandEstimate {
        t,
        z: None,
        value: batch.phi_s.0,
        se: batch.phi_s.1,
        method: "nested_mc",
        n_inner,
    };
    let phi_l = matches!(dynamics, Dynamics::Cox(_)).then(|| IntegrandEstimate {
        t,
        z: None,
        value: batch.phi_l.0,
        se: batch.phi_l.1,
        method: "nested_mc",
        n_inner,
    });
    Ok((phi_s, phi_l))
}

/// Estimate `psi(t, z)`; `mode` selects closed form, nested MC, or both
/// (closed value mirrored into the estimate, nested into `nested`).
pub fn jump_integrand(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    t_idx: usize,
    z: f64,
    n_inner: usize,
    fam: &StreamFamily,
    consts: Option<&AlphaConstants>,
) -> Result<(Option<f64>, Option<IntegrandEstimate>)> {
    let closed = match consts {
        Some(c) => {
            let k = spec.jump_fn.eval(z);
            Some(psi_closed(dynamics, base, t_idx, c, k)?)
        }
        None => None,
    };
    let nested = if n_inner > 0 {
        let batch = nested_batch(dynamics, spec, base, t_idx, n_inner, fam, false, true)?;
        let (value, se) = match dynamics {
            Dynamics::Cox(_) => {
                let pos = spec
                    .atoms
                    .iter()
                    .position(|&(a, _)| a == z)
                    .ok_or_else(|| Error::HardInvalid(format!("z = {z} is not an atom")))?;
                batch.psi[pos]
            }
            Dynamics::Hawkes(_) => batch.psi[0],
        };
        Some(IntegrandEstimate {
            t: base.grid.time(t_idx),
            z: Some(z),
            value,
            se,
            method: "nested_mc",
            n_inner,
        })
    } else {
        None
    };
    Ok((closed, nested))
}

#[derive(Debug, Clone)]
pub struct CoSettings {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
    pub brownian_mode: BrownianMode,
    pub jump_mode: JumpMode,
    pub sign: SignConvention,
    pub clamp: bool,
}

impl Default for CoSettings {
    fn default() -> Self {
        CoSettings {
            n_outer: 1000,
            n_inner: 256,
            seed: 0,
            brownian_mode: BrownianMode::NestedMc,
            jump_mode: JumpMode::NestedMc,
            sign: SignConvention::Theorem,
            clamp: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClarkOconeReport {
    pub ef_hat: f64,
    pub ef_se: f64,
    pub f: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub residual_mean: f64,
    pub residual_se: f64,
    pub residual_var: f64,
    pub correlation: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub sign: SignConvention,
    /// Stream layout note for replay.
    pub rng_streams: String,
}

impl ClarkOconeReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.f.iter().zip(&self.f_hat).map(|(a, b)| a - b).collect()
    }
}

fn integrands_for_path(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    settings: &CoSettings,
    consts: Option<&AlphaConstants>,
    fam: &StreamFamily,
) -> Result<CellIntegrands> {
    let n = base.grid.n_steps;
    let sigma1 = sigma1_of(dynamics);
    let is_cox = matches!(dynamics, Dynamics::Cox(_));
    let n_psi = if !spec.enabled() {
        0
    } else if is_cox {
        spec.atoms.len()
    } else {
        1
    };

    let mut phi_s = Vec::with_capacity(n);
    let mut phi_l = Vec::with_capacity(if is_cox { n } else { 0 });
    let mut psi = vec![Vec::with_capacity(n); n_psi];

    let need_nested_phi = settings.brownian_mode == BrownianMode::NestedMc;
    let need_nested_psi = n_psi > 0 && settings.jump_mode == JumpMode::NestedMc;

    for k in 0..n {
        let batch = if need_nested_phi || need_nested_psi {
            Some(nested_batch(
                dynamics,
                spec,
                base,
                k,
                settings.n_inner,
                fam,
                settings.clamp,
                need_nested_psi,
            )?)
        } else {
            None
        };
        match settings.brownian_mode {
            BrownianMode::Closed => {
                if spec.enabled() {
                    return Err(Error::HardInvalid(
                        "closed Brownian integrand is only exact with jumps off".into(),
                    ));
                }
                phi_s.push(phi_closed(base, k, sigma1));
                if is_cox {
                    phi_l.push(0.0); // mu_bar == 0 with jumps off
                }
            }
            BrownianMode::NestedMc => {
                let b = batch.as_ref().expect("nested batch present");
                phi_s.push(b.phi_s.0);
                if is_cox {
                    phi_l.push(b.phi_l.0);
                }
            }
        }
        match settings.jump_mode {
            JumpMode::NestedMc => {
                if let Some(b) = batch.as_ref() {
                    for (slot, est) in psi.iter_mut().zip(&b.psi) {
                        slot.push(est.0);
                    }
                }
            }
            JumpMode::ClosedForm => {
                if n_psi > 0 {
                    let c = consts.ok_or_else(|| {
                        Error::ClosedFormUnavailable(
                            "closed psi needs alpha constants".into(),
                        )
                    })?;
                    if is_cox {
                        for (slot, &(z, _)) in psi.iter_mut().zip(&spec.atoms) {
                            let j = spec.jump_fn.eval(z);
                            slot.push(psi_closed(dynamics, base, k, c, j)?);
                        }
                    } else {
                        psi[0].push(psi_closed(dynamics, base, k, c, c.j)?);
                    }
                }
            }
        }
    }
    Ok(CellIntegrands { phi_s, phi_l, psi })
}

/// Assemble F-hat along fresh outer paths and report residual statistics.
pub fn reconstruct(
    dynamics: Dynamics,
    spec: &JumpSpec,
    grid: &SimGrid,
    settings: &CoSettings,
    consts: Option<&AlphaConstants>,
) -> Result<ClarkOconeReport> {
    spec.validate()?;
    // E[F] from an independent ensemble (child scope keeps streams disjoint
    // from the outer reconstruction paths).
    let ef_values: Vec<f64> = (0..settings.n_outer.max(1000))
        .into_par_iter()
        .map(|i| {
            let fam = StreamFamily::new(settings.seed, i as u64).child(u64::MAX, 1);
            dynamics.simulate(spec, grid, &fam).max_over_nodes()
        })
        .collect();
    let (ef_hat, ef_se) = mean_se(&ef_values);

    let dt = grid.dt();
    let is_cox = matches!(dynamics, Dynamics::Cox(_));
    let results: Result<Vec<(f64, f64)>> = (0..settings.n_outer)
        .into_par_iter()
        .map(|i| {
            let fam = StreamFamily::new(settings.seed, i as u64);
            let base = dynamics.simulate(spec, grid, &fam);
            let ints = integrands_for_path(dynamics, spec, &base, settings, consts, &fam)?;

            let mut brownian = 0.0;
            for k in 0..grid.n_steps {
                brownian += ints.phi_s[k] * base.w_s_incr[k];
            }
            if is_cox {
                let sgn = settings.sign.factor();
                for k in 0..grid.n_steps {
                    brownian += sgn * ints.phi_l[k] * base.w_incr[k];
                }
            }

            let mut jump = 0.0;
            if !ints.psi.is_empty() {
                // Realized events, psi at the left node (predictable).
                for ev in base.events.iter().filter(|e| e.accepted) {
                    let slot = if is_cox {
                        spec.atoms
                            .iter()
                            .position(|&(a, _)| a == ev.z)
                            .ok_or_else(|| {
                                Error::HardInvalid(format!("event mark {} off-atom", ev.z))
                            })?
                    } else {
                        0
                    };
                    jump += ints.psi[slot][ev.cell];
                }
                // Compensator: lambda_k w_i dt per atom (Cox), lambda_k dt
                // over the strip (Hawkes).
                for k in 0..grid.n_steps {
                    if is_cox {
                        for (slot, &(_, w)) in ints.psi.iter().zip(&spec.atoms) {
                            jump -= slot[k] * base.lambda[k] * w * dt;
                        }
                    } else {
                        jump -= ints.psi[0][k] * base.lambda[k] * dt;
                    }
                }
            }

            Ok((base.max_over_nodes(), ef_hat + brownian + jump))
        })
        .collect();
    let pairs = results?;
    let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let f_hat: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let residuals: Vec<f64> = f.iter().zip(&f_hat).map(|(a, b)| a - b).collect();
    let (residual_mean, residual_se) = mean_se(&residuals);
    let residual_var = {
        let (m, _) = mean_se(&residuals);
        residuals.iter().map(|r| (r - m) * (r - m)).sum::<f64>()
            / (residuals.len().max(2) - 1) as f64
    };
    Ok(ClarkOconeReport {
        ef_hat,
        ef_se,
        correlation: correlation(&f, &f_hat),
        f,
        f_hat,
        residual_mean,
        residual_se,
        residual_var,
        n_outer: settings.n_outer,
        n_inner: settings.n_inner,
        sign: settings.sign,
        rng_streams: format!(
            "outer=sha256(seed={},scope=i); ef=child(MAX,1); inner=child(node,branch)",
            settings.seed
        ),
    })
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

/// 95% bootstrap test that `var(fine)` is not greater than `var(coarse)`.
/// Returns true when non-increasing variance is statistically tenable.
pub fn bootstrap_var_nonincreasing(
    fine: &[f64],
    coarse: &[f64],
    n_boot: usize,
    seed: u64,
) -> bool {
    use rand::Rng;
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let fam = StreamFamily::new(seed, 0);
    let mut rng = fam.stream(crate::rng::Purpose::Aux);
    let mut count_gt = 0usize;
    for _ in 0..n_boot {
        let rf: Vec<f64> =
            (0..fine.len()).map(|_| fine[rng.random_range(0..fine.len())]).collect();
        let rc: Vec<f64> =
            (0..coarse.len()).map(|_| coarse[rng.random_range(0..coarse.len())]).collect();
        if var(&rf) > var(&rc) {
            count_gt += 1;
        }
    }
    // Fail only if the fine grid is worse in at least 95% of resamples.
    (count_gt as f64) < 0.95 * n_boot as f64
}

#[derive(Debug, Clone, Copy)]
pub struct HedgeRow {
    pub t: f64,
    pub phi: f64,
    pub psi_weighted: f64,
}

/// Closed-form integrands along one realized path: the diffusion
/// approximation `phi_closed` and the atom-weighted closed psi.
pub fn hedge_table(
    dynamics: Dynamics,
    spec: &JumpSpec,
    base: &SimPath,
    consts: Option<&AlphaConstants>,
) -> Result<Vec<HedgeRow>> {
    let sigma1 = sigma1_of(dynamics);
    let mut rows = Vec::with_capacity(base.grid.n_steps + 1);
    for k in 0..=base.grid.n_steps {
        let phi = phi_closed(base, k, sigma1);
        let psi_weighted = match (consts, spec.enabled(), k < base.grid.n_steps) {
            (Some(c), true, true) => match dynamics {
                Dynamics::Cox(_) => {
                    let mut acc = 0.0;
                    for &(z, w) in &spec.atoms {
                        acc += w * psi_closed(dynamics, base, k, c, spec.jump_fn.eval(z))?;
                    }
                    acc
                }
                Dynamics::Hawkes(_) => psi_closed(dynamics, base, k, c, c.j)?,
            },
            _ => 0.0,
        };
        rows.push(HedgeRow { t: base.grid.time(k), phi, psi_weighted });
    }
    Ok(rows)
}
