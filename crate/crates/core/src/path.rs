//! Path simulation for both models.
//!
//! The Cox intensity is a full-truncation Euler CIR; jumps are drawn per grid
//! cell from the left-node intensity. The Hawkes process is simulated exactly
//! against a layered unit-rate point field on `[0, T] x (0, L*h]`: a point
//! `(t, u)` becomes an event iff `u <= lambda(t-)`. Keeping the field around
//! makes the event-insertion perturbation a pure replay with common random
//! numbers, which is what the pathwise second-derivative needs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoxParams, HawkesParams, JumpSpec, ModelKind, SimGrid};
use crate::rng::{Purpose, StreamFamily};

/// One visited point of the jump stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    pub time: f64,
    /// Cox: the atom value z. Hawkes: the thinning ordinate u.
    pub z: f64,
    pub accepted: bool,
    /// Value of J applied to the log-price (0 when rejected).
    pub jump_applied: f64,
    /// Grid cell the event time falls in; jumps accumulate at the cell's
    /// right node.
    pub cell: usize,
    /// Intensity immediately before the event time.
    pub lambda_before: f64,
}

/// A discretized realization of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub model: ModelKind,
    pub grid: SimGrid,
    /// Price Brownian increments, variance dt each, length `n_steps`.
    pub w_s_incr: Vec<f64>,
    /// Intensity Brownian increments (Cox only; empty for Hawkes).
    pub w_incr: Vec<f64>,
    /// Intensity at grid nodes, length `n_steps + 1`.
    pub lambda: Vec<f64>,
    /// Log-price at grid nodes.
    pub x: Vec<f64>,
    /// Running maximum of the node values, nondecreasing.
    pub m: Vec<f64>,
    /// First node index attaining `m[n]`.
    pub tau_idx: usize,
    pub events: Vec<MarkedEvent>,
    /// Continuous-maximum estimate: node max refined by sampling the
    /// within-cell diffusion maximum from the Brownian-bridge law.
    pub m_cont: f64,
    /// Replay data for the Hawkes thinning (None for Cox).
    pub field: Option<ThinningField>,
}

impl SimPath {
    pub fn max_over_nodes(&self) -> f64 {
        self.m[self.grid.n_steps]
    }

    /// Max of node values over indices `>= k` (the `M_{t,T}` slice).
    pub fn tail_max(&self, k: usize) -> f64 {
        self.x[k..].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Running max and first attainment index of the global maximum.
pub fn running_max_and_tau(x: &[f64]) -> (Vec<f64>, usize) {
    assert!(!x.is_empty());
    let mut m = Vec::with_capacity(x.len());
    let mut cur = f64::NEG_INFINITY;
    for &v in x {
        cur = cur.max(v);
        m.push(cur);
    }
    let top = *m.last().unwrap();
    let tau_idx = x.iter().position(|&v| v == top).unwrap();
    (m, tau_idx)
}

/// N(0, dt) increments.
pub fn gaussian_increments(rng: &mut ChaCha8Rng, n: usize, dt: f64) -> Vec<f64> {
    let s = dt.sqrt();
    (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Full-truncation Euler step for the CIR intensity against given increments.
pub fn simulate_cir_with(p: &CoxParams, grid: &SimGrid, w_incr: &[f64]) -> Vec<f64> {
    assert_eq!(w_incr.len(), grid.n_steps);
    let dt = grid.dt();
    let mut lam = Vec::with_capacity(grid.len());
    lam.push(p.lambda0.max(0.0));
    let mut cur = p.lambda0;
    for &dw in w_incr {
        let pos = cur.max(0.0);
        cur += p.kappa * (p.theta - pos) * dt + p.sigma2 * pos.sqrt() * dw;
        lam.push(cur.max(0.0));
    }
    lam
}

pub fn simulate_cir(p: &CoxParams, grid: &SimGrid, fam: &StreamFamily) -> Vec<f64> {
    let mut rng = fam.stream(Purpose::IntensityNoise);
    let w = gaussian_increments(&mut rng, grid.n_steps, grid.dt());
    simulate_cir_with(p, grid, &w)
}

fn pick_atom(spec: &JumpSpec, mass: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut u: f64 = rng.random::<f64>() * mass;
    for &(z, w) in &spec.atoms {
        if u < w {
            return z;
        }
        u -= w;
    }
    spec.atoms.last().map(|&(z, _)| z).unwrap_or(0.0)
}

/// Cox jump stream on cells `[start_idx, n)`: conditional on the intensity,
/// each cell carries a Poisson stream of rate `lambda_k * nu_mass` with the
/// intensity frozen at the left node.
fn cox_events(
    spec: &JumpSpec,
    grid: &SimGrid,
    start_idx: usize,
    lambda: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<MarkedEvent> {
    let mut events = Vec::new();
    let mass = spec.total_mass();
    if mass <= 0.0 {
        return events;
    }
    for k in start_idx..grid.n_steps {
        let rate = lambda[k - start_idx] * mass;
        if rate <= 0.0 {
            continue;
        }
        let mut t = grid.time(k);
        let end = grid.time(k + 1);
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate;
            if t >= end {
                break;
            }
            let z = pick_atom(spec, mass, rng);
            events.push(MarkedEvent {
                time: t,
                z,
                accepted: true,
                jump_applied: spec.jump_fn.eval(z),
                cell: k,
                lambda_before: lambda[k - start_idx],
            });
        }
    }
    events
}

/// Lazily materialized homogeneous point field for Hawkes thinning.
///
/// Layer `l` holds the points of a unit-rate Poisson measure restricted to
/// the ordinate strip `(l*h, (l+1)*h]` over `[t_start, horizon]`. Layers are
/// generated on demand from per-layer streams, so a perturbed replay that
/// pushes the intensity into fresh strips sees exactly the points the base
/// run would have seen there.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinningField {
    fam: StreamFamily,
    pub strip_height: f64,
    pub t_start: f64,
    pub horizon: f64,
    layers: Vec<Vec<(f64, f64)>>,
}

impl ThinningField {
    pub fn new(fam: StreamFamily, strip_height: f64, t_start: f64, horizon: f64) -> Self {
        assert!(strip_height > 0.0);
        ThinningField { fam, strip_height, t_start, horizon, layers: Vec::new() }
    }

    fn materialize(&mut self, layer: usize) {
        while self.layers.len() <= layer {
            let l = self.layers.len();
            let mut rng = self.fam.stream(Purpose::HawkesLayer(l as u32));
            let mut pts = Vec::new();
            let mut t = self.t_start;
            loop {
                let u: f64 = rng.random();
                t += -(1.0 - u).ln() / self.strip_height;
                if t >= self.horizon {
                    break;
                }
                let v: f64 = rng.random();
                let ord = (l as f64 + (1.0 - v)) * self.strip_height;
                pts.push((t, ord));
            }
            self.layers.push(pts);
        }
    }

    fn layers_for(&mut self, lambda: f64) -> usize {
        let need = (lambda / self.strip_height).ceil().max(1.0) as usize;
        self.materialize(need - 1);
        need
    }
}

/// Exact exponential relaxation of the Hawkes intensity between events.
fn decay(theta: f64, kappa: f64, lam: f64, dt: f64) -> f64 {
    theta + (lam - theta) * (-kappa * dt).exp()
}

/// Run the thinning from `(t0, lam0)` to the horizon, returning accepted and
/// visited-rejected points in time order, plus the intensity at grid nodes
/// `start_idx..=n`.
fn hawkes_thin(
    p: &HawkesParams,
    spec: &JumpSpec,
    grid: &SimGrid,
    start_idx: usize,
    t0: f64,
    lam0: f64,
    field: &mut ThinningField,
) -> (Vec<MarkedEvent>, Vec<f64>) {
    let mut events = Vec::new();
    let mut lam = lam0;
    let mut t_last = t0;
    let mut active = field.layers_for(lam);
    let mut pos: Vec<usize> = Vec::new();

    // Advance per-layer cursors past t0 (and past insertion times when a
    // layer is opened mid-run: points before the opening instant sat above
    // the intensity then, so they are rejected by construction).
    let sync = |field: &ThinningField, pos: &mut Vec<usize>, active: usize, t: f64| {
        while pos.len() < active {
            let l = pos.len();
            let idx = field.layers[l].partition_point(|&(pt, _)| pt <= t);
            pos.push(idx);
        }
    };
    sync(field, &mut pos, active, t0);

    loop {
        // Earliest pending candidate among active layers.
        let mut best: Option<(usize, f64, f64)> = None;
        for l in 0..active {
            if let Some(&(pt, pu)) = field.layers[l].get(pos[l]) {
                if best.map_or(true, |(_, bt, _)| pt < bt) {
                    best = Some((l, pt, pu));
                }
            }
        }
        let Some((l, tc, uc)) = best else { break };
        pos[l] += 1;
        let lam_before = decay(p.theta, p.kappa, lam, tc - t_last);
        let accepted = uc <= lam_before;
        let jump = if accepted { spec.jump_fn.as_const().unwrap_or(0.0) } else { 0.0 };
        events.push(MarkedEvent {
            time: tc,
            z: uc,
            accepted,
            jump_applied: jump,
            cell: grid.cell_of(tc),
            lambda_before: lam_before,
        });
        if accepted {
            lam = lam_before + p.eta;
            t_last = tc;
            let new_active = field.layers_for(lam);
            if new_active > active {
                active = new_active;
                sync(field, &mut pos, active, tc);
            }
        }
    }

    // Intensity at grid nodes.
    let mut lambda_nodes = Vec::with_capacity(grid.len() - start_idx);
    let mut lam = lam0;
    let mut t_last = t0;
    let mut ev = events.iter().filter(|e| e.accepted).peekable();
    for k in start_idx..grid.len() {
        let tk = grid.time(k);
        while let Some(e) = ev.peek() {
            if e.time <= tk {
                lam = decay(p.theta, p.kappa, lam, e.time - t_last);
                lam += p.eta;
                t_last = e.time;
                ev.next();
            } else {
                break;
            }
        }
        lambda_nodes.push(decay(p.theta, p.kappa, lam, tk - t_last));
    }
    (events, lambda_nodes)
}

/// Accumulate log-price nodes from increments and per-cell jump totals.
fn accumulate_x(
    x0: f64,
    drift_per_cell: impl Fn(usize) -> f64,
    sigma1: f64,
    w_s: &[f64],
    jumps_per_cell: &[f64],
    start_idx: usize,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(w_s.len() + 1);
    x.push(x0);
    let mut cur = x0;
    for (i, &dw) in w_s.iter().enumerate() {
        let k = start_idx + i;
        cur += drift_per_cell(k) + sigma1 * dw + jumps_per_cell[i];
        x.push(cur);
    }
    x
}

fn jumps_per_cell(events: &[MarkedEvent], start_idx: usize, n_cells: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_cells];
    for e in events.iter().filter(|e| e.accepted) {
        let i = e.cell - start_idx;
        if i < n_cells {
            out[i] += e.jump_applied;
        }
    }
    out
}

/// Sample the within-cell diffusion maximum from the bridge law and fold it
/// into the node maximum. `jumps[i]` is applied at the right node of cell i.
fn bridge_max(
    x: &[f64],
    jumps: &[f64],
    sigma1: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let v = sigma1 * sigma1 * dt;
    let mut best = x[0];
    for i in 0..x.len() - 1 {
        // Always consume one uniform per cell so stream alignment does not
        // depend on parameters.
        let u: f64 = 1.0 - rng.random::<f64>();
        let a = x[i];
        let b = x[i + 1] - jumps[i];
        let cell_max = if v > 0.0 {
            0.5 * (a + b + ((b - a).powi(2) - 2.0 * v * u.ln()).sqrt())
        } else {
            a.max(b)
        };
        best = best.max(cell_max).max(x[i + 1]);
    }
    best
}

/// A simulated tail segment starting from a given state; node arrays run
/// over `start_idx ..= n_steps`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start_idx: usize,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub events: Vec<MarkedEvent>,
    pub w_s: Vec<f64>,
    pub w: Vec<f64>,
    pub field: Option<ThinningField>,
}

impl Segment {
    pub fn tail_max(&self) -> f64 {
        self.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn simulate_cox_segment(
    p: &CoxParams,
    spec: &JumpSpec,
    grid: &SimGrid,
    start_idx: usize,
    x0: f64,
    lam0: f64,
    fam: &StreamFamily,
) -> Segment {
    let n_cells = grid.n_steps - start_idx;
    let dt = grid.dt();
    let mut rng_w = fam.stream(Purpose::IntensityNoise);
    let mut rng_ws = fam.stream(Purpose::PriceNoise);
    let w = gaussian_increments(&mut rng_w, n_cells, dt);
    let w_s = gaussian_increments(&mut rng_ws, n_cells, dt);
    let local = CoxParams { lambda0: lam0, ..*p };
    let sub = SimGrid { n_steps: n_cells.max(1), horizon: (grid.horizon - grid.time(start_idx)).max(dt) };
    let lambda = if n_cells == 0 {
        vec![lam0.max(0.0)]
    } else {
        simulate_cir_with(&local, &SimGrid { n_steps: n_cells, horizon: sub.horizon }, &w)
    };
    let mut rng_ev = fam.stream(Purpose::CoxEvents);
    let events = cox_events(spec, grid, start_idx, &lambda, &mut rng_ev);
    let jumps = jumps_per_cell(&events, start_idx, n_cells);
    let drift = |k: usize| {
        let t = grid.time(k);
        (p.mu - 0.5 * p.sigma1 * p.sigma1) * dt - spec.mu_bar(t) * lambda[k - start_idx] * dt
    };
    let x = accumulate_x(x0, drift, p.sigma1, &w_s, &jumps, start_idx);
    Segment { start_idx, x, lambda, events, w_s, w, field: None }
}

pub fn simulate_hawkes_segment(
    p: &HawkesParams,
    spec: &JumpSpec,
    grid: &SimGrid,
    start_idx: usize,
    x0: f64,
    lam0: f64,
    fam: &StreamFamily,
) -> Segment {
    let n_cells = grid.n_steps - start_idx;
    let dt = grid.dt();
    let mut rng_ws = fam.stream(Purpose::PriceNoise);
    let w_s = gaussian_increments(&mut rng_ws, n_cells, dt);
    let strip = lam0.max(p.theta).max(p.lambda0) + p.eta + 1.0;
    let t0 = grid.time(start_idx);
    let mut field = ThinningField::new(*fam, strip, t0, grid.horizon);
    let (events, lambda) = hawkes_thin(p, spec, grid, start_idx, t0, lam0, &mut field);
    let jumps = jumps_per_cell(&events, start_idx, n_cells);
    // X = Y + int (e^J - 1) lambda du: the compensator in Y cancels, leaving
    // drift + diffusion + raw jumps.
    let drift = |_k: usize| (p.mu - 0.5 * p.sigma1 * p.sigma1) * dt;
    let x = accumulate_x(x0, drift, p.sigma1, &w_s, &jumps, start_idx);
    Segment { start_idx, x, lambda, events, w_s, w: Vec::new(), field: Some(field) }
}

fn finish_path(
    model: ModelKind,
    grid: &SimGrid,
    seg: Segment,
    sigma1: f64,
    fam: &StreamFamily,
) -> SimPath {
    let (m, tau_idx) = running_max_and_tau(&seg.x);
    let jumps = jumps_per_cell(&seg.events, 0, grid.n_steps);
    let mut rng_b = fam.stream(Purpose::BridgeMax);
    let m_cont = bridge_max(&seg.x, &jumps, sigma1, grid.dt(), &mut rng_b);
    SimPath {
        model,
        grid: grid.clone(),
        w_s_incr: seg.w_s,
        w_incr: seg.w,
        lambda: seg.lambda,
        x: seg.x,
        m,
        tau_idx,
        events: seg.events,
        m_cont,
        field: seg.field,
    }
}

pub fn simulate_cox_path(
    p: &CoxParams,
    spec: &JumpSpec,
    grid: &SimGrid,
    fam: &StreamFamily,
) -> SimPath {
    let seg = simulate_cox_segment(p, spec, grid, 0, p.s0.ln(), p.lambda0, fam);
    finish_path(ModelKind::Cox, grid, seg, p.sigma1, fam)
}

pub fn simulate_hawkes_path(
    p: &HawkesParams,
    spec: &JumpSpec,
    grid: &SimGrid,
    fam: &StreamFamily,
) -> SimPath {
    let seg = simulate_hawkes_segment(p, spec, grid, 0, p.s0.ln(), p.lambda0, fam);
    finish_path(ModelKind::Hawkes, grid, seg, p.sigma1, fam)
}

/// Base path plus the effect of inserting one event at `(t, z)`.
#[derive(Debug, Clone)]
pub struct PerturbedPath {
    pub t_idx: usize,
    pub z: f64,
    /// Whether the mark landed inside `(0, lambda_t]`.
    pub applied: bool,
    /// `K_{t,z}`: the jump applied by the inserted event itself.
    pub k: f64,
    /// Perturbed log-price at all grid nodes; equals the base before `t`.
    pub z_path: Vec<f64>,
    pub lambda_pert: Vec<f64>,
    pub d2_lambda: Vec<f64>,
    /// Accepted events of the perturbed run on `(t, T]`.
    pub events: Vec<MarkedEvent>,
}

impl PerturbedPath {
    /// `sup_{t <= s <= T} Z_s` over grid nodes.
    pub fn sup_z_tail(&self) -> f64 {
        self.z_path[self.t_idx..].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Replay the Hawkes thinning on `[t, T]` with the same point field after
/// inserting an event at `t` with mark `z`. A mark outside `(0, lambda_t]`
/// leaves the path untouched.
pub fn insert_event_cascade<'a>(
    p: &HawkesParams,
    spec: &JumpSpec,
    base: &'a SimPath,
    t_idx: usize,
) -> Result<PerturbedPathBuilder<'a>> {
    if base.model != ModelKind::Hawkes {
        return Err(Error::HardInvalid("cascade insertion needs a Hawkes path".into()));
    }
    if t_idx >= base.grid.len() {
        return Err(Error::InsertOffGrid(t_idx));
    }
    Ok(PerturbedPathBuilder { p: *p, spec: spec.clone(), base, t_idx })
}

/// Bound-to-a-path cascade evaluator; `at(z)` runs one replay.
pub struct PerturbedPathBuilder<'a> {
    p: HawkesParams,
    spec: JumpSpec,
    base: &'a SimPath,
    t_idx: usize,
}

impl PerturbedPathBuilder<'_> {
    pub fn at(&self, z: f64) -> PerturbedPath {
        let base = self.base;
        let grid = &base.grid;
        let t_idx = self.t_idx;
        let lam_t = base.lambda[t_idx];
        let n = grid.len();

        if !(z > 0.0 && z <= lam_t) {
            return PerturbedPath {
                t_idx,
                z,
                applied: false,
                k: 0.0,
                z_path: base.x.clone(),
                lambda_pert: base.lambda.clone(),
                d2_lambda: vec![0.0; n],
                events: Vec::new(),
            };
        }

        let t = grid.time(t_idx);
        // Same field as the base run (same per-layer streams), replayed from t
        // with the insertion folded into the starting intensity.
        let mut field = base.field.clone().expect("hawkes path carries its field");
        let lam_start = lam_t + self.p.eta;
        let (events, lambda_tail) =
            hawkes_thin(&self.p, &self.spec, grid, t_idx, t, lam_start, &mut field);

        let mut lambda_pert = base.lambda[..t_idx].to_vec();
        lambda_pert.extend_from_slice(&lambda_tail);
        let d2_lambda: Vec<f64> =
            lambda_pert.iter().zip(&base.lambda).map(|(a, b)| a - b).collect();

        // Z: restart the price from X_t with the same Brownian increments and
        // the perturbed acceptances. The inserted event's own jump is K and
        // is NOT part of Z.
        let dt = grid.dt();
        let jumps = jumps_per_cell(&events, t_idx, grid.n_steps - t_idx);
        let drift = |_k: usize| (self.p.mu - 0.5 * self.p.sigma1 * self.p.sigma1) * dt;
        let tail = accumulate_x(
            base.x[t_idx],
            drift,
            self.p.sigma1,
            &base.w_s_incr[t_idx..],
            &jumps,
            t_idx,
        );
        let mut z_path = base.x[..t_idx].to_vec();
        z_path.extend_from_slice(&tail);
        debug_assert_eq!(z_path.len(), n);

        let k = self.spec.jump_fn.as_const().unwrap_or(0.0);
        PerturbedPath { t_idx, z, applied: true, k, z_path, lambda_pert, d2_lambda, events }
    }
}
