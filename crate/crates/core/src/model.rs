//! Model parameter sets, validation and the finite discrete jump measure.
//!
//! Two models share the price diffusion `dS = mu S dt + sigma1 S dW^S + jumps`:
//!
//! ```text
//! cox:    d lambda = kappa (theta - lambda) dt + sigma2 sqrt(lambda) dW
//! hawkes: d lambda = kappa (theta - lambda) dt + eta N(dt)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cox model: CIR-driven stochastic intensity, marks drawn from a finite measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxParams {
    pub mu: f64,
    pub sigma1: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma2: f64,
    pub lambda0: f64,
    pub s0: f64,
    pub horizon: f64,
}

impl CoxParams {
    /// `2 kappa theta > sigma2^2`, the condition keeping the intensity positive
    /// and the inverse-moment bounds available.
    pub fn feller_ok(&self) -> bool {
        2.0 * self.kappa * self.theta > self.sigma2 * self.sigma2
    }
}

/// Hawkes model: self-exciting intensity, each event kicks lambda up by `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub mu: f64,
    pub sigma1: f64,
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub s0: f64,
    pub horizon: f64,
}

impl HawkesParams {
    /// Subcritical branching: `eta < kappa`.
    pub fn stable(&self) -> bool {
        self.eta < self.kappa
    }

    /// `eta < kappa ln 2`, required for the closed-form tail constants.
    pub fn closed_form_ok(&self) -> bool {
        self.eta < self.kappa * std::f64::consts::LN_2
    }
}

/// Declared jump-size family. Declared rather than an arbitrary closure so the
/// time-independence needed by the closed-form tails is checkable up front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum JumpFn {
    /// J(t, z) = j0 for every mark.
    Const(f64),
    /// J(t, z) = c * z.
    LinearInMark(f64),
}

impl JumpFn {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            JumpFn::Const(j0) => j0,
            JumpFn::LinearInMark(c) => c * z,
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self {
            JumpFn::Const(j0) => Some(j0),
            JumpFn::LinearInMark(_) => None,
        }
    }
}

/// Finite discrete jump measure: atoms `(z_i, w_i)` plus the jump-size map J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub atoms: Vec<(f64, f64)>,
    pub jump_fn: JumpFn,
}

impl JumpSpec {
    /// Spec with no atoms: the jump part of the model is switched off.
    pub fn none() -> Self {
        JumpSpec {
            atoms: Vec::new(),
            jump_fn: JumpFn::Const(0.0),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn enabled(&self) -> bool {
        self.total_mass() > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for &(z, w) in &self.atoms {
            if z == 0.0 {
                return Err(Error::HardInvalid("jump atom at z = 0".into()));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::HardInvalid(format!("atom weight {w} not in [0, inf)")));
            }
        }
        if !self.atoms.is_empty() && self.total_mass() <= 0.0 {
            return Err(Error::HardInvalid("jump measure has zero total mass".into()));
        }
        Ok(())
    }

    /// Compensator rate per unit intensity: `sum_i w_i (e^{J(t, z_i)} - 1)`.
    /// Exact sum, the measure is discrete by construction.
    pub fn mu_bar(&self, _t: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(z, w)| w * (self.jump_fn.eval(z).exp_m1()))
            .sum()
    }
}

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub n_steps: usize,
    pub horizon: f64,
}

impl SimGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::HardInvalid("grid needs at least one step".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::HardInvalid(format!("horizon {horizon} must be > 0")));
        }
        Ok(SimGrid { n_steps, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Node count, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the cell containing `t`, i.e. the largest `k` with `t_k <= t`,
    /// capped at `n_steps - 1`.
    pub fn cell_of(&self, t: f64) -> usize {
        let k = (t / self.dt()).floor() as usize;
        k.min(self.n_steps - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cox,
    Hawkes,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Cox => write!(f, "cox"),
            ModelKind::Hawkes => write!(f, "hawkes"),
        }
    }
}

/// Outcome of parameter validation: hard errors abort, warnings downgrade
/// which closed forms are trustworthy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub feller_ok: Option<bool>,
    pub stable: Option<bool>,
    pub closed_form_ok: Option<bool>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<ValidationReport> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::HardInvalid(self.errors.join("; ")))
        }
    }
}

pub fn validate_cox(p: &CoxParams) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (name, v) in [
        ("sigma1", p.sigma1),
        ("sigma2", p.sigma2),
        ("kappa", p.kappa),
        ("theta", p.theta),
        ("horizon", p.horizon),
        ("s0", p.s0),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            errors.push(format!("{name} = {v} must be strictly positive"));
        }
    }
    if !(p.lambda0 >= 0.0) {
        errors.push(format!("lambda0 = {} must be >= 0", p.lambda0));
    }
    if !p.mu.is_finite() {
        errors.push(format!("mu = {} must be finite", p.mu));
    }
    let feller = p.feller_ok();
    if errors.is_empty() && !feller {
        warnings.push(format!(
            "Feller condition violated (2*kappa*theta = {} <= sigma2^2 = {}); \
             intensity may hit zero and moment bounds are off",
            2.0 * p.kappa * p.theta,
            p.sigma2 * p.sigma2
        ));
    }
    ValidationReport {
        errors,
        warnings,
        feller_ok: Some(feller),
        stable: None,
        closed_form_ok: None,
    }
}

pub fn validate_hawkes(p: &HawkesParams) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (name, v) in [
        ("sigma1", p.sigma1),
        ("kappa", p.kappa),
        ("theta", p.theta),
        ("horizon", p.horizon),
        ("s0", p.s0),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            errors.push(format!("{name} = {v} must be strictly positive"));
        }
    }
    if !(p.eta >= 0.0) || !p.eta.is_finite() {
        errors.push(format!("eta = {} must be >= 0", p.eta));
    }
    if !(p.lambda0 >= 0.0) {
        errors.push(format!("lambda0 = {} must be >= 0", p.lambda0));
    }
    if !p.mu.is_finite() {
        errors.push(format!("mu = {} must be finite", p.mu));
    }
    let stable = p.stable();
    let cf = p.closed_form_ok();
    if errors.is_empty() {
        if !stable {
            warnings.push(format!(
                "eta = {} >= kappa = {}: intensity is supercritical",
                p.eta, p.kappa
            ));
        }
        if !cf {
            warnings.push(format!(
                "eta = {} >= kappa*ln2 = {}: closed-form tail constants refused",
                p.eta,
                p.kappa * std::f64::consts::LN_2
            ));
        }
    }
    ValidationReport {
        errors,
        warnings,
        feller_ok: None,
        stable: Some(stable),
        closed_form_ok: Some(cf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cox_a() -> CoxParams {
        CoxParams {
            mu: 0.05,
            sigma1: 0.2,
            kappa: 2.0,
            theta: 1.0,
            sigma2: 0.5,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn cox_a_is_valid_and_feller() {
        let r = validate_cox(&cox_a());
        assert!(r.is_valid());
        assert_eq!(r.feller_ok, Some(true)); // 2*2*1 = 4 > 0.25
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn degenerate_sigma2_is_hard_invalid() {
        let p = CoxParams { sigma2: 0.0, ..cox_a() };
        let r = validate_cox(&p);
        assert!(!r.is_valid());
        assert!(r.into_result().is_err());
    }

    #[test]
    fn feller_violation_is_soft() {
        let p = CoxParams { kappa: 1.0, theta: 0.1, sigma2: 1.0, ..cox_a() };
        let r = validate_cox(&p);
        assert!(r.is_valid());
        assert_eq!(r.feller_ok, Some(false)); // 0.2 < 1
        assert!(!r.warnings.is_empty());
    }

    fn hawkes(kappa: f64, eta: f64) -> HawkesParams {
        HawkesParams {
            mu: 0.05,
            sigma1: 0.2,
            kappa,
            theta: 0.5,
            eta,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 2.0,
        }
    }

    #[test]
    fn hawkes_flags() {
        let r = validate_hawkes(&hawkes(1.0, 0.5));
        assert_eq!((r.stable, r.closed_form_ok), (Some(true), Some(true)));
        // 0.65 < ln 2 ~ 0.6931
        let r = validate_hawkes(&hawkes(1.0, 0.65));
        assert_eq!((r.stable, r.closed_form_ok), (Some(true), Some(true)));
        let r = validate_hawkes(&hawkes(1.0, 1.2));
        assert_eq!((r.stable, r.closed_form_ok), (Some(false), Some(false)));
        assert!(r.is_valid()); // simulation still allowed
    }

    #[test]
    fn mu_bar_single_atom() {
        let spec = JumpSpec {
            atoms: vec![(1.0, 1.0)],
            jump_fn: JumpFn::LinearInMark(0.1),
        };
        assert!((spec.mu_bar(0.0) - 0.1051709).abs() < 1e-6);
    }

    #[test]
    fn mu_bar_zero_jump() {
        let spec = JumpSpec {
            atoms: vec![(1.0, 1.0), (2.0, 3.0)],
            jump_fn: JumpFn::Const(0.0),
        };
        assert_eq!(spec.mu_bar(0.5), 0.0);
    }

    #[test]
    fn mu_bar_two_sided() {
        let spec = JumpSpec {
            atoms: vec![(1.0, 0.5), (-1.0, 0.5)],
            jump_fn: JumpFn::LinearInMark(1.0),
        };
        let expect = 0.5 * (1f64.exp() - 1.0) + 0.5 * ((-1f64).exp() - 1.0);
        assert!((spec.mu_bar(0.0) - expect).abs() < 1e-12);
        assert!((expect - 0.5431).abs() < 1e-4);
    }

    #[test]
    fn atom_at_zero_rejected() {
        let spec = JumpSpec { atoms: vec![(0.0, 1.0)], jump_fn: JumpFn::Const(0.1) };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn grid_nodes() {
        let g = SimGrid::new(4, 1.0).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(4), 1.0);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.cell_of(0.26), 1);
        assert_eq!(g.cell_of(1.0), 3);
    }
}
