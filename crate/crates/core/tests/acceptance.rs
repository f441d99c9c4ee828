//! End-to-end acceptance suite. Runs every criterion in order and prints one
//! pass/fail line each; the process exits nonzero if any asserted criterion
//! fails. Criterion 11 is a diagnostic report and never fails.
//!
//! Reference configurations used throughout:
//!   COX-A:    mu=0.05 sigma1=0.2 kappa=2 theta=1 sigma2=0.5 lambda0=0.5
//!             T=1, atoms {(1, 0.7), (2, 0.3)}, J = 0.1
//!   HAWKES-A: mu=0.05 sigma1=0.2 kappa=1 theta=0.5 eta=0.5 lambda0=0.5
//!             T=2, atoms {(1, 1)}, J = 0.3
//!
//! The driftless Brownian cases set mu = sigma1^2/2 so that the log-price
//! X = mu t - sigma1^2 t / 2 + sigma1 W has zero drift.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use runmax::clark_ocone::{
    BrownianMode, CoSettings, JumpMode, SignConvention, bootstrap_var_nonincreasing,
    estimate_ef, reconstruct,
};
use runmax::first_passage::{
    AlphaConstants, Dynamics, ExitTimeQuery, StateSnapshot, alpha_constants_cox,
    alpha_constants_hawkes, bar_f_cox, dynkin_martingale_check, hawkes_identity_max_error,
    mc_first_passage, tail_sup_x_hawkes,
};
use runmax::laplace::{Method, NamedTransform};
use runmax::malliavin::{d2_from_perturbed, d2_max_cox, d2_max_hawkes};
use runmax::model::{CoxParams, HawkesParams, JumpFn, JumpSpec, SimGrid};
use runmax::rng::StreamFamily;

const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
const BM_CROSS_1: f64 = 0.31731050786291415; // 2 (1 - Phi(1))

fn cox_a() -> (CoxParams, JumpSpec) {
    (
        CoxParams {
            mu: 0.05,
            sigma1: 0.2,
            kappa: 2.0,
            theta: 1.0,
            sigma2: 0.5,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 1.0,
        },
        JumpSpec { atoms: vec![(1.0, 0.7), (2.0, 0.3)], jump_fn: JumpFn::Const(0.1) },
    )
}

fn hawkes_a() -> (HawkesParams, JumpSpec) {
    (
        HawkesParams {
            mu: 0.05,
            sigma1: 0.2,
            kappa: 1.0,
            theta: 0.5,
            eta: 0.5,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 2.0,
        },
        JumpSpec { atoms: vec![(1.0, 1.0)], jump_fn: JumpFn::Const(0.3) },
    )
}

/// Pure-diffusion stand-in: Cox dynamics with the jump measure switched off.
/// mu = sigma1^2 / 2 cancels the Ito drift of the log-price.
fn brownian() -> (CoxParams, JumpSpec) {
    (
        CoxParams {
            mu: 0.5,
            sigma1: 1.0,
            kappa: 2.0,
            theta: 1.0,
            sigma2: 0.5,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 1.0,
        },
        JumpSpec::none(),
    )
}

struct Suite {
    failed: bool,
}

impl Suite {
    fn report(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed = true;
        }
    }
}

// 1. E[M_T] for the driftless Brownian case vs sqrt(2/pi), 1e5 paths,
//    dt = 2^-8, under two minutes.
fn criterion_1(s: &mut Suite) {
    let start = Instant::now();
    let (p, spec) = brownian();
    let grid = SimGrid::new(256, 1.0).unwrap();
    let (mean, se) = estimate_ef(Dynamics::Cox(&p), &spec, &grid, 100_000, 11, true);
    let elapsed = start.elapsed().as_secs_f64();
    let diff = (mean - SQRT_2_OVER_PI).abs();
    s.report(
        1,
        diff <= 3.0 * se && elapsed < 120.0,
        format!(
            "E[M_T] = {mean:.6} vs {SQRT_2_OVER_PI:.6}, |diff| = {diff:.2e} <= 3 SE = {:.2e}, {elapsed:.1}s",
            3.0 * se
        ),
    );
}

// 2. Clark-Ocone reconstruction with the closed Brownian integrand
//    sigma1 (1 - 2 Phi((M_t - X_t)/(sigma1 sqrt(T-t)))) at 1e4 paths.
fn criterion_2(s: &mut Suite) {
    let (p, spec) = brownian();
    let grid = SimGrid::new(256, 1.0).unwrap();
    let settings = CoSettings {
        n_outer: 10_000,
        n_inner: 0,
        seed: 23,
        brownian_mode: BrownianMode::Closed,
        jump_mode: JumpMode::ClosedForm,
        sign: SignConvention::Theorem,
        clamp: false,
    };
    let rep = reconstruct(Dynamics::Cox(&p), &spec, &grid, &settings, None).unwrap();
    // F-hat carries the E[F] estimate as a shared constant, so the SE of the
    // mean residual combines the cross-path spread with the E[F] SE.
    let se = (rep.residual_se * rep.residual_se + rep.ef_se * rep.ef_se).sqrt();
    s.report(
        2,
        rep.correlation >= 0.99 && rep.residual_mean.abs() <= 3.0 * se,
        format!(
            "corr = {:.4} >= 0.99, |mean residual| = {:.2e} <= 3 SE = {:.2e}",
            rep.correlation,
            rep.residual_mean.abs(),
            3.0 * se
        ),
    );
}

// 3. Nested-MC reconstruction for Cox and Hawkes (inner = 256): zero-mean
//    residual and bootstrap-95% non-increasing residual variance from
//    dt = 2^-6 to 2^-7.
fn criterion_3(s: &mut Suite) {
    let run = |dynamics: Dynamics,
               spec: &JumpSpec,
               consts: &AlphaConstants,
               n_steps: usize,
               horizon: f64,
               n_outer: usize,
               clamp: bool| {
        let grid = SimGrid::new(n_steps, horizon).unwrap();
        let settings = CoSettings {
            n_outer,
            n_inner: 256,
            seed: 31,
            brownian_mode: BrownianMode::NestedMc,
            jump_mode: JumpMode::NestedMc,
            sign: SignConvention::Theorem,
            clamp,
        };
        reconstruct(dynamics, spec, &grid, &settings, Some(consts)).unwrap()
    };

    let (cp, cspec) = cox_a();
    let cc = alpha_constants_cox(&cp, &cspec, None).unwrap();
    let cox_coarse = run(Dynamics::Cox(&cp), &cspec, &cc, 64, 1.0, 96, true);
    let cox_fine = run(Dynamics::Cox(&cp), &cspec, &cc, 128, 1.0, 96, true);

    let (hp, hspec) = hawkes_a();
    let hc = alpha_constants_hawkes(&hp, &hspec).unwrap();
    let hawkes_coarse = run(Dynamics::Hawkes(&hp), &hspec, &hc, 128, 2.0, 64, false);
    let hawkes_fine = run(Dynamics::Hawkes(&hp), &hspec, &hc, 256, 2.0, 64, false);

    // As in criterion 2: the E[F] estimate is a shared constant in every
    // residual, so its SE belongs in the mean-residual uncertainty.
    let zero_mean = |r: &runmax::clark_ocone::ClarkOconeReport| {
        r.residual_mean.abs()
            <= 3.0 * (r.residual_se * r.residual_se + r.ef_se * r.ef_se).sqrt()
    };
    let cox_var_ok =
        bootstrap_var_nonincreasing(&cox_fine.residuals(), &cox_coarse.residuals(), 1000, 5);
    let hawkes_var_ok = bootstrap_var_nonincreasing(
        &hawkes_fine.residuals(),
        &hawkes_coarse.residuals(),
        1000,
        5,
    );
    let pass = zero_mean(&cox_coarse)
        && zero_mean(&cox_fine)
        && zero_mean(&hawkes_coarse)
        && zero_mean(&hawkes_fine)
        && cox_var_ok
        && hawkes_var_ok;
    s.report(
        3,
        pass,
        format!(
            "Cox residual mean {:.3e} (3 SE {:.3e}), var {:.3e} -> {:.3e} (bootstrap ok: {cox_var_ok}); \
             Hawkes residual mean {:.3e} (3 SE {:.3e}), var {:.3e} -> {:.3e} (bootstrap ok: {hawkes_var_ok})",
            cox_fine.residual_mean,
            3.0 * (cox_fine.residual_se * cox_fine.residual_se
                + cox_fine.ef_se * cox_fine.ef_se)
                .sqrt(),
            cox_coarse.residual_var,
            cox_fine.residual_var,
            hawkes_fine.residual_mean,
            3.0 * (hawkes_fine.residual_se * hawkes_fine.residual_se
                + hawkes_fine.ef_se * hawkes_fine.ef_se)
                .sqrt(),
            hawkes_coarse.residual_var,
            hawkes_fine.residual_var,
        ),
    );
}

// 4. Intensity means vs the ODE solutions:
//    CIR:    E lambda_t = theta + (lambda0 - theta) e^{-kappa t}
//    Hawkes: E lambda_t = a + (lambda0 - a) e^{-(kappa - eta) t},
//            a = kappa theta / (kappa - eta)
fn criterion_4(s: &mut Suite) {
    let mean_lambda_t = |dynamics: Dynamics, spec: &JumpSpec, horizon: f64| {
        let grid = SimGrid::new(256, horizon).unwrap();
        let n = grid.n_steps;
        let vals: Vec<f64> = (0..100_000u64)
            .map(|i| {
                let fam = StreamFamily::new(17, i);
                dynamics.simulate(spec, &grid, &fam).lambda[n]
            })
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (vals.len() - 1) as f64;
        (m, (var / vals.len() as f64).sqrt())
    };

    let (cp, cspec) = cox_a();
    let cox_ref = cp.theta + (cp.lambda0 - cp.theta) * (-cp.kappa * cp.horizon).exp();
    let (cm, cse) = mean_lambda_t(Dynamics::Cox(&cp), &cspec, cp.horizon);

    let (hp, hspec) = hawkes_a();
    let a = hp.kappa * hp.theta / (hp.kappa - hp.eta);
    let hawkes_ref = a + (hp.lambda0 - a) * (-(hp.kappa - hp.eta) * hp.horizon).exp();
    let (hm, hse) = mean_lambda_t(Dynamics::Hawkes(&hp), &hspec, hp.horizon);

    let cox_ok = (cm - cox_ref).abs() <= 3.0 * cse;
    let hawkes_ok = (hm - hawkes_ref).abs() <= 3.0 * hse;
    s.report(
        4,
        cox_ok && hawkes_ok,
        format!(
            "CIR mean {cm:.6} vs {cox_ref:.6} (3 SE {:.2e}); Hawkes mean {hm:.6} vs {hawkes_ref:.6} (3 SE {:.2e})",
            3.0 * cse,
            3.0 * hse
        ),
    );
}

// 5. Defining identities of the tilt constants over 1000 random valid draws:
//    Hawkes: exp(alpha1 J + alpha2 eta) - (alpha2 kappa + 1) = 0
//    Cox:    sigma2^2 alpha2^2 / 2 - kappa alpha2 = kappa theta alpha2
fn criterion_5(s: &mut Suite) {
    let hawkes_err = hawkes_identity_max_error(1000, 7);

    let mut rng = StdRng::seed_from_u64(7);
    let mut cox_err: f64 = 0.0;
    for _ in 0..1000 {
        let kappa = 0.2 + 3.0 * rng.random::<f64>();
        let theta = 0.1 + 2.0 * rng.random::<f64>();
        // Feller: 2 kappa theta > sigma2^2.
        let sigma2 = (2.0 * kappa * theta).sqrt() * (0.2 + 0.7 * rng.random::<f64>());
        let p = CoxParams {
            mu: 0.05,
            sigma1: 0.2,
            kappa,
            theta,
            sigma2,
            lambda0: 0.5,
            s0: 1.0,
            horizon: 1.0,
        };
        let spec = JumpSpec { atoms: vec![(1.0, 1.0)], jump_fn: JumpFn::Const(0.1) };
        let c = alpha_constants_cox(&p, &spec, None).unwrap();
        let lhs = 0.5 * sigma2 * sigma2 * c.alpha2 * c.alpha2 - kappa * c.alpha2;
        let rhs = kappa * theta * c.alpha2;
        cox_err = cox_err.max(((lhs - rhs) / rhs).abs());
    }
    s.report(
        5,
        hawkes_err <= 1e-12 && cox_err <= 1e-12,
        format!("Hawkes identity max err {hawkes_err:.2e}, Cox drift identity max err {cox_err:.2e} (tol 1e-12)"),
    );
}

// 6. Inverse Laplace on the analytic pairs, both methods, rel err <= 1e-6.
fn criterion_6(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    for tf in [
        NamedTransform::OneOverS,
        NamedTransform::OneOverSPlusOne,
        NamedTransform::OneOverSSquared,
    ] {
        for method in [Method::GaverStehfest, Method::Talbot] {
            for t in [0.5, 1.0, 2.0] {
                let got = tf.invert(t, method, 0).unwrap();
                let rel = ((got - tf.exact(t)) / tf.exact(t)).abs();
                worst = worst.max(rel);
                all_ok &= rel <= 1e-6;
            }
        }
    }
    s.report(6, all_ok, format!("worst relative error {worst:.2e} (tol 1e-6)"));
}

// 7. Dynkin martingale check for HAWKES-A: the stopped tilted exponential
//    keeps its initial expectation at every checkpoint, 1e5 paths.
fn criterion_7(s: &mut Suite) {
    let (hp, hspec) = hawkes_a();
    let consts = alpha_constants_hawkes(&hp, &hspec).unwrap();
    let grid = SimGrid::new(256, hp.horizon).unwrap();
    let rep = dynkin_martingale_check(
        Dynamics::Hawkes(&hp),
        &hspec,
        &consts,
        0.2,
        2.0,
        &grid,
        &[0.5, 1.0, 1.5, 2.0],
        100_000,
        13,
    );
    s.report(
        7,
        rep.max_deviation <= 3.0 * rep.max_deviation_se,
        format!(
            "u0 = {:.6}, max checkpoint deviation {:.2e} <= 3 SE = {:.2e}",
            rep.u0,
            rep.max_deviation,
            3.0 * rep.max_deviation_se
        ),
    );
}

// 8. D2 formulas equal brute-force perturb-and-rescan, float-exact, on 1000
//    random discrete paths (500 Cox, 500 Hawkes).
fn criterion_8(s: &mut Suite) {
    let mut rng = StdRng::seed_from_u64(29);
    let n = 32usize;
    let grid = SimGrid::new(n, 1.0).unwrap();
    let scan = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mismatches = 0usize;

    for i in 0..500u64 {
        let kappa = 0.5 + 2.5 * rng.random::<f64>();
        let theta = 0.3 + 1.2 * rng.random::<f64>();
        let sigma2 = (2.0 * kappa * theta).sqrt() * (0.2 + 0.6 * rng.random::<f64>());
        let p = CoxParams {
            mu: -0.2 + 0.4 * rng.random::<f64>(),
            sigma1: 0.1 + 0.4 * rng.random::<f64>(),
            kappa,
            theta,
            sigma2,
            lambda0: 0.2 + 1.3 * rng.random::<f64>(),
            s0: 1.0,
            horizon: 1.0,
        };
        let j = -0.3 + 0.6 * rng.random::<f64>();
        let spec = JumpSpec { atoms: vec![(1.0, 0.6), (2.0, 0.4)], jump_fn: JumpFn::Const(j) };
        let fam = StreamFamily::new(1000 + i, 0);
        let path = Dynamics::Cox(&p).simulate(&spec, &grid, &fam);
        let t_idx = rng.random_range(0..=n);
        let z = spec.atoms[rng.random_range(0..spec.atoms.len())].0;

        let formula = d2_max_cox(&spec, &path, t_idx, z);
        let head = scan(&path.x[..=t_idx]);
        let tail = scan(&path.x[t_idx..]) + spec.jump_fn.eval(z);
        let brute = head.max(tail) - scan(&path.x);
        if formula.to_bits() != brute.to_bits() {
            mismatches += 1;
        }
    }

    for i in 0..500u64 {
        let kappa = 0.5 + 2.5 * rng.random::<f64>();
        let eta = 0.9 * kappa * std::f64::consts::LN_2 * rng.random::<f64>();
        let p = HawkesParams {
            mu: -0.2 + 0.4 * rng.random::<f64>(),
            sigma1: 0.1 + 0.4 * rng.random::<f64>(),
            kappa,
            theta: 0.3 + 1.2 * rng.random::<f64>(),
            eta,
            lambda0: 0.2 + 1.3 * rng.random::<f64>(),
            s0: 1.0,
            horizon: 1.0,
        };
        let spec = JumpSpec {
            atoms: vec![(1.0, 1.0)],
            jump_fn: JumpFn::Const(-0.3 + 0.6 * rng.random::<f64>()),
        };
        let fam = StreamFamily::new(2000 + i, 0);
        let path = Dynamics::Hawkes(&p).simulate(&spec, &grid, &fam);
        let t_idx = rng.random_range(0..n);
        // Marks both on and off the live strip (0, lambda_t].
        let z = 2.0 * path.lambda[t_idx] * rng.random::<f64>();

        let (formula, pert) = d2_max_hawkes(&p, &spec, &path, t_idx, z).unwrap();
        let head = scan(&path.x[..=t_idx]);
        let tail = scan(&pert.z_path[t_idx..]) + pert.k;
        let brute = head.max(tail) - scan(&path.x);
        if formula.to_bits() != brute.to_bits()
            || d2_from_perturbed(&path, &pert).to_bits() != brute.to_bits()
        {
            mismatches += 1;
        }
    }
    s.report(8, mismatches == 0, format!("{mismatches} mismatches over 1000 random paths"));
}

// 9. First-passage of pure BM at b = 1 over [0, 1] vs 2 (1 - Phi(1)).
fn criterion_9(s: &mut Suite) {
    let (p, spec) = brownian();
    let grid = SimGrid::new(256, 1.0).unwrap();
    let est = mc_first_passage(Dynamics::Cox(&p), &spec, 1.0, 0.0, &grid, 100_000, 19);
    let diff = (est.prob - BM_CROSS_1).abs();
    s.report(
        9,
        diff <= 3.0 * est.se,
        format!(
            "P(sup X >= 1) = {:.6} vs {BM_CROSS_1:.6}, |diff| = {diff:.2e} <= 3 SE = {:.2e}",
            est.prob,
            3.0 * est.se
        ),
    );
}

// 10. verify-clark-ocone through the CLI with 1 vs 8 rayon workers produces
//     byte-identical CSVs.
fn criterion_10(s: &mut Suite) {
    let bin = env!("CARGO_BIN_EXE_runmax");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("hawkes_small.toml");
    std::fs::write(
        &config,
        "model = \"hawkes\"\nmu = 0.05\nsigma1 = 0.2\nkappa = 1.0\ntheta = 0.5\n\
         eta = 0.5\nlambda0 = 0.5\ns0 = 1.0\nT = 0.5\nnu_atoms = [[1.0, 1.0]]\n\
         [jump]\nkind = \"const\"\nvalue = 0.3\n[grid]\nn_steps = 16\n[rng]\nseed = 42\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        std::fs::create_dir(&out).unwrap();
        let status = Command::new(bin)
            .args(["verify-clark-ocone", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--paths", "32", "--inner", "16"])
            .env("RAYON_NUM_THREADS", workers)
            .status()
            .unwrap();
        assert!(status.success(), "CLI run with {workers} workers failed");
        outputs.push(std::fs::read(out.join("clark_ocone.csv")).unwrap());
    }
    s.report(
        10,
        outputs[0] == outputs[1],
        format!(
            "clark_ocone.csv identical across 1 vs 8 workers ({} bytes)",
            outputs[0].len()
        ),
    );
}

// 11. Diagnostic: closed-form tails vs the MC oracle on a threshold grid at
//     two horizons. The closed forms carry no T-dependence beyond the
//     inversion factor; the MC columns at T/2 vs T surface that discrepancy.
//     Reported, not asserted.
fn criterion_11(s: &mut Suite) {
    println!("  model  b     e     horizon  closed    mc        mc_se");
    let mc_paths = 10_000;

    let (cp, cspec) = cox_a();
    let cc = alpha_constants_cox(&cp, &cspec, None).unwrap();
    for &b in &[0.2, 0.4, 0.6] {
        for &e in &[1.0, 1.5] {
            for &h in &[0.5, 1.0] {
                let q = ExitTimeQuery {
                    t: 0.0,
                    horizon: h,
                    b,
                    e,
                    state: StateSnapshot { x: 0.0, lambda: cp.lambda0, m: 0.0 },
                };
                let closed = bar_f_cox(&q, &cc).unwrap();
                let grid = SimGrid::new(128, h).unwrap();
                let mc =
                    mc_first_passage(Dynamics::Cox(&cp), &cspec, b, e, &grid, mc_paths, 37);
                println!(
                    "  cox    {b:<5} {e:<5} {h:<8} {:<9.6} {:<9.6} {:.1e}",
                    closed.value, mc.prob, mc.se
                );
            }
        }
    }

    let (hp, hspec) = hawkes_a();
    let hc = alpha_constants_hawkes(&hp, &hspec).unwrap();
    for &b in &[0.2, 0.4, 0.6] {
        for &h in &[1.0, 2.0] {
            let q = ExitTimeQuery {
                t: 0.0,
                horizon: h,
                b,
                e: f64::INFINITY,
                state: StateSnapshot { x: 0.0, lambda: hp.lambda0, m: 0.0 },
            };
            let closed = tail_sup_x_hawkes(&q, &hc).unwrap();
            let grid = SimGrid::new(128, h).unwrap();
            let mc = mc_first_passage(Dynamics::Hawkes(&hp), &hspec, b, 0.0, &grid, mc_paths, 37);
            println!(
                "  hawkes {b:<5} -     {h:<8} {:<9.6} {:<9.6} {:.1e}",
                closed.value, mc.prob, mc.se
            );
        }
    }
    s.report(
        11,
        true,
        "diagnostic only: closed-form tails are horizon-independent bounds; \
         the MC columns at the two horizons quantify the gap"
            .to_string(),
    );
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: false };
    let start = Instant::now();
    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criterion_6(&mut suite);
    criterion_7(&mut suite);
    criterion_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    criterion_11(&mut suite);
    println!("acceptance suite finished in {:.1}s", start.elapsed().as_secs_f64());
    if suite.failed { ExitCode::FAILURE } else { ExitCode::SUCCESS }
}
