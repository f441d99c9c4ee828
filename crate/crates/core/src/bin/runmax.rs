//! Command-line front end: simulation, pricing, Clark-Ocone verification,
//! first-passage diagnostics, Laplace inversion, and constants.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use runmax::clark_ocone::{
    BrownianMode, ClarkOconeReport, CoSettings, JumpMode, SignConvention, reconstruct,
};
use runmax::config::LoadedConfig;
use runmax::error::Error;
use runmax::first_passage::{
    AlphaConstants, Dynamics, ExitTimeQuery, StateSnapshot, alpha_constants_cox,
    alpha_constants_hawkes, bar_f_cox, mc_first_passage, tail_sup_x_hawkes,
};
use runmax::laplace::{Method, NamedTransform};
use runmax::model::ModelKind;
use runmax::pricing::{Payoff, price_lookback};
use runmax::report::{fmt_f64, write_csv, write_json};
use runmax::rng::StreamFamily;

#[derive(Parser)]
#[command(name = "runmax", version, about = "Running-maximum toolkit for jump models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Outer Monte Carlo path count.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gaver,
    Talbot,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Closed,
    Nested,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Theorem,
    Raw,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate paths and write per-path summaries.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Price a lookback option by Monte Carlo.
    Price {
        #[command(flatten)]
        common: Common,
        /// Fixed strike K for (e^{M_T} - K)^+; floating strike if absent.
        #[arg(long)]
        strike: Option<f64>,
        /// Discount rate override (defaults to mu).
        #[arg(long)]
        discount: Option<f64>,
    },
    /// Reconstruct F via Clark-Ocone and report residual statistics.
    VerifyClarkOcone {
        #[command(flatten)]
        common: Common,
        /// Inner branch count for nested conditional expectations.
        #[arg(long, default_value_t = 256)]
        inner: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Nested)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = SignArg::Theorem)]
        sign: SignArg,
        /// Clamp the intensity at the floor instead of erroring.
        #[arg(long)]
        clamp: bool,
    },
    /// Closed-form first-passage tails vs the Monte Carlo oracle.
    FirstPassage {
        #[command(flatten)]
        common: Common,
        /// Comma-separated log-price thresholds (relative to X_0).
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5")]
        b: String,
        /// Comma-separated intensity thresholds; empty disables the joint
        /// constraint.
        #[arg(long, default_value = "")]
        e: String,
    },
    /// Invert a named Laplace transform at a given time.
    InvertLaplace {
        #[arg(long = "fn")]
        name: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Gaver)]
        method: MethodArg,
        /// 0 selects the engine default.
        #[arg(long, default_value_t = 0)]
        order: usize,
    },
    /// Print the exponential-tilt constants for the configured model.
    Constants {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Io(_) | Error::Csv(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn load(common: &Common) -> runmax::Result<(LoadedConfig, u64)> {
    let cfg = LoadedConfig::from_path(&common.config)?;
    cfg.run.validate()?;
    let seed = common.seed.unwrap_or(cfg.run.rng.seed);
    Ok((cfg, seed))
}

fn run(cli: Cli) -> runmax::Result<()> {
    match cli.cmd {
        Cmd::Simulate { common } => simulate(&common),
        Cmd::Price { common, strike, discount } => price(&common, strike, discount),
        Cmd::VerifyClarkOcone { common, inner, mode, sign, clamp } => {
            verify_clark_ocone(&common, inner, mode, sign, clamp)
        }
        Cmd::FirstPassage { common, b, e } => first_passage(&common, &b, &e),
        Cmd::InvertLaplace { name, t, method, order } => invert_laplace(&name, t, method, order),
        Cmd::Constants { config } => constants(&config),
    }
}

fn simulate(common: &Common) -> runmax::Result<()> {
    let (cfg, seed) = load(common)?;
    let (mut cox, mut hawkes) = (None, None);
    let dynamics = cfg.dynamics(&mut cox, &mut hawkes)?;
    let spec = cfg.run.jump_spec()?;
    let grid = cfg.run.sim_grid()?;
    let mut rows = Vec::with_capacity(common.paths);
    let mut sum = 0.0;
    for i in 0..common.paths {
        let fam = StreamFamily::new(seed, i as u64);
        let p = dynamics.simulate(&spec, &grid, &fam);
        sum += p.m_cont;
        rows.push(vec![
            i.to_string(),
            fmt_f64(p.max_over_nodes()),
            fmt_f64(p.m_cont),
            fmt_f64(p.x[grid.n_steps]),
            fmt_f64(p.lambda[grid.n_steps]),
            fmt_f64(grid.time(p.tau_idx)),
            p.events.iter().filter(|e| e.accepted).count().to_string(),
        ]);
    }
    println!("simulated {} paths; mean continuous max = {}", common.paths, sum / common.paths as f64);
    if let Some(out) = &common.out {
        write_csv(
            &out.join("paths.csv"),
            &cfg.hash,
            &["path_id", "m_nodes", "m_cont", "x_T", "lambda_T", "tau", "n_events"],
            &rows,
        )?;
    }
    Ok(())
}

fn price(common: &Common, strike: Option<f64>, discount: Option<f64>) -> runmax::Result<()> {
    let (cfg, seed) = load(common)?;
    let (mut cox, mut hawkes) = (None, None);
    let dynamics = cfg.dynamics(&mut cox, &mut hawkes)?;
    let spec = cfg.run.jump_spec()?;
    let grid = cfg.run.sim_grid()?;
    let payoff = match strike {
        Some(k) => Payoff::FixedStrike { strike: k },
        None => Payoff::FloatingStrike,
    };
    let res = price_lookback(dynamics, &spec, &grid, payoff, discount, common.paths, seed);
    println!(
        "price = {} +- {} (discount {}, {} paths)",
        res.price, res.se, res.discount_rate, res.n_paths
    );
    if let Some(out) = &common.out {
        write_json(
            &out.join("price.json"),
            &cfg.hash,
            serde_json::json!({
                "price": res.price,
                "se": res.se,
                "payoff": match payoff {
                    Payoff::FixedStrike { strike } => format!("fixed:{strike}"),
                    Payoff::FloatingStrike => "floating".to_string(),
                },
                "discount_rate": res.discount_rate,
                "n_paths": res.n_paths,
            }),
        )?;
    }
    Ok(())
}

fn co_report_files(
    cfg: &LoadedConfig,
    out: &std::path::Path,
    report: &ClarkOconeReport,
) -> runmax::Result<()> {
    let rows: Vec<Vec<String>> = report
        .f
        .iter()
        .zip(&report.f_hat)
        .enumerate()
        .map(|(i, (f, fh))| {
            vec![i.to_string(), fmt_f64(*f), fmt_f64(*fh), fmt_f64(f - fh)]
        })
        .collect();
    write_csv(
        &out.join("clark_ocone.csv"),
        &cfg.hash,
        &["path_id", "F", "F_hat", "residual"],
        &rows,
    )?;
    write_json(
        &out.join("clark_ocone_summary.json"),
        &cfg.hash,
        serde_json::json!({
            "ef_hat": report.ef_hat,
            "ef_se": report.ef_se,
            "residual_mean": report.residual_mean,
            "residual_se": report.residual_se,
            "residual_var": report.residual_var,
            "correlation": report.correlation,
            "n_outer": report.n_outer,
            "n_inner": report.n_inner,
            "rng_streams": report.rng_streams,
        }),
    )
}

fn verify_clark_ocone(
    common: &Common,
    inner: usize,
    mode: ModeArg,
    sign: SignArg,
    clamp: bool,
) -> runmax::Result<()> {
    let (cfg, seed) = load(common)?;
    let (mut cox, mut hawkes) = (None, None);
    let dynamics = cfg.dynamics(&mut cox, &mut hawkes)?;
    let spec = cfg.run.jump_spec()?;
    let grid = cfg.run.sim_grid()?;
    let (brownian_mode, jump_mode) = match mode {
        ModeArg::Closed => (BrownianMode::Closed, JumpMode::ClosedForm),
        // `both` keeps nested integrands but also needs the constants, so
        // closed values land in the summary via the consts path.
        ModeArg::Nested | ModeArg::Both => (BrownianMode::NestedMc, JumpMode::NestedMc),
    };
    let consts = constants_for(&cfg, dynamics).ok();
    let settings = CoSettings {
        n_outer: common.paths,
        n_inner: inner,
        seed,
        brownian_mode,
        jump_mode,
        sign: match sign {
            SignArg::Theorem => SignConvention::Theorem,
            SignArg::Raw => SignConvention::Raw,
        },
        clamp,
    };
    let report = reconstruct(dynamics, &spec, &grid, &settings, consts.as_ref())?;
    println!(
        "ef_hat = {} +- {}; residual mean {} (se {}), var {}, corr {}",
        report.ef_hat,
        report.ef_se,
        report.residual_mean,
        report.residual_se,
        report.residual_var,
        report.correlation
    );
    if let Some(out) = &common.out {
        co_report_files(&cfg, out, &report)?;
    }
    Ok(())
}

fn constants_for(cfg: &LoadedConfig, dynamics: Dynamics) -> runmax::Result<AlphaConstants> {
    let spec = cfg.run.jump_spec()?;
    match dynamics {
        Dynamics::Cox(p) => alpha_constants_cox(p, &spec, cfg.run.alpha1),
        Dynamics::Hawkes(p) => alpha_constants_hawkes(p, &spec),
    }
}

fn parse_list(s: &str) -> runmax::Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad threshold '{p}': {e}")))
        })
        .collect()
}

fn first_passage(common: &Common, b_list: &str, e_list: &str) -> runmax::Result<()> {
    let (cfg, seed) = load(common)?;
    let (mut cox, mut hawkes) = (None, None);
    let dynamics = cfg.dynamics(&mut cox, &mut hawkes)?;
    let spec = cfg.run.jump_spec()?;
    let grid = cfg.run.sim_grid()?;
    let consts = constants_for(&cfg, dynamics)?;
    let bs = parse_list(b_list)?;
    let es = {
        let parsed = parse_list(e_list)?;
        if parsed.is_empty() { vec![f64::NEG_INFINITY] } else { parsed }
    };
    let x0 = cfg.run.s0.ln();
    let lam0 = cfg.run.lambda0;

    // Two horizons per threshold pair: the closed forms cannot see the
    // horizon (their Laplace factor is identically 1), the MC oracle can.
    // The discrepancy column is the diagnostic.
    let mut rows = Vec::new();
    for &b_rel in &bs {
        for &e in &es {
            for horizon in [0.5 * grid.horizon, grid.horizon] {
                let sub = runmax::model::SimGrid::new(
                    (grid.n_steps / 2).max(1),
                    horizon,
                )?;
                let b = x0 + b_rel;
                let q = ExitTimeQuery {
                    t: 0.0,
                    horizon,
                    b,
                    e,
                    state: StateSnapshot { x: x0, lambda: lam0, m: x0 },
                };
                let closed = match cfg.run.model_kind()? {
                    ModelKind::Cox => bar_f_cox(&q, &consts)?,
                    ModelKind::Hawkes => tail_sup_x_hawkes(&q, &consts)?,
                };
                let mc = mc_first_passage(dynamics, &spec, b, e, &sub, common.paths, seed);
                rows.push(vec![
                    fmt_f64(b_rel),
                    fmt_f64(e),
                    fmt_f64(horizon),
                    fmt_f64(closed.value),
                    fmt_f64(mc.prob),
                    fmt_f64(mc.se),
                    closed.clamped.to_string(),
                    fmt_f64(mc.prob - closed.value),
                ]);
            }
        }
    }
    println!(
        "{} threshold/horizon combinations evaluated ({} MC paths each)",
        rows.len(),
        common.paths
    );
    if let Some(out) = &common.out {
        write_csv(
            &out.join("first_passage.csv"),
            &cfg.hash,
            &[
                "threshold_b",
                "threshold_e",
                "horizon",
                "closed_form",
                "mc_estimate",
                "mc_se",
                "clamped",
                "mc_minus_closed",
            ],
            &rows,
        )?;
    }
    Ok(())
}

fn invert_laplace(name: &str, t: f64, method: MethodArg, order: usize) -> runmax::Result<()> {
    let tf = NamedTransform::parse(name)
        .ok_or_else(|| Error::Config(format!("unknown transform '{name}'")))?;
    let m = match method {
        MethodArg::Gaver => Method::GaverStehfest,
        MethodArg::Talbot => Method::Talbot,
    };
    let v = tf.invert(t, m, order)?;
    println!("{v}");
    Ok(())
}

fn constants(config: &PathBuf) -> runmax::Result<()> {
    let cfg = LoadedConfig::from_path(config)?;
    cfg.run.validate()?;
    let (mut cox, mut hawkes) = (None, None);
    let dynamics = cfg.dynamics(&mut cox, &mut hawkes)?;
    let c = constants_for(&cfg, dynamics)?;
    println!("alpha1 = {}", c.alpha1);
    println!("alpha2 = {}", c.alpha2);
    if let Some(a3) = c.alpha3 {
        println!("alpha3 = {a3}");
    }
    println!("alpha  = {}", c.alpha);
    Ok(())
}
