use std::fs;
use std::path::{Path, PathBuf};

use gilbert_core::cartography::{
    dest_dynamics, dest_series, run_chart, volumetry, witness_seed, write_dynamics_csv, write_json,
    ChartSpec, DynamicsPoint,
};
use gilbert_core::estimators::{estimate, DEFAULT_RESTARTS};
use gilbert_core::gilbert::{run_gilbert, CorrectionTrace, GilbertConfig, TraceJson};
use gilbert_core::simplex::{
    bell_diag, family_a, family_b, family_b1, family_b2, family_b3, FamilyPoint, SimplexCoords,
    SimplexSampler,
};
use gilbert_core::{DensityMatrix, Error, RngSeed, RngStream};
use serde::Serialize;

use crate::args::{CommonArgs, FamilyArg, SamplerArg, StateArgs};
use crate::exit::Failure;

type CmdResult = Result<(), Failure>;

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    config_path: Option<PathBuf>,
    output_dir: PathBuf,
    master_seed: RngSeed,
    tool_version: String,
}

/// Refuses a non-empty output directory unless `--force` is given. Nothing
/// is created here; directories appear only once results are ready.
fn check_output(common: &CommonArgs) -> CmdResult {
    let dir = &common.output;
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Failure::usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?
            .next()
            .is_some();
        if non_empty && !common.force {
            return Err(Failure::usage(format!(
                "output directory {} is not empty (use --force to write into it)",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn create_output(common: &CommonArgs, command: &str, seed: RngSeed) -> CmdResult {
    fs::create_dir_all(&common.output)
        .map_err(|e| Failure::usage(format!("{}: {e}", common.output.display())))?;
    let manifest = RunManifest {
        command: command.to_string(),
        config_path: common.config.clone(),
        output_dir: common.output.clone(),
        master_seed: seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&common.output.join("manifest.json"), &manifest).map_err(Failure::from)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("malformed {what} {}: {e}", path.display())))
}

/// Defaults, then `--config`, then individual flags.
fn resolve_config(base: GilbertConfig, common: &CommonArgs) -> Result<GilbertConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => read_json(path, "config")?,
        None => base,
    };
    if let Some(v) = common.seed {
        cfg.seed = RngSeed(v);
    }
    if let Some(v) = common.max_corrections {
        cfg.max_corrections = v;
    }
    if let Some(v) = common.max_trials {
        cfg.max_trials = v;
    }
    if let Some(v) = common.halt_d2 {
        cfg.d2_halt_threshold = v;
    }
    if let Some(v) = common.cadence {
        cfg.log_cadence = v;
    }
    if let Some(v) = common.lu_iters {
        cfg.lu_opt_iterations = v;
    }
    if let Some(v) = common.lu_phase {
        cfg.lu_phase = v;
    }
    if common.no_lu_opt {
        cfg.lu_opt_enabled = false;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn witness_restarts(common: &CommonArgs, base: usize) -> Result<usize, Failure> {
    let n = common.witness_restarts.unwrap_or(base);
    if n < 1 {
        return Err(Failure::usage("--witness-restarts must be at least 1"));
    }
    Ok(n)
}

fn workers(common: &CommonArgs) -> Result<usize, Failure> {
    match common.workers {
        Some(0) => Err(Failure::usage("--workers must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn state_given(s: &StateArgs) -> bool {
    s.family.is_some() || s.weights.is_some() || s.state.is_some()
}

fn family_point(s: &StateArgs, family: FamilyArg) -> Result<FamilyPoint, Failure> {
    let forbid = |names: &[(&str, Option<f64>)]| -> CmdResult {
        for (name, v) in names {
            if v.is_some() {
                return Err(Failure::usage(format!(
                    "--{name} is fixed for family {family:?}"
                )));
            }
        }
        Ok(())
    };
    let v = |x: Option<f64>| x.unwrap_or(0.0);
    Ok(match family {
        FamilyArg::A => {
            forbid(&[("delta", s.delta)])?;
            family_a(v(s.alpha), v(s.beta), v(s.gamma))
        }
        FamilyArg::B => family_b(v(s.alpha), v(s.beta), v(s.gamma), v(s.delta)),
        FamilyArg::B1 | FamilyArg::B2 => {
            forbid(&[("gamma", s.gamma), ("delta", s.delta)])?;
            if family == FamilyArg::B1 {
                family_b1(v(s.alpha), v(s.beta))
            } else {
                family_b2(v(s.alpha), v(s.beta))
            }
        }
        FamilyArg::B3 => {
            forbid(&[("alpha", s.alpha), ("beta", s.beta)])?;
            family_b3(v(s.gamma), v(s.delta))
        }
    })
}

/// The test state described by the state flags.
fn build_state(s: &StateArgs) -> Result<DensityMatrix, Failure> {
    let given = [s.family.is_some(), s.weights.is_some(), s.state.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Failure::usage(
            "give exactly one of --family, --weights or --state",
        ));
    }
    if s.family.is_none()
        && [s.alpha, s.beta, s.gamma, s.delta]
            .iter()
            .any(Option::is_some)
    {
        return Err(Failure::usage(
            "--alpha/--beta/--gamma/--delta need --family",
        ));
    }
    if let Some(family) = s.family {
        let point = family_point(s, family)?;
        return point.density().map_err(Failure::from_state_error);
    }
    if let Some(text) = &s.weights {
        let values: Vec<f64> = text
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::usage(format!("--weights: {e}")))?;
        if values.len() != 9 {
            return Err(Failure::usage(format!(
                "--weights needs 9 values, got {}",
                values.len()
            )));
        }
        let mut p = [[0.0; 3]; 3];
        for (k, x) in values.into_iter().enumerate() {
            p[k / 3][k % 3] = x;
        }
        let coords = SimplexCoords::new(p).map_err(Failure::from_state_error)?;
        return Ok(bell_diag(&coords));
    }
    let path = s.state.as_ref().expect("checked above");
    let json: gilbert_core::qmat::DensityMatrixJson = read_json(path, "state")?;
    DensityMatrix::from_json(&json).map_err(Failure::from_state_error)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"))
}

pub fn run(state: StateArgs, common: CommonArgs) -> CmdResult {
    check_output(&common)?;
    let rho0 = build_state(&state)?;
    let cfg = resolve_config(GilbertConfig::default(), &common)?;
    let restarts = witness_restarts(&common, DEFAULT_RESTARTS)?;

    let (gstate, trace) = run_gilbert(&rho0, &cfg, None)?;
    let mut rng = RngStream::new(witness_seed(cfg.seed));
    let est = estimate(&gstate, &trace, restarts, &mut rng)?;

    create_output(&common, "run", cfg.seed)?;
    write_json(
        &common.output.join("trace.json"),
        &TraceJson::new(&cfg, &gstate, &trace),
    )?;
    write_json(&common.output.join("estimates.json"), &est)?;
    println!(
        "halt={} corrections={} trials={}",
        trace.halt_reason, trace.corrections_done, trace.trials_used
    );
    println!(
        "d_last={:.6e} d_est={} d_wit={:.6e} r={}",
        est.d_last,
        fmt_opt(est.d_est),
        est.d_wit,
        fmt_opt(est.r)
    );
    Ok(())
}

pub fn chart(spec_path: PathBuf, common: CommonArgs) -> CmdResult {
    check_output(&common)?;
    let mut spec: ChartSpec = read_json(&spec_path, "chart spec")?;
    spec.cfg = resolve_config(spec.cfg.clone(), &common)?;
    spec.witness_restarts = witness_restarts(&common, spec.witness_restarts)?;
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let workers = workers(&common)?;

    let result = run_chart(&spec, workers).map_err(|e| match e {
        Error::Degenerate(msg) => Failure::unphysical(msg),
        other => Failure::from(other),
    })?;

    create_output(&common, "chart", spec.cfg.seed)?;
    result.write(&common.output)?;
    let meta = result.meta();
    println!(
        "points={} ppt={} d_est>0={} d_wit>0={} failures={}{}",
        meta.n_points,
        meta.n_ppt,
        meta.n_dest_positive,
        meta.n_dwit_positive,
        meta.failures.len(),
        if meta.partial { " (partial)" } else { "" }
    );
    for f in &meta.failures {
        eprintln!("point {}: {}", f.index, f.error);
    }
    Ok(())
}

pub fn volumetry_cmd(
    sampler: SamplerArg,
    n_ppt: usize,
    count_only: bool,
    common: CommonArgs,
) -> CmdResult {
    check_output(&common)?;
    if n_ppt < 1 {
        return Err(Failure::usage("--n-ppt must be at least 1"));
    }
    let cfg = resolve_config(GilbertConfig::default(), &common)?;
    let restarts = witness_restarts(&common, DEFAULT_RESTARTS)?;
    let workers = workers(&common)?;
    let sampler = match sampler {
        SamplerArg::Simplex => SimplexSampler::Simplex,
        SamplerArg::Noise => SimplexSampler::Noise,
    };
    let report = volumetry(sampler, n_ppt, &cfg, workers, restarts, count_only)?;

    create_output(&common, "volumetry", cfg.seed)?;
    write_json(&common.output.join("volumetry.json"), &report)?;
    println!(
        "sampler={} physical={} ppt={} ratio={:.4} d_est>0={} d_wit>0={}",
        report.sampler,
        report.physical_draws,
        report.ppt_draws,
        report.ppt_ratio,
        report
            .n_dest_positive
            .map_or("n/a".into(), |n| n.to_string()),
        report
            .n_dwit_positive
            .map_or("n/a".into(), |n| n.to_string()),
    );
    Ok(())
}

fn parse_synthetic(text: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Failure::usage(format!("--synthetic expects A0,B, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a0: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(a0 >= 0.0 && b > 0.0 && a0.is_finite() && b.is_finite()) {
        return Err(Failure::usage("--synthetic needs a0 >= 0 and b > 0"));
    }
    Ok((a0, b))
}

pub fn dynamics(
    state: StateArgs,
    synthetic: Option<String>,
    synthetic_len: usize,
    checkpoint_every: u64,
    common: CommonArgs,
) -> CmdResult {
    check_output(&common)?;
    let cfg = resolve_config(GilbertConfig::default(), &common)?;
    if checkpoint_every < 2 * cfg.log_cadence {
        return Err(Failure::usage(format!(
            "--checkpoint-every must be at least twice the cadence ({})",
            2 * cfg.log_cadence
        )));
    }
    let series: Vec<DynamicsPoint> = match synthetic {
        Some(text) => {
            if state_given(&state) {
                return Err(Failure::usage("--synthetic excludes the state flags"));
            }
            let (a0, b) = parse_synthetic(&text)?;
            let l = (1..=synthetic_len).map(|k| a0 + b / k as f64).collect();
            let trace = CorrectionTrace::from_squared_distances(l, cfg.log_cadence);
            dest_series(&trace, checkpoint_every)?
        }
        None => {
            let rho0 = build_state(&state)?;
            dest_dynamics(&rho0, &cfg, checkpoint_every)?.0
        }
    };

    create_output(&common, "dynamics", cfg.seed)?;
    write_dynamics_csv(&common.output.join("dynamics.csv"), &series)?;
    match series.last() {
        Some(p) => println!(
            "checkpoints={} final: corrections={} d_est={:.6e} r={:.6}",
            series.len(),
            p.corrections,
            p.d_est,
            p.r
        ),
        None => println!("checkpoints=0 (trace too short for the decay fit)"),
    }
    Ok(())
}
