use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use log::info;
use prosep::analysis::{
    bound_table, condition_bound_sweep, rank_check_l1, scheme_conditioning, taylor_bound,
    taylor_remainder, ConditionReport, ConditioningConfig, L2Setup, MotionBoundSpec, USource,
};
use prosep::phantom::{
    benchmark_movie, simulate_acquisition, truth_movie, MotionSpec, TimeSequentialSinogram,
};
use prosep::psmodel::spline_interpolator;
use prosep::recon::{movie_metrics, reconstruct_movie, ProSepSolution};
use prosep::sampling::{span_for, AngularScheme, SchemeKind};
use prosep::solver::solve;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_csv, write_json, write_table};
use crate::tensor::Tensor;
use crate::{
    AnalyzeArgs, ConfigSource, MetricsArgs, ModelOverrides, NotConverged, ReconstructArgs,
    SimulateArgs,
};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    /// Output file name to tensor dims (empty for tables).
    outputs: BTreeMap<&'static str, Vec<usize>>,
}

fn write_manifest(
    path: &Path,
    command: &'static str,
    config: &RunConfig,
    outputs: BTreeMap<&'static str, Vec<usize>>,
) -> Result<()> {
    write_json(
        path,
        &Manifest {
            tool: "prosep",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            outputs,
        },
    )
}

fn base_config(source: &ConfigSource) -> Result<RunConfig> {
    if let Some(path) = &source.config {
        RunConfig::load(path)
    } else if let Some(name) = &source.preset {
        RunConfig::preset(name)
    } else if let Some(path) = &source.manifest {
        RunConfig::from_manifest(path)
    } else {
        Ok(RunConfig::default())
    }
}

fn apply_model(config: &mut RunConfig, model: &ModelOverrides) {
    if let Some(k) = model.psm_order {
        config.psm_order = k;
    }
    if let Some(n) = model.max_harmonic {
        config.max_harmonic = n;
    }
    if let Some(d) = model.subspace_dim {
        config.subspace_dim = d;
    }
    if let Some(s) = model.symmetric {
        config.symmetric = s;
    }
    if let Some(r) = model.restarts {
        config.solver.restarts = r;
    }
    if let Some(m) = model.max_iters {
        config.solver.max_iters = m;
    }
    if let Some(seed) = model.solver_seed {
        config.solver.seed = seed;
    }
    config.allow_underdetermined |= model.allow_underdetermined;
}

fn save(
    dir: &Path,
    name: &'static str,
    tensor: &Tensor,
    outputs: &mut BTreeMap<&'static str, Vec<usize>>,
) -> Result<()> {
    tensor.save(&dir.join(name))?;
    outputs.insert(name, tensor.dims.clone());
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = base_config(&args.source)?;
    apply_model(&mut config, &args.model);
    if let Some(v) = args.views {
        config.views = v;
    }
    if let Some(s) = args.scheme {
        config.scheme = s;
    }
    if let Some(s) = args.scheme_seed {
        config.scheme_seed = s;
    }
    if let Some(w) = args.width {
        config.width = w;
        config.phantom = None;
        config.bins = None;
    }
    if let Some(p) = &args.phantom {
        config.phantom_path = Some(p.clone());
        config.phantom = None;
    }
    if let Some(b) = args.bins {
        config.bins = Some(b);
    }
    if let Some(s) = args.noise_sigma {
        config.noise_sigma = s;
    }
    if let Some(s) = args.noise_seed {
        config.noise_seed = s;
    }
    if args.r#static {
        config.motion = MotionSpec::identity();
    }
    let config = config.resolved()?;
    config.validate()?;

    let spec = config.phantom_spec()?;
    let detector = config.detector()?;
    let scheme = config.scheme()?;
    info!(
        "simulating {} views of a {}-pixel phantom",
        config.views, spec.width
    );
    let data = simulate_acquisition(&spec, &config.motion, &scheme, &detector, config.noise())?;
    let truth = truth_movie(&spec, &config.motion, config.views)?;
    let bench = benchmark_movie(
        &spec,
        &config.motion,
        config.views,
        config.fbp_angles(),
        &detector,
    )?;

    let dir = &args.out;
    let mut outputs = BTreeMap::new();
    save(
        dir,
        "sinogram.tensor",
        &Tensor::from_matrix(&data.values),
        &mut outputs,
    )?;
    save(
        dir,
        "angles.tensor",
        &Tensor::vector(&scheme.angles),
        &mut outputs,
    )?;
    save(
        dir,
        "times.tensor",
        &Tensor::vector(&data.times),
        &mut outputs,
    )?;
    save(
        dir,
        "truth_movie.tensor",
        &Tensor::from_movie(&truth),
        &mut outputs,
    )?;
    save(
        dir,
        "benchmark_movie.tensor",
        &Tensor::from_movie(&bench),
        &mut outputs,
    )?;
    write_manifest(&dir.join("manifest.json"), "simulate", &config, outputs)
}

#[derive(Serialize)]
struct RestartRow {
    restart: usize,
    seed: u64,
    normalized_objective: f64,
    iterations: usize,
    converged: bool,
    chosen: bool,
    aborted: String,
}

pub fn reconstruct(args: &ReconstructArgs) -> Result<()> {
    let input = &args.input;
    let acquired = RunConfig::from_manifest(&input.join("manifest.json"))?;
    let mut config = acquired.clone();
    if let Some(name) = &args.preset {
        let preset = RunConfig::preset(name)?;
        config.psm_order = preset.psm_order;
        config.max_harmonic = preset.max_harmonic;
        config.subspace_dim = preset.subspace_dim;
        config.symmetric = preset.symmetric;
    }
    apply_model(&mut config, &args.model);
    config.validate()?;

    let values = Tensor::load(&input.join("sinogram.tensor"))?.to_matrix()?;
    let angles = Tensor::load(&input.join("angles.tensor"))?.data;
    let detector = config.detector()?;
    ensure!(
        values.ncols() == angles.len() && angles.len() == config.views,
        "sinogram has {} views, angles {}, manifest {}",
        values.ncols(),
        angles.len(),
        config.views
    );
    ensure!(
        values.nrows() == detector.bins,
        "sinogram has {} bins, manifest {}",
        values.nrows(),
        detector.bins
    );
    let scheme = AngularScheme {
        angles,
        span: span_for(acquired.symmetric),
        kind: acquired.scheme,
        seed: (acquired.scheme == SchemeKind::Random).then_some(acquired.scheme_seed),
    };
    let data = TimeSequentialSinogram::new(values, scheme.clone(), detector)?;
    let order = config.order()?;
    let u = spline_interpolator(config.views, config.subspace_dim)?;
    info!(
        "reconstructing with K = {}, N = {}, d = {}, symmetric = {}",
        order.psm_order, order.max_harmonic, order.subspace_dim, config.symmetric
    );
    let out = solve(&data, &order, &u, config.symmetric, &config.solver)?;
    let report = out.report.clone();
    let solution = ProSepSolution::new(out.z, u, out.beta, scheme, detector)?;
    let movie = reconstruct_movie(&solution, config.fbp_angles())?;

    let dir = args.out.as_ref().unwrap_or(input);
    let mut outputs = BTreeMap::new();
    save(
        dir,
        "Z.tensor",
        &Tensor::from_matrix(&solution.z),
        &mut outputs,
    )?;
    save(
        dir,
        "beta.tensor",
        &Tensor::from_matrix(&solution.beta.beta),
        &mut outputs,
    )?;
    save(
        dir,
        "psi.tensor",
        &Tensor::from_matrix(&(&solution.u * &solution.z)),
        &mut outputs,
    )?;
    save(
        dir,
        "movie.tensor",
        &Tensor::from_movie(&movie),
        &mut outputs,
    )?;

    let summary = [
        ("final_objective", report.final_objective.to_string()),
        ("trace_xi", report.trace_xi.to_string()),
        (
            "relative_objective",
            (report.final_objective / report.trace_xi).to_string(),
        ),
        ("iterations", report.iterations.to_string()),
        ("converged", report.converged.to_string()),
        ("chosen_restart", report.chosen_restart.to_string()),
        (
            "orthonormality_defect",
            report.orthonormality_defect.to_string(),
        ),
    ];
    let records: Vec<Vec<String>> = summary
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    write_table(
        &dir.join("solver_report.csv"),
        &["field", "value"],
        &records,
    )?;
    outputs.insert("solver_report.csv", Vec::new());
    let restarts: Vec<RestartRow> = report
        .restarts
        .iter()
        .map(|r| RestartRow {
            restart: r.index,
            seed: r.seed,
            normalized_objective: r.objective,
            iterations: r.iterations,
            converged: r.converged,
            chosen: r.index == report.chosen_restart,
            aborted: r.aborted.clone().unwrap_or_default(),
        })
        .collect();
    write_csv(&dir.join("solver_restarts.csv"), &restarts)?;
    outputs.insert("solver_restarts.csv", Vec::new());
    let trace: Vec<Vec<String>> = report
        .trace
        .iter()
        .enumerate()
        .map(|(i, f)| vec![i.to_string(), f.to_string()])
        .collect();
    write_table(
        &dir.join("solver_trace.csv"),
        &["iteration", "normalized_objective"],
        &trace,
    )?;
    outputs.insert("solver_trace.csv", Vec::new());
    write_manifest(
        &dir.join("reconstruct_manifest.json"),
        "reconstruct",
        &config,
        outputs,
    )?;

    if !report.converged {
        return Err(NotConverged {
            iterations: report.iterations,
        }
        .into());
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6e}")
    }
}

/// The conditioning table in its printed layout: one row per quantity, one
/// column per scheme.
pub fn conditioning_layout(reports: &[ConditionReport]) -> Vec<Vec<String>> {
    let find = |kind: SchemeKind, symmetric: bool| {
        reports
            .iter()
            .find(|r| r.scheme == kind && r.symmetric == symmetric)
            .expect("report for every scheme")
    };
    let kinds = [
        SchemeKind::Progressive,
        SchemeKind::Random,
        SchemeKind::BitReversed,
    ];
    let row = |label: &str, value: &dyn Fn(SchemeKind) -> f64| {
        std::iter::once(label.to_string())
            .chain(kinds.iter().map(|&k| fmt(value(k))))
            .collect::<Vec<_>>()
    };
    vec![
        row("kappa_l1_no_symm", &|k| find(k, false).kappa_l1),
        row("kappa_l1_symm", &|k| find(k, true).kappa_l1),
        row("kappa_l2", &|k| find(k, true).kappa_l2),
    ]
}

pub const CONDITIONING_HEADER: [&str; 4] = ["quantity", "progressive", "random", "bit_reversed"];

#[derive(Serialize)]
struct RankRow {
    case: &'static str,
    views: usize,
    psm_order: usize,
    max_harmonic: usize,
    trials: usize,
    passes: usize,
    dimension_ok: bool,
}

#[derive(Serialize)]
struct BoundSweepRow {
    trial: usize,
    kappa_l2: f64,
    kappa_gamma: f64,
    bound: Option<f64>,
    gamma_positive: bool,
    satisfied: bool,
}

#[derive(Serialize)]
struct BoundsRow {
    psm_order: usize,
    translation_bound: f64,
    rotation_bound: f64,
    /// Largest `remainder/bound` over the grid `x ∈ [−5, 5]`.
    taylor_worst_ratio: f64,
}

/// Setup of the `κ(L2) ≤ √κ(Γ)` sweep: small enough that `Γ ≻ 0`.
pub fn bound_sweep_setup(seed: u64) -> L2Setup {
    L2Setup {
        views: 32,
        psm_order: 1,
        max_harmonic: 3,
        subspace_dim: 3,
        bins: 20,
        symmetric: true,
        u_source: USource::Gaussian,
        seed,
    }
}

/// `max_x |remainder(x)| / bound(x)` over 1001 points of `[−5, 5]`.
pub fn taylor_worst_ratio(psm_order: usize) -> f64 {
    (0..=1000)
        .map(|i| -5.0 + 0.01 * i as f64)
        .filter(|x| *x != 0.0)
        .map(|x| taylor_remainder(x, psm_order) / taylor_bound(x, psm_order))
        .fold(0.0, f64::max)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    if !(args.table1 || args.thm2 || args.thm3 || args.bounds) {
        bail!("choose at least one of --table1, --thm2, --thm3, --bounds");
    }
    let dir = &args.out;
    if args.table1 {
        let config = ConditioningConfig {
            random_trials: args.random_trials,
            seed: args.seed,
            ..ConditioningConfig::default()
        };
        let reports = scheme_conditioning(&config)?;
        write_table(
            &dir.join("table1.csv"),
            &CONDITIONING_HEADER,
            &conditioning_layout(&reports),
        )?;
        write_csv(&dir.join("table1_details.csv"), &reports)?;
        for r in &reports {
            println!(
                "table1 {:<12} symmetric={:<5} kappa_l1={} kappa_l2={}",
                r.scheme.name(),
                r.symmetric,
                fmt(r.kappa_l1),
                fmt(r.kappa_l2)
            );
        }
    }
    if args.thm2 {
        let full = rank_check_l1(64, 2, 10, args.trials, args.seed)?;
        let deficient = rank_check_l1(16, 2, 10, args.trials, args.seed)?;
        let rows = [
            ("random_angles", 64, full),
            ("too_few_views", 16, deficient),
        ]
        .map(|(case, views, c)| RankRow {
            case,
            views,
            psm_order: 2,
            max_harmonic: 10,
            trials: c.trials,
            passes: c.passes,
            dimension_ok: c.dimension_ok,
        });
        write_csv(&dir.join("thm2.csv"), &rows)?;
        for r in &rows {
            println!(
                "thm2 {}: {}/{} full column rank",
                r.case, r.passes, r.trials
            );
        }
    }
    if args.thm3 {
        let sweep = condition_bound_sweep(&bound_sweep_setup(args.seed), args.trials, 1e-9)?;
        let rows: Vec<BoundSweepRow> = sweep
            .studies
            .iter()
            .enumerate()
            .map(|(trial, s)| BoundSweepRow {
                trial,
                kappa_l2: s.kappa_l2,
                kappa_gamma: s.kappa_gamma,
                bound: s.bound,
                gamma_positive: s.gamma_positive,
                satisfied: s.gamma_positive && s.bound_holds(1e-9),
            })
            .collect();
        write_csv(&dir.join("thm3.csv"), &rows)?;
        println!(
            "thm3: {}/{} bound-satisfied ({} with positive definite Gamma)",
            sweep.satisfied, sweep.trials, sweep.eligible
        );
    }
    if args.bounds {
        let spec = MotionBoundSpec {
            bandwidth: args.bandwidth,
            c_max: args.c_max,
            support_radius: args.radius,
            theta_max: args.theta_max,
            psm_order: 0,
        };
        let rows: Vec<BoundsRow> = bound_table(&spec, 0..=args.max_order)
            .into_iter()
            .map(|b| BoundsRow {
                psm_order: b.psm_order,
                translation_bound: b.translation,
                rotation_bound: b.rotation,
                taylor_worst_ratio: taylor_worst_ratio(b.psm_order),
            })
            .collect();
        write_csv(&dir.join("bounds.csv"), &rows)?;
        println!("bounds: K = 0..={} written", args.max_order);
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsCsvRow {
    frame: String,
    psnr: f64,
    ssim: f64,
    mae: f64,
}

pub fn metrics(args: &MetricsArgs) -> Result<()> {
    let movie = Tensor::load(&args.movie)?;
    let bench = Tensor::load(&args.benchmark)?;
    ensure!(
        movie.dims == bench.dims,
        "movie dims {:?} differ from benchmark dims {:?}",
        movie.dims,
        bench.dims
    );
    let (rows, summary) =
        movie_metrics(&movie.to_movie(1.0)?, &bench.to_movie(1.0)?).context("computing metrics")?;
    let mut out: Vec<MetricsCsvRow> = rows
        .iter()
        .enumerate()
        .map(|(p, r)| MetricsCsvRow {
            frame: p.to_string(),
            psnr: r.psnr,
            ssim: r.ssim,
            mae: r.mae,
        })
        .collect();
    out.push(MetricsCsvRow {
        frame: "mean".into(),
        psnr: summary.psnr,
        ssim: summary.ssim,
        mae: summary.mae,
    });
    write_csv(&args.out, &out)?;
    println!(
        "psnr {:.3} dB, ssim {:.4}, mae {:.5}",
        summary.psnr, summary.ssim, summary.mae
    );
    Ok(())
}
