use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fedhdc::convergence::{fit as fit_curve, j_of_d, FitPoint};
use fedhdc::datasets::{load_mnist_dir, synthetic_dataset, Dataset};
use fedhdc::feasibility::{certify as certify_dim, init_allocation, init_dimension, FeasibilityReport};
use fedhdc::federation::{encode_data, run_encoded, EncoderConfig, FederationConfig, RoundLog};
use fedhdc::hdc::TrainerConfig;
use fedhdc::optimizer::{objective, solve_scheme, Scheme, Solution};
use fedhdc::privacy::PrivacySpec;
use fedhdc::system_model::{
    gen_scenario as drop_users, EnergyBreakdown, ResourceAllocation, Scenario, SystemConfig, UserProfile,
};

use crate::config::{Axis, Baseline, DatasetSection, ExperimentConfig};
use crate::output::{self, csv_create, csv_finish, csv_row, read_csv, read_json, write_csv, write_json};
use crate::CliError;

const MANIFEST_SCHEMA: &str = "fedhdc-manifest v1";

fn out(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn scenario(cfg: &ExperimentConfig) -> Result<Scenario, CliError> {
    match &cfg.scenario.path {
        Some(p) => read_json(p),
        None => Ok(Scenario { system: cfg.system, users: drop_users(cfg.seed, &cfg.scenario.generator)? }),
    }
}

pub fn gen_scenario(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = Scenario { system: cfg.system, users: drop_users(cfg.seed, &cfg.scenario.generator)? };
    let path = out(cfg, "scenario.json");
    write_json(&path, &s)?;
    println!("{} users -> {}", s.users.len(), path.display());
    Ok(())
}

// ---------------------------------------------------------------- train

fn load_dataset(section: &DatasetSection) -> Result<(Dataset, Dataset), CliError> {
    match section {
        DatasetSection::Mnist { dir } => load_mnist_dir(dir).map_err(|e| match CliError::from(e) {
            CliError::Io(m) => CliError::Io(format!("{}: {m}", dir.display())),
            other => other,
        }),
        &DatasetSection::Synthetic { seed, classes, per_class, test_per_class, rows, cols, noise } => {
            let all = synthetic_dataset(seed, classes, per_class + test_per_class, rows, cols, noise)?;
            let block = per_class + test_per_class;
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (i, s) in all.samples.into_iter().enumerate() {
                if i % block < per_class {
                    train.push(s);
                } else {
                    test.push(s);
                }
            }
            if test.is_empty() {
                return Err(CliError::Config("synthetic test_per_class must be >= 1".into()));
            }
            Ok((Dataset::new(train, rows, cols, classes)?, Dataset::new(test, rows, cols, classes)?))
        }
    }
}

#[derive(Serialize)]
struct RoundRow {
    d: usize,
    seed: u64,
    round: usize,
    accuracy: f64,
    rho_spent: f64,
    mean_error_rate: f64,
}

#[derive(Serialize)]
struct RunSummary {
    d: usize,
    seed: u64,
    rounds_run: usize,
    reached_round: Option<usize>,
    final_accuracy: f64,
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    seeds: Vec<u64>,
    runs: Vec<RunSummary>,
    /// Mean rounds-to-target per dimension (unreached runs count as
    /// `rounds + 1`).
    points: Vec<FitPoint>,
}

fn federation_config(cfg: &ExperimentConfig, d: usize, seed: u64) -> FederationConfig {
    let t = &cfg.train;
    FederationConfig {
        users: t.users,
        max_rounds: t.rounds,
        target_accuracy: t.target_accuracy,
        privacy: t.epsilon.map(|epsilon| PrivacySpec {
            epsilon,
            delta: t.delta,
            kappa: t.kappa.unwrap_or((d as f64).sqrt()),
            rounds: t.rounds,
        }),
        trainer: TrainerConfig { eta: t.eta, similarity: t.similarity },
        encoder: EncoderConfig { dim: d, levels: t.levels, seed: t.encoder_seed },
        partition: t.partition,
        seed,
    }
}

pub fn train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (train_set, test_set) = load_dataset(&cfg.train.dataset)?;
    let seeds = cfg.train_seeds();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &d in &cfg.train.dims {
        let probe = federation_config(cfg, d, seeds[0]);
        probe.validate()?;
        let mut data = encode_data(&probe.encoder, &train_set, &test_set)?;
        let mut reached = Vec::new();
        for &seed in &seeds {
            let fc = federation_config(cfg, d, seed);
            let run = run_encoded(&fc, &train_set, &mut data)?;
            rows.extend(run.logs.iter().map(|l: &RoundLog| RoundRow {
                d,
                seed,
                round: l.round,
                accuracy: l.accuracy,
                rho_spent: l.rho_spent,
                mean_error_rate: l.mean_error_rate,
            }));
            let last = run.logs.last().expect("at least one round");
            eprintln!("d={d} seed={seed}: {} rounds, accuracy {:.4}", last.round, last.accuracy);
            reached.push(run.reached_round.unwrap_or(cfg.train.rounds + 1));
            runs.push(RunSummary {
                d,
                seed,
                rounds_run: last.round,
                reached_round: run.reached_round,
                final_accuracy: last.accuracy,
            });
        }
        if cfg.train.target_accuracy.is_some() {
            let mean = reached.iter().sum::<usize>() as f64 / reached.len() as f64;
            points.push(FitPoint { d: d as f64, j: mean });
        }
    }
    write_csv(&out(cfg, "rounds.csv"), output::ROUNDS, &rows)?;
    if !points.is_empty() {
        write_csv(&out(cfg, "points.csv"), output::POINTS, &points)?;
    }
    write_json(
        &out(cfg, "train_manifest.json"),
        &TrainManifest { schema: MANIFEST_SCHEMA, config: cfg, seeds, runs, points },
    )
}

// ---------------------------------------------------------------- fit

#[derive(Serialize)]
struct CurveRow {
    kind: &'static str,
    d: f64,
    #[serde(rename = "J")]
    j: f64,
}

pub fn fit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut pts = cfg.fit.points.clone();
    if let Some(p) = &cfg.fit.points_path {
        pts.extend(read_csv::<FitPoint>(p)?);
    }
    let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.d, p.j)).collect();
    let result = fit_curve(&pairs)?;
    let mut rows: Vec<CurveRow> = pts.iter().map(|p| CurveRow { kind: "observed", d: p.d, j: p.j }).collect();
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let n = cfg.fit.curve_points;
    for k in 0..n {
        let d = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        rows.push(CurveRow { kind: "fitted", d, j: j_of_d(&result.model, d)? });
    }
    write_csv(&out(cfg, "fit_curve.csv"), output::FIT_CURVE, &rows)?;
    write_json(&out(cfg, "model.json"), &result)?;
    let m = result.model;
    println!("mu={:.6} nu={:.6} alpha={:.6} beta={:.6} residual={:.3e}", m.mu, m.nu, m.alpha, m.beta, result.residual);
    Ok(())
}

// ---------------------------------------------------------------- optimize

fn scheme_of(b: Baseline, fixed_d: f64) -> Scheme {
    match b {
        Baseline::Proposed => Scheme::Proposed,
        Baseline::FixedD => Scheme::FixedDimension { d: fixed_d },
        Baseline::FixedP => Scheme::FixedPower,
    }
}

#[derive(Serialize)]
struct InfeasibleReport<'a> {
    schema: &'static str,
    feasible: bool,
    reports: &'a [FeasibilityReport],
}

/// Certify the starting dimension; on failure write the reports and bail.
fn precheck(cfg: &ExperimentConfig, s: &Scenario, scheme: Scheme) -> Result<(), CliError> {
    let reports = match scheme {
        Scheme::FixedDimension { d } => {
            let r = certify_dim(&s.users, d, j_of_d(&cfg.model, d)?, &s.system)?;
            if r.feasible {
                return Ok(());
            }
            vec![r]
        }
        _ => {
            let init = init_dimension(&cfg.solver.d_grid, &s.users, &s.system, &cfg.model)?;
            if init.d.is_some() {
                return Ok(());
            }
            init.reports
        }
    };
    let path = out(cfg, "infeasibility.json");
    write_json(&path, &InfeasibleReport { schema: MANIFEST_SCHEMA, feasible: false, reports: &reports })?;
    let last = reports.last().expect("at least one dimension checked");
    Err(CliError::Infeasible(format!(
        "no certified dimension (last check: {:?} at d={}{}); report in {}",
        last.violated_condition,
        last.d_checked,
        last.first_violating_user.map(|u| format!(", user {u}")).unwrap_or_default(),
        path.display()
    )))
}

/// The `allocation.json` file format.
#[derive(Serialize, Deserialize)]
pub struct AllocationFile {
    pub schema: String,
    pub scheme: Baseline,
    pub d: f64,
    #[serde(rename = "J")]
    pub j_d: f64,
    pub energy: EnergyBreakdown,
    pub converged: bool,
    pub outer_iterations: usize,
    pub diagnostic: Option<String>,
    pub allocation: ResourceAllocation,
}

pub fn optimize(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = scenario(cfg)?;
    let scheme = scheme_of(cfg.optimize.scheme, cfg.optimize.fixed_d);
    precheck(cfg, &s, scheme)?;
    let sol: Solution = solve_scheme(&s.users, &s.system, &cfg.model, &cfg.solver, scheme)?;
    write_csv(&out(cfg, "trace.csv"), output::TRACE, &sol.trace)?;
    let file = AllocationFile {
        schema: MANIFEST_SCHEMA.to_string(),
        scheme: cfg.optimize.scheme,
        d: sol.allocation.d,
        j_d: sol.j_d,
        energy: sol.energy,
        converged: sol.converged,
        outer_iterations: sol.outer_iterations,
        diagnostic: sol.diagnostic.clone(),
        allocation: sol.allocation,
    };
    write_json(&out(cfg, "allocation.json"), &file)?;
    println!(
        "{}: d={} J={:.4} energy={:.6e} J (compute {:.6e}, transmit {:.6e}) converged={}",
        cfg.optimize.scheme.name(),
        file.d,
        file.j_d,
        file.energy.total,
        file.energy.compute_round1 + file.energy.compute_retrain_total,
        file.energy.transmit_total,
        file.converged
    );
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Serialize)]
struct SweepRow {
    axis: Axis,
    value: f64,
    scheme: &'static str,
    status: &'static str,
    d: Option<f64>,
    #[serde(rename = "J")]
    j: Option<f64>,
    energy_total: Option<f64>,
    energy_compute: Option<f64>,
    energy_transmit: Option<f64>,
}

fn sweep_point(cfg: &ExperimentConfig, base: &Scenario, value: f64, baseline: Baseline) -> Result<SweepRow, CliError> {
    let mut sys: SystemConfig = base.system;
    let mut users: Vec<UserProfile> = base.users.clone();
    match cfg.sweep.axis {
        Axis::Bandwidth => sys.bandwidth = value,
        Axis::Power => users.iter_mut().for_each(|u| u.p_max = value),
        Axis::Dimension => {}
    }
    let model = &cfg.model;
    let result: fedhdc::Result<(f64, EnergyBreakdown)> = match (cfg.sweep.axis, baseline) {
        // with d pinned by the axis, fixed_p is the full-power initial point
        (Axis::Dimension, Baseline::FixedP) => {
            init_allocation(&users, value, &sys, model).and_then(|a| Ok((a.d, objective(&users, &sys, model, &a)?)))
        }
        (Axis::Dimension, _) => solve_scheme(&users, &sys, model, &cfg.solver, Scheme::FixedDimension { d: value })
            .map(|s| (s.allocation.d, s.energy)),
        (_, b) => solve_scheme(&users, &sys, model, &cfg.solver, scheme_of(b, cfg.sweep.fixed_d))
            .map(|s| (s.allocation.d, s.energy)),
    };
    let mut row = SweepRow {
        axis: cfg.sweep.axis,
        value,
        scheme: baseline.name(),
        status: "ok",
        d: None,
        j: None,
        energy_total: None,
        energy_compute: None,
        energy_transmit: None,
    };
    match result {
        Ok((d, e)) => {
            row.d = Some(d);
            row.j = Some(j_of_d(model, d)?);
            row.energy_total = Some(e.total);
            row.energy_compute = Some(e.compute_round1 + e.compute_retrain_total);
            row.energy_transmit = Some(e.transmit_total);
        }
        Err(fedhdc::Error::Infeasible(_)) => row.status = "infeasible",
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = scenario(cfg)?;
    let values = cfg.sweep.axis_values(&cfg.solver);
    if values.is_empty() {
        return Err(CliError::Config("sweep has no axis values".into()));
    }
    let baselines: Vec<Baseline> = cfg
        .sweep
        .baselines
        .iter()
        .copied()
        .filter(|&b| !(cfg.sweep.axis == Axis::Dimension && b == Baseline::FixedD))
        .collect();
    if baselines.len() < cfg.sweep.baselines.len() {
        eprintln!("note: fixed_d is the axis itself on a dimension sweep; skipped");
    }
    let jobs: Vec<(f64, Baseline)> = values.iter().flat_map(|&v| baselines.iter().map(move |&b| (v, b))).collect();
    // parallel over points, written back in axis order
    let rows = jobs.par_iter().map(|&(v, b)| sweep_point(cfg, &s, v, b)).collect::<Result<Vec<_>, _>>()?;
    let path = out(cfg, "sweep.csv");
    write_csv(&path, output::SWEEP, &rows)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

// ---------------------------------------------------------------- certify

#[derive(Serialize)]
struct CertifyRow {
    d: f64,
    #[serde(rename = "J")]
    j: f64,
    feasible: bool,
    violated_condition: String,
    first_violating_user: Option<usize>,
    bandwidth_required: f64,
    bandwidth_available: f64,
}

pub fn certify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = scenario(cfg)?;
    let mut reports = Vec::new();
    for &d in &cfg.solver.d_grid {
        reports.push(certify_dim(&s.users, d, j_of_d(&cfg.model, d)?, &s.system)?);
    }
    let rows: Vec<CertifyRow> = reports
        .iter()
        .map(|r| CertifyRow {
            d: r.d_checked,
            j: r.j_d,
            feasible: r.feasible,
            violated_condition: serde_json::to_value(r.violated_condition)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            first_violating_user: r.first_violating_user,
            bandwidth_required: r.bandwidth_required,
            bandwidth_available: s.system.bandwidth,
        })
        .collect();
    write_csv(&out(cfg, "certify.csv"), output::CERTIFY, &rows)?;
    write_json(&out(cfg, "certify.json"), &reports)?;
    for r in &rows {
        println!("d={} feasible={} ({})", r.d, r.feasible, r.violated_condition);
    }
    if rows.iter().any(|r| r.feasible) {
        Ok(())
    } else {
        Err(CliError::Infeasible("no dimension on the grid is feasible".into()))
    }
}

// ---------------------------------------------------------------- report-groups

#[derive(Serialize)]
pub struct GroupRow {
    pub bucket: usize,
    pub users: usize,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub mean_b: f64,
    pub mean_p: f64,
    pub mean_t: f64,
    pub mean_f: f64,
}

/// Users sorted by distance and cut into `k` groups whose sizes differ by at
/// most one; empty groups are dropped.
pub fn group_means(users: &[UserProfile], a: &ResourceAllocation, k: usize) -> Vec<GroupRow> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&x, &y| users[x].distance_m.total_cmp(&users[y].distance_m).then(x.cmp(&y)));
    let n = order.len();
    (0..k)
        .filter_map(|g| {
            let idx = &order[g * n / k..(g + 1) * n / k];
            if idx.is_empty() {
                return None;
            }
            let mean = |v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
            Some(GroupRow {
                bucket: g + 1,
                users: idx.len(),
                distance_min_m: users[idx[0]].distance_m,
                distance_max_m: users[idx[idx.len() - 1]].distance_m,
                mean_b: mean(&a.b),
                mean_p: mean(&a.p),
                mean_t: mean(&a.t),
                mean_f: mean(&a.f),
            })
        })
        .collect()
}

pub fn report_groups(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = scenario(cfg)?;
    let path = cfg.groups.allocation.clone().unwrap_or_else(|| out(cfg, "allocation.json"));
    let file: AllocationFile = read_json(&path)?;
    if file.allocation.num_users() != s.users.len() {
        return Err(CliError::Config(format!(
            "{} holds {} users but the scenario has {}",
            path.display(),
            file.allocation.num_users(),
            s.users.len()
        )));
    }
    let rows = group_means(&s.users, &file.allocation, cfg.groups.buckets);
    let mut w = csv_create(&out(cfg, "groups.csv"), output::GROUPS)?;
    for r in &rows {
        csv_row(&mut w, r)?;
        println!(
            "group {} ({} users, {:.0}-{:.0} m): b={:.4e} p={:.4e} t={:.4e} f={:.4e}",
            r.bucket, r.users, r.distance_min_m, r.distance_max_m, r.mean_b, r.mean_p, r.mean_t, r.mean_f
        );
    }
    csv_finish(w)
}
