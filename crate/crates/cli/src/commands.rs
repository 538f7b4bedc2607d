//! Subcommand handlers.

use crate::config::{
    load_config, parse_pair, parse_range, write_manifest, BeamFlags, EvalConfig, GenerateConfig,
    SimulateConfig, StudyConfig, TrainConfig, DEFAULT_SEED,
};
use crate::svg;
use clap::Args;
use clothoid_arm::beam::{
    self, run_validation_study, simulate_equilibrium, LoadCase, LoadTemplate, STANDARD_GRAVITY,
};
use clothoid_arm::dataset::{self, Dataset, PAYLOAD_RANGE_G};
use clothoid_arm::hermite::{solve_g1, BoundaryData, SolverOptions};
use clothoid_arm::learn::{self, load_model, save_model, MlpModel, ModelRole};
use clothoid_arm::spiral::Pose;
use clothoid_arm::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Inflation pressure in kPa.
    #[arg(long, visible_alias = "P")]
    pressure: Option<f64>,
    /// Tip payload in grams.
    #[arg(long, visible_alias = "W")]
    payload: Option<f64>,
    /// Tip contact force in newtons (replaces the payload).
    #[arg(long)]
    contact_force: Option<f64>,
    /// Contact force direction as dx,dy (world frame).
    #[arg(long, allow_hyphen_values = true)]
    contact_direction: Option<String>,
    /// Output station CSV (s,x,y,theta,kappa).
    #[arg(long)]
    out: PathBuf,
    /// Also render the deformed shape as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// JSON config snapshot (same schema as the manifest's config field).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    beam: BeamFlags,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: SimulateConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => SimulateConfig::default(),
    };
    args.beam.apply(&mut cfg.beam);
    if let Some(p) = args.pressure {
        cfg.pressure_kpa = p;
    }
    if let Some(w) = args.payload {
        cfg.payload_g = w;
    }
    if let Some(f) = args.contact_force {
        cfg.contact_force_n = Some(f);
    }
    if let Some(dir) = &args.contact_direction {
        cfg.contact_direction = parse_pair(dir)?;
    }

    let load = match cfg.contact_force_n {
        Some(force) => {
            if cfg.payload_g > 0.0 {
                return Err(Error::invalid_config(
                    "choose either a payload or a contact force, not both",
                ));
            }
            LoadCase::contact(force, cfg.contact_direction)?
        }
        None => LoadCase::payload(cfg.payload_g * 1e-3 * STANDARD_GRAVITY)?,
    };
    let eq = simulate_equilibrium(&cfg.beam, cfg.pressure_kpa, &load, &cfg.fixed_point)?;

    let mut out = create(&args.out)?;
    beam::write_equilibrium_csv(&mut out, &eq)?;
    out.flush()?;
    let mut outputs = vec![path_str(&args.out)];

    if let Some(svg_path) = &args.svg {
        let points: Vec<(f64, f64)> = eq.poses.iter().map(|p| (p.x, p.y)).collect();
        let mut svg_out = create(svg_path)?;
        svg::write_polyline_svg(
            &mut svg_out,
            &points,
            &format!(
                "deformed shape at P={} kPa, load={} N",
                cfg.pressure_kpa,
                load.magnitude()
            ),
        )?;
        svg_out.flush()?;
        outputs.push(path_str(svg_path));
    }

    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    write_manifest(&args.out, "simulate", seed, &cfg, &[], &outputs, started)?;
    log::info!(
        "simulate: tip at ({:.6}, {:.6}) m, tip angle {:.6} rad after {} iterations",
        eq.tip().x,
        eq.tip().y,
        eq.tip().theta,
        eq.iterations
    );
    Ok(())
}

// --------------------------------------------------------------------- fit

/// Boundary-pose solve request: positions in meters, angles in radians.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    pub p0: [f64; 2],
    pub theta0: f64,
    pub p1: [f64; 2],
    pub theta1: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(default)]
    pub order: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SolveResponse {
    kappa: Vec<f64>,
    residual: [f64; 3],
    residual_norm: f64,
    iterations: usize,
    converged: bool,
    residual_history: Vec<f64>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Solve request JSON: {"p0":[x,y],"theta0":r,"p1":[x,y],"theta1":r,"L":v,"order":n}.
    #[arg(long)]
    boundary: PathBuf,
    /// Curvature order; overrides the request's value.
    #[arg(long)]
    order: Option<usize>,
    /// Also write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the recovered shape (base at the origin) as s,x,y,theta CSV.
    #[arg(long)]
    export_shape: Option<PathBuf>,
    /// Stations in the exported shape CSV.
    #[arg(long, default_value_t = 101)]
    stations: usize,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.boundary)?;
    let request: SolveRequest = serde_json::from_str(&text)
        .map_err(|e| Error::invalid_config(format!("boundary file: {e}")))?;
    let order = args.order.or(request.order).ok_or_else(|| {
        Error::invalid_config(
            "curvature order missing: set \"order\" in the request or pass --order",
        )
    })?;
    let boundary = BoundaryData::new(
        Pose::new(request.p0[0], request.p0[1], request.theta0),
        Pose::new(request.p1[0], request.p1[1], request.theta1),
        request.length,
    )?;
    let report = solve_g1(&boundary, order, &SolverOptions::default())?;
    let response = SolveResponse {
        kappa: report.kappa.coeffs().to_vec(),
        residual: report.residual,
        residual_norm: report.residual_norm(),
        iterations: report.iterations,
        converged: report.converged,
        residual_history: report.residual_history.clone(),
    };
    let rendered = serde_json::to_string_pretty(&response)?;
    println!("{rendered}");
    let mut outputs = Vec::new();
    if let Some(shape_path) = &args.export_shape {
        let shape =
            clothoid_arm::ShapeRep::new(report.kappa.clone(), request.theta0, request.length)?;
        let mut out = create(shape_path)?;
        clothoid_arm::spiral::write_shape_csv(
            &mut out,
            &shape,
            args.stations,
            &clothoid_arm::QuadratureConfig::default(),
        )?;
        out.flush()?;
        outputs.push(path_str(shape_path));
    }
    if let Some(out) = &args.out {
        std::fs::write(out, &rendered)?;
        outputs.push(path_str(out));
        let seed = args.seed.unwrap_or(DEFAULT_SEED);
        write_manifest(
            out,
            "fit",
            seed,
            &request,
            &[path_str(&args.boundary)],
            &outputs,
            started,
        )?;
    }
    Ok(())
}

// ------------------------------------------------------------------- study

#[derive(Args)]
pub struct StudyArgs {
    /// Pressure grid start:stop:step in kPa.
    #[arg(long)]
    pressures: Option<String>,
    /// Load grid start:stop:step in newtons.
    #[arg(long)]
    loads: Option<String>,
    /// Comma-separated load kinds: payload,contact.
    #[arg(long)]
    kinds: Option<String>,
    /// Contact force direction dx,dy.
    #[arg(long, allow_hyphen_values = true)]
    contact_direction: Option<String>,
    /// Per-cell R^2 CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV (defaults to <out stem>_summary.csv).
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    beam: BeamFlags,
}

pub fn study(args: StudyArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: StudyConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => StudyConfig::default(),
    };
    args.beam.apply(&mut cfg.beam);
    if let Some(p) = &args.pressures {
        cfg.pressures_kpa = parse_range(p)?;
    }
    if let Some(l) = &args.loads {
        cfg.loads_n = parse_range(l)?;
    }
    if let Some(k) = &args.kinds {
        cfg.kinds = k.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(d) = &args.contact_direction {
        cfg.contact_direction = parse_pair(d)?;
    }

    let templates: Vec<LoadTemplate> = cfg
        .kinds
        .iter()
        .map(|kind| match kind.as_str() {
            "payload" => Ok(LoadTemplate::Payload),
            "contact" => Ok(LoadTemplate::Contact {
                direction: cfg.contact_direction,
            }),
            other => Err(Error::invalid_config(format!(
                "unknown load kind {other:?} (expected payload or contact)"
            ))),
        })
        .collect::<Result<_>>()?;

    let table = with_worker_pool(args.jobs, || {
        run_validation_study(
            &cfg.beam,
            &cfg.pressures_kpa,
            &cfg.loads_n,
            &templates,
            &cfg.fixed_point,
        )
    })?;
    for failure in &table.failures {
        log::warn!(
            "study cell failed: kind={} P={} kPa load={} N: {}",
            failure.kind.name(),
            failure.pressure_kpa,
            failure.load_n,
            failure.reason
        );
    }

    let mut out = create(&args.out)?;
    beam::write_study_csv(&mut out, &table)?;
    out.flush()?;
    let summary_path = args
        .summary_out
        .clone()
        .unwrap_or_else(|| derive_sibling(&args.out, "_summary"));
    let mut summary_out = create(&summary_path)?;
    beam::write_study_summary_csv(&mut summary_out, &table.summaries())?;
    summary_out.flush()?;

    for s in table.summaries() {
        log::info!(
            "study: kind={} degree={} R^2 = {:.4} +- {:.4}",
            s.kind.name(),
            s.degree,
            s.mean_r2,
            s.std_r2
        );
    }
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    write_manifest(
        &args.out,
        "study",
        seed,
        &cfg,
        &[],
        &[path_str(&args.out), path_str(&summary_path)],
        started,
    )?;
    Ok(())
}

fn derive_sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let ext = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn with_worker_pool<T>(jobs: Option<usize>, run: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match jobs {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid_config(format!("worker pool: {e}")))?;
            pool.install(run)
        }
        Some(_) => Err(Error::invalid_config("--jobs must be positive")),
        None => run(),
    }
}

// ---------------------------------------------------------------- generate

#[derive(Args)]
pub struct GenerateArgs {
    /// Output dataset (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Curvature order of the recovered representation.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Marker position noise std in meters.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Pressure grid start:stop:step in kPa.
    #[arg(long)]
    pressures: Option<String>,
    /// Payload grid start:stop:step in grams.
    #[arg(long)]
    payloads: Option<String>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    beam: BeamFlags,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: GenerateConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => GenerateConfig::default(),
    };
    args.beam.apply(&mut cfg.beam);
    if let Some(order) = args.order {
        cfg.grid.order = order;
    }
    if let Some(seed) = args.seed {
        cfg.grid.seed = seed;
    }
    if let Some(noise) = args.noise_std {
        cfg.grid.noise_std = noise;
    }
    if let Some(p) = &args.pressures {
        cfg.grid.pressures_kpa = parse_range(p)?;
    }
    if let Some(w) = &args.payloads {
        cfg.grid.payloads_g = parse_range(w)?;
    }

    let quad = cfg.quadrature.build()?;
    let outcome = with_worker_pool(args.jobs, || {
        dataset::generate_grid(&cfg.beam, &cfg.grid, &quad)
    })?;
    outcome.dataset.save(&args.out)?;
    let mut outputs = vec![path_str(&args.out)];

    if !outcome.quarantine.is_empty() {
        #[derive(Serialize)]
        struct QuarantineEntry<'a> {
            pressure_kpa: f64,
            payload_g: f64,
            reason: &'a str,
        }
        let entries: Vec<QuarantineEntry> = outcome
            .quarantine
            .iter()
            .map(|q| QuarantineEntry {
                pressure_kpa: q.pressure_kpa,
                payload_g: q.payload_g,
                reason: &q.reason,
            })
            .collect();
        let qpath = args.out.with_extension("quarantine.json");
        std::fs::write(&qpath, serde_json::to_string_pretty(&entries)?)?;
        log::warn!(
            "{} cells quarantined; reasons in {}",
            entries.len(),
            qpath.display()
        );
        outputs.push(path_str(&qpath));
    }

    write_manifest(
        &args.out,
        "generate",
        cfg.grid.seed,
        &cfg,
        &[],
        &outputs,
        started,
    )?;
    Ok(())
}

// ------------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    /// Training dataset (JSON lines).
    #[arg(long)]
    data: PathBuf,
    /// Model role: forward or inverse.
    #[arg(long)]
    role: Option<String>,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Records held out for validation (excluded from training).
    #[arg(long)]
    val_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: TrainConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => TrainConfig::default(),
    };
    if let Some(role) = &args.role {
        cfg.role = role.clone();
    }
    if let Some(v) = args.val_count {
        cfg.val_count = v;
    }
    if let Some(s) = args.seed {
        cfg.split_seed = s;
        cfg.hyper.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.hyper.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        cfg.hyper.learning_rate = lr;
    }
    if let Some(d) = args.decay {
        cfg.hyper.decay = d;
    }
    if let Some(b) = args.batch_size {
        cfg.hyper.batch_size = b;
    }

    let data = Dataset::load(&args.data)?;
    let (train_split, _) = dataset::split(&data.records, cfg.val_count, cfg.split_seed)?;
    log::info!(
        "training on {} records ({} held out)",
        train_split.len(),
        cfg.val_count
    );

    let (model, history) = match cfg.role.as_str() {
        "forward" => {
            learn::train_forward(&train_split, data.meta.order, data.meta.length, &cfg.hyper)?
        }
        "inverse" => learn::train_inverse(&train_split, data.meta.order, &cfg.hyper)?,
        other => {
            return Err(Error::invalid_config(format!(
                "unknown role {other:?} (expected forward or inverse)"
            )))
        }
    };
    save_model(&model, &args.out)?;
    log::info!(
        "trained {} epochs: loss {:.6} -> {:.6}",
        history.len(),
        history.first().unwrap_or(&f64::NAN),
        history.last().unwrap_or(&f64::NAN)
    );
    write_manifest(
        &args.out,
        "train",
        cfg.hyper.seed,
        &cfg,
        &[path_str(&args.data)],
        &[path_str(&args.out)],
        started,
    )?;
    Ok(())
}

// -------------------------------------------------------------------- eval

#[derive(Args)]
pub struct EvalArgs {
    /// Forward evaluation pair, repeatable: <data.jsonl>=<model.json>.
    #[arg(long = "forward", value_name = "DATA=MODEL")]
    forward: Vec<String>,
    /// Inverse evaluation pair, repeatable: <data.jsonl>=<model.json>.
    /// Requires a forward pair of the same curvature order.
    #[arg(long = "inverse", value_name = "DATA=MODEL")]
    inverse: Vec<String>,
    /// Output CSV with per-order mean/std errors.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    val_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_pair_arg(text: &str) -> Result<(PathBuf, PathBuf)> {
    match text.split_once('=') {
        Some((data, model)) if !data.is_empty() && !model.is_empty() => {
            Ok((PathBuf::from(data), PathBuf::from(model)))
        }
        _ => Err(Error::invalid_config(format!(
            "expected <data.jsonl>=<model.json>, got {text:?}"
        ))),
    }
}

fn load_pair(text: &str, expected_role: ModelRole) -> Result<(Dataset, MlpModel)> {
    let (data_path, model_path) = parse_pair_arg(text)?;
    let data = Dataset::load(&data_path)?;
    let model = load_model(&model_path)?;
    if model.role() != Some(expected_role) {
        return Err(Error::RoleMismatch(format!(
            "{} does not hold a {expected_role:?}-role model",
            model_path.display()
        )));
    }
    if model.order() != data.meta.order {
        return Err(Error::RoleMismatch(format!(
            "model order {} disagrees with dataset order {}",
            model.order(),
            data.meta.order
        )));
    }
    Ok((data, model))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: EvalConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => EvalConfig::default(),
    };
    if let Some(v) = args.val_count {
        cfg.val_count = v;
    }
    if let Some(s) = args.seed {
        cfg.split_seed = s;
    }
    if args.forward.is_empty() {
        return Err(Error::invalid_config(
            "eval needs at least one --forward <data>=<model> pair",
        ));
    }
    let quad = cfg.quadrature.build()?;

    let mut rows: BTreeMap<usize, learn::EvalReport> = BTreeMap::new();
    let mut inputs = Vec::new();
    for pair in &args.forward {
        let (data, model) = load_pair(pair, ModelRole::Forward)?;
        inputs.push(pair.clone());
        let (_, val) = dataset::split(&data.records, cfg.val_count, cfg.split_seed)?;
        let errors = learn::evaluate_forward(&model, &val, &data.meta.stations, &quad)?;
        rows.insert(model.order(), errors.report());
    }
    for pair in &args.inverse {
        let (data, model) = load_pair(pair, ModelRole::Inverse)?;
        inputs.push(pair.clone());
        let (_, val) = dataset::split(&data.records, cfg.val_count, cfg.split_seed)?;
        let errors = learn::evaluate_inverse(&model, &val, data.meta.length, PAYLOAD_RANGE_G)?;
        let row = rows.get_mut(&model.order()).ok_or_else(|| {
            Error::invalid_config(format!(
                "inverse pair for order {} needs a matching --forward pair",
                model.order()
            ))
        })?;
        row.load_err = Some(learn::mean_std(&errors));
    }

    let table: Vec<(usize, learn::EvalReport)> = rows.into_iter().collect();
    let mut out = create(&args.out)?;
    learn::write_eval_csv(&mut out, &table)?;
    out.flush()?;
    for (order, report) in &table {
        log::info!(
            "order {order}: tip {:.3} +- {:.3} % of L{}",
            report.pos_err_tip.mean,
            report.pos_err_tip.std,
            report
                .load_err
                .map(|m| format!(", load {:.3} +- {:.3} % of range", m.mean, m.std))
                .unwrap_or_default()
        );
    }
    let seed = args.seed.unwrap_or(cfg.split_seed);
    write_manifest(
        &args.out,
        "eval",
        seed,
        &cfg,
        &inputs,
        &[path_str(&args.out)],
        started,
    )?;
    Ok(())
}

// -------------------------------------------------------------------- plot

#[derive(Args)]
pub struct PlotArgs {
    /// Shape CSV with an `s,x,y,...` header (as written by simulate).
    #[arg(long)]
    input: PathBuf,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.input)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let x_col = columns
        .iter()
        .position(|&c| c == "x")
        .ok_or_else(|| Error::Data(format!("CSV header {header:?} lacks an x column")))?;
    let y_col = columns
        .iter()
        .position(|&c| c == "y")
        .ok_or_else(|| Error::Data(format!("CSV header {header:?} lacks a y column")))?;
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| -> Result<f64> {
            cells
                .get(idx)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| Error::MalformedRecord {
                    line: i + 2,
                    message: format!("cannot parse column {idx}"),
                })
        };
        points.push((parse(x_col)?, parse(y_col)?));
    }
    if points.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    let mut out = create(&args.out)?;
    svg::write_polyline_svg(
        &mut out,
        &points,
        &format!("shape from {}", args.input.display()),
    )?;
    out.flush()?;
    #[derive(Serialize)]
    struct PlotConfig {}
    write_manifest(
        &args.out,
        "plot",
        DEFAULT_SEED,
        &PlotConfig {},
        &[path_str(&args.input)],
        &[path_str(&args.out)],
        started,
    )?;
    Ok(())
}
