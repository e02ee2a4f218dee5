//! Command-line front end for the morphwing library: linkage synthesis,
//! wingbeat kinematics, controller simulation, and the bench data
//! pipeline. Artifacts are written atomically and floats are rendered
//! with 9 significant digits, so identical inputs produce byte-identical
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use morphwing::aero::{
    fit_surface, force_records_from_csv, force_records_to_csv, reduce_condition,
    roll_moment_analysis, solve_trim, sos_magnitude, AeroSurface, ManifestEntry, RollCondition,
};
use morphwing::aero::filter::{apply_sos, butterworth_design};
use morphwing::controller::{events_from_csv, outputs_to_csv, simulate, ControllerConfig, ControllerOutput, OutputKind};
use morphwing::crm::{extended_lock, trajectory_to_csv, wingbeat_trajectory, CrmConfig};
use morphwing::flightlog::{agility_metric, ensemble_stats, ensemble_to_csv, AgilityResult, AttitudeLog};
use morphwing::linkage::{
    forward_kinematics, synthesize_linkage_seeded, LinkageDocument, LinkageGiven, PoseConstraint,
    DEFAULT_SEED,
};
use morphwing::util::{g9, json_g9, write_atomic};

#[derive(Parser)]
#[command(name = "morphwing", version, about = "Morphing-wing design and flight-data toolkit")]
struct Cli {
    /// Project configuration file (JSON); built-in reference values when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eight link lengths from the two calibration poses
    Synthesize,
    /// Joint angles at one slider position or over a sweep
    Kinematics {
        /// Linkage document produced by `synthesize`; synthesized from the
        /// config when omitted
        #[arg(long)]
        linkage: Option<PathBuf>,
        /// Single slider position (mm)
        #[arg(long = "x-a")]
        x_a: Option<f64>,
        /// Slider sweep as lo:hi:count
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Sample both wings' skeleton motion over whole wingbeat cycles
    Trajectory {
        #[arg(long)]
        linkage: Option<PathBuf>,
        /// Length of the run in wingbeat cycles
        #[arg(long, default_value_t = 1.0)]
        cycles: f64,
        #[arg(long = "samples-per-cycle", default_value_t = 256)]
        samples_per_cycle: usize,
        /// Constant servo-slider position (mm); extended lock when omitted
        #[arg(long)]
        sis: Option<f64>,
    },
    /// Feed a timed event log through the roll/glide controller
    SimulateController {
        /// Event CSV (t,kind,arg)
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Reduce bench force logs and fit lift/thrust response surfaces
    Fit {
        /// Condition manifest JSON
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Solve the level-flight trim point from fitted surfaces
    Trim {
        /// Surface document produced by `fit`
        #[arg(long)]
        surfaces: Option<PathBuf>,
        /// Vehicle weight (gram-force); config value when omitted
        #[arg(long = "weight-g")]
        weight_g: Option<f64>,
        /// Select one wrist mount angle from a multi-surface document
        #[arg(long)]
        mount: Option<f64>,
    },
    /// Design the bench low-pass filter, or run it over a force log
    Filter {
        #[arg(long = "cutoff-hz")]
        cutoff_hz: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long = "sample-rate-hz", default_value_t = 1000.0)]
        sample_rate_hz: f64,
        /// Force CSV to filter; the filter design is emitted when omitted
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Per-cycle roll moment statistics and frequency regressions
    RollMoment {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long = "sample-rate-hz", default_value_t = 1000.0)]
        sample_rate_hz: f64,
    },
    /// Roll agility metric for one flight, or the aligned ensemble of many
    Agility {
        /// Attitude CSV; repeat for a multi-trial ensemble
        #[arg(long = "log", required = true)]
        logs: Vec<PathBuf>,
        /// Roll excursion to time (degrees)
        #[arg(long = "target-deg", default_value_t = 90.0)]
        target_deg: f64,
        /// Start point in wingbeats (single-log metric)
        #[arg(long = "start-tau", default_value_t = 0.0)]
        start_tau: f64,
        /// Maneuver-onset marker index; once, or once per log
        #[arg(long = "start-marker")]
        start_markers: Vec<usize>,
        #[arg(long = "bins-per-cycle", default_value_t = 20)]
        bins_per_cycle: usize,
        /// Synthesize wingbeat markers at this rate when a log has none
        #[arg(long = "marker-freq-hz")]
        marker_freq_hz: Option<f64>,
        /// First synthetic marker time (s)
        #[arg(long = "marker-t0", default_value_t = 0.0)]
        marker_t0: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Linkage(#[from] morphwing::linkage::LinkageError),
    #[error(transparent)]
    Trajectory(#[from] morphwing::crm::CrmTrajectoryError),
    #[error(transparent)]
    Controller(#[from] morphwing::controller::ControllerError),
    #[error(transparent)]
    Aero(#[from] morphwing::aero::AeroError),
    #[error(transparent)]
    FlightLog(#[from] morphwing::flightlog::FlightLogError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Linkage(_) => "linkage",
            CliError::Trajectory(_) => "trajectory",
            CliError::Controller(_) => "controller",
            CliError::Aero(_) => "aero",
            CliError::FlightLog(_) => "flightlog",
        }
    }
}

/// Everything a run needs besides its own flags. `base` is the config
/// file's directory; paths taken from the config resolve against it.
struct Project {
    cfg: ProjectConfig,
    base: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
struct ProjectConfig {
    linkage: LinkageGiven,
    crm: CrmConfig,
    wrist_mount_deg: f64,
    controller: ControllerConfig,
    pipeline: PipelineConfig,
    paths: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
struct PipelineConfig {
    filter_cutoff_hz: f64,
    filter_order: usize,
    weight_g: f64,
    rmse_flag_nm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { filter_cutoff_hz: 12.0, filter_order: 5, weight_g: 600.0, rmse_flag_nm: 0.007 }
    }
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            linkage: LinkageGiven {
                l_h: 110.0,
                l_r: 180.0,
                l_m: 370.0,
                b: 20.0,
                f: 30.0,
                extended: PoseConstraint {
                    theta_s: Some(51.0),
                    theta_e: 110.0,
                    theta_w: 147.0,
                    x_a: 45.0,
                },
                tucked: PoseConstraint {
                    theta_s: Some(20.0),
                    theta_e: 41.0,
                    theta_w: 35.0,
                    x_a: 65.0,
                },
            },
            crm: CrmConfig { r: 47.0, h: 120.0, gear_rate: 3.0, mis_travel: [0.0, 16.0] },
            wrist_mount_deg: 25.0,
            controller: ControllerConfig::default(),
            pipeline: PipelineConfig::default(),
            paths: BTreeMap::new(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            let payload = json!({"error": {"kind": err.kind(), "message": err.to_string()}});
            eprintln!("{}", json_g9(&payload));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let project = load_project(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    let format = cli.format;
    match cli.command {
        Command::Synthesize => cmd_synthesize(&project, out, format),
        Command::Kinematics { linkage, x_a, sweep } => {
            cmd_kinematics(&project, out, format, linkage, x_a, sweep)
        }
        Command::Trajectory { linkage, cycles, samples_per_cycle, sis } => {
            cmd_trajectory(&project, out, format, linkage, cycles, samples_per_cycle, sis)
        }
        Command::SimulateController { events } => {
            cmd_simulate_controller(&project, out, format, events)
        }
        Command::Fit { manifest } => cmd_fit(&project, out, format, manifest),
        Command::Trim { surfaces, weight_g, mount } => {
            cmd_trim(&project, out, format, surfaces, weight_g, mount)
        }
        Command::Filter { cutoff_hz, order, sample_rate_hz, input } => {
            cmd_filter(&project, out, format, cutoff_hz, order, sample_rate_hz, input)
        }
        Command::RollMoment { manifest, sample_rate_hz } => {
            cmd_roll_moment(&project, out, format, manifest, sample_rate_hz)
        }
        Command::Agility {
            logs,
            target_deg,
            start_tau,
            start_markers,
            bins_per_cycle,
            marker_freq_hz,
            marker_t0,
        } => cmd_agility(
            &project,
            out,
            format,
            logs,
            target_deg,
            start_tau,
            start_markers,
            bins_per_cycle,
            marker_freq_hz,
            marker_t0,
        ),
    }
}

fn load_project(path: Option<&Path>) -> Result<Project, CliError> {
    let Some(path) = path else {
        return Ok(Project { cfg: ProjectConfig::default(), base: None });
    };
    let text = read_text(path)?;
    let cfg: ProjectConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Project { cfg, base: path.parent().map(Path::to_path_buf) })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Explicit flag first, then the config's `paths` table (resolved against
/// the config file's directory).
fn resolve_input(
    flag: Option<PathBuf>,
    project: &Project,
    key: &str,
    flag_name: &str,
) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if let Some(entry) = project.cfg.paths.get(key) {
        let p = PathBuf::from(entry);
        return Ok(match (&project.base, p.is_relative()) {
            (Some(base), true) => base.join(p),
            _ => p,
        });
    }
    Err(CliError::Usage(format!("--{flag_name} is required (or set paths.{key} in the config)")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => write_atomic(path, text.as_bytes())
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seed_from_env() -> Result<u64, CliError> {
    match std::env::var("MORPHWING_SEED") {
        Ok(s) => s.trim().parse::<u64>().map_err(|_| {
            CliError::Config(format!("MORPHWING_SEED must be an unsigned integer, got {s:?}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(e) => Err(CliError::Config(format!("MORPHWING_SEED: {e}"))),
    }
}

/// Loads a synthesized linkage document, or synthesizes one from the
/// config's givens when no document is supplied.
fn resolve_linkage(
    flag: Option<PathBuf>,
    project: &Project,
) -> Result<(LinkageGiven, morphwing::linkage::LinkageDerived), CliError> {
    if let Some(path) = flag {
        let text = read_text(&path)?;
        let doc: LinkageDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let derived = doc.derived.ok_or_else(|| {
            CliError::Config(format!(
                "{}: no derived lengths; run synthesize first",
                path.display()
            ))
        })?;
        return Ok((doc.given, derived));
    }
    let given = project.cfg.linkage.clone();
    let derived = synthesize_linkage_seeded(&given, seed_from_env()?)?;
    Ok((given, derived))
}

fn cmd_synthesize(project: &Project, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    let given = project.cfg.linkage.clone();
    let derived = synthesize_linkage_seeded(&given, seed_from_env()?)?;
    match format {
        Format::Json => {
            let doc = LinkageDocument { given, derived: Some(derived) };
            emit(out, &json_g9(&serde_json::to_value(&doc).expect("document serializes")))
        }
        Format::Csv => {
            let mut text = String::from("length,mm\n");
            for (name, value) in [
                ("a", derived.a),
                ("c", derived.c),
                ("d", derived.d),
                ("e", derived.e),
                ("g", derived.g),
                ("h", derived.h),
                ("i", derived.i),
                ("j", derived.j),
            ] {
                text.push_str(&format!("{name},{}\n", g9(value)));
            }
            emit(out, &text)
        }
    }
}

fn cmd_kinematics(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    linkage: Option<PathBuf>,
    x_a: Option<f64>,
    sweep: Option<String>,
) -> Result<(), CliError> {
    let (given, derived) = resolve_linkage(linkage, project)?;
    let positions: Vec<f64> = match (x_a, sweep) {
        (Some(x), None) => vec![x],
        (None, Some(spec)) => parse_sweep(&spec)?,
        _ => return Err(CliError::Usage("pass exactly one of --x-a or --sweep".into())),
    };
    let single = positions.len() == 1;

    let mut rows = Vec::with_capacity(positions.len());
    for &x in &positions {
        let state = forward_kinematics(&derived, &given, x)?;
        rows.push((x, state.theta_s.to_degrees(), state.theta_e.to_degrees(), state.theta_w.to_degrees()));
    }
    match format {
        Format::Json => {
            let values: Vec<Value> = rows
                .iter()
                .map(|&(x, s, e, w)| {
                    json!({"x_a_mm": x, "theta_s_deg": s, "theta_e_deg": e, "theta_w_deg": w})
                })
                .collect();
            let doc = if single { values.into_iter().next().unwrap() } else { Value::Array(values) };
            emit(out, &json_g9(&doc))
        }
        Format::Csv => {
            let mut text = String::from("x_a_mm,theta_s_deg,theta_e_deg,theta_w_deg\n");
            for (x, s, e, w) in rows {
                text.push_str(&format!("{},{},{},{}\n", g9(x), g9(s), g9(e), g9(w)));
            }
            emit(out, &text)
        }
    }
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let usage = || CliError::Usage(format!("--sweep expects lo:hi:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(usage());
    }
    let lo: f64 = parts[0].parse().map_err(|_| usage())?;
    let hi: f64 = parts[1].parse().map_err(|_| usage())?;
    let count: usize = parts[2].parse().map_err(|_| usage())?;
    if count < 2 || !(hi > lo) {
        return Err(usage());
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

fn cmd_trajectory(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    linkage: Option<PathBuf>,
    cycles: f64,
    samples_per_cycle: usize,
    sis: Option<f64>,
) -> Result<(), CliError> {
    let (given, derived) = resolve_linkage(linkage, project)?;
    let crm = project.cfg.crm;
    let sis_value = sis.unwrap_or_else(|| extended_lock(&crm));
    let duration = cycles / crm.gear_rate;
    let samples = wingbeat_trajectory(
        &crm,
        &given,
        &derived,
        project.cfg.wrist_mount_deg.to_radians(),
        |_, _| sis_value,
        duration,
        samples_per_cycle,
    )?;
    match format {
        Format::Csv => emit(out, &trajectory_to_csv(&samples)),
        Format::Json => {
            let rows: Vec<Value> = samples
                .iter()
                .map(|s| {
                    json!({
                        "t": s.t,
                        "side": s.side.as_str(),
                        "gear_angle_rad": s.gear_angle,
                        "flap_angle_rad": s.flap_angle,
                        "x_mis_mm": s.x_mis,
                        "x_sis_mm": s.x_sis,
                        "x_os_mm": s.x_os,
                        "wrist": [s.pose.wrist.x, s.pose.wrist.y, s.pose.wrist.z],
                        "tip": [s.pose.wingtip.x, s.pose.wingtip.y, s.pose.wingtip.z],
                    })
                })
                .collect();
            emit(out, &json_g9(&Value::Array(rows)))
        }
    }
}

fn cmd_simulate_controller(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    events: Option<PathBuf>,
) -> Result<(), CliError> {
    let path = resolve_input(events, project, "events", "events")?;
    let events = events_from_csv(&read_text(&path)?)?;
    let outputs = simulate(&project.cfg.controller, &events)?;
    match format {
        Format::Csv => emit(out, &outputs_to_csv(&outputs)),
        Format::Json => {
            let rows: Vec<Value> = outputs.iter().map(output_value).collect();
            emit(out, &json_g9(&Value::Array(rows)))
        }
    }
}

fn output_value(o: &ControllerOutput) -> Value {
    match o.kind {
        OutputKind::ServoPulse { side, start, duration } => json!({
            "t": o.t, "kind": "servo_pulse", "side": side.as_str(),
            "start": start, "duration": duration,
        }),
        OutputKind::MotorStop => json!({"t": o.t, "kind": "motor_stop"}),
        OutputKind::RollWithoutPeriod { side } => {
            json!({"t": o.t, "kind": "warn_roll_without_period", "side": side.as_str()})
        }
        OutputKind::RollDropped { side } => {
            json!({"t": o.t, "kind": "warn_roll_dropped", "side": side.as_str()})
        }
    }
}

/// One reduced bench condition: wind-axis cycle means tagged with the
/// manifest's setpoints.
struct Reduced {
    mount: f64,
    alpha: f64,
    freq: f64,
    lift_g: f64,
    thrust_g: f64,
}

fn load_manifest(path: &Path) -> Result<(Vec<ManifestEntry>, PathBuf), CliError> {
    let entries: Vec<ManifestEntry> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((entries, base))
}

fn cmd_fit(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    manifest: Option<PathBuf>,
) -> Result<(), CliError> {
    let path = resolve_input(manifest, project, "manifest", "manifest")?;
    let (entries, base) = load_manifest(&path)?;
    let mut reduced = Vec::with_capacity(entries.len());
    for entry in &entries {
        let records = force_records_from_csv(&read_text(&base.join(&entry.file))?)?;
        let (lift_g, thrust_g) = reduce_condition(&records, entry.alpha_deg, entry.g_offset_n)?;
        reduced.push(Reduced {
            mount: entry.wrist_mount_deg,
            alpha: entry.alpha_deg,
            freq: entry.freq_hint_hz,
            lift_g,
            thrust_g,
        });
    }
    reduced.sort_by(|a, b| {
        (a.mount, a.alpha, a.freq)
            .partial_cmp(&(b.mount, b.alpha, b.freq))
            .expect("finite manifest setpoints")
    });

    let mut fits: Vec<(f64, AeroSurface, AeroSurface)> = Vec::new();
    let mut i = 0;
    while i < reduced.len() {
        let mount = reduced[i].mount;
        let group_end = reduced[i..].iter().position(|r| r.mount != mount).map_or(reduced.len(), |p| i + p);
        let group = &reduced[i..group_end];
        let lift_pts: Vec<(f64, f64, f64)> = group.iter().map(|r| (r.alpha, r.freq, r.lift_g)).collect();
        let thrust_pts: Vec<(f64, f64, f64)> = group.iter().map(|r| (r.alpha, r.freq, r.thrust_g)).collect();
        fits.push((mount, fit_surface(&lift_pts)?, fit_surface(&thrust_pts)?));
        i = group_end;
    }

    match format {
        Format::Json => {
            let surfaces: Vec<Value> = fits
                .iter()
                .map(|(mount, lift, thrust)| {
                    json!({
                        "wrist_mount_deg": mount,
                        "lift": serde_json::to_value(lift).expect("surface serializes"),
                        "thrust": serde_json::to_value(thrust).expect("surface serializes"),
                    })
                })
                .collect();
            emit(out, &json_g9(&json!({ "surfaces": surfaces })))
        }
        Format::Csv => {
            let mut text = String::from("wrist_mount_deg,channel,z0,a,b,c,d,f,r_value,rmse_g,n_points\n");
            for (mount, lift, thrust) in &fits {
                for (channel, s) in [("lift", lift), ("thrust", thrust)] {
                    text.push_str(&format!(
                        "{},{channel},{},{},{},{},{},{},{},{},{}\n",
                        g9(*mount),
                        g9(s.z0),
                        g9(s.a),
                        g9(s.b),
                        g9(s.c),
                        g9(s.d),
                        g9(s.f),
                        g9(s.r_value),
                        g9(s.rmse_g),
                        s.n_points,
                    ));
                }
            }
            emit(out, &text)
        }
    }
}

#[derive(Deserialize)]
struct SurfaceEntry {
    #[serde(default)]
    wrist_mount_deg: Option<f64>,
    lift: AeroSurface,
    thrust: AeroSurface,
}

#[derive(Deserialize)]
struct SurfacesDoc {
    surfaces: Vec<SurfaceEntry>,
}

fn cmd_trim(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    surfaces: Option<PathBuf>,
    weight_g: Option<f64>,
    mount: Option<f64>,
) -> Result<(), CliError> {
    let path = resolve_input(surfaces, project, "surfaces", "surfaces")?;
    let text = read_text(&path)?;
    let mut entries = match serde_json::from_str::<SurfacesDoc>(&text) {
        Ok(doc) => doc.surfaces,
        Err(_) => vec![serde_json::from_str::<SurfaceEntry>(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?],
    };
    if let Some(m) = mount {
        entries.retain(|e| e.wrist_mount_deg == Some(m));
        if entries.is_empty() {
            return Err(CliError::Config(format!(
                "{}: no surface with wrist_mount_deg = {}",
                path.display(),
                g9(m)
            )));
        }
    }
    let weight = weight_g.unwrap_or(project.cfg.pipeline.weight_g);

    let mut solved = Vec::with_capacity(entries.len());
    for entry in &entries {
        solved.push((entry, solve_trim(&entry.lift, &entry.thrust, weight)?));
    }

    match format {
        Format::Json => {
            let trims: Vec<Value> = solved
                .iter()
                .map(|(entry, sol)| {
                    let mut obj = serde_json::Map::new();
                    if let Some(m) = entry.wrist_mount_deg {
                        obj.insert("wrist_mount_deg".into(), json!(m));
                    }
                    obj.insert("alpha_star_deg".into(), json!(sol.trim.alpha_star));
                    obj.insert("freq_star_hz".into(), json!(sol.trim.freq_star));
                    obj.insert("lift_at_trim_g".into(), json!(sol.trim.lift_at_trim));
                    Value::Object(obj)
                })
                .collect();
            let doc = if trims.len() == 1 {
                let mut obj = json!({"weight_g": weight});
                obj.as_object_mut().unwrap().extend(trims[0].as_object().unwrap().clone());
                obj
            } else {
                json!({"weight_g": weight, "trims": trims})
            };
            emit(out, &json_g9(&doc))
        }
        Format::Csv => {
            // plot series: the zero-thrust contour of each surface pair,
            // with the solved trim point as its own row kind
            let mut text = String::from("wrist_mount_deg,alpha_deg,freq_hz,kind\n");
            for (entry, sol) in &solved {
                let mount_txt = entry.wrist_mount_deg.map(g9).unwrap_or_default();
                for (alpha, freq) in &sol.contour {
                    text.push_str(&format!("{mount_txt},{},{},contour\n", g9(*alpha), g9(*freq)));
                }
                text.push_str(&format!(
                    "{mount_txt},{},{},trim\n",
                    g9(sol.trim.alpha_star),
                    g9(sol.trim.freq_star)
                ));
            }
            emit(out, &text)
        }
    }
}

fn cmd_filter(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    cutoff_hz: Option<f64>,
    order: Option<usize>,
    sample_rate_hz: f64,
    input: Option<PathBuf>,
) -> Result<(), CliError> {
    let cutoff = cutoff_hz.unwrap_or(project.cfg.pipeline.filter_cutoff_hz);
    let order = order.unwrap_or(project.cfg.pipeline.filter_order);
    let sections = butterworth_design(sample_rate_hz, cutoff, order)?;

    if let Some(path) = input {
        if format == Format::Json {
            return Err(CliError::Usage("filtered force logs are CSV only".into()));
        }
        let mut records = force_records_from_csv(&read_text(&path)?)?;
        let channels: [fn(&mut morphwing::aero::ForceRecord) -> &mut f64; 6] = [
            |r| &mut r.fx,
            |r| &mut r.fy,
            |r| &mut r.fz,
            |r| &mut r.mx,
            |r| &mut r.my,
            |r| &mut r.mz,
        ];
        for pick in channels {
            let channel: Vec<f64> = records.iter_mut().map(|r| *pick(r)).collect();
            for (r, v) in records.iter_mut().zip(apply_sos(&sections, &channel)) {
                *pick(r) = v;
            }
        }
        return emit(out, &force_records_to_csv(&records));
    }

    match format {
        Format::Json => emit(
            out,
            &json_g9(&json!({
                "sample_rate_hz": sample_rate_hz,
                "cutoff_hz": cutoff,
                "order": order,
                "sections": serde_json::to_value(&sections).expect("sections serialize"),
            })),
        ),
        Format::Csv => {
            let mut text = String::from("freq_hz,magnitude,magnitude_db\n");
            for k in 0..=500 {
                let freq = sample_rate_hz / 2.0 * k as f64 / 500.0;
                let mag = sos_magnitude(&sections, freq, sample_rate_hz);
                let db = 20.0 * mag.max(1e-15).log10();
                text.push_str(&format!("{},{},{}\n", g9(freq), g9(mag), g9(db)));
            }
            emit(out, &text)
        }
    }
}

fn cmd_roll_moment(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    manifest: Option<PathBuf>,
    sample_rate_hz: f64,
) -> Result<(), CliError> {
    let path = resolve_input(manifest, project, "roll_manifest", "manifest")?;
    let (entries, base) = load_manifest(&path)?;
    let mut conditions = Vec::with_capacity(entries.len());
    for entry in &entries {
        let records = force_records_from_csv(&read_text(&base.join(&entry.file))?)?;
        conditions.push(RollCondition {
            alpha_deg: entry.alpha_deg,
            freq_hz: entry.freq_hint_hz,
            records,
        });
    }
    let analysis = roll_moment_analysis(
        &conditions,
        sample_rate_hz,
        project.cfg.pipeline.filter_cutoff_hz,
        project.cfg.pipeline.filter_order,
        project.cfg.pipeline.rmse_flag_nm,
    )?;
    match format {
        Format::Json => emit(out, &json_g9(&serde_json::to_value(&analysis).expect("analysis serializes"))),
        Format::Csv => {
            let mut text = String::from("alpha_deg,freq_hz,mean_nm,rmse_nm,n_cycles,flagged\n");
            for c in &analysis.conditions {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    g9(c.alpha_deg),
                    g9(c.freq_hz),
                    g9(c.stats.mean),
                    g9(c.stats.rmse_across_cycles),
                    c.stats.n_cycles,
                    u8::from(c.flagged),
                ));
            }
            emit(out, &text)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_agility(
    project: &Project,
    out: Option<&Path>,
    format: Format,
    logs: Vec<PathBuf>,
    target_deg: f64,
    start_tau: f64,
    start_markers: Vec<usize>,
    bins_per_cycle: usize,
    marker_freq_hz: Option<f64>,
    marker_t0: f64,
) -> Result<(), CliError> {
    let _ = project;
    let mut trials = Vec::with_capacity(logs.len());
    for path in &logs {
        let mut log = AttitudeLog::from_csv(&read_text(path)?)?;
        if log.markers.len() < 2 {
            if let Some(freq) = marker_freq_hz {
                log = log.with_uniform_markers(freq, marker_t0);
            }
        }
        trials.push(log);
    }

    if trials.len() == 1 {
        let metric = agility_metric(&trials[0], target_deg, start_tau)?;
        if format == Format::Csv {
            return Err(CliError::Usage(
                "CSV output applies to multi-trial ensembles; single-log metrics are JSON".into(),
            ));
        }
        let doc = match metric {
            AgilityResult::Crossing { cycles } => json!({
                "target_deg": target_deg, "start_tau": start_tau,
                "result": "crossing", "cycles": cycles,
            }),
            AgilityResult::NoCrossing => json!({
                "target_deg": target_deg, "start_tau": start_tau,
                "result": "no_crossing",
            }),
        };
        return emit(out, &json_g9(&doc));
    }

    let markers = match start_markers.len() {
        0 => vec![0; trials.len()],
        1 => vec![start_markers[0]; trials.len()],
        n if n == trials.len() => start_markers,
        _ => {
            return Err(CliError::Usage(
                "--start-marker must appear once, or once per --log".into(),
            ))
        }
    };
    let ensemble = ensemble_stats(&trials, &markers, bins_per_cycle)?;
    match format {
        Format::Csv => emit(out, &ensemble_to_csv(&ensemble)),
        Format::Json => emit(out, &json_g9(&serde_json::to_value(&ensemble).expect("ensemble serializes"))),
    }
}
