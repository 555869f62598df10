//! `canal build | sim | serve`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use canal_core::canal_model::{classify_end, encode_task, Canal, CanalEnd, EndReport, EndTarget};
use canal_core::controller::ControllerConfig;
use canal_core::demo_pipeline::process_demonstrations;
use canal_core::geometry::Vec3;
use canal_core::input_mapping::UserFrame;
use canal_core::simulation::{run_scenario, SimConfig, Simulation, DEFAULT_DT};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bridge::{serve_until, BridgeConfig};
use crate::formats::{
    self, encode_metrics, load_canal, load_controller_config, load_demo, load_scenario, target_label, BuildConfig,
    CanalFile, EndRecord,
};
use crate::protocol::{encode_snapshot, Snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_WARNINGS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "canal", version, about = "Canal-surface shared autonomy: build, simulate, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a canal file from two demonstrations.
    Build(BuildArgs),
    /// Run a scripted scenario and write metrics.
    Sim(SimArgs),
    /// Serve a live simulation over WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignEnds {
    Auto,
    Off,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// First demonstration (JSON).
    #[arg(long)]
    pub demo_a: PathBuf,
    #[arg(long)]
    pub demo_b: PathBuf,
    /// Canal file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of canal states.
    #[arg(long, default_value_t = 200)]
    pub states: usize,
    /// Force near-vertical or near-horizontal ends onto the exact axis.
    #[arg(long, value_enum, default_value_t = AlignEnds::Auto)]
    pub align_ends: AlignEnds,
    /// Share of states at each end affected by end alignment.
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    /// Smoothing weight relative to the squared demonstration length.
    #[arg(long, default_value_t = 1e-4)]
    pub smoothing: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Canal file; defaults to the scenario's `canal` entry.
    #[arg(long)]
    pub canal: Option<PathBuf>,
    /// Scenario (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Metrics CSV to write (header plus one row).
    #[arg(long)]
    pub metrics_out: PathBuf,
    /// Optional JSONL trace, one snapshot per tick.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Flat key=value controller config.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Canal file to play back.
    #[arg(long)]
    pub canal: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Snapshot broadcast rate.
    #[arg(long, default_value_t = 30.0)]
    pub hz: f64,
    /// User position `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,-1,0")]
    pub user_pos: Vec3,
    /// User facing direction `x,y,z` (projected to the ground).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,1,0")]
    pub user_facing: Vec3,
    /// Scenario providing objects (its user frame is ignored).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Flat key=value controller config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Static files served under `/ui`.
    #[arg(long, default_value = "ui")]
    pub ui_dir: PathBuf,
}

pub fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three finite comma-separated numbers, got {s:?}")),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_ERROR;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Build(a) => cmd_build(&a, out),
        Command::Sim(a) => cmd_sim(&a, out),
        Command::Serve(a) => cmd_serve(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn end_line(name: &str, report: &EndReport, fraction: Option<f64>) -> String {
    let a = &report.alignment;
    let mut line = format!("{name}: {} theta_deg={:.3}", target_label(a.target), a.theta.to_degrees());
    match fraction {
        Some(f) => {
            let _ = write!(line, " fraction={f} warnings={}", report.warnings.len());
            if !report.warnings.is_empty() {
                let list: Vec<String> = report.warnings.iter().map(|w| w.to_string()).collect();
                let _ = write!(line, " at={}", list.join(","));
            }
        }
        None => line.push_str(" aligned=off"),
    }
    line
}

/// Deterministic text summary of a build.
pub fn build_summary(canal: &Canal, reports: &[EndReport; 2], fraction: Option<f64>, digest: &str) -> String {
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in &canal.r {
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    let mut s = String::new();
    let _ = writeln!(s, "states: {}", canal.n_states());
    let _ = writeln!(s, "length_m: {:.6}", canal.arc_length());
    let _ = writeln!(s, "radius_m: min={rmin:.6} max={rmax:.6}");
    let _ = writeln!(s, "{}", end_line("head", &reports[0], fraction));
    let _ = writeln!(s, "{}", end_line("tail", &reports[1], fraction));
    let _ = writeln!(s, "digest: {digest}");
    s
}

pub fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.fraction > 0.0 && a.fraction <= 0.5) {
        bail!("--fraction must lie in (0, 0.5], got {}", a.fraction);
    }
    let demo_a = load_demo(&a.demo_a)?;
    let demo_b = load_demo(&a.demo_b)?;
    let config = BuildConfig {
        n_states: a.states,
        smoothing_scale: a.smoothing,
        end_fraction: a.fraction,
        align_ends: a.align_ends == AlignEnds::Auto,
        ..BuildConfig::default()
    };
    let pair = process_demonstrations(&demo_a, &demo_b, &config.pipeline())
        .map_err(|e| anyhow!("{} + {}: {e}", a.demo_a.display(), a.demo_b.display()))?;
    let (canal, mut reports) =
        encode_task(&pair, &config.canal(), config.align_ends).map_err(|e| anyhow!("canal: {e}"))?;
    if !config.align_ends {
        // Report what auto alignment would have targeted.
        for (slot, end) in [CanalEnd::Head, CanalEnd::Tail].into_iter().enumerate() {
            if let Ok(al) = classify_end(&canal, end) {
                reports[slot].alignment = al;
            }
        }
    }
    let ends = reports
        .iter()
        .zip(["head", "tail"])
        .map(|(r, name)| EndRecord {
            end: name.into(),
            target: target_label(if config.align_ends { r.alignment.target } else { EndTarget::None }).into(),
            theta: r.alignment.theta,
            warnings: r.warnings.clone(),
        })
        .collect();
    let file = CanalFile::new(&canal, config, ends);
    formats::write(&a.out, &file.encode())?;
    let fraction = config.align_ends.then_some(config.end_fraction);
    out.write_all(build_summary(&canal, &reports, fraction, &file.digest()).as_bytes())?;
    Ok(if reports.iter().any(|r| !r.warnings.is_empty()) {
        EXIT_WARNINGS
    } else {
        EXIT_OK
    })
}

fn controller_config(path: Option<&Path>) -> Result<ControllerConfig> {
    Ok(match path {
        Some(p) => load_controller_config(p)?,
        None => ControllerConfig::default(),
    })
}

pub fn cmd_sim(a: &SimArgs, out: &mut dyn Write) -> Result<i32> {
    let loaded = load_scenario(&a.scenario)?;
    let canal_path = a
        .canal
        .clone()
        .or(loaded.canal_path.clone())
        .ok_or_else(|| anyhow!("{}: no canal given (use --canal or set `canal` in the scenario)", a.scenario.display()))?;
    let canal = load_canal(&canal_path)?;
    let cfg = SimConfig {
        controller: controller_config(a.config.as_deref())?,
        dt: loaded.file.dt.unwrap_or(DEFAULT_DT),
    };
    let run = run_scenario(&loaded.scenario, &canal.canal, &cfg).map_err(|e| anyhow!("{}: {e}", a.scenario.display()))?;
    formats::write(&a.metrics_out, &encode_metrics(&run.metrics))?;
    if let Some(path) = &a.trace_out {
        let mut text = String::new();
        for rec in &run.trace {
            text.push_str(&encode_snapshot(&Snapshot::from_record(rec, rec.tick, &canal.digest, None)));
            text.push('\n');
        }
        formats::write(path, &text)?;
    }
    let m = &run.metrics;
    writeln!(
        out,
        "scenario: {}\nticks: {}\ncompletion_time_s: {:.4}\ncorrection_time_s: {:.4}\nobjects_placed: {}\nscore: {}\ntimed_out: {}",
        loaded.scenario.name,
        run.trace.len(),
        m.completion_time_s,
        m.correction_time_s,
        m.objects_placed,
        m.score,
        run.timed_out
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_serve(a: &ServeArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.hz > 0.0 && a.hz <= 1.0 / DEFAULT_DT + 1e-9) {
        bail!("--hz must lie in (0, 60]");
    }
    let user = UserFrame::facing(a.user_pos, a.user_facing).map_err(|e| anyhow!("--user-facing: {e}"))?;
    let canal = load_canal(&a.canal)?;
    let objects = match &a.scenario {
        Some(p) => load_scenario(p)?.scenario.objects,
        None => Vec::new(),
    };
    let cfg = SimConfig {
        controller: controller_config(a.config.as_deref())?,
        dt: DEFAULT_DT,
    };
    let sim = Simulation::new(canal.canal.clone(), user, objects, cfg).map_err(|e| anyhow!("{e}"))?;
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.bind, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        writeln!(out, "serving canal {} on ws://{addr}/ws (ui at http://{addr}/ui/)", canal.digest)?;
        out.flush()?;
        let bridge_cfg = BridgeConfig {
            hz: a.hz,
            ui_dir: a.ui_dir.clone(),
            ..BridgeConfig::default()
        };
        let signal = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve_until(listener, sim, canal.file.encode(), canal.digest.clone(), bridge_cfg, signal).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(EXIT_OK)
}
