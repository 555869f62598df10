//! On-disk formats: demonstrations, canals, scenarios, metrics, controller
//! config. See `docs/formats.md`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use canal_core::canal_model::{Canal, CanalConfig, EndTarget};
use canal_core::controller::{Buttons, ControllerConfig};
use canal_core::demo_pipeline::{Demonstration, PipelineConfig, Pose, Sample};
use canal_core::geometry::{UnitQuat, Vec3};
use canal_core::input_mapping::{Classification, UserFrame};
use canal_core::simulation::{
    Drum, ObjectState, RunMetrics, Scenario, ScriptEntry, WallPlane, WorldObject, DEFAULT_GRASP_RADIUS,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CANAL_FORMAT: &str = "canal/1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: invalid content: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    fn parse(path: &Path, e: impl std::fmt::Display) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    fn invalid(path: &Path, e: impl std::fmt::Display) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn r3(v: Vec3) -> [f64; 3] {
    [round9(v.x), round9(v.y), round9(v.z)]
}

// ---------------------------------------------------------------- demos

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSample {
    pub t: f64,
    pub p: [f64; 3],
    /// `[w, x, y, z]`; identity when omitted.
    #[serde(default = "identity_q")]
    pub q: [f64; 4],
}

fn identity_q() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoFile {
    pub label: String,
    pub samples: Vec<DemoSample>,
}

impl DemoFile {
    pub fn from_demonstration(d: &Demonstration) -> Self {
        DemoFile {
            label: d.label.clone(),
            samples: d
                .samples
                .iter()
                .map(|s| DemoSample {
                    t: s.t,
                    p: s.pose.position.to_array(),
                    q: s.pose.orientation.to_array(),
                })
                .collect(),
        }
    }

    pub fn to_demonstration(&self) -> Result<Demonstration, String> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let q = UnitQuat::from_array(s.q).map_err(|e| format!("sample {i}: q: {e}"))?;
                Ok(Sample {
                    t: s.t,
                    pose: Pose::new(Vec3::from_array(s.p), q),
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Demonstration::new(self.label.clone(), samples).map_err(|e| e.to_string())
    }
}

pub fn load_demo(path: &Path) -> Result<Demonstration, FormatError> {
    let file: DemoFile = serde_json::from_str(&read(path)?).map_err(|e| FormatError::parse(path, e))?;
    file.to_demonstration().map_err(|e| FormatError::invalid(path, e))
}

pub fn encode_demo(d: &Demonstration) -> String {
    let f = DemoFile::from_demonstration(d);
    let mut out = String::new();
    let _ = writeln!(out, "{{\n  \"label\": {},\n  \"samples\": [", serde_json::to_string(&f.label).unwrap());
    for (i, s) in f.samples.iter().enumerate() {
        let sep = if i + 1 < f.samples.len() { "," } else { "" };
        let _ = writeln!(out, "    {}{sep}", serde_json::to_string(s).unwrap());
    }
    out.push_str("  ]\n}\n");
    out
}

// ---------------------------------------------------------------- canals

/// Parameters a canal was built with; stored alongside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub n_states: usize,
    pub smoothing_scale: f64,
    pub r_min: f64,
    pub axis_window: usize,
    pub end_fraction: f64,
    pub max_relax_iterations: usize,
    pub align_ends: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let c = CanalConfig::default();
        BuildConfig {
            n_states: p.n_states,
            smoothing_scale: p.smoothing_scale,
            r_min: c.r_min,
            axis_window: c.axis_window,
            end_fraction: c.end_fraction,
            max_relax_iterations: c.max_relax_iterations,
            align_ends: true,
        }
    }
}

impl BuildConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            n_states: self.n_states,
            smoothing_scale: self.smoothing_scale,
        }
    }

    pub fn canal(&self) -> CanalConfig {
        CanalConfig {
            r_min: self.r_min,
            axis_window: self.axis_window,
            end_fraction: self.end_fraction,
            max_relax_iterations: self.max_relax_iterations,
        }
    }

    fn rounded(self) -> Self {
        BuildConfig {
            smoothing_scale: round9(self.smoothing_scale),
            r_min: round9(self.r_min),
            end_fraction: round9(self.end_fraction),
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub end: String,
    pub target: String,
    pub theta: f64,
    pub warnings: Vec<usize>,
}

pub fn target_label(t: EndTarget) -> &'static str {
    match t {
        EndTarget::Vertical => "vertical",
        EndTarget::Horizontal => "horizontal",
        EndTarget::None => "none",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanalFile {
    pub format: String,
    pub states: usize,
    pub config: BuildConfig,
    #[serde(default)]
    pub ends: Vec<EndRecord>,
    pub d: Vec<[f64; 3]>,
    pub e_t: Vec<[f64; 3]>,
    pub r: Vec<f64>,
    pub x_axis: Vec<[f64; 3]>,
    pub y_axis: Vec<[f64; 3]>,
    pub q: Vec<[f64; 4]>,
}

impl CanalFile {
    /// Canonical (9-significant-digit) form of `canal`.
    pub fn new(canal: &Canal, config: BuildConfig, ends: Vec<EndRecord>) -> Self {
        CanalFile {
            format: CANAL_FORMAT.to_string(),
            states: canal.n_states(),
            config: config.rounded(),
            ends: ends
                .into_iter()
                .map(|e| EndRecord {
                    theta: round9(e.theta),
                    ..e
                })
                .collect(),
            d: canal.d.iter().map(|&v| r3(v)).collect(),
            e_t: canal.e_t.iter().map(|&v| r3(v)).collect(),
            r: canal.r.iter().map(|&v| round9(v)).collect(),
            x_axis: canal.x_axis.iter().map(|&v| r3(v)).collect(),
            y_axis: canal.y_axis.iter().map(|&v| r3(v)).collect(),
            q: canal.q.iter().map(|q| q.to_array().map(round9)).collect(),
        }
    }

    pub fn to_canal(&self) -> Result<Canal, String> {
        if self.format != CANAL_FORMAT {
            return Err(format!("unsupported format tag {:?} (expected {CANAL_FORMAT:?})", self.format));
        }
        let n = self.states;
        let lens = [self.d.len(), self.e_t.len(), self.r.len(), self.x_axis.len(), self.y_axis.len(), self.q.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(format!("array lengths {lens:?} do not all equal states = {n}"));
        }
        // Stored quaternions are already canonical unit quaternions at
        // file precision; keep them verbatim.
        let q = self
            .q
            .iter()
            .map(|&[w, x, y, z]| {
                let norm = (w * w + x * x + y * y + z * z).sqrt();
                if (norm - 1.0).abs() > 1e-6 {
                    Err(format!("quaternion {:?} is not unit", [w, x, y, z]))
                } else {
                    Ok(UnitQuat { w, x, y, z })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let canal = Canal {
            d: self.d.iter().map(|&a| Vec3::from_array(a)).collect(),
            e_t: self.e_t.iter().map(|&a| Vec3::from_array(a)).collect(),
            r: self.r.clone(),
            x_axis: self.x_axis.iter().map(|&a| Vec3::from_array(a)).collect(),
            y_axis: self.y_axis.iter().map(|&a| Vec3::from_array(a)).collect(),
            q,
        };
        canal.check(1e-6).map_err(|e| e.to_string())?;
        Ok(canal)
    }

    /// Canonical text: one array element per line.
    pub fn encode(&self) -> String {
        fn rows<T: Serialize>(out: &mut String, key: &str, items: &[T], last: bool) {
            let _ = writeln!(out, "  \"{key}\": [");
            for (i, it) in items.iter().enumerate() {
                let sep = if i + 1 < items.len() { "," } else { "" };
                let _ = writeln!(out, "    {}{sep}", serde_json::to_string(it).unwrap());
            }
            let _ = writeln!(out, "  ]{}", if last { "" } else { "," });
        }
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"format\": {},", serde_json::to_string(&self.format).unwrap());
        let _ = writeln!(out, "  \"states\": {},", self.states);
        let _ = writeln!(out, "  \"config\": {},", serde_json::to_string(&self.config).unwrap());
        rows(&mut out, "ends", &self.ends, false);
        rows(&mut out, "d", &self.d, false);
        rows(&mut out, "e_t", &self.e_t, false);
        rows(&mut out, "r", &self.r, false);
        rows(&mut out, "x_axis", &self.x_axis, false);
        rows(&mut out, "y_axis", &self.y_axis, false);
        rows(&mut out, "q", &self.q, true);
        out.push_str("}\n");
        out
    }

    pub fn decode(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Hex SHA-256 of the canonical encoding.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.encode().as_bytes()))
    }
}

pub struct LoadedCanal {
    pub canal: Canal,
    pub file: CanalFile,
    pub digest: String,
}

pub fn load_canal(path: &Path) -> Result<LoadedCanal, FormatError> {
    let file = CanalFile::decode(&read(path)?).map_err(|e| FormatError::parse(path, e))?;
    let canal = file.to_canal().map_err(|e| FormatError::invalid(path, e))?;
    Ok(LoadedCanal {
        digest: file.digest(),
        canal,
        file,
    })
}

// ---------------------------------------------------------------- scenarios

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub position: [f64; 3],
    pub facing: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub position: [f64; 3],
    #[serde(default = "default_grasp_radius")]
    pub grasp_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
}

fn default_grasp_radius() -> f64 {
    DEFAULT_GRASP_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrumSpec {
    pub center: [f64; 3],
    pub inner_radius: f64,
    pub rim_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    #[serde(default = "default_wall_tolerance")]
    pub tolerance: f64,
}

fn default_wall_tolerance() -> f64 {
    0.005
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSpec {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stick: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buttons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canal: Option<String>,
    pub timeout_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub user: UserSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<ObjectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drum: Option<DrumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallSpec>,
    #[serde(default)]
    pub script: Vec<ScriptSpec>,
}

pub fn parse_button(name: &str) -> Option<Buttons> {
    let mut b = Buttons::NONE;
    match name {
        "start" => b.start = true,
        "stop" => b.stop = true,
        "toggle_direction" => b.toggle_direction = true,
        "toggle_gripper" => b.toggle_gripper = true,
        _ => return None,
    }
    Some(b)
}

pub fn button_names(b: Buttons) -> Vec<&'static str> {
    let mut out = Vec::new();
    if b.start {
        out.push("start");
    }
    if b.stop {
        out.push("stop");
    }
    if b.toggle_direction {
        out.push("toggle_direction");
    }
    if b.toggle_gripper {
        out.push("toggle_gripper");
    }
    out
}

fn finite3(a: [f64; 3]) -> bool {
    a.iter().all(|v| v.is_finite())
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario, String> {
        if !finite3(self.user.position) {
            return Err("user.position must be finite".into());
        }
        let user = UserFrame::facing(Vec3::from_array(self.user.position), Vec3::from_array(self.user.facing))
            .map_err(|e| format!("user.facing: {e}"))?;
        let mut objects = Vec::new();
        for o in &self.objects {
            if !finite3(o.position) || !(o.grasp_radius > 0.0) {
                return Err(format!("object {:?}: position must be finite and grasp_radius > 0", o.id));
            }
            objects.push(WorldObject {
                id: o.id.clone(),
                position: Vec3::from_array(o.position),
                grasp_radius: o.grasp_radius,
                target: o.target.map(Vec3::from_array),
                state: ObjectState::Free,
            });
        }
        let mut script = Vec::new();
        for (i, e) in self.script.iter().enumerate() {
            let mut buttons = Buttons::NONE;
            for name in &e.buttons {
                buttons = buttons.merge(parse_button(name).ok_or_else(|| format!("script[{i}]: unknown button {name:?}"))?);
            }
            if let Some([u, v]) = e.stick {
                if !(u.abs() <= 1.0 && v.abs() <= 1.0) {
                    return Err(format!("script[{i}]: stick values must lie in [-1, 1]"));
                }
            }
            script.push(ScriptEntry {
                t: e.t,
                stick: e.stick.map(|[u, v]| (u, v)),
                buttons,
            });
        }
        let wall = match &self.wall {
            Some(w) => Some(WallPlane {
                point: Vec3::from_array(w.point),
                normal: Vec3::from_array(w.normal)
                    .normalize()
                    .map_err(|_| "wall.normal must be non-zero".to_string())?,
                tolerance: w.tolerance,
            }),
            None => None,
        };
        let scenario = Scenario {
            name: self.name.clone(),
            canal: self.canal.clone(),
            user,
            objects,
            script,
            timeout_s: self.timeout_s,
            drum: self.drum.as_ref().map(|d| Drum {
                center: Vec3::from_array(d.center),
                inner_radius: d.inner_radius,
                rim_radius: d.rim_radius,
            }),
            wall,
        };
        scenario.validate().map_err(|e| e.to_string())?;
        Ok(scenario)
    }
}

pub struct LoadedScenario {
    pub scenario: Scenario,
    pub file: ScenarioFile,
    /// `canal` resolved against the scenario's directory.
    pub canal_path: Option<PathBuf>,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, FormatError> {
    let file: ScenarioFile = toml::from_str(&read(path)?).map_err(|e| FormatError::parse(path, e))?;
    let scenario = file.to_scenario().map_err(|e| FormatError::invalid(path, e))?;
    let canal_path = file
        .canal
        .as_ref()
        .map(|c| path.parent().unwrap_or(Path::new(".")).join(c));
    Ok(LoadedScenario {
        scenario,
        file,
        canal_path,
    })
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub completion_time_s: f64,
    pub correction_time_s: f64,
    pub correction_ratio: f64,
    pub objects_placed: u32,
    pub score: u32,
}

impl From<RunMetrics> for MetricsRow {
    fn from(m: RunMetrics) -> Self {
        MetricsRow {
            completion_time_s: m.completion_time_s,
            correction_time_s: m.correction_time_s,
            correction_ratio: m.correction_ratio,
            objects_placed: m.objects_placed,
            score: m.score,
        }
    }
}

pub fn encode_metrics(m: &RunMetrics) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(MetricsRow::from(*m)).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn decode_metrics(text: &str) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

// ---------------------------------------------------------------- config

/// Parses the flat `key = value` controller config. `#` starts a comment.
pub fn parse_controller_config(text: &str) -> Result<ControllerConfig, String> {
    let mut cfg = ControllerConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let num = || -> Result<f64, String> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {}: {key}: not a number: {value:?}", n + 1))
        };
        match key {
            "advance_rate" => cfg.advance_rate = num()?,
            "gain" => cfg.gain = num()?,
            "deadzone" => cfg.deadzone = num()?,
            "beta_max" => cfg.beta_max = num()?,
            "overshoot_cap_m" => cfg.overshoot_cap_m = num()?,
            "shrink_window" => {
                cfg.shrink_window = value
                    .parse()
                    .map_err(|_| format!("line {}: shrink_window: not an integer", n + 1))?
            }
            "fault_threshold" => {
                cfg.fault_threshold = value
                    .parse()
                    .map_err(|_| format!("line {}: fault_threshold: not an integer", n + 1))?
            }
            "classification" => {
                cfg.classification = match value {
                    "prose" => Classification::Prose,
                    "literal" => Classification::Literal,
                    _ => return Err(format!("line {}: classification must be prose or literal", n + 1)),
                }
            }
            _ => return Err(format!("line {}: unknown key {key:?}", n + 1)),
        }
    }
    if !(cfg.advance_rate > 0.0) || !(cfg.gain >= 0.0) || !(cfg.deadzone >= 0.0 && cfg.deadzone < 1.0) {
        return Err("advance_rate must be > 0, gain >= 0, deadzone in [0, 1)".into());
    }
    if !(cfg.beta_max >= 1.0) || !(cfg.overshoot_cap_m >= 0.0) || cfg.shrink_window == 0 || cfg.fault_threshold == 0 {
        return Err("beta_max must be >= 1, overshoot_cap_m >= 0, shrink_window and fault_threshold >= 1".into());
    }
    Ok(cfg)
}

pub fn load_controller_config(path: &Path) -> Result<ControllerConfig, FormatError> {
    parse_controller_config(&read(path)?).map_err(|e| FormatError::invalid(path, e))
}
