//! Fixed-step kinematic world around the controller: an end effector,
//! tabletop objects that attach on gripper close and detach on open, and
//! scripted input.

use alloc::string::String;
use alloc::vec::Vec;

use crate::canal_model::Canal;
use crate::controller::{
    Buttons, Controller, ControllerConfig, ControllerState, Gripper, InputFrameEvent, Mode,
};
use crate::error::SimError;
use crate::geometry::{project_ground, UnitQuat, Vec3};
use crate::input_mapping::{map_input, MappedCorrection, UserFrame};

pub const DEFAULT_DT: f64 = 1.0 / 60.0;
pub const DEFAULT_GRASP_RADIUS: f64 = 0.03;
/// Release distance from the target under which an object counts as placed.
pub const PLACE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectState {
    Free,
    Grasped,
    Placed,
}

impl ObjectState {
    pub fn label(self) -> &'static str {
        match self {
            ObjectState::Free => "free",
            ObjectState::Grasped => "grasped",
            ObjectState::Placed => "placed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub id: String,
    pub position: Vec3,
    pub grasp_radius: f64,
    pub target: Option<Vec3>,
    pub state: ObjectState,
}

impl WorldObject {
    pub fn new(id: impl Into<String>, position: Vec3) -> Self {
        WorldObject {
            id: id.into(),
            position,
            grasp_radius: DEFAULT_GRASP_RADIUS,
            target: None,
            state: ObjectState::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Inside,
    Rim,
    Outside,
}

/// Cylindrical laundry drum, zoned by horizontal distance from its axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drum {
    pub center: Vec3,
    pub inner_radius: f64,
    pub rim_radius: f64,
}

impl Drum {
    pub fn zone_of(&self, p: Vec3) -> Zone {
        let h = project_ground(p - self.center).norm();
        if h <= self.inner_radius {
            Zone::Inside
        } else if h <= self.rim_radius {
            Zone::Rim
        } else {
            Zone::Outside
        }
    }

    /// Grasped objects are never scored as inside.
    pub fn zones(&self, objects: &[WorldObject]) -> Vec<Zone> {
        objects
            .iter()
            .map(|o| match o.state {
                ObjectState::Grasped => Zone::Outside,
                _ => self.zone_of(o.position),
            })
            .collect()
    }
}

/// Two points per item inside, one per item on the rim.
pub fn score_laundry(zones: &[Zone]) -> u32 {
    zones
        .iter()
        .map(|z| match z {
            Zone::Inside => 2,
            Zone::Rim => 1,
            Zone::Outside => 0,
        })
        .sum()
}

/// Plane the end effector "paints" when within `tolerance` of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPlane {
    pub point: Vec3,
    pub normal: Vec3,
    pub tolerance: f64,
}

impl WallPlane {
    pub fn touches(&self, p: Vec3) -> bool {
        (p - self.point).dot(self.normal).abs() <= self.tolerance
    }
}

/// One scripted input. A stick value is held until the next entry that
/// sets one; buttons fire on a single tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptEntry {
    pub t: f64,
    pub stick: Option<(f64, f64)>,
    pub buttons: Buttons,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub canal: Option<String>,
    pub user: UserFrame,
    pub objects: Vec<WorldObject>,
    pub script: Vec<ScriptEntry>,
    pub timeout_s: f64,
    pub drum: Option<Drum>,
    pub wall: Option<WallPlane>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.timeout_s > 0.0) || !self.timeout_s.is_finite() {
            return Err(SimError::InvalidTimeout(self.timeout_s));
        }
        for (i, w) in self.script.windows(2).enumerate() {
            if !(w[1].t >= w[0].t) {
                return Err(SimError::ScriptOutOfOrder { index: i + 1 });
            }
        }
        if let Some(i) = self.script.iter().position(|e| !(e.t >= 0.0) || !e.t.is_finite()) {
            return Err(SimError::ScriptOutOfOrder { index: i });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub controller: ControllerConfig,
    pub dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            controller: ControllerConfig::default(),
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSummary {
    pub id: String,
    pub position: Vec3,
    pub state: ObjectState,
}

/// Everything observable after one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    /// Simulated time at the end of the tick.
    pub t: f64,
    /// Stick value the controller saw this tick.
    pub stick: (f64, f64),
    pub state: ControllerState,
    pub pose: Vec3,
    pub orient: UnitQuat,
    /// Mapping of the current disk; `None` when classification failed.
    pub mapping: Option<MappedCorrection>,
    pub objects: Vec<ObjectSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub completion_time_s: f64,
    pub correction_time_s: f64,
    pub correction_ratio: f64,
    pub objects_placed: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TickRecord>,
    pub metrics: RunMetrics,
    pub pen_trace: Vec<(f64, Vec3)>,
    pub timed_out: bool,
}

/// Incremental world, used both by batch runs and by the live bridge.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub canal: Canal,
    pub user: UserFrame,
    controller: Controller,
    dt: f64,
    state: ControllerState,
    objects: Vec<WorldObject>,
    grasped: Option<usize>,
    tick: u64,
    correction_ticks: u64,
    pose: Vec3,
    wall: Option<WallPlane>,
    pen_trace: Vec<(f64, Vec3)>,
}

impl Simulation {
    pub fn new(
        canal: Canal,
        user: UserFrame,
        objects: Vec<WorldObject>,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
            return Err(SimError::InvalidTimestep(cfg.dt));
        }
        let controller = Controller::new(cfg.controller);
        let state = ControllerState::new();
        let pose = controller.current_point(&canal, &state);
        Ok(Simulation {
            canal,
            user,
            controller,
            dt: cfg.dt,
            state,
            objects,
            grasped: None,
            tick: 0,
            correction_ticks: 0,
            pose,
            wall: None,
            pen_trace: Vec::new(),
        })
    }

    pub fn with_wall(mut self, wall: Option<WallPlane>) -> Self {
        self.wall = wall;
        self
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn pose(&self) -> Vec3 {
        self.pose
    }

    pub fn pen_trace(&self) -> &[(f64, Vec3)] {
        &self.pen_trace
    }

    pub fn step(&mut self, event: &InputFrameEvent) -> Result<TickRecord, SimError> {
        let before = self.state.gripper;
        let out = self
            .controller
            .step(&self.state, &self.canal, &self.user, event, self.dt)?;
        self.state = out.state;
        self.pose = out.pose;
        self.tick += 1;
        if self.state.mode == Mode::Correcting {
            self.correction_ticks += 1;
        }

        match (before, self.state.gripper) {
            (Gripper::Open, Gripper::Closed) => self.try_grasp(),
            (Gripper::Closed, Gripper::Open) => self.release(),
            _ => {}
        }
        if let Some(i) = self.grasped {
            self.objects[i].position = self.pose;
        }
        if let Some(w) = self.wall {
            if w.touches(self.pose) {
                self.pen_trace.push((self.time(), self.pose));
            }
        }

        Ok(TickRecord {
            tick: self.tick,
            t: self.time(),
            stick: event.stick,
            state: self.state,
            pose: out.pose,
            orient: out.orientation,
            mapping: map_input(&self.canal, self.state.s, &self.user, self.controller.cfg.classification).ok(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectSummary {
                    id: o.id.clone(),
                    position: o.position,
                    state: o.state,
                })
                .collect(),
        })
    }

    fn try_grasp(&mut self) {
        if self.grasped.is_some() {
            return;
        }
        let pose = self.pose;
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.objects.iter().enumerate() {
            if o.state != ObjectState::Free {
                continue;
            }
            let dist = o.position.distance(pose);
            if dist <= o.grasp_radius && best.is_none_or(|(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        if let Some((i, _)) = best {
            self.objects[i].state = ObjectState::Grasped;
            self.objects[i].position = pose;
            self.grasped = Some(i);
        }
    }

    fn release(&mut self) {
        if let Some(i) = self.grasped.take() {
            let o = &mut self.objects[i];
            o.position = self.pose;
            o.state = match o.target {
                Some(t) if t.distance(self.pose) <= PLACE_TOLERANCE => ObjectState::Placed,
                _ => ObjectState::Free,
            };
        }
    }

    pub fn metrics(&self, drum: Option<&Drum>) -> RunMetrics {
        let completion = self.time();
        let correction = self.correction_ticks as f64 * self.dt;
        RunMetrics {
            completion_time_s: completion,
            correction_time_s: correction,
            correction_ratio: if completion > 0.0 { correction / completion } else { 0.0 },
            objects_placed: self
                .objects
                .iter()
                .filter(|o| o.state == ObjectState::Placed)
                .count() as u32,
            score: drum.map_or(0, |d| score_laundry(&d.zones(&self.objects))),
        }
    }
}

/// Runs `scenario` on `canal` to completion: until the controller is
/// finished or stopped with no script entries left, or until the timeout.
pub fn run_scenario(scenario: &Scenario, canal: &Canal, cfg: &SimConfig) -> Result<RunOutput, SimError> {
    scenario.validate()?;
    let mut sim = Simulation::new(canal.clone(), scenario.user, scenario.objects.clone(), *cfg)?
        .with_wall(scenario.wall);
    let max_ticks = libm::ceil(scenario.timeout_s / cfg.dt - 1e-9) as u64;
    let mut next = 0;
    let mut stick = (0.0, 0.0);
    let mut trace = Vec::new();
    let mut timed_out = true;
    while sim.ticks() < max_ticks {
        let now = sim.time();
        let mut buttons = Buttons::NONE;
        while next < scenario.script.len() && scenario.script[next].t <= now + 1e-9 {
            let e = &scenario.script[next];
            if let Some(st) = e.stick {
                stick = st;
            }
            buttons = buttons.merge(e.buttons);
            next += 1;
        }
        trace.push(sim.step(&InputFrameEvent { stick, buttons })?);
        if matches!(sim.state().mode, Mode::Finished | Mode::Stopped) && next == scenario.script.len() {
            timed_out = false;
            break;
        }
    }
    Ok(RunOutput {
        metrics: sim.metrics(scenario.drum.as_ref()),
        pen_trace: sim.pen_trace.clone(),
        trace,
        timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line_canal(n: usize) -> Canal {
        Canal {
            d: (0..n).map(|i| Vec3::new(0.3 + i as f64 * 0.002, 0.0, 0.2)).collect(),
            e_t: vec![Vec3::X; n],
            r: vec![0.04; n],
            x_axis: vec![Vec3::Y; n],
            y_axis: vec![Vec3::Z; n],
            q: vec![UnitQuat::IDENTITY; n],
        }
    }

    fn user() -> UserFrame {
        UserFrame::facing(Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.0, -1.0, 0.0)).unwrap()
    }

    fn press(t: f64, buttons: Buttons) -> ScriptEntry {
        ScriptEntry { t, stick: None, buttons }
    }

    fn scenario(script: Vec<ScriptEntry>, objects: Vec<WorldObject>) -> Scenario {
        Scenario {
            name: "test".into(),
            canal: None,
            user: user(),
            objects,
            script,
            timeout_s: 30.0,
            drum: None,
            wall: None,
        }
    }

    const START: Buttons = Buttons {
        start: true,
        ..Buttons::NONE
    };
    const GRIP: Buttons = Buttons {
        toggle_gripper: true,
        ..Buttons::NONE
    };

    #[test]
    fn start_only_runs_nominal_time() {
        let c = line_canal(200);
        let out = run_scenario(&scenario(vec![press(0.0, START)], vec![]), &c, &SimConfig::default()).unwrap();
        assert!(!out.timed_out);
        assert_eq!(out.metrics.correction_time_s, 0.0);
        assert!((out.metrics.completion_time_s - 199.0 / 20.0).abs() <= DEFAULT_DT + 1e-12);
    }

    #[test]
    fn pick_and_place_on_line() {
        let c = line_canal(200);
        let mut obj = WorldObject::new("cube", c.d[0]);
        obj.target = Some(c.d[199]);
        let script = vec![press(0.0, GRIP), press(0.1, START), press(11.0, GRIP)];
        let out = run_scenario(&scenario(script, vec![obj]), &c, &SimConfig::default()).unwrap();
        assert_eq!(out.metrics.objects_placed, 1);
        for rec in &out.trace {
            if rec.objects[0].state == ObjectState::Grasped {
                assert_eq!(rec.objects[0].position, rec.pose);
            }
        }
    }

    #[test]
    fn inert_script_times_out() {
        let c = line_canal(50);
        let obj = WorldObject::new("cube", c.d[0]);
        let mut sc = scenario(vec![], vec![obj]);
        sc.timeout_s = 2.0;
        let out = run_scenario(&sc, &c, &SimConfig::default()).unwrap();
        assert!(out.timed_out);
        assert_eq!(out.trace.len(), 120);
        assert_eq!(out.metrics.objects_placed, 0);
    }

    #[test]
    fn laundry_scores() {
        use Zone::*;
        assert_eq!(score_laundry(&[Inside; 5]), 10);
        assert_eq!(score_laundry(&[Inside, Inside, Inside, Rim, Rim]), 8);
        assert_eq!(score_laundry(&[Outside; 5]), 0);
    }

    #[test]
    fn script_order_is_checked() {
        let c = line_canal(10);
        let sc = scenario(vec![press(1.0, START), press(0.5, START)], vec![]);
        assert_eq!(
            run_scenario(&sc, &c, &SimConfig::default()).unwrap_err(),
            SimError::ScriptOutOfOrder { index: 1 }
        );
    }

    #[test]
    fn pen_trace_records_wall_contact() {
        let c = line_canal(100);
        let mut sc = scenario(vec![press(0.0, START)], vec![]);
        sc.wall = Some(WallPlane {
            point: Vec3::new(0.0, 0.0, 0.2),
            normal: Vec3::Z,
            tolerance: 0.005,
        });
        let out = run_scenario(&sc, &c, &SimConfig::default()).unwrap();
        assert_eq!(out.pen_trace.len(), out.trace.len());
    }
}
