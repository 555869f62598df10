//! Shared-autonomy state machine.
//!
//! While advancing, the end effector rides the canal by the ratio rule: the
//! normalized radius `rho` and in-disk angle `phi` stay fixed as the state
//! index moves, so the path scales with the disks. A stick deflection
//! beyond the deadzone pauses advancement and moves the point inside the
//! current disk; it may leave the canal by a bounded amount, and that
//! excess is retired linearly over the next `shrink_window` disks.

use libm::{hypot, sqrt};

use crate::canal_model::Canal;
use crate::error::{ControlError, MappingError};
use crate::geometry::{angle_in_plane, UnitQuat, Vec3};
use crate::input_mapping::{correction_velocity, map_input, Classification, UserFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// States per second while advancing.
    pub advance_rate: f64,
    /// Correction speed at full stick, m/s.
    pub gain: f64,
    pub deadzone: f64,
    /// Maximum radial extension as a multiple of the disk radius.
    pub beta_max: f64,
    /// Absolute cap on the excess beyond the disk radius, meters.
    pub overshoot_cap_m: f64,
    pub shrink_window: u32,
    pub classification: Classification,
    /// Consecutive mapping failures that put the controller in `Fault`.
    pub fault_threshold: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            advance_rate: 20.0,
            gain: 0.05,
            deadzone: 0.15,
            beta_max: 1.25,
            overshoot_cap_m: 0.05,
            shrink_window: 10,
            classification: Classification::Prose,
            fault_threshold: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Idle,
    Advancing,
    Correcting,
    Finished,
    Stopped,
    Fault,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Advancing => "advancing",
            Mode::Correcting => "correcting",
            Mode::Finished => "finished",
            Mode::Stopped => "stopped",
            Mode::Fault => "fault",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gripper {
    Open,
    Closed,
}

impl Gripper {
    pub fn toggled(self) -> Self {
        match self {
            Gripper::Open => Gripper::Closed,
            Gripper::Closed => Gripper::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Buttons {
    pub start: bool,
    pub stop: bool,
    pub toggle_direction: bool,
    pub toggle_gripper: bool,
}

impl Buttons {
    pub const NONE: Buttons = Buttons {
        start: false,
        stop: false,
        toggle_direction: false,
        toggle_gripper: false,
    };

    pub fn any(self) -> bool {
        self.start || self.stop || self.toggle_direction || self.toggle_gripper
    }

    pub fn merge(self, o: Buttons) -> Buttons {
        Buttons {
            start: self.start || o.start,
            stop: self.stop || o.stop,
            toggle_direction: self.toggle_direction || o.toggle_direction,
            toggle_gripper: self.toggle_gripper || o.toggle_gripper,
        }
    }
}

/// Input for one controller tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InputFrameEvent {
    pub stick: (f64, f64),
    pub buttons: Buttons,
}

impl InputFrameEvent {
    pub fn stick(u: f64, v: f64) -> Self {
        InputFrameEvent {
            stick: (u, v),
            buttons: Buttons::NONE,
        }
    }

    pub fn buttons(buttons: Buttons) -> Self {
        InputFrameEvent {
            stick: (0.0, 0.0),
            buttons,
        }
    }

    pub fn magnitude(&self) -> f64 {
        hypot(self.stick.0, self.stick.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub s: usize,
    /// Fractional progress toward the next state, in states.
    pub progress: f64,
    pub rho: f64,
    pub phi: f64,
    pub mode: Mode,
    pub direction: Direction,
    pub gripper: Gripper,
    /// Currently permitted excess beyond `r(s)`, meters.
    pub overshoot: f64,
    /// Excess at the moment the last correction ended; the shrink schedule
    /// scales this.
    pub overshoot_release: f64,
    pub shrink_left: u32,
    /// Consecutive mapping failures.
    pub faults: u32,
}

impl ControllerState {
    /// Idle at the head of the canal, on the directrix.
    pub fn new() -> Self {
        ControllerState {
            s: 0,
            progress: 0.0,
            rho: 0.0,
            phi: 0.0,
            mode: Mode::Idle,
            direction: Direction::Forward,
            gripper: Gripper::Open,
            overshoot: 0.0,
            overshoot_release: 0.0,
            shrink_left: 0,
            faults: 0,
        }
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState::new()
    }
}

/// Outcome of one [`Controller::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub state: ControllerState,
    pub pose: Vec3,
    pub orientation: UnitQuat,
    /// States crossed during this tick.
    pub crossed: u32,
    /// Set when a correction was frozen because mapping failed.
    pub fault: Option<MappingError>,
}

/// Ratio-rule point on disk `s`: `d_s + min(ρ, 1 + overshoot/r)·r·(cos φ·x + sin φ·y)`.
pub fn next_nominal_point(canal: &Canal, s: usize, rho: f64, phi: f64, overshoot: f64) -> Vec3 {
    let r = canal.r[s];
    canal.disk_point(s, rho.min(1.0 + overshoot / r), phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub cfg: ControllerConfig,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        Controller { cfg }
    }

    /// Largest allowed distance from the directrix on disk `s`.
    pub fn max_radius(&self, canal: &Canal, s: usize) -> f64 {
        let r = canal.r[s];
        r + ((self.cfg.beta_max - 1.0).max(0.0) * r).min(self.cfg.overshoot_cap_m)
    }

    pub fn current_point(&self, canal: &Canal, st: &ControllerState) -> Vec3 {
        next_nominal_point(canal, st.s, st.rho, st.phi, st.overshoot)
    }

    /// Moves the point inside the current disk along the mapped correction
    /// axes. The state index never changes here.
    pub fn apply_correction(
        &self,
        state: &ControllerState,
        canal: &Canal,
        user: &UserFrame,
        stick: (f64, f64),
        dt: f64,
    ) -> Result<ControllerState, MappingError> {
        let s = state.s;
        let mapped = map_input(canal, s, user, self.cfg.classification)?;
        let p = self.current_point(canal, state) + correction_velocity(&mapped, stick, self.cfg.gain) * dt;
        let (d, e, x, y, r) = (canal.d[s], canal.e_t[s], canal.x_axis[s], canal.y_axis[s], canal.r[s]);
        let mut off = (p - d).reject(e);
        let max = self.max_radius(canal, s);
        let len = off.norm();
        if len > max {
            off = off * (max / len);
        }
        let len = off.norm().min(max);
        let mut next = *state;
        next.rho = len / r;
        if len > 1e-15 {
            next.phi = angle_in_plane(off.dot(y), off.dot(x));
        }
        next.overshoot = (len - r).max(0.0);
        next.overshoot_release = next.overshoot;
        next.shrink_left = if next.overshoot > 0.0 { self.cfg.shrink_window } else { 0 };
        Ok(next)
    }

    fn cross_state(&self, st: &mut ControllerState, canal: &Canal) {
        match st.direction {
            Direction::Forward => st.s += 1,
            Direction::Backward => st.s -= 1,
        }
        if st.shrink_left > 0 {
            st.shrink_left -= 1;
            st.overshoot = if st.shrink_left == 0 {
                0.0
            } else {
                st.overshoot_release * st.shrink_left as f64 / self.cfg.shrink_window as f64
            };
        }
        if st.shrink_left == 0 {
            st.overshoot = 0.0;
            st.overshoot_release = 0.0;
        }
        st.rho = st.rho.min(1.0 + st.overshoot / canal.r[st.s]);
    }

    fn at_end(st: &ControllerState, canal: &Canal) -> bool {
        match st.direction {
            Direction::Forward => st.s + 1 >= canal.n_states(),
            Direction::Backward => st.s == 0,
        }
    }

    /// One control tick.
    pub fn step(
        &self,
        state: &ControllerState,
        canal: &Canal,
        user: &UserFrame,
        event: &InputFrameEvent,
        dt: f64,
    ) -> Result<StepOutput, ControlError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ControlError::NonPositiveDt(dt));
        }
        let (u, v) = event.stick;
        if !u.is_finite() || !v.is_finite() {
            return Err(ControlError::InvalidStick);
        }
        let stick = (u.clamp(-1.0, 1.0), v.clamp(-1.0, 1.0));

        let mut st = *state;
        let mut crossed = 0;
        let mut fault = None;
        let b = event.buttons;
        if b.toggle_direction {
            st.direction = st.direction.flipped();
            st.progress = 0.0;
        }
        if b.toggle_gripper {
            st.gripper = st.gripper.toggled();
        }
        if b.stop {
            st.mode = Mode::Stopped;
        } else if b.start && !matches!(st.mode, Mode::Advancing | Mode::Correcting) {
            st.faults = 0;
            st.progress = 0.0;
            st.mode = if Self::at_end(&st, canal) {
                Mode::Finished
            } else {
                Mode::Advancing
            };
        }

        if matches!(st.mode, Mode::Advancing | Mode::Correcting) {
            if sqrt(stick.0 * stick.0 + stick.1 * stick.1) > self.cfg.deadzone {
                st.mode = Mode::Correcting;
                match self.apply_correction(&st, canal, user, stick, dt) {
                    Ok(next) => {
                        st = next;
                        st.faults = 0;
                    }
                    Err(e) => {
                        fault = Some(e);
                        st.faults += 1;
                        if st.faults >= self.cfg.fault_threshold {
                            st.mode = Mode::Fault;
                        }
                    }
                }
            } else {
                st.mode = Mode::Advancing;
                if Self::at_end(&st, canal) {
                    st.mode = Mode::Finished;
                } else {
                    st.progress += self.cfg.advance_rate * dt;
                    while st.progress >= 1.0 - 1e-9 {
                        st.progress = (st.progress - 1.0).max(0.0);
                        self.cross_state(&mut st, canal);
                        crossed += 1;
                        if Self::at_end(&st, canal) {
                            st.mode = Mode::Finished;
                            st.progress = 0.0;
                            break;
                        }
                    }
                }
            }
        }

        Ok(StepOutput {
            pose: self.current_point(canal, &st),
            orientation: canal.q[st.s],
            state: st,
            crossed,
            fault,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn straight_canal(n: usize, r: f64) -> Canal {
        Canal {
            d: (0..n).map(|i| Vec3::new(i as f64 * 0.005, 0.0, 0.5)).collect(),
            e_t: vec![Vec3::X; n],
            r: vec![r; n],
            x_axis: vec![Vec3::Y; n],
            y_axis: vec![Vec3::Z; n],
            q: vec![UnitQuat::IDENTITY; n],
        }
    }

    fn user() -> UserFrame {
        // Looking along -y at a canal that runs along +x: the disks are
        // vertical and face the user.
        UserFrame::facing(Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.0, -1.0, 0.0)).unwrap()
    }

    const DT: f64 = 1.0 / 60.0;

    fn start() -> InputFrameEvent {
        InputFrameEvent::buttons(Buttons {
            start: true,
            ..Buttons::NONE
        })
    }

    #[test]
    fn nominal_point_examples() {
        let c = straight_canal(10, 0.05);
        assert_eq!(next_nominal_point(&c, 3, 0.0, 1.234, 0.0), c.d[3]);
        let p = next_nominal_point(&c, 3, 1.0, 0.0, 0.0);
        assert!(p.max_abs_diff(c.d[3] + Vec3::Y * 0.05) < 1e-15);
    }

    #[test]
    fn ratio_rule_on_cone() {
        let mut c = straight_canal(100, 0.1);
        for s in 0..100 {
            c.r[s] = 0.10 + (0.01 - 0.10) * s as f64 / 99.0;
        }
        for s in 0..100 {
            let off = next_nominal_point(&c, s, 0.5, core::f64::consts::FRAC_PI_2, 0.0) - c.d[s];
            assert!(off.max_abs_diff(Vec3::Z * (0.5 * c.r[s])) < 1e-15);
        }
    }

    #[test]
    fn unobstructed_playback_finishes() {
        let c = straight_canal(200, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ControllerState::new();
        let mut ticks = 0;
        let mut ev = start();
        while st.mode != Mode::Finished {
            st = ctl.step(&st, &c, &user(), &ev, DT).unwrap().state;
            ev = InputFrameEvent::default();
            ticks += 1;
            assert!(ticks < 10_000);
        }
        assert_eq!(st.s, 199);
        let nominal = 199.0 / 20.0;
        assert!((ticks as f64 * DT - nominal).abs() <= DT + 1e-12);
    }

    #[test]
    fn forward_push_raises_point_until_clamp() {
        let c = straight_canal(50, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ctl.step(&ControllerState::new(), &c, &user(), &start(), DT).unwrap().state;
        let mut last_z = ctl.current_point(&c, &st).z;
        for _ in 0..10 {
            let out = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(0.0, 1.0), DT).unwrap();
            assert_eq!(out.state.mode, Mode::Correcting);
            assert!(out.pose.z > last_z);
            last_z = out.pose.z;
            st = out.state;
        }
        for _ in 0..200 {
            st = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(0.0, 1.0), DT).unwrap().state;
        }
        let off = ctl.current_point(&c, &st).distance(c.d[st.s]);
        assert!((off - 1.25 * 0.05).abs() < 1e-12);
        assert!((st.overshoot - 0.25 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn deadzone_input_resumes_advancing() {
        let c = straight_canal(50, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ctl.step(&ControllerState::new(), &c, &user(), &start(), DT).unwrap().state;
        st = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(0.5, 0.0), DT).unwrap().state;
        assert_eq!(st.mode, Mode::Correcting);
        let before = st;
        let out = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(0.1, 0.05), DT).unwrap();
        assert_eq!(out.state.mode, Mode::Advancing);
        assert_eq!((out.state.rho, out.state.phi), (before.rho, before.phi));
    }

    #[test]
    fn shrink_schedule_is_linear() {
        let c = straight_canal(100, 0.2);
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ControllerState::new();
        st.mode = Mode::Advancing;
        st.s = 20;
        st.rho = 1.2;
        st.overshoot = 0.04;
        st.overshoot_release = 0.04;
        st.shrink_left = 10;
        let mut seen = Vec::new();
        for _ in 0..10 {
            ctl.cross_state(&mut st, &c);
            seen.push(st.overshoot);
        }
        assert!((seen[4] - 0.02).abs() < 1e-15);
        assert_eq!(seen[9], 0.0);
        assert!(st.rho <= 1.0);
    }

    #[test]
    fn toggles_are_involutions() {
        let c = straight_canal(10, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let both = InputFrameEvent::buttons(Buttons {
            toggle_direction: true,
            toggle_gripper: true,
            ..Buttons::NONE
        });
        let s0 = ControllerState::new();
        let s1 = ctl.step(&s0, &c, &user(), &both, DT).unwrap().state;
        let s2 = ctl.step(&s1, &c, &user(), &both, DT).unwrap().state;
        assert_ne!(s1.gripper, s0.gripper);
        assert_ne!(s1.direction, s0.direction);
        assert_eq!((s2.gripper, s2.direction), (s0.gripper, s0.direction));
    }

    #[test]
    fn stop_is_terminal_until_start() {
        let c = straight_canal(50, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ctl.step(&ControllerState::new(), &c, &user(), &start(), DT).unwrap().state;
        let stop = InputFrameEvent::buttons(Buttons {
            stop: true,
            ..Buttons::NONE
        });
        st = ctl.step(&st, &c, &user(), &stop, DT).unwrap().state;
        let s = st.s;
        for _ in 0..30 {
            st = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(1.0, 0.0), DT).unwrap().state;
        }
        assert_eq!((st.mode, st.s, st.rho), (Mode::Stopped, s, 0.0));
        st = ctl.step(&st, &c, &user(), &start(), DT).unwrap().state;
        assert_eq!(st.mode, Mode::Advancing);
    }

    #[test]
    fn rejects_bad_dt() {
        let c = straight_canal(10, 0.05);
        let ctl = Controller::new(ControllerConfig::default());
        let st = ControllerState::new();
        assert_eq!(
            ctl.step(&st, &c, &user(), &InputFrameEvent::default(), 0.0),
            Err(ControlError::NonPositiveDt(0.0))
        );
    }

    #[test]
    fn repeated_mapping_failures_fault() {
        // Axes with no ground component make the facing test degenerate.
        let mut c = straight_canal(10, 0.05);
        for s in 0..10 {
            c.x_axis[s] = Vec3::Z;
            c.y_axis[s] = Vec3::Z;
        }
        let ctl = Controller::new(ControllerConfig::default());
        let mut st = ctl.step(&ControllerState::new(), &c, &user(), &start(), DT).unwrap().state;
        for i in 0..5 {
            let out = ctl.step(&st, &c, &user(), &InputFrameEvent::stick(1.0, 0.0), DT).unwrap();
            assert_eq!(out.fault, Some(MappingError::DegenerateProjection));
            st = out.state;
            if i < 4 {
                assert_eq!(st.mode, Mode::Correcting);
            }
        }
        assert_eq!(st.mode, Mode::Fault);
    }
}
