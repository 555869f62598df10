//! Canal construction from an aligned demonstration pair, correction-axis
//! assignment, and end alignment toward horizontal/vertical planes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};

use libm::{ceil, sin};

use crate::demo_pipeline::AlignedPair;
use crate::error::CanalError;
use crate::geometry::{
    angle_between, any_orthogonal, project_ground, rotate_about, slerp_unit, Basis, UnitQuat,
    Vec3, Z_UP,
};

/// Number of end tangents averaged when classifying a canal end.
pub const END_CLASSIFY_COUNT: usize = 10;

/// Boundary frames fall back to the projected world y axis when the
/// tangent is within this sine of vertical.
const VERTICAL_FALLBACK_SIN: f64 = 0.05;

/// Discretized canal surface: one disk per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Canal {
    /// Directrix points.
    pub d: Vec<Vec3>,
    /// Unit tangents.
    pub e_t: Vec<Vec3>,
    /// Disk radii.
    pub r: Vec<f64>,
    pub x_axis: Vec<Vec3>,
    pub y_axis: Vec<Vec3>,
    /// Nominal end-effector orientation per state.
    pub q: Vec<UnitQuat>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanalConfig {
    pub r_min: f64,
    /// Centered window (in disks) for y-axis averaging.
    pub axis_window: usize,
    pub end_fraction: f64,
    pub max_relax_iterations: usize,
}

impl Default for CanalConfig {
    fn default() -> Self {
        CanalConfig {
            r_min: 0.01,
            axis_window: 5,
            end_fraction: 0.2,
            max_relax_iterations: 200,
        }
    }
}

impl Canal {
    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    /// Checks array lengths and the frame invariants within `tol`.
    pub fn check(&self, tol: f64) -> Result<(), CanalError> {
        let n = self.d.len();
        if [self.e_t.len(), self.r.len(), self.x_axis.len(), self.y_axis.len(), self.q.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(CanalError::LengthMismatch);
        }
        if n < 2 {
            return Err(CanalError::TooFewStates { needed: 2, got: n });
        }
        for s in 0..n {
            let (e, x, y) = (self.e_t[s], self.x_axis[s], self.y_axis[s]);
            let ok = (e.norm() - 1.0).abs() <= tol
                && (x.norm() - 1.0).abs() <= tol
                && (y.norm() - 1.0).abs() <= tol
                && x.dot(y).abs() <= tol
                && x.dot(e).abs() <= tol
                && y.dot(e).abs() <= tol
                && self.r[s] > 0.0;
            if !ok {
                return Err(CanalError::DegenerateAxes { count: 1 });
            }
        }
        Ok(())
    }

    pub fn step_length(&self, s: usize) -> f64 {
        self.d[s].distance(self.d[s + 1])
    }

    pub fn arc_length(&self) -> f64 {
        (0..self.n_states() - 1).map(|s| self.step_length(s)).sum()
    }

    /// Point on disk `s` at normalized radius `rho` and in-disk angle `phi`.
    pub fn disk_point(&self, s: usize, rho: f64, phi: f64) -> Vec3 {
        let (sp, cp) = (sin(phi), libm::cos(phi));
        self.d[s] + (self.x_axis[s] * cp + self.y_axis[s] * sp) * (rho * self.r[s])
    }
}

/// Builds the canal: midpoint directrix, half-distance radii (floored at
/// `r_min`), central-difference tangents, midway orientations and
/// correction axes.
pub fn build_canal(pair: &AlignedPair, cfg: &CanalConfig) -> Result<Canal, CanalError> {
    let n = pair.len();
    if n < 2 || pair.b.len() != n {
        return Err(CanalError::TooFewStates { needed: 2, got: n });
    }
    let d: Vec<Vec3> = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(a, b)| (a.position + b.position) * 0.5)
        .collect();
    for s in 0..n - 1 {
        if d[s].distance(d[s + 1]) < 1e-12 {
            return Err(CanalError::CoincidentDirectrix { index: s });
        }
    }
    let r = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(a, b)| (0.5 * a.position.distance(b.position)).max(cfg.r_min))
        .collect();
    let q = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(a, b)| slerp_unit(a.orientation, b.orientation, 0.5).canonical())
        .collect();
    let e_t = tangents(&d)?;
    let canal = Canal {
        x_axis: vec![Vec3::ZERO; n],
        y_axis: vec![Vec3::ZERO; n],
        d,
        e_t,
        r,
        q,
    };
    compute_axes(&canal, cfg.axis_window)
}

fn tangents(d: &[Vec3]) -> Result<Vec<Vec3>, CanalError> {
    let n = d.len();
    (0..n)
        .map(|s| {
            let (lo, hi) = (s.saturating_sub(1), (s + 1).min(n - 1));
            (d[hi] - d[lo])
                .try_normalize()
                .ok_or(CanalError::CoincidentDirectrix { index: lo })
        })
        .collect()
}

/// Horizontal in-plane direction `z × e`; near-vertical tangents use the
/// in-plane projection of world y instead.
fn reference_x(e: Vec3) -> Vec3 {
    let h = Z_UP.cross(e);
    if h.norm() >= VERTICAL_FALLBACK_SIN {
        h.try_normalize().unwrap_or(Vec3::X)
    } else {
        Vec3::Y
            .reject(e)
            .try_normalize()
            .unwrap_or_else(|| any_orthogonal(e))
    }
}

fn frame_quat(x: Vec3, e: Vec3) -> UnitQuat {
    UnitQuat::from_basis(&Basis {
        c1: x,
        c2: e.cross(x),
        c3: e,
    })
}

/// Projection transport of `x0` along `tangents`.
fn transport(x0: Vec3, tangents: &[Vec3]) -> Vec3 {
    tangents.iter().fold(x0, |x, &e| {
        x.reject(e).try_normalize().unwrap_or_else(|| reference_x(e))
    })
}

/// Assigns correction axes: slerp between boundary frames for x, then a
/// centered moving average of y over `window` disks, re-orthonormalized.
pub fn compute_axes(canal: &Canal, window: usize) -> Result<Canal, CanalError> {
    if window == 0 {
        return Err(CanalError::InvalidWindow(window));
    }
    let n = canal.n_states();
    if n < 2 {
        return Err(CanalError::TooFewStates { needed: 2, got: n });
    }
    let x0 = reference_x(canal.e_t[0]);
    let (x, y) = interpolate_frames(&canal.e_t, x0, window)?;
    Ok(Canal {
        x_axis: x,
        y_axis: y,
        ..canal.clone()
    })
}

/// Axes for a run of tangents, starting from a fixed first x.
fn interpolate_frames(
    e: &[Vec3],
    x_start: Vec3,
    window: usize,
) -> Result<(Vec<Vec3>, Vec<Vec3>), CanalError> {
    let n = e.len();
    let mut x_end = reference_x(e[n - 1]);
    if x_end.dot(transport(x_start, e)) < 0.0 {
        x_end = -x_end;
    }
    let q0 = frame_quat(x_start, e[0]);
    let q1 = frame_quat(x_end, e[n - 1]);

    let mut degenerate = 0;
    let mut xs: Vec<Vec3> = Vec::with_capacity(n);
    for (s, &es) in e.iter().enumerate() {
        let t = if n > 1 { s as f64 / (n - 1) as f64 } else { 0.0 };
        let guess = slerp_unit(q0, q1, t).rotate(Vec3::X);
        let x = match guess.reject(es).try_normalize() {
            Some(x) if guess.reject(es).norm() > 1e-6 => x,
            _ => {
                degenerate += 1;
                let prev = xs.last().copied().unwrap_or(x_start);
                prev.reject(es).try_normalize().unwrap_or_else(|| reference_x(es))
            }
        };
        xs.push(x);
    }
    if degenerate * 100 > n {
        return Err(CanalError::DegenerateAxes { count: degenerate });
    }
    xs[0] = x_start.reject(e[0]).try_normalize().unwrap_or(xs[0]);

    let raw_y: Vec<Vec3> = (0..n).map(|s| e[s].cross(xs[s])).collect();
    let back = (window - 1) / 2;
    let ahead = window / 2;
    let mut ys = Vec::with_capacity(n);
    for s in 0..n {
        let lo = s.saturating_sub(back);
        let hi = (s + ahead).min(n - 1);
        let sum = raw_y[lo..=hi].iter().fold(Vec3::ZERO, |acc, &v| acc + v);
        let y = sum.reject(e[s]).try_normalize().unwrap_or(raw_y[s]);
        ys.push(y);
        xs[s] = y.cross(e[s]);
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanalEnd {
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndTarget {
    Vertical,
    Horizontal,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndAlignment {
    pub which_end: CanalEnd,
    pub target: EndTarget,
    /// Inclination of the mean end tangent from `Z_UP`.
    pub theta: f64,
    /// Tangent the end is forced to; `None` for [`EndTarget::None`].
    pub forced: Option<Vec3>,
}

impl EndAlignment {
    pub fn none(which_end: CanalEnd) -> Self {
        EndAlignment {
            which_end,
            target: EndTarget::None,
            theta: 0.0,
            forced: None,
        }
    }
}

/// Classifies a canal end as vertical or horizontal from the mean of its
/// last (or first) ten tangents.
///
/// Vertical iff `θ < π/4` or `θ > 3π/4`; values within `1e-9` of either
/// threshold resolve to horizontal.
pub fn classify_end(canal: &Canal, which: CanalEnd) -> Result<EndAlignment, CanalError> {
    let n = canal.n_states();
    if n < END_CLASSIFY_COUNT {
        return Err(CanalError::TooFewStates {
            needed: END_CLASSIFY_COUNT,
            got: n,
        });
    }
    let range = match which {
        CanalEnd::Head => 0..END_CLASSIFY_COUNT,
        CanalEnd::Tail => n - END_CLASSIFY_COUNT..n,
    };
    let sum = canal.e_t[range].iter().fold(Vec3::ZERO, |acc, &v| acc + v);
    let mean = sum
        .try_normalize()
        .filter(|_| sum.norm() > 1e-6)
        .ok_or(CanalError::DegenerateMeanTangent)?;
    let theta = angle_between(mean, Z_UP).map_err(|_| CanalError::DegenerateMeanTangent)?;
    const BAND: f64 = 1e-9;
    let vertical = !(FRAC_PI_4 - BAND..=3.0 * FRAC_PI_4 + BAND).contains(&theta);
    let (target, forced) = if vertical {
        (EndTarget::Vertical, if mean.z >= 0.0 { Z_UP } else { -Z_UP })
    } else {
        let g = project_ground(mean)
            .try_normalize()
            .ok_or(CanalError::DegenerateMeanTangent)?;
        (EndTarget::Horizontal, g)
    };
    Ok(EndAlignment {
        which_end: which,
        target,
        theta,
        forced: Some(forced),
    })
}

/// Conservative intersection test between disks `s` and `s + 1`:
/// `sin(Δψ)·max(r(s), r(s+1)) ≥ ‖d(s+1) − d(s)‖`.
pub fn adjacent_intersects(canal: &Canal, s: usize) -> bool {
    let dpsi = angle_between(canal.e_t[s], canal.e_t[s + 1]).unwrap_or(0.0);
    disks_may_intersect(dpsi, canal.r[s].max(canal.r[s + 1]), canal.step_length(s))
}

fn disks_may_intersect(dpsi: f64, radius: f64, spacing: f64) -> bool {
    dpsi > 0.0 && sin(dpsi) * radius >= spacing
}

/// Result of [`align_end`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEnd {
    pub canal: Canal,
    /// States `s` for which disks `s` and `s + 1` still intersect after
    /// relaxation. Empty when the alignment is clean.
    pub warnings: Vec<usize>,
    pub iterations: usize,
    pub zone: core::ops::Range<usize>,
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

/// Forces the terminal `⌈fraction·S⌉` states toward the alignment's forced
/// tangent.
///
/// The first part of the zone rotates from the boundary tangent along a
/// smoothstep schedule; the final `⌈fraction·S/2⌉` states sit exactly on
/// the forced tangent. The schedule is then relaxed (endpoint-constrained
/// Laplacian smoothing of the rotation fraction) until no adjacent disks
/// intersect or the iteration budget runs out. The directrix is
/// re-integrated from the new tangents with the original step lengths,
/// anchored at the zone's interior boundary; states outside the zone are
/// left untouched.
pub fn align_end(
    canal: &Canal,
    alignment: &EndAlignment,
    fraction: f64,
    cfg: &CanalConfig,
) -> Result<AlignedEnd, CanalError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(CanalError::InvalidFraction(fraction));
    }
    let n = canal.n_states();
    let zone_len = (ceil(fraction * n as f64) as usize).min(n - 1);
    let exact_len = (ceil(fraction * n as f64 / 2.0) as usize).min(zone_len);
    let trans_len = zone_len - exact_len;
    // States in zone order, walking outward from the boundary.
    let (boundary, order): (usize, Vec<usize>) = match alignment.which_end {
        CanalEnd::Tail => (n - zone_len - 1, (n - zone_len..n).collect()),
        CanalEnd::Head => (zone_len, (0..zone_len).rev().collect()),
    };
    let zone = match alignment.which_end {
        CanalEnd::Tail => n - zone_len..n,
        CanalEnd::Head => 0..zone_len,
    };
    let unchanged = AlignedEnd {
        canal: canal.clone(),
        warnings: Vec::new(),
        iterations: 0,
        zone: zone.clone(),
    };
    let forced = match (alignment.target, alignment.forced) {
        (EndTarget::None, _) | (_, None) => return Ok(unchanged),
        (_, Some(f)) => f.normalize().map_err(|_| CanalError::DegenerateMeanTangent)?,
    };
    let already = core::iter::once(boundary)
        .chain(order.iter().copied())
        .all(|s| angle_between(canal.e_t[s], forced).is_ok_and(|a| a < 1e-12));
    if already {
        return Ok(unchanged);
    }

    let e_b = canal.e_t[boundary];
    let psi = angle_between(e_b, forced).unwrap_or(0.0);
    let axis = e_b
        .cross(forced)
        .try_normalize()
        .filter(|_| psi < PI - 1e-9)
        .unwrap_or_else(|| any_orthogonal(e_b));
    let tangent_at = |w: f64| {
        if w >= 1.0 {
            forced
        } else {
            rotate_about(e_b, axis, w * psi).normalize().unwrap_or(forced)
        }
    };

    // Step lengths in zone order: step k joins order[k-1] (or the
    // boundary for k = 0) with order[k].
    let spacing: Vec<f64> = (0..zone_len)
        .map(|k| {
            let prev = if k == 0 { boundary } else { order[k - 1] };
            canal.d[prev].distance(canal.d[order[k]])
        })
        .collect();
    let radius_pair = |k: usize| {
        let prev = if k == 0 { boundary } else { order[k - 1] };
        canal.r[prev].max(canal.r[order[k]])
    };

    let mut w: Vec<f64> = (0..zone_len)
        .map(|k| {
            if k < trans_len {
                smoothstep((k + 1) as f64 / (trans_len + 1) as f64)
            } else {
                1.0
            }
        })
        .collect();

    let offending = |w: &[f64]| -> Vec<usize> {
        (0..zone_len)
            .filter(|&k| {
                let prev_w = if k == 0 { 0.0 } else { w[k - 1] };
                let dpsi = (w[k] - prev_w).abs() * psi;
                disks_may_intersect(dpsi, radius_pair(k), spacing[k])
            })
            .collect()
    };

    let mut iterations = 0;
    let mut bad = offending(&w);
    while !bad.is_empty() && iterations < cfg.max_relax_iterations && trans_len > 0 {
        let prev = w.clone();
        for k in 0..trans_len {
            let left = if k == 0 { 0.0 } else { prev[k - 1] };
            let right = prev[k + 1];
            w[k] = prev[k] + 0.5 * (left + right - 2.0 * prev[k]);
        }
        iterations += 1;
        bad = offending(&w);
    }

    let mut out = canal.clone();
    for (k, &s) in order.iter().enumerate() {
        out.e_t[s] = tangent_at(w[k]);
    }
    let mut prev = boundary;
    for (k, &s) in order.iter().enumerate() {
        let mean = out.e_t[prev] + out.e_t[s];
        let dir = mean.try_normalize().unwrap_or(out.e_t[s]);
        let step = match alignment.which_end {
            CanalEnd::Tail => dir,
            CanalEnd::Head => -dir,
        };
        out.d[s] = out.d[prev] + step * spacing[k];
        prev = s;
    }

    // Re-run the axis construction outward from the boundary, pinned to
    // the boundary's existing x axis.
    let run: Vec<usize> = core::iter::once(boundary).chain(order.iter().copied()).collect();
    let tangents_run: Vec<Vec3> = run.iter().map(|&s| out.e_t[s]).collect();
    let (xs, ys) = interpolate_frames(&tangents_run, canal.x_axis[boundary], cfg.axis_window)?;
    for (k, &s) in run.iter().enumerate().skip(1) {
        out.x_axis[s] = xs[k];
        out.y_axis[s] = ys[k];
    }

    let warnings = bad
        .into_iter()
        .map(|k| {
            let prev = if k == 0 { boundary } else { order[k - 1] };
            prev.min(order[k])
        })
        .collect::<Vec<_>>();
    let mut warnings = warnings;
    warnings.sort_unstable();
    Ok(AlignedEnd {
        canal: out,
        warnings,
        iterations,
        zone,
    })
}

/// Summary of one end after [`encode_task`].
#[derive(Debug, Clone, PartialEq)]
pub struct EndReport {
    pub alignment: EndAlignment,
    pub warnings: Vec<usize>,
}

/// Builds the canal and, when `align_ends` is set, classifies and aligns
/// both ends (head first).
pub fn encode_task(
    pair: &AlignedPair,
    cfg: &CanalConfig,
    align_ends: bool,
) -> Result<(Canal, [EndReport; 2]), CanalError> {
    let mut canal = build_canal(pair, cfg)?;
    let mut reports = [
        EndReport {
            alignment: EndAlignment::none(CanalEnd::Head),
            warnings: Vec::new(),
        },
        EndReport {
            alignment: EndAlignment::none(CanalEnd::Tail),
            warnings: Vec::new(),
        },
    ];
    if align_ends {
        for (slot, end) in [CanalEnd::Head, CanalEnd::Tail].into_iter().enumerate() {
            let alignment = classify_end(&canal, end)?;
            let aligned = align_end(&canal, &alignment, cfg.end_fraction, cfg)?;
            canal = aligned.canal;
            reports[slot] = EndReport {
                alignment,
                warnings: aligned.warnings,
            };
        }
    }
    Ok((canal, reports))
}
