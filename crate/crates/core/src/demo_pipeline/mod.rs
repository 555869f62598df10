//! Demonstration processing: temporal alignment, smoothing and uniform
//! resampling of two kinesthetic demonstrations.
//!
//! The order is fixed: [`dtw_align`] → [`spline_smooth`] on each side →
//! [`resample_uniform`]. [`process_demonstrations`] runs all three.

mod dtw;
mod smoothing;

use alloc::string::String;
use alloc::vec::Vec;

pub use dtw::{dtw_path, WarpPath};
pub use smoothing::{spline_smooth, DEDUP_EPS};

use crate::error::PipelineError;
use crate::geometry::{slerp_unit, UnitQuat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Pose {
            position,
            orientation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
}

/// One recorded demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub label: String,
    pub samples: Vec<Sample>,
}

impl Demonstration {
    pub fn new(label: impl Into<String>, samples: Vec<Sample>) -> Result<Self, PipelineError> {
        let demo = Demonstration {
            label: label.into(),
            samples,
        };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.samples.is_empty() {
            return Err(PipelineError::EmptyDemo);
        }
        if self.samples.len() < 2 {
            return Err(PipelineError::TooFewSamples {
                needed: 2,
                got: self.samples.len(),
            });
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() || !s.pose.position.is_finite() {
                return Err(PipelineError::NonFinite { index: i });
            }
            if i > 0 && !(s.t > self.samples[i - 1].t) {
                return Err(PipelineError::NonIncreasingTime { index: i });
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.pose.position).collect()
    }
}

/// Two trajectories of identical length, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub a: Vec<Pose>,
    pub b: Vec<Pose>,
}

impl AlignedPair {
    pub fn new(a: Vec<Pose>, b: Vec<Pose>) -> Result<Self, PipelineError> {
        if a.len() != b.len() {
            return Err(PipelineError::LengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        if a.len() < 2 {
            return Err(PipelineError::TooFewSamples {
                needed: 2,
                got: a.len(),
            });
        }
        Ok(AlignedPair { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Aligns two demonstrations with DTW on positions and materializes both
/// along the warping path. Orientations ride along with their positions.
pub fn dtw_align(a: &Demonstration, b: &Demonstration) -> Result<AlignedPair, PipelineError> {
    Ok(dtw_align_with_path(a, b)?.0)
}

pub fn dtw_align_with_path(
    a: &Demonstration,
    b: &Demonstration,
) -> Result<(AlignedPair, WarpPath), PipelineError> {
    a.validate()?;
    b.validate()?;
    let path = dtw_path(&a.positions(), &b.positions()).ok_or(PipelineError::EmptyDemo)?;
    let (pa, pb) = path
        .pairs
        .iter()
        .map(|&(i, j)| (a.samples[i].pose, b.samples[j].pose))
        .unzip();
    Ok((AlignedPair::new(pa, pb)?, path))
}

/// Resamples each side to `n_states` points equally spaced in its own arc
/// length. Orientations are slerped between the bracketing samples.
pub fn resample_uniform(pair: &AlignedPair, n_states: usize) -> Result<AlignedPair, PipelineError> {
    if n_states < 2 {
        return Err(PipelineError::InvalidStateCount(n_states));
    }
    AlignedPair::new(resample_one(&pair.a, n_states)?, resample_one(&pair.b, n_states)?)
}

fn resample_one(traj: &[Pose], n: usize) -> Result<Vec<Pose>, PipelineError> {
    let mut cum = Vec::with_capacity(traj.len());
    cum.push(0.0);
    for w in traj.windows(2) {
        let last = cum[cum.len() - 1];
        cum.push(last + w[0].position.distance(w[1].position));
    }
    let total = cum[cum.len() - 1];
    if !(total > 1e-12) {
        return Err(PipelineError::ZeroLength);
    }
    let last_seg = (0..traj.len() - 1)
        .rev()
        .find(|&i| cum[i + 1] > cum[i])
        .unwrap_or(0);

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k == n - 1 {
            out.push(traj[last_seg + 1]);
            break;
        }
        let target = total * k as f64 / (n - 1) as f64;
        while seg < last_seg && (cum[seg + 1] < target || cum[seg + 1] <= cum[seg]) {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let frac = ((target - cum[seg]) / len).clamp(0.0, 1.0);
        let (p0, p1) = (traj[seg], traj[seg + 1]);
        out.push(Pose::new(
            p0.position.lerp(p1.position, frac),
            slerp_unit(p0.orientation, p1.orientation, frac),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub n_states: usize,
    /// Smoothing weight relative to the squared arc length of each side:
    /// `λ = smoothing_scale · L²`.
    pub smoothing_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_states: 200,
            smoothing_scale: 1e-4,
        }
    }
}

fn smooth_side(traj: &[Pose], scale: f64) -> Result<Vec<Pose>, PipelineError> {
    let positions: Vec<Vec3> = traj.iter().map(|p| p.position).collect();
    let length: f64 = positions.windows(2).map(|w| w[0].distance(w[1])).sum();
    let smoothed = spline_smooth(&positions, scale * length * length)?;
    Ok(traj
        .iter()
        .zip(smoothed)
        .map(|(p, s)| Pose::new(s, p.orientation))
        .collect())
}

/// DTW alignment, smoothing and uniform resampling in one call.
pub fn process_demonstrations(
    a: &Demonstration,
    b: &Demonstration,
    cfg: &PipelineConfig,
) -> Result<AlignedPair, PipelineError> {
    let aligned = dtw_align(a, b)?;
    let smoothed = AlignedPair::new(
        smooth_side(&aligned.a, cfg.smoothing_scale)?,
        smooth_side(&aligned.b, cfg.smoothing_scale)?,
    )?;
    resample_uniform(&smoothed, cfg.n_states)
}
