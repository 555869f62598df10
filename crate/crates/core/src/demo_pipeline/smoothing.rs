//! Cubic smoothing spline fitted per coordinate against cumulative arc
//! length.
//!
//! Minimizes `Σ (yᵢ − g(tᵢ))² + λ ∫ g''(t)² dt` with the Reinsch
//! formulation: `(R + λ QᵀQ) γ = Qᵀ y`, `g = y − λ Q γ`, where `γ` holds
//! the second derivatives at the interior knots. `R + λ QᵀQ` is symmetric
//! positive definite and pentadiagonal, so the solve is a banded LDLᵀ.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::PipelineError;
use crate::geometry::Vec3;

/// Points closer than this are treated as the same knot.
pub const DEDUP_EPS: f64 = 1e-12;

/// Smooths a 3D polyline. `smoothing = 0` reproduces the input exactly.
///
/// Consecutive coincident points share one knot; the output has the same
/// length as the input and duplicates receive identical values.
pub fn spline_smooth(traj: &[Vec3], smoothing: f64) -> Result<Vec<Vec3>, PipelineError> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(PipelineError::InvalidSmoothing(smoothing));
    }
    if traj.len() < 4 {
        return Err(PipelineError::TooFewSamples {
            needed: 4,
            got: traj.len(),
        });
    }
    if let Some(i) = traj.iter().position(|p| !p.is_finite()) {
        return Err(PipelineError::NonFinite { index: i });
    }

    // knot_of[i] = knot index of traj[i]
    let mut knots: Vec<Vec3> = Vec::with_capacity(traj.len());
    let mut params: Vec<f64> = Vec::with_capacity(traj.len());
    let mut knot_of = Vec::with_capacity(traj.len());
    for &p in traj {
        match knots.last() {
            Some(&last) if last.distance(p) < DEDUP_EPS => {}
            Some(&last) => {
                let t = params[params.len() - 1] + last.distance(p);
                knots.push(p);
                params.push(t);
            }
            None => {
                knots.push(p);
                params.push(0.0);
            }
        }
        knot_of.push(knots.len() - 1);
    }
    if knots.len() < 4 {
        return Err(PipelineError::TooFewSamples {
            needed: 4,
            got: knots.len(),
        });
    }
    if smoothing == 0.0 {
        return Ok(traj.to_vec());
    }

    let xs: Vec<f64> = knots.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = knots.iter().map(|p| p.y).collect();
    let zs: Vec<f64> = knots.iter().map(|p| p.z).collect();
    let system = ReinschSystem::new(&params, smoothing);
    let fx = system.fit(&xs);
    let fy = system.fit(&ys);
    let fz = system.fit(&zs);
    Ok(knot_of
        .into_iter()
        .map(|k| Vec3::new(fx[k], fy[k], fz[k]))
        .collect())
}

/// Factorized smoothing system for one set of knots; reusable across
/// coordinates.
struct ReinschSystem {
    lambda: f64,
    /// Q column c has rows c, c+1, c+2.
    q: Vec<[f64; 3]>,
    factor: BandedLdlt,
}

impl ReinschSystem {
    fn new(t: &[f64], lambda: f64) -> Self {
        let n = t.len();
        let m = n - 2;
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let q: Vec<[f64; 3]> = (0..m)
            .map(|c| {
                let (a, b) = (1.0 / h[c], 1.0 / h[c + 1]);
                [a, -a - b, b]
            })
            .collect();
        let mut d0 = vec![0.0; m];
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        for c in 0..m {
            let qc = q[c];
            d0[c] = (h[c] + h[c + 1]) / 3.0 + lambda * (qc[0] * qc[0] + qc[1] * qc[1] + qc[2] * qc[2]);
            if c + 1 < m {
                let qn = q[c + 1];
                d1[c] = h[c + 1] / 6.0 + lambda * (qc[1] * qn[0] + qc[2] * qn[1]);
            }
            if c + 2 < m {
                d2[c] = lambda * qc[2] * q[c + 2][0];
            }
        }
        ReinschSystem {
            lambda,
            q,
            factor: BandedLdlt::factor(d0, d1, d2),
        }
    }

    fn fit(&self, y: &[f64]) -> Vec<f64> {
        let m = self.q.len();
        let rhs: Vec<f64> = (0..m)
            .map(|c| {
                let qc = self.q[c];
                qc[0] * y[c] + qc[1] * y[c + 1] + qc[2] * y[c + 2]
            })
            .collect();
        let gamma = self.factor.solve(rhs);
        let mut g = y.to_vec();
        for c in 0..m {
            for (k, qv) in self.q[c].iter().enumerate() {
                g[c + k] -= self.lambda * qv * gamma[c];
            }
        }
        g
    }
}

/// LDLᵀ of a symmetric positive-definite pentadiagonal matrix given by its
/// diagonal and two super-diagonals.
struct BandedLdlt {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl BandedLdlt {
    fn factor(a0: Vec<f64>, a1: Vec<f64>, a2: Vec<f64>) -> Self {
        let m = a0.len();
        let mut d = vec![0.0; m];
        let mut l1 = vec![0.0; m];
        let mut l2 = vec![0.0; m];
        for i in 0..m {
            let mut di = a0[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            d[i] = di;
            if i + 1 < m {
                let mut v = a1[i];
                if i >= 1 {
                    v -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = v / di;
            }
            if i + 2 < m {
                l2[i] = a2[i] / di;
            }
        }
        BandedLdlt { d, l1, l2 }
    }

    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let m = b.len();
        for i in 0..m {
            if i >= 1 {
                b[i] -= self.l1[i - 1] * b[i - 1];
            }
            if i >= 2 {
                b[i] -= self.l2[i - 2] * b[i - 2];
            }
        }
        for (bi, di) in b.iter_mut().zip(&self.d) {
            *bi /= di;
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                b[i] -= self.l1[i] * b[i + 1];
            }
            if i + 2 < m {
                b[i] -= self.l2[i] * b[i + 2];
            }
        }
        b
    }
}
