//! Generalized-cylinder organs: a centerline polyline with a per-sample radius.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrganKind {
    Trunk,
    Branch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrganError {
    #[error("centerline needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("centerline has {points} samples but radii has {radii}")]
    LengthMismatch { points: usize, radii: usize },
    #[error("non-positive radius at sample {0}")]
    NonPositiveRadius(usize),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("repeated consecutive point at sample {0}")]
    RepeatedPoint(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganCurve {
    pub centerline: Vec<Point3>,
    pub radii: Vec<f64>,
    pub kind: OrganKind,
}

impl OrganCurve {
    pub fn new(centerline: Vec<Point3>, radii: Vec<f64>, kind: OrganKind) -> Result<Self, OrganError> {
        let c = OrganCurve { centerline, radii, kind };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OrganError> {
        let n = self.centerline.len();
        if n < 2 {
            return Err(OrganError::TooFewSamples(n));
        }
        if self.radii.len() != n {
            return Err(OrganError::LengthMismatch { points: n, radii: self.radii.len() });
        }
        for (i, (p, &r)) in self.centerline.iter().zip(&self.radii).enumerate() {
            if !p.is_finite() || !r.is_finite() {
                return Err(OrganError::NonFinite(i));
            }
            if r <= 0.0 {
                return Err(OrganError::NonPositiveRadius(i));
            }
            if i > 0 && self.centerline[i - 1] == *p {
                return Err(OrganError::RepeatedPoint(i));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centerline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centerline.is_empty()
    }

    pub fn base(&self) -> Point3 {
        self.centerline[0]
    }

    pub fn tip(&self) -> Point3 {
        *self.centerline.last().expect("organ has samples")
    }

    pub fn base_radius(&self) -> f64 {
        self.radii[0]
    }

    /// Cumulative arc length at every sample; first entry 0, last entry the total length.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.centerline.len());
        out.push(0.0);
        for w in self.centerline.windows(2) {
            acc += w[0].distance(w[1]);
            out.push(acc);
        }
        out
    }

    pub fn arc_length(&self) -> f64 {
        self.centerline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Segment index and local parameter for arc-length position `s` (clamped to the curve).
    fn locate(&self, cum: &[f64], s: f64) -> (usize, f64) {
        let total = *cum.last().unwrap();
        let s = s.clamp(0.0, total);
        // first segment whose end reaches s
        let seg = cum[1..].partition_point(|&c| c < s).min(cum.len() - 2);
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        (seg, t)
    }

    pub fn point_at(&self, s: f64) -> Point3 {
        let cum = self.cumulative_lengths();
        let (i, t) = self.locate(&cum, s);
        self.centerline[i].lerp(self.centerline[i + 1], t)
    }

    pub fn radius_at(&self, s: f64) -> f64 {
        let cum = self.cumulative_lengths();
        let (i, t) = self.locate(&cum, s);
        self.radii[i] + (self.radii[i + 1] - self.radii[i]) * t
    }

    /// Unit tangent of the segment containing arc-length position `s`.
    pub fn tangent_at(&self, s: f64) -> Point3 {
        let cum = self.cumulative_lengths();
        let (i, _) = self.locate(&cum, s);
        (self.centerline[i + 1] - self.centerline[i]).try_normalize().unwrap_or(Point3::UNIT_Z)
    }

    /// Resamples to `m` samples uniformly spaced in arc length, interpolating
    /// positions and radii linearly. Endpoints are preserved exactly.
    pub fn resample(&self, m: usize) -> OrganCurve {
        assert!(m >= 2, "resample needs at least 2 samples");
        let cum = self.cumulative_lengths();
        let total = *cum.last().unwrap();
        let n = self.centerline.len();
        let mut centerline = Vec::with_capacity(m);
        let mut radii = Vec::with_capacity(m);
        for k in 0..m {
            if k == 0 {
                centerline.push(self.centerline[0]);
                radii.push(self.radii[0]);
            } else if k == m - 1 {
                centerline.push(self.centerline[n - 1]);
                radii.push(self.radii[n - 1]);
            } else {
                let s = total * k as f64 / (m - 1) as f64;
                let (i, t) = self.locate(&cum, s);
                centerline.push(self.centerline[i].lerp(self.centerline[i + 1], t));
                radii.push(self.radii[i] + (self.radii[i + 1] - self.radii[i]) * t);
            }
        }
        OrganCurve { centerline, radii, kind: self.kind }
    }

    /// Applies `f` to every centerline point.
    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> OrganCurve {
        OrganCurve {
            centerline: self.centerline.iter().map(|&p| f(p)).collect(),
            radii: self.radii.clone(),
            kind: self.kind,
        }
    }

    pub fn translated(&self, d: Point3) -> OrganCurve {
        self.map_points(|p| p + d)
    }

    /// Bounds of the centerline inflated by the largest radius.
    pub fn bounds(&self) -> Aabb {
        let r = self.radii.iter().cloned().fold(0.0, f64::max);
        Aabb::from_points(self.centerline.iter().copied()).inflate(r)
    }

    pub fn is_tapered(&self) -> bool {
        self.radii.windows(2).all(|w| w[1] <= w[0])
    }

    /// Height of the centerline above its base sample.
    pub fn height(&self) -> f64 {
        let z0 = self.centerline[0].z;
        self.centerline.iter().map(|p| p.z - z0).fold(0.0, f64::max)
    }

    /// First point where the centerline reaches `h` above its base, with its arc-length position.
    pub fn point_at_height(&self, h: f64) -> Option<(Point3, f64)> {
        let z0 = self.centerline[0].z;
        let target = z0 + h;
        let cum = self.cumulative_lengths();
        for (i, w) in self.centerline.windows(2).enumerate() {
            let (a, b) = (w[0].z - target, w[1].z - target);
            if a == 0.0 {
                return Some((w[0], cum[i]));
            }
            if a * b <= 0.0 {
                let t = a / (a - b);
                let s = cum[i] + t * (cum[i + 1] - cum[i]);
                return Some((w[0].lerp(w[1], t), s));
            }
        }
        None
    }
}

/// Pointwise weighted sum of curves with equal sample counts.
///
/// # Panics
/// If the curves are empty, differ in sample count, or `weights` has a different length.
pub fn blend_curves(curves: &[OrganCurve], weights: &[f64]) -> OrganCurve {
    assert!(!curves.is_empty() && curves.len() == weights.len());
    let m = curves[0].len();
    assert!(curves.iter().all(|c| c.len() == m), "blend requires equal sample counts");
    let mut centerline = vec![Point3::ZERO; m];
    let mut radii = vec![0.0; m];
    for (c, &w) in curves.iter().zip(weights) {
        for k in 0..m {
            centerline[k] += c.centerline[k] * w;
            radii[k] += c.radii[k] * w;
        }
    }
    OrganCurve { centerline, radii, kind: curves[0].kind }
}
