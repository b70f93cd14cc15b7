//! Sampled radial profiles and their evaluation between nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ode_rhs, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub r: f64,
    pub f: f64,
    pub fr: f64,
    pub frr: f64,
}

impl ProfilePoint {
    /// `w = r fr - f`, the denominator of the profile equation.
    pub fn w(&self) -> f64 {
        self.r * self.fr - self.f
    }

    /// Slope ratio `r fr / f`, `None` where `f <= 0`.
    pub fn q(&self) -> Option<f64> {
        (self.f > 0.0).then(|| self.r * self.fr / self.f)
    }
}

/// Which construction produced a run of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OriginSeries,
    Picard,
    Integrator,
}

/// Contiguous node range `[start, end)` with a common provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub provenance: Provenance,
}

/// Anything that can be evaluated as a radial profile. Implemented by
/// [`RadialProfile`] and by analytic test doubles.
pub trait RadialEval {
    fn params(&self) -> &Parameters;
    fn r_max(&self) -> f64;
    fn eval(&self, r: f64) -> Result<ProfilePoint>;
}

/// A profile sampled on strictly increasing radii starting at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    params: Parameters,
    points: Vec<ProfilePoint>,
    segments: Vec<Segment>,
}

impl RadialProfile {
    /// Builds a single-provenance profile.
    pub fn new(params: Parameters, points: Vec<ProfilePoint>, provenance: Provenance) -> Result<Self> {
        let end = points.len();
        Self::with_segments(
            params,
            points,
            vec![Segment {
                start: 0,
                end,
                provenance,
            }],
        )
    }

    pub fn with_segments(params: Parameters, points: Vec<ProfilePoint>, segments: Vec<Segment>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidProfile("profile has no points".into()))?;
        if first.r != 0.0 || first.fr != 0.0 || first.f != params.mu() {
            return Err(Error::InvalidProfile(format!(
                "origin node must be (r=0, f=mu={}, fr=0), got (r={}, f={}, fr={})",
                params.mu(),
                first.r,
                first.f,
                first.fr
            )));
        }
        for (i, pair) in points.windows(2).enumerate() {
            if !(pair[1].r > pair[0].r) {
                return Err(Error::InvalidProfile(format!(
                    "radii not strictly increasing at index {}: {} then {}",
                    i + 1,
                    pair[0].r,
                    pair[1].r
                )));
            }
        }
        if points.iter().any(|p| !(p.r.is_finite() && p.f.is_finite() && p.fr.is_finite() && p.frr.is_finite())) {
            return Err(Error::InvalidProfile("non-finite value in profile".into()));
        }
        let mut cursor = 0;
        for s in &segments {
            if s.start != cursor || s.end <= s.start || s.end > points.len() {
                return Err(Error::InvalidProfile("segments must tile the node range".into()));
            }
            cursor = s.end;
        }
        if cursor != points.len() {
            return Err(Error::InvalidProfile("segments must tile the node range".into()));
        }
        Ok(RadialProfile {
            params,
            points,
            segments,
        })
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn r_max(&self) -> f64 {
        self.points.last().map(|p| p.r).unwrap_or(0.0)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.r).collect()
    }

    pub fn last(&self) -> &ProfilePoint {
        self.points.last().expect("profile is never empty")
    }

    /// Nodes with `r < r_cut`, thinned to every `stride`-th, plus the
    /// evaluated point at `r_cut` itself.
    pub fn truncated(&self, r_cut: f64, stride: usize) -> Result<RadialProfile> {
        let end_pt = self.eval(r_cut)?;
        let stride = stride.max(1);
        let mut pts: Vec<ProfilePoint> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, p)| p.r < r_cut && i % stride == 0)
            .map(|(_, p)| *p)
            .collect();
        // drop a thinned node that sits too close to the cut
        if let Some(last) = pts.last() {
            if pts.len() > 1 && r_cut - last.r < 1e-3 * (r_cut - pts[pts.len() - 2].r) {
                pts.pop();
            }
        }
        if r_cut > 0.0 {
            pts.push(end_pt);
        }
        let provenance = self.segments.first().map(|s| s.provenance).unwrap_or(Provenance::Picard);
        RadialProfile::new(self.params, pts, provenance)
    }

    /// Concatenates a continuation whose first point coincides with the
    /// last point of `self`.
    pub fn append(&self, tail: &[ProfilePoint], provenance: Provenance) -> Result<RadialProfile> {
        let mut points = self.points.clone();
        let mut segments = self.segments.clone();
        let skip = usize::from(tail.first().is_some_and(|p| p.r == self.r_max()));
        let start = points.len();
        points.extend_from_slice(&tail[skip..]);
        if points.len() > start {
            segments.push(Segment {
                start,
                end: points.len(),
                provenance,
            });
        }
        RadialProfile::with_segments(self.params, points, segments)
    }

    /// Index of the node interval containing `r` (the last interval for `r_max`).
    fn bracket(&self, r: f64) -> usize {
        let idx = self.points.partition_point(|p| p.r <= r);
        idx.saturating_sub(1).min(self.points.len().saturating_sub(2))
    }

    /// Interpolated point. `f` is cubic Hermite on `(f, fr)` node data and
    /// `fr` is cubic Hermite on `(fr, frr)`; `frr` is recomputed from the
    /// profile equation. Nodes are returned exactly as stored.
    pub fn eval(&self, r: f64) -> Result<ProfilePoint> {
        let r_max = self.r_max();
        if !(r >= 0.0) || r > r_max {
            return Err(Error::OutOfRange { r, r_max });
        }
        if r == 0.0 {
            let mut p = self.points[0];
            p.frr = self.params.origin_curvature();
            return Ok(p);
        }
        if self.points.len() == 1 {
            return Err(Error::OutOfRange { r, r_max });
        }
        let i = self.bracket(r);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        if r == a.r {
            return Ok(*a);
        }
        if r == b.r {
            return Ok(*b);
        }
        let f = hermite(a.r, b.r, a.f, b.f, a.fr, b.fr, r);
        let fr = hermite(a.r, b.r, a.fr, b.fr, a.frr, b.frr, r);
        let frr = ode_rhs(&self.params, r, f, fr)?;
        Ok(ProfilePoint { r, f, fr, frr })
    }
}

impl RadialEval for RadialProfile {
    fn params(&self) -> &Parameters {
        &self.params
    }

    fn r_max(&self) -> f64 {
        RadialProfile::r_max(self)
    }

    fn eval(&self, r: f64) -> Result<ProfilePoint> {
        RadialProfile::eval(self, r)
    }
}

/// Cubic Hermite interpolant of `(y0, dy0)` at `t0` and `(y1, dy1)` at `t1`.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, dy0: f64, dy1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * dy0 + h01 * y1 + h11 * h * dy1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    fn quadratic_profile(spacing: f64, count: usize) -> RadialProfile {
        let p = validate(2, 1.0, -1.0).unwrap();
        let pts = (0..count)
            .map(|i| {
                let r = i as f64 * spacing;
                ProfilePoint {
                    r,
                    f: -1.0 + r * r / 4.0,
                    fr: r / 2.0,
                    frr: 0.5,
                }
            })
            .collect();
        RadialProfile::new(p, pts, Provenance::OriginSeries).unwrap()
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let prof = quadratic_profile(0.01, 101);
        for pt in prof.points().iter().skip(1) {
            assert_eq!(prof.eval(pt.r).unwrap(), *pt);
        }
    }

    #[test]
    fn origin_curvature_at_zero() {
        let prof = quadratic_profile(0.01, 11);
        let p = prof.eval(0.0).unwrap();
        assert_eq!((p.f, p.fr), (-1.0, 0.0));
        assert!((p.frr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn midpoints_of_quadratic_profile() {
        let prof = quadratic_profile(0.01, 101);
        for i in 0..100 {
            let r = (i as f64 + 0.5) * 0.01;
            let p = prof.eval(r).unwrap();
            assert!((p.f - (-1.0 + r * r / 4.0)).abs() <= 1e-10);
            assert!((p.fr - r / 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn out_of_range() {
        let prof = quadratic_profile(0.01, 11);
        assert!(matches!(prof.eval(0.2), Err(Error::OutOfRange { .. })));
        assert!(matches!(prof.eval(-1e-9), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn hermite_error_is_fourth_order() {
        // f = exp(r) sampled with exact derivative data
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut worst = 0.0f64;
            for i in 0..n {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                let m = 0.5 * (a + b);
                let v = hermite(a, b, a.exp(), b.exp(), a.exp(), b.exp(), m);
                worst = worst.max((v - m.exp()).abs());
            }
            worst
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn rejects_malformed_profiles() {
        let p = validate(2, 1.0, -1.0).unwrap();
        let pt = |r: f64, f: f64| ProfilePoint { r, f, fr: 0.0, frr: 0.5 };
        assert!(RadialProfile::new(p, vec![], Provenance::Picard).is_err());
        assert!(RadialProfile::new(p, vec![pt(0.1, -1.0)], Provenance::Picard).is_err());
        assert!(RadialProfile::new(p, vec![pt(0.0, -0.5)], Provenance::Picard).is_err());
        assert!(RadialProfile::new(p, vec![pt(0.0, -1.0), pt(0.2, -0.9), pt(0.2, -0.8)], Provenance::Picard).is_err());
    }
}
