//! Configurations, frames, path segments, and their closed-form geometry.
//!
//! Positions are unit-speed arc-length parameterized. Circular arcs are
//! evaluated exactly (Rodrigues rotation in 3D); helicoidal segments
//! delegate to the torsion ODE in [`crate::torsion`].

mod frenet;

pub use frenet::{frenet_integrate, FrameSample};

use crate::math::{self, sincos, wrap_angle, Vec2, Vec3};
use crate::torsion::HParams;
use crate::{Error, Result};
use alloc::vec::Vec;

/// Unit-tangent tolerance for [`Config3`] and plane normals.
pub const UNIT_TOL: f64 = 1e-9;
/// Orthonormality tolerance accepted by [`frenet_integrate`].
pub const FRAME_TOL: f64 = 1e-6;

/// Default integration step for a segment of the given length.
#[inline]
pub fn default_step(length: f64) -> f64 {
    math::fmin(1e-3, length / 100.0)
}

/// Planar configuration: position plus heading.
///
/// `theta` is always stored wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Config2 {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Config2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Config2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Unit heading vector `(cos theta, sin theta)`.
    #[inline]
    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }
}

/// Spatial configuration: position plus unit tangent direction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Config3 {
    pub r: Vec3,
    pub e: Vec3,
}

impl Config3 {
    /// Rejects tangents whose norm deviates from 1 by more than [`UNIT_TOL`].
    pub fn new(r: Vec3, e: Vec3) -> Result<Self> {
        if !(math::fabs(e.norm() - 1.0) <= UNIT_TOL) {
            return Err(Error::InvalidInput("tangent is not a unit vector"));
        }
        Ok(Config3 { r, e })
    }

    /// Constructor for tangents already known to be unit length
    /// (normalizes once to absorb rounding).
    pub fn from_unit(r: Vec3, e: Vec3) -> Self {
        Config3 {
            r,
            e: e.normalized(),
        }
    }
}

/// Position plus a right-handed orthonormal Frenet frame `(T, N, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Frame3 {
    pub r: Vec3,
    pub t: Vec3,
    pub n: Vec3,
    pub b: Vec3,
}

impl Frame3 {
    /// Rejects frames whose orthonormality defect exceeds [`UNIT_TOL`].
    pub fn new(r: Vec3, t: Vec3, n: Vec3, b: Vec3) -> Result<Self> {
        let f = Frame3 { r, t, n, b };
        let defect = f.orthonormality_defect();
        if !(defect <= UNIT_TOL) {
            return Err(Error::InvalidFrame { defect });
        }
        Ok(f)
    }

    /// Builds the frame at `c` whose normal is the reference normal of
    /// `c.e` rotated by `psi` about `c.e`.
    pub fn from_config(c: Config3, psi: f64) -> Self {
        let t = c.e.normalized();
        let n = t.any_unit_normal().rotated_about(t, psi);
        Frame3 {
            r: c.r,
            t,
            n,
            b: t.cross(n),
        }
    }

    #[inline]
    pub fn config(&self) -> Config3 {
        Config3::from_unit(self.r, self.t)
    }

    /// Largest deviation from unit length, pairwise orthogonality, and
    /// right-handedness among `(T, N, B)`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut d = math::fabs(self.t.norm() - 1.0);
        d = math::fmax(d, math::fabs(self.n.norm() - 1.0));
        d = math::fmax(d, math::fabs(self.b.norm() - 1.0));
        d = math::fmax(d, math::fabs(self.t.dot(self.n)));
        d = math::fmax(d, math::fabs(self.t.dot(self.b)));
        d = math::fmax(d, math::fabs(self.n.dot(self.b)));
        math::fmax(d, (self.t.cross(self.n) - self.b).norm())
    }

    /// Re-orthonormalizes in place: `T` first, `N` projected against it,
    /// `B = T x N`.
    pub fn gram_schmidt(&mut self) {
        self.t = self.t.normalized();
        self.n = self.n.reject_from_unit(self.t).normalized();
        self.b = self.t.cross(self.n);
    }
}

/// Planar path segment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind"))]
pub enum Segment2 {
    /// Straight line.
    #[cfg_attr(feature = "serde", serde(rename = "S"))]
    Straight { length: f64 },
    /// Circular arc with signed curvature `kappa` (`|kappa| = kappa_max`).
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    Arc { length: f64, kappa: f64 },
}

impl Segment2 {
    pub fn length(&self) -> f64 {
        match *self {
            Segment2::Straight { length } | Segment2::Arc { length, .. } => length,
        }
    }

    /// Exact endpoint of this segment started at `c`.
    pub fn endpoint(&self, c: Config2) -> Result<Config2> {
        match *self {
            Segment2::Straight { length } => {
                if !(length >= 0.0) {
                    return Err(Error::InvalidInput("segment length must be >= 0"));
                }
                let h = c.heading();
                Ok(Config2::new(
                    c.x + length * h.x,
                    c.y + length * h.y,
                    c.theta(),
                ))
            }
            Segment2::Arc { length, kappa } => {
                if !(length >= 0.0) {
                    return Err(Error::InvalidInput("segment length must be >= 0"));
                }
                if kappa == 0.0 || !kappa.is_finite() {
                    return Err(Error::InvalidInput("arc curvature must be nonzero"));
                }
                let th0 = c.theta();
                let th1 = th0 + kappa * length;
                let (s0, c0) = sincos(th0);
                let (s1, c1) = sincos(th1);
                Ok(Config2::new(
                    c.x + (s1 - s0) / kappa,
                    c.y - (c1 - c0) / kappa,
                    th1,
                ))
            }
        }
    }
}

/// Spatial path segment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind"))]
pub enum Segment3 {
    #[cfg_attr(feature = "serde", serde(rename = "S"))]
    Straight { length: f64 },
    /// Planar arc turning about the unit `normal` at signed rate `kappa`
    /// (`|kappa| = kappa_max`); `normal` must be orthogonal to the tangent
    /// at the segment start.
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    Arc {
        length: f64,
        kappa: f64,
        normal: Vec3,
    },
    /// Helicoidal arc: unit-curvature profile from the torsion ODE, scaled
    /// to curvature `kappa_max`. `psi` selects the initial normal by
    /// rotating the reference normal about the starting tangent.
    #[cfg_attr(feature = "serde", serde(rename = "H"))]
    Helical {
        length: f64,
        params: HParams,
        psi: f64,
    },
}

impl Segment3 {
    pub fn length(&self) -> f64 {
        match *self {
            Segment3::Straight { length }
            | Segment3::Arc { length, .. }
            | Segment3::Helical { length, .. } => length,
        }
    }

    /// Endpoint of this segment started at `c`. Arcs and straights are
    /// closed-form; helicoidal segments integrate the torsion ODE with the
    /// given step (or the default when `step` is `None`).
    pub fn endpoint(&self, c: Config3, kappa_max: f64, step: Option<f64>) -> Result<Config3> {
        if !(kappa_max > 0.0) {
            return Err(Error::InvalidInput("kappa_max must be positive"));
        }
        match self {
            Segment3::Straight { length } => {
                if !(*length >= 0.0) {
                    return Err(Error::InvalidInput("segment length must be >= 0"));
                }
                Ok(Config3 {
                    r: c.r + c.e * *length,
                    e: c.e,
                })
            }
            Segment3::Arc {
                length,
                kappa,
                normal,
            } => arc_endpoint_3(c, *length, *kappa, *normal),
            Segment3::Helical {
                length,
                params,
                psi,
            } => {
                let used_step = step.unwrap_or_else(|| default_step(*length));
                let samples =
                    crate::torsion::helical_segment(c, *psi, params, *length, kappa_max, used_step)?;
                Ok(samples.last().expect("nonempty samples").frame.config())
            }
        }
    }
}

/// Exact endpoint of a spatial circular arc (rotation about `normal`).
pub fn arc_endpoint_3(c: Config3, length: f64, kappa: f64, normal: Vec3) -> Result<Config3> {
    if !(length >= 0.0) {
        return Err(Error::InvalidInput("segment length must be >= 0"));
    }
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidInput("arc curvature must be nonzero"));
    }
    if math::fabs(normal.norm() - 1.0) > UNIT_TOL {
        return Err(Error::InvalidInput("arc normal is not a unit vector"));
    }
    if math::fabs(normal.dot(c.e)) > FRAME_TOL {
        return Err(Error::InvalidInput("arc normal is not orthogonal to tangent"));
    }
    let phi = kappa * length;
    let (s, co) = sincos(phi);
    let side = normal.cross(c.e);
    Ok(Config3 {
        r: c.r + c.e * (s / kappa) + side * ((1.0 - co) / kappa),
        e: c.e.rotated_about(normal, phi),
    })
}

/// Planar path: start configuration plus chained segments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Path2 {
    pub start: Config2,
    pub segments: Vec<Segment2>,
    pub kappa_max: f64,
}

impl Path2 {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// Checks lengths, curvature magnitudes, and `kappa_max`.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_max > 0.0) {
            return Err(Error::InvalidInput("kappa_max must be positive"));
        }
        for seg in &self.segments {
            if !(seg.length() >= 0.0) {
                return Err(Error::InvalidInput("segment length must be >= 0"));
            }
            if let Segment2::Arc { kappa, .. } = seg {
                if math::fabs(math::fabs(*kappa) - self.kappa_max) > 1e-12 {
                    return Err(Error::InvalidInput("arc curvature must equal kappa_max"));
                }
            }
        }
        Ok(())
    }

    /// Configuration at arc length `s in [0, total_length]`.
    pub fn evaluate(&self, s: f64) -> Result<Config2> {
        let total = self.total_length();
        if !(0.0..=total + 1e-12).contains(&s) {
            return Err(Error::OutOfRange { s, total });
        }
        let mut c = self.start;
        let mut remaining = math::fmin(s, total);
        for seg in &self.segments {
            let len = seg.length();
            if remaining <= len {
                let partial = match *seg {
                    Segment2::Straight { .. } => Segment2::Straight { length: remaining },
                    Segment2::Arc { kappa, .. } => Segment2::Arc {
                        length: remaining,
                        kappa,
                    },
                };
                return partial.endpoint(c);
            }
            c = seg.endpoint(c)?;
            remaining -= len;
        }
        Ok(c)
    }

    pub fn endpoint(&self) -> Result<Config2> {
        let mut c = self.start;
        for seg in &self.segments {
            c = seg.endpoint(c)?;
        }
        Ok(c)
    }
}

/// Spatial path: start configuration plus chained segments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Path3 {
    pub start: Config3,
    pub segments: Vec<Segment3>,
    pub kappa_max: f64,
}

impl Path3 {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_max > 0.0) {
            return Err(Error::InvalidInput("kappa_max must be positive"));
        }
        if math::fabs(self.start.e.norm() - 1.0) > UNIT_TOL {
            return Err(Error::InvalidInput("tangent is not a unit vector"));
        }
        let mut c = self.start;
        for seg in &self.segments {
            if !(seg.length() >= 0.0) {
                return Err(Error::InvalidInput("segment length must be >= 0"));
            }
            if let Segment3::Arc { kappa, .. } = seg {
                if math::fabs(math::fabs(*kappa) - self.kappa_max) > 1e-12 {
                    return Err(Error::InvalidInput("arc curvature must equal kappa_max"));
                }
            }
            c = seg.endpoint(c, self.kappa_max, None)?;
        }
        Ok(())
    }

    /// Configuration at arc length `s in [0, total_length]`.
    pub fn evaluate(&self, s: f64, step: Option<f64>) -> Result<Config3> {
        let total = self.total_length();
        if !(0.0..=total + 1e-12).contains(&s) {
            return Err(Error::OutOfRange { s, total });
        }
        let mut c = self.start;
        let mut remaining = math::fmin(s, total);
        for seg in &self.segments {
            let len = seg.length();
            if remaining <= len {
                let partial = match seg {
                    Segment3::Straight { .. } => Segment3::Straight { length: remaining },
                    Segment3::Arc { kappa, normal, .. } => Segment3::Arc {
                        length: remaining,
                        kappa: *kappa,
                        normal: *normal,
                    },
                    Segment3::Helical { params, psi, .. } => Segment3::Helical {
                        length: remaining,
                        params: params.clone(),
                        psi: *psi,
                    },
                };
                return partial.endpoint(c, self.kappa_max, step);
            }
            c = seg.endpoint(c, self.kappa_max, step)?;
            remaining -= len;
        }
        Ok(c)
    }

    pub fn endpoint(&self, step: Option<f64>) -> Result<Config3> {
        let mut c = self.start;
        for seg in &self.segments {
            c = seg.endpoint(c, self.kappa_max, step)?;
        }
        Ok(c)
    }
}

/// Orthonormal in-plane basis used to embed planar data into space.
#[derive(Debug, Clone, Copy)]
pub struct PlaneBasis {
    /// In-plane x axis (the base tangent).
    pub x: Vec3,
    /// In-plane y axis (reference normal rotated by `psi`).
    pub y: Vec3,
    /// Plane normal `x cross y`.
    pub n: Vec3,
}

/// Basis of the plane through `base.r` spanned by `base.e` and the
/// reference normal of `base.e` rotated by `psi` about `base.e`.
pub fn plane_basis(base: Config3, psi: f64) -> PlaneBasis {
    let x = base.e.normalized();
    let y = x.any_unit_normal().rotated_about(x, psi);
    PlaneBasis {
        x,
        y,
        n: x.cross(y),
    }
}

/// Embeds a planar configuration into the plane selected by `psi` at `base`.
pub fn embed_2d(c: Config2, psi: f64, base: Config3) -> Config3 {
    let pb = plane_basis(base, psi);
    let (s, co) = sincos(c.theta());
    Config3 {
        r: base.r + pb.x * c.x + pb.y * c.y,
        e: pb.x * co + pb.y * s,
    }
}
