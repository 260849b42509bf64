//! Sampled reachability-set boundaries, Monte Carlo endpoint oracles, and
//! support-point queries.
//!
//! The pipeline enumerates extremal candidates at the arrival time, screens
//! each with its family-analytic costate, and keeps the endpoints that no
//! oracle sample dominates in their outward direction. Position-only modes
//! additionally order the kept points into a closed profile polygon (the
//! planar boundary curve, or the meridian of the surface of revolution);
//! direction-fixed modes emit a point cloud with the terminal costate
//! recorded as the support direction of every point.

use crate::families::{
    enumerate_2d_stats, enumerate_3d, start2, start3, Candidate2, Candidate3, CandidateGrid,
    EnumStats, FamilyKind, Template2, Template3,
};
use crate::geom::{embed_2d, plane_basis, Config2, Config3, Segment2};
use crate::math::{self, Vec3};
use crate::pmp::{screen_candidate2, screen_candidate3};
use crate::torsion::HParams;
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Divisions of the arrival time for screening sample grids.
const SCREEN_DIVS: f64 = 64.0;
/// Finer divisions for helicoidal work, where ODE error must stay below
/// the helical pass tolerance.
const H_DIVS: f64 = 2048.0;
/// Control-scan resolution used during screening (the analytic maximizer
/// is always included, so a coarse scan suffices).
const SCREEN_CONTROL_RES: usize = 9;
/// Screening pass tolerance.
const SCREEN_TOL: f64 = 1e-5;
/// Angular bins per arc-grid point when assembling profile polygons.
const BINS_PER_ARC: usize = 4;
/// Cosine of the cone half-angle for the directed-mode dominance window.
const CONE_COS: f64 = 0.8;
/// Cone length as a fraction of the arrival time.
const CONE_LEN_FRAC: f64 = 0.3;
/// Oracle prefix used by the directed-mode dominance filter; containment
/// always uses the full cloud.
const DOM_ORACLE_CAP: usize = 20_000;
/// Neighbors consulted per sample by the directed-mode containment test.
const KNN: usize = 4;

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

/// Which reachable set is under study: planar or spatial, with the terminal
/// direction either free (`NoDir*`) or part of the endpoint (`Dir*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    #[cfg_attr(feature = "serde", serde(rename = "2d-dir"))]
    Dir2,
    #[cfg_attr(feature = "serde", serde(rename = "2d-nodir"))]
    NoDir2,
    #[cfg_attr(feature = "serde", serde(rename = "3d-dir"))]
    Dir3,
    #[cfg_attr(feature = "serde", serde(rename = "3d-nodir"))]
    NoDir3,
}

impl Mode {
    pub fn planar(&self) -> bool {
        matches!(self, Mode::Dir2 | Mode::NoDir2)
    }

    pub fn with_direction(&self) -> bool {
        matches!(self, Mode::Dir2 | Mode::Dir3)
    }

    /// Dimension of the endpoint embedding used for support queries and
    /// dominance tests: position block plus, in `Dir*` modes, the unit
    /// tangent block.
    pub fn embed_dim(&self) -> usize {
        match self {
            Mode::NoDir2 => 2,
            Mode::NoDir3 => 3,
            Mode::Dir2 => 4,
            Mode::Dir3 => 6,
        }
    }

    fn pos_dim(&self) -> usize {
        if self.planar() {
            2
        } else {
            3
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Dir2 => "2d-dir",
            Mode::NoDir2 => "2d-nodir",
            Mode::Dir3 => "3d-dir",
            Mode::NoDir3 => "3d-nodir",
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2d-dir" => Ok(Mode::Dir2),
            "2d-nodir" => Ok(Mode::NoDir2),
            "3d-dir" => Ok(Mode::Dir3),
            "3d-nodir" => Ok(Mode::NoDir3),
            _ => Err(Error::InvalidInput(
                "mode must be one of 2d-dir, 2d-nodir, 3d-dir, 3d-nodir",
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle
// ---------------------------------------------------------------------------

/// Validation settings for boundary construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleSettings {
    pub n_samples: usize,
    pub n_pieces: usize,
    pub seed: u64,
    /// Dominance threshold; `None` means `1e-6 * t_f`.
    pub eps_dom: Option<f64>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            n_samples: 100_000,
            n_pieces: 20,
            seed: 0,
            eps_dom: None,
        }
    }
}

/// Endpoint samples of one oracle run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OraclePoints {
    Planar(Vec<Config2>),
    Spatial(Vec<Config3>),
}

impl OraclePoints {
    pub fn len(&self) -> usize {
        match self {
            OraclePoints::Planar(v) => v.len(),
            OraclePoints::Spatial(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Endpoints of random admissible piecewise-constant controls: an inner
/// approximation of the reachable set used to validate boundaries.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleCloud {
    pub mode: Mode,
    pub t_f: f64,
    pub kappa_max: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub n_pieces: usize,
    /// Description of the sampled control law.
    pub control_model: alloc::string::String,
    pub points: OraclePoints,
}

fn check_budget(t_f: f64, kappa_max: f64) -> Result<()> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidInput("t_f must be positive and finite"));
    }
    if !(kappa_max > 0.0) || !kappa_max.is_finite() {
        return Err(Error::InvalidInput("kappa_max must be positive and finite"));
    }
    Ok(())
}

fn sample_rng(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

#[inline]
fn draw(rng: &mut ChaCha8Rng) -> f64 {
    math::u01(rng.next_u64())
}

fn oracle_endpoint2(t_f: f64, kappa_max: f64, n_pieces: usize, rng: &mut ChaCha8Rng) -> Config2 {
    let dt = t_f / n_pieces as f64;
    let mut c = start2();
    for _ in 0..n_pieces {
        let u = (2.0 * draw(rng) - 1.0) * kappa_max;
        let seg = if math::fabs(u) < 1e-14 {
            Segment2::Straight { length: dt }
        } else {
            Segment2::Arc {
                length: dt,
                kappa: u,
            }
        };
        c = seg.endpoint(c).expect("piece endpoint is closed form");
    }
    c
}

fn oracle_endpoint3(t_f: f64, kappa_max: f64, n_pieces: usize, rng: &mut ChaCha8Rng) -> Config3 {
    let dt = t_f / n_pieces as f64;
    let mut r = Vec3::ZERO;
    let mut e = Vec3::X;
    for _ in 0..n_pieces {
        // Draw order is part of the determinism contract: angle, then
        // magnitude.
        let phi = TAU * draw(rng);
        let mag = kappa_max * draw(rng);
        let b1 = e.any_unit_normal();
        let b2 = e.cross(b1);
        let (sp, cp) = math::sincos(phi);
        let nhat = b1 * cp + b2 * sp;
        if mag * dt < 1e-14 {
            r += e * dt;
        } else {
            let (sa, ca) = math::sincos(mag * dt);
            r += e * (sa / mag) + nhat * ((1.0 - ca) / mag);
            e = (e * ca + nhat * sa).normalized();
        }
    }
    Config3 { r, e }
}

/// Planar oracle endpoints for the sample index range `lo..hi`. Sample `i`
/// consumes only stream `i` of the seeded generator, so disjoint ranges
/// can be produced independently (and concatenated in order) without
/// changing any value.
pub fn oracle_endpoints2(
    t_f: f64,
    kappa_max: f64,
    n_pieces: usize,
    seed: u64,
    lo: usize,
    hi: usize,
) -> Result<Vec<Config2>> {
    check_budget(t_f, kappa_max)?;
    if n_pieces == 0 {
        return Err(Error::InvalidInput("n_pieces must be at least 1"));
    }
    if lo > hi {
        return Err(Error::InvalidInput("sample range is inverted"));
    }
    Ok((lo..hi)
        .map(|i| oracle_endpoint2(t_f, kappa_max, n_pieces, &mut sample_rng(seed, i as u64)))
        .collect())
}

/// Spatial analogue of [`oracle_endpoints2`].
pub fn oracle_endpoints3(
    t_f: f64,
    kappa_max: f64,
    n_pieces: usize,
    seed: u64,
    lo: usize,
    hi: usize,
) -> Result<Vec<Config3>> {
    check_budget(t_f, kappa_max)?;
    if n_pieces == 0 {
        return Err(Error::InvalidInput("n_pieces must be at least 1"));
    }
    if lo > hi {
        return Err(Error::InvalidInput("sample range is inverted"));
    }
    Ok((lo..hi)
        .map(|i| oracle_endpoint3(t_f, kappa_max, n_pieces, &mut sample_rng(seed, i as u64)))
        .collect())
}

/// Draws `n_samples` endpoints of random admissible controls with
/// `n_pieces` i.i.d. constant pieces each: planar curvature uniform on
/// `[-kappa_max, kappa_max]`; spatial turning direction uniform on the
/// tangent circle with magnitude uniform on `[0, kappa_max]`.
pub fn mc_oracle(
    mode: Mode,
    t_f: f64,
    kappa_max: f64,
    n_samples: usize,
    n_pieces: usize,
    seed: u64,
) -> Result<OracleCloud> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1"));
    }
    let (points, control_model) = if mode.planar() {
        (
            OraclePoints::Planar(oracle_endpoints2(t_f, kappa_max, n_pieces, seed, 0, n_samples)?),
            "piecewise-constant curvature, uniform on [-kappa_max, kappa_max]",
        )
    } else {
        (
            OraclePoints::Spatial(oracle_endpoints3(t_f, kappa_max, n_pieces, seed, 0, n_samples)?),
            "piecewise-constant turning, direction uniform on the tangent circle, magnitude uniform on [0, kappa_max]",
        )
    };
    Ok(OracleCloud {
        mode,
        t_f,
        kappa_max,
        seed,
        n_samples,
        n_pieces,
        control_model: alloc::string::String::from(control_model),
        points,
    })
}

/// Wraps endpoint ranges produced by [`oracle_endpoints2`] /
/// [`oracle_endpoints3`] (concatenated in order) into the cloud
/// [`mc_oracle`] would have built, so callers may parallelize sampling.
pub fn oracle_cloud_from_points(
    mode: Mode,
    t_f: f64,
    kappa_max: f64,
    n_pieces: usize,
    seed: u64,
    points: OraclePoints,
) -> Result<OracleCloud> {
    check_budget(t_f, kappa_max)?;
    if points.is_empty() {
        return Err(Error::InvalidInput("n_samples must be at least 1"));
    }
    if n_pieces == 0 {
        return Err(Error::InvalidInput("n_pieces must be at least 1"));
    }
    let control_model = match (&points, mode.planar()) {
        (OraclePoints::Planar(_), true) => {
            "piecewise-constant curvature, uniform on [-kappa_max, kappa_max]"
        }
        (OraclePoints::Spatial(_), false) => {
            "piecewise-constant turning, direction uniform on the tangent circle, magnitude uniform on [0, kappa_max]"
        }
        _ => return Err(Error::InvalidInput("oracle points do not match the mode")),
    };
    Ok(OracleCloud {
        mode,
        t_f,
        kappa_max,
        seed,
        n_samples: points.len(),
        n_pieces,
        control_model: alloc::string::String::from(control_model),
        points,
    })
}

// ---------------------------------------------------------------------------
// Endpoint embeddings
// ---------------------------------------------------------------------------

fn embed2(c: &Config2, with_direction: bool) -> [f64; 6] {
    if with_direction {
        let (s, co) = math::sincos(c.theta());
        [c.x, c.y, co, s, 0.0, 0.0]
    } else {
        [c.x, c.y, 0.0, 0.0, 0.0, 0.0]
    }
}

fn embed3(c: &Config3, with_direction: bool) -> [f64; 6] {
    if with_direction {
        [c.r.x, c.r.y, c.r.z, c.e.x, c.e.y, c.e.z]
    } else {
        [c.r.x, c.r.y, c.r.z, 0.0, 0.0, 0.0]
    }
}

fn value_of(embed: &[f64; 6], c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in embed.iter().zip(c.iter()) {
        acc += a * b;
    }
    acc
}

fn check_direction(c: &[f64], dim: usize) -> Result<()> {
    if c.len() != dim {
        return Err(Error::InvalidInput("direction has the wrong dimension"));
    }
    let norm2: f64 = c.iter().map(|x| x * x).sum();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::InvalidInput("direction must be nonzero and finite"));
    }
    Ok(())
}

/// Empirical support of an oracle cloud in direction `c` (length
/// [`Mode::embed_dim`]).
pub fn oracle_support(oracle: &OracleCloud, c: &[f64]) -> Result<f64> {
    check_direction(c, oracle.mode.embed_dim())?;
    let with_direction = oracle.mode.with_direction();
    let mut best = f64::NEG_INFINITY;
    match &oracle.points {
        OraclePoints::Planar(v) => {
            for p in v {
                best = math::fmax(best, value_of(&embed2(p, with_direction), c));
            }
        }
        OraclePoints::Spatial(v) => {
            for p in v {
                best = math::fmax(best, value_of(&embed3(p, with_direction), c));
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidInput("oracle cloud is empty"));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Candidate screening
// ---------------------------------------------------------------------------

/// One screened planar candidate, ready for assembly.
#[derive(Debug, Clone)]
pub struct Screened2 {
    pub template: Template2,
    pub family: FamilyKind,
    pub endpoint: Config2,
    /// Normalized terminal costate in the endpoint embedding (outward
    /// direction estimate).
    pub outward: [f64; 6],
    pub pass: bool,
    pub gap: f64,
}

/// One screened spatial candidate.
#[derive(Debug, Clone)]
pub struct Screened3 {
    pub template: Template3,
    pub family: FamilyKind,
    pub endpoint: Config3,
    pub outward: [f64; 6],
    /// Meridian-plane coordinates `(axial, radial)`. Section candidates
    /// fill these from their own plane, so values are identical across
    /// the section grid.
    pub profile: [f64; 2],
    /// Outward estimate folded into the meridian plane.
    pub profile_outward: [f64; 2],
    pub pass: bool,
    pub gap: f64,
}

fn normalize6(mut v: [f64; 6]) -> [f64; 6] {
    let n = math::sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    v
}

fn fold3(r: &Vec3) -> [f64; 2] {
    [r.x, math::sqrt(r.y * r.y + r.z * r.z)]
}

fn fold_outward(endpoint: &Config3, outward: &[f64; 6]) -> [f64; 2] {
    let rho = math::sqrt(endpoint.r.y * endpoint.r.y + endpoint.r.z * endpoint.r.z);
    let w_rad = if rho > 0.0 {
        (outward[1] * endpoint.r.y + outward[2] * endpoint.r.z) / rho
    } else {
        math::sqrt(outward[1] * outward[1] + outward[2] * outward[2])
    };
    [outward[0], w_rad]
}

fn screen_one2(cand: &Candidate2, with_direction: bool) -> Result<Screened2> {
    let t_f = cand.path.total_length();
    let s = screen_candidate2(
        cand,
        with_direction,
        t_f / SCREEN_DIVS,
        SCREEN_CONTROL_RES,
        SCREEN_TOL,
    )?;
    let endpoint = cand.path.endpoint()?;
    let flat = s.traj.terminal_flat();
    let (st, ct) = math::sincos(endpoint.theta());
    let outward = if with_direction {
        normalize6([flat[0], flat[1], -flat[2] * st, flat[2] * ct, 0.0, 0.0])
    } else {
        normalize6([flat[0], flat[1], 0.0, 0.0, 0.0, 0.0])
    };
    Ok(Screened2 {
        template: cand.template,
        family: cand.family,
        endpoint,
        outward,
        pass: s.pass,
        gap: s.report.max_pointwise_gap,
    })
}

/// Screens planar candidates in stream order. Pure per candidate: any
/// partition of the slice yields the same records.
pub fn screen_points2(cands: &[Candidate2], with_direction: bool) -> Result<Vec<Screened2>> {
    cands
        .iter()
        .map(|c| screen_one2(c, with_direction))
        .collect()
}

/// Screens a section-plane candidate through its planar template. The
/// planar screen is closed form and orientation-free, so every section
/// angle shares one verdict and one set of meridian coordinates; the
/// costate embeds into the section plane afterwards.
fn screen_planar3(cand: &Candidate3, with_direction: bool) -> Result<Screened3> {
    let Template3::Planar { psi, inner } = &cand.template else {
        return Err(Error::InvalidInput("helicoidal candidate in planar screen"));
    };
    let t_f = cand.path.total_length();
    let kappa_max = cand.path.kappa_max;
    let path2 = inner
        .build(start2(), kappa_max, t_f)
        .ok_or(Error::InvalidInput("planar template fails to instantiate"))?;
    let cand2 = Candidate2 {
        family: inner.family(),
        template: *inner,
        path: path2,
    };
    let s = screen_candidate2(
        &cand2,
        with_direction,
        t_f / SCREEN_DIVS,
        SCREEN_CONTROL_RES,
        SCREEN_TOL,
    )?;
    let e2 = cand2.path.endpoint()?;
    let flat = s.traj.terminal_flat();
    let base = start3();
    let pb = plane_basis(base, *psi);
    let endpoint = embed_2d(e2, *psi, base);
    let pr = pb.x * flat[0] + pb.y * flat[1];
    let outward = if with_direction {
        let pe = pb.n.cross(endpoint.e) * flat[2];
        normalize6([pr.x, pr.y, pr.z, pe.x, pe.y, pe.z])
    } else {
        normalize6([pr.x, pr.y, pr.z, 0.0, 0.0, 0.0])
    };
    // Normalized exactly like the planar screen so the folded outward
    // agrees bit for bit with the flat run.
    let pw = normalize6([flat[0], flat[1], 0.0, 0.0, 0.0, 0.0]);
    Ok(Screened3 {
        template: cand.template.clone(),
        family: cand.family,
        endpoint,
        outward,
        profile: [e2.x, math::fabs(e2.y)],
        profile_outward: [pw[0], if e2.y < 0.0 { -pw[1] } else { pw[1] }],
        pass: s.pass,
        gap: s.report.max_pointwise_gap,
    })
}

/// Screens a helicoidal candidate in its reference plane. Every candidate
/// sharing the torsion parameters reuses this record under the rotation
/// that carries the reference plane to its own, which keeps results
/// byte-identical no matter how the stream is chunked.
fn screen_h_reference(cand: &Candidate3, params: &HParams) -> Result<Option<Screened3>> {
    let t_f = cand.path.total_length();
    let kappa_max = cand.path.kappa_max;
    let template = Template3::H {
        psi: 0.0,
        params: params.clone(),
    };
    let path = template
        .build(start3(), kappa_max, t_f)
        .expect("helical template instantiates");
    let reference = Candidate3 {
        family: FamilyKind::H,
        template,
        path,
    };
    let step = t_f / H_DIVS;
    let screen = match screen_candidate3(&reference, true, step, SCREEN_CONTROL_RES, SCREEN_TOL) {
        Ok(s) => s,
        Err(Error::TorsionSingularity { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let endpoint = match reference.path.endpoint(Some(step)) {
        Ok(c) => c,
        Err(Error::TorsionSingularity { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let flat = screen.traj.terminal_flat();
    let outward = normalize6([flat[0], flat[1], flat[2], flat[3], flat[4], flat[5]]);
    Ok(Some(Screened3 {
        template: reference.template,
        family: FamilyKind::H,
        endpoint,
        outward,
        profile: fold3(&endpoint.r),
        profile_outward: fold_outward(&endpoint, &outward),
        pass: screen.pass,
        gap: screen.report.max_pointwise_gap,
    }))
}

fn rotate_h(reference: &Screened3, cand: &Candidate3, psi: f64) -> Screened3 {
    let rot = |v: Vec3| v.rotated_about(Vec3::X, psi);
    let pr = rot(Vec3::new(
        reference.outward[0],
        reference.outward[1],
        reference.outward[2],
    ));
    let pe = rot(Vec3::new(
        reference.outward[3],
        reference.outward[4],
        reference.outward[5],
    ));
    Screened3 {
        template: cand.template.clone(),
        family: cand.family,
        endpoint: Config3 {
            r: rot(reference.endpoint.r),
            e: rot(reference.endpoint.e).normalized(),
        },
        outward: [pr.x, pr.y, pr.z, pe.x, pe.y, pe.z],
        // Folding is invariant under rotation about the initial tangent.
        profile: reference.profile,
        profile_outward: reference.profile_outward,
        pass: reference.pass,
        gap: reference.gap,
    }
}

/// Screens spatial candidates in stream order. `None` marks a candidate
/// whose torsion profile truncated during screening; assembly excludes and
/// counts those. Pure per candidate, so slices may be screened in chunks.
pub fn screen_points3(
    cands: &[Candidate3],
    with_direction: bool,
) -> Result<Vec<Option<Screened3>>> {
    let mut cache: Option<(HParams, Option<Screened3>)> = None;
    let mut out = Vec::with_capacity(cands.len());
    for cand in cands {
        match &cand.template {
            Template3::Planar { .. } => out.push(Some(screen_planar3(cand, with_direction)?)),
            Template3::H { psi, params } => {
                let hit = match &cache {
                    Some((p, s)) if p == params => s.clone(),
                    _ => {
                        let s = screen_h_reference(cand, params)?;
                        cache = Some((params.clone(), s.clone()));
                        s
                    }
                };
                out.push(hit.map(|r| rotate_h(&r, cand, *psi)));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Boundary clouds
// ---------------------------------------------------------------------------

/// Endpoint payload of one boundary point; position-only in `NoDir*`
/// modes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Endpoint {
    Pos2([f64; 2]),
    Conf2(Config2),
    Pos3([f64; 3]),
    Conf3(Config3),
}

/// Generator template of one boundary point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Generator {
    Planar(Template2),
    Spatial(Template3),
}

/// One sampled boundary point with its generator and screening verdict.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryPoint {
    pub endpoint: Endpoint,
    pub generator: Generator,
    pub family: FamilyKind,
    pub pmp_pass: bool,
    pub pmp_gap: f64,
    /// Normalized outward direction in the endpoint embedding (the
    /// terminal costate of the screening seed).
    pub support_direction: Vec<f64>,
}

/// Construction bookkeeping emitted with every boundary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryMeta {
    pub mode: Mode,
    pub t_f: f64,
    pub kappa_max: f64,
    pub grid: CandidateGrid,
    pub oracle_seed: u64,
    pub oracle_samples: usize,
    pub oracle_pieces: usize,
    pub eps_dom: f64,
    /// Candidates emitted by enumeration (after deduplication).
    pub enumerated: usize,
    pub deduped: usize,
    /// Candidates excluded because their torsion profile truncated.
    pub singular_dropped: usize,
    /// Candidates whose analytic seed failed screening (marked, still
    /// eligible for assembly).
    pub screen_failed: usize,
    /// Points removed because oracle samples advance past them in their
    /// outward direction.
    pub dominated: usize,
    /// Points not emitted because a radially more extreme point occupies
    /// their profile bin (position-only modes).
    pub interior_thinned: usize,
    pub kept: usize,
    /// True when the dominance filter pruned anything: the screened
    /// candidate set describes the boundary in the relaxed
    /// maximum-principle sense, which may exceed the topological boundary.
    pub pmp_sense_pruned: bool,
}

/// A sampled reachability-set boundary. In `NoDir*` modes the points are
/// ordered along the closed profile polygon; in `Dir*` modes they follow
/// the candidate stream.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryCloud {
    pub points: Vec<BoundaryPoint>,
    pub meta: BoundaryMeta,
}

/// Profile coordinates of a position-only boundary: `(x, y)` for the
/// planar mode, `(axial, radial)` for the spatial one, in polygon order.
pub fn profile_polygon(cloud: &BoundaryCloud) -> Result<Vec<[f64; 2]>> {
    match cloud.meta.mode {
        Mode::NoDir2 => cloud
            .points
            .iter()
            .map(|p| match p.endpoint {
                Endpoint::Pos2(xy) => Ok(xy),
                _ => Err(Error::InvalidInput("planar boundary holds a spatial point")),
            })
            .collect(),
        Mode::NoDir3 => cloud
            .points
            .iter()
            .map(|p| match p.endpoint {
                Endpoint::Pos3(xyz) => Ok(fold3(&Vec3::new(xyz[0], xyz[1], xyz[2]))),
                _ => Err(Error::InvalidInput("spatial boundary holds a planar point")),
            })
            .collect(),
        _ => Err(Error::InvalidInput(
            "profile polygons exist only in position-only modes",
        )),
    }
}

// ---------------------------------------------------------------------------
// Profile assembly (position-only modes)
// ---------------------------------------------------------------------------

struct WallInput {
    /// Profile-plane position.
    p: [f64; 2],
    /// Profile-plane outward estimate.
    w: [f64; 2],
    pass: bool,
}

struct ProfileOutcome {
    /// Ordered indices into the input stream: outer wall by ascending
    /// angle, then inner wall by descending angle.
    order: Vec<usize>,
    dominated: usize,
    interior: usize,
}

struct ProfileTols {
    eps_dom: f64,
    /// Radial slack of the discrete candidate network against the oracle.
    slack: f64,
    /// Forward-cone reach for candidate witnesses.
    cone_len: f64,
}

/// Flags profile points that other candidate endpoints prove interior.
/// `pts` must be in folded (upper half-plane) coordinates so the planar
/// and meridian builds see bit-identical geometry. A passing candidate
/// falls only to a witness inside its forward cone: a true wall runs
/// perpendicular to its costate normals, so wall neighbors stay far
/// outside the cone, while a sheet that continues past a
/// self-intersection points obliquely across itself and is removed by its
/// own neighbors. Outer walls support the set along their normals, so for
/// them any witness range counts; inner walls face a cavity whose far
/// side would testify falsely, so their witnesses must stay within the
/// cone reach. A failing candidate cannot sit on the boundary at all, so
/// any witness past its tangent line removes it.
fn profile_excluded(pts: &[WallInput], witness_ok: &[bool], tols: &ProfileTols) -> Vec<bool> {
    pts.iter()
        .enumerate()
        .map(|(i, q)| {
            let wn = math::sqrt(q.w[0] * q.w[0] + q.w[1] * q.w[1]);
            if !(wn > 0.0) {
                return false;
            }
            let outer = q.p[0] * q.w[0] + q.p[1] * q.w[1] >= 0.0;
            pts.iter().enumerate().any(|(j, s)| {
                if j == i || !witness_ok[j] {
                    return false;
                }
                let d = [s.p[0] - q.p[0], s.p[1] - q.p[1]];
                let along = (d[0] * q.w[0] + d[1] * q.w[1]) / wn;
                if !(along > tols.eps_dom) {
                    return false;
                }
                if !q.pass {
                    return true;
                }
                let d2 = d[0] * d[0] + d[1] * d[1];
                if along * along < CONE_COS * CONE_COS * d2 {
                    return false;
                }
                outer || d2 <= tols.cone_len * tols.cone_len
            })
        })
        .collect()
}

/// Orders profile points into a closed curve. Points flagged in
/// `excluded` are dropped as dominated. Per angular bin and wall side,
/// the radially extreme remaining point survives (preferring, within the
/// grid slack, one whose screen passed), and the oracle decides whether
/// that wall exists at all: a bin whose samples extend past the candidate
/// extreme by more than the tolerance is reachable beyond the candidates,
/// so its selection is dominated rather than a boundary.
fn assemble_profile(
    pts: &[WallInput],
    excluded: &[bool],
    oracle: &[[f64; 2]],
    tols: &ProfileTols,
    n_bins: usize,
) -> ProfileOutcome {
    let ProfileTols { eps_dom, slack, .. } = *tols;
    let mut radius = Vec::with_capacity(pts.len());
    let mut angles = Vec::with_capacity(pts.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in pts {
        radius.push(math::sqrt(q.p[0] * q.p[0] + q.p[1] * q.p[1]));
        let a = math::atan2(q.p[1], q.p[0]);
        lo = math::fmin(lo, a);
        hi = math::fmax(hi, a);
        angles.push(a);
    }
    let width = if hi > lo {
        (hi - lo) / n_bins as f64
    } else {
        0.0
    };
    let bin_of = |angle: f64| -> usize {
        if width == 0.0 {
            return 0;
        }
        let b = math::floor((angle - lo) / width) as isize;
        b.clamp(0, n_bins as isize - 1) as usize
    };

    let excluded_count = excluded.iter().filter(|e| **e).count();

    let mut outer_bins: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_bins];
    let mut inner_bins: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_bins];
    for (k, q) in pts.iter().enumerate() {
        if excluded[k] {
            continue;
        }
        let outer = q.p[0] * q.w[0] + q.p[1] * q.w[1] >= 0.0;
        let b = bin_of(angles[k]);
        if outer {
            outer_bins[b].push(k);
        } else {
            inner_bins[b].push(k);
        }
    }

    let mut bin_min = alloc::vec![f64::INFINITY; n_bins];
    let mut bin_max = alloc::vec![f64::NEG_INFINITY; n_bins];
    for s in oracle {
        let b = bin_of(math::atan2(s[1], s[0]));
        let r = math::sqrt(s[0] * s[0] + s[1] * s[1]);
        bin_min[b] = math::fmin(bin_min[b], r);
        bin_max[b] = math::fmax(bin_max[b], r);
    }

    let eps_eff = math::fmax(eps_dom, slack);
    // Winner of one bin and side, plus the oracle verdict against the
    // bin's extreme radius.
    let pick = |b: usize, members: &[usize], outermost: bool| -> Option<(usize, bool)> {
        if members.is_empty() {
            return None;
        }
        let mut extreme = radius[members[0]];
        for &k in members {
            if (outermost && radius[k] > extreme) || (!outermost && radius[k] < extreme) {
                extreme = radius[k];
            }
        }
        let winner = members
            .iter()
            .find(|&&k| pts[k].pass && math::fabs(radius[k] - extreme) <= slack)
            .or_else(|| members.iter().find(|&&k| radius[k] == extreme))
            .expect("extreme is attained");
        let b0 = b.saturating_sub(1);
        let b1 = (b + 1).min(n_bins - 1);
        let beyond = (b0..=b1).any(|j| {
            if outermost {
                bin_max[j] > extreme + eps_eff
            } else {
                bin_min[j] < extreme - eps_eff
            }
        });
        Some((*winner, beyond))
    };

    let mut order = Vec::new();
    let mut dominated = 0;
    let mut selected = 0;
    for b in 0..n_bins {
        if let Some((k, beyond)) = pick(b, &outer_bins[b], true) {
            selected += 1;
            if beyond {
                dominated += 1;
            } else {
                order.push(k);
            }
        }
    }
    let outer_len = order.len();
    for b in (0..n_bins).rev() {
        if let Some((k, beyond)) = pick(b, &inner_bins[b], false) {
            selected += 1;
            if beyond {
                dominated += 1;
            } else {
                order.push(k);
            }
        }
    }

    // The inner selections claim a pocket the paths cannot enter. A
    // reachable witness inside the outer sweep but clear of the assembled
    // curve sits in that pocket and disproves it, in which case the
    // claimed inner wall is a front continuing past a self-intersection
    // and every inner selection is dominated.
    if outer_len >= 3 && order.len() - outer_len >= 3 {
        let full: Vec<[f64; 2]> = order.iter().map(|&k| pts[k].p).collect();
        let hull = &full[..outer_len];
        let pocket_hit = oracle
            .iter()
            .copied()
            .chain(pts.iter().map(|q| q.p))
            .any(|w| {
                point_in_polygon(hull, w)
                    && !point_in_polygon(&full, w)
                    && dist_to_polygon(&full, w) > eps_eff
            });
        if pocket_hit {
            dominated += order.len() - outer_len;
            order.truncate(outer_len);
        }
    }

    ProfileOutcome {
        order,
        dominated: dominated + excluded_count,
        interior: pts.len() - excluded_count - selected,
    }
}

// ---------------------------------------------------------------------------
// Dominance filter (direction-fixed modes)
// ---------------------------------------------------------------------------

struct CellGrid {
    cell: f64,
    pos_dim: usize,
    map: BTreeMap<[i64; 3], Vec<usize>>,
}

impl CellGrid {
    fn build(samples: &[[f64; 6]], pos_dim: usize, cell: f64) -> Self {
        let mut map: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            map.entry(Self::key(s, pos_dim, cell)).or_default().push(i);
        }
        CellGrid { cell, pos_dim, map }
    }

    fn key(p: &[f64; 6], pos_dim: usize, cell: f64) -> [i64; 3] {
        let mut k = [0_i64; 3];
        for (d, slot) in k.iter_mut().enumerate().take(pos_dim) {
            *slot = math::floor(p[d] / cell) as i64;
        }
        k
    }

    /// Visits sample indices in cells within Chebyshev distance `rad` of
    /// the cell containing `p`, in deterministic cell order.
    fn visit<F: FnMut(usize)>(&self, p: &[f64; 6], rad: i64, mut f: F) {
        let center = Self::key(p, self.pos_dim, self.cell);
        let zr = if self.pos_dim == 3 { rad } else { 0 };
        for dx in -rad..=rad {
            for dy in -rad..=rad {
                for dz in -zr..=zr {
                    let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                    if let Some(v) = self.map.get(&key) {
                        for &i in v {
                            f(i);
                        }
                    }
                }
            }
        }
    }
}

/// A sample dominates a point when it advances past it by more than
/// `eps_dom` along the point's outward direction inside a forward cone.
struct ConeFilter {
    eps_dom: f64,
    cone_len: f64,
}

impl ConeFilter {
    fn dominated(
        &self,
        p: &[f64; 6],
        outward: &[f64; 6],
        samples: &[[f64; 6]],
        cells: &CellGrid,
        skip: Option<usize>,
    ) -> bool {
        let mut hit = false;
        cells.visit(p, 1, |i| {
            if hit || Some(i) == skip {
                return;
            }
            let s = &samples[i];
            let mut d2 = 0.0;
            let mut along = 0.0;
            for k in 0..6 {
                let d = s[k] - p[k];
                d2 += d * d;
                along += d * outward[k];
            }
            if d2 <= self.cone_len * self.cone_len
                && along > self.eps_dom
                && along * along >= CONE_COS * CONE_COS * d2
            {
                hit = true;
            }
        });
        hit
    }
}

/// True when any witness sits past `p` along `outward` by more than `eps`,
/// at any distance and angle. Used against candidates whose screen failed:
/// a non-extremal endpoint is interior, so a single reachable point beyond
/// its tangent plane is disqualifying evidence, however oblique.
fn halfspace_any(
    p: &[f64; 6],
    outward: &[f64; 6],
    witnesses: &[[f64; 6]],
    skip: Option<usize>,
    eps: f64,
) -> bool {
    witnesses.iter().enumerate().any(|(j, s)| {
        if Some(j) == skip {
            return false;
        }
        let mut along = 0.0;
        for k in 0..6 {
            along += (s[k] - p[k]) * outward[k];
        }
        along > eps
    })
}

// ---------------------------------------------------------------------------
// Boundary construction
// ---------------------------------------------------------------------------

fn oracle_embeds(oracle: &OracleCloud, cap: usize) -> Vec<[f64; 6]> {
    let with_direction = oracle.mode.with_direction();
    match &oracle.points {
        OraclePoints::Planar(v) => v
            .iter()
            .take(cap)
            .map(|c| embed2(c, with_direction))
            .collect(),
        OraclePoints::Spatial(v) => v
            .iter()
            .take(cap)
            .map(|c| embed3(c, with_direction))
            .collect(),
    }
}

/// Angular bin count for one meridian sweep. The planar build doubles it:
/// its angles run over a symmetric range twice as wide as the folded one,
/// and matching bin widths keeps the two selections aligned edge for edge.
fn profile_bins(grid: &CandidateGrid) -> usize {
    (BINS_PER_ARC * grid.n_arc).clamp(32, 2048)
}

/// Radial slack covering the finite arc-length grid: the per-bin extreme
/// can sit off the true wall by about the squared grid spacing times the
/// curvature bound, and oracle samples inside that sliver must not count
/// as dominating.
fn profile_slack(grid: &CandidateGrid) -> f64 {
    let h = grid.t_f / grid.n_arc as f64;
    2.0 * grid.kappa_max * h * h
}

fn settings_checked(validation: &OracleSettings, t_f: f64) -> Result<f64> {
    if validation.n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1"));
    }
    if validation.n_pieces == 0 {
        return Err(Error::InvalidInput("n_pieces must be at least 1"));
    }
    let eps = validation.eps_dom.unwrap_or(1e-6 * t_f);
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput("eps_dom must be nonnegative and finite"));
    }
    Ok(eps)
}

fn meta_for(
    mode: Mode,
    grid: &CandidateGrid,
    validation: &OracleSettings,
    eps_dom: f64,
    stats: EnumStats,
) -> BoundaryMeta {
    BoundaryMeta {
        mode,
        t_f: grid.t_f,
        kappa_max: grid.kappa_max,
        grid: grid.clone(),
        oracle_seed: validation.seed,
        oracle_samples: validation.n_samples,
        oracle_pieces: validation.n_pieces,
        eps_dom,
        enumerated: stats.emitted,
        deduped: stats.deduped,
        singular_dropped: stats.h_dropped,
        screen_failed: 0,
        dominated: 0,
        interior_thinned: 0,
        kept: 0,
        pmp_sense_pruned: false,
    }
}

/// Assembles a planar boundary from screened candidates and the validation
/// oracle. `screened` must be in candidate stream order.
pub fn assemble_boundary2(
    mode: Mode,
    grid: &CandidateGrid,
    validation: &OracleSettings,
    screened: Vec<Screened2>,
    stats: EnumStats,
    oracle: &OracleCloud,
) -> Result<BoundaryCloud> {
    if !mode.planar() {
        return Err(Error::InvalidInput("planar assembly needs a planar mode"));
    }
    if oracle.mode != mode {
        return Err(Error::InvalidInput("oracle mode mismatch"));
    }
    let eps_dom = settings_checked(validation, grid.t_f)?;
    let mut meta = meta_for(mode, grid, validation, eps_dom, stats);
    meta.screen_failed = screened.iter().filter(|s| !s.pass).count();
    let with_direction = mode.with_direction();

    let make_point = |s: &Screened2| BoundaryPoint {
        endpoint: if with_direction {
            Endpoint::Conf2(s.endpoint)
        } else {
            Endpoint::Pos2([s.endpoint.x, s.endpoint.y])
        },
        generator: Generator::Planar(s.template),
        family: s.family,
        pmp_pass: s.pass,
        pmp_gap: s.gap,
        support_direction: s.outward[..mode.embed_dim()].to_vec(),
    };

    let mut points = Vec::new();
    if with_direction {
        let samples = oracle_embeds(oracle, DOM_ORACLE_CAP);
        let cone_len = CONE_LEN_FRAC * grid.t_f;
        let cells = CellGrid::build(&samples, 2, cone_len);
        let cand: Vec<[f64; 6]> = screened.iter().map(|s| embed2(&s.endpoint, true)).collect();
        let cand_cells = CellGrid::build(&cand, 2, cone_len);
        let filter = ConeFilter { eps_dom, cone_len };
        for (i, s) in screened.iter().enumerate() {
            let p = cand[i];
            // Candidate endpoints are reachable evidence alongside the
            // oracle; the cone prunes extremal sheets that continue past a
            // self-intersection of the front. Screen failures cannot sit
            // on the boundary at all, so any witness beyond their tangent
            // plane removes them, however oblique.
            let out = filter.dominated(&p, &s.outward, &samples, &cells, None)
                || filter.dominated(&p, &s.outward, &cand, &cand_cells, Some(i))
                || (!s.pass && halfspace_any(&p, &s.outward, &cand, Some(i), eps_dom));
            if out {
                meta.dominated += 1;
            } else {
                points.push(make_point(s));
            }
        }
    } else {
        let pts: Vec<WallInput> = screened
            .iter()
            .map(|s| WallInput {
                p: [s.endpoint.x, s.endpoint.y],
                w: [s.outward[0], s.outward[1]],
                pass: s.pass,
            })
            .collect();
        // Reflection about the initial heading maps admissible paths to
        // admissible paths, so the mirrored samples are genuine endpoints
        // and keep the filter symmetric.
        let mut samples: Vec<[f64; 2]> = Vec::new();
        if let OraclePoints::Planar(v) = &oracle.points {
            for c in v {
                samples.push([c.x, c.y]);
                samples.push([c.x, -c.y]);
            }
        }
        let tols = ProfileTols {
            eps_dom,
            slack: profile_slack(grid),
            cone_len: CONE_LEN_FRAC * grid.t_f,
        };
        // The witness test runs on the fold so the planar and meridian
        // builds agree bit for bit; mirroring makes it sign-symmetric.
        let folded: Vec<WallInput> = screened
            .iter()
            .map(|s| {
                let neg = s.endpoint.y < 0.0;
                WallInput {
                    p: [s.endpoint.x, math::fabs(s.endpoint.y)],
                    w: [s.outward[0], if neg { -s.outward[1] } else { s.outward[1] }],
                    pass: s.pass,
                }
            })
            .collect();
        let witness_ok = alloc::vec![true; pts.len()];
        let excluded = profile_excluded(&folded, &witness_ok, &tols);
        let outcome = assemble_profile(&pts, &excluded, &samples, &tols, 2 * profile_bins(grid));
        meta.dominated = outcome.dominated;
        meta.interior_thinned = outcome.interior;
        for idx in outcome.order {
            points.push(make_point(&screened[idx]));
        }
    }
    meta.kept = points.len();
    meta.pmp_sense_pruned = meta.dominated > 0;
    Ok(BoundaryCloud { points, meta })
}

/// Assembles a spatial boundary from screened candidates and the
/// validation oracle. `screened` must be in candidate stream order; `None`
/// entries count as singular truncations.
pub fn assemble_boundary3(
    mode: Mode,
    grid: &CandidateGrid,
    validation: &OracleSettings,
    screened: Vec<Option<Screened3>>,
    stats: EnumStats,
    oracle: &OracleCloud,
) -> Result<BoundaryCloud> {
    if mode.planar() {
        return Err(Error::InvalidInput("spatial assembly needs a spatial mode"));
    }
    if oracle.mode != mode {
        return Err(Error::InvalidInput("oracle mode mismatch"));
    }
    let eps_dom = settings_checked(validation, grid.t_f)?;
    let mut meta = meta_for(mode, grid, validation, eps_dom, stats);
    let kept: Vec<Screened3> = {
        let mut v = Vec::with_capacity(screened.len());
        for s in screened {
            match s {
                Some(s) => v.push(s),
                None => meta.singular_dropped += 1,
            }
        }
        v
    };
    meta.screen_failed = kept.iter().filter(|s| !s.pass).count();
    let with_direction = mode.with_direction();

    let make_point = |s: &Screened3| BoundaryPoint {
        endpoint: if with_direction {
            Endpoint::Conf3(s.endpoint)
        } else {
            Endpoint::Pos3([s.endpoint.r.x, s.endpoint.r.y, s.endpoint.r.z])
        },
        generator: Generator::Spatial(s.template.clone()),
        family: s.family,
        pmp_pass: s.pass,
        pmp_gap: s.gap,
        support_direction: s.outward[..mode.embed_dim()].to_vec(),
    };

    let mut points = Vec::new();
    if with_direction {
        let samples = oracle_embeds(oracle, DOM_ORACLE_CAP);
        let cone_len = CONE_LEN_FRAC * grid.t_f;
        let cells = CellGrid::build(&samples, 3, cone_len);
        let cand: Vec<[f64; 6]> = kept.iter().map(|s| embed3(&s.endpoint, true)).collect();
        let cand_cells = CellGrid::build(&cand, 3, cone_len);
        let filter = ConeFilter { eps_dom, cone_len };
        for (i, s) in kept.iter().enumerate() {
            let p = cand[i];
            let out = filter.dominated(&p, &s.outward, &samples, &cells, None)
                || filter.dominated(&p, &s.outward, &cand, &cand_cells, Some(i))
                || (!s.pass && halfspace_any(&p, &s.outward, &cand, Some(i), eps_dom));
            if out {
                meta.dominated += 1;
            } else {
                points.push(make_point(s));
            }
        }
    } else {
        let pts: Vec<WallInput> = kept
            .iter()
            .map(|s| WallInput {
                p: s.profile,
                w: s.profile_outward,
                pass: s.pass,
            })
            .collect();
        let mut samples: Vec<[f64; 2]> = Vec::new();
        if let OraclePoints::Spatial(v) = &oracle.points {
            for c in v {
                samples.push(fold3(&c.r));
            }
        }
        // Only planar candidates serve as witnesses: their folded
        // coordinates agree bit for bit with the planar run, so the
        // eligibility verdicts cannot drift between the two builds.
        let witness_ok: Vec<bool> = kept
            .iter()
            .map(|s| matches!(s.template, Template3::Planar { .. }))
            .collect();
        let tols = ProfileTols {
            eps_dom,
            slack: profile_slack(grid),
            cone_len: CONE_LEN_FRAC * grid.t_f,
        };
        let excluded = profile_excluded(&pts, &witness_ok, &tols);
        let outcome = assemble_profile(&pts, &excluded, &samples, &tols, profile_bins(grid));
        meta.dominated = outcome.dominated;
        meta.interior_thinned = outcome.interior;
        for idx in outcome.order {
            points.push(make_point(&kept[idx]));
        }
    }
    meta.kept = points.len();
    meta.pmp_sense_pruned = meta.dominated > 0;
    Ok(BoundaryCloud { points, meta })
}

/// Enumerates, screens, and assembles the sampled boundary for one mode,
/// validating it against a fresh oracle drawn from `validation`.
pub fn build_boundary(
    mode: Mode,
    grid: &CandidateGrid,
    validation: &OracleSettings,
) -> Result<BoundaryCloud> {
    grid.validate()?;
    settings_checked(validation, grid.t_f)?;
    let oracle = mc_oracle(
        mode,
        grid.t_f,
        grid.kappa_max,
        validation.n_samples,
        validation.n_pieces,
        validation.seed,
    )?;
    if mode.planar() {
        let (cands, stats) = enumerate_2d_stats(grid, mode.with_direction())?;
        let screened = screen_points2(&cands, mode.with_direction())?;
        assemble_boundary2(mode, grid, validation, screened, stats, &oracle)
    } else {
        let (cands, stats) = enumerate_3d(grid, mode.with_direction())?;
        let screened = screen_points3(&cands, mode.with_direction())?;
        assemble_boundary3(mode, grid, validation, screened, stats, &oracle)
    }
}

// ---------------------------------------------------------------------------
// Containment
// ---------------------------------------------------------------------------

fn point_in_polygon(poly: &[[f64; 2]], q: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let t = (q[1] - a[1]) / (b[1] - a[1]);
            if q[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

fn dist_to_segment(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + t * dx - q[0], a[1] + t * dy - q[1]);
    math::sqrt(ex * ex + ey * ey)
}

fn dist_to_polygon(poly: &[[f64; 2]], q: [f64; 2]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = math::fmin(best, dist_to_segment(poly[i], poly[(i + 1) % n], q));
    }
    best
}

/// Symmetric Hausdorff distance between two closed polylines (vertices
/// against the opposite chain).
pub fn polyline_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |from: &[[f64; 2]], to: &[[f64; 2]]| {
        from.iter()
            .fold(0.0, |acc, &q| math::fmax(acc, dist_to_polygon(to, q)))
    };
    math::fmax(directed(a, b), directed(b, a))
}

fn knn_outside(
    sample: &[f64; 6],
    boundary: &[([f64; 6], [f64; 6])],
    cells: &CellGrid,
    eps: f64,
) -> bool {
    let k = KNN.min(boundary.len());
    if k == 0 {
        return true;
    }
    // Expand the cell search until at least k candidates appear, then one
    // extra ring so the true k nearest cannot hide in a farther cell.
    let mut found: Vec<usize> = Vec::new();
    let mut rad = 0_i64;
    let mut settled = -1_i64;
    loop {
        found.clear();
        cells.visit(sample, rad, |i| found.push(i));
        if found.len() >= k && settled < 0 {
            settled = rad;
        }
        if settled >= 0 && rad > settled {
            break;
        }
        if found.len() == boundary.len() {
            break;
        }
        rad += 1;
    }
    let mut dist: Vec<(f64, usize)> = found
        .iter()
        .map(|&i| {
            let p = &boundary[i].0;
            let mut d2 = 0.0;
            for j in 0..6 {
                let d = sample[j] - p[j];
                d2 += d * d;
            }
            (d2, i)
        })
        .collect();
    dist.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dist.iter().take(k).all(|&(_, i)| {
        let (p, w) = &boundary[i];
        let mut along = 0.0;
        for j in 0..6 {
            along += (sample[j] - p[j]) * w[j];
        }
        along > eps
    })
}

/// Fraction of oracle samples outside the boundary region by more than
/// `eps`. Position-only modes test against the profile polygon; in
/// direction-fixed modes a sample is outside when it lies beyond the
/// supporting half-spaces of all its nearest boundary points.
pub fn containment_check(boundary: &BoundaryCloud, oracle: &OracleCloud, eps: f64) -> Result<f64> {
    if boundary.meta.mode != oracle.mode {
        return Err(Error::InvalidInput("mode mismatch"));
    }
    if math::fabs(boundary.meta.t_f - oracle.t_f) > 1e-9 * math::fmax(1.0, oracle.t_f) {
        return Err(Error::InvalidInput("arrival time mismatch"));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput("eps must be nonnegative and finite"));
    }
    if oracle.points.is_empty() {
        return Ok(0.0);
    }
    let n = oracle.points.len();
    let mode = boundary.meta.mode;
    let mut outside = 0_usize;
    if !mode.with_direction() {
        let poly = profile_polygon(boundary)?;
        if poly.is_empty() {
            return Err(Error::InvalidInput("boundary is empty"));
        }
        let mut test = |q: [f64; 2]| {
            if !point_in_polygon(&poly, q) && dist_to_polygon(&poly, q) > eps {
                outside += 1;
            }
        };
        match &oracle.points {
            OraclePoints::Planar(v) => v.iter().for_each(|c| test([c.x, c.y])),
            OraclePoints::Spatial(v) => v.iter().for_each(|c| test(fold3(&c.r))),
        }
    } else {
        let pts: Vec<([f64; 6], [f64; 6])> = boundary
            .points
            .iter()
            .map(|p| {
                let e = match &p.endpoint {
                    Endpoint::Conf2(c) => embed2(c, true),
                    Endpoint::Conf3(c) => embed3(c, true),
                    Endpoint::Pos2(xy) => [xy[0], xy[1], 0.0, 0.0, 0.0, 0.0],
                    Endpoint::Pos3(xyz) => [xyz[0], xyz[1], xyz[2], 0.0, 0.0, 0.0],
                };
                let mut w = [0.0; 6];
                for (k, v) in p.support_direction.iter().enumerate().take(6) {
                    w[k] = *v;
                }
                (e, w)
            })
            .collect();
        if pts.is_empty() {
            return Err(Error::InvalidInput("boundary is empty"));
        }
        let embeds: Vec<[f64; 6]> = pts.iter().map(|(e, _)| *e).collect();
        let cells = CellGrid::build(&embeds, mode.pos_dim(), 0.25 * boundary.meta.t_f);
        let samples = oracle_embeds(oracle, usize::MAX);
        for s in &samples {
            if knn_outside(s, &pts, &cells, eps) {
                outside += 1;
            }
        }
    }
    Ok(outside as f64 / n as f64)
}

// ---------------------------------------------------------------------------
// Support queries
// ---------------------------------------------------------------------------

/// Precomputed candidate endpoints for planar support sweeps.
pub struct SupportTable2 {
    pub with_direction: bool,
    pub candidates: Vec<Candidate2>,
    pub stats: EnumStats,
    t_f: f64,
    kappa_max: f64,
    endpoints: Vec<Config2>,
}

impl SupportTable2 {
    pub fn build(grid: &CandidateGrid, with_direction: bool) -> Result<Self> {
        let (candidates, stats) = enumerate_2d_stats(grid, with_direction)?;
        if candidates.is_empty() {
            return Err(Error::InvalidGrid("candidate stream is empty"));
        }
        let endpoints = candidates
            .iter()
            .map(|c| c.path.endpoint())
            .collect::<Result<Vec<_>>>()?;
        Ok(SupportTable2 {
            with_direction,
            candidates,
            stats,
            t_f: grid.t_f,
            kappa_max: grid.kappa_max,
            endpoints,
        })
    }

    pub fn endpoints(&self) -> &[Config2] {
        &self.endpoints
    }

    fn dim(&self) -> usize {
        if self.with_direction {
            4
        } else {
            2
        }
    }

    /// Grid sweep: best value and candidate index, ties by stream order.
    pub fn sweep(&self, c: &[f64]) -> Result<(f64, usize)> {
        check_direction(c, self.dim())?;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, ep) in self.endpoints.iter().enumerate() {
            let v = value_of(&embed2(ep, self.with_direction), c);
            if v > best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }

    /// Refines the winner's free parameters toward the exact maximizer.
    /// Refinement never returns less than the grid value.
    pub fn polish(&self, index: usize, c: &[f64]) -> Result<(f64, Candidate2, Config2)> {
        check_direction(c, self.dim())?;
        let cand = self
            .candidates
            .get(index)
            .ok_or(Error::InvalidInput("candidate index out of range"))?;
        let template = cand.template;
        let x0 = template.free_params();
        let (t_f, k, dir) = (self.t_f, self.kappa_max, self.with_direction);
        let eval = |params: &[f64]| -> f64 {
            let t = template.with_params(params);
            match t.build(start2(), k, t_f).map(|p| p.endpoint()) {
                Some(Ok(ep)) => {
                    let v = -value_of(&embed2(&ep, dir), c);
                    if v.is_nan() {
                        f64::INFINITY
                    } else {
                        v
                    }
                }
                _ => f64::INFINITY,
            }
        };
        let grid_value = value_of(&embed2(&self.endpoints[index], dir), c);
        if x0.is_empty() {
            return Ok((grid_value, cand.clone(), self.endpoints[index]));
        }
        let steps: Vec<f64> = x0.iter().map(|_| 0.5 * t_f / 64.0).collect();
        let best = refine(&x0, &steps, eval);
        let polished = template.with_params(&best);
        let outcome = polished
            .build(start2(), k, t_f)
            .and_then(|p| p.endpoint().ok().map(|ep| (p, ep)));
        match outcome {
            Some((path, endpoint)) if value_of(&embed2(&endpoint, dir), c) >= grid_value => {
                let value = value_of(&embed2(&endpoint, dir), c);
                Ok((
                    value,
                    Candidate2 {
                        family: polished.family(),
                        template: polished,
                        path,
                    },
                    endpoint,
                ))
            }
            _ => Ok((grid_value, cand.clone(), self.endpoints[index])),
        }
    }
}

/// Precomputed candidate endpoints for spatial support sweeps. Helicoidal
/// endpoints are integrated once per torsion-parameter triple in the
/// reference plane and rotated into the others; triples whose torsion
/// profile truncates are dropped from the table.
pub struct SupportTable3 {
    pub with_direction: bool,
    pub candidates: Vec<Candidate3>,
    pub stats: EnumStats,
    t_f: f64,
    kappa_max: f64,
    endpoints: Vec<Config3>,
}

impl SupportTable3 {
    pub fn build(grid: &CandidateGrid, with_direction: bool) -> Result<Self> {
        let (candidates, stats) = enumerate_3d(grid, with_direction)?;
        if candidates.is_empty() {
            return Err(Error::InvalidGrid("candidate stream is empty"));
        }
        let step = grid.t_f / H_DIVS;
        let mut cache: Option<(HParams, Option<Config3>)> = None;
        let mut endpoints = Vec::with_capacity(candidates.len());
        let mut kept = Vec::with_capacity(candidates.len());
        for cand in candidates {
            match &cand.template {
                Template3::Planar { .. } => {
                    endpoints.push(cand.path.endpoint(None)?);
                    kept.push(cand);
                }
                Template3::H { psi, params } => {
                    let base = match &cache {
                        Some((p, ep)) if p == params => *ep,
                        _ => {
                            let reference = Template3::H {
                                psi: 0.0,
                                params: params.clone(),
                            }
                            .build(start3(), grid.kappa_max, grid.t_f)
                            .expect("helical template instantiates");
                            let ep = match reference.endpoint(Some(step)) {
                                Ok(c) => Some(c),
                                Err(Error::TorsionSingularity { .. }) => None,
                                Err(e) => return Err(e),
                            };
                            cache = Some((params.clone(), ep));
                            ep
                        }
                    };
                    if let Some(ep) = base {
                        endpoints.push(Config3 {
                            r: ep.r.rotated_about(Vec3::X, *psi),
                            e: ep.e.rotated_about(Vec3::X, *psi).normalized(),
                        });
                        kept.push(cand);
                    }
                }
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidGrid("candidate stream is empty"));
        }
        Ok(SupportTable3 {
            with_direction,
            candidates: kept,
            stats,
            t_f: grid.t_f,
            kappa_max: grid.kappa_max,
            endpoints,
        })
    }

    pub fn endpoints(&self) -> &[Config3] {
        &self.endpoints
    }

    fn dim(&self) -> usize {
        if self.with_direction {
            6
        } else {
            3
        }
    }

    /// Grid sweep: best value and candidate index, ties by stream order.
    pub fn sweep(&self, c: &[f64]) -> Result<(f64, usize)> {
        check_direction(c, self.dim())?;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, ep) in self.endpoints.iter().enumerate() {
            let v = value_of(&embed3(ep, self.with_direction), c);
            if v > best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }

    /// Refines the winner's free parameters toward the exact maximizer.
    /// Refinement never returns less than the grid value.
    pub fn polish(&self, index: usize, c: &[f64]) -> Result<(f64, Candidate3, Config3)> {
        check_direction(c, self.dim())?;
        let cand = self
            .candidates
            .get(index)
            .ok_or(Error::InvalidInput("candidate index out of range"))?;
        let template = cand.template.clone();
        let x0 = template.free_params();
        let (t_f, k, dir) = (self.t_f, self.kappa_max, self.with_direction);
        let step = Some(t_f / H_DIVS);
        let eval = |params: &[f64]| -> f64 {
            let Some(t) = template.with_params(params) else {
                return f64::INFINITY;
            };
            let Some(p) = t.build(start3(), k, t_f) else {
                return f64::INFINITY;
            };
            match p.endpoint(step) {
                Ok(ep) => {
                    let v = -value_of(&embed3(&ep, dir), c);
                    if v.is_nan() {
                        f64::INFINITY
                    } else {
                        v
                    }
                }
                Err(_) => f64::INFINITY,
            }
        };
        let steps: Vec<f64> = match &template {
            Template3::Planar { .. } => {
                let mut s: Vec<f64> = x0[..x0.len() - 1]
                    .iter()
                    .map(|_| 0.5 * t_f / 64.0)
                    .collect();
                s.push(PI / 64.0);
                s
            }
            Template3::H { .. } => alloc::vec![PI / 64.0, 0.2, 0.2, 0.2],
        };
        let grid_value = value_of(&embed3(&self.endpoints[index], dir), c);
        let best = refine(&x0, &steps, eval);
        let outcome = template.with_params(&best).and_then(|t| {
            let path = t.build(start3(), k, t_f)?;
            let ep = path.endpoint(step).ok()?;
            Some((t, path, ep))
        });
        match outcome {
            Some((t, path, endpoint)) if value_of(&embed3(&endpoint, dir), c) >= grid_value => {
                let value = value_of(&embed3(&endpoint, dir), c);
                Ok((
                    value,
                    Candidate3 {
                        family: t.family(),
                        template: t,
                        path,
                    },
                    endpoint,
                ))
            }
            _ => Ok((grid_value, cand.clone(), self.endpoints[index])),
        }
    }
}

/// Winner of one support query.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SupportHit {
    Planar {
        value: f64,
        endpoint: Config2,
        generator: Template2,
    },
    Spatial {
        value: f64,
        endpoint: Config3,
        generator: Template3,
    },
}

impl SupportHit {
    pub fn value(&self) -> f64 {
        match self {
            SupportHit::Planar { value, .. } | SupportHit::Spatial { value, .. } => *value,
        }
    }

    pub fn family(&self) -> FamilyKind {
        match self {
            SupportHit::Planar { generator, .. } => generator.family(),
            SupportHit::Spatial { generator, .. } => generator.family(),
        }
    }
}

/// Maximizes `<c, endpoint>` over the candidate families: sweeps the grid,
/// then refines the winner's free parameters. Ties in the sweep go to the
/// first candidate in stream order.
pub fn support_point(mode: Mode, c: &[f64], grid: &CandidateGrid) -> Result<SupportHit> {
    grid.validate()?;
    check_direction(c, mode.embed_dim())?;
    if mode.planar() {
        let table = SupportTable2::build(grid, mode.with_direction())?;
        let (_, index) = table.sweep(c)?;
        let (value, cand, endpoint) = table.polish(index, c)?;
        Ok(SupportHit::Planar {
            value,
            endpoint,
            generator: cand.template,
        })
    } else {
        let table = SupportTable3::build(grid, mode.with_direction())?;
        let (_, index) = table.sweep(c)?;
        let (value, cand, endpoint) = table.polish(index, c)?;
        Ok(SupportHit::Spatial {
            value,
            endpoint,
            generator: cand.template,
        })
    }
}

// ---------------------------------------------------------------------------
// Nelder-Mead refinement
// ---------------------------------------------------------------------------

/// Two Nelder-Mead passes: a full-step exploration and a quarter-step
/// restart from its winner, which recovers stalls near simplex collapse.
fn refine<F: FnMut(&[f64]) -> f64>(x0: &[f64], steps: &[f64], mut f: F) -> Vec<f64> {
    let first = nelder_mead(x0, steps, &mut f);
    let fine: Vec<f64> = steps.iter().map(|s| 0.25 * s).collect();
    nelder_mead(&first, &fine, &mut f)
}

/// Minimizes `f` from `x0` with initial simplex offsets `steps`; returns
/// the best point seen. Deterministic; invalid regions are fenced by
/// infinite objective values.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(x0: &[f64], steps: &[f64], f: &mut F) -> Vec<f64> {
    let n = x0.len();
    let mut best_x = x0.to_vec();
    let mut best_f = f(x0);
    if n == 0 {
        return best_x;
    }
    macro_rules! eval {
        ($x:expr) => {{
            let x = $x;
            let v = f(&x);
            if v < best_f {
                best_f = v;
                best_x = x.clone();
            }
            (x, v)
        }};
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), best_f));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        simplex.push(eval!(x));
    }
    let max_iter = 200 + 100 * n;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN objectives"));
        let fb = simplex[0].1;
        let fw = simplex[n].1;
        if fw.is_finite() && fw - fb <= 1e-13 * (1.0 + math::fabs(fb)) {
            break;
        }
        let mut centroid = alloc::vec![0.0; n];
        for (x, _) in simplex.iter().take(n) {
            for (ci, xi) in centroid.iter_mut().zip(x.iter()) {
                *ci += xi / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let mix = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst.iter())
                .map(|(&ci, &wi)| ci + a * (ci - wi))
                .collect()
        };
        let (xr, fr) = eval!(mix(1.0));
        if fr < simplex[0].1 {
            let (xe, fe) = eval!(mix(2.0));
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = eval!(mix(if fr < fw { 0.5 } else { -0.5 }));
            if fc < math::fmin(fr, fw) {
                simplex[n] = (xc, fc);
            } else {
                let head = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = head
                        .iter()
                        .zip(entry.0.iter())
                        .map(|(&bi, &xi)| bi + 0.5 * (xi - bi))
                        .collect();
                    let v = f(&x);
                    if v < best_f {
                        best_f = v;
                        best_x = x.clone();
                    }
                    *entry = (x, v);
                }
            }
        }
    }
    best_x
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::BranchSel;

    fn small_grid(t_f: f64) -> CandidateGrid {
        CandidateGrid {
            n_arc: 33,
            n_psi: 8,
            branch: BranchSel::Both,
            ..CandidateGrid::new(t_f)
        }
    }

    fn settings(n: usize, seed: u64) -> OracleSettings {
        OracleSettings {
            n_samples: n,
            n_pieces: 20,
            seed,
            eps_dom: None,
        }
    }

    #[test]
    fn oracle_is_deterministic_and_bounded() {
        let a = mc_oracle(Mode::NoDir2, 1.5, 1.0, 300, 20, 7).unwrap();
        let b = mc_oracle(Mode::NoDir2, 1.5, 1.0, 300, 20, 7).unwrap();
        assert_eq!(a, b);
        let c = mc_oracle(Mode::NoDir2, 1.5, 1.0, 300, 20, 8).unwrap();
        assert_ne!(a, c);
        let OraclePoints::Planar(pts) = &a.points else {
            panic!("planar mode yields planar points");
        };
        for p in pts {
            assert!(p.position().norm() <= 1.5 + 1e-12);
        }
    }

    #[test]
    fn oracle_ranges_concatenate() {
        let full = oracle_endpoints3(2.0, 1.0, 5, 11, 0, 40).unwrap();
        let mut chunks = oracle_endpoints3(2.0, 1.0, 5, 11, 0, 13).unwrap();
        chunks.extend(oracle_endpoints3(2.0, 1.0, 5, 11, 13, 40).unwrap());
        assert_eq!(full, chunks);
        for c in &full {
            assert!(c.r.norm() <= 2.0 + 1e-12);
            assert!(math::fabs(c.e.norm() - 1.0) <= 1e-12);
        }
    }

    #[test]
    fn oracle_rejects_degenerate_settings() {
        assert!(mc_oracle(Mode::NoDir2, 1.0, 1.0, 0, 5, 0).is_err());
        assert!(mc_oracle(Mode::NoDir2, 1.0, 1.0, 5, 0, 0).is_err());
        assert!(mc_oracle(Mode::NoDir2, 0.0, 1.0, 5, 5, 0).is_err());
    }

    #[test]
    fn support_straight_ahead_is_exact() {
        let hit = support_point(Mode::NoDir2, &[1.0, 0.0], &small_grid(2.5)).unwrap();
        assert!(
            math::fabs(hit.value() - 2.5) <= 1e-9,
            "value {}",
            hit.value()
        );
        assert_eq!(hit.family(), FamilyKind::S);
    }

    #[test]
    fn support_reverse_at_half_turn_uses_arcs() {
        let grid = small_grid(PI);
        let hit = support_point(Mode::NoDir2, &[-1.0, 0.0], &grid).unwrap();
        assert!(
            matches!(hit.family(), FamilyKind::C | FamilyKind::Cc),
            "family {}",
            hit.family()
        );
        let oracle = mc_oracle(Mode::NoDir2, PI, 1.0, 20_000, 20, 3).unwrap();
        let empirical = oracle_support(&oracle, &[-1.0, 0.0]).unwrap();
        assert!(hit.value() >= empirical - 1e-3);
    }

    #[test]
    fn support_rotation_invariance_about_initial_tangent() {
        let grid = small_grid(1.2);
        let c0 = [0.3, 0.8, 0.1];
        let ang = 1.234;
        let (s, co) = math::sincos(ang);
        let c1 = [c0[0], co * c0[1] - s * c0[2], s * c0[1] + co * c0[2]];
        let a = support_point(Mode::NoDir3, &c0, &grid).unwrap();
        let b = support_point(Mode::NoDir3, &c1, &grid).unwrap();
        assert!(
            math::fabs(a.value() - b.value()) <= 1e-9,
            "{} vs {}",
            a.value(),
            b.value()
        );
    }

    #[test]
    fn support_rejects_bad_directions() {
        let grid = small_grid(1.0);
        assert!(support_point(Mode::NoDir2, &[0.0, 0.0], &grid).is_err());
        assert!(support_point(Mode::NoDir2, &[1.0, 0.0, 0.0], &grid).is_err());
        assert!(support_point(Mode::Dir3, &[1.0, 0.0, 0.0], &grid).is_err());
    }

    #[test]
    fn planar_boundary_is_symmetric_closed_and_screened() {
        let grid = small_grid(1.0);
        let cloud = build_boundary(Mode::NoDir2, &grid, &settings(20_000, 5)).unwrap();
        assert!(cloud.points.len() >= grid.n_arc);
        let poly = profile_polygon(&cloud).unwrap();
        for p in &poly {
            let mirrored = [p[0], -p[1]];
            let d = poly.iter().fold(f64::INFINITY, |acc, q| {
                let (dx, dy) = (q[0] - mirrored[0], q[1] - mirrored[1]);
                math::fmin(acc, math::sqrt(dx * dx + dy * dy))
            });
            assert!(d <= 1e-6, "mirror gap {d}");
        }
        for p in &cloud.points {
            assert!(p.pmp_pass, "surviving point failed screening");
            let Generator::Planar(t) = &p.generator else {
                panic!("planar generator");
            };
            let path = t.build(start2(), 1.0, grid.t_f).unwrap();
            assert!(math::fabs(path.total_length() - grid.t_f) <= 1e-12);
        }
    }

    #[test]
    fn planar_boundary_contains_oracle() {
        let grid = small_grid(1.0);
        let cloud = build_boundary(Mode::NoDir2, &grid, &settings(20_000, 5)).unwrap();
        let oracle = mc_oracle(Mode::NoDir2, 1.0, 1.0, 20_000, 20, 99).unwrap();
        let frac = containment_check(&cloud, &oracle, 1e-2).unwrap();
        assert!(frac <= 1e-3, "fraction outside {frac}");
    }

    #[test]
    fn shrunk_boundary_fails_containment() {
        let grid = small_grid(1.0);
        let mut cloud = build_boundary(Mode::NoDir2, &grid, &settings(20_000, 5)).unwrap();
        for p in &mut cloud.points {
            if let Endpoint::Pos2(xy) = &mut p.endpoint {
                xy[0] *= 0.5;
                xy[1] *= 0.5;
            }
        }
        let oracle = mc_oracle(Mode::NoDir2, 1.0, 1.0, 10_000, 20, 99).unwrap();
        let frac = containment_check(&cloud, &oracle, 1e-2).unwrap();
        assert!(frac > 0.5, "fraction outside {frac}");
    }

    #[test]
    fn containment_edge_cases() {
        let grid = small_grid(1.0);
        let cloud = build_boundary(Mode::NoDir2, &grid, &settings(5_000, 5)).unwrap();
        let empty = OracleCloud {
            mode: Mode::NoDir2,
            t_f: 1.0,
            kappa_max: 1.0,
            seed: 0,
            n_samples: 0,
            n_pieces: 1,
            control_model: alloc::string::String::new(),
            points: OraclePoints::Planar(Vec::new()),
        };
        assert_eq!(containment_check(&cloud, &empty, 1e-2).unwrap(), 0.0);
        let wrong_mode = mc_oracle(Mode::NoDir3, 1.0, 1.0, 10, 5, 0).unwrap();
        assert!(containment_check(&cloud, &wrong_mode, 1e-2).is_err());
    }

    #[test]
    fn meridian_matches_planar_profile() {
        let grid = small_grid(1.0);
        let flat = build_boundary(Mode::NoDir2, &grid, &settings(20_000, 5)).unwrap();
        let solid = build_boundary(Mode::NoDir3, &grid, &settings(20_000, 6)).unwrap();
        let poly2: Vec<[f64; 2]> = profile_polygon(&flat)
            .unwrap()
            .iter()
            .map(|p| [p[0], math::fabs(p[1])])
            .collect();
        let poly3 = profile_polygon(&solid).unwrap();
        let d = polyline_hausdorff(&poly2, &poly3);
        assert!(d <= 1e-3 * grid.t_f, "meridian gap {d}");
    }

    #[test]
    fn directed_planar_boundary_survives_and_contains() {
        let grid = CandidateGrid {
            n_arc: 17,
            ..small_grid(1.0)
        };
        let cloud = build_boundary(Mode::Dir2, &grid, &settings(10_000, 5)).unwrap();
        assert!(!cloud.points.is_empty());
        for p in &cloud.points {
            assert!(p.pmp_pass);
            assert_eq!(p.support_direction.len(), 4);
        }
        let oracle = mc_oracle(Mode::Dir2, 1.0, 1.0, 10_000, 20, 42).unwrap();
        let frac = containment_check(&cloud, &oracle, 1e-2).unwrap();
        assert!(frac <= 1e-3, "fraction outside {frac}");
    }

    #[test]
    fn boundary_is_deterministic() {
        let grid = CandidateGrid {
            n_arc: 17,
            ..small_grid(0.8)
        };
        let a = build_boundary(Mode::NoDir2, &grid, &settings(2_000, 9)).unwrap();
        let b = build_boundary(Mode::NoDir2, &grid, &settings(2_000, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polygon_primitives() {
        let square = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        assert!(point_in_polygon(&square, [1.0, 1.0]));
        assert!(!point_in_polygon(&square, [3.0, 1.0]));
        assert!(math::fabs(dist_to_polygon(&square, [3.0, 1.0]) - 1.0) <= 1e-12);
        let bigger = [[-0.5, -0.5], [2.5, -0.5], [2.5, 2.5], [-0.5, 2.5]];
        let d = polyline_hausdorff(&square, &bigger);
        // Farthest separation is corner to corner.
        let expect = 0.5 * core::f64::consts::SQRT_2;
        assert!(math::fabs(d - expect) <= 1e-12, "hausdorff {d}");
    }

    #[test]
    fn mode_round_trips() {
        for m in [Mode::Dir2, Mode::NoDir2, Mode::Dir3, Mode::NoDir3] {
            let s = m.as_str();
            assert_eq!(s.parse::<Mode>().unwrap(), m);
        }
        assert!("2d".parse::<Mode>().is_err());
    }
}
