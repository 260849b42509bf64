//! Enumeration of extremal path-class candidates at a fixed arrival time.
//!
//! Templates are parameterized by all but the last segment length; the last
//! segment absorbs the remaining budget so every candidate has total length
//! exactly `t_f`. Candidates whose remainder would be negative are rejected.
//! Zero-length legs are dropped at build time, which realizes the
//! degenerations of each class (`CS` with a vanishing arc is the pure `S`
//! candidate, and so on); duplicates are removed by a canonical segment
//! signature while preserving stream order.

use crate::geom::{embed_2d, Config2, Config3, Path2, Path3, Segment2, Segment3};
use crate::math::{self, linspace, wrap_angle, Vec3};
use crate::torsion::{integrate_torsion, Branch, HParams, TorsionState};
use crate::{Error, Result};
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

const LEN_EPS: f64 = 1e-15;

/// Path-class tag carried by every candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum FamilyKind {
    S,
    C,
    Cs,
    Cc,
    Csc,
    Ccc,
    H,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::S => "S",
            FamilyKind::C => "C",
            FamilyKind::Cs => "CS",
            FamilyKind::Cc => "CC",
            FamilyKind::Csc => "CSC",
            FamilyKind::Ccc => "CCC",
            FamilyKind::H => "H",
        }
    }
}

impl core::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which time-optimal flavors to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BranchSel {
    MinTime,
    MaxTime,
    Both,
}

impl BranchSel {
    fn admits(&self, b: Branch) -> bool {
        matches!(
            (self, b),
            (BranchSel::Both, _)
                | (BranchSel::MinTime, Branch::MinTime)
                | (BranchSel::MaxTime, Branch::MaxTime)
        )
    }
}

/// Resolution and sweep settings for candidate enumeration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandidateGrid {
    /// Arrival time (equals total path length at unit speed).
    pub t_f: f64,
    pub kappa_max: f64,
    /// Points per arc-length parameter.
    pub n_arc: usize,
    /// Plane angles for embedding planar families into space.
    pub n_psi: usize,
    pub branch: BranchSel,
    pub zeta: Vec<f64>,
    pub tau0: Vec<f64>,
    pub taudot0: Vec<f64>,
}

impl CandidateGrid {
    pub fn new(t_f: f64) -> Self {
        CandidateGrid {
            t_f,
            kappa_max: 1.0,
            n_arc: 64,
            n_psi: 32,
            branch: BranchSel::Both,
            zeta: crate::torsion::default_zeta_grid(),
            tau0: crate::torsion::default_tau0_grid(),
            taudot0: crate::torsion::default_taudot0_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f > 0.0) || !self.t_f.is_finite() {
            return Err(Error::InvalidGrid("t_f must be positive and finite"));
        }
        if !(self.kappa_max > 0.0) || !self.kappa_max.is_finite() {
            return Err(Error::InvalidGrid("kappa_max must be positive and finite"));
        }
        if self.n_arc == 0 {
            return Err(Error::InvalidGrid("arc resolution is zero"));
        }
        if self.n_psi == 0 {
            return Err(Error::InvalidGrid("plane-angle resolution is zero"));
        }
        if self.zeta.is_empty() || self.tau0.is_empty() || self.taudot0.is_empty() {
            return Err(Error::InvalidGrid("helical parameter grid is empty"));
        }
        Ok(())
    }
}

/// Planar template: the free parameters of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Template2 {
    S,
    C { sign: f64 },
    Cs { sign: f64, l1: f64 },
    Cc { sign: f64, l1: f64 },
    Csc { s1: f64, s3: f64, l1: f64, l2: f64 },
    /// Turn signs alternate: `s1, -s1, s1`.
    Ccc { s1: f64, l1: f64, l2: f64 },
}

impl Template2 {
    pub fn family(&self) -> FamilyKind {
        match self {
            Template2::S => FamilyKind::S,
            Template2::C { .. } => FamilyKind::C,
            Template2::Cs { .. } => FamilyKind::Cs,
            Template2::Cc { .. } => FamilyKind::Cc,
            Template2::Csc { .. } => FamilyKind::Csc,
            Template2::Ccc { .. } => FamilyKind::Ccc,
        }
    }

    /// Instantiates the template with total length exactly `t_f`; `None`
    /// when a leg would be negative.
    pub fn build(&self, start: Config2, kappa_max: f64, t_f: f64) -> Option<Path2> {
        let k = kappa_max;
        let lengths_signs: ([f64; 3], [f64; 3]) = match *self {
            Template2::S => ([t_f, 0.0, 0.0], [0.0, 0.0, 0.0]),
            Template2::C { sign } => ([t_f, 0.0, 0.0], [sign, 0.0, 0.0]),
            Template2::Cs { sign, l1 } => ([l1, t_f - l1, 0.0], [sign, 0.0, 0.0]),
            Template2::Cc { sign, l1 } => ([l1, t_f - l1, 0.0], [sign, -sign, 0.0]),
            Template2::Csc { s1, s3, l1, l2 } => ([l1, l2, t_f - l1 - l2], [s1, 0.0, s3]),
            Template2::Ccc { s1, l1, l2 } => ([l1, l2, t_f - l1 - l2], [s1, -s1, s1]),
        };
        let (lengths, signs) = lengths_signs;
        let mut segments = Vec::new();
        for (len, sign) in lengths.iter().zip(signs.iter()) {
            if *len < -LEN_EPS {
                return None;
            }
            if *len <= LEN_EPS {
                continue;
            }
            let next = if *sign == 0.0 {
                Segment2::Straight { length: *len }
            } else {
                Segment2::Arc {
                    length: *len,
                    kappa: sign * k,
                }
            };
            // Degenerate templates can leave equal-curvature neighbors
            // (e.g. a vanished middle leg); merge them so the segment
            // list reflects the true switching structure.
            match (segments.last_mut(), next) {
                (
                    Some(Segment2::Straight { length: a }),
                    Segment2::Straight { length: b },
                ) => *a += b,
                (
                    Some(Segment2::Arc {
                        length: a,
                        kappa: ka,
                    }),
                    Segment2::Arc { length: b, kappa },
                ) if *ka == kappa => *a += b,
                (_, seg) => segments.push(seg),
            }
        }
        if segments.is_empty() {
            return None;
        }
        Some(Path2 {
            start,
            segments,
            kappa_max: k,
        })
    }

    /// Free parameters in refinement order.
    pub fn free_params(&self) -> Vec<f64> {
        match *self {
            Template2::S | Template2::C { .. } => Vec::new(),
            Template2::Cs { l1, .. } | Template2::Cc { l1, .. } => alloc::vec![l1],
            Template2::Csc { l1, l2, .. } | Template2::Ccc { l1, l2, .. } => alloc::vec![l1, l2],
        }
    }

    /// Rebuilds the template with new free parameters (same arity as
    /// [`Template2::free_params`]).
    pub fn with_params(&self, p: &[f64]) -> Template2 {
        match *self {
            Template2::S => Template2::S,
            Template2::C { sign } => Template2::C { sign },
            Template2::Cs { sign, .. } => Template2::Cs { sign, l1: p[0] },
            Template2::Cc { sign, .. } => Template2::Cc { sign, l1: p[0] },
            Template2::Csc { s1, s3, .. } => Template2::Csc {
                s1,
                s3,
                l1: p[0],
                l2: p[1],
            },
            Template2::Ccc { s1, .. } => Template2::Ccc {
                s1,
                l1: p[0],
                l2: p[1],
            },
        }
    }
}

/// Spatial template: a planar template in a rotated plane, or a helicoidal
/// arc.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Template3 {
    Planar { psi: f64, inner: Template2 },
    H { psi: f64, params: HParams },
}

impl Template3 {
    pub fn family(&self) -> FamilyKind {
        match self {
            Template3::Planar { inner, .. } => inner.family(),
            Template3::H { .. } => FamilyKind::H,
        }
    }

    pub fn build(&self, start: Config3, kappa_max: f64, t_f: f64) -> Option<Path3> {
        match self {
            Template3::Planar { psi, inner } => {
                let p2 = inner.build(Config2::new(0.0, 0.0, 0.0), kappa_max, t_f)?;
                Some(embed_path2(&p2, *psi, start))
            }
            Template3::H { psi, params } => Some(Path3 {
                start,
                segments: alloc::vec![Segment3::Helical {
                    length: t_f,
                    params: params.clone(),
                    psi: *psi,
                }],
                kappa_max,
            }),
        }
    }

    pub fn free_params(&self) -> Vec<f64> {
        match self {
            Template3::Planar { psi, inner } => {
                let mut p = inner.free_params();
                p.push(*psi);
                p
            }
            Template3::H { psi, params } => {
                alloc::vec![*psi, params.zeta, params.tau0, params.taudot0]
            }
        }
    }

    /// Rebuilds with new free parameters; `None` when helical parameters
    /// become invalid (singular `tau0`).
    pub fn with_params(&self, p: &[f64]) -> Option<Template3> {
        match self {
            Template3::Planar { inner, .. } => {
                let (inner_p, psi) = p.split_at(p.len() - 1);
                Some(Template3::Planar {
                    psi: psi[0],
                    inner: inner.with_params(inner_p),
                })
            }
            Template3::H { .. } => {
                let params = HParams::from_zeta(p[1], p[2], p[3]).ok()?;
                Some(Template3::H { psi: p[0], params })
            }
        }
    }
}

/// Embeds a planar path into the plane selected by `psi` at `base`.
pub fn embed_path2(path: &Path2, psi: f64, base: Config3) -> Path3 {
    let pb = crate::geom::plane_basis(base, psi);
    let start = embed_2d(path.start, psi, base);
    let segments = path
        .segments
        .iter()
        .map(|seg| match *seg {
            Segment2::Straight { length } => Segment3::Straight { length },
            Segment2::Arc { length, kappa } => Segment3::Arc {
                length,
                kappa,
                normal: pb.n,
            },
        })
        .collect();
    Path3 {
        start,
        segments,
        kappa_max: path.kappa_max,
    }
}

/// A planar candidate: template plus the instantiated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate2 {
    pub family: FamilyKind,
    pub template: Template2,
    pub path: Path2,
}

/// A spatial candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate3 {
    pub family: FamilyKind,
    pub template: Template3,
    pub path: Path3,
}

/// Enumeration bookkeeping reported alongside the candidate stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnumStats {
    /// Candidates emitted after deduplication.
    pub emitted: usize,
    /// Grid points removed as duplicates of an earlier candidate.
    pub deduped: usize,
    /// Helical grid points dropped because the torsion profile hits the
    /// singular threshold before `t_f`.
    pub h_dropped: usize,
}

const Q: f64 = 1e9;

#[inline]
fn qz(x: f64) -> i64 {
    libm::round(x * Q) as i64
}

type SigSeg = (u8, [i64; 6]);

fn sig2(path: &Path2) -> Vec<SigSeg> {
    path.segments
        .iter()
        .map(|seg| match *seg {
            Segment2::Straight { length } => (b'S', [qz(length), 0, 0, 0, 0, 0]),
            Segment2::Arc { length, kappa } => (b'C', [qz(length), qz(kappa), 0, 0, 0, 0]),
        })
        .collect()
}

fn sig3(path: &Path3) -> Vec<SigSeg> {
    path.segments
        .iter()
        .map(|seg| match seg {
            Segment3::Straight { length } => (b'S', [qz(*length), 0, 0, 0, 0, 0]),
            Segment3::Arc {
                length,
                kappa,
                normal,
            } => {
                // Turning about n at rate k equals turning about -n at -k;
                // canonicalize so mirrored sign patterns deduplicate.
                let (k, n) = if *kappa < 0.0 {
                    (-*kappa, -*normal)
                } else {
                    (*kappa, *normal)
                };
                (b'C', [qz(*length), qz(k), qz(n.x), qz(n.y), qz(n.z), 0])
            }
            Segment3::Helical {
                length,
                params,
                psi,
            } => {
                let psi_w = {
                    let w = math::fmod(wrap_angle(*psi) + TAU, TAU);
                    if w >= TAU { 0.0 } else { w }
                };
                (
                    b'H',
                    [
                        qz(*length),
                        qz(params.zeta),
                        qz(params.tau0),
                        qz(params.taudot0),
                        qz(psi_w),
                        0,
                    ],
                )
            }
        })
        .collect()
}

/// Canonical planar start: origin, heading along `+x`.
pub fn start2() -> Config2 {
    Config2::new(0.0, 0.0, 0.0)
}

/// Canonical spatial start: origin, tangent along `+x`.
pub fn start3() -> Config3 {
    Config3::from_unit(Vec3::ZERO, Vec3::X)
}

/// Middle-arc length range for `CCC` under a branch constraint: arc angle
/// at least `pi` for the maximum-distance flavor, at most `pi` otherwise.
fn ccc_l2_range(branch: Branch, kappa_max: f64, t_f: f64) -> Option<(f64, f64)> {
    let half_turn = PI / kappa_max;
    match branch {
        Branch::MinTime => {
            if half_turn > t_f {
                None
            } else {
                Some((half_turn, t_f))
            }
        }
        Branch::MaxTime => Some((0.0, math::fmin(half_turn, t_f))),
    }
}

/// Enumerates planar candidates. With a terminal direction the classes are
/// `CSC` and `CCC` (plus degenerations); without one they are `CS` and
/// `CC` (plus degenerations).
pub fn enumerate_2d(grid: &CandidateGrid, with_direction: bool) -> Result<Vec<Candidate2>> {
    let mut stats = EnumStats::default();
    enumerate_2d_with_stats(grid, with_direction, &mut stats)
}

/// [`enumerate_2d`] plus the bookkeeping counters.
pub fn enumerate_2d_stats(
    grid: &CandidateGrid,
    with_direction: bool,
) -> Result<(Vec<Candidate2>, EnumStats)> {
    let mut stats = EnumStats::default();
    let out = enumerate_2d_with_stats(grid, with_direction, &mut stats)?;
    Ok((out, stats))
}

fn enumerate_2d_with_stats(
    grid: &CandidateGrid,
    with_direction: bool,
    stats: &mut EnumStats,
) -> Result<Vec<Candidate2>> {
    grid.validate()?;
    let start = start2();
    let (t_f, k) = (grid.t_f, grid.kappa_max);
    let mut seen: BTreeSet<Vec<SigSeg>> = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |template: Template2, out: &mut Vec<Candidate2>| {
        if let Some(path) = template.build(start, k, t_f) {
            if seen.insert(sig2(&path)) {
                stats.emitted += 1;
                out.push(Candidate2 {
                    family: template.family(),
                    template,
                    path,
                });
            } else {
                stats.deduped += 1;
            }
        }
    };

    let arcs = linspace(0.0, t_f, grid.n_arc);
    if with_direction {
        for s1 in [1.0, -1.0] {
            for s3 in [1.0, -1.0] {
                for &l1 in &arcs {
                    for &l2 in &arcs {
                        if l1 + l2 <= t_f + LEN_EPS {
                            push(Template2::Csc { s1, s3, l1, l2 }, &mut out);
                        }
                    }
                }
            }
        }
        for branch in [Branch::MinTime, Branch::MaxTime] {
            if !grid.branch.admits(branch) {
                continue;
            }
            let Some((lo, hi)) = ccc_l2_range(branch, k, t_f) else {
                continue;
            };
            for s1 in [1.0, -1.0] {
                for &l1 in &arcs {
                    for &l2 in &linspace(lo, hi, grid.n_arc) {
                        if l1 + l2 <= t_f + LEN_EPS {
                            push(Template2::Ccc { s1, l1, l2 }, &mut out);
                        }
                    }
                }
            }
        }
    } else {
        push(Template2::S, &mut out);
        for sign in [1.0, -1.0] {
            push(Template2::C { sign }, &mut out);
        }
        for sign in [1.0, -1.0] {
            for &l1 in &arcs {
                push(Template2::Cs { sign, l1 }, &mut out);
            }
        }
        for sign in [1.0, -1.0] {
            for &l1 in &arcs {
                push(Template2::Cc { sign, l1 }, &mut out);
            }
        }
    }
    Ok(out)
}

/// Enumerates spatial candidates: planar families embedded over the plane
/// angle grid, plus (with a terminal direction) helicoidal arcs over the
/// `HParams` grid. Helical grid points whose torsion profile is singular
/// before `t_f` are dropped and counted.
pub fn enumerate_3d(
    grid: &CandidateGrid,
    with_direction: bool,
) -> Result<(Vec<Candidate3>, EnumStats)> {
    grid.validate()?;
    let start = start3();
    let (t_f, k) = (grid.t_f, grid.kappa_max);
    let mut stats = EnumStats::default();
    let mut seen: BTreeSet<Vec<SigSeg>> = BTreeSet::new();
    let mut out = Vec::new();

    let planar = enumerate_2d_with_stats(grid, with_direction, &mut EnumStats::default())?;
    for i in 0..grid.n_psi {
        let psi = TAU * i as f64 / grid.n_psi as f64;
        for cand in &planar {
            let template = Template3::Planar {
                psi,
                inner: cand.template,
            };
            let path = template
                .build(start, k, t_f)
                .expect("planar template instantiates");
            if seen.insert(sig3(&path)) {
                stats.emitted += 1;
                out.push(Candidate3 {
                    family: template.family(),
                    template,
                    path,
                });
            } else {
                stats.deduped += 1;
            }
        }
    }

    if with_direction {
        let len_u = t_f * k;
        let precheck_step = crate::geom::default_step(len_u);
        for &zeta in &grid.zeta {
            for &tau0 in &grid.tau0 {
                for &taudot0 in &grid.taudot0 {
                    let Ok(params) = HParams::from_zeta(zeta, tau0, taudot0) else {
                        stats.h_dropped += grid.n_psi;
                        continue;
                    };
                    if !grid.branch.admits(params.branch) && zeta != 0.0 {
                        continue;
                    }
                    let profile_ok = integrate_torsion(
                        TorsionState { tau: tau0, taudot: taudot0 },
                        zeta,
                        len_u,
                        precheck_step,
                    )
                    .is_ok();
                    if !profile_ok {
                        stats.h_dropped += grid.n_psi;
                        continue;
                    }
                    for i in 0..grid.n_psi {
                        let psi = TAU * i as f64 / grid.n_psi as f64;
                        let template = Template3::H {
                            psi,
                            params: params.clone(),
                        };
                        let path = template
                            .build(start, k, t_f)
                            .expect("helical template instantiates");
                        if seen.insert(sig3(&path)) {
                            stats.emitted += 1;
                            out.push(Candidate3 {
                                family: template.family(),
                                template,
                                path,
                            });
                        } else {
                            stats.deduped += 1;
                        }
                    }
                }
            }
        }
    }

    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_are_exact() {
        let grid = CandidateGrid {
            n_arc: 9,
            n_psi: 4,
            ..CandidateGrid::new(core::f64::consts::PI)
        };
        for cand in enumerate_2d(&grid, true).unwrap() {
            assert!(
                (cand.path.total_length() - grid.t_f).abs() <= 1e-12,
                "{:?}",
                cand.template
            );
        }
        let (cands, _) = enumerate_3d(&grid, true).unwrap();
        for cand in cands {
            assert!((cand.path.total_length() - grid.t_f).abs() <= 1e-12);
        }
    }

    #[test]
    fn pure_straight_appears_once() {
        let grid = CandidateGrid {
            n_arc: 17,
            ..CandidateGrid::new(1.0)
        };
        let n_straight = enumerate_2d(&grid, false)
            .unwrap()
            .iter()
            .filter(|c| c.path.segments.len() == 1
                && matches!(c.path.segments[0], Segment2::Straight { .. }))
            .count();
        assert_eq!(n_straight, 1);
    }

    #[test]
    fn min_time_middle_arcs_gated() {
        let grid = CandidateGrid {
            n_arc: 21,
            branch: BranchSel::MinTime,
            ..CandidateGrid::new(2.0 * PI)
        };
        for cand in enumerate_2d(&grid, true).unwrap() {
            if let Template2::Ccc { l2, .. } = cand.template {
                assert!(grid.kappa_max * l2 >= PI - 1e-12);
            }
        }
    }

    #[test]
    fn short_budget_has_no_min_time_ccc() {
        let grid = CandidateGrid {
            n_arc: 15,
            branch: BranchSel::MinTime,
            ..CandidateGrid::new(1.0)
        };
        let n_ccc = enumerate_2d(&grid, true)
            .unwrap()
            .iter()
            .filter(|c| c.family == FamilyKind::Ccc)
            .count();
        assert_eq!(n_ccc, 0);
    }

    #[test]
    fn zero_resolution_rejected() {
        let grid = CandidateGrid {
            n_arc: 0,
            ..CandidateGrid::new(1.0)
        };
        assert!(matches!(
            enumerate_2d(&grid, false),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let grid = CandidateGrid {
            n_arc: 11,
            n_psi: 8,
            ..CandidateGrid::new(1.5)
        };
        let (a, sa) = enumerate_3d(&grid, true).unwrap();
        let (b, sb) = enumerate_3d(&grid, true).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.path, y.path);
        }
    }

    #[test]
    fn mirrored_planes_deduplicate() {
        // A left-turn candidate in the plane at psi equals the right-turn
        // candidate at psi + pi; with n_psi even both grid points exist and
        // exactly one survives.
        let grid = CandidateGrid {
            n_arc: 5,
            n_psi: 4,
            ..CandidateGrid::new(1.0)
        };
        let (cands, stats) = enumerate_3d(&grid, false).unwrap();
        assert!(stats.deduped > 0);
        let mut seen = BTreeSet::new();
        for c in &cands {
            assert!(seen.insert(super::sig3(&c.path)), "duplicate survived");
        }
    }

    #[test]
    fn helical_singular_grid_points_counted() {
        let mut grid = CandidateGrid::new(4.0);
        grid.n_arc = 3;
        grid.n_psi = 2;
        grid.zeta = alloc::vec![0.0];
        grid.tau0 = alloc::vec![1.0, 2e-6];
        grid.taudot0 = alloc::vec![0.0, -1.0];
        let (cands, stats) = enumerate_3d(&grid, true).unwrap();
        assert!(stats.h_dropped > 0);
        assert!(cands.iter().any(|c| c.family == FamilyKind::H));
    }
}
