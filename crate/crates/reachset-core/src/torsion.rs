//! The torsion profile of helicoidal extremal arcs.
//!
//! Helicoidal arcs have constant unit curvature (before rescaling by the
//! curvature bound) and a torsion `tau(s)` obeying
//!
//! ```text
//! tau'' = 3 tau'^2 / (2 tau) - 2 tau^3 + 2 tau - zeta tau sqrt(|tau|)
//! ```
//!
//! The equation is singular at `tau = 0`; valid profiles keep a fixed sign
//! and stay away from zero. `zeta >= 0` belongs to maximum-distance
//! (minimum-time flavor) arcs and `zeta <= 0` to the maximum-time flavor.

use crate::geom::{frenet_integrate, Config3, Frame3, FrameSample};
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;

/// Smallest torsion magnitude treated as nonsingular.
pub const TAU_MIN: f64 = 1e-6;

/// Which time-optimal flavor an extremal class belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Branch {
    /// Maximum-distance arcs: `zeta >= 0`, middle arc angles `>= pi`.
    MinTime,
    /// Maximum-time arcs: `zeta <= 0`, middle arc angles `<= pi`.
    MaxTime,
}

/// Torsion and its arc-length derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TorsionState {
    pub tau: f64,
    pub taudot: f64,
}

/// Parameters of a helicoidal arc in unit-curvature scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HParams {
    pub zeta: f64,
    pub tau0: f64,
    pub taudot0: f64,
    pub branch: Branch,
}

impl HParams {
    /// Rejects `|tau0| < TAU_MIN` and branch/`zeta` sign mismatches.
    pub fn new(zeta: f64, tau0: f64, taudot0: f64, branch: Branch) -> Result<Self> {
        if !zeta.is_finite() || !tau0.is_finite() || !taudot0.is_finite() {
            return Err(Error::InvalidInput("helical parameters must be finite"));
        }
        if math::fabs(tau0) < TAU_MIN {
            return Err(Error::InvalidInput("|tau0| below the singular threshold"));
        }
        match branch {
            Branch::MinTime if zeta < 0.0 => {
                Err(Error::InvalidInput("min-time branch requires zeta >= 0"))
            }
            Branch::MaxTime if zeta > 0.0 => {
                Err(Error::InvalidInput("max-time branch requires zeta <= 0"))
            }
            _ => Ok(HParams {
                zeta,
                tau0,
                taudot0,
                branch,
            }),
        }
    }

    /// Picks the branch from the sign of `zeta`.
    pub fn from_zeta(zeta: f64, tau0: f64, taudot0: f64) -> Result<Self> {
        let branch = if zeta >= 0.0 {
            Branch::MinTime
        } else {
            Branch::MaxTime
        };
        HParams::new(zeta, tau0, taudot0, branch)
    }
}

#[inline]
fn rhs_unchecked(tau: f64, taudot: f64, zeta: f64) -> f64 {
    3.0 * taudot * taudot / (2.0 * tau) - 2.0 * tau * tau * tau + 2.0 * tau
        - zeta * tau * math::sqrt(math::fabs(tau))
}

/// Second derivative of the torsion profile at `state`.
pub fn torsion_rhs(state: TorsionState, zeta: f64) -> Result<f64> {
    if math::fabs(state.tau) < TAU_MIN {
        return Err(Error::TorsionSingularity { arc_length: 0.0 });
    }
    Ok(rhs_unchecked(state.tau, state.taudot, zeta))
}

/// One node of an integrated torsion profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsionSample {
    pub s: f64,
    pub state: TorsionState,
}

/// Integrates the torsion ODE with fixed-step RK4 over `[0, length]`.
///
/// Aborts with [`Error::TorsionSingularity`] (carrying the arc length
/// reached) if the profile dips below `TAU_MIN` in magnitude, changes
/// sign, or stops being finite. Samples include `s = 0` and `s = length`.
pub fn integrate_torsion(
    state0: TorsionState,
    zeta: f64,
    length: f64,
    step: f64,
) -> Result<Vec<TorsionSample>> {
    if !(length >= 0.0) {
        return Err(Error::InvalidInput("length must be >= 0"));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive"));
    }
    integrate_torsion_n(
        state0,
        zeta,
        length,
        (libm::ceil(length / step) as usize).max(1),
    )
}

/// Same as [`integrate_torsion`] but with an exact node count, so callers
/// can align the node grid with another integrator.
pub fn integrate_torsion_n(
    state0: TorsionState,
    zeta: f64,
    length: f64,
    n_steps: usize,
) -> Result<Vec<TorsionSample>> {
    let sign0 = if state0.tau > 0.0 { 1.0 } else { -1.0 };
    let valid = |tau: f64, s: f64| -> Result<()> {
        if !tau.is_finite() || math::fabs(tau) < TAU_MIN || tau * sign0 < 0.0 {
            Err(Error::TorsionSingularity { arc_length: s })
        } else {
            Ok(())
        }
    };
    valid(state0.tau, 0.0)?;

    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(TorsionSample {
        s: 0.0,
        state: state0,
    });
    if length == 0.0 {
        return Ok(out);
    }

    let h = length / n_steps as f64;
    let mut st = state0;
    for i in 0..n_steps {
        let s = i as f64 * h;
        let stage = |tau: f64, taudot: f64| -> Result<(f64, f64)> {
            valid(tau, s)?;
            Ok((taudot, rhs_unchecked(tau, taudot, zeta)))
        };
        let (k1t, k1d) = stage(st.tau, st.taudot)?;
        let (k2t, k2d) = stage(st.tau + 0.5 * h * k1t, st.taudot + 0.5 * h * k1d)?;
        let (k3t, k3d) = stage(st.tau + 0.5 * h * k2t, st.taudot + 0.5 * h * k2d)?;
        let (k4t, k4d) = stage(st.tau + h * k3t, st.taudot + h * k3d)?;
        st = TorsionState {
            tau: st.tau + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
            taudot: st.taudot + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
        };
        let s_next = if i + 1 == n_steps {
            length
        } else {
            (i + 1) as f64 * h
        };
        valid(st.tau, s_next)?;
        out.push(TorsionSample {
            s: s_next,
            state: st,
        });
    }
    Ok(out)
}

/// Integrates a helicoidal arc of `length` starting at `c0`, with the
/// initial normal selected by rotating the reference normal of `c0.e` by
/// `psi`. Returns frames in physical arc length.
///
/// The profile is solved in unit-curvature scale (arc length and inverse
/// torsion scale with `1 / kappa_max`) and the resulting curve is shrunk
/// by `kappa_max` about `c0.r`; curvature of the output is `kappa_max`.
pub fn helical_segment(
    c0: Config3,
    psi: f64,
    params: &HParams,
    length: f64,
    kappa_max: f64,
    step: f64,
) -> Result<Vec<FrameSample>> {
    Ok(helical_segment_full(c0, psi, params, length, kappa_max, step)?.0)
}

/// Like [`helical_segment`], additionally returning the torsion profile in
/// unit-curvature scale (arc length `kappa_max` times physical, torsion
/// `1 / kappa_max` times physical) with nodes at half the frame spacing,
/// so torsion node `2 * j` matches frame node `j`.
pub fn helical_segment_full(
    c0: Config3,
    psi: f64,
    params: &HParams,
    length: f64,
    kappa_max: f64,
    step: f64,
) -> Result<(Vec<FrameSample>, Vec<TorsionSample>)> {
    if !(kappa_max > 0.0) {
        return Err(Error::InvalidInput("kappa_max must be positive"));
    }
    if !(length >= 0.0) {
        return Err(Error::InvalidInput("length must be >= 0"));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive"));
    }

    let len_u = kappa_max * length;
    let step_u = kappa_max * step;
    let f0 = Frame3::from_config(c0, psi);
    if len_u == 0.0 {
        let tor0 = TorsionSample {
            s: 0.0,
            state: TorsionState {
                tau: params.tau0,
                taudot: params.taudot0,
            },
        };
        return Ok((
            alloc::vec![FrameSample { s: 0.0, frame: f0 }],
            alloc::vec![tor0],
        ));
    }

    let n_frame = (libm::ceil(len_u / step_u) as usize).max(1);
    let h_frame = len_u / n_frame as f64;

    // Torsion nodes at half the frame step so every RK4 stage point of the
    // frame integration lands exactly on a torsion node.
    let tor = integrate_torsion_n(
        TorsionState {
            tau: params.tau0,
            taudot: params.taudot0,
        },
        params.zeta,
        len_u,
        2 * n_frame,
    )
    .map_err(|e| match e {
        Error::TorsionSingularity { arc_length } => Error::TorsionSingularity {
            arc_length: arc_length / kappa_max,
        },
        other => other,
    })?;

    let h_tor = len_u / (2 * n_frame) as f64;
    let tau_at = |s: f64| -> f64 {
        let idx = libm::round(s / h_tor) as usize;
        tor[idx.min(tor.len() - 1)].state.tau
    };

    let unit = frenet_integrate(f0, |_| 1.0, tau_at, len_u, h_frame)?;
    let scale = 1.0 / kappa_max;
    let frames = unit
        .into_iter()
        .map(|fs| FrameSample {
            s: fs.s * scale,
            frame: Frame3 {
                r: c0.r + (fs.frame.r - c0.r) * scale,
                t: fs.frame.t,
                n: fs.frame.n,
                b: fs.frame.b,
            },
        })
        .collect();
    Ok((frames, tor))
}

/// Default `zeta` sweep values (both flavors).
pub fn default_zeta_grid() -> Vec<f64> {
    alloc::vec![-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0]
}

/// Default initial torsion sweep: `+/- logspace(1e-2, 1e1, 13)`.
pub fn default_tau0_grid() -> Vec<f64> {
    let pos = math::logspace(1e-2, 1e1, 13);
    let mut out = Vec::with_capacity(26);
    for &v in pos.iter() {
        out.push(-v);
    }
    out.extend_from_slice(&pos);
    out
}

/// Default initial torsion-rate sweep.
pub fn default_taudot0_grid() -> Vec<f64> {
    alloc::vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_pinned_values() {
        let f = |tau, taudot, zeta| torsion_rhs(TorsionState { tau, taudot }, zeta).unwrap();
        assert_eq!(f(1.0, 0.0, 0.0), 0.0);
        assert_eq!(f(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(f(1.0, 0.0, 2.0), -2.0);
    }

    #[test]
    fn rhs_rejects_singular_tau() {
        assert!(matches!(
            torsion_rhs(
                TorsionState {
                    tau: 0.5 * TAU_MIN,
                    taudot: 0.0
                },
                0.0
            ),
            Err(Error::TorsionSingularity { .. })
        ));
    }

    #[test]
    fn equilibria_hold_over_long_integration() {
        for tau0 in [1.0, -1.0] {
            let samples = integrate_torsion(
                TorsionState {
                    tau: tau0,
                    taudot: 0.0,
                },
                0.0,
                10.0,
                1e-3,
            )
            .unwrap();
            for s in &samples {
                assert!(
                    (s.state.tau - tau0).abs() <= 1e-8,
                    "drift {} at s={}",
                    s.state.tau - tau0,
                    s.s
                );
            }
        }
    }

    #[test]
    fn near_singular_start_aborts_cleanly() {
        let err = integrate_torsion(
            TorsionState {
                tau: 2.0 * TAU_MIN,
                taudot: -1.0,
            },
            0.0,
            1.0,
            1e-4,
        )
        .unwrap_err();
        match err {
            Error::TorsionSingularity { arc_length } => {
                assert!((0.0..0.01).contains(&arc_length));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn self_convergence_against_sixteenth_step() {
        let st = TorsionState {
            tau: 0.8,
            taudot: 0.3,
        };
        let coarse = integrate_torsion(st, 1.0, 2.0, 1e-3).unwrap();
        let fine = integrate_torsion(st, 1.0, 2.0, 1e-3 / 16.0).unwrap();
        let c = coarse.last().unwrap().state;
        let f = fine.last().unwrap().state;
        assert!((c.tau - f.tau).abs() < 1e-6);
        assert!((c.taudot - f.taudot).abs() < 1e-6);
    }

    #[test]
    fn branch_sign_rules_enforced() {
        assert!(HParams::new(-0.1, 1.0, 0.0, Branch::MinTime).is_err());
        assert!(HParams::new(0.1, 1.0, 0.0, Branch::MaxTime).is_err());
        assert!(HParams::new(0.0, 1.0, 0.0, Branch::MinTime).is_ok());
        assert!(HParams::new(0.0, 1.0, 0.0, Branch::MaxTime).is_ok());
        assert!(HParams::new(1.0, 0.0, 0.0, Branch::MinTime).is_err());
    }

    #[test]
    fn curvature_rescaling_is_a_similarity() {
        use crate::math::Vec3;
        let c0 = Config3::new(Vec3::ZERO, Vec3::X).unwrap();
        let h = HParams::from_zeta(1.0, 0.5, 0.2).unwrap();
        let full = helical_segment(c0, 0.3, &h, 2.0, 1.0, 1e-3).unwrap();
        let half = helical_segment(c0, 0.3, &h, 1.0, 2.0, 0.5e-3).unwrap();
        let rf = full.last().unwrap().frame;
        let rh = half.last().unwrap().frame;
        assert!((rh.r - rf.r * 0.5).norm() < 1e-12);
        assert!((rh.t - rf.t).norm() < 1e-12);
    }
}
