//! Fixed-step RK4 integration of the Frenet-Serret system.

use super::{Frame3, FRAME_TOL};
use crate::math::Vec3;
use crate::{Error, Result};
use alloc::vec::Vec;

/// One integration node: arc length plus the frame there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub s: f64,
    pub frame: Frame3,
}

#[derive(Clone, Copy)]
struct State {
    r: Vec3,
    t: Vec3,
    n: Vec3,
    b: Vec3,
}

#[inline]
fn deriv(st: &State, kappa: f64, tau: f64) -> State {
    State {
        r: st.t,
        t: st.n * kappa,
        n: st.t * -kappa + st.b * tau,
        b: st.n * -tau,
    }
}

#[inline]
fn axpy(st: &State, d: &State, h: f64) -> State {
    State {
        r: st.r + d.r * h,
        t: st.t + d.t * h,
        n: st.n + d.n * h,
        b: st.b + d.b * h,
    }
}

/// Integrates `T' = kappa N`, `N' = -kappa T + tau B`, `B' = -tau N`,
/// `r' = T` from `f0` over `[0, length]` with a uniform step no larger
/// than `step`, re-orthonormalizing the frame after every step.
///
/// The returned samples include both `s = 0` and `s = length`.
pub fn frenet_integrate(
    f0: Frame3,
    kappa: impl Fn(f64) -> f64,
    tau: impl Fn(f64) -> f64,
    length: f64,
    step: f64,
) -> Result<Vec<FrameSample>> {
    if !(length >= 0.0) {
        return Err(Error::InvalidInput("length must be >= 0"));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive"));
    }
    let defect = f0.orthonormality_defect();
    if !(defect <= FRAME_TOL) {
        return Err(Error::InvalidFrame { defect });
    }

    let mut out = Vec::new();
    out.push(FrameSample { s: 0.0, frame: f0 });
    if length == 0.0 {
        return Ok(out);
    }

    let n_steps = {
        let n = libm::ceil(length / step) as usize;
        n.max(1)
    };
    let h = length / n_steps as f64;
    out.reserve(n_steps);

    let mut st = State {
        r: f0.r,
        t: f0.t,
        n: f0.n,
        b: f0.b,
    };
    for i in 0..n_steps {
        let s = i as f64 * h;
        let k1 = deriv(&st, kappa(s), tau(s));
        let mid = s + 0.5 * h;
        let k2 = deriv(&axpy(&st, &k1, 0.5 * h), kappa(mid), tau(mid));
        let k3 = deriv(&axpy(&st, &k2, 0.5 * h), kappa(mid), tau(mid));
        let send = s + h;
        let k4 = deriv(&axpy(&st, &k3, h), kappa(send), tau(send));

        st = State {
            r: st.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * (h / 6.0),
            t: st.t + (k1.t + k2.t * 2.0 + k3.t * 2.0 + k4.t) * (h / 6.0),
            n: st.n + (k1.n + k2.n * 2.0 + k3.n * 2.0 + k4.n) * (h / 6.0),
            b: st.b + (k1.b + k2.b * 2.0 + k3.b * 2.0 + k4.b) * (h / 6.0),
        };

        let mut frame = Frame3 {
            r: st.r,
            t: st.t,
            n: st.n,
            b: st.b,
        };
        frame.gram_schmidt();
        st.t = frame.t;
        st.n = frame.n;
        st.b = frame.b;

        let s_here = if i + 1 == n_steps { length } else { send };
        out.push(FrameSample { s: s_here, frame });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Config3;

    #[test]
    fn zero_length_returns_start_only() {
        let f0 = Frame3::from_config(Config3::new(Vec3::ZERO, Vec3::X).unwrap(), 0.0);
        let samples = frenet_integrate(f0, |_| 1.0, |_| 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].s, 0.0);
    }

    #[test]
    fn non_orthonormal_start_rejected() {
        let f0 = Frame3 {
            r: Vec3::ZERO,
            t: Vec3::X,
            n: Vec3::new(1e-3, 1.0, 0.0),
            b: Vec3::Z,
        };
        assert!(matches!(
            frenet_integrate(f0, |_| 1.0, |_| 0.0, 1.0, 1e-3),
            Err(Error::InvalidFrame { .. })
        ));
    }

    #[test]
    fn samples_cover_both_endpoints() {
        let f0 = Frame3::from_config(Config3::new(Vec3::ZERO, Vec3::X).unwrap(), 0.0);
        let samples = frenet_integrate(f0, |_| 1.0, |_| 0.0, 0.7, 1e-2).unwrap();
        assert_eq!(samples.first().unwrap().s, 0.0);
        assert_eq!(samples.last().unwrap().s, 0.7);
    }
}
