//! Geometry integration tests against closed-form oracles.
//!
//! The helix oracle below is written from the textbook parameterization
//! (radius `kappa / (kappa^2 + tau^2)`, pitch parameter
//! `tau / (kappa^2 + tau^2)`) and deliberately shares no code with the
//! crate's integrators.

use reachset_core::geom::{
    arc_endpoint_3, embed_2d, frenet_integrate, Config2, Config3, Frame3, Path2, Path3, Segment2,
    Segment3,
};
use reachset_core::math::Vec3;
use reachset_core::torsion::HParams;
use std::f64::consts::PI;

/// Closed-form circular helix with constant curvature and torsion, started
/// at the frame `f0`.
fn helix_oracle(f0: &Frame3, kappa: f64, tau: f64, s: f64) -> Frame3 {
    let w2 = kappa * kappa + tau * tau;
    let w = w2.sqrt();
    let a = kappa / w2;
    let b = tau / w;

    // Canonical helix r(u) = (a cos(wu), a sin(wu), b u) and its frame.
    let r = |u: f64| [a * (w * u).cos(), a * (w * u).sin(), b * u];
    let t = |u: f64| [-a * w * (w * u).sin(), a * w * (w * u).cos(), b];
    let n = |u: f64| [-(w * u).cos(), -(w * u).sin(), 0.0];
    let bv = |u: f64| [b * (w * u).sin(), -b * (w * u).cos(), a * w];

    // Express canonical vectors in the canonical start frame, then rebuild
    // them on f0's axes.
    let t0 = t(0.0);
    let n0 = n(0.0);
    let b0 = bv(0.0);
    let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    let rebuild = |v: [f64; 3]| -> Vec3 {
        f0.t * dot(v, t0) + f0.n * dot(v, n0) + f0.b * dot(v, b0)
    };
    let r0 = r(0.0);
    let rs = r(s);
    let dr = [rs[0] - r0[0], rs[1] - r0[1], rs[2] - r0[2]];
    Frame3 {
        r: f0.r + rebuild(dr),
        t: rebuild(t(s)),
        n: rebuild(n(s)),
        b: rebuild(bv(s)),
    }
}

fn start_frame() -> Frame3 {
    Frame3::from_config(Config3::new(Vec3::ZERO, Vec3::X).unwrap(), 0.0)
}

#[test]
fn integrated_helix_matches_closed_form() {
    let f0 = start_frame();
    let (kappa, tau, len) = (1.0, 1.0, 4.0);
    let samples = frenet_integrate(f0, |_| kappa, |_| tau, len, 1e-3).unwrap();
    for fs in samples.iter().step_by(256).chain([samples.last().unwrap()]) {
        let exact = helix_oracle(&f0, kappa, tau, fs.s);
        assert!(
            (fs.frame.r - exact.r).norm() < 1e-6,
            "position error {} at s={}",
            (fs.frame.r - exact.r).norm(),
            fs.s
        );
        assert!((fs.frame.t - exact.t).norm() < 1e-6);
        assert!((fs.frame.n - exact.n).norm() < 1e-6);
    }
}

#[test]
fn integrated_circle_matches_closed_form() {
    let f0 = start_frame();
    let samples = frenet_integrate(f0, |_| 1.0, |_| 0.0, PI / 2.0, 1e-3).unwrap();
    let end = samples.last().unwrap().frame;
    assert!((end.r - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-6);
    assert!((end.t - Vec3::Y).norm() < 1e-6);
}

#[test]
fn orthonormality_preserved_along_integration() {
    let f0 = start_frame();
    let samples = frenet_integrate(f0, |_| 1.0, |s| 0.8 + 0.3 * (2.0 * s).sin(), 6.0, 1e-3).unwrap();
    for fs in &samples {
        assert!(fs.frame.orthonormality_defect() <= 1e-6);
    }
}

#[test]
fn rk4_order_at_least_3_9_over_a_decade() {
    let f0 = start_frame();
    let (kappa, tau, len) = (1.0, 0.7, 2.0);
    let exact = helix_oracle(&f0, kappa, tau, len);
    let mut errs = Vec::new();
    let mut h = 1e-2;
    for _ in 0..4 {
        let samples = frenet_integrate(f0, |_| kappa, |_| tau, len, h).unwrap();
        let end = samples.last().unwrap().frame;
        errs.push((end.r - exact.r).norm() + (end.t - exact.t).norm());
        h *= 0.5;
    }
    for pair in errs.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order >= 3.9, "observed order {order} from errors {errs:?}");
    }
}

#[test]
fn helical_segment_at_equilibrium_is_a_helix() {
    // At zeta = 0 the torsion ODE has equilibria tau = +/-1, so the arc is
    // an exact circular helix in unit-curvature scale.
    for tau0 in [1.0, -1.0] {
        let c0 = Config3::new(Vec3::ZERO, Vec3::X).unwrap();
        let params = HParams::from_zeta(0.0, tau0, 0.0).unwrap();
        let seg = Segment3::Helical {
            length: 4.0,
            params,
            psi: 0.0,
        };
        let end = seg.endpoint(c0, 1.0, Some(1e-3)).unwrap();
        let exact = helix_oracle(&start_frame(), 1.0, tau0, 4.0);
        assert!(
            (end.r - exact.r).norm() < 1e-6,
            "tau0={tau0}: error {}",
            (end.r - exact.r).norm()
        );
        assert!((end.e - exact.t).norm() < 1e-6);
    }
}

#[test]
fn junctions_are_c1_for_closed_form_segments() {
    let path = Path2 {
        start: Config2::new(0.2, -0.4, 0.3),
        segments: vec![
            Segment2::Arc {
                length: 1.1,
                kappa: 1.0,
            },
            Segment2::Straight { length: 0.7 },
            Segment2::Arc {
                length: 0.9,
                kappa: -1.0,
            },
        ],
        kappa_max: 1.0,
    };
    let mut s = 0.0;
    for seg in &path.segments {
        s += seg.length();
        let before = path.evaluate(s - 1e-9).unwrap();
        let at = path.evaluate(s).unwrap();
        assert!((before.x - at.x).abs() < 2e-9);
        assert!((before.y - at.y).abs() < 2e-9);
        assert!((before.theta() - at.theta()).abs() < 2e-9);
    }
}

#[test]
fn planar_paths_are_isometry_equivariant() {
    let path = Path2 {
        start: Config2::new(0.0, 0.0, 0.0),
        segments: vec![
            Segment2::Arc {
                length: 0.8,
                kappa: 1.0,
            },
            Segment2::Straight { length: 1.3 },
        ],
        kappa_max: 1.0,
    };
    let end = path.endpoint().unwrap();
    let (dx, dy, rot) = (0.37, -1.21, 0.9);
    let moved = Path2 {
        start: Config2::new(dx, dy, rot),
        ..path.clone()
    };
    let moved_end = moved.endpoint().unwrap();
    let expect_x = dx + end.x * rot.cos() - end.y * rot.sin();
    let expect_y = dy + end.x * rot.sin() + end.y * rot.cos();
    assert!((moved_end.x - expect_x).abs() < 1e-9);
    assert!((moved_end.y - expect_y).abs() < 1e-9);
    assert!((moved_end.theta() - (end.theta() + rot)).abs() < 1e-9);
}

#[test]
fn spatial_paths_are_isometry_equivariant() {
    let axis = Vec3::new(0.3, -0.5, 0.81).normalized();
    let angle = 1.2;
    let shift = Vec3::new(0.4, 2.0, -0.7);
    let rot = |v: Vec3| v.rotated_about(axis, angle);

    let c0 = Config3::new(Vec3::new(0.1, 0.2, 0.3), Vec3::X).unwrap();
    let normal = Vec3::Z;
    let segs = vec![
        Segment3::Arc {
            length: 0.9,
            kappa: 1.0,
            normal,
        },
        Segment3::Straight { length: 0.6 },
        Segment3::Arc {
            length: 1.2,
            kappa: -1.0,
            normal,
        },
    ];
    let end = Path3 {
        start: c0,
        segments: segs.clone(),
        kappa_max: 1.0,
    }
    .endpoint(None)
    .unwrap();

    let moved = Path3 {
        start: Config3::from_unit(rot(c0.r) + shift, rot(c0.e)),
        segments: segs
            .into_iter()
            .map(|seg| match seg {
                Segment3::Arc {
                    length,
                    kappa,
                    normal,
                } => Segment3::Arc {
                    length,
                    kappa,
                    normal: rot(normal),
                },
                other => other,
            })
            .collect(),
        kappa_max: 1.0,
    }
    .endpoint(None)
    .unwrap();

    assert!((moved.r - (rot(end.r) + shift)).norm() < 1e-9);
    assert!((moved.e - rot(end.e)).norm() < 1e-9);
}

#[test]
fn helical_arcs_are_isometry_equivariant_up_to_psi() {
    // Rotating the start tangent changes its reference normal, so the
    // rotated path must pick the psi that reproduces the rotated initial
    // normal; with that correction endpoints transform rigidly.
    let axis = Vec3::new(0.2, 0.9, -0.4).normalized();
    let angle = 0.8;
    let rot = |v: Vec3| v.rotated_about(axis, angle);

    let c0 = Config3::new(Vec3::ZERO, Vec3::X).unwrap();
    let psi = 0.6;
    let params = HParams::from_zeta(0.5, 0.8, -0.2).unwrap();
    let seg = |psi| Segment3::Helical {
        length: 2.0,
        params: params.clone(),
        psi,
    };
    let end = seg(psi).endpoint(c0, 1.0, Some(1e-3)).unwrap();

    let c0r = Config3::from_unit(rot(c0.r), rot(c0.e));
    let n_start = Frame3::from_config(c0, psi).n;
    let target_n = rot(n_start);
    let nref = c0r.e.any_unit_normal();
    let psi_rot = f64::atan2(
        c0r.e.cross(nref).dot(target_n),
        nref.dot(target_n),
    );
    let end_r = seg(psi_rot).endpoint(c0r, 1.0, Some(1e-3)).unwrap();

    assert!((end_r.r - rot(end.r)).norm() < 1e-9);
    assert!((end_r.e - rot(end.e)).norm() < 1e-9);
}

#[test]
fn arc_rodrigues_agrees_with_fine_integration() {
    let c0 = Config3::new(Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.6, 0.8, 0.0)).unwrap();
    let normal = Vec3::Z;
    let exact = arc_endpoint_3(c0, 1.7, 1.0, normal).unwrap();
    let f0 = Frame3 {
        r: c0.r,
        t: c0.e,
        n: normal.cross(c0.e),
        b: normal,
    };
    let fine = frenet_integrate(f0, |_| 1.0, |_| 0.0, 1.7, 1e-4).unwrap();
    let end = fine.last().unwrap().frame;
    assert!((end.r - exact.r).norm() < 1e-9);
    assert!((end.t - exact.e).norm() < 1e-9);
}

#[test]
fn embedding_respects_plane_rotation() {
    let base = Config3::new(Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let c2 = Config2::new(1.0, 2.0, 0.25);
    let a = embed_2d(c2, 0.0, base);
    let b = embed_2d(c2, 1.3, base);
    // Same in-plane coordinates, plane rotated about the base tangent.
    let ra = a.r - base.r;
    let rb = b.r - base.r;
    assert!((ra.norm() - rb.norm()).abs() < 1e-12);
    assert!((ra.dot(base.e) - rb.dot(base.e)).abs() < 1e-12);
    assert!((rb - ra.rotated_about(base.e, 1.3)).norm() < 1e-12);
}
