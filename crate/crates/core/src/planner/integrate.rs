use super::ControlAction;
use crate::world::{wrap_angle, VehicleState};

/// Default integration sub-step in seconds.
pub const SUBSTEP: f64 = 0.05;

/// Kinematic transition over `dt` seconds with sub-steps of at most 0.05 s.
pub fn integrate(state: &VehicleState, action: &ControlAction, dt: f64) -> VehicleState {
    integrate_with_substep(state, action, dt, SUBSTEP)
}

/// Kinematic transition with an explicit maximum sub-step.
///
/// Speed follows the commanded acceleration and clamps at zero, curvature
/// changes at the commanded rate, heading integrates `v * kappa`; heading and
/// position use Simpson quadrature within each sub-step.
pub fn integrate_with_substep(
    state: &VehicleState,
    action: &ControlAction,
    dt: f64,
    max_substep: f64,
) -> VehicleState {
    assert!(dt > 0.0 && max_substep > 0.0, "time steps must be positive");
    let n = (dt / max_substep).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let a = action.accel;
    let mut s = *state;
    for _ in 0..n {
        // Moving time within the sub-step (shorter when the vehicle stops).
        let he = if a < 0.0 && s.v + a * h < 0.0 {
            s.v / -a
        } else {
            h
        };
        let k1 = s.curvature + action.curvature_rate * h;
        let kappa = |t: f64| s.curvature + action.curvature_rate * t;
        let speed = |t: f64| s.v + a * t;
        // Simpson quadrature of heading and position along the sub-step.
        let tm = 0.5 * he;
        let (v0, vm, v1) = (speed(0.0), speed(tm), speed(he));
        let tq = 0.5 * tm;
        let yaw_m =
            s.yaw + tm / 6.0 * (kappa(0.0) * v0 + 4.0 * kappa(tq) * speed(tq) + kappa(tm) * vm);
        let dyaw = he / 6.0 * (kappa(0.0) * v0 + 4.0 * kappa(tm) * vm + kappa(he) * v1);
        let yaw_1 = s.yaw + dyaw;
        s.x += he / 6.0 * (v0 * s.yaw.cos() + 4.0 * vm * yaw_m.cos() + v1 * yaw_1.cos());
        s.y += he / 6.0 * (v0 * s.yaw.sin() + 4.0 * vm * yaw_m.sin() + v1 * yaw_1.sin());
        s.yaw = wrap_angle(yaw_1);
        s.v = if he < h { 0.0 } else { v1.max(0.0) };
        s.curvature = k1;
        s.t += h;
    }
    s.accel = a;
    s.t = state.t + dt;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn straight_constant_speed() {
        let s = VehicleState {
            v: 10.0,
            yaw: 0.3,
            ..Default::default()
        };
        let a = ControlAction {
            accel: 0.0,
            curvature_rate: 0.0,
            duration: 1.0,
        };
        let n = integrate(&s, &a, 1.0);
        assert!((n.x - 10.0 * 0.3f64.cos()).abs() < 1e-12);
        assert!((n.y - 10.0 * 0.3f64.sin()).abs() < 1e-12);
        assert!((n.yaw - 0.3).abs() < 1e-15);
        assert_eq!(n.v, 10.0);
        assert!((n.t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn standing_still_only_advances_time() {
        let s = VehicleState {
            x: 3.0,
            y: -2.0,
            yaw: 1.0,
            t: 5.0,
            ..Default::default()
        };
        let a = ControlAction {
            accel: 0.0,
            curvature_rate: 0.0,
            duration: 1.0,
        };
        let n = integrate(&s, &a, 2.0);
        assert_eq!((n.x, n.y, n.yaw, n.v), (s.x, s.y, s.yaw, s.v));
        assert!((n.t - 7.0).abs() < 1e-15);
    }

    #[test]
    fn braking_clamps_at_zero() {
        let s = VehicleState {
            v: 2.0,
            ..Default::default()
        };
        let a = ControlAction {
            accel: -4.0,
            curvature_rate: 0.0,
            duration: 1.0,
        };
        let n = integrate(&s, &a, 1.0);
        assert_eq!(n.v, 0.0);
        assert!((n.x - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn coarse_substeps_match_fine_integration(
            v in 0.0f64..30.0,
            yaw in -3.0f64..3.0,
            kappa in -0.1f64..0.1,
            accel in -5.0f64..2.5,
            rate in -0.1f64..0.1,
        ) {
            let s = VehicleState { v, yaw, curvature: kappa, ..Default::default() };
            let a = ControlAction { accel, curvature_rate: rate, duration: 1.0 };
            let coarse = integrate_with_substep(&s, &a, 1.0, 0.05);
            let fine = integrate_with_substep(&s, &a, 1.0, 0.001);
            let err = (coarse.x - fine.x).hypot(coarse.y - fine.y);
            prop_assert!(err < 0.01, "position error {err}");
        }
    }
}
