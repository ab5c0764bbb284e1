//! Property tests of the reference-frame algebra: the Park transform pair,
//! power invariance, the amplitude map for symmetric signals, and the
//! rotation-matrix identities the model equations lean on.

use microgrid::frames::{
    inverse_park, j, park, rotation_raw, rotation_deriv_raw, AbcSignal, Angle, DqVector, Frame,
};
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use std::f64::consts::TAU;

const TOL: f64 = 1e-10;

fn angles() -> impl Strategy<Value = f64> {
    -10.0 * TAU..10.0 * TAU
}

fn components() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn park_then_inverse_park_is_identity(
        theta in angles(),
        a in components(),
        b in components(),
        c in components(),
    ) {
        let signal = AbcSignal::new(a, b, c);
        let (dq, zero) = park(Angle::new(theta.rem_euclid(TAU)), &signal);
        let back = inverse_park(Angle::new(theta.rem_euclid(TAU)), dq, zero);
        let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
        prop_assert!((back.a - a).abs() < TOL * scale);
        prop_assert!((back.b - b).abs() < TOL * scale);
        prop_assert!((back.c - c).abs() < TOL * scale);
    }

    #[test]
    fn inverse_park_then_park_is_identity(
        theta in angles(),
        d in components(),
        q in components(),
        zero in components(),
    ) {
        let angle = Angle::new(theta.rem_euclid(TAU));
        let signal = inverse_park(angle, DqVector::new(d, q, Frame::LocalDq), zero);
        let (dq, z) = park(angle, &signal);
        let scale = 1.0 + d.abs().max(q.abs()).max(zero.abs());
        prop_assert!((dq.d - d).abs() < TOL * scale);
        prop_assert!((dq.q - q).abs() < TOL * scale);
        prop_assert!((z - zero).abs() < TOL * scale);
    }

    #[test]
    fn instantaneous_power_is_preserved(
        theta in angles(),
        va in components(), vb in components(), vc in components(),
        ia in components(), ib in components(), ic in components(),
    ) {
        let angle = Angle::new(theta.rem_euclid(TAU));
        let (v_dq, v0) = park(angle, &AbcSignal::new(va, vb, vc));
        let (i_dq, i0) = park(angle, &AbcSignal::new(ia, ib, ic));
        let p_abc = va * ia + vb * ib + vc * ic;
        let p_dq = v_dq.d * i_dq.d + v_dq.q * i_dq.q + v0 * i0;
        let scale = 1.0 + p_abc.abs();
        prop_assert!((p_abc - p_dq).abs() < TOL * scale);
    }

    #[test]
    fn symmetric_signals_have_no_zero_sequence_and_map_amplitudes(
        theta in angles(),
        phase in angles(),
        amplitude in 0.0..1e3f64,
    ) {
        let angle = Angle::new(theta.rem_euclid(TAU));
        let signal = AbcSignal::symmetric(amplitude, phase);
        let (dq, zero) = park(angle, &signal);
        let scale = 1.0 + amplitude;
        prop_assert!(zero.abs() < TOL * scale);
        // Power-invariant scaling: |dq| = sqrt(3/2) * phase-peak amplitude.
        prop_assert!((dq.magnitude() - (1.5f64).sqrt() * amplitude).abs() < TOL * scale);
    }

    #[test]
    fn park_at_the_signal_angle_lands_on_the_d_axis(
        phase in angles(),
        amplitude in 0.0..1e3f64,
    ) {
        let signal = AbcSignal::symmetric(amplitude, phase);
        let (dq, _) = park(Angle::new(phase.rem_euclid(TAU)), &signal);
        let scale = 1.0 + amplitude;
        prop_assert!((dq.d - (1.5f64).sqrt() * amplitude).abs() < TOL * scale);
        prop_assert!(dq.q.abs() < TOL * scale);
    }

    #[test]
    fn rotations_are_orthogonal_and_compose(
        a in angles(),
        b in angles(),
    ) {
        let ta = rotation_raw(a);
        let identity = ta.transpose() * ta;
        prop_assert!((identity - Matrix2::identity()).norm() < TOL);
        prop_assert!((ta.determinant() - 1.0).abs() < TOL);

        let composed = rotation_raw(a) * rotation_raw(b);
        // Angle sums can wrap many times; compare matrices, not angles.
        prop_assert!((composed - rotation_raw(a + b)).norm() < 20.0 * TOL);
    }

    #[test]
    fn rotation_commutes_with_the_quarter_turn(delta in angles()) {
        let t = rotation_raw(delta);
        prop_assert!((j() * t - t * j()).norm() < TOL);
    }

    #[test]
    fn rotation_derivative_matches_central_differences(
        delta in angles(),
        x in components(),
        y in components(),
    ) {
        let v = Vector2::new(x, y);
        let h = 1e-5;
        let fd = (rotation_raw(delta + h) * v - rotation_raw(delta - h) * v) / (2.0 * h);
        let analytic = rotation_deriv_raw(delta) * v;
        let scale = 1.0 + v.norm();
        prop_assert!((fd - analytic).norm() < 1e-9 * scale);
        // And the closed form is exactly -J T.
        prop_assert!(
            (rotation_deriv_raw(delta) + j() * rotation_raw(delta)).norm() < TOL
        );
    }
}
