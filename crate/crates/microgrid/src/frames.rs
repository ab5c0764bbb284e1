//! Reference-frame algebra: the power-invariant Park transform and its
//! inverse, the rotation between a local dq frame and the synchronous DQ
//! frame, and the constant matrices `J` and `e` used throughout the models.
//!
//! Conventions: a symmetric three-phase signal of phase-peak amplitude `X`
//! and phase offset `a` relative to the transform angle maps to the dq
//! phasor `sqrt(3/2) * X * exp(j a)`, with `d` the real part and `q` the
//! imaginary part. The voltage magnitude `V` carried by the models is the
//! dq-frame magnitude, so `v_odq = [V, 0]` holds exactly at alignment.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use std::f64::consts::TAU;
use std::ops::{Add, Sub};

/// 90-degree rotation generator `J = [[0, 1], [-1, 0]]`, the dq-frame image
/// of multiplication by `-j` (so `J * [d, q] = [q, -d]`).
pub fn j() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// Unit vector `e = [1, 0]` selecting the d axis.
pub fn e() -> Vector2<f64> {
    Vector2::new(1.0, 0.0)
}

/// An angle in radians, wrapped to `[0, 2*pi)`.
///
/// Integration state keeps raw unwrapped angles; this type is the frames API
/// boundary where wrapping is well defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(f64);

impl Angle {
    /// Wraps `radians` into `[0, 2*pi)`. Panics on a non-finite input.
    pub fn new(radians: f64) -> Self {
        assert!(radians.is_finite(), "angle must be finite");
        Angle(radians.rem_euclid(TAU))
    }

    /// The wrapped value in radians.
    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Which rotating frame a dq vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Frame attached to one inverter's own angle.
    LocalDq,
    /// Common frame rotating at the synchronous frequency.
    SynchronousDq,
}

/// Instantaneous values of a three-phase signal (volts or amperes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcSignal {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcSignal {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        AbcSignal { a, b, c }
    }

    /// Symmetric signal of phase-peak amplitude `amplitude` sampled at
    /// electrical angle `theta`: phases displaced by 120 degrees.
    pub fn symmetric(amplitude: f64, theta: f64) -> Self {
        AbcSignal {
            a: amplitude * theta.cos(),
            b: amplitude * (theta - TAU / 3.0).cos(),
            c: amplitude * (theta + TAU / 3.0).cos(),
        }
    }
}

/// A two-component vector in a tagged rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqVector {
    pub d: f64,
    pub q: f64,
    pub frame: Frame,
}

impl DqVector {
    pub fn new(d: f64, q: f64, frame: Frame) -> Self {
        DqVector { d, q, frame }
    }

    pub fn as_vector(self) -> Vector2<f64> {
        Vector2::new(self.d, self.q)
    }

    pub fn magnitude(self) -> f64 {
        self.d.hypot(self.q)
    }
}

impl Add for DqVector {
    type Output = DqVector;
    fn add(self, rhs: DqVector) -> DqVector {
        assert_eq!(self.frame, rhs.frame, "frame mismatch in dq arithmetic");
        DqVector::new(self.d + rhs.d, self.q + rhs.q, self.frame)
    }
}

impl Sub for DqVector {
    type Output = DqVector;
    fn sub(self, rhs: DqVector) -> DqVector {
        assert_eq!(self.frame, rhs.frame, "frame mismatch in dq arithmetic");
        DqVector::new(self.d - rhs.d, self.q - rhs.q, self.frame)
    }
}

/// The full 3x3 power-invariant Park matrix at angle `theta`, including the
/// zero-sequence row `sqrt(1/2) * [1, 1, 1]`. Orthogonal, so the inverse is
/// the transpose and instantaneous power is preserved.
fn park_matrix(theta: f64) -> Matrix3<f64> {
    let s = (2.0f64 / 3.0).sqrt();
    let z = 0.5f64.sqrt();
    let (t1, t2, t3) = (theta, theta - TAU / 3.0, theta + TAU / 3.0);
    s * Matrix3::new(
        t1.cos(),
        t2.cos(),
        t3.cos(),
        -t1.sin(),
        -t2.sin(),
        -t3.sin(),
        z,
        z,
        z,
    )
}

/// Park transform of a three-phase signal at angle `theta`. Returns the dq
/// vector (tagged local) and the zero-sequence component separately; the
/// zero component vanishes for symmetric signals.
pub fn park(theta: Angle, x: &AbcSignal) -> (DqVector, f64) {
    let out = park_matrix(theta.radians()) * Vector3::new(x.a, x.b, x.c);
    (DqVector::new(out[0], out[1], Frame::LocalDq), out[2])
}

/// Inverse Park transform: reconstructs the three-phase signal from a dq
/// vector and its zero-sequence component. Exact inverse of [`park`].
pub fn inverse_park(theta: Angle, x: DqVector, zero_component: f64) -> AbcSignal {
    let out =
        park_matrix(theta.radians()).transpose() * Vector3::new(x.d, x.q, zero_component);
    AbcSignal::new(out[0], out[1], out[2])
}

/// Rotation from a local dq frame leading the synchronous frame by `delta`:
/// `T(delta) = [[cos, -sin], [sin, cos]]`. Satisfies `T^-1 = T^T`,
/// `J T = T J`, and `dT/d delta = -J T`.
pub fn rotation(delta: Angle) -> Matrix2<f64> {
    rotation_raw(delta.radians())
}

/// [`rotation`] on a raw unwrapped angle, for use inside integration loops.
pub fn rotation_raw(delta: f64) -> Matrix2<f64> {
    let (s, c) = delta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Derivative of [`rotation_raw`] with respect to the angle: `-J * T(delta)`.
pub fn rotation_deriv_raw(delta: f64) -> Matrix2<f64> {
    -j() * rotation_raw(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn angle_wraps_idempotently() {
        let a = Angle::new(7.0 * TAU + 1.25);
        assert_abs_diff_eq!(a.radians(), 1.25, epsilon = 1e-11);
        assert_abs_diff_eq!(Angle::new(a.radians()).radians(), a.radians());
        assert_abs_diff_eq!(Angle::new(-1.0).radians(), TAU - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn park_of_zero_is_zero() {
        let (dq, zero) = park(Angle::new(0.0), &AbcSignal::new(0.0, 0.0, 0.0));
        assert_eq!((dq.d, dq.q, zero), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aligned_symmetric_signal_lands_on_d_axis() {
        let amp = 17.3;
        for theta in [0.3, 1.7, 5.0] {
            let x = AbcSignal::symmetric(amp, theta);
            let (dq, zero) = park(Angle::new(theta), &x);
            assert_abs_diff_eq!(dq.d, (1.5f64).sqrt() * amp, epsilon = 1e-12 * amp);
            assert_abs_diff_eq!(dq.q, 0.0, epsilon = 1e-12 * amp);
            assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-12 * amp);
        }
    }

    #[test]
    fn phase_offset_becomes_dq_phasor() {
        let (amp, theta, alpha) = (311.0, 2.1, 0.7);
        let x = AbcSignal::symmetric(amp, theta + alpha);
        let (dq, _) = park(Angle::new(theta), &x);
        let mag = (1.5f64).sqrt() * amp;
        assert_abs_diff_eq!(dq.d, mag * alpha.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(dq.q, mag * alpha.sin(), epsilon = 1e-9);
    }

    #[test]
    fn inverse_park_round_trips() {
        let x = AbcSignal::new(1.0, 2.0, 3.0);
        let theta = Angle::new(0.7);
        let (dq, zero) = park(theta, &x);
        let back = inverse_park(theta, dq, zero);
        assert_abs_diff_eq!(back.a, x.a, epsilon = 1e-12);
        assert_abs_diff_eq!(back.b, x.b, epsilon = 1e-12);
        assert_abs_diff_eq!(back.c, x.c, epsilon = 1e-12);
    }

    #[test]
    fn rotation_identities() {
        let t = rotation(Angle::new(0.0));
        assert_abs_diff_eq!(t, Matrix2::identity(), epsilon = 1e-15);
        for delta in [0.0, 0.4, 2.0, 5.9] {
            let t = rotation_raw(delta);
            assert_abs_diff_eq!(t.determinant(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(t.transpose() * t, Matrix2::identity(), epsilon = 1e-12);
            assert_abs_diff_eq!(j() * t, t * j(), epsilon = 1e-12);
            let h = 1e-6;
            let fd = (rotation_raw(delta + h) - rotation_raw(delta - h)) / (2.0 * h);
            assert_abs_diff_eq!(rotation_deriv_raw(delta), fd, epsilon = 1e-8);
        }
    }

    #[test]
    #[should_panic(expected = "frame mismatch")]
    fn mixed_frame_arithmetic_panics() {
        let a = DqVector::new(1.0, 0.0, Frame::LocalDq);
        let b = DqVector::new(0.0, 1.0, Frame::SynchronousDq);
        let _ = a + b;
    }
}
