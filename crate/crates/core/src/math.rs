//! Rotation math shared by the planner dynamics, dataset sampling and the
//! tracking task.
//!
//! Euler angles follow the ZYX (yaw-pitch-roll) convention throughout:
//! `theta = (roll, pitch, yaw)` and `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Skew-symmetric cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

// Angle derivatives of the primitive rotations.
fn drot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

fn ddrot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-c, 0.0, -s, 0.0, 0.0, 0.0, s, 0.0, -c)
}

fn ddrot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0)
}

/// Rotation matrix for ZYX Euler angles `(roll, pitch, yaw)`.
pub fn rotation(theta: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(theta.z) * rot_y(theta.y) * rot_x(theta.x)
}

/// Partial derivatives of [`rotation`] with respect to each Euler angle.
pub fn rotation_partials(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let rx = rot_x(theta.x);
    let ry = rot_y(theta.y);
    let rz = rot_z(theta.z);
    [
        rz * ry * drot_x(theta.x),
        rz * drot_y(theta.y) * rx,
        drot_z(theta.z) * ry * rx,
    ]
}

/// Yaw-only rotation matrix.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    rot_z(yaw)
}

/// Derivative of [`yaw_rotation`] with respect to the yaw angle.
pub fn yaw_rotation_deriv(yaw: f64) -> Matrix3<f64> {
    drot_z(yaw)
}

/// Kinematic map from ZYX Euler-angle rates to the world angular velocity:
/// `omega = euler_rate_map(theta) * theta_dot`.
///
/// Columns are the world-frame axes each Euler rate rotates about:
/// `[Rz*Ry*ex, Rz*ey, ez]`.
pub fn euler_rate_map(theta: &Vector3<f64>) -> Matrix3<f64> {
    let c0 = rot_z(theta.z) * rot_y(theta.y) * Vector3::x();
    let c1 = rot_z(theta.z) * Vector3::y();
    Matrix3::from_columns(&[c0, c1, Vector3::z()])
}

/// Partials of [`euler_rate_map`] with respect to each Euler angle.
///
/// The map does not depend on roll, so the first entry is zero.
pub fn euler_rate_map_partials(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let zero = Vector3::zeros();
    let d_pitch = Matrix3::from_columns(&[
        rot_z(theta.z) * drot_y(theta.y) * Vector3::x(),
        zero,
        zero,
    ]);
    let d_yaw = Matrix3::from_columns(&[
        drot_z(theta.z) * rot_y(theta.y) * Vector3::x(),
        drot_z(theta.z) * Vector3::y(),
        zero,
    ]);
    [Matrix3::zeros(), d_pitch, d_yaw]
}

/// Second partials `d^2 C / d theta_a d theta_b` of [`euler_rate_map`].
///
/// Returned row-major over `(a, b)`; only pitch/yaw entries are nonzero.
pub fn euler_rate_map_second_partials(theta: &Vector3<f64>) -> [[Matrix3<f64>; 3]; 3] {
    let zero = Vector3::zeros();
    let mut out = [[Matrix3::zeros(); 3]; 3];
    // d^2/d pitch^2
    out[1][1] = Matrix3::from_columns(&[
        rot_z(theta.z) * ddrot_y(theta.y) * Vector3::x(),
        zero,
        zero,
    ]);
    // d^2/d pitch d yaw (symmetric)
    let cross = Matrix3::from_columns(&[
        drot_z(theta.z) * drot_y(theta.y) * Vector3::x(),
        zero,
        zero,
    ]);
    out[1][2] = cross;
    out[2][1] = cross;
    // d^2/d yaw^2
    out[2][2] = Matrix3::from_columns(&[
        ddrot_z(theta.z) * rot_y(theta.y) * Vector3::x(),
        ddrot_z(theta.z) * Vector3::y(),
        zero,
    ]);
    out
}

/// World angular velocity from Euler angles and their rates.
pub fn angular_velocity(theta: &Vector3<f64>, theta_dot: &Vector3<f64>) -> Vector3<f64> {
    euler_rate_map(theta) * theta_dot
}

/// Unit quaternion for ZYX Euler angles `(roll, pitch, yaw)`.
pub fn quaternion_from_euler(theta: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(theta.x, theta.y, theta.z)
}

/// Rotation-vector norm of the relative rotation `a^-1 * b`, in radians.
///
/// Zero iff the orientations match; symmetric in its arguments.
pub fn quaternion_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.rotation_to(b).angle()
}

/// FNV-1a hash of a byte slice, used for content fingerprints in manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_matrix<F: Fn(&Vector3<f64>) -> Matrix3<f64>>(
        f: F,
        theta: &Vector3<f64>,
        axis: usize,
    ) -> Matrix3<f64> {
        let h = 1e-6;
        let mut tp = *theta;
        let mut tm = *theta;
        tp[axis] += h;
        tm[axis] -= h;
        (f(&tp) - f(&tm)) / (2.0 * h)
    }

    #[test]
    fn rotation_partials_match_finite_differences() {
        let theta = Vector3::new(0.3, -0.5, 1.1);
        let parts = rotation_partials(&theta);
        for axis in 0..3 {
            let fd = fd_matrix(rotation, &theta, axis);
            assert_relative_eq!(parts[axis], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn rate_map_partials_match_finite_differences() {
        let theta = Vector3::new(0.2, 0.4, -0.7);
        let parts = euler_rate_map_partials(&theta);
        for axis in 0..3 {
            let fd = fd_matrix(euler_rate_map, &theta, axis);
            assert_relative_eq!(parts[axis], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn rate_map_second_partials_match_finite_differences() {
        let theta = Vector3::new(-0.1, 0.6, 0.9);
        let second = euler_rate_map_second_partials(&theta);
        for a in 0..3 {
            for b in 0..3 {
                let fd = fd_matrix(|t| euler_rate_map_partials(t)[a], &theta, b);
                assert_relative_eq!(second[a][b], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn angular_velocity_matches_quaternion_derivative() {
        // omega from the rate map must match the rotation of the frame axes.
        let theta = Vector3::new(0.1, 0.2, 0.3);
        let theta_dot = Vector3::new(0.5, -0.2, 0.8);
        let h = 1e-7;
        let r0 = rotation(&(theta - theta_dot * h));
        let r1 = rotation(&(theta + theta_dot * h));
        let rdot = (r1 - r0) / (2.0 * h);
        let omega_hat = rdot * rotation(&theta).transpose();
        let omega = angular_velocity(&theta, &theta_dot);
        assert_relative_eq!(omega_hat, skew(&omega), epsilon = 1e-6);
    }

    #[test]
    fn quaternion_distance_half_turn() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::PI);
        assert_relative_eq!(quaternion_distance(&a, &b), std::f64::consts::PI);
        assert_eq!(quaternion_distance(&a, &a), 0.0);
    }
}
