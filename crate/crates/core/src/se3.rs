//! Rigid-body transforms and the exposure-time pose interpolation used to
//! synthesize motion blur.
//!
//! Rotations are stored as 3x3 matrices; pose updates during optimization go
//! through twist coordinates, so gradients never touch raw matrix entries.
//! The exp/log/interpolate chain is generic over [`Real`] which lets the
//! optimizer run it on dual numbers to get exact twist Jacobians.

use crate::error::{Error, Result};
use crate::math::{Mat3, Real, Vec3};

/// Rigid transform: `x_world = rotation * x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

/// Element of the tangent algebra: rotation part `omega` (axis-angle,
/// `|omega| < pi`) and translation part `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    omega: Vec3,
    v: Vec3,
}

impl Twist {
    /// Principal-branch constraint enforced here so `se3_exp` has no error path.
    pub fn new(omega: Vec3, v: Vec3) -> Result<Self> {
        if !omega.is_finite() || !v.is_finite() {
            return Err(Error::TwistOutOfRange(f64::NAN));
        }
        let angle = omega.norm();
        if angle >= std::f64::consts::PI {
            return Err(Error::TwistOutOfRange(angle));
        }
        Ok(Twist { omega, v })
    }

    pub fn zero() -> Self {
        Twist { omega: Vec3::ZERO, v: Vec3::ZERO }
    }

    pub fn omega(&self) -> Vec3 {
        self.omega
    }

    pub fn v(&self) -> Vec3 {
        self.v
    }

    pub fn from_coords(c: &[f64; 6]) -> Result<Self> {
        Twist::new(Vec3::new(c[0], c[1], c[2]), Vec3::new(c[3], c[4], c[5]))
    }

    pub fn to_coords(&self) -> [f64; 6] {
        [self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z]
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rotation: Mat3::IDENTITY, translation: Vec3::ZERO }
    }

    /// Validates the orthonormality and determinant invariants (1e-9 per element).
    pub fn from_parts(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let rtr = rotation.transpose().mul_mat(&rotation);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (rtr.m[i][j] - expect).abs() > 1e-9 {
                    return Err(Error::InvalidPose(format!(
                        "R^T R deviates from identity at ({i},{j}) by {}",
                        (rtr.m[i][j] - expect).abs()
                    )));
                }
            }
        }
        if (rotation.det() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPose(format!("det(R) = {}", rotation.det())));
        }
        if !translation.is_finite() {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(Pose { rotation, translation })
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.mul_vec(v)
    }

    /// 4x4 row-major homogeneous matrix (dataset serialization format).
    pub fn to_matrix4(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation.m;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn from_matrix4(m: &[[f64; 4]; 4]) -> Result<Self> {
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidPose("last row must be [0,0,0,1]".into()));
        }
        let rotation = Mat3 {
            m: [
                [m[0][0], m[0][1], m[0][2]],
                [m[1][0], m[1][1], m[1][2]],
                [m[2][0], m[2][1], m[2][2]],
            ],
        };
        Pose::from_parts(rotation, Vec3::new(m[0][3], m[1][3], m[2][3]))
    }
}

// ---------------------------------------------------------------------------
// Generic internals. `R3<S>` / `M3<S>` mirror Vec3/Mat3 over any Real scalar.
// ---------------------------------------------------------------------------

type R3<S> = [S; 3];
type M3<S> = [[S; 3]; 3];

#[derive(Clone, Copy, Debug)]
pub(crate) struct PoseG<S: Real> {
    pub r: M3<S>,
    pub t: R3<S>,
}

pub(crate) fn lift<S: Real>(p: &Pose) -> PoseG<S> {
    let mut r = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = S::from_f64(p.rotation.m[i][j]);
        }
    }
    let t = p.translation;
    PoseG { r, t: [S::from_f64(t.x), S::from_f64(t.y), S::from_f64(t.z)] }
}

fn mat_vec<S: Real>(m: &M3<S>, v: &R3<S>) -> R3<S> {
    let mut out = [S::from_f64(0.0); 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

fn mat_mat<S: Real>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    let mut out = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn skew<S: Real>(w: &R3<S>) -> M3<S> {
    let z = S::from_f64(0.0);
    [
        [z, -w[2], w[1]],
        [w[2], z, -w[0]],
        [-w[1], w[0], z],
    ]
}

fn add3<S: Real>(a: &R3<S>, b: &R3<S>) -> R3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3<S: Real>(a: &R3<S>, s: S) -> R3<S> {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Coefficients of the Rodrigues/translation series as functions of theta^2.
/// Branch threshold matches the documented small-angle cutoff |omega| < 1e-8;
/// series are carried to second order which is exact to f64 there.
fn exp_coeffs<S: Real>(theta_sq: S) -> (S, S, S) {
    let c = |x: f64| S::from_f64(x);
    if theta_sq.val() < 1e-16 {
        // sin(t)/t, (1-cos t)/t^2, (t - sin t)/t^3
        let a = c(1.0) - theta_sq / c(6.0) + theta_sq * theta_sq / c(120.0);
        let b = c(0.5) - theta_sq / c(24.0) + theta_sq * theta_sq / c(720.0);
        let d = c(1.0 / 6.0) - theta_sq / c(120.0) + theta_sq * theta_sq / c(5040.0);
        (a, b, d)
    } else {
        let theta = theta_sq.sqrt();
        let s = theta.sin();
        let a = s / theta;
        // (1 - cos t)/t^2 as a half-angle square: no cancellation anywhere
        let half_sinc = (theta * c(0.5)).sin() / theta;
        let b = c(2.0) * half_sinc * half_sinc;
        let d = (theta - s) / (theta_sq * theta);
        (a, b, d)
    }
}

pub(crate) fn exp_g<S: Real>(omega: &R3<S>, v: &R3<S>) -> PoseG<S> {
    let theta_sq = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    let (a, b, d) = exp_coeffs(theta_sq);
    let k = skew(omega);
    let kk = mat_mat(&k, &k);
    let mut r = [[S::from_f64(0.0); 3]; 3];
    let mut vmat = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = S::from_f64(if i == j { 1.0 } else { 0.0 });
            r[i][j] = id + a * k[i][j] + b * kk[i][j];
            vmat[i][j] = id + b * k[i][j] + d * kk[i][j];
        }
    }
    PoseG { r, t: mat_vec(&vmat, v) }
}

pub(crate) fn log_g<S: Real>(p: &PoseG<S>) -> Result<(R3<S>, R3<S>)> {
    let c = |x: f64| S::from_f64(x);
    let r = &p.r;
    // a = vee(R - R^T)/2 has norm sin(theta); cos(theta) from the trace.
    let a = [
        (r[2][1] - r[1][2]) * c(0.5),
        (r[0][2] - r[2][0]) * c(0.5),
        (r[1][0] - r[0][1]) * c(0.5),
    ];
    let sin_sq = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    let cos_t = (r[0][0] + r[1][1] + r[2][2] - c(1.0)) * c(0.5);

    let angle = sin_sq.val().sqrt().atan2(cos_t.val());
    if angle >= std::f64::consts::PI - 1e-6 {
        return Err(Error::AngleAtBranchCut);
    }

    // omega = a * theta/sin(theta); eta is the V^{-1} quadratic coefficient.
    // The general eta formula cancels catastrophically for small angles
    // (numerator ~ theta^2/12 computed as 1 - (1 - theta^2/12)), so small
    // rotations use series in sin^2; the near-pi regime (sin small, cos
    // negative) stays on the general branch where it is well conditioned.
    let (omega, eta) = if sin_sq.val() < 1e-4 && cos_t.val() > 0.0 {
        // theta = asin(s): k = theta/s = 1 + s^2/6 + 3 s^4/40 + ...
        let k = c(1.0) + sin_sq / c(6.0) + sin_sq * sin_sq * c(3.0 / 40.0);
        let eta = c(1.0 / 12.0) + sin_sq / c(720.0);
        (scale3(&a, k), eta)
    } else {
        let sin_t = sin_sq.sqrt();
        let theta = sin_t.atan2(cos_t);
        let k = theta / sin_t;
        let theta_sq = theta * theta;
        // eta = (1 - (theta/2) cot(theta/2)) / theta^2, with
        // cot(theta/2) = sin(theta) / (1 - cos(theta))
        let eta = (c(1.0) - theta * sin_t / (c(2.0) * (c(1.0) - cos_t))) / theta_sq;
        (scale3(&a, k), eta)
    };

    let k = skew(&omega);
    let kk = mat_mat(&k, &k);
    let mut vinv = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = S::from_f64(if i == j { 1.0 } else { 0.0 });
            vinv[i][j] = id - k[i][j] * c(0.5) + eta * kk[i][j];
        }
    }
    Ok((omega, mat_vec(&vinv, &p.t)))
}

pub(crate) fn compose_g<S: Real>(a: &PoseG<S>, b: &PoseG<S>) -> PoseG<S> {
    PoseG {
        r: mat_mat(&a.r, &b.r),
        t: add3(&mat_vec(&a.r, &b.t), &a.t),
    }
}

pub(crate) fn inverse_g<S: Real>(p: &PoseG<S>) -> PoseG<S> {
    let mut rt = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rt[i][j] = p.r[j][i];
        }
    }
    let nt = mat_vec(&rt, &p.t);
    PoseG { r: rt, t: [-nt[0], -nt[1], -nt[2]] }
}

pub(crate) fn interpolate_g<S: Real>(start: &PoseG<S>, end: &PoseG<S>, fraction: S) -> Result<PoseG<S>> {
    let rel = compose_g(&inverse_g(start), end);
    let (omega, v) = log_g(&rel)?;
    let scaled = exp_g(&scale3(&omega, fraction), &scale3(&v, fraction));
    Ok(compose_g(start, &scaled))
}

fn lower<S: Real>(p: &PoseG<S>) -> Pose {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = p.r[i][j].val();
        }
    }
    Pose {
        rotation: Mat3 { m },
        translation: Vec3::new(p.t[0].val(), p.t[1].val(), p.t[2].val()),
    }
}

// ---------------------------------------------------------------------------
// Public f64 API
// ---------------------------------------------------------------------------

/// Closed-form exponential: Rodrigues rotation plus left-Jacobian translation.
pub fn se3_exp(xi: &Twist) -> Pose {
    let o = xi.omega.to_array();
    let v = xi.v.to_array();
    lower(&exp_g::<f64>(&o, &v))
}

/// Inverse of [`se3_exp`]; rejects rotations at the branch cut.
pub fn se3_log(pose: &Pose) -> Result<Twist> {
    let (omega, v) = log_g(&lift::<f64>(pose))?;
    Ok(Twist {
        omega: Vec3::from_array(omega),
        v: Vec3::from_array(v),
    })
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    lower(&compose_g(&lift::<f64>(a), &lift::<f64>(b)))
}

pub fn inverse(p: &Pose) -> Pose {
    lower(&inverse_g(&lift::<f64>(p)))
}

/// Geodesic between two poses: `start * exp(fraction * log(start^-1 * end))`.
/// `fraction = 0` reproduces `start` bit-for-bit.
pub fn interpolate_pose(start: &Pose, end: &Pose, fraction: f64) -> Result<Pose> {
    debug_assert!((0.0..=1.0).contains(&fraction), "fraction outside [0,1]");
    Ok(lower(&interpolate_g(
        &lift::<f64>(start),
        &lift::<f64>(end),
        fraction,
    )?))
}

/// Exposure pose as a function of the twelve twist coordinates
/// `[delta_start; delta_end]` applied on the right of the initial estimates:
/// `T_t = (A exp(ds)) * exp(f * log((A exp(ds))^-1 (B exp(de))))`.
///
/// Returns the pose and the exact Jacobian of its matrix entries
/// (row-major rotation then translation) with respect to the twist
/// coordinates, computed by forward-mode dual numbers, one seeded
/// coordinate per pass.
pub fn interpolated_pose_jacobian(
    init_start: &Pose,
    init_end: &Pose,
    twists: &[f64; 12],
    fraction: f64,
) -> Result<(Pose, [[f64; 12]; 12])> {
    use crate::math::Dual;

    let mut jac = [[0.0; 12]; 12];
    let mut value: Option<Pose> = None;
    for lane in 0..12 {
        let coord = |i: usize| {
            if i == lane {
                Dual::variable(twists[i])
            } else {
                Dual::constant(twists[i])
            }
        };
        let ds_omega = [coord(0), coord(1), coord(2)];
        let ds_v = [coord(3), coord(4), coord(5)];
        let de_omega = [coord(6), coord(7), coord(8)];
        let de_v = [coord(9), coord(10), coord(11)];
        let start = compose_g(&lift::<Dual>(init_start), &exp_g(&ds_omega, &ds_v));
        let end = compose_g(&lift::<Dual>(init_end), &exp_g(&de_omega, &de_v));
        let pose = interpolate_g(&start, &end, Dual::constant(fraction))?;
        for i in 0..3 {
            for j in 0..3 {
                jac[3 * i + j][lane] = pose.r[i][j].d;
            }
        }
        for i in 0..3 {
            jac[9 + i][lane] = pose.t[i].d;
        }
        if value.is_none() {
            value = Some(lower(&pose));
        }
    }
    Ok((value.expect("twelve lanes ran"), jac))
}

/// The interpolated pose without derivatives (same arithmetic path as
/// [`interpolated_pose_jacobian`]).
pub fn interpolated_pose(
    init_start: &Pose,
    init_end: &Pose,
    twists: &[f64; 12],
    fraction: f64,
) -> Result<Pose> {
    let ds = Twist::from_coords(&twists[..6].try_into().expect("6 coords"))?;
    let de = Twist::from_coords(&twists[6..].try_into().expect("6 coords"))?;
    let start = compose(init_start, &se3_exp(&ds));
    let end = compose(init_end, &se3_exp(&de));
    interpolate_pose(&start, &end, fraction)
}
