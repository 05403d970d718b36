use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance below which a vector is already considered unit length and is
/// not renormalized. Keeps [`UnitQuaternion::canonicalize`] bitwise idempotent.
const UNIT_SLACK: f64 = 8.0 * f64::EPSILON;

/// A unit quaternion in sign-canonical form: `w > 0`, or `w == 0` and the
/// first nonzero of `(x, y, z)` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalize `v = (w, x, y, z)` and fix its sign.
    pub fn canonicalize(v: [f64; 4]) -> Result<Self> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidQuaternion(format!("non-finite component in {v:?}")));
        }
        let n2 = v.iter().map(|c| c * c).sum::<f64>();
        if n2 == 0.0 {
            return Err(Error::InvalidQuaternion("zero-norm vector".into()));
        }
        let mut q = v;
        if (n2 - 1.0).abs() > UNIT_SLACK {
            let n = n2.sqrt();
            for c in &mut q {
                *c /= n;
            }
        }
        let flip = if q[0] != 0.0 {
            q[0] < 0.0
        } else {
            q[1..].iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        if flip {
            for c in &mut q {
                *c = -*c;
            }
        }
        // -0.0 -> 0.0 so that equal rotations compare equal bitwise.
        for c in &mut q {
            *c += 0.0;
        }
        Ok(Self {
            w: q[0],
            x: q[1],
            y: q[2],
            z: q[3],
        })
    }

    /// Rotation of `angle_rad` about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle_rad: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return if angle_rad == 0.0 {
                Ok(Self::IDENTITY)
            } else {
                Err(Error::InvalidQuaternion("zero rotation axis".into()))
            };
        }
        let (s, c) = (0.5 * angle_rad).sin_cos();
        Self::canonicalize([c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n])
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Hamilton product `self * rhs`, re-canonicalized.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        let raw = [
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        ];
        // The product of unit quaternions is unit up to rounding.
        Self::canonicalize(raw).unwrap_or(Self::IDENTITY)
    }

    /// Rotate a 3-vector.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
        let u = [self.x, self.y, self.z];
        let t = cross(u, v).map(|c| 2.0 * c);
        let ut = cross(u, t);
        [
            v[0] + self.w * t[0] + ut[0],
            v[1] + self.w * t[1] + ut[1],
            v[2] + self.w * t[2] + ut[2],
        ]
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.abs().clamp(0.0, 1.0).acos()
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::canonicalize(v)
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.to_array()
    }
}

/// Geodesic angle between two rotations, in degrees, in `[0, 180]`.
///
/// Equal to `2 acos(|<a, b>|)`, evaluated as `4 atan2(|a - sb|, |a + sb|)` with
/// `s = sign(<a, b>)`, which stays accurate for nearly equal rotations and is
/// exactly zero for equal arguments.
pub fn geodesic_angle_deg(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let s = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
    let (va, vb) = (a.to_array(), b.to_array());
    let mut diff = 0.0;
    let mut sum = 0.0;
    for k in 0..4 {
        diff += (va[k] - s * vb[k]).powi(2);
        sum += (va[k] + s * vb[k]).powi(2);
    }
    (4.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees()
}
