//! Killing vector fields on E³ and the Lorentz force they generate.
//!
//! For a Killing field `V` the Lorentz force acts on velocities as
//! `Φ(X) = V × X`, so the magnetic trajectories solve `γ'' = V × γ'`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const EX: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const EY: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const EZ: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        cross(self, o)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

/// Right-handed cross product, `e_x × e_y = e_z`.
#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    Vec3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// Position and velocity; the state of the second-order Lorentz equation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State6 {
    pub pos: Vec3,
    pub vel: Vec3,
}

impl State6 {
    pub const fn new(pos: Vec3, vel: Vec3) -> Self {
        Self { pos, vel }
    }

    /// Ordered as `x0, y0, z0, u0, v0, w0`.
    pub fn from_slice(v: &[f64; 6]) -> Self {
        Self::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
    }

    pub fn to_array(self) -> [f64; 6] {
        [
            self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z,
        ]
    }

    pub fn speed(&self) -> f64 {
        self.vel.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Coordinates in the cyclically permuted frame where this axis plays
    /// the role of `z`. Orientation preserving, so it commutes with `×`.
    pub fn to_canonical(self, v: Vec3) -> Vec3 {
        match self {
            Axis::Z => v,
            Axis::X => Vec3::new(v.y, v.z, v.x),
            Axis::Y => Vec3::new(v.z, v.x, v.y),
        }
    }

    pub fn from_canonical(self, v: Vec3) -> Vec3 {
        match self {
            Axis::Z => v,
            Axis::X => Vec3::new(v.z, v.x, v.y),
            Axis::Y => Vec3::new(v.y, v.z, v.x),
        }
    }

    pub fn state_to_canonical(self, s: State6) -> State6 {
        State6::new(self.to_canonical(s.pos), self.to_canonical(s.vel))
    }

    pub fn state_from_canonical(self, s: State6) -> State6 {
        State6::new(self.from_canonical(s.pos), self.from_canonical(s.vel))
    }

    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => Vec3::EX,
            Axis::Y => Vec3::EY,
            Axis::Z => Vec3::EZ,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// The Killing fields of E³ used as magnetic fields.
///
/// `Rotation(Z)` is `-y ∂x + x ∂y`; `Translation(Z, s)` is `s ∂z`. The other
/// axes follow by the cyclic permutation `x → y → z → x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KillingField {
    Translation { axis: Axis, strength: f64 },
    Rotation { axis: Axis },
}

impl KillingField {
    pub fn axis(&self) -> Axis {
        match *self {
            KillingField::Translation { axis, .. } | KillingField::Rotation { axis } => axis,
        }
    }

    /// The same field expressed in the canonical (axis = Z) frame.
    pub fn canonical(&self) -> KillingField {
        match *self {
            KillingField::Translation { strength, .. } => KillingField::Translation {
                axis: Axis::Z,
                strength,
            },
            KillingField::Rotation { .. } => KillingField::Rotation { axis: Axis::Z },
        }
    }
}

impl fmt::Display for KillingField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KillingField::Translation { axis, strength } => write!(f, "trans-{axis}(s={strength})"),
            KillingField::Rotation { axis } => write!(f, "rot-{axis}"),
        }
    }
}

/// A vector field with an exact Jacobian, `jacobian[i][j] = ∂V_i/∂x_j`.
pub trait VectorField {
    fn eval(&self, p: Vec3) -> Vec3;
    fn jacobian(&self, p: Vec3) -> [[f64; 3]; 3];
}

impl VectorField for KillingField {
    fn eval(&self, p: Vec3) -> Vec3 {
        eval_field(self, p)
    }

    fn jacobian(&self, _p: Vec3) -> [[f64; 3]; 3] {
        match *self {
            KillingField::Translation { .. } => [[0.0; 3]; 3],
            KillingField::Rotation { .. } => {
                // Columns are the images of the basis vectors.
                let mut j = [[0.0; 3]; 3];
                for (col, e) in [Vec3::EX, Vec3::EY, Vec3::EZ].into_iter().enumerate() {
                    let img = eval_field(self, e).to_array();
                    for (row, v) in img.into_iter().enumerate() {
                        j[row][col] = v;
                    }
                }
                j
            }
        }
    }
}

pub fn eval_field(f: &KillingField, p: Vec3) -> Vec3 {
    match *f {
        KillingField::Translation { axis, strength } => axis.unit() * strength,
        KillingField::Rotation { axis } => {
            let c = axis.to_canonical(p);
            axis.from_canonical(Vec3::new(-c.y, c.x, 0.0))
        }
    }
}

/// `Φ(w) = V(p) × w`.
pub fn lorentz_force(f: &KillingField, p: Vec3, w: Vec3) -> Vec3 {
    cross(eval_field(f, p), w)
}

/// Right-hand side of the first-order system `(γ, γ')' = (γ', V × γ')`.
pub fn magnetic_rhs(f: &KillingField, s: &State6) -> State6 {
    State6::new(s.vel, lorentz_force(f, s.pos, s.vel))
}

/// Largest `|⟨∇_Y V, Z⟩ + ⟨∇_Z V, Y⟩|` over the samples; zero for Killing fields.
pub fn verify_killing<F: VectorField + ?Sized>(
    f: &F,
    sample_points: &[Vec3],
    sample_vectors: &[Vec3],
) -> f64 {
    let apply = |j: &[[f64; 3]; 3], v: Vec3| {
        let a = v.to_array();
        Vec3::new(
            j[0][0] * a[0] + j[0][1] * a[1] + j[0][2] * a[2],
            j[1][0] * a[0] + j[1][1] * a[1] + j[1][2] * a[2],
            j[2][0] * a[0] + j[2][1] * a[1] + j[2][2] * a[2],
        )
    };
    let mut worst = 0.0_f64;
    for &p in sample_points {
        let j = f.jacobian(p);
        for &y in sample_vectors {
            for &z in sample_vectors {
                let r = apply(&j, y).dot(z) + apply(&j, z).dot(y);
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ROT_Z: KillingField = KillingField::Rotation { axis: Axis::Z };

    /// x ∂x, a non-Killing field.
    struct RadialX;

    impl VectorField for RadialX {
        fn eval(&self, p: Vec3) -> Vec3 {
            Vec3::new(p.x, 0.0, 0.0)
        }
        fn jacobian(&self, _p: Vec3) -> [[f64; 3]; 3] {
            [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]
        }
    }

    #[test]
    fn cross_examples() {
        assert_eq!(cross(Vec3::EX, Vec3::EY), Vec3::EZ);
        let a = Vec3::new(0.3, -1.2, 7.0);
        assert_eq!(cross(a, a), Vec3::ZERO);
        assert_eq!(
            cross(Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)),
            Vec3::new(-3.0, 6.0, -3.0)
        );
    }

    #[test]
    fn field_examples() {
        assert_eq!(eval_field(&ROT_Z, Vec3::new(2.0, 0.0, 5.0)), Vec3::new(0.0, 2.0, 0.0));
        let t = KillingField::Translation { axis: Axis::Z, strength: 3.0 };
        assert_eq!(eval_field(&t, Vec3::new(9.0, -1.0, 4.0)), Vec3::new(0.0, 0.0, 3.0));
        // -z ∂y + y ∂z
        let rx = KillingField::Rotation { axis: Axis::X };
        assert_eq!(eval_field(&rx, Vec3::new(1.0, 2.0, 3.0)), Vec3::new(0.0, -3.0, 2.0));
        // z ∂x - x ∂z
        let ry = KillingField::Rotation { axis: Axis::Y };
        assert_eq!(eval_field(&ry, Vec3::new(1.0, 2.0, 3.0)), Vec3::new(3.0, 0.0, -1.0));
    }

    #[test]
    fn lorentz_force_table() {
        let p = Vec3::new(1.5, -0.7, 2.0);
        assert_eq!(lorentz_force(&ROT_Z, p, Vec3::EX), Vec3::new(0.0, 0.0, -p.x));
        assert_eq!(lorentz_force(&ROT_Z, p, Vec3::EY), Vec3::new(0.0, 0.0, -p.y));
        assert_eq!(lorentz_force(&ROT_Z, p, Vec3::EZ), Vec3::new(p.x, p.y, 0.0));

        let s = 2.5;
        let xi = KillingField::Translation { axis: Axis::Z, strength: s };
        assert_eq!(lorentz_force(&xi, p, Vec3::EX), Vec3::new(0.0, s, 0.0));
        assert_eq!(lorentz_force(&xi, p, Vec3::EY), Vec3::new(-s, 0.0, 0.0));
        assert_eq!(lorentz_force(&xi, p, Vec3::EZ), Vec3::ZERO);
    }

    #[test]
    fn rhs_examples() {
        let s = State6::new(Vec3::new(2.0, 0.0, 0.0), Vec3::EZ);
        let d = magnetic_rhs(&ROT_Z, &s);
        assert_eq!(d.pos, Vec3::EZ);
        assert_eq!(d.vel, Vec3::new(2.0, 0.0, 0.0));

        let on_axis = State6::new(Vec3::new(0.0, 0.0, 4.0), Vec3::new(0.6, 0.0, 0.8));
        assert_eq!(magnetic_rhs(&ROT_Z, &on_axis).vel, Vec3::ZERO);

        let t = KillingField::Translation { axis: Axis::Z, strength: 2.0 };
        let s = State6::new(Vec3::ZERO, Vec3::EX);
        assert_eq!(magnetic_rhs(&t, &s).vel, Vec3::new(0.0, 2.0, 0.0));
    }

    #[test]
    fn rhs_matches_component_system() {
        // x'' = x z', y'' = y z', z'' = -(x x' + y y')
        let s = State6::new(Vec3::new(0.4, -1.3, 2.2), Vec3::new(0.48, 0.6, 0.64));
        let a = magnetic_rhs(&ROT_Z, &s).vel;
        let (p, v) = (s.pos, s.vel);
        assert!((a.x - p.x * v.z).abs() < 1e-15);
        assert!((a.y - p.y * v.z).abs() < 1e-15);
        assert!((a.z + p.x * v.x + p.y * v.y).abs() < 1e-15);
    }

    #[test]
    fn killing_residuals() {
        let pts = [Vec3::ZERO, Vec3::new(1.0, -2.0, 0.5), Vec3::new(3.0, 3.0, -3.0)];
        let vecs = [Vec3::EX, Vec3::EY, Vec3::EZ, Vec3::new(0.3, -0.1, 2.0)];
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            assert_eq!(verify_killing(&KillingField::Rotation { axis }, &pts, &vecs), 0.0);
            let t = KillingField::Translation { axis, strength: -1.7 };
            assert_eq!(verify_killing(&t, &pts, &vecs), 0.0);
        }
        assert_eq!(verify_killing(&RadialX, &pts[..1], &[Vec3::EX]), 2.0);
    }

    #[test]
    fn permutation_round_trip() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            assert_eq!(axis.from_canonical(axis.to_canonical(v)), v);
            assert_eq!(axis.to_canonical(axis.unit()), Vec3::EZ);
        }
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0, -5.0..5.0, -5.0..5.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn field() -> impl Strategy<Value = KillingField> {
        prop_oneof![
            prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
                .prop_map(|axis| KillingField::Rotation { axis }),
            (prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)], -4.0..4.0)
                .prop_map(|(axis, strength)| KillingField::Translation { axis, strength }),
        ]
    }

    proptest! {
        #[test]
        fn lorentz_force_is_skew(f in field(), p in vec3(), w in vec3()) {
            let force = lorentz_force(&f, p, w);
            let scale = eval_field(&f, p).norm() * w.norm() * w.norm();
            prop_assert!(force.dot(w).abs() <= 1e-15 * scale.max(1.0) * 4.0);
        }

        #[test]
        fn two_form_antisymmetry(p in vec3(), x in vec3(), y in vec3()) {
            let v = eval_field(&ROT_Z, p);
            let a = cross(v, x).dot(y);
            let b = cross(v, y).dot(x);
            prop_assert!((a + b).abs() <= 1e-13 * (1.0 + v.norm() * x.norm() * y.norm()));
        }

        #[test]
        fn cross_orthogonal_and_bilinear(a in vec3(), b in vec3(), c in vec3(), s in -3.0..3.0) {
            let ab = cross(a, b);
            let scale = a.norm() * b.norm();
            prop_assert!(ab.dot(a).abs() <= 1e-14 * scale * a.norm().max(1.0) * 10.0);
            prop_assert!(ab.dot(b).abs() <= 1e-14 * scale * b.norm().max(1.0) * 10.0);
            let lhs = cross(a * s + c, b);
            let rhs = cross(a, b) * s + cross(c, b);
            prop_assert!((lhs - rhs).max_abs() <= 1e-12);
        }
    }
}
