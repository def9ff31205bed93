//! Conserved quantities, the radial cubic and the trajectory taxonomy for
//! the rotational field `V = -y ∂x + x ∂y`.
//!
//! Along a magnetic curve of `V` the quantities
//! `p0 = x0 v0 - u0 y0` and `q0 = (x0² + y0²)/2 + w0` fix the squared radius
//! `f = ρ²` through `f'² + P(f) = 0` with
//! `P(f) = f³ - 4 q0 f² + 4 (q0² - 1) f + 4 p0²`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fields::{KillingField, State6};
use crate::{Error, Result};

/// Snapping tolerance for the measure-zero branches (`p0 = 0`, `q0 = 1`,
/// the helix relations).
pub const EPS_CLASS: f64 = 1e-9;
/// Initial radius below which the start is treated as lying on the axis.
pub const EPS_AXIS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialInvariants {
    pub p0: f64,
    pub q0: f64,
    pub rho0: f64,
    pub phi0: f64,
    pub z0: f64,
}

/// Invariants of an initial condition given in the canonical (axis `z`) frame.
pub fn invariants_from_ic(ic: &State6) -> InitialInvariants {
    let (p, v) = (ic.pos, ic.vel);
    let rho0 = p.x.hypot(p.y);
    InitialInvariants {
        p0: p.x * v.y - v.x * p.y,
        q0: 0.5 * (p.x * p.x + p.y * p.y) + v.z,
        rho0,
        phi0: if rho0 > 0.0 { p.y.atan2(p.x) } else { 0.0 },
        z0: p.z,
    }
}

/// The cubic `P(f)` with its discriminant and real roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicProfile {
    pub p0: f64,
    pub q0: f64,
    /// Coefficients of `f³, f², f, 1`.
    pub coeffs: [f64; 4],
    pub delta: f64,
    /// Distinct real roots, ascending. Three when `delta > 0`, one when
    /// `delta < 0`, two (simple and double) when `delta == 0`.
    pub real_roots: Vec<f64>,
}

impl CubicProfile {
    pub fn eval(&self, f: f64) -> f64 {
        let [a, b, c, d] = self.coeffs;
        ((a * f + b) * f + c) * f + d
    }

    pub fn derivative(&self, f: f64) -> f64 {
        let [a, b, c, _] = self.coeffs;
        (3.0 * a * f + 2.0 * b) * f + c
    }
}

pub fn discriminant(p0: f64, q0: f64) -> f64 {
    let p2 = p0 * p0;
    let q2m1 = q0 * q0 - 1.0;
    -16.0 * (27.0 * p2 * p2 + 8.0 * p2 * q0 * (q0 * q0 - 9.0) - 16.0 * q2m1 * q2m1)
}

pub fn cubic_profile(inv: &InitialInvariants) -> CubicProfile {
    cubic_profile_pq(inv.p0, inv.q0)
}

/// Roots by the trigonometric (or hyperbolic) solution of the depressed
/// cubic, each followed by one Newton step. The number of roots follows the
/// sign of the closed-form discriminant.
pub fn cubic_profile_pq(p0: f64, q0: f64) -> CubicProfile {
    let coeffs = [1.0, -4.0 * q0, 4.0 * (q0 * q0 - 1.0), 4.0 * p0 * p0];
    let delta = discriminant(p0, q0);

    // f = y + 4 q0 / 3 gives y³ + p y + q with p < 0 for every q0.
    let shift = 4.0 * q0 / 3.0;
    let p = -(4.0 * q0 * q0 + 12.0) / 3.0;
    let q = (16.0 * q0 * q0 * q0 - 144.0 * q0) / 27.0 + 4.0 * p0 * p0;
    let m = 2.0 * (-p / 3.0).sqrt();

    let mut roots: Vec<f64> = if delta > 0.0 {
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() + shift)
            .collect()
    } else if delta < 0.0 {
        let arg = (-3.0 * q.abs() / (p * m)).max(1.0);
        vec![-q.signum() * m * (arg.acosh() / 3.0).cosh() + shift]
    } else {
        vec![3.0 * q / p + shift, -1.5 * q / p + shift]
    };

    let mut profile = CubicProfile {
        p0,
        q0,
        coeffs,
        delta,
        real_roots: Vec::new(),
    };
    for r in roots.iter_mut() {
        let d = profile.derivative(*r);
        if d != 0.0 {
            let step = profile.eval(*r) / d;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    profile.real_roots = roots;
    profile
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonExistenceReason {
    /// `Δ > 0` but every root of `P` is negative (`q0 < -1`).
    AllRootsNegative,
    /// `Δ <= 0` with `p0 ≠ 0`: at most one sign change is available.
    NonPositiveDiscriminant,
    /// `p0 = 0` with `q0 <= -1`.
    PlanarOutOfRange,
}

impl NonExistenceReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            NonExistenceReason::AllRootsNegative => "all-roots-negative",
            NonExistenceReason::NonPositiveDiscriminant => "non-positive-discriminant",
            NonExistenceReason::PlanarOutOfRange => "planar-out-of-range",
        }
    }
}

impl fmt::Display for NonExistenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trajectory taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum CaseTag {
    /// `p0 = 0`, `q0 ∈ (-1, 1)`: planar, bounded by `ρ² <= 2(q0 + 1)`.
    PlanarBounded { q0: f64 },
    /// `p0 = 0`, `q0 = 1`: planar with `ρ = 2 sech(t - t0)`.
    PlanarSech,
    /// `p0 = 0`, `q0 > 1`: planar, between two cylinders.
    PlanarAnnulus { q0: f64 },
    /// `p0 ≠ 0`, `Δ > 0`, `q0 > -1`: `ρ² ∈ [a, b]`, roots `c < 0 < a < b`.
    GeneralElliptic { a: f64, b: f64, c: f64 },
    /// Constant-radius helix; `eps` is the orientation sign.
    #[serde(rename = "helix-case-ii")]
    HelixCaseII { eps: i8 },
    /// Translational field `s ∂z`.
    ClassicalField { s: f64 },
    NonExistent { reason: NonExistenceReason },
    /// Start on the rotation axis; integrable but outside the cylindrical analysis.
    AxisDegenerate,
}

/// Field-free names of the taxonomy, used as the stable string vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseKind {
    PlanarBounded,
    PlanarSech,
    PlanarAnnulus,
    GeneralElliptic,
    HelixCaseII,
    ClassicalField,
    NonExistent,
    AxisDegenerate,
}

impl CaseKind {
    pub const ALL: [CaseKind; 8] = [
        CaseKind::PlanarBounded,
        CaseKind::PlanarSech,
        CaseKind::PlanarAnnulus,
        CaseKind::GeneralElliptic,
        CaseKind::HelixCaseII,
        CaseKind::ClassicalField,
        CaseKind::NonExistent,
        CaseKind::AxisDegenerate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::PlanarBounded => "planar-bounded",
            CaseKind::PlanarSech => "planar-sech",
            CaseKind::PlanarAnnulus => "planar-annulus",
            CaseKind::GeneralElliptic => "general-elliptic",
            CaseKind::HelixCaseII => "helix-case-ii",
            CaseKind::ClassicalField => "classical-field",
            CaseKind::NonExistent => "non-existent",
            CaseKind::AxisDegenerate => "axis-degenerate",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown case tag '{s}'")))
    }
}

impl CaseTag {
    pub fn kind(&self) -> CaseKind {
        match self {
            CaseTag::PlanarBounded { .. } => CaseKind::PlanarBounded,
            CaseTag::PlanarSech => CaseKind::PlanarSech,
            CaseTag::PlanarAnnulus { .. } => CaseKind::PlanarAnnulus,
            CaseTag::GeneralElliptic { .. } => CaseKind::GeneralElliptic,
            CaseTag::HelixCaseII { .. } => CaseKind::HelixCaseII,
            CaseTag::ClassicalField { .. } => CaseKind::ClassicalField,
            CaseTag::NonExistent { .. } => CaseKind::NonExistent,
            CaseTag::AxisDegenerate => CaseKind::AxisDegenerate,
        }
    }

    /// Cases with an explicit parametrization.
    pub fn is_solvable(&self) -> bool {
        !matches!(self, CaseTag::NonExistent { .. } | CaseTag::AxisDegenerate)
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().as_str())
    }
}

/// Helix start: `w0 = -2/(ρ0² + sqrt(ρ0⁴ + 4))`, `u0 = ε ρ0 sqrt(-w0) sin φ0`,
/// `v0 = -ε ρ0 sqrt(-w0) cos φ0`.
pub fn helix_sign(ic: &State6, inv: &InitialInvariants) -> Option<i8> {
    let rho2 = inv.rho0 * inv.rho0;
    let w_helix = -2.0 / (rho2 + (rho2 * rho2 + 4.0).sqrt());
    let w0 = ic.vel.z;
    if (w0 - w_helix).abs() > EPS_CLASS || w0 >= 0.0 {
        return None;
    }
    let omega = (-w0).sqrt();
    let (sin, cos) = inv.phi0.sin_cos();
    [1i8, -1].into_iter().find(|&eps| {
        let e = f64::from(eps);
        (ic.vel.x - e * inv.rho0 * omega * sin).abs() <= EPS_CLASS
            && (ic.vel.y + e * inv.rho0 * omega * cos).abs() <= EPS_CLASS
    })
}

/// Taxonomy from the invariants alone, i.e. the existence analysis of
/// `f'² + P(f) = 0` without the helix test.
pub fn classify_invariants(p0: f64, q0: f64) -> CaseTag {
    if p0.abs() <= EPS_CLASS {
        return if (q0 - 1.0).abs() <= EPS_CLASS {
            CaseTag::PlanarSech
        } else if q0 > -1.0 && q0 < 1.0 {
            CaseTag::PlanarBounded { q0 }
        } else if q0 > 1.0 {
            CaseTag::PlanarAnnulus { q0 }
        } else {
            CaseTag::NonExistent {
                reason: NonExistenceReason::PlanarOutOfRange,
            }
        };
    }
    let profile = cubic_profile_pq(p0, q0);
    if profile.delta <= 0.0 {
        return CaseTag::NonExistent {
            reason: NonExistenceReason::NonPositiveDiscriminant,
        };
    }
    if q0 <= -1.0 {
        return CaseTag::NonExistent {
            reason: NonExistenceReason::AllRootsNegative,
        };
    }
    let r = &profile.real_roots;
    CaseTag::GeneralElliptic {
        a: r[1],
        b: r[2],
        c: r[0],
    }
}

/// Assigns an initial condition to the taxonomy.
///
/// Rotations about `x` and `y` are classified in the cyclically permuted
/// frame in which they become the `z` rotation.
pub fn classify(ic: &State6, field: &KillingField) -> CaseTag {
    match *field {
        KillingField::Translation { strength, .. } => CaseTag::ClassicalField { s: strength },
        KillingField::Rotation { axis } => {
            let ic = axis.state_to_canonical(*ic);
            let inv = invariants_from_ic(&ic);
            if inv.rho0 < EPS_AXIS {
                return CaseTag::AxisDegenerate;
            }
            if let Some(eps) = helix_sign(&ic, &inv) {
                return CaseTag::HelixCaseII { eps };
            }
            classify_invariants(inv.p0, inv.q0)
        }
    }
}

/// The range of `f = ρ²` swept by the motion: the two positive roots `(a, b)`,
/// or `(0, f2)` for the planar family whose lower root is zero.
pub fn admissible_interval(profile: &CubicProfile) -> Result<Option<(f64, f64)>> {
    if profile.delta <= 0.0 {
        return Err(Error::ContractViolation(format!(
            "admissible interval needs Δ > 0, got {:e}",
            profile.delta
        )));
    }
    let zero_tol = 1e-12 * profile.q0.abs().max(1.0);
    let r = &profile.real_roots;
    let positive: Vec<f64> = r.iter().copied().filter(|&x| x > zero_tol).collect();
    let has_zero = r.iter().any(|x| x.abs() <= zero_tol);
    Ok(match positive.as_slice() {
        [a, b] => Some((*a, *b)),
        [b] if has_zero => Some((0.0, *b)),
        _ => None,
    })
}

/// A unit-speed canonical start realizing `(p0, q0)`: the turning point
/// `ρ0² = a` on the positive `x` axis, with `z0 = 0`.
pub fn ic_from_invariants(p0: f64, q0: f64) -> Result<State6> {
    let tag = classify_invariants(p0, q0);
    let low = match tag {
        CaseTag::GeneralElliptic { a, .. } => a,
        CaseTag::PlanarAnnulus { q0 } => 2.0 * (q0 - 1.0),
        // Lower turning point is the axis; start from the outer one.
        CaseTag::PlanarBounded { q0 } => 2.0 * (q0 + 1.0),
        CaseTag::PlanarSech => 4.0,
        CaseTag::NonExistent { reason } => {
            return Err(Error::NonExistent(format!(
                "no trajectory with p0 = {p0}, q0 = {q0} ({reason})"
            )))
        }
        _ => unreachable!("invariant classification yields planar, elliptic or non-existent"),
    };
    let rho0 = low.sqrt();
    let v0 = p0 / rho0;
    let w0 = q0 - 0.5 * low;
    let u2 = 1.0 - v0 * v0 - w0 * w0;
    if u2 < -1e-9 {
        return Err(Error::InconsistentIc(format!(
            "turning point ρ0² = {low} does not admit unit speed (u0² = {u2})"
        )));
    }
    use crate::fields::Vec3;
    Ok(State6::new(
        Vec3::new(rho0, 0.0, 0.0),
        Vec3::new(u2.max(0.0).sqrt(), v0, w0),
    ))
}

/// Full report used by the command line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub case: CaseTag,
    pub invariants: Option<InitialInvariants>,
    pub profile: Option<CubicProfile>,
    /// Admissible range of `ρ` (not `ρ²`).
    pub rho_interval: Option<(f64, f64)>,
}

pub fn classification_report(ic: &State6, field: &KillingField) -> Classification {
    let case = classify(ic, field);
    match field {
        KillingField::Translation { .. } => Classification {
            case,
            invariants: None,
            profile: None,
            rho_interval: None,
        },
        KillingField::Rotation { axis } => {
            let inv = invariants_from_ic(&axis.state_to_canonical(*ic));
            report_for(case, inv.p0, inv.q0, Some(inv))
        }
    }
}

pub fn classification_from_invariants(p0: f64, q0: f64) -> Classification {
    report_for(classify_invariants(p0, q0), p0, q0, None)
}

fn report_for(
    case: CaseTag,
    p0: f64,
    q0: f64,
    invariants: Option<InitialInvariants>,
) -> Classification {
    let profile = cubic_profile_pq(p0, q0);
    let rho_interval = match case {
        CaseTag::PlanarSech => Some((0.0, 2.0)),
        CaseTag::HelixCaseII { .. } => invariants.map(|i| (i.rho0, i.rho0)),
        CaseTag::PlanarBounded { q0 } => Some((0.0, (2.0 * (q0 + 1.0)).sqrt())),
        CaseTag::PlanarAnnulus { q0 } => {
            Some(((2.0 * (q0 - 1.0)).sqrt(), (2.0 * (q0 + 1.0)).sqrt()))
        }
        CaseTag::GeneralElliptic { a, b, .. } => Some((a.sqrt(), b.sqrt())),
        _ => None,
    };
    Classification {
        case,
        invariants,
        profile: Some(profile),
        rho_interval,
    }
}
