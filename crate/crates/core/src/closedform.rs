//! Explicit parametrizations of the magnetic curves.
//!
//! For the rotational field the squared radius `f = ρ²` is a Möbius function
//! of `sn²`, so it is periodic between its turning points and needs no branch
//! bookkeeping. The angle `φ` and the height `z` involve third-kind
//! integrals; they are integrated numerically from the explicit `f(t)` and
//! cached on a uniform grid per curve.
//!
//! Planar curves whose lower turning point is the axis (`q0 ∈ (-1, 1)`) are
//! written with a signed radius `ρ̃ = sn · g(sn)`, which crosses the axis
//! smoothly, as the Cartesian equations do.

use serde::{Deserialize, Serialize};

use crate::classify::{classify, invariants_from_ic, CaseTag, InitialInvariants, EPS_CLASS};
use crate::elliptic::{complete_k, inverse_sn, jacobi_sn_cn_dn, Modulus};
use crate::fields::{lorentz_force, Axis, KillingField, State6, Vec3};
use crate::integrate::{make_sample, TrajectorySample, quad_adaptive, quad_riemann, quad_sqrt_endpoint, SqrtSingularity};
use crate::{Error, Result};

/// Grid spacing of the per-curve quadrature cache.
const CACHE_STEP: f64 = 0.05;
const CACHE_TOL: f64 = 1e-14;

/// Seeding values this far outside `[-1, 1]` are rounding, not inconsistency.
const SEED_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylindricalState {
    pub rho: f64,
    pub phi: f64,
    pub z: f64,
}

impl CylindricalState {
    pub fn from_cartesian(p: Vec3) -> Self {
        Self {
            rho: p.x.hypot(p.y),
            phi: p.y.atan2(p.x),
            z: p.z,
        }
    }

    pub fn to_cartesian(self) -> Vec3 {
        let (s, c) = self.phi.sin_cos();
        Vec3::new(self.rho * c, self.rho * s, self.z)
    }
}

/// Constants of one explicit solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionParams {
    pub case: CaseTag,
    /// Phase shift solving the seeding equation on the increasing branch.
    pub t0: f64,
    /// Modulus passed to the Jacobi functions.
    pub k: Option<f64>,
    /// Scale of the elliptic argument, `u = r t + phase`.
    pub r: f64,
    /// Roots `(A, B, C)` of the radial cubic, `C <= A < B`.
    pub roots: Option<(f64, f64, f64)>,
    /// `+1` when `ρ` grows at `t = 0` (or the helix orientation), `-1` otherwise.
    pub eps: i8,
    /// Strength of the translational field.
    pub s: f64,
    /// Quarter period `K` of the evaluation modulus.
    pub quarter_period: Option<f64>,
}

impl SolutionParams {
    /// Elliptic argument at `t = 0`. The decreasing branch starts at
    /// `2K - t0`, where `sn` has the same value and the opposite slope.
    pub fn phase(&self) -> f64 {
        match (self.eps, self.quarter_period) {
            (-1, Some(k)) => 2.0 * k - self.t0,
            _ => self.t0,
        }
    }

    fn modulus(&self) -> Modulus {
        Modulus::new(self.k.expect("elliptic case carries a modulus")).expect("validated")
    }
}

fn seed(value: f64) -> Result<f64> {
    if !value.is_finite() || value.abs() > 1.0 + SEED_SLACK {
        return Err(Error::InconsistentIc(format!(
            "seeding value sn(t0) = {value} outside [-1, 1]"
        )));
    }
    Ok(value.clamp(-1.0, 1.0))
}

fn check_band(rho2: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = SEED_SLACK * (1.0 + hi.abs());
    if rho2 < lo - slack || rho2 > hi + slack {
        return Err(Error::InconsistentIc(format!(
            "ρ0² = {rho2} outside the admissible band [{lo}, {hi}]"
        )));
    }
    Ok(())
}

fn elliptic_params(
    case: CaseTag,
    modulus: f64,
    r: f64,
    seed_value: f64,
    roots: (f64, f64, f64),
    eps: i8,
) -> Result<SolutionParams> {
    let m = Modulus::new(modulus)?;
    let t0 = inverse_sn(seed(seed_value)?, m)?;
    Ok(SolutionParams {
        case,
        t0,
        k: Some(modulus),
        r,
        roots: Some(roots),
        eps,
        s: 0.0,
        quarter_period: Some(complete_k(m)?),
    })
}

/// Solves for the constants of the explicit solution of a start `ic` given in
/// the canonical frame.
pub fn solve_params(tag: CaseTag, inv: &InitialInvariants, ic: &State6) -> Result<SolutionParams> {
    let rho2 = inv.rho0 * inv.rho0;
    let radial_rate = ic.pos.x * ic.vel.x + ic.pos.y * ic.vel.y;
    let eps: i8 = if radial_rate < 0.0 { -1 } else { 1 };
    match tag {
        CaseTag::PlanarBounded { q0 } if q0.abs() <= EPS_CLASS => {
            let value = 2f64.sqrt() * inv.rho0 / (2.0 + rho2).sqrt();
            elliptic_params(tag, std::f64::consts::FRAC_1_SQRT_2, 1.0, value, (0.0, 2.0, -2.0), eps)
        }
        CaseTag::PlanarBounded { q0 } => {
            check_band(rho2, 0.0, 2.0 * (q0 + 1.0))?;
            let value = (2.0 / (q0 + 1.0)).sqrt() * inv.rho0 / (rho2 - 2.0 * (q0 - 1.0)).sqrt();
            elliptic_params(
                tag,
                ((q0 + 1.0) / 2.0).sqrt(),
                1.0,
                value,
                (0.0, 2.0 * (q0 + 1.0), 2.0 * (q0 - 1.0)),
                eps,
            )
        }
        CaseTag::PlanarAnnulus { q0 } => {
            check_band(rho2, 2.0 * (q0 - 1.0), 2.0 * (q0 + 1.0))?;
            let scale = ((q0 + 1.0) / 2.0).sqrt();
            let value = scale * (rho2 - 2.0 * (q0 - 1.0)).max(0.0).sqrt() / inv.rho0;
            elliptic_params(
                tag,
                (2.0 / (q0 + 1.0)).sqrt(),
                scale,
                value,
                (2.0 * (q0 - 1.0), 2.0 * (q0 + 1.0), 0.0),
                eps,
            )
        }
        CaseTag::GeneralElliptic { a, b, c } => {
            check_band(rho2, a, b)?;
            let k2 = (b - c) / (b - a);
            let value = k2.sqrt() * ((rho2 - a).max(0.0) / (rho2 - c)).sqrt();
            elliptic_params(tag, 1.0 / k2.sqrt(), (b - c).sqrt() / 2.0, value, (a, b, c), eps)
        }
        CaseTag::PlanarSech => {
            if inv.rho0 > 2.0 + SEED_SLACK {
                return Err(Error::InconsistentIc(format!(
                    "ρ0 = {} exceeds 2 for q0 = 1",
                    inv.rho0
                )));
            }
            // -½ ln((2 - a)/(2 + a)) = atanh(a/2), a = sqrt(4 - ρ0²)
            let a = (4.0 - rho2).max(0.0).sqrt();
            Ok(SolutionParams {
                case: tag,
                t0: (a / 2.0).atanh(),
                k: None,
                r: 1.0,
                roots: None,
                eps,
                s: 0.0,
                quarter_period: None,
            })
        }
        CaseTag::HelixCaseII { eps } => {
            if ic.vel.z >= 0.0 {
                return Err(Error::ContractViolation(
                    "constant-radius motion needs w0 < 0; w0 > 0 admits no such trajectory".into(),
                ));
            }
            Ok(SolutionParams {
                case: tag,
                t0: 0.0,
                k: None,
                r: (-ic.vel.z).sqrt(),
                roots: None,
                eps,
                s: 0.0,
                quarter_period: None,
            })
        }
        CaseTag::ClassicalField { s } => {
            if s == 0.0 {
                return Err(Error::Domain("zero strength gives geodesics, not magnetic curves".into()));
            }
            Ok(SolutionParams {
                case: tag,
                t0: 0.0,
                k: None,
                r: 0.0,
                roots: None,
                eps: 1,
                s,
                quarter_period: None,
            })
        }
        CaseTag::NonExistent { reason } => Err(Error::NonExistent(reason.to_string())),
        CaseTag::AxisDegenerate => Err(Error::ContractViolation(
            "start on the rotation axis has no cylindrical closed form".into(),
        )),
    }
}

/// Radius (signed where the curve crosses the axis), its rate and `f = ρ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub rho: f64,
    pub rho_dot: f64,
    pub f: f64,
}

/// `p0 = 0, q0 = 0`: `J = 2 sn²/(2 - sn²)`, modulus `1/√2`.
pub fn eval_planar_q0_zero(params: &SolutionParams, t: f64) -> Radial {
    let e = jacobi_sn_cn_dn(t + params.phase(), params.modulus());
    let d = 2.0 - e.sn * e.sn;
    let g = (2.0 / d).sqrt();
    let rho = e.sn * g;
    Radial {
        rho,
        rho_dot: e.cn * e.dn * g * 2.0 / d,
        f: 2.0 * e.sn * e.sn / d,
    }
}

/// `p0 = 0, q0 = 1`: `ρ = 2 / cosh(t - t0)`.
pub fn eval_planar_q0_one(params: &SolutionParams, t: f64) -> Radial {
    let shift = if params.eps < 0 { -params.t0 } else { params.t0 };
    let x = t - shift;
    let sech = 1.0 / x.cosh();
    Radial {
        rho: 2.0 * sech,
        rho_dot: -2.0 * sech * x.tanh(),
        f: 4.0 * sech * sech,
    }
}

/// Height for `q0 = 1`: `z0 + t - 2 (tanh(t - t0) + tanh t0)`.
fn planar_q0_one_height(params: &SolutionParams, z0: f64, t: f64) -> f64 {
    let shift = if params.eps < 0 { -params.t0 } else { params.t0 };
    z0 + t - 2.0 * ((t - shift).tanh() + shift.tanh())
}

/// `p0 = 0`, `q0 ∈ (-1, 1)` or `q0 > 1`.
pub fn eval_planar_general(params: &SolutionParams, q0: f64, t: f64) -> Radial {
    let m = params.modulus();
    if q0 < 1.0 {
        // ρ² = 2(1 - q0²) sn² / (2 - (q0 + 1) sn²)
        let e = jacobi_sn_cn_dn(t + params.phase(), m);
        let d = 2.0 - (q0 + 1.0) * e.sn * e.sn;
        let g = (2.0 * (1.0 - q0 * q0) / d).sqrt();
        let rho = e.sn * g;
        Radial {
            rho,
            rho_dot: e.cn * e.dn * g * 2.0 / d,
            f: rho * rho,
        }
    } else {
        // ρ² = (q0² - 1) / ((q0 + 1)/2 - sn²), argument r t + t0
        let e = jacobi_sn_cn_dn(params.r * t + params.phase(), m);
        let d = 0.5 * (q0 + 1.0) - e.sn * e.sn;
        let f = (q0 * q0 - 1.0) / d;
        let f_dot = params.r * 2.0 * e.sn * e.cn * e.dn * (q0 * q0 - 1.0) / (d * d);
        let rho = f.sqrt();
        Radial {
            rho,
            rho_dot: f_dot / (2.0 * rho),
            f,
        }
    }
}

/// `p0 ≠ 0`: `ρ² = (A k² - C sn²) / (k² - sn²)` with `sn = sn(r t + t0, 1/k)`.
pub fn eval_general_elliptic(params: &SolutionParams, t: f64) -> Radial {
    let (a, b, c) = params.roots.expect("elliptic roots");
    let k2 = (b - c) / (b - a);
    let e = jacobi_sn_cn_dn(params.r * t + params.phase(), params.modulus());
    let s2 = e.sn * e.sn;
    let d = k2 - s2;
    let f = (a * k2 - c * s2) / d;
    let f_dot = params.r * 2.0 * e.sn * e.cn * e.dn * k2 * (a - c) / (d * d);
    let rho = f.sqrt();
    Radial {
        rho,
        rho_dot: f_dot / (2.0 * rho),
        f,
    }
}

/// Constant-radius helix about the axis, for `w0 < 0`.
pub fn eval_helix_case_ii(ic: &State6, t: f64) -> Result<State6> {
    let w0 = ic.vel.z;
    if w0 >= 0.0 {
        return Err(Error::ContractViolation(format!(
            "helix needs w0 < 0, got {w0}"
        )));
    }
    let omega = (-w0).sqrt();
    let (s, c) = (omega * t).sin_cos();
    let (p, v) = (ic.pos, ic.vel);
    Ok(State6::new(
        Vec3::new(
            p.x * c + v.x / omega * s,
            p.y * c + v.y / omega * s,
            p.z + t * w0,
        ),
        Vec3::new(
            -p.x * omega * s + v.x * c,
            -p.y * omega * s + v.y * c,
            w0,
        ),
    ))
}

/// Magnetic curve of the translational field `s ∂z`.
pub fn eval_classical_helix(s: f64, ic: &State6, t: f64) -> Result<State6> {
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Domain(format!("strength s = {s}")));
    }
    let (p, v) = (ic.pos, ic.vel);
    let (sn, cs) = (s * t).sin_cos();
    Ok(State6::new(
        Vec3::new(
            v.x / s * sn + v.y / s * cs + p.x - v.y / s,
            -v.x / s * cs + v.y / s * sn + p.y + v.x / s,
            v.z * t + p.z,
        ),
        Vec3::new(v.x * cs - v.y * sn, v.x * sn + v.y * cs, v.z),
    ))
}

/// `κ = |s| sqrt(1 - w0²)`, `τ = s w0` for the translational field.
pub fn classical_curvature_torsion(s: f64, w0: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&w0) {
        return Err(Error::Domain(format!("|w0| = {} > 1", w0.abs())));
    }
    Ok((s.abs() * ((1.0 - w0) * (1.0 + w0)).sqrt(), s * w0))
}

/// Cumulative `∫₀ᵗ f` and `∫₀ᵗ 1/f` on a uniform grid.
#[derive(Debug, Clone)]
struct IntegralCache {
    first_index: i64,
    cum_f: Vec<f64>,
    cum_inv_f: Vec<f64>,
}

/// A fully specified explicit solution, ready to evaluate at any `t`.
#[derive(Debug, Clone)]
pub struct ClosedFormCurve {
    axis: Axis,
    ic: State6,
    inv: InitialInvariants,
    params: SolutionParams,
    cache: Option<IntegralCache>,
}

impl ClosedFormCurve {
    /// Classifies `ic` under `field` and prepares the solution; the quadrature
    /// cache covers `t_range`, and evaluation outside it stays exact but slower.
    pub fn new(field: &KillingField, ic: &State6, t_range: (f64, f64)) -> Result<Self> {
        let tag = classify(ic, field);
        Self::with_case(field, ic, tag, t_range)
    }

    pub fn with_case(
        field: &KillingField,
        ic: &State6,
        tag: CaseTag,
        t_range: (f64, f64),
    ) -> Result<Self> {
        let axis = field.axis();
        let canonical = axis.state_to_canonical(*ic);
        let inv = invariants_from_ic(&canonical);
        let params = solve_params(tag, &inv, &canonical)?;
        let mut curve = Self {
            axis,
            ic: canonical,
            inv,
            params,
            cache: None,
        };
        if curve.needs_quadrature() {
            curve.cache = Some(curve.build_cache(t_range)?);
        }
        Ok(curve)
    }

    pub fn params(&self) -> &SolutionParams {
        &self.params
    }

    pub fn invariants(&self) -> &InitialInvariants {
        &self.inv
    }

    pub fn case(&self) -> CaseTag {
        self.params.case
    }

    fn needs_quadrature(&self) -> bool {
        matches!(
            self.params.case,
            CaseTag::PlanarBounded { .. } | CaseTag::PlanarAnnulus { .. } | CaseTag::GeneralElliptic { .. }
        )
    }

    /// Radial profile in the canonical frame; `None` for the translational field.
    pub fn radial(&self, t: f64) -> Option<Radial> {
        let p = &self.params;
        Some(match p.case {
            CaseTag::PlanarBounded { q0 } if q0.abs() <= EPS_CLASS => eval_planar_q0_zero(p, t),
            CaseTag::PlanarBounded { q0 } | CaseTag::PlanarAnnulus { q0 } => {
                eval_planar_general(p, q0, t)
            }
            CaseTag::PlanarSech => eval_planar_q0_one(p, t),
            CaseTag::GeneralElliptic { .. } => eval_general_elliptic(p, t),
            CaseTag::HelixCaseII { .. } => Radial {
                rho: self.inv.rho0,
                rho_dot: 0.0,
                f: self.inv.rho0 * self.inv.rho0,
            },
            _ => return None,
        })
    }

    /// `ρ²(t)`; only meaningful for the rotational field.
    pub fn rho_squared(&self, t: f64) -> Option<f64> {
        self.radial(t).map(|r| r.f)
    }

    fn f_at(&self, t: f64) -> f64 {
        self.radial(t).expect("rotational case").f
    }

    fn build_cache(&self, (t_lo, t_hi): (f64, f64)) -> Result<IntegralCache> {
        let with_phase = self.inv.p0.abs() > EPS_CLASS;
        let lo = (t_lo.min(0.0) / CACHE_STEP).floor() as i64;
        let hi = (t_hi.max(0.0) / CACHE_STEP).ceil() as i64;
        let len = (hi - lo + 1) as usize;
        let mut cum_f = vec![0.0; len];
        let mut cum_inv_f = vec![0.0; len];
        let zero = (-lo) as usize;
        let node = |i: usize| (i as i64 + lo) as f64 * CACHE_STEP;
        for i in zero..len - 1 {
            let (a, b) = (node(i), node(i + 1));
            cum_f[i + 1] = cum_f[i] + quad_adaptive(|t| self.f_at(t), a, b, CACHE_TOL)?;
            if with_phase {
                cum_inv_f[i + 1] =
                    cum_inv_f[i] + quad_adaptive(|t| 1.0 / self.f_at(t), a, b, CACHE_TOL)?;
            }
        }
        for i in (1..=zero).rev() {
            let (a, b) = (node(i - 1), node(i));
            cum_f[i - 1] = cum_f[i] - quad_adaptive(|t| self.f_at(t), a, b, CACHE_TOL)?;
            if with_phase {
                cum_inv_f[i - 1] =
                    cum_inv_f[i] - quad_adaptive(|t| 1.0 / self.f_at(t), a, b, CACHE_TOL)?;
            }
        }
        Ok(IntegralCache {
            first_index: lo,
            cum_f,
            cum_inv_f,
        })
    }

    /// `(∫₀ᵗ f, ∫₀ᵗ 1/f)`.
    fn integrals(&self, t: f64) -> Result<(f64, f64)> {
        let cache = self.cache.as_ref().expect("quadrature cache");
        let last = cache.first_index + cache.cum_f.len() as i64 - 1;
        let j = ((t / CACHE_STEP).round() as i64).clamp(cache.first_index, last);
        let idx = (j - cache.first_index) as usize;
        let tj = j as f64 * CACHE_STEP;
        let signed = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            if t >= tj {
                quad_adaptive(g, tj, t, CACHE_TOL)
            } else {
                quad_adaptive(g, t, tj, CACHE_TOL).map(|v| -v)
            }
        };
        let int_f = cache.cum_f[idx] + signed(&|s| self.f_at(s))?;
        let int_inv = if self.inv.p0.abs() > EPS_CLASS {
            cache.cum_inv_f[idx] + signed(&|s| 1.0 / self.f_at(s))?
        } else {
            0.0
        };
        Ok((int_f, int_inv))
    }

    /// Position and velocity at arc length `t`, in the original frame.
    pub fn eval(&self, t: f64) -> Result<State6> {
        let s = self.eval_canonical(t)?;
        Ok(self.axis.state_from_canonical(s))
    }

    fn eval_canonical(&self, t: f64) -> Result<State6> {
        let inv = &self.inv;
        match self.params.case {
            CaseTag::ClassicalField { s } => eval_classical_helix(s, &self.ic, t),
            CaseTag::HelixCaseII { .. } => eval_helix_case_ii(&self.ic, t),
            CaseTag::PlanarSech => {
                let r = eval_planar_q0_one(&self.params, t);
                let z = planar_q0_one_height(&self.params, inv.z0, t);
                Ok(planar_state(inv.phi0, r, z, 1.0 - 0.5 * r.f))
            }
            CaseTag::PlanarBounded { q0 } | CaseTag::PlanarAnnulus { q0 } => {
                let r = self.radial(t).expect("rotational case");
                let (int_f, _) = self.integrals(t)?;
                let z = inv.z0 + q0 * t - 0.5 * int_f;
                Ok(planar_state(inv.phi0, r, z, q0 - 0.5 * r.f))
            }
            CaseTag::GeneralElliptic { .. } => {
                let r = eval_general_elliptic(&self.params, t);
                let (int_f, int_inv) = self.integrals(t)?;
                let phi = inv.phi0 + inv.p0 * int_inv;
                let phi_dot = inv.p0 / r.f;
                let z = inv.z0 + inv.q0 * t - 0.5 * int_f;
                let (sn, cs) = phi.sin_cos();
                Ok(State6::new(
                    Vec3::new(r.rho * cs, r.rho * sn, z),
                    Vec3::new(
                        r.rho_dot * cs - r.rho * phi_dot * sn,
                        r.rho_dot * sn + r.rho * phi_dot * cs,
                        inv.q0 - 0.5 * r.f,
                    ),
                ))
            }
            CaseTag::NonExistent { .. } | CaseTag::AxisDegenerate => {
                unreachable!("rejected by solve_params")
            }
        }
    }
}

/// Samples a closed-form curve at `times`, with drifts against `ic`.
pub fn sample_closed_form(
    curve: &ClosedFormCurve,
    field: &KillingField,
    ic: &State6,
    times: &[f64],
) -> Result<Vec<TrajectorySample>> {
    times
        .iter()
        .map(|&t| curve.eval(t).map(|s| make_sample(field, ic, t, s)))
        .collect()
}

/// Largest position gap between two sample sets taken at the same times.
pub fn max_position_deviation(a: &[TrajectorySample], b: &[TrajectorySample]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.pos - y.pos).norm())
        .fold(0.0, f64::max)
}

fn planar_state(phi0: f64, r: Radial, z: f64, z_dot: f64) -> State6 {
    let (s, c) = phi0.sin_cos();
    State6::new(
        Vec3::new(r.rho * c, r.rho * s, z),
        Vec3::new(r.rho_dot * c, r.rho_dot * s, z_dot),
    )
}

/// `|γ'' - V × γ'|` at `t`, with `γ''` from a fourth-order central
/// difference of the velocity with step `h`.
pub fn fd_residual<F>(eval: F, field: &KillingField, t: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<State6>,
{
    let here = eval(t)?;
    let v = |k: f64| eval(t + k * h).map(|s| s.vel);
    let accel = (v(-2.0)? - v(2.0)? + (v(1.0)? - v(-1.0)?) * 8.0) * (1.0 / (12.0 * h));
    Ok((accel - lorentz_force(field, here.pos, here.vel)).norm())
}

/// Curvature and torsion of a parametrized curve at `t` from seven-point
/// central differences of positions with step `h`.
pub fn numerical_curvature_torsion<F>(curve: F, t: f64, h: f64) -> (f64, f64)
where
    F: Fn(f64) -> Vec3,
{
    let p: Vec<Vec3> = (-3..=3).map(|i| curve(t + i as f64 * h)).collect();
    let d1 = (p[0] * -1.0 + p[1] * 9.0 + p[2] * -45.0 + p[4] * 45.0 + p[5] * -9.0 + p[6])
        * (1.0 / (60.0 * h));
    let d2 = (p[0] * 2.0 + p[1] * -27.0 + p[2] * 270.0 + p[3] * -490.0 + p[4] * 270.0
        + p[5] * -27.0
        + p[6] * 2.0)
        * (1.0 / (180.0 * h * h));
    let d3 = (p[0] + p[1] * -8.0 + p[2] * 13.0 + p[4] * -13.0 + p[5] * 8.0 + p[6] * -1.0)
        * (1.0 / (8.0 * h * h * h));
    let b = d1.cross(d2);
    let speed = d1.norm();
    let kappa = b.norm() / speed.powi(3);
    let bb = b.dot(b);
    let tau = if bb > 0.0 { b.dot(d3) / bb } else { f64::NAN };
    (kappa, tau)
}

/// One point of the Riemann-sum reproduction of the `q0 = 0` planar curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannPoint {
    pub t: f64,
    pub rho: f64,
    pub z: f64,
}

/// `1/sqrt(ζ (4 - ζ²))`, the arc-length integrand of the `p0 = q0 = 0` case.
pub fn planar_q0_zero_integrand(zeta: f64) -> f64 {
    1.0 / (zeta * (4.0 - zeta * zeta)).sqrt()
}

/// Lower integration limit used by the Riemann-sum scheme to step past the
/// `1/sqrt(ζ)` singularity.
pub const RIEMANN_LOWER_LIMIT: f64 = 0.001;

/// The left-Riemann-sum pipeline for `p0 = q0 = 0`: for `N + 1` levels
/// `f_K = ρ0² + K (f_max - ρ0²)/N` it forms `I_K = ∫_{0.001}^{f_K}` with
/// `n` panels, uses `t_K = I_K - I_0` as arc length and accumulates
/// `z_{K+1} = z_K - (I_{K+1} - I_K) f_K / 2`.
pub fn riemann_planar_q0_zero(
    rho0: f64,
    f_max: f64,
    levels: usize,
    panels: usize,
) -> Result<Vec<RiemannPoint>> {
    if levels == 0 {
        return Err(Error::Domain("need at least one level".into()));
    }
    let step = (f_max - rho0 * rho0) / levels as f64;
    let mut integrals = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        let b = rho0 * rho0 + k as f64 * step;
        integrals.push((b, quad_riemann(planar_q0_zero_integrand, RIEMANN_LOWER_LIMIT, b, panels)?));
    }
    let mut out = Vec::with_capacity(levels + 1);
    let mut z = 0.0;
    for k in 0..=levels {
        let (b, i_k) = integrals[k];
        out.push(RiemannPoint {
            t: i_k - integrals[0].1,
            rho: b.sqrt(),
            z,
        });
        if k < levels {
            z -= 0.5 * (integrals[k + 1].1 - i_k) * b;
        }
    }
    Ok(out)
}

/// `∫_a^b dζ / sqrt(ζ (4 - ζ²))` for `0 <= a <= b <= 2` by adaptive quadrature
/// with both endpoint singularities removed by substitution.
pub fn planar_q0_zero_arc_length(a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= 2.0) {
        return Err(Error::Domain(format!("[{a}, {b}] not inside [0, 2]")));
    }
    quad_sqrt_endpoint(planar_q0_zero_integrand, a, b, tol, SqrtSingularity::Both)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{classify_invariants, NonExistenceReason};
    use crate::elliptic::complete_k;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    const ROT_Z: KillingField = KillingField::Rotation { axis: Axis::Z };

    fn ic(v: [f64; 6]) -> State6 {
        State6::from_slice(&v)
    }

    fn curve(start: State6) -> ClosedFormCurve {
        ClosedFormCurve::new(&ROT_Z, &start, (-1.0, 12.0)).unwrap()
    }

    fn general_ic() -> State6 {
        let v0 = ((2.0 * 6f64.sqrt() - 3.0) / 2.0).sqrt();
        ic([1.0, 0.0, 0.0, 0.0, v0, (2.0 - 6f64.sqrt()) / 2.0])
    }

    #[test]
    fn cylindrical_round_trip() {
        let p = Vec3::new(0.3, -1.7, 2.2);
        let back = CylindricalState::from_cartesian(p).to_cartesian();
        assert!((back - p).max_abs() < 1e-15);
    }

    #[test]
    fn sech_seed_at_rho_two() {
        let start = ic([2.0, 0.0, 0.5, 0.0, 0.0, -1.0]);
        let c = curve(start);
        assert_eq!(c.params().t0, 0.0);
        let s0 = c.eval(0.0).unwrap();
        assert!((s0.pos - start.pos).max_abs() < 1e-15);
    }

    #[test]
    fn sech_t0_matches_log_form() {
        for rho0 in [0.3_f64, 1.0, 1.9] {
            let a: f64 = (4.0 - rho0 * rho0).sqrt();
            let log_form = -0.5 * ((2.0 - a) / (2.0 + a)).ln();
            let phi0 = PI / 6.0;
            let w0 = 1.0 - 0.5 * rho0 * rho0;
            let u = (1.0 - w0 * w0).sqrt();
            // radial outward start
            let start = ic([rho0 * phi0.cos(), rho0 * phi0.sin(), 0.0, u * phi0.cos(), u * phi0.sin(), w0]);
            let c = curve(start);
            assert!((c.params().t0 - log_form).abs() < 1e-13);
            assert!((c.eval(0.0).unwrap().vel - start.vel).max_abs() < 1e-12);
        }
    }

    #[test]
    fn sech_asymptotics() {
        let start = ic([2.0 * (PI / 6.0).cos(), 2.0 * (PI / 6.0).sin(), 0.0, 0.0, 0.0, -1.0]);
        let c = curve(start);
        let t = 40.0;
        let s = c.eval(t).unwrap();
        assert!(s.pos.x.hypot(s.pos.y) < 1e-15);
        assert!((s.pos.z - (t - 2.0 * (1.0 + c.params().t0.tanh()))).abs() < 1e-12);
    }

    #[test]
    fn sech_rejects_rho_above_two() {
        let inv = InitialInvariants { p0: 0.0, q0: 1.0, rho0: 2.5, phi0: 0.0, z0: 0.0 };
        let start = ic([2.5, 0.0, 0.0, 0.0, 0.0, 1.0 - 3.125]);
        assert!(matches!(
            solve_params(CaseTag::PlanarSech, &inv, &start),
            Err(Error::InconsistentIc(_))
        ));
    }

    #[test]
    fn q0_zero_seed_at_rim() {
        // ρ0 = √2: seed sn(t0, 1/√2) = 1 so t0 = K(1/√2)
        let start = ic([2f64.sqrt(), 0.0, 0.0, 0.0, 0.0, -1.0]);
        let c = curve(start);
        let k = complete_k(Modulus::new(FRAC_1_SQRT_2).unwrap()).unwrap();
        assert!((c.params().t0 - k).abs() < 1e-7, "{} vs {k}", c.params().t0);
        assert!(c.radial(0.0).unwrap().rho - 2f64.sqrt() < 1e-12);
    }

    #[test]
    fn q0_zero_matches_case_a_formula() {
        let start = ic([1.0, 0.0, 0.0, 0.75f64.sqrt(), 0.0, -0.5]);
        let c = curve(start);
        let params = *c.params();
        for i in 0..50 {
            let t = i as f64 * 0.2;
            let a = eval_planar_q0_zero(&params, t);
            let b = eval_planar_general(&params, 0.0, t);
            assert!((a.rho - b.rho).abs() < 1e-14 && (a.rho_dot - b.rho_dot).abs() < 1e-14);
            assert!(a.rho <= 2f64.sqrt() + 1e-14);
        }
        assert!((c.radial(0.0).unwrap().rho - 1.0).abs() < 1e-14);
    }

    #[test]
    fn annulus_profile_bounds() {
        let c = curve(ic([2.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
        assert_eq!(c.params().t0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..=2000 {
            let f = c.rho_squared(i as f64 * 0.005).unwrap();
            lo = lo.min(f);
            hi = hi.max(f);
        }
        assert!((lo - 4.0).abs() < 1e-12 && hi <= 8.0 + 1e-12 && hi > 7.99);
    }

    #[test]
    fn general_elliptic_parameters() {
        let c = curve(general_ic());
        let p = c.params();
        let kk = 2.0 * 6f64.sqrt() - 1.0;
        assert!((p.k.unwrap() - 1.0 / kk.sqrt()).abs() < 1e-12);
        assert!((p.r - kk.sqrt() / 2.0).abs() < 1e-12);
        assert!(p.t0.abs() < 1e-6);
        assert!((c.rho_squared(0.0).unwrap() - 1.0).abs() < 1e-12);
        // extremes over a period
        let period = 2.0 * p.quarter_period.unwrap() / p.r;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..=4000 {
            let f = c.rho_squared(i as f64 * period / 4000.0).unwrap();
            lo = lo.min(f);
            hi = hi.max(f);
        }
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 2.0).abs() < 1e-10, "{lo} {hi}");
    }

    #[test]
    fn starts_reproduce_initial_state() {
        let starts = [
            ic([1.0, 0.0, 0.3, 0.75f64.sqrt(), 0.0, -0.5]),
            ic([1.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
            ic([0.0, -1.0, 0.0, 0.0, 1.0, 0.0]),
            ic([2.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            general_ic(),
        ];
        for s in starts {
            let c = curve(s);
            let got = c.eval(0.0).unwrap();
            assert!((got.pos - s.pos).max_abs() < 1e-12, "{s:?}: {got:?}");
            assert!((got.vel - s.vel).max_abs() < 1e-7, "{s:?}: {got:?}");
        }
    }

    #[test]
    fn helix_properties() {
        let w0 = -2.0 / (1.0 + 5f64.sqrt());
        let start = ic([1.0, 0.0, 0.0, 0.0, -(-w0).sqrt(), w0]);
        assert!((start.speed() - 1.0).abs() < 1e-15);
        assert_eq!(eval_helix_case_ii(&start, 0.0).unwrap().pos, start.pos);
        for i in 0..=500 {
            let t = i as f64 * 0.1;
            let s = eval_helix_case_ii(&start, t).unwrap();
            assert!((s.pos.x.hypot(s.pos.y) - 1.0).abs() < 1e-12);
            // analytic γ''
            let omega2 = -w0;
            let accel = Vec3::new(-omega2 * s.pos.x, -omega2 * s.pos.y, 0.0);
            assert!((accel - lorentz_force(&ROT_Z, s.pos, s.vel)).norm() < 1e-12);
        }
        let up = ic([1.0, 0.0, 0.0, 0.0, 0.6, 0.8]);
        assert!(matches!(eval_helix_case_ii(&up, 1.0), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn classical_helix_examples() {
        let start = ic([0.5, -0.2, 1.0, 0.6, 0.0, 0.8]);
        let s0 = eval_classical_helix(2.0, &start, 0.0).unwrap();
        assert!((s0.pos - start.pos).max_abs() < 1e-15 && (s0.vel - start.vel).max_abs() < 1e-15);
        assert!(eval_classical_helix(0.0, &start, 1.0).is_err());

        // w0 = 0: planar circle of radius 1/s
        let flat = ic([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let center = Vec3::new(0.0, 0.5, 0.0);
        for i in 0..100 {
            let p = eval_classical_helix(2.0, &flat, i as f64 * 0.1).unwrap().pos;
            assert!(((p - center).norm() - 0.5).abs() < 1e-14 && p.z == 0.0);
        }
        // w0 = ±1: vertical line
        for w0 in [1.0, -1.0] {
            let vert = ic([0.3, 0.4, 0.0, 0.0, 0.0, w0]);
            let p = eval_classical_helix(3.0, &vert, 2.0).unwrap().pos;
            assert!((p - Vec3::new(0.3, 0.4, 2.0 * w0)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn curvature_torsion_examples() {
        assert_eq!(classical_curvature_torsion(3.0, 0.0).unwrap(), (3.0, 0.0));
        assert_eq!(classical_curvature_torsion(3.0, 1.0).unwrap(), (0.0, 3.0));
        assert_eq!(classical_curvature_torsion(3.0, -1.0).unwrap(), (0.0, -3.0));
        let (k, t) = classical_curvature_torsion(2.0, 0.5).unwrap();
        assert!((k - 3f64.sqrt()).abs() < 1e-15 && (t - 1.0).abs() < 1e-15);
        assert!(classical_curvature_torsion(1.0, 1.5).is_err());

        let start = ic([0.0, 0.0, 0.0, 0.75f64.sqrt(), 0.0, 0.5]);
        let (kn, tn) = numerical_curvature_torsion(
            |t| eval_classical_helix(2.0, &start, t).unwrap().pos,
            0.3,
            0.01,
        );
        assert!((kn - 3f64.sqrt()).abs() < 1e-7 && (tn - 1.0).abs() < 1e-7, "{kn} {tn}");
    }

    #[test]
    fn non_existent_and_axis_are_rejected() {
        let tag = classify_invariants(1.0, -3.0);
        let inv = InitialInvariants { p0: 1.0, q0: -3.0, rho0: 1.0, phi0: 0.0, z0: 0.0 };
        assert!(matches!(solve_params(tag, &inv, &ic([0.0; 6])), Err(Error::NonExistent(_))));
        assert_eq!(
            tag,
            CaseTag::NonExistent { reason: NonExistenceReason::AllRootsNegative }
        );
        let on_axis = ic([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(ClosedFormCurve::new(&ROT_Z, &on_axis, (0.0, 1.0)).is_err());
    }

    #[test]
    fn inconsistent_seed_is_reported() {
        // Claim the annulus case for a start outside [2(q0-1), 2(q0+1)].
        let start = ic([1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let inv = invariants_from_ic(&start);
        let r = solve_params(CaseTag::PlanarAnnulus { q0: 3.0 }, &inv, &start);
        assert!(matches!(r, Err(Error::InconsistentIc(_))), "{r:?}");
    }

    #[test]
    fn rotated_axes_use_permutation_adapter() {
        let base = general_ic();
        let reference = curve(base);
        for axis in [Axis::X, Axis::Y] {
            let field = KillingField::Rotation { axis };
            let moved = axis.state_from_canonical(base);
            let c = ClosedFormCurve::new(&field, &moved, (0.0, 3.0)).unwrap();
            for t in [0.0, 0.7, 2.9] {
                let a = c.eval(t).unwrap();
                let b = axis.state_from_canonical(reference.eval(t).unwrap());
                assert!((a.pos - b.pos).max_abs() < 1e-14);
                assert!(fd_residual(|s| c.eval(s), &field, t, 1e-4).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn arc_length_integral_matches_inverse_sn() {
        let m = Modulus::new(FRAC_1_SQRT_2).unwrap();
        for f in [0.1, 0.5, 1.2, 1.9881, 2.0] {
            let quad = planar_q0_zero_arc_length(0.0, f, 1e-12).unwrap();
            let via_sn = inverse_sn((2.0 * f / (2.0 + f)).sqrt(), m).unwrap();
            assert!((quad - via_sn).abs() < 1e-10, "f = {f}: {quad} vs {via_sn}");
        }
    }

    #[test]
    fn riemann_pipeline_shape() {
        let pts = riemann_planar_q0_zero(1.41, 2.0, 100, 1000).unwrap();
        assert_eq!(pts.len(), 101);
        assert_eq!(pts[0].t, 0.0);
        assert!((pts[100].rho - 2f64.sqrt()).abs() < 1e-15);
        assert!(pts.windows(2).all(|w| w[1].t > w[0].t && w[1].z < w[0].z));
    }

    fn every_solvable_curve() -> Vec<(KillingField, ClosedFormCurve)> {
        let w_helix = -2.0 / (1.0 + 5f64.sqrt());
        let phi0 = PI / 6.0;
        let trans = KillingField::Translation { axis: Axis::Z, strength: 2.0 };
        let starts = [
            (ROT_Z, ic([1.0, 0.0, 0.0, 0.75f64.sqrt(), 0.0, -0.5])),
            (ROT_Z, ic([phi0.cos(), phi0.sin(), 0.0, -0.75f64.sqrt() * phi0.cos(), -0.75f64.sqrt() * phi0.sin(), 0.5])),
            (ROT_Z, ic([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])),
            (ROT_Z, ic([2.0, 0.0, 0.0, 0.0, 0.0, 1.0])),
            (ROT_Z, general_ic()),
            (ROT_Z, ic([1.0, 0.0, 0.0, 0.0, -(-w_helix).sqrt(), w_helix])),
            (trans, ic([0.0, 0.0, 0.0, 0.75f64.sqrt(), 0.0, 0.5])),
        ];
        starts
            .into_iter()
            .map(|(f, s)| (f, ClosedFormCurve::new(&f, &s, (-1.0, 12.0)).unwrap()))
            .collect()
    }

    #[test]
    fn unit_speed_by_finite_differences() {
        let h = 1e-4;
        for (_, c) in every_solvable_curve() {
            for i in 0..200 {
                let t = 0.05 * i as f64;
                let p = |k: f64| c.eval(t + k * h).unwrap().pos;
                let v = (p(-2.0) - p(2.0) + (p(1.0) - p(-1.0)) * 8.0) * (1.0 / (12.0 * h));
                assert!((v.norm() - 1.0).abs() <= 1e-8, "{}: t {t}, |v| {}", c.case(), v.norm());
            }
        }
    }

    #[test]
    fn radius_stays_in_admissible_band() {
        for (_, c) in every_solvable_curve() {
            for i in 0..=2000 {
                let t = -1.0 + 0.0065 * i as f64;
                let s = c.eval(t).unwrap();
                let rho = s.pos.x.hypot(s.pos.y);
                let ok = match c.case() {
                    CaseTag::GeneralElliptic { a, b, .. } => {
                        (a - 1e-12..=b + 1e-12).contains(&(rho * rho))
                    }
                    CaseTag::PlanarSech => rho <= 2.0 + 1e-12,
                    CaseTag::PlanarBounded { q0: 0.0 } => rho <= 2f64.sqrt() + 1e-12,
                    CaseTag::PlanarBounded { q0 } => rho * rho <= 2.0 * (q0 + 1.0) + 1e-12,
                    CaseTag::PlanarAnnulus { q0 } => {
                        (2.0 * (q0 - 1.0) - 1e-12..=2.0 * (q0 + 1.0) + 1e-12).contains(&(rho * rho))
                    }
                    CaseTag::HelixCaseII { .. } => (rho - c.invariants().rho0).abs() <= 1e-12,
                    _ => true,
                };
                assert!(ok, "{}: t {t}, ρ {rho}", c.case());
            }
        }
    }

    #[test]
    fn torsion_to_curvature_ratio_ignores_strength() {
        for w0 in [0.1, 0.5, -0.7] {
            let ratios: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
                .iter()
                .map(|&s| {
                    let (k, t) = classical_curvature_torsion(s, w0).unwrap();
                    t / k
                })
                .collect();
            assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-15), "{ratios:?}");
        }
    }

    #[test]
    fn decreasing_branch_crosses_axis_smoothly() {
        // Start moving inward: the planar curve passes through the axis.
        let start = ic([1.0, 0.0, 0.0, -0.75f64.sqrt(), 0.0, -0.5]);
        let c = curve(start);
        assert_eq!(c.params().eps, -1);
        let got = c.eval(0.0).unwrap();
        assert!((got.vel - start.vel).max_abs() < 1e-12);
        let crossing = (0..1000)
            .map(|i| i as f64 * 0.01)
            .find(|&t| c.eval(t).unwrap().pos.x < 0.0)
            .expect("crosses the axis");
        assert!(fd_residual(|s| c.eval(s), &ROT_Z, crossing, 1e-4).unwrap() < 1e-8);
    }
}
