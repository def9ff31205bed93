//! Numerical route: Dormand–Prince 5(4) integration of the Lorentz
//! equation with dense output, adaptive Gauss–Kronrod quadrature, the
//! left Riemann sum used as a low-accuracy reference, and drift diagnostics
//! for the two prime integrals of the rotational field.

use serde::{Deserialize, Serialize};

use crate::fields::{magnetic_rhs, KillingField, State6, Vec3};
use crate::{Error, Result};

/// One row of a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pos: Vec3,
    pub vel: Vec3,
    /// `| |γ'| - 1 |`
    pub speed_drift: f64,
    /// Drift of the angular prime integral `x'y - y'x`.
    pub p0_drift: f64,
    /// Drift of the vertical prime integral `z' + (x² + y²)/2`.
    pub q0_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.1,
            t_end: 20.0,
            sample_dt: 0.01,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.rel_tol, self.abs_tol, self.max_step, self.t_end, self.sample_dt]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(Error::Usage(format!(
                "integrator settings must be positive and finite: {self:?}"
            )));
        }
        if self.rel_tol < 1e-14 {
            return Err(Error::Usage(format!("rel_tol {} below 1e-14", self.rel_tol)));
        }
        Ok(())
    }

    /// Uniform sample times `0, dt, 2dt, …` up to `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.sample_dt * (1.0 + 1e-12)).floor() as usize;
        (0..=n).map(|i| i as f64 * self.sample_dt).collect()
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer's DOPRI5 dense output).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Step-size controller.
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 10_000_000;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t = 0` and returns the dense-output
/// solution at each of the (ascending, non-negative) `times`.
pub fn dopri5_dense<const N: usize, F>(
    mut rhs: F,
    y0: [f64; N],
    times: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
) -> Result<Vec<[f64; N]>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(times.len());
    let Some(&t_end) = times.last() else {
        return Ok(out);
    };
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        out.push(y0);
        next += 1;
    }

    let norm = |err: &[f64; N], y: &[f64; N], yn: &[f64; N]| {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = abs_tol + rel_tol * y[i].abs().max(yn[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    };

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);

    // Initial step guess from the scale of y and y'.
    let mut h = {
        let zero = [0.0; N];
        let d0 = norm(&y, &zero, &y);
        let d1 = norm(&k1, &zero, &y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(max_step).min(t_end.max(f64::MIN_POSITIVE))
    };
    let mut err_old = 1e-4_f64;
    let mut rejected_last = false;

    for _ in 0..MAX_STEPS {
        if next >= times.len() {
            return Ok(out);
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step size {h:e} underflowed"),
            });
        }
        let h_step = h.min(t_end - t);

        let k2 = rhs(t + C2 * h_step, &axpy(&y, h_step, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h_step, &axpy(&y, h_step, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * h_step,
            &axpy(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * h_step,
            &axpy(&y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h_step,
            &axpy(
                &y,
                h_step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h_step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t + h_step, &y_new);

        let mut err_vec = [0.0; N];
        for i in 0..N {
            err_vec[i] = h_step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = norm(&err_vec, &y, &y_new);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                t,
                reason: "non-finite state".into(),
            });
        }

        // Proportional-integral controller.
        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let t_new = if h_step == t_end - t { t_end } else { t + h_step };
            if next < times.len() && times[next] <= t_new {
                let mut r2 = [0.0; N];
                let mut r3 = [0.0; N];
                let mut r4 = [0.0; N];
                let mut r5 = [0.0; N];
                for i in 0..N {
                    r2[i] = y_new[i] - y[i];
                    r3[i] = h_step * k1[i] - r2[i];
                    r4[i] = r2[i] - h_step * k7[i] - r3[i];
                    r5[i] = h_step
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                while next < times.len() && times[next] <= t_new {
                    let theta = (times[next] - t) / h_step;
                    let theta1 = 1.0 - theta;
                    let mut ys = [0.0; N];
                    for i in 0..N {
                        ys[i] = y[i]
                            + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
                    }
                    out.push(ys);
                    next += 1;
                }
            }

            let mut fac = fac11 / err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_step / fac;
            if rejected_last {
                h_new = h_new.min(h_step);
            }
            err_old = err.max(1e-4);
            rejected_last = false;
            t = t_new;
            y = y_new;
            k1 = k7;
            h = h_new.min(max_step);
        } else {
            h = h_step / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
    }
    Err(Error::IntegrationFailure {
        t,
        reason: format!("exceeded {MAX_STEPS} steps"),
    })
}

/// Prime integrals of the canonical rotational field: `(x'y - y'x, z' + ρ²/2)`.
pub fn prime_integrals(s: &State6) -> (f64, f64) {
    let (p, v) = (s.pos, s.vel);
    (
        v.x * p.y - v.y * p.x,
        v.z + 0.5 * (p.x * p.x + p.y * p.y),
    )
}

/// Builds a sample with drifts measured against the initial condition.
pub fn make_sample(field: &KillingField, ic: &State6, t: f64, s: State6) -> TrajectorySample {
    let speed_drift = (s.vel.norm() - 1.0).abs();
    let (p0_drift, q0_drift) = match field {
        KillingField::Rotation { axis } => {
            let c0 = axis.state_to_canonical(*ic);
            let c = axis.state_to_canonical(s);
            let (a0, b0) = prime_integrals(&c0);
            let (a, b) = prime_integrals(&c);
            ((a - a0).abs(), (b - b0).abs())
        }
        KillingField::Translation { .. } => (0.0, 0.0),
    };
    TrajectorySample {
        t,
        pos: s.pos,
        vel: s.vel,
        speed_drift,
        p0_drift,
        q0_drift,
    }
}

/// Integrates `γ'' = V × γ'` and samples the solution every `sample_dt`.
pub fn integrate_trajectory(
    field: &KillingField,
    ic: &State6,
    cfg: &IntegratorConfig,
) -> Result<Vec<TrajectorySample>> {
    cfg.validate()?;
    if (ic.speed() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "initial speed {} is not 1 (normal magnetic curves are unit speed)",
            ic.speed()
        )));
    }
    let times = cfg.sample_times();
    let states = dopri5_dense(
        |_t, y: &[f64; 6]| magnetic_rhs(field, &State6::from_slice(y)).to_array(),
        ic.to_array(),
        &times,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_step,
    )?;
    Ok(times
        .iter()
        .zip(states)
        .map(|(&t, y)| make_sample(field, ic, t, State6::from_slice(&y)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub max_speed_drift: f64,
    pub max_p0_drift: f64,
    pub max_q0_drift: f64,
}

pub fn drift_report(samples: &[TrajectorySample]) -> Result<DriftSummary> {
    if samples.is_empty() {
        return Err(Error::ContractViolation("drift report of an empty trajectory".into()));
    }
    Ok(samples.iter().fold(
        DriftSummary {
            max_speed_drift: 0.0,
            max_p0_drift: 0.0,
            max_q0_drift: 0.0,
        },
        |acc, s| DriftSummary {
            max_speed_drift: acc.max_speed_drift.max(s.speed_drift),
            max_p0_drift: acc.max_p0_drift.max(s.p0_drift),
            max_q0_drift: acc.max_q0_drift.max(s.q0_drift),
        },
    ))
}

// 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SUBDIVISIONS: usize = 4000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("integrand is not finite at {x}: {v}")))
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, err })
}

/// Globally adaptive 15-point Gauss–Kronrod quadrature of `f` over `[a, b]`
/// to an absolute error of `tol`.
///
/// When `tol` lies below the rounding floor of the result the estimate is
/// returned once every segment is rounding-limited.
pub fn quad_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("bad interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![gauss_kronrod_15(&mut f, a, b)?];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.err).sum();
        let floor = 100.0 * f64::EPSILON * segments.iter().map(|s| s.value.abs()).sum::<f64>();
        if err <= tol || err <= floor {
            return Ok(total);
        }
        if segments.len() >= MAX_SUBDIVISIONS {
            return Err(Error::Accuracy(format!(
                "quadrature on [{a}, {b}] stalled at error {err:e} > {tol:e}"
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Accuracy(format!(
                "quadrature segment [{}, {}] cannot be split further",
                s.a, s.b
            )));
        }
        segments.push(gauss_kronrod_15(&mut f, s.a, mid)?);
        segments.push(gauss_kronrod_15(&mut f, mid, s.b)?);
    }
}

/// Which end of the interval carries an inverse-square-root singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtSingularity {
    Lower,
    Upper,
    Both,
}

/// [`quad_adaptive`] after the substitution `ζ = a + σ²` (or `ζ = b - σ²`),
/// which removes a `1/sqrt(ζ - a)` type endpoint singularity.
pub fn quad_sqrt_endpoint<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    at: SqrtSingularity,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("bad interval [{a}, {b}]")));
    }
    match at {
        SqrtSingularity::Lower => {
            quad_adaptive(|s| 2.0 * s * f(a + s * s), 0.0, (b - a).sqrt(), tol)
        }
        SqrtSingularity::Upper => {
            quad_adaptive(|s| 2.0 * s * f(b - s * s), 0.0, (b - a).sqrt(), tol)
        }
        SqrtSingularity::Both => {
            let mid = 0.5 * (a + b);
            let half = (mid - a).sqrt();
            let lo = quad_adaptive(|s| 2.0 * s * f(a + s * s), 0.0, half, 0.5 * tol)?;
            let hi = quad_adaptive(|s| 2.0 * s * f(b - s * s), 0.0, half, 0.5 * tol)?;
            Ok(lo + hi)
        }
    }
}

/// Left-endpoint Riemann sum with `n` equal panels.
pub fn quad_riemann<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("Riemann sum needs at least one panel".into()));
    }
    let h = (b - a) / n as f64;
    Ok(h * (0..n).map(|k| f(a + k as f64 * h)).sum::<f64>())
}
