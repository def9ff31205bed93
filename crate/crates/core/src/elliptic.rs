//! Real-argument elliptic kernel: the incomplete integral of the first kind
//! `F(φ, k)`, the complete integral `K(k)`, and the Jacobi functions
//! `sn`, `cn`, `dn` with amplitude `am`.
//!
//! `F` is evaluated through Carlson's symmetric integral `R_F` (duplication
//! iteration). The Jacobi functions come from the descending Landen / AGM
//! recursion for the amplitude. Both converge quadratically or better and
//! need no tables.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::{Error, Result};

/// Below this value of `1 - k²` the AGM stalls and the hyperbolic
/// degenerate branch is used instead.
const HYPERBOLIC_SWITCH: f64 = 1e-14;

/// Duplication stops once every argument is within this relative distance
/// of the mean. The fifth-order tail then leaves an error near 1e-18.
const RF_ERRTOL: f64 = 1e-3;

/// Elliptic modulus `k` with `0 <= k <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Modulus(f64);

impl Modulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::Domain(format!("modulus k = {k} not in [0, 1]")));
        }
        Ok(Self(k))
    }

    #[inline]
    pub fn k(self) -> f64 {
        self.0
    }

    /// `k' = sqrt(1 - k²)`, formed without cancellation near `k = 1`.
    #[inline]
    pub fn complementary(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }

    fn is_hyperbolic(self) -> bool {
        (1.0 - self.0) * (1.0 + self.0) < HYPERBOLIC_SWITCH
    }
}

/// Jacobi elliptic functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticEval {
    pub u: f64,
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
    /// Jacobi amplitude in radians; `sn = sin(am)`, `cn = cos(am)`.
    pub am: f64,
}

/// Carlson's symmetric integral `R_F(x, y, z)`; at most one argument may be zero.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> Result<f64> {
    if x < 0.0 || y < 0.0 || z < 0.0 || !(x + y + z).is_finite() {
        return Err(Error::Domain(format!("R_F({x}, {y}, {z})")));
    }
    let zeros = [x, y, z].iter().filter(|v| **v == 0.0).count();
    if zeros > 1 {
        return Err(Error::Divergence(format!("R_F({x}, {y}, {z})")));
    }

    let (mut x, mut y, mut z) = (x, y, z);
    let (mut mu, mut dx, mut dy, mut dz);
    let mut iterations = 0;
    loop {
        mu = (x + y + z) / 3.0;
        dx = (mu - x) / mu;
        dy = (mu - y) / mu;
        dz = (mu - z) / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < RF_ERRTOL {
            break;
        }
        iterations += 1;
        if iterations > 100 {
            return Err(Error::Accuracy("R_F duplication did not converge".into()));
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
    }
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    Ok((1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / mu.sqrt())
}

/// Complete elliptic integral of the first kind `K(k)`; diverges at `k = 1`.
pub fn complete_k(k: Modulus) -> Result<f64> {
    let kc = k.complementary();
    if kc == 0.0 {
        return Err(Error::Divergence("K(1)".into()));
    }
    carlson_rf(0.0, kc * kc, 1.0)
}

/// Incomplete elliptic integral of the first kind
/// `F(φ, k) = ∫₀^φ dθ / sqrt(1 - k² sin²θ)`.
///
/// Any real `φ` is accepted through `F(φ + nπ, k) = F(φ, k) + 2nK(k)`.
/// At `k = 1` the integral is finite only for `|φ| < π/2`.
pub fn incomplete_elliptic_f(phi: f64, k: Modulus) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::Domain(format!("amplitude φ = {phi}")));
    }
    if k.k() == 1.0 {
        if phi.abs() >= FRAC_PI_2 {
            return Err(Error::Divergence(format!("F({phi}, 1)")));
        }
        // gd⁻¹(φ)
        return Ok(phi.sin().atanh());
    }

    let n = (phi / PI).round();
    let reduced = phi - n * PI;
    let (s, c) = reduced.sin_cos();
    let m = k.k() * k.k();
    let partial = s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)?;
    if n == 0.0 {
        Ok(partial)
    } else {
        Ok(partial + 2.0 * n * complete_k(k)?)
    }
}

/// Jacobi amplitude `am(u, k)`.
pub fn amplitude(u: f64, k: Modulus) -> f64 {
    if k.k() == 0.0 {
        return u;
    }
    if k.is_hyperbolic() {
        return u.sinh().atan();
    }

    // Descending AGM: a₀ = 1, b₀ = k', c₀ = k.
    const MAX_LEVELS: usize = 32;
    let mut a = [0.0_f64; MAX_LEVELS + 1];
    let mut c = [0.0_f64; MAX_LEVELS + 1];
    a[0] = 1.0;
    c[0] = k.k();
    let mut b = k.complementary();
    let mut levels = 0;
    while levels < MAX_LEVELS && c[levels].abs() > f64::EPSILON * a[levels] {
        let (an, bn) = (a[levels], b);
        a[levels + 1] = 0.5 * (an + bn);
        c[levels + 1] = 0.5 * (an - bn);
        b = (an * bn).sqrt();
        levels += 1;
    }

    let mut phi = (1u64 << levels) as f64 * a[levels] * u;
    for n in (1..=levels).rev() {
        phi = 0.5 * (phi + (c[n] / a[n] * phi.sin()).asin());
    }
    phi
}

/// Jacobi elliptic functions `sn`, `cn`, `dn` (and the amplitude) at `u`.
pub fn jacobi_sn_cn_dn(u: f64, k: Modulus) -> EllipticEval {
    if k.is_hyperbolic() && k.k() > 0.0 {
        let sech = 1.0 / u.cosh();
        return EllipticEval {
            u,
            sn: u.tanh(),
            cn: sech,
            dn: sech,
            am: u.sinh().atan(),
        };
    }
    let am = amplitude(u, k);
    let (sn, cn) = am.sin_cos();
    let kc = k.complementary();
    let kk = k.k();
    // dn² = k'² + k² cn² keeps both terms positive.
    let dn = (kc * kc + kk * kk * cn * cn).sqrt();
    EllipticEval { u, sn, cn, dn, am }
}

/// Inverse elliptic sine: the `u` with `sn(u, k) = y` and `|u| <= K(k)`.
pub fn inverse_sn(y: f64, k: Modulus) -> Result<f64> {
    if !(-1.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("sn⁻¹ argument {y} outside [-1, 1]")));
    }
    incomplete_elliptic_f(y.asin(), k)
}
