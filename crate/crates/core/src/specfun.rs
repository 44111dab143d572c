//! Complete elliptic integral of the first kind and the Jacobi elliptic
//! functions, both computed from the arithmetic-geometric mean.
//!
//! Everything here takes the *parameter* `m` (not the modulus `k = √m`), so
//! `cn(u, 0) = cos u` and `K(0) = π/2`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AGM_MAX_ITER: usize = 32;
const AGM_TOL: f64 = 1e-15;

/// Elliptic parameter `m`, restricted to `0 ≤ m < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_finite() && (0.0..1.0).contains(&m) {
            Ok(Self(m))
        } else {
            Err(Error::Domain(format!(
                "elliptic parameter must satisfy 0 <= m < 1, got {m}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EllipticModulus {
    type Error = Error;

    fn try_from(m: f64) -> Result<Self> {
        Self::new(m)
    }
}

impl From<EllipticModulus> for f64 {
    fn from(m: EllipticModulus) -> f64 {
        m.0
    }
}

/// Values of the three Jacobi functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiTriple {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// `K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ) = π / (2 AGM(1, √(1−m)))`.
pub fn complete_k(m: EllipticModulus) -> f64 {
    let mut a = 1.0_f64;
    let mut b = (1.0 - m.0).sqrt();
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    FRAC_PI_2 / a
}

/// `sn`, `cn` and `dn` at `(u, m)` by the descending Landen recursion.
pub fn jacobi(u: f64, m: EllipticModulus) -> Result<JacobiTriple> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("jacobi argument must be finite, got {u}")));
    }
    let m = m.0;
    if m == 0.0 {
        return Ok(JacobiTriple { sn: u.sin(), cn: u.cos(), dn: 1.0 });
    }

    // Reduce into one real period; the recursion loses digits linearly in |u|.
    let period = 4.0 * complete_k(EllipticModulus(m));
    let u = u - period * (u / period).round();

    let mut a = [0.0_f64; AGM_MAX_ITER + 1];
    let mut c = [0.0_f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while n < AGM_MAX_ITER && c[n].abs() > AGM_TOL {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }

    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let sn = phi.sin();
    // dn > 0 for m < 1; this form stays accurate where cn vanishes.
    Ok(JacobiTriple { sn, cn: phi.cos(), dn: (1.0 - m * sn * sn).sqrt() })
}

pub fn jacobi_cn(u: f64, m: EllipticModulus) -> Result<f64> {
    jacobi(u, m).map(|j| j.cn)
}

pub fn jacobi_sn(u: f64, m: EllipticModulus) -> Result<f64> {
    jacobi(u, m).map(|j| j.sn)
}

pub fn jacobi_dn(u: f64, m: EllipticModulus) -> Result<f64> {
    jacobi(u, m).map(|j| j.dn)
}
