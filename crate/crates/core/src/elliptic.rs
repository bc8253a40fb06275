//! The Weierstrass ℘ function with invariants g₂ = 1, g₃ = 0.
//!
//! The branch points are the roots of 4p³ − p, namely e₁ = 1/2, e₂ = 0,
//! e₃ = −1/2, and the period lattice is square: half-periods ω/√8 (real)
//! and iω/√8, where
//!
//! ```text
//! ω = ∫₁^∞ dx / [x(x−1)]^{3/4} = Γ(1/2)Γ(1/4)/Γ(3/4) ≈ 5.244115109
//! ```
//!
//! Evaluation strategy: reduce the argument modulo the lattice, halve it
//! until it sits inside the Laurent-series disk (|z| ≤ 0.9), evaluate the
//! series for the pair (℘, ℘′), then undo the halvings with the algebraic
//! duplication law for points on the curve ℘′² = 4℘³ − ℘. This gives near
//! uniform accuracy without theta functions.

use num_complex::Complex64;
use std::sync::OnceLock;
use thiserror::Error;

use crate::quad;

/// Radius inside which the Laurent series is evaluated directly.
pub const SERIES_RADIUS: f64 = 0.9;

/// Distance from a lattice point below which the argument counts as a pole.
pub const POLE_TOLERANCE: f64 = 1e-8;

/// Stop adding Laurent terms once |z^{2k-2}| falls below this.
const SERIES_TERM_CUTOFF: f64 = 1e-18;

const MAX_SERIES_COEFFS: usize = 28;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    /// The argument is within [`POLE_TOLERANCE`] of a lattice point.
    #[error("argument {0} is within pole tolerance of a lattice point")]
    PoleProximity(Complex64),
}

/// ω = ∫₁^∞ dx/[x(x−1)]^{3/4}, cached after the first call.
///
/// The integral is split at x = 2. On (1, 2] the substitution x = 1 + u⁴
/// removes the (x−1)^{-3/4} endpoint singularity; on [2, ∞) the chain
/// x = 1/t, t = s² compresses the tail and removes the remaining t^{-1/2}
/// factor, leaving two smooth integrands.
pub fn omega_constant() -> f64 {
    static OMEGA: OnceLock<f64> = OnceLock::new();
    *OMEGA.get_or_init(|| {
        let near = quad::integrate(|u: f64| 4.0 / (1.0 + u.powi(4)).powf(0.75), 0.0, 1.0, 1e-13)
            .expect("omega quadrature (near piece)");
        let tail = quad::integrate(
            |s: f64| 2.0 / (1.0 - s * s).powf(0.75),
            0.0,
            1.0 / 2f64.sqrt(),
            1e-13,
        )
        .expect("omega quadrature (tail piece)");
        near.value + tail.value
    })
}

/// Real half-period ω/√8 of the lattice used throughout.
pub fn real_half_period() -> f64 {
    static W1: OnceLock<f64> = OnceLock::new();
    *W1.get_or_init(|| omega_constant() / 8f64.sqrt())
}

/// Record of the argument reduction applied before series evaluation.
///
/// Reconstruction: z = reduced · 2^doublings + shifts_real·2ω₁ + shifts_imag·2ω₃
/// with ω₁ = ω/√8 and ω₃ = iω/√8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeReduction {
    pub reduced: Complex64,
    pub shifts_real: i64,
    pub shifts_imag: i64,
    pub doublings: u32,
}

impl LatticeReduction {
    /// Rebuild the original argument from the record.
    pub fn reconstruct(&self) -> Complex64 {
        let p2 = 2f64.powi(self.doublings as i32);
        let w2 = 2.0 * real_half_period();
        self.reduced * p2
            + Complex64::new(self.shifts_real as f64 * w2, self.shifts_imag as f64 * w2)
    }
}

/// Reduce z modulo the period lattice and halve into the series disk.
pub fn reduce_argument(z: Complex64) -> Result<LatticeReduction, EllipticError> {
    let w2 = 2.0 * real_half_period();
    let shifts_real = (z.re / w2).round();
    let shifts_imag = (z.im / w2).round();
    let mut reduced = Complex64::new(z.re - shifts_real * w2, z.im - shifts_imag * w2);
    if reduced.norm() < POLE_TOLERANCE {
        return Err(EllipticError::PoleProximity(z));
    }
    let mut doublings = 0u32;
    while reduced.norm() > SERIES_RADIUS {
        reduced *= 0.5;
        doublings += 1;
    }
    Ok(LatticeReduction {
        reduced,
        shifts_real: shifts_real as i64,
        shifts_imag: shifts_imag as i64,
        doublings,
    })
}

/// Laurent coefficients c_k of ℘(z) = z⁻² + Σ_{k≥2} c_k z^{2k−2}.
///
/// c₂ = g₂/20, c₃ = g₃/28 = 0, and for k ≥ 4
/// c_k = 3 Σ_{m=2}^{k−2} c_m c_{k−m} / ((2k+1)(k−3)).
fn series_coeffs() -> &'static [f64; MAX_SERIES_COEFFS] {
    static COEFFS: OnceLock<[f64; MAX_SERIES_COEFFS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut c = [0.0f64; MAX_SERIES_COEFFS];
        c[2] = 1.0 / 20.0;
        c[3] = 0.0;
        for k in 4..MAX_SERIES_COEFFS {
            let mut s = 0.0;
            for m in 2..=(k - 2) {
                s += c[m] * c[k - m];
            }
            c[k] = 3.0 * s / (((2 * k + 1) * (k - 3)) as f64);
        }
        c
    })
}

/// (℘, ℘′) by Laurent series; valid for |z| ≤ [`SERIES_RADIUS`].
fn wp_pair_series(z: Complex64) -> (Complex64, Complex64) {
    let c = series_coeffs();
    let z2 = z * z;
    let inv_z2 = 1.0 / z2;
    let mut p = inv_z2;
    let mut dp = -2.0 * inv_z2 / z;
    // zpow = z^{2k-2}; c₃ = 0, so the cutoff watches the power, not the term.
    let mut zpow = z2;
    for (k, &ck) in c.iter().enumerate().skip(2) {
        p += ck * zpow;
        dp += (2 * k - 2) as f64 * ck * zpow / z;
        if zpow.norm() < SERIES_TERM_CUTOFF {
            break;
        }
        zpow *= z2;
    }
    (p, dp)
}

/// Duplication on the curve y² = 4x³ − x: (℘, ℘′)(w) → (℘, ℘′)(2w).
///
/// Tangent-line doubling: slope m = ℘″/℘′ = (6℘² − 1/2)/℘′,
/// ℘(2w) = m²/4 − 2℘, ℘′(2w) = −(℘′ + m(℘(2w) − ℘)).
fn duplicate(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    let slope = (6.0 * x * x - 0.5) / y;
    let x2 = 0.25 * slope * slope - 2.0 * x;
    let y2 = -(y + slope * (x2 - x));
    (x2, y2)
}

fn wp_pair_reduced(r: &LatticeReduction) -> (Complex64, Complex64) {
    let (mut x, mut y) = wp_pair_series(r.reduced);
    for _ in 0..r.doublings {
        let (nx, ny) = duplicate(x, y);
        x = nx;
        y = ny;
    }
    (x, y)
}

/// (℘(z), ℘′(z)) or a pole report. Shared by [`wp`] and [`wp_prime`].
pub fn wp_pair(z: Complex64) -> Result<(Complex64, Complex64), EllipticError> {
    let r = reduce_argument(z)?;
    Ok(wp_pair_reduced(&r))
}

/// A ℘ (or ℘′) evaluation: either a finite value or a pole marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpValue {
    pub value: Complex64,
    pub is_pole: bool,
}

impl WpValue {
    fn pole() -> Self {
        WpValue {
            value: Complex64::new(f64::INFINITY, 0.0),
            is_pole: true,
        }
    }

    fn finite(value: Complex64) -> Self {
        WpValue {
            value,
            is_pole: false,
        }
    }

    /// The value when off the lattice, `None` at poles.
    pub fn ok(&self) -> Option<Complex64> {
        (!self.is_pole).then_some(self.value)
    }
}

/// ℘(z; g₂=1, g₃=0).
pub fn wp(z: Complex64) -> WpValue {
    match wp_pair(z) {
        Ok((p, _)) => WpValue::finite(p),
        Err(EllipticError::PoleProximity(_)) => WpValue::pole(),
    }
}

/// ℘′(z; g₂=1, g₃=0) = d℘/dz.
pub fn wp_prime(z: Complex64) -> WpValue {
    match wp_pair(z) {
        Ok((_, dp)) => WpValue::finite(dp),
        Err(EllipticError::PoleProximity(_)) => WpValue::pole(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA_REF: f64 = 5.244115108584240; // B(1/2,1/4), independently computed

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn omega_matches_reference() {
        assert!((omega_constant() - 5.244115106).abs() <= 1e-8);
        assert!((omega_constant() - OMEGA_REF).abs() <= 1e-11);
    }

    #[test]
    fn reduction_identity_inside_radius() {
        let z = c(0.3, 0.1);
        let r = reduce_argument(z).unwrap();
        assert_eq!(r.reduced, z);
        assert_eq!((r.shifts_real, r.shifts_imag, r.doublings), (0, 0, 0));
    }

    #[test]
    fn reduction_unwinds_one_real_period() {
        let w2 = 2.0 * real_half_period();
        let z = c(0.3 + w2, 0.1);
        let r = reduce_argument(z).unwrap();
        assert_eq!(r.shifts_real, 1);
        assert_eq!(r.shifts_imag, 0);
        assert!((r.reduced - c(0.3, 0.1)).norm() < 1e-14);
    }

    #[test]
    fn reduction_halves_and_reconstructs() {
        let z = c(1.8, 1.8);
        let r = reduce_argument(z).unwrap();
        assert!(r.doublings >= 1);
        assert!(r.reduced.norm() <= SERIES_RADIUS);
        assert!((r.reconstruct() - z).norm() <= 1e-14 * z.norm());
    }

    #[test]
    fn reduction_flags_poles() {
        assert!(reduce_argument(c(0.0, 0.0)).is_err());
        let w2 = 2.0 * real_half_period();
        assert!(reduce_argument(c(3.0 * w2, -w2) + c(1e-9, 0.0)).is_err());
        assert!(wp(c(0.0, 0.0)).is_pole);
    }

    #[test]
    fn wp_hits_branch_points_at_half_periods() {
        let w1 = real_half_period();
        // e1 = 1/2 at the real half-period, e2 = 0 at the diagonal one.
        assert!((wp(c(w1, 0.0)).value - 0.5).norm() < 1e-11);
        assert!(wp(c(w1, w1)).value.norm() < 1e-11);
        assert!(wp_prime(c(w1, 0.0)).value.norm() < 1e-10);
    }

    #[test]
    fn wp_periodicity() {
        let w2 = 2.0 * real_half_period();
        let z = c(0.4, 0.2);
        let base = wp(z).value;
        assert!((wp(z + c(w2, 0.0)).value - base).norm() <= 1e-10 * base.norm());
        assert!((wp(z + c(0.0, w2)).value - base).norm() <= 1e-10 * base.norm());
    }

    #[test]
    fn wp_parity() {
        let z = c(0.5, 0.25);
        assert!((wp(-z).value - wp(z).value).norm() <= 1e-12 * wp(z).value.norm());
        let dp = wp_prime(z).value;
        assert!((wp_prime(-z).value + dp).norm() <= 1e-12 * dp.norm());
    }

    #[test]
    fn wp_reference_values() {
        // Reference values from an independent high-precision evaluation
        // (Jacobi sn route, 30 significant digits).
        let cases = [
            (c(0.3, 0.1), c(8.0039997066027477, -5.9969992200048662)),
            (c(0.7, 0.3), c(1.2089373171616393, -1.2274077462807147)),
            (c(0.5, 0.25), c(1.9293511948536294, -2.5474910672232774)),
        ];
        for (z, want) in cases {
            let got = wp(z).value;
            assert!(
                (got - want).norm() <= 1e-10 * want.norm().max(1.0),
                "wp({z}) = {got}, want {want}"
            );
        }
        let dp_cases = [
            (c(0.7, 0.3), c(-1.5091467393800545, 4.2748651528435528)),
            (c(0.5, 0.25), c(-1.9981857221165212, 11.2891999020321545)),
        ];
        for (z, want) in dp_cases {
            let got = wp_prime(z).value;
            assert!(
                (got - want).norm() <= 1e-10 * want.norm().max(1.0),
                "wp'({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn ode_residual_spot_check() {
        let z = c(0.7, 0.3);
        let (p, dp) = wp_pair(z).unwrap();
        let residual = (dp * dp - (4.0 * p * p * p - p)).norm();
        assert!(residual <= 1e-9 * (1.0 + p.norm().powi(3)));
    }

    #[test]
    fn diagonal_ray_is_purely_imaginary() {
        // On the ray z = t(1+i) the square lattice forces Re ℘ = 0; the
        // arithmetic keeps that exact, which downstream probability code
        // relies on for exact boundary values.
        for &t in &[0.37, 1.3, 1.8] {
            let p = wp(c(t, t)).value;
            assert_eq!(p.re, 0.0);
        }
    }
}
