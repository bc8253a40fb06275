//! The Schwarz–Christoffel map between the upper half-plane and the
//! right isoceles triangle with vertices 0, ω, (1+i)ω.
//!
//! Building blocks, all on the closed upper half-plane H̄:
//!
//! - `sc_branch`: the branch of [z(z−1)]^{3/4} that is real on [1, ∞),
//!   written (r₀r₁)^{3/4} exp(3i(θ₀+θ₁)/4) with θ₀, θ₁ ∈ [0, π].
//! - `phi`: z ↦ √(z/(4(z−1))) with the root chosen so Re ≥ 0; maps H̄ onto
//!   the closed fourth quadrant.
//! - `map_to_triangle`: F(ζ) = ∫₁^ζ dz/f(z), the conformal map of H̄ onto the
//!   triangle; F(1) = 0, F(∞) = ω, F(0) = (1+i)ω.
//! - `map_to_half_plane`: the inverse, ψ(Z) = 4℘²/(4℘² − 1) at ℘ = ℘(Z/√8), and its
//!   derivative dψ/dZ = −√8 (℘/℘′)³.
//!
//! The integrand 1/f has integrable endpoint singularities of exponent
//! −3/4 at z = 0 and z = 1; a local substitution t = u⁴ restores smoothness.
//! Near z = 1 the difference z − 1 is propagated in exact form (t·(ζ−1))
//! rather than recomputed as (1 + t(ζ−1)) − 1, which would cancel
//! catastrophically.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::elliptic;
use crate::quad;

/// Minimum distance the straight integration path keeps from a singular
/// point of 1/f before a detour is taken.
const PATH_CLEARANCE: f64 = 0.05;

/// |ψ| above this reports the pole at the triangle vertex ω.
const PSI_POLE_MAGNITUDE: f64 = 1e12;

/// Per-segment absolute quadrature tolerance of `map_to_triangle`.
const F_SEGMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("{0} is a branch point of [z(z-1)]^(3/4)")]
    BranchPoint(Complex64),
    #[error("point {0} lies outside the closed upper half-plane")]
    NotInHalfPlane(Complex64),
    #[error("point {0} lies outside the closed triangle [0, omega, (1+i)omega]")]
    NotInTriangle(Complex64),
    #[error("psi has a pole at the triangle vertex omega (|psi| > 1e12 near {0})")]
    PoleAtVertex(Complex64),
    #[error("dpsi/dZ is degenerate at {0}: P' vanishes (triangle vertex)")]
    DegenerateDerivative(Complex64),
    #[error("map_to_triangle quadrature failed: {0}")]
    Quadrature(#[from] quad::QuadNonConvergence),
}

/// A point of the closed upper half-plane H̄ = {Im z ≥ 0}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint(Complex64);

impl HalfPlanePoint {
    pub fn new(z: Complex64) -> Result<Self, ConformalError> {
        if !(z.im >= -1e-12) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(ConformalError::NotInHalfPlane(z));
        }
        Ok(HalfPlanePoint(z))
    }

    pub fn real(x: f64) -> Self {
        HalfPlanePoint(Complex64::new(x, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// A point of the closed triangle with vertices 0, ω, (1+i)ω:
/// 0 ≤ Im Z ≤ Re Z ≤ ω up to a 1e-12·ω membership tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrianglePoint(Complex64);

impl TrianglePoint {
    pub fn new(z: Complex64) -> Result<Self, ConformalError> {
        let omega = elliptic::omega_constant();
        let tol = 1e-12 * omega.max(1.0);
        let inside = z.im >= -tol && z.im <= z.re + tol && z.re <= omega + tol;
        if !inside || !z.re.is_finite() || !z.im.is_finite() {
            return Err(ConformalError::NotInTriangle(z));
        }
        Ok(TrianglePoint(z))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// Arguments of z and z−1 with the upper-half-plane convention θ ∈ [0, π].
///
/// Rounding can leave boundary points with Im = -0.0 or a tiny negative
/// imaginary part; those are snapped onto the real axis.
fn upper_arg(w: Complex64, positive_axis_cut: f64) -> f64 {
    if w.im > 0.0 {
        w.arg()
    } else if w.re >= positive_axis_cut {
        0.0
    } else {
        PI
    }
}

fn is_branch_point(z: Complex64) -> bool {
    z.norm() < 1e-14 || (z - Complex64::new(1.0, 0.0)).norm() < 1e-14
}

/// The branch of [z(z−1)]^{3/4}: (r₀r₁)^{3/4} exp(3i(θ₀+θ₁)/4).
///
/// On the real axis this is the continuous extension of the interior
/// formula: real for x ≥ 1, phase −i for x ≤ 0, phase exp(3iπ/4) on (0, 1).
pub fn sc_branch(z: &HalfPlanePoint) -> Result<Complex64, ConformalError> {
    let zv = z.value();
    if is_branch_point(zv) {
        return Err(ConformalError::BranchPoint(zv));
    }
    Ok(f_from_parts(zv, zv - Complex64::new(1.0, 0.0)))
}

/// f given z and z−1 separately, so callers control cancellation in z−1.
fn f_from_parts(z: Complex64, zm1: Complex64) -> Complex64 {
    let r = (z.norm() * zm1.norm()).powf(0.75);
    let theta = upper_arg(z, 0.0) + upper_arg(zm1, 0.0);
    r * Complex64::from_polar(1.0, 0.75 * theta)
}

/// φ(z) = √(z/(4(z−1))) with Re ≥ 0: (1/2)√(r₀/r₁) exp(i(θ₀−θ₁)/2).
///
/// Maps H̄ homeomorphically onto the closed fourth quadrant, with φ(∞) = 1/2.
pub fn quadrant_map(z: &HalfPlanePoint) -> Result<Complex64, ConformalError> {
    let zv = z.value();
    let zm1 = zv - Complex64::new(1.0, 0.0);
    if zm1.norm() < 1e-14 {
        return Err(ConformalError::BranchPoint(zv));
    }
    let modulus = 0.5 * (zv.norm() / zm1.norm()).sqrt();
    let theta = 0.5 * (upper_arg(zv, 0.0) - upper_arg(zm1, 0.0));
    Ok(modulus * Complex64::from_polar(1.0, theta))
}

/// Distance from point `s` to the segment [p, q].
fn segment_distance(p: Complex64, q: Complex64, s: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (s - p).norm();
    }
    let t = ((s - p).re * d.re + (s - p).im * d.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (s - (p + d * t)).norm()
}

/// ∫ dz/f over the straight segment [p, q].
///
/// `p_m1` and `q_m1` are p−1 and q−1 supplied exactly; z−1 along the path is
/// formed from them without cancellation. A t = u⁴ substitution is applied
/// at any endpoint that coincides with a singular point of 1/f (0 or 1).
fn integrate_segment(p: Complex64, q: Complex64) -> Result<Complex64, ConformalError> {
    if (q - p).norm() < 1e-14 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let singular_p = is_branch_point(p);
    let singular_q = is_branch_point(q);
    if singular_p && singular_q {
        let mid = 0.5 * (p + q);
        return Ok(integrate_segment(p, mid)? + integrate_segment(mid, q)?);
    }
    if singular_q {
        return Ok(-(integrate_segment(q, p)?));
    }
    let d = q - p;
    let pm1 = p - Complex64::new(1.0, 0.0);
    if singular_p {
        // z = p + u^4 d; if p = 1 then z-1 = u^4 d exactly; if p = 0 then
        // z = u^4 d exactly and z-1 = u^4 d - 1 is well conditioned.
        let p_is_one = (p - Complex64::new(1.0, 0.0)).norm() < 1e-14;
        let r = quad::integrate(
            |u: f64| {
                let t = u * u * u * u;
                let step = t * d;
                let (z, zm1) = if p_is_one {
                    (p + step, step)
                } else {
                    (step, step - Complex64::new(1.0, 0.0))
                };
                4.0 * u * u * u * d / f_from_parts(z, zm1)
            },
            0.0,
            1.0,
            F_SEGMENT_TOL,
        )?;
        Ok(r.value)
    } else {
        let r = quad::integrate(
            |t: f64| {
                let step = t * d;
                d / f_from_parts(p + step, pm1 + step)
            },
            0.0,
            1.0,
            F_SEGMENT_TOL,
        )?;
        Ok(r.value)
    }
}

/// Plan the integration path from 1 to ζ.
///
/// The straight segment is used whenever it keeps [`PATH_CLEARANCE`] away
/// from the interior singular point 0; otherwise the path detours through i.
/// A ζ close to (but distinct from) 0 is reached through 0 itself, putting
/// the singularity at a substituted endpoint instead of next to one.
fn plan_path(zeta: Complex64) -> Vec<(Complex64, Complex64)> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    if (zeta - one).norm() < 1e-14 {
        return vec![];
    }
    if zeta.norm() < 1e-14 {
        return vec![(one, zero)];
    }
    if zeta.norm() < PATH_CLEARANCE {
        return vec![(one, zero), (zero, zeta)];
    }
    if segment_distance(one, zeta, zero) < PATH_CLEARANCE {
        return vec![(one, i), (i, zeta)];
    }
    vec![(one, zeta)]
}

/// F(ζ) = ∫₁^ζ dz/f(z): the conformal map of H̄ onto the triangle.
///
/// Path-independent inside H̄ ∖ {0, 1}; absolute quadrature error ≤ 1e−9.
pub fn map_to_triangle(zeta: &HalfPlanePoint) -> Result<TrianglePoint, ConformalError> {
    let zv = zeta.value();
    let mut total = Complex64::new(0.0, 0.0);
    for (p, q) in plan_path(zv) {
        total += integrate_segment(p, q)?;
    }
    // Quadrature noise may land a boundary image epsilon outside the closed
    // triangle; snap within a 1e-8 budget before enforcing membership.
    let omega = elliptic::omega_constant();
    let snap = 1e-8;
    if total.im < 0.0 && total.im > -snap {
        total.im = 0.0;
    }
    if total.re < 0.0 && total.re > -snap {
        total.re = 0.0;
    }
    if total.im > total.re && total.im - total.re < snap {
        total.im = total.re;
    }
    if total.re > omega && total.re - omega < snap * omega {
        total.re = omega;
    }
    TrianglePoint::new(total)
}

/// ψ(Z) = 4℘(Z/√8)² / (4℘(Z/√8)² − 1): the inverse of F.
///
/// ψ(0) = 1 (the ℘ pole), ψ((1+i)ω) = 0, and ψ → ∞ at the vertex ω, which
/// is reported as [`ConformalError::PoleAtVertex`].
pub fn map_to_half_plane(z: &TrianglePoint) -> Result<HalfPlanePoint, ConformalError> {
    let zv = z.value();
    let scaled = zv / 8f64.sqrt();
    let p = elliptic::wp(scaled);
    if p.is_pole {
        return HalfPlanePoint::new(Complex64::new(1.0, 0.0));
    }
    let p2 = 4.0 * p.value * p.value;
    let mut out = p2 / (p2 - Complex64::new(1.0, 0.0));
    if !out.is_finite() || out.norm() > PSI_POLE_MAGNITUDE {
        return Err(ConformalError::PoleAtVertex(zv));
    }
    if out.im < 0.0 && out.im >= -1e-9 {
        out.im = 0.0;
    }
    HalfPlanePoint::new(out)
}

/// dψ/dZ = −√8 (℘(Z/√8)/℘′(Z/√8))³.
///
/// Vanishes like Z³ at the vertex 0 (where ℘ has its pole) and degenerates
/// at the vertices ω and (1+i)ω where ℘′ = 0.
pub fn map_to_half_plane_derivative(z: &TrianglePoint) -> Result<Complex64, ConformalError> {
    let zv = z.value();
    let scaled = zv / 8f64.sqrt();
    match elliptic::wp_pair(scaled) {
        Err(_) => Ok(Complex64::new(0.0, 0.0)),
        Ok((p, dp)) => {
            if dp.norm() < 1e-8 {
                return Err(ConformalError::DegenerateDerivative(zv));
            }
            let ratio = p / dp;
            Ok(-8f64.sqrt() * ratio * ratio * ratio)
        }
    }
}
