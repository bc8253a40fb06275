//! Meeting probability, meeting-location density, and conditional mean
//! meeting time for two Brownian particles on [a, b].
//!
//! With Z = x₂ + i·x₁ and both coordinates measured from a, the probability
//! that the particles meet before either escapes is
//!
//! ```text
//! P(Z) = -(2/π) Im log ℘( ω(Z−a)/(L√8) ),   L = b − a,
//! ```
//!
//! where the ℘ image lies in the closed fourth quadrant, so the argument is
//! taken in [−π/2, 0] and no winding bookkeeping is needed. The meeting
//! location has an arc-length density on the diagonal expressed through ℘
//! and ℘′; integrating it with the √2 arc-length factor recovers P. For
//! large L both collapse onto Cauchy-type limits in powers of Z/L.
//!
//! Everything here is scale invariant: only (x₁−a)/L and (x₂−a)/L enter.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::elliptic;
use crate::pde;
use crate::quad;

/// Meeting probabilities below this are considered too small to condition on.
pub const CONDITIONING_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EncounterError {
    #[error("invalid interval: need b > a, got [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid pair state ({x1}, {x2}) for interval [{a}, {b}]")]
    InvalidState { x1: f64, x2: f64, a: f64, b: f64 },
    #[error("state ({x1}, {x2}) must be strictly interior to [{a}, {b}]")]
    NotInterior { x1: f64, x2: f64, a: f64, b: f64 },
    #[error("meeting set is not a sorted list of disjoint subintervals of [{a}, {b}]")]
    InvalidMeetingSet { a: f64, b: f64 },
    #[error("meeting density is undefined at the hypotenuse endpoint m = {m}")]
    CornerUndefined { m: f64 },
    #[error("meeting probability {p:.3e} at the start point is below {floor:.0e}; conditional time is ill-defined")]
    Conditioning { p: f64, floor: f64 },
    #[error("grid size {0} too small (need >= 64)")]
    GridTooSmall(usize),
    #[error("diffusion constant must be positive, got {0}")]
    BadDiffusion(f64),
    #[error(transparent)]
    Pde(#[from] pde::PdeError),
    #[error("density quadrature failed: {0}")]
    Quadrature(#[from] quad::QuadNonConvergence),
}

/// The physical interval [a, b] with length L = b − a > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSpec {
    a: f64,
    b: f64,
}

impl IntervalSpec {
    pub fn new(a: f64, b: f64) -> Result<Self, EncounterError> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(EncounterError::InvalidInterval { a, b });
        }
        Ok(IntervalSpec { a, b })
    }

    pub fn unit() -> Self {
        IntervalSpec { a: 0.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Positions of the particle pair, a ≤ x₁ ≤ x₂ ≤ b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    x1: f64,
    x2: f64,
}

impl PairState {
    pub fn new(x1: f64, x2: f64, iv: &IntervalSpec) -> Result<Self, EncounterError> {
        if !(iv.a <= x1 && x1 <= x2 && x2 <= iv.b) {
            return Err(EncounterError::InvalidState {
                x1,
                x2,
                a: iv.a,
                b: iv.b,
            });
        }
        Ok(PairState { x1, x2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// Scale-free coordinates ((x₁−a)/L, (x₂−a)/L) in the unit triangle.
    pub fn relative(&self, iv: &IntervalSpec) -> (f64, f64) {
        let l = iv.length();
        ((self.x1 - iv.a) / l, (self.x2 - iv.a) / l)
    }

    /// True at the degenerate triangle vertices (a, a) and (b, b), where the
    /// Dirichlet data of the underlying boundary-value problem jumps.
    pub fn is_degenerate_corner(&self, iv: &IntervalSpec) -> bool {
        self.x1 == self.x2 && (self.x1 == iv.a || self.x2 == iv.b)
    }

    fn strictly_interior(&self, iv: &IntervalSpec) -> bool {
        iv.a < self.x1 && self.x1 < self.x2 && self.x2 < iv.b
    }
}

/// A finite union of disjoint closed subintervals of [a, b].
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingSet {
    intervals: Vec<(f64, f64)>,
}

impl MeetingSet {
    /// Accepts sorted, pairwise-disjoint (touching allowed) subintervals.
    pub fn new(intervals: Vec<(f64, f64)>, iv: &IntervalSpec) -> Result<Self, EncounterError> {
        let bad = || EncounterError::InvalidMeetingSet { a: iv.a, b: iv.b };
        let mut prev_hi = f64::NEG_INFINITY;
        for &(lo, hi) in &intervals {
            if !(lo <= hi) || lo < iv.a - 1e-12 || hi > iv.b + 1e-12 || lo < prev_hi {
                return Err(bad());
            }
            prev_hi = hi;
        }
        Ok(MeetingSet { intervals })
    }

    pub fn empty() -> Self {
        MeetingSet { intervals: vec![] }
    }

    pub fn whole(iv: &IntervalSpec) -> Self {
        MeetingSet {
            intervals: vec![(iv.a, iv.b)],
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }
}

/// The ℘ argument for relative coordinates (u, v): ω(v + iu)/√8.
fn scaled_argument(u: f64, v: f64) -> Complex64 {
    elliptic::omega_constant() * Complex64::new(v, u) / 8f64.sqrt()
}

/// Meeting probability on the unit interval in relative coordinates,
/// straight through the closed form with no boundary short-circuits.
///
/// The ℘ image of the admissible triangle is the closed fourth quadrant;
/// the argument is clamped to [−π/2, 0] so that P lands in [0, 1] exactly.
/// At the ℘ pole (the corner u = v = 0) the closed-diagonal boundary value
/// 1 is returned.
pub fn meet_probability_canonical(u: f64, v: f64) -> f64 {
    match elliptic::wp_pair(scaled_argument(u, v)) {
        Err(_) => 1.0,
        Ok((p, _)) => {
            let theta = p.arg().clamp(-PI / 2.0, 0.0);
            -2.0 * theta / PI
        }
    }
}

/// Probability that the particles meet before either escapes [a, b].
///
/// Boundary states short-circuit to their Dirichlet data: 1 on the diagonal
/// x₁ = x₂ (including the corners (a,a) and (b,b), where the data is
/// discontinuous and the closed-diagonal value is returned — see
/// [`PairState::is_degenerate_corner`]), 0 on the legs x₁ = a and x₂ = b.
pub fn meet_probability(s: &PairState, iv: &IntervalSpec) -> f64 {
    if s.x1 == s.x2 {
        return 1.0;
    }
    if s.x1 == iv.a || s.x2 == iv.b {
        return 0.0;
    }
    let (u, v) = s.relative(iv);
    meet_probability_canonical(u, v)
}

/// Large-L limit (4/π)·arctan((x₁−a)/(x₂−a)).
pub fn asymptotic_probability(s: &PairState, iv: &IntervalSpec) -> f64 {
    let u = s.x1 - iv.a;
    let v = s.x2 - iv.a;
    if v == 0.0 {
        // Corner (a, a): diagonal limit, consistent with meet_probability.
        return 1.0;
    }
    4.0 / PI * (u / v).atan()
}

/// Precomputed state-dependent factors of the meeting density.
struct DensityEval {
    p_z: Complex64,
    dp_z: Complex64,
    /// ω/L: converts the canonical arc density to physical arc length.
    scale: f64,
}

impl DensityEval {
    fn new(s: &PairState, iv: &IntervalSpec) -> Result<Self, EncounterError> {
        if !s.strictly_interior(iv) {
            return Err(EncounterError::NotInterior {
                x1: s.x1,
                x2: s.x2,
                a: iv.a,
                b: iv.b,
            });
        }
        let (u, v) = s.relative(iv);
        let (p_z, dp_z) = elliptic::wp_pair(scaled_argument(u, v))
            .expect("strictly interior state cannot hit a lattice point");
        Ok(DensityEval {
            p_z,
            dp_z,
            scale: elliptic::omega_constant() / iv.length(),
        })
    }

    /// Arc-length density at relative meeting position mrel ∈ (0, 1).
    ///
    /// d(Z; A) = (√8/π) |℘(Â)/℘′(Â)|³ · Im[(℘′(Ẑ)℘′(Â))² /
    ///            (℘′(Ẑ)²℘(Â) − ℘(Ẑ)℘′(Â)²)]
    /// with Ẑ, Â the scaled start point and meeting point. The denominator
    /// orientation makes the density nonnegative; it factors exactly as
    /// 4℘(Ẑ)℘(Â)(℘(Â)−℘(Ẑ))(℘(Â)+℘(Ẑ)) on the curve, so no cancellation
    /// beyond that of the underlying ℘ values occurs.
    fn at(&self, mrel: f64) -> f64 {
        let ahat = scaled_argument(mrel, mrel);
        let (y, dy) = match elliptic::wp_pair(ahat) {
            Ok(pair) => pair,
            Err(_) => return 0.0, // density vanishes toward the pole corner
        };
        let (x, dx) = (self.p_z, self.dp_z);
        let num = (dx * dy) * (dx * dy);
        let den = dx * dx * y - x * dy * dy;
        let weight = (y / dy).norm().powi(3);
        let canonical = 8f64.sqrt() / PI * weight * (num / den).im;
        self.scale * canonical
    }
}

/// Arc-length density of the meeting location at position m ∈ (a, b).
///
/// Weighted by √2 and integrated in m over [a, b], this recovers
/// [`meet_probability`].
pub fn meeting_density_at(
    s: &PairState,
    iv: &IntervalSpec,
    m: f64,
) -> Result<f64, EncounterError> {
    let eval = DensityEval::new(s, iv)?;
    let l = iv.length();
    if (m - iv.a).abs() < 1e-12 * l || (iv.b - m).abs() < 1e-12 * l {
        return Err(EncounterError::CornerUndefined { m });
    }
    Ok(eval.at((m - iv.a) / l))
}

/// Meeting density in diagonal parameterization: t ∈ [0, 1] places the
/// meeting point at m = a + (1−t)L.
pub fn meeting_density(s: &PairState, t: f64, iv: &IntervalSpec) -> Result<f64, EncounterError> {
    meeting_density_at(s, iv, iv.a + (1.0 - t) * iv.length())
}

/// Probability of meeting inside the set E before any escape.
///
/// Computed as √2 ∫_E d(Z; m) dm by adaptive quadrature; finitely additive
/// over disjoint subintervals and equal to [`meet_probability`] on E = [a, b].
pub fn meet_probability_in_set(
    s: &PairState,
    set: &MeetingSet,
    iv: &IntervalSpec,
) -> Result<f64, EncounterError> {
    let eval = DensityEval::new(s, iv)?;
    let l = iv.length();
    let mut total = 0.0;
    for &(lo, hi) in set.intervals() {
        let r = quad::integrate_with_budget(
            |m| eval.at((m - iv.a) / l),
            lo,
            hi,
            1e-9,
            100_000,
        )?;
        total += r.value;
    }
    Ok(2f64.sqrt() * total)
}

/// Large-L limit of the arc density: (4/π)|A|³ Im[1/(A⁴ − Z⁴)] with
/// Z = (x₂−a) + i(x₁−a) and A = (m−a)(1+i).
pub fn asymptotic_density(s: &PairState, t: f64, iv: &IntervalSpec) -> f64 {
    let m = iv.a + (1.0 - t) * iv.length();
    let z = Complex64::new(s.x2 - iv.a, s.x1 - iv.a);
    let a = (m - iv.a) * Complex64::new(1.0, 1.0);
    let a4 = a * a * a * a;
    let z4 = z * z * z * z;
    4.0 / PI * a.norm().powi(3) * (1.0 / (a4 - z4)).im
}

/// Harmonic measure of [α, β] ⊂ ℝ seen from z in the upper half-plane:
/// (1/π) Im log((z−β)/(z−α)). Used as a redundant cross-check route for
/// [`meet_probability_in_set`].
pub fn half_plane_interval_probability(z: Complex64, alpha: f64, beta: f64) -> f64 {
    let num = z - Complex64::new(beta, 0.0);
    let den = z - Complex64::new(alpha, 0.0);
    (num.arg() - den.arg()) / PI
}

/// Conditional mean time to meet, given that the pair meets before escape.
///
/// Solves D·Δw = −p on the triangle with w = 0 on the whole boundary by
/// finite differences and returns τ = w(x₁, x₂)/p(x₁, x₂). Scales as L²/D.
pub fn conditional_mean_time(
    s: &PairState,
    iv: &IntervalSpec,
    diffusion: f64,
    grid_n: usize,
) -> Result<f64, EncounterError> {
    if !(diffusion > 0.0) {
        return Err(EncounterError::BadDiffusion(diffusion));
    }
    if grid_n < 64 {
        return Err(EncounterError::GridTooSmall(grid_n));
    }
    if !s.strictly_interior(iv) {
        return Err(EncounterError::NotInterior {
            x1: s.x1,
            x2: s.x2,
            a: iv.a,
            b: iv.b,
        });
    }
    let p_start = meet_probability(s, iv);
    if p_start < CONDITIONING_FLOOR {
        return Err(EncounterError::Conditioning {
            p: p_start,
            floor: CONDITIONING_FLOOR,
        });
    }
    let a = iv.a;
    let l = iv.length();
    let rhs = |x1: f64, x2: f64| {
        -meet_probability_canonical((x1 - a) / l, (x2 - a) / l) / diffusion
    };
    let tol = 1e-9 * (1.0 / diffusion).max(1.0);
    let report = pde::solve_poisson_triangle(iv, grid_n, rhs, tol)?;
    let w = report.values.interpolate(s.x1, s.x2);
    Ok((w / p_start).max(0.0))
}
