//! Encounter probabilities for two Brownian particles on an interval.
//!
//! Two independent Brownian particles start at a ≤ x₁ ≤ x₂ ≤ b and either
//! meet (coalesce) or one of them is absorbed at an endpoint. This crate
//! computes, in closed form, the probability of meeting before escape, the
//! probability density of the meeting location, and the conditional mean
//! meeting time, and validates every formula against two independent
//! oracles: a finite-difference solver for the underlying Laplace/Poisson
//! problems on the triangle {a ≤ x₁ ≤ x₂ ≤ b}, and a bridge-corrected
//! Monte Carlo simulator.
//!
//! Module map:
//! - [`elliptic`]: the Weierstrass ℘ function (g₂ = 1, g₃ = 0) and the
//!   constant ω behind all closed forms.
//! - [`conformal`]: the Schwarz–Christoffel map F from the upper half-plane
//!   onto the triangle with vertices 0, ω, (1+i)ω and its inverse ψ.
//! - [`encounter`]: the user-facing probability, density, and mean-time API.
//! - [`pde`]: the finite-difference oracle (SOR on the triangular grid).
//! - [`mc`]: the Monte Carlo oracle with Brownian-bridge event detection.
//! - [`quad`]: adaptive Gauss–Kronrod quadrature used by the above.

pub mod conformal;
pub mod elliptic;
pub mod encounter;
pub mod mc;
pub mod pde;
pub mod quad;

pub use num_complex::Complex64;
