//! Shared test oracles, kept independent of the library's evaluation paths:
//! plain adaptive Simpson quadrature plus the defining-integral inversion
//! for the Weierstrass function.

/// Adaptive Simpson on [a, b]; integrands here are smooth after
/// substitution, so plain bisection with the classic 1/15 error estimate
/// is plenty.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// ξ(ζ) = ∫_ζ^∞ dp/√(4p³ − p) for ζ ≥ 1/2, the defining integral of the
/// inverse Weierstrass function on the real branch.
///
/// Split at 2ζ. On [ζ, 2ζ] substitute p = ζ + u² and factor
/// 4p³ − p = 4(u² + (ζ − 1/2))·p·(p + 1/2), which keeps the branch point
/// at ζ = 1/2 exactly removable; on [2ζ, ∞) substitute v = 1/√p.
pub fn xi_oracle(zeta: f64) -> f64 {
    assert!(zeta >= 0.5);
    let gap = zeta - 0.5;
    let near = adaptive_simpson(
        &|u: f64| {
            let p = zeta + u * u;
            let q = (p * (p + 0.5)).sqrt();
            if gap == 0.0 {
                1.0 / q
            } else {
                u / ((u * u + gap).sqrt() * q)
            }
        },
        0.0,
        zeta.sqrt(),
        1e-13,
    );
    let tail = adaptive_simpson(
        &|v: f64| 2.0 / (4.0 - v.powi(4)).sqrt(),
        0.0,
        1.0 / (2.0 * zeta).sqrt(),
        1e-13,
    );
    near + tail
}

/// Invert ξ(ζ) by bisection: the real-axis value of the Weierstrass
/// function at argument ξ ∈ (0, ω/√8), entirely from the defining
/// integral.
pub fn wp_real_oracle(xi: f64) -> f64 {
    assert!(xi > 0.0);
    let mut lo = 0.5;
    let mut hi = (4.0f64).max(4.0 / (xi * xi));
    assert!(xi_oracle(hi) < xi && xi <= xi_oracle(lo) + 1e-12);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if xi_oracle(mid) > xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
