//! Finite-difference oracle on the triangle {a ≤ x₁ ≤ x₂ ≤ b}.
//!
//! A uniform grid with n subdivisions per side carries the nodes
//! (i, j) ↦ (a + ih, a + jh), 0 ≤ i ≤ j ≤ n, h = L/n; only the closed
//! upper-left half of the square is stored. The 5-point Laplacian is solved
//! by successive over-relaxation with the optimal factor 2/(1 + sin(π/n))
//! and a residual-based stopping rule.
//!
//! Boundary pieces: the diagonal i = j (Dirichlet 1 in the meeting
//! problem), the left leg i = 0 and the right leg j = n (Dirichlet 0).
//! Corner nodes take the leg value; they are never referenced by an
//! interior stencil, so the choice only affects reported boundary rows.

use thiserror::Error;

use crate::encounter::IntervalSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("grid must have n >= 8 subdivisions, got {0}")]
    GridTooCoarse(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(
        "SOR did not converge: residual {residual:.3e} > tol {tol:.3e} after {iterations} iterations"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
}

/// Which boundary piece (or none) a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    Diagonal,
    LeftLeg,
    RightLeg,
}

/// Sweep ordering of the SOR iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Lexicographic,
    RedBlack,
}

/// Node values over the triangular index set {0 ≤ i ≤ j ≤ n}.
#[derive(Debug, Clone)]
pub struct TriangleGrid {
    n: usize,
    h: f64,
    a: f64,
    values: Vec<f64>,
}

#[inline]
fn idx(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl TriangleGrid {
    fn zeros(iv: &IntervalSpec, n: usize) -> Self {
        TriangleGrid {
            n,
            h: iv.length() / n as f64,
            a: iv.a(),
            values: vec![0.0; (n + 1) * (n + 2) / 2],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j && j <= self.n);
        self.values[idx(i, j)]
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h
    }

    pub fn tag(&self, i: usize, j: usize) -> BoundaryTag {
        let n = self.n;
        if i == 0 {
            // includes the corners (0,0) and (0,n): legs win over the diagonal
            BoundaryTag::LeftLeg
        } else if j == n {
            BoundaryTag::RightLeg
        } else if i == j {
            BoundaryTag::Diagonal
        } else {
            BoundaryTag::Interior
        }
    }

    /// All nodes as (i, j, x1, x2, value), row-major in j.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64, f64, f64)> + '_ {
        (0..=self.n).flat_map(move |j| {
            (0..=j).map(move |i| (i, j, self.x1(i), self.x2(j), self.value(i, j)))
        })
    }

    /// Piecewise-linear interpolation at (x1, x2) inside the triangle:
    /// bilinear on full square cells, barycentric on cells cut by the
    /// diagonal.
    pub fn interpolate(&self, x1: f64, x2: f64) -> f64 {
        let n = self.n;
        let fx = ((x1 - self.a) / self.h).clamp(0.0, n as f64);
        let fy = ((x2 - self.a) / self.h).clamp(0.0, n as f64);
        let i = (fx.floor() as usize).min(n - 1);
        let j = (fy.floor() as usize).min(n - 1);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        if j > i {
            let v00 = self.value(i, j);
            let v10 = self.value(i + 1, j);
            let v01 = self.value(i, j + 1);
            let v11 = self.value(i + 1, j + 1);
            (1.0 - sx) * (1.0 - sy) * v00
                + sx * (1.0 - sy) * v10
                + (1.0 - sx) * sy * v01
                + sx * sy * v11
        } else {
            // Diagonal cell: triangle (i,i), (i+1,i+1), (i,i+1) in local
            // coordinates {(0,0), (1,1), (0,1)} with sy >= sx.
            let l2 = sx;
            let l3 = (sy - sx).max(0.0);
            let l1 = (1.0 - sy).max(0.0);
            l1 * self.value(i, j) + l2 * self.value(i + 1, j + 1) + l3 * self.value(i, j + 1)
        }
    }
}

/// Outcome of a finite-difference solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub values: TriangleGrid,
}

/// Laplace problem of the meeting probability: Δu = 0 with u = 1 on the
/// diagonal and u = 0 on both legs.
pub fn solve_laplace_triangle(
    iv: &IntervalSpec,
    n: usize,
    tol: f64,
) -> Result<SolveReport, PdeError> {
    solve_laplace_with_boundary(
        iv,
        n,
        |tag, _, _| match tag {
            BoundaryTag::Diagonal => 1.0,
            _ => 0.0,
        },
        tol,
        SweepOrder::Lexicographic,
    )
}

/// Laplace solve with caller-supplied Dirichlet data g(tag, x1, x2).
pub fn solve_laplace_with_boundary(
    iv: &IntervalSpec,
    n: usize,
    g: impl Fn(BoundaryTag, f64, f64) -> f64,
    tol: f64,
    order: SweepOrder,
) -> Result<SolveReport, PdeError> {
    solve_core(iv, n, g, |_, _| 0.0, tol, order)
}

/// Poisson problem Δw = rhs with w = 0 on all three sides.
///
/// For the conditional-time problem the right-hand side is −p/D, which is
/// nonpositive and yields w ≥ 0 by the maximum principle.
pub fn solve_poisson_triangle(
    iv: &IntervalSpec,
    n: usize,
    rhs: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<SolveReport, PdeError> {
    solve_core(iv, n, |_, _, _| 0.0, rhs, tol, SweepOrder::Lexicographic)
}

fn solve_core(
    iv: &IntervalSpec,
    n: usize,
    g: impl Fn(BoundaryTag, f64, f64) -> f64,
    rhs: impl Fn(f64, f64) -> f64,
    tol: f64,
    order: SweepOrder,
) -> Result<SolveReport, PdeError> {
    if n < 8 {
        return Err(PdeError::GridTooCoarse(n));
    }
    if !(tol > 0.0) {
        return Err(PdeError::BadTolerance(tol));
    }
    let mut grid = TriangleGrid::zeros(iv, n);
    for j in 0..=n {
        for i in 0..=j {
            let tag = grid.tag(i, j);
            if tag != BoundaryTag::Interior {
                grid.values[idx(i, j)] = g(tag, grid.x1(i), grid.x2(j));
            }
        }
    }
    // h^2-scaled right-hand side per interior node, same indexing as values.
    let h2 = grid.h * grid.h;
    let mut f = vec![0.0f64; grid.values.len()];
    for j in 2..n {
        for i in 1..j {
            f[idx(i, j)] = h2 * rhs(grid.x1(i), grid.x2(j));
        }
    }

    let relax = 2.0 / (1.0 + (std::f64::consts::PI / n as f64).sin());
    let max_iterations = 50 * n * n;
    let check_every = 8;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iterations {
        match order {
            SweepOrder::Lexicographic => sweep(&mut grid.values, &f, n, relax, None),
            SweepOrder::RedBlack => {
                sweep(&mut grid.values, &f, n, relax, Some(0));
                sweep(&mut grid.values, &f, n, relax, Some(1));
            }
        }
        iterations += 1;
        if iterations % check_every == 0 || iterations == max_iterations {
            residual = max_residual(&grid.values, &f, n, h2);
            if residual <= tol {
                return Ok(SolveReport {
                    iterations,
                    final_residual: residual,
                    values: grid,
                });
            }
        }
    }
    Err(PdeError::NonConvergence {
        iterations,
        residual,
        tol,
    })
}

/// One SOR pass; `parity` restricts the sweep to nodes with (i+j) % 2 == p.
fn sweep(u: &mut [f64], f: &[f64], n: usize, relax: f64, parity: Option<usize>) {
    for j in 2..n {
        let row = j * (j + 1) / 2;
        let row_below = row - j; // (j-1) row offset
        let row_above = row + j + 1;
        let start = match parity {
            None => 1,
            Some(p) => 1 + ((j + 1 + p) % 2),
        };
        let step = if parity.is_some() { 2 } else { 1 };
        let mut i = start;
        while i < j {
            let k = row + i;
            let nb = u[k - 1] + u[k + 1] + u[row_below + i] + u[row_above + i];
            let target = 0.25 * (nb - f[k]);
            u[k] += relax * (target - u[k]);
            i += step;
        }
    }
}

/// Max-norm of the interior residual (Σ neighbors − 4u)/h² − rhs.
fn max_residual(u: &[f64], f: &[f64], n: usize, h2: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 2..n {
        let row = j * (j + 1) / 2;
        let row_below = row - j;
        let row_above = row + j + 1;
        for i in 1..j {
            let k = row + i;
            let nb = u[k - 1] + u[k + 1] + u[row_below + i] + u[row_above + i];
            let r = (nb - 4.0 * u[k] - f[k]) / h2;
            worst = worst.max(r.abs());
        }
    }
    worst
}
