//! Detecting and repairing non-Euclidean dissimilarity matrices.
//!
//! A matrix `A` comes from points in a Euclidean space exactly when the
//! double-centered matrix `B = −½ J A J` (with `J = I − 11ᵀ/n`) is positive
//! semidefinite. Restricted to zero-sum vectors, `λᵀBλ = −½ λᵀAλ`, so the
//! smallest eigenvalue of `B` on that hyperplane is the most negative
//! generalized distance per unit `‖λ‖²`.
//!
//! Adding `β` to every off-diagonal entry (the β-spread) adds `β/2 · ‖λ‖²`
//! to every generalized distance, which lifts each restricted eigenvalue by
//! `β/2`. The smallest spread that removes all negative distances is
//! therefore `β* = max(0, −2 λ_min)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SquaredDissimilarityMatrix;

/// Default relative tolerance for eigenvalue-based decisions.
pub const DEFAULT_EIGEN_TOLERANCE: f64 = 1e-9;

/// `B = −½ J A J`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGram {
    n: usize,
    entries: Vec<f64>,
}

impl CenteredGram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .chunks_exact(self.n.max(1))
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `λᵀBλ`.
    pub fn quadratic_form(&self, lambda: &[f64]) -> f64 {
        self.entries
            .chunks_exact(self.n.max(1))
            .zip(lambda)
            .map(|(row, li)| li * row.iter().zip(lambda).map(|(b, lj)| b * lj).sum::<f64>())
            .sum()
    }
}

/// Double-centers `A`: `B_ij = −½ (A_ij − r_i/n − r_j/n + s/n²)` where `r`
/// holds the row sums and `s` the grand sum.
pub fn gower_center(a: &SquaredDissimilarityMatrix) -> CenteredGram {
    let n = a.n();
    let nf = n as f64;
    let row_means: Vec<f64> = a.rows().map(|r| r.iter().sum::<f64>() / nf).collect();
    let grand_mean = row_means.iter().sum::<f64>() / nf;
    let mut entries = Vec::with_capacity(n * n);
    for (row, &ri) in a.rows().zip(&row_means) {
        entries.extend(
            row.iter()
                .zip(&row_means)
                .map(|(aij, rj)| -0.5 * (aij - ri - rj + grand_mean)),
        );
    }
    CenteredGram { n, entries }
}

/// Smallest eigenvalue of `B` on the hyperplane orthogonal to the all-ones
/// vector.
///
/// The all-ones direction is removed exactly with a Householder reflection,
/// the remaining `(n−1) × (n−1)` block is reduced to tridiagonal form, and the
/// smallest eigenvalue is bracketed by Sturm-count bisection down to machine
/// precision. The result is within `tol · max(1, ‖B‖_∞)` of the true value
/// for any `tol` above a few ulps. A single point has no restricted
/// directions; `0` is returned.
pub fn min_restricted_eigenvalue(b: &CenteredGram, tol: f64) -> Result<f64> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("eigen tolerance {tol} is negative")));
    }
    let n = b.n();
    if n < 2 {
        return Ok(0.0);
    }
    let restricted = deflate_ones(b);
    let (diag, off) = tridiagonalize(restricted, n - 1);
    smallest_tridiagonal_eigenvalue(&diag, &off)
}

/// Projects `B` onto an orthonormal basis of the zero-sum hyperplane.
///
/// With `u = 1/√n − e_{n−1}` the reflection `H = I − 2uuᵀ/uᵀu` maps the unit
/// all-ones vector to `e_{n−1}`, so the leading `(n−1)` block of `HBH` is the
/// restricted form.
fn deflate_ones(b: &CenteredGram) -> Vec<f64> {
    let n = b.n();
    let inv_sqrt = 1.0 / (n as f64).sqrt();
    let mut u = vec![inv_sqrt; n];
    u[n - 1] -= 1.0;
    let tau = 2.0 / u.iter().map(|x| x * x).sum::<f64>();
    let p: Vec<f64> = (0..n)
        .map(|i| tau * b.row(i).iter().zip(&u).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    let kappa = 0.5 * tau * u.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>();
    let w: Vec<f64> = p.iter().zip(&u).map(|(pi, ui)| pi - kappa * ui).collect();

    let m = n - 1;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let row = b.row(i);
        out.extend((0..m).map(|j| row[j] - u[i] * w[j] - w[i] * u[j]));
    }
    // Enforce exact symmetry so the reduction sees a symmetric input.
    for i in 0..m {
        for j in i + 1..m {
            let mean = 0.5 * (out[i * m + j] + out[j * m + i]);
            out[i * m + j] = mean;
            out[j * m + i] = mean;
        }
    }
    out
}

/// Householder reduction of a dense symmetric `m × m` matrix to tridiagonal
/// form. Returns the diagonal and the `m − 1` off-diagonal entries.
fn tridiagonalize(mut a: Vec<f64>, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut off = vec![0.0; m.saturating_sub(1)];
    let mut v = vec![0.0; m];
    let mut p = vec![0.0; m];
    for k in 0..m.saturating_sub(2) {
        let start = k + 1;
        let len = m - start;
        let x = &a[k * m + start..(k + 1) * m];
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let v = &mut v[..len];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let vnorm_sq = v.iter().map(|t| t * t).sum::<f64>();
        off[k] = alpha;
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        let p = &mut p[..len];
        for (r, pr) in p.iter_mut().enumerate() {
            let row = &a[(start + r) * m + start..(start + r + 1) * m];
            *pr = tau * row.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>();
        }
        let kappa = 0.5 * tau * v.iter().zip(p.iter()).map(|(x, y)| x * y).sum::<f64>();
        for (pr, vr) in p.iter_mut().zip(v.iter()) {
            *pr -= kappa * vr;
        }
        for r in 0..len {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut a[(start + r) * m + start..(start + r + 1) * m];
            for ((x, vc), wc) in row.iter_mut().zip(v.iter()).zip(p.iter()) {
                *x -= vr * wc + wr * vc;
            }
        }
    }
    if m >= 2 {
        off[m - 2] = a[(m - 1) * m + (m - 2)];
    }
    let diag = (0..m).map(|i| a[i * m + i]).collect();
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64, pivot_floor: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        }
        if q.abs() < pivot_floor {
            q = -pivot_floor;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_tridiagonal_eigenvalue(diag: &[f64], off: &[f64]) -> Result<f64> {
    const MAX_BISECTIONS: usize = 4096;
    if diag.len() == 1 {
        return Ok(diag[0]);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..diag.len() {
        let radius = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + off.get(i).map_or(0.0, |e| e.abs());
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let span = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivot_floor = f64::EPSILON * span * 1e-3;
    lo -= f64::EPSILON * span;
    hi += f64::EPSILON * span;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * span {
            return Ok(0.5 * (lo + hi));
        }
        if sturm_count(diag, off, mid, pivot_floor) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: MAX_BISECTIONS,
    })
}

/// Smallest uniform spread making every generalized centroid distance
/// non-negative.
///
/// Values of the restricted eigenvalue within `tol · scale` of zero are
/// treated as roundoff and give `0`.
pub fn beta_star(a: &SquaredDissimilarityMatrix, tol: f64) -> Result<f64> {
    let lambda_min = min_restricted_eigenvalue(&gower_center(a), tol)?;
    if lambda_min >= -tol * a.scale() {
        Ok(0.0)
    } else {
        Ok(-2.0 * lambda_min)
    }
}

/// Adds `beta` to every off-diagonal entry.
pub fn apply_beta_spread(a: &SquaredDissimilarityMatrix, beta: f64) -> Result<SquaredDissimilarityMatrix> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::NegativeBeta(beta));
    }
    let n = a.n();
    let mut entries = a.as_slice().to_vec();
    if beta > 0.0 {
        for (k, e) in entries.iter_mut().enumerate() {
            if k / n != k % n {
                *e += beta;
            }
        }
    }
    Ok(SquaredDissimilarityMatrix::from_entries_unchecked(n, entries))
}

/// A distance measured on `A` moved onto `A + β(11ᵀ − I)`.
pub fn shifted_distance(raw: f64, beta: f64, lambda_norm_sq: f64) -> f64 {
    raw + 0.5 * beta * lambda_norm_sq
}

/// Increase of `β` that lifts a negative distance to `epsilon · ‖λ‖² / 2`.
pub fn lazy_beta_increment(negative: f64, lambda_norm_sq: f64, epsilon: f64) -> Result<f64> {
    if !(negative < 0.0) {
        return Err(Error::NonNegativeInput(negative));
    }
    if !(lambda_norm_sq > 0.0) {
        return Err(Error::ZeroNorm);
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig(format!("lazy epsilon {epsilon} is negative")));
    }
    Ok(-2.0 * negative / lambda_norm_sq + epsilon)
}

/// When the spread is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaMode {
    /// Never; negative distances are left alone.
    Off,
    /// `β*` is computed up front and applied before clustering.
    #[default]
    Eager,
    /// `β` grows during iteration whenever a negative distance shows up.
    Lazy,
}

/// One increase of `β` during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaIncrement {
    /// Iteration during which the increase happened; `0` is before the first.
    pub iteration: usize,
    pub delta: f64,
}

/// Current spread of a run. `β` only ever grows.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaState {
    beta: f64,
    mode: BetaMode,
    increments: Vec<BetaIncrement>,
}

impl BetaState {
    pub fn new(mode: BetaMode) -> Self {
        Self {
            beta: 0.0,
            mode,
            increments: Vec::new(),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> BetaMode {
        self.mode
    }

    pub fn increments(&self) -> &[BetaIncrement] {
        &self.increments
    }

    /// Raises `β` by `delta`. Ignored in [`BetaMode::Off`].
    pub fn increase(&mut self, iteration: usize, delta: f64) -> Result<()> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::NegativeBeta(delta));
        }
        if self.mode == BetaMode::Off || delta == 0.0 {
            return Ok(());
        }
        self.beta += delta;
        self.increments.push(BetaIncrement { iteration, delta });
        Ok(())
    }
}
