//! Normalized-Laplacian eigenvalue computation, full and partial, and
//! resampling of the spectrum to a fixed-length vector.
//!
//! The fixed-length vector `λ̃` is the bridge between graphs of different
//! sizes: the sorted eigenvalues are placed at knots `(i/(n-1), λ_i)`,
//! interpolated with a natural cubic spline, and the curve is sampled at `M`
//! uniform grid points on `[0, 1]`. The result has the same length for every
//! graph and inherits the spectrum's invariance to vertex order.
//!
//! Large graphs use [`partial_spectrum`]: the `k` smallest and `k` largest
//! eigenvalues are computed with a Lanczos iteration and the spline bridges
//! the gap in between.

use crate::graph::{Graph, GraphCollection, Laplacian};
use crate::rng::{self, derive_seed, seeded_rng};
use crate::spline::{MonotoneCubicSpline, SplineError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed around the exact eigenvalue range `[0, 2]`.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("eigensolver produced invalid values for {n}x{n} matrix")]
    Eigensolver { n: usize },
    #[error("Lanczos iteration did not converge within {iterations} steps on {n}x{n} matrix")]
    NonConvergence { n: usize, iterations: usize },
    #[error("partial spectrum needs k >= 1")]
    InvalidK,
    #[error("interpolation grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
}

/// Which part of the spectrum a [`Spectrum`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Full,
    Partial { k_bottom: usize, k_top: usize },
}

/// Sorted eigenvalues of a normalized Laplacian, full or partial.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    n: usize,
    kind: SpectrumKind,
    /// Trace of the source matrix (= eigenvalue sum), when known exactly.
    /// For partial spectra this pins the mass hidden in the gap.
    source_trace: Option<f64>,
}

impl Spectrum {
    /// Validates ordering, range and the value count implied by `kind`.
    pub fn new(values: Vec<f64>, n: usize, kind: SpectrumKind) -> Result<Self, SpectrumError> {
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(SpectrumError::InvalidSpectrum("values not sorted ascending".into()));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < -EIGENVALUE_TOLERANCE || *v > 2.0 + EIGENVALUE_TOLERANCE)
        {
            return Err(SpectrumError::InvalidSpectrum(format!(
                "eigenvalue outside [{:-e}, 2+{:e}]",
                EIGENVALUE_TOLERANCE, EIGENVALUE_TOLERANCE
            )));
        }
        match kind {
            SpectrumKind::Full if values.len() != n => {
                return Err(SpectrumError::InvalidSpectrum(format!(
                    "full spectrum of order {n} needs {n} values, got {}",
                    values.len()
                )))
            }
            SpectrumKind::Partial { k_bottom, k_top } => {
                if k_bottom + k_top != values.len() || values.len() > n {
                    return Err(SpectrumError::InvalidSpectrum(format!(
                        "partial spectrum with k_bottom={k_bottom}, k_top={k_top} inconsistent \
                         with {} values of order {n}",
                        values.len()
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { values, n, kind, source_trace: None })
    }

    /// Attaches the exact source-matrix trace.
    pub fn with_source_trace(mut self, trace: f64) -> Self {
        self.source_trace = Some(trace);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Order of the source matrix (the graph's vertex count).
    pub fn source_order(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn is_full(&self) -> bool {
        self.kind == SpectrumKind::Full
    }

    pub fn source_trace(&self) -> Option<f64> {
        self.source_trace
    }
}

/// Fixed-length resampling `λ̃` of a spectrum on `M` uniform grid points.
///
/// Values are clamped to `[0, 2]` and made non-decreasing with a running
/// maximum, so the vector always looks like a sorted spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedSpectrum {
    values: Vec<f64>,
}

impl InterpolatedSpectrum {
    /// Wraps precomputed grid values, enforcing the usual invariants.
    pub fn from_values(values: Vec<f64>) -> Result<Self, SpectrumError> {
        if values.len() < 2 {
            return Err(SpectrumError::GridTooSmall(values.len()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 2.0) {
            return Err(SpectrumError::InvalidSpectrum("grid value outside [0, 2]".into()));
        }
        if values.windows(2).any(|w| w[0] > w[1] + 1e-6) {
            return Err(SpectrumError::InvalidSpectrum("grid values decrease".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }
}

/// Full eigenvalue spectrum via a dense symmetric eigensolve.
pub fn full_spectrum(l: &Laplacian) -> Result<Spectrum, SpectrumError> {
    let n = l.dim();
    if l.edge_count() == 0 {
        return Spectrum::new(vec![0.0; n], n, SpectrumKind::Full)
            .map(|s| s.with_source_trace(0.0));
    }
    let mut values: Vec<f64> = l.to_dense().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Spectrum::new(values, n, SpectrumKind::Full)
        .map(|s| s.with_source_trace(l.trace()))
        .map_err(|_| SpectrumError::Eigensolver { n })
}

/// The `k` smallest and `k` largest eigenvalues via Lanczos iteration.
///
/// Falls back to [`full_spectrum`] when `2k >= n`. The multiplicities of the
/// boundary eigenvalues 0 and 2 are pinned combinatorially (connected and
/// bipartite component counts), which keeps disconnected graphs correct
/// without exhausting the Krylov space.
pub fn partial_spectrum(l: &Laplacian, k: usize) -> Result<Spectrum, SpectrumError> {
    let n = l.dim();
    if k == 0 {
        return Err(SpectrumError::InvalidK);
    }
    if 2 * k >= n {
        return full_spectrum(l);
    }
    if l.edge_count() == 0 {
        return Spectrum::new(
            vec![0.0; 2 * k],
            n,
            SpectrumKind::Partial { k_bottom: k, k_top: k },
        )
        .map(|s| s.with_source_trace(0.0));
    }
    let zeros = l.component_count();
    let twos = l.bipartite_component_count();
    let run = lanczos_ritz(l, k, zeros, twos)?;
    let values = if run.exhausted {
        // The Krylov basis spans the whole space: Ritz values are exact.
        let mut v = run.ritz[..k].to_vec();
        v.extend_from_slice(&run.ritz[run.ritz.len() - k..]);
        v
    } else {
        assemble_ends(&run.ritz, k, zeros, twos, run.blocks).ok_or(
            SpectrumError::NonConvergence { n, iterations: run.iterations },
        )?
    };
    Spectrum::new(values, n, SpectrumKind::Partial { k_bottom: k, k_top: k })
        .map(|s| s.with_source_trace(l.trace()))
}

struct LanczosRun {
    /// All Ritz values of the final tridiagonal matrix, ascending.
    ritz: Vec<f64>,
    /// Krylov blocks built (1 + restarts after invariant subspaces).
    blocks: usize,
    iterations: usize,
    /// True when the basis spans the whole space, making `ritz` exact.
    exhausted: bool,
}

/// Lanczos with full reorthogonalization on the sparse Laplacian.
///
/// Both ends of the Ritz spectrum converge first, which is exactly what the
/// caller needs. Convergence is declared when the assembled bottom/top-k
/// estimate stops moving between checks.
fn lanczos_ritz(
    l: &Laplacian,
    k: usize,
    zeros: usize,
    twos: usize,
) -> Result<LanczosRun, SpectrumError> {
    const CHECK_INTERVAL: usize = 8;
    const STABILITY_TOL: f64 = 1e-10;
    const BREAKDOWN_TOL: f64 = 1e-10;

    let n = l.dim();
    let m_max = n.min(8 * k + 100);
    let mut rng = seeded_rng(derive_seed(0x5347_5245, n as u64));

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut blocks = 1usize;
    basis.push(random_unit_vector(&mut rng, n));

    let mut w = vec![0.0; n];
    let mut previous_estimate: Option<Vec<f64>> = None;
    loop {
        let m = basis.len();
        l.matvec(&basis[m - 1], &mut w);
        let a = dot(&w, &basis[m - 1]);
        alpha.push(a);
        if alpha.len() == m_max {
            break;
        }

        axpy(&mut w, -a, &basis[m - 1]);
        if m >= 2 {
            let b = beta[m - 2];
            if b != 0.0 {
                axpy(&mut w, -b, &basis[m - 2]);
            }
        }
        // Full reorthogonalization; two passes keep the basis orthogonal to
        // machine precision.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }

        let norm = dot(&w, &w).sqrt();
        if norm > BREAKDOWN_TOL {
            beta.push(norm);
            basis.push(w.iter().map(|v| v / norm).collect());
        } else {
            // Invariant subspace found; restart with a fresh direction so
            // further copies of multiple eigenvalues can appear.
            match random_orthonormal(&mut rng, &basis) {
                Some(q) => {
                    beta.push(0.0);
                    basis.push(q);
                    blocks += 1;
                }
                None => break,
            }
        }

        if basis.len() % CHECK_INTERVAL == 0 && basis.len() > 2 * k + 4 {
            let m_now = alpha.len();
            let ritz = tridiagonal_eigenvalues(&alpha, &beta[..m_now - 1])
                .map_err(|_| SpectrumError::Eigensolver { n })?;
            let estimate = assemble_ends(&ritz, k, zeros, twos, blocks);
            if let (Some(prev), Some(cur)) = (&previous_estimate, &estimate) {
                let drift = prev
                    .iter()
                    .zip(cur)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if drift <= STABILITY_TOL {
                    return Ok(LanczosRun {
                        ritz,
                        blocks,
                        iterations: m_now,
                        exhausted: false,
                    });
                }
            }
            previous_estimate = estimate;
        }
    }

    let m = alpha.len();
    let ritz = tridiagonal_eigenvalues(&alpha, &beta[..m.saturating_sub(1)])
        .map_err(|_| SpectrumError::Eigensolver { n })?;
    Ok(LanczosRun { ritz, blocks, iterations: m, exhausted: m == n })
}

/// Builds the bottom-k and top-k eigenvalue estimate from Ritz values.
///
/// Ritz values duplicate neither 0 nor 2 beyond once per Krylov block, while
/// the true multiplicities (`zeros`, `twos`) are known exactly; the found
/// copies are replaced by the exact counts. Returns `None` when the interior
/// does not yet hold enough converged values.
fn assemble_ends(
    ritz: &[f64],
    k: usize,
    zeros: usize,
    twos: usize,
    blocks: usize,
) -> Option<Vec<f64>> {
    const END_TOL: f64 = 1e-9;
    let found_zero = ritz.iter().take_while(|v| **v <= END_TOL).count();
    let found_two = ritz.iter().rev().take_while(|v| **v >= 2.0 - END_TOL).count();
    let drop_zero = found_zero.min(zeros).min(blocks);
    let drop_two = found_two.min(twos).min(blocks);
    let interior = &ritz[drop_zero..ritz.len() - drop_two];

    let bottom_known = zeros.min(k);
    let top_known = twos.min(k);
    let need_bottom = k - bottom_known;
    let need_top = k - top_known;
    if interior.len() < need_bottom + need_top {
        return None;
    }

    let mut values = vec![0.0; bottom_known];
    values.extend_from_slice(&interior[..need_bottom]);
    values.extend_from_slice(&interior[interior.len() - need_top..]);
    values.extend(std::iter::repeat(2.0).take(top_known));
    Some(values)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method
/// with Wilkinson shifts. `off[i]` couples `diag[i]` and `diag[i + 1]`.
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, ()> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            // First negligible subdiagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 50 {
                return Err(());
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let t = (d[i] - g) * s + 2.0 * c * b;
                p = s * t;
                d[i + 1] = g + p;
                g = c * t - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn random_unit_vector(rng: &mut impl rand_core::RngCore, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng::symmetric_f64(rng)).collect();
    let norm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// A random unit vector orthogonal to `basis`, or `None` if the basis
/// already spans the space.
fn random_orthonormal(rng: &mut impl rand_core::RngCore, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = basis[0].len();
    if basis.len() >= n {
        return None;
    }
    for _ in 0..20 {
        let mut v = random_unit_vector(rng, n);
        for _ in 0..2 {
            for q in basis {
                let c = dot(&v, q);
                axpy(&mut v, -c, q);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            for x in &mut v {
                *x /= norm;
            }
            return Some(v);
        }
    }
    None
}

/// Resamples a spectrum on `m` uniform grid points over `[0, 1]`.
///
/// Eigenvalue `i` (0-based, of a graph with `n` vertices) sits at knot
/// `x = i / (n - 1)`, so the knots span `[0, 1]` exactly for every graph
/// size. Partial spectra keep their true knot positions and the single long
/// segment between the end clusters is bridged by [`pinned_gap_spline`]. A
/// single-eigenvalue spectrum (n = 1) maps to a constant vector.
pub fn interpolate_spectrum(
    s: &Spectrum,
    m: usize,
) -> Result<InterpolatedSpectrum, SpectrumError> {
    if m < 2 {
        return Err(SpectrumError::GridTooSmall(m));
    }
    let values = s.values();
    if values.len() == 1 {
        let v = values[0].clamp(0.0, 2.0);
        return InterpolatedSpectrum::from_values(vec![v; m]);
    }

    let n = s.source_order();
    let denom = (n - 1) as f64;
    let spline = match s.kind() {
        SpectrumKind::Full => {
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / denom).collect();
            MonotoneCubicSpline::fit(&xs, values)?
        }
        SpectrumKind::Partial { k_bottom, k_top } => {
            let xs: Vec<f64> = (0..k_bottom)
                .chain(n - k_top..n)
                .map(|i| i as f64 / denom)
                .collect();
            let gap = k_bottom >= 1 && k_bottom + k_top < n;
            match (gap, s.source_trace()) {
                (true, Some(trace)) => {
                    pinned_gap_spline(&xs, values, k_bottom - 1, trace, denom)?
                }
                _ => MonotoneCubicSpline::fit(&xs, values)?,
            }
        }
    };

    let grid_denom = (m - 1) as f64;
    let mut out = Vec::with_capacity(m);
    let mut running_max = 0.0f64;
    for j in 0..m {
        let x = j as f64 / grid_denom;
        // Clamp to the valid eigenvalue range, then enforce monotonicity:
        // the curve resamples a sorted list, so dips are interpolation
        // artifacts.
        let v = spline.eval(x).clamp(0.0, 2.0);
        running_max = running_max.max(v);
        out.push(running_max);
    }
    InterpolatedSpectrum::from_values(out)
}

/// Interpolant for a partial spectrum whose gap mass is pinned by the trace.
///
/// The eigenvalues hidden between the end clusters are unknown individually,
/// but their sum is: it equals the matrix trace minus the computed ends, and
/// by the trapezoid rule the quantile curve `λ(x)` must integrate over the
/// gap to `(hidden_sum + (λ_a + λ_b)/2) / (n - 1)`. An extra knot placed at
/// the gap midpoint is raised or lowered by bisection until the curve's
/// integral matches that target. Junction slopes are the gap-side secants;
/// the harmonic-mean slopes would be dominated by the noisy local spacing of
/// the last cluster eigenvalues.
fn pinned_gap_spline(
    xs_base: &[f64],
    values: &[f64],
    seg: usize,
    trace: f64,
    denom: f64,
) -> Result<MonotoneCubicSpline, SpectrumError> {
    let (xa, xb) = (xs_base[seg], xs_base[seg + 1]);
    let (ya, yb) = (values[seg], values[seg + 1]);
    let hidden_sum: f64 = trace - values.iter().sum::<f64>();
    let target = (hidden_sum + (ya + yb) / 2.0) / denom;

    let xc = (xa + xb) / 2.0;
    let (h_left, h_right) = (xc - xa, xb - xc);
    let mut xs = xs_base.to_vec();
    xs.insert(seg + 1, xc);
    let mut ys_scratch = values.to_vec();
    ys_scratch.insert(seg + 1, 0.0);

    // Closed-form integral of a Hermite segment:
    //   h * ((ya + yb) / 2 + h * (ma - mb) / 12).
    let build = |yc: f64, ys: &mut [f64]| -> Result<(MonotoneCubicSpline, f64), SpectrumError> {
        ys[seg + 1] = yc;
        let d_left = (yc - ya) / h_left;
        let d_right = (yb - yc) / h_right;
        let mid = if d_left * d_right <= 0.0 {
            0.0
        } else {
            let w1 = 2.0 * h_right + h_left;
            let w2 = h_right + 2.0 * h_left;
            (w1 + w2) / (w1 / d_left + w2 / d_right)
        };
        let spline = MonotoneCubicSpline::fit(&xs, ys)?
            .with_slope(seg, d_left)
            .with_slope(seg + 1, mid)
            .with_slope(seg + 2, d_right);
        let integral = h_left * ((ya + yc) / 2.0 + h_left * (d_left - mid) / 12.0)
            + h_right * ((yc + yb) / 2.0 + h_right * (mid - d_right) / 12.0);
        Ok((spline, integral))
    };

    let (mut lo, mut hi) = (ya, yb);
    let (mut spline, _) = build((ya + yb) / 2.0, &mut ys_scratch)?;
    for _ in 0..60 {
        let yc = (lo + hi) / 2.0;
        let (candidate, integral) = build(yc, &mut ys_scratch)?;
        spline = candidate;
        if integral < target {
            lo = yc;
        } else {
            hi = yc;
        }
    }
    Ok(spline)
}

/// Strategy for choosing between the dense and Lanczos eigensolvers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EigsConfig {
    /// Graphs up to this many vertices use the dense full solve.
    pub dense_limit: usize,
    /// Eigenvalues per spectrum end for larger graphs.
    pub partial_k: usize,
}

impl Default for EigsConfig {
    fn default() -> Self {
        Self { dense_limit: 512, partial_k: 128 }
    }
}

/// Spectrum of a graph under the given solver strategy.
pub fn graph_spectrum(g: &Graph, cfg: &EigsConfig) -> Result<Spectrum, SpectrumError> {
    let l = g.normalized_laplacian();
    if l.dim() <= cfg.dense_limit || 2 * cfg.partial_k >= l.dim() {
        full_spectrum(&l)
    } else {
        partial_spectrum(&l, cfg.partial_k)
    }
}

/// `λ̃` of a graph: spectrum, spline, fixed grid, in one step.
pub fn graph_interpolated_spectrum(
    g: &Graph,
    m: usize,
    cfg: &EigsConfig,
) -> Result<InterpolatedSpectrum, SpectrumError> {
    interpolate_spectrum(&graph_spectrum(g, cfg)?, m)
}

/// `λ̃` for every graph of a collection, computed in parallel.
///
/// This is the pipeline's parallelism point; the output order matches the
/// collection order, so results are deterministic.
pub fn collection_interpolated_spectra(
    collection: &GraphCollection,
    m: usize,
    cfg: &EigsConfig,
) -> Result<Vec<InterpolatedSpectrum>, SpectrumError> {
    collection
        .graphs()
        .par_iter()
        .map(|g| graph_interpolated_spectrum(g, m, cfg))
        .collect()
}
