//! Winding number density, integer winding numbers, and winding-number
//! sampling.
//!
//! The winding number of a gapped realization is computed twice on every
//! call: by tracking the unwrapped phase of `det K(p)` around the circle and
//! by the trapezoidal contour integral of the winding density
//! `w(p) = tr[K(p)^{-1} K'(p)]`. Both must round to the same integer; a
//! mismatch is reported as an error rather than repaired, since it signals a
//! near-closure of the spectral gap where no well-defined winding exists.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::ensembles::{stream_rng, EnsembleSample};
use crate::field::{CoefficientField, FieldError};
use crate::numerics::{self, eigvals, lu_factor, NumericsError};

/// Phase steps larger than this trigger interval bisection.
const PHASE_STEP_MAX: f64 = PI / 2.0;

/// Maximum bisection depth before a segment is declared unresolvable.
const MAX_REFINE_DEPTH: u32 = 20;

/// Convergence demanded of the contour integral under grid doubling. The
/// uniform periodic trapezoid converges exponentially in the grid size, so
/// meeting this also puts the spurious real part of the closed integral
/// well below 1e-6.
const INTEGRAL_TOL: f64 = 5e-7;

/// Grid-doubling limit of the contour integral, as a multiple of the
/// requested grid. A sample that has not converged by then has effectively
/// no spectral gap.
const MAX_GRID_GROWTH: usize = 128;

/// Samples per stream chunk in [`winding_samples`].
pub const WINDING_CHUNK: u64 = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindingError {
    #[error("K(p) singular at p = {p}: spectral gap closed")]
    GapClosed { p: f64 },
    #[error(
        "phase refinement exhausted at depth {depth} near p = {p}: suspected eigenvalue crossing"
    )]
    RefinementExhausted { p: f64, depth: u32 },
    #[error("phase-tracking winding {phase} disagrees with integral winding {integral}")]
    MethodDisagreement { phase: i64, integral: i64 },
    #[error("grid must have at least 16 points, got {0}")]
    GridTooCoarse(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Winding number of one realization, with the evidence that produced it.
#[derive(Debug, Clone)]
pub struct WindingResult {
    pub w: i64,
    /// `(p, unwrapped phase of det K(p))` at every evaluated point.
    pub phase_trace: Vec<(f64, f64)>,
    /// Deepest bisection level that was needed.
    pub refinement_depth: u32,
    /// `(1 / 2 pi i) * contour integral of w(p)`, before rounding.
    pub integral_value: Complex64,
}

/// `w(p) = tr[K(p)^{-1} K'(p)]`, the logarithmic derivative of `det K(p)`.
pub fn winding_density(
    field: &CoefficientField,
    sample: &EnsembleSample,
    p: f64,
) -> Result<Complex64, WindingError> {
    let k = field.eval_k(sample, p)?;
    let dk = field.eval_dk(sample, p)?;
    let lu = lu_factor(&k).map_err(|e| match e {
        NumericsError::Singular { .. } => WindingError::GapClosed { p },
        other => WindingError::Numerics(other),
    })?;
    Ok(lu.solve_matrix(&dk).trace())
}

/// Phase and density of `det K(p)` at one point, sharing one factorization.
fn probe(
    field: &CoefficientField,
    sample: &EnsembleSample,
    p: f64,
) -> Result<(f64, Complex64), WindingError> {
    let k = field.eval_k(sample, p)?;
    let dk = field.eval_dk(sample, p)?;
    let lu = lu_factor(&k).map_err(|e| match e {
        NumericsError::Singular { .. } => WindingError::GapClosed { p },
        other => WindingError::Numerics(other),
    })?;
    let phase = lu.logdet().phase;
    let w = lu.solve_matrix(&dk).trace();
    Ok((phase, w))
}

/// Integer winding number over `p in [0, 2 pi]`.
///
/// Tracks `arg det K(p)` on a uniform grid, bisecting every segment whose
/// principal-branch phase step exceeds `pi/2` (up to depth 20), and
/// cross-checks against the trapezoidal contour integral of `w(p)/(2 pi i)`.
/// The integral is taken on uniform grids, doubled until two successive
/// resolutions agree (the periodic trapezoid converges exponentially, and
/// non-uniform refinement would forfeit exactly that). The two winding
/// numbers must round to the same integer.
pub fn winding_number(
    field: &CoefficientField,
    sample: &EnsembleSample,
    grid_points: usize,
) -> Result<WindingResult, WindingError> {
    if grid_points < 16 {
        return Err(WindingError::GridTooCoarse(grid_points));
    }
    let step = 2.0 * PI / grid_points as f64;

    // phase and density on the base grid
    let mut phases = Vec::with_capacity(grid_points);
    let mut densities = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let (phi, w) = probe(field, sample, i as f64 * step)?;
        phases.push(phi);
        densities.push(w);
    }

    // unwrapped phase trace, bisecting oversized steps
    let mut trace: Vec<(f64, f64)> = Vec::with_capacity(grid_points + 1);
    let mut max_depth = 0u32;
    trace.push((0.0, phases[0]));
    for i in 0..grid_points {
        let p_left = i as f64 * step;
        let p_right = (i + 1) as f64 * step;
        let phi_left = trace.last().unwrap().1;
        // endpoint duplicates p = 0 up to the 2 pi period
        let phi_right = if i + 1 == grid_points {
            phases[0]
        } else {
            phases[i + 1]
        };
        unwrap_segment(
            field,
            sample,
            (p_left, phi_left),
            (p_right, phi_right),
            0,
            &mut trace,
            &mut max_depth,
        )?;
    }
    let turns = (trace.last().unwrap().1 - trace[0].1) / (2.0 * PI);
    let w_phase = libm::round(turns) as i64;

    // periodic trapezoid of w(p), doubling the grid until converged
    let mut integral = integral_of(&densities, step);
    let mut n = grid_points;
    loop {
        let mut finer = Vec::with_capacity(2 * n);
        let half = PI / n as f64;
        for (i, w) in densities.iter().enumerate() {
            finer.push(*w);
            let p_mid = (2 * i + 1) as f64 * half;
            finer.push(probe(field, sample, p_mid)?.1);
        }
        let finer_integral = integral_of(&finer, half);
        let delta = (finer_integral - integral).norm();
        let converged = delta <= INTEGRAL_TOL * (1.0 + finer_integral.norm());
        densities = finer;
        integral = finer_integral;
        n *= 2;
        if converged {
            break;
        }
        if n >= grid_points * MAX_GRID_GROWTH {
            return Err(WindingError::RefinementExhausted {
                p: f64::NAN,
                depth: MAX_REFINE_DEPTH,
            });
        }
    }
    let integral_value = integral / Complex64::new(0.0, 2.0 * PI);
    let w_integral = libm::round(integral_value.re) as i64;

    if w_phase != w_integral {
        return Err(WindingError::MethodDisagreement {
            phase: w_phase,
            integral: w_integral,
        });
    }
    Ok(WindingResult {
        w: w_phase,
        phase_trace: trace,
        refinement_depth: max_depth,
        integral_value,
    })
}

/// Trapezoid of a periodic function sampled uniformly (the endpoint value
/// equals the start, so the sum collapses to a rectangle rule).
fn integral_of(vals: &[Complex64], step: f64) -> Complex64 {
    vals.iter().sum::<Complex64>() * step
}

/// Bisects `(p, phase)` segments until the principal-branch step is at most
/// `pi/2`, pushing accepted right endpoints onto the unwrapped trace.
fn unwrap_segment(
    field: &CoefficientField,
    sample: &EnsembleSample,
    left: (f64, f64),
    right: (f64, f64),
    depth: u32,
    trace: &mut Vec<(f64, f64)>,
    max_depth: &mut u32,
) -> Result<(), WindingError> {
    let (p_left, phi_left) = left;
    let (p_right, phi_right) = right;
    let delta = numerics::wrap_phase(phi_right - phi_left);
    if delta.abs() <= PHASE_STEP_MAX {
        let unwrapped = trace.last().unwrap().1 + delta;
        trace.push((p_right, unwrapped));
        return Ok(());
    }
    if depth >= MAX_REFINE_DEPTH {
        return Err(WindingError::RefinementExhausted {
            p: 0.5 * (p_left + p_right),
            depth,
        });
    }
    *max_depth = (*max_depth).max(depth + 1);
    let p_mid = 0.5 * (p_left + p_right);
    let (phi_mid, _) = probe(field, sample, p_mid)?;
    unwrap_segment(
        field,
        sample,
        (p_left, phi_left),
        (p_mid, phi_mid),
        depth + 1,
        trace,
        max_depth,
    )?;
    unwrap_segment(
        field,
        sample,
        (p_mid, phi_mid),
        (p_right, phi_right),
        depth + 1,
        trace,
        max_depth,
    )
}

/// Histogram of winding numbers over fresh ensemble samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingHistogram {
    pub counts: BTreeMap<i64, u64>,
    /// Samples rejected for gap closure / refinement exhaustion / method
    /// disagreement.
    pub failures: u64,
    pub n_samples: u64,
    pub seed: u64,
    pub grid_points: usize,
}

impl WindingHistogram {
    fn empty(seed: u64, grid_points: usize) -> Self {
        Self {
            counts: BTreeMap::new(),
            failures: 0,
            n_samples: 0,
            seed,
            grid_points,
        }
    }

    pub fn merge(&mut self, other: &WindingHistogram) {
        for (w, c) in &other.counts {
            *self.counts.entry(*w).or_insert(0) += c;
        }
        self.failures += other.failures;
        self.n_samples += other.n_samples;
    }

    pub fn mean(&self) -> f64 {
        let total: u64 = self.counts.values().sum();
        if total == 0 {
            return 0.0;
        }
        let sum: f64 = self.counts.iter().map(|(w, c)| *w as f64 * *c as f64).sum();
        sum / total as f64
    }

    /// Standard error of [`Self::mean`].
    pub fn mean_stderr(&self) -> f64 {
        let total: u64 = self.counts.values().sum();
        if total < 2 {
            return f64::INFINITY;
        }
        let mean = self.mean();
        let ss: f64 = self
            .counts
            .iter()
            .map(|(w, c)| {
                let d = *w as f64 - mean;
                d * d * *c as f64
            })
            .sum();
        libm::sqrt(ss / ((total - 1) as f64 * total as f64))
    }
}

/// One deterministic chunk of [`winding_samples`]: samples
/// `[chunk * WINDING_CHUNK, ...)` of the logical sequence, drawn from stream
/// `chunk` of the seed.
pub fn winding_sample_chunk(
    field: &CoefficientField,
    grid_points: usize,
    seed: u64,
    chunk: u64,
    count: u64,
) -> WindingHistogram {
    let mut rng = stream_rng(seed, chunk);
    let mut hist = WindingHistogram::empty(seed, grid_points);
    for _ in 0..count {
        hist.n_samples += 1;
        let sample = EnsembleSample::draw(field.class(), field.size_param(), &mut rng);
        match winding_number(field, &sample, grid_points) {
            Ok(res) => *hist.counts.entry(res.w).or_insert(0) += 1,
            Err(_) => hist.failures += 1,
        }
    }
    hist
}

/// Empirical winding number distribution over `n_samples` fresh samples.
///
/// Work is split into chunks of [`WINDING_CHUNK`] samples, one ChaCha stream
/// per chunk, merged in chunk order; a parallel driver that maps
/// [`winding_sample_chunk`] over `0..n_chunks` and merges in order produces
/// the identical histogram.
pub fn winding_samples(
    field: &CoefficientField,
    grid_points: usize,
    n_samples: u64,
    seed: u64,
) -> WindingHistogram {
    let mut hist = WindingHistogram::empty(seed, grid_points);
    let chunks = n_samples.div_ceil(WINDING_CHUNK);
    for chunk in 0..chunks {
        let count = WINDING_CHUNK.min(n_samples - chunk * WINDING_CHUNK);
        hist.merge(&winding_sample_chunk(
            field,
            grid_points,
            seed,
            chunk,
            count,
        ));
    }
    hist.seed = seed;
    hist
}

/// One row of the spectral-flow export: momentum, eigenvalues of `H(p)`,
/// eigenvalues of `K(p)` and `det K(p)`.
#[derive(Debug, Clone)]
pub struct SpectralFlowRow {
    pub p: f64,
    pub h_eigenvalues: Vec<Complex64>,
    pub k_eigenvalues: Vec<Complex64>,
    pub det_k: Complex64,
}

/// Spectral flow of one realization over `steps` equal momentum steps
/// (closing the circle at `p = 2 pi`), the data behind the parametric
/// eigenvalue and determinant plots.
pub fn spectral_flow(
    field: &CoefficientField,
    sample: &EnsembleSample,
    steps: usize,
) -> Result<Vec<SpectralFlowRow>, WindingError> {
    let mut rows = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let p = 2.0 * PI * i as f64 / steps as f64;
        let k = field.eval_k(sample, p)?;
        let h = field.eval_h(sample, p)?;
        let mut h_eigenvalues = eigvals(&h)?;
        let mut k_eigenvalues = eigvals(&k)?;
        sort_complex(&mut h_eigenvalues);
        sort_complex(&mut k_eigenvalues);
        let det_k = numerics::logdet(&k)?.value();
        rows.push(SpectralFlowRow {
            p,
            h_eigenvalues,
            k_eigenvalues,
            det_k,
        });
    }
    Ok(rows)
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ComplexMatrix;
    use crate::SymmetryClass;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// K(p) = e^{ip} 1_N: trig field over K1 = 1, K2 = i 1.
    fn phase_rotation_sample(n: usize) -> (CoefficientField, EnsembleSample) {
        let field = CoefficientField::trig(SymmetryClass::Aiii, n);
        let k1 = ComplexMatrix::identity(n);
        let k2 = ComplexMatrix::identity(n).scale(c(0.0, 1.0));
        let sample = EnsembleSample::from_matrices(SymmetryClass::Aiii, n, k1, k2).unwrap();
        (field, sample)
    }

    /// constant K = K1 (a = 1, b = 0 fixed).
    fn constant_sample(n: usize) -> (CoefficientField, EnsembleSample) {
        let field = CoefficientField::new(
            SymmetryClass::Aiii,
            crate::field::FieldForm::Fourier {
                a: crate::field::FourierSeries::constant(Complex64::ONE),
                b: crate::field::FourierSeries::constant(Complex64::ZERO),
            },
            n,
        );
        let mut rng = stream_rng(10, 0);
        let sample = EnsembleSample::draw(SymmetryClass::Aiii, n, &mut rng);
        (field, sample)
    }

    #[test]
    fn density_of_phase_rotation() {
        // det K(p) = e^{iNp} so w = iN identically
        let (field, sample) = phase_rotation_sample(3);
        for p in [0.0, 0.7, 2.9] {
            let w = winding_density(&field, &sample, p).unwrap();
            assert!((w - c(0.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn density_of_constant_field_vanishes() {
        let (field, sample) = constant_sample(4);
        let w = winding_density(&field, &sample, 1.234).unwrap();
        assert!(w.norm() < 1e-12);
    }

    #[test]
    fn density_matches_logdet_finite_difference() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        let sample = EnsembleSample::draw_seeded(SymmetryClass::Aiii, 4, 21, 0);
        let p = 0.9;
        let w = winding_density(&field, &sample, p).unwrap();
        let mut errs = [0.0f64; 2];
        for (i, h) in [1e-4, 5e-5].iter().enumerate() {
            let lp = numerics::logdet(&field.eval_k(&sample, p + h).unwrap()).unwrap();
            let lm = numerics::logdet(&field.eval_k(&sample, p - h).unwrap()).unwrap();
            let d_log = (lp.log_abs - lm.log_abs) / (2.0 * h);
            let d_phase = numerics::wrap_phase(lp.phase - lm.phase) / (2.0 * h);
            errs[i] = (w - c(d_log, d_phase)).norm();
        }
        assert!(errs[0] < 1e-6, "fd error {}", errs[0]);
        assert!(errs[1] < 0.3 * errs[0] + 1e-12);
    }

    #[test]
    fn winding_of_phase_rotation_is_n() {
        for n in [1usize, 3, 4] {
            let (field, sample) = phase_rotation_sample(n);
            let res = winding_number(&field, &sample, 100).unwrap();
            assert_eq!(res.w, n as i64);
            assert!((res.integral_value - c(n as f64, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn winding_of_constant_field_is_zero() {
        let (field, sample) = constant_sample(3);
        let res = winding_number(&field, &sample, 64).unwrap();
        assert_eq!(res.w, 0);
    }

    #[test]
    fn winding_parity_matches_dimension() {
        // K(p + pi) = -K(p) for the trig field restricts W to N mod 2
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        for stream in 0..40 {
            let sample = EnsembleSample::draw_seeded(SymmetryClass::Aiii, 4, 100, stream);
            match winding_number(&field, &sample, 100) {
                Ok(res) => assert_eq!(res.w.rem_euclid(2), 0, "odd W for even N"),
                Err(WindingError::GapClosed { .. })
                | Err(WindingError::RefinementExhausted { .. }) => continue,
                Err(e) => panic!("unexpected failure: {e}"),
            }
        }
    }

    #[test]
    fn winding_stable_under_grid_refinement() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        for stream in 0..10 {
            let sample = EnsembleSample::draw_seeded(SymmetryClass::Aiii, 4, 11, stream);
            let coarse = winding_number(&field, &sample, 100);
            let fine = winding_number(&field, &sample, 200);
            if let (Ok(a), Ok(b)) = (coarse, fine) {
                assert_eq!(a.w, b.w);
            }
        }
    }

    #[test]
    fn real_part_of_contour_integral_vanishes() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        let sample = EnsembleSample::draw_seeded(SymmetryClass::Aiii, 4, 13, 1);
        let res = winding_number(&field, &sample, 100).unwrap();
        // Re of the closed contour integral of w; integral_value = I/(2 pi i)
        let contour = res.integral_value * c(0.0, 2.0 * PI);
        assert!(contour.re.abs() < 1e-6, "Re contour {}", contour.re);
    }

    #[test]
    fn grid_too_coarse_rejected() {
        let (field, sample) = phase_rotation_sample(2);
        assert!(matches!(
            winding_number(&field, &sample, 8),
            Err(WindingError::GridTooCoarse(8))
        ));
    }

    #[test]
    fn histogram_deterministic_and_integer() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        let a = winding_samples(&field, 100, 300, 77);
        let b = winding_samples(&field, 100, 300, 77);
        assert_eq!(a, b);
        assert_eq!(a.n_samples, 300);
        // trig field at even N: all bins even
        for w in a.counts.keys() {
            assert_eq!(w.rem_euclid(2), 0);
        }
        // chunk-wise merge equals the serial path
        let mut manual = WindingHistogram::empty(77, 100);
        let chunks = 300u64.div_ceil(WINDING_CHUNK);
        for chunk in 0..chunks {
            let count = WINDING_CHUNK.min(300 - chunk * WINDING_CHUNK);
            manual.merge(&winding_sample_chunk(&field, 100, 77, chunk, count));
        }
        assert_eq!(a.counts, manual.counts);
    }

    #[test]
    fn histogram_mean_near_zero_by_symmetry() {
        // K2 -> -K2 maps p -> -p, so W is symmetric about zero for trig
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        let hist = winding_samples(&field, 100, 1000, 2024);
        assert!(hist.failures * 20 < hist.n_samples, "excess failures");
        let z = hist.mean().abs() / hist.mean_stderr();
        assert!(
            z < 4.0,
            "winding mean {} stderr {}",
            hist.mean(),
            hist.mean_stderr()
        );
    }

    #[test]
    fn spectral_flow_shapes_and_determinism() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        let sample = EnsembleSample::draw_seeded(SymmetryClass::Cii, 2, 5, 0);
        let rows = spectral_flow(&field, &sample, 100).unwrap();
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[0].h_eigenvalues.len(), 8);
        assert_eq!(rows[0].k_eigenvalues.len(), 4);
        let rows2 = spectral_flow(&field, &sample, 100).unwrap();
        assert_eq!(rows[37].det_k, rows2[37].det_k);
    }

    #[test]
    fn spectral_flow_kramers_degeneracy_at_sin_zero() {
        // at sin p = 0 the CII Hamiltonian is quaternion-real and its
        // spectrum is doubly degenerate
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        let sample = EnsembleSample::draw_seeded(SymmetryClass::Cii, 2, 6, 0);
        let rows = spectral_flow(&field, &sample, 4).unwrap();
        // p = 0 row
        let h: Vec<f64> = rows[0].h_eigenvalues.iter().map(|z| z.re).collect();
        for pair in h.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-8, "no Kramers pair: {:?}", h);
        }
    }
}
