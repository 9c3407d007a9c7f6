//! Samplers for the complex and real quaternion Ginibre ensembles and the
//! spherical ensembles derived from them, plus the eigenvalue density
//! evaluators used by reweighting oracles.
//!
//! All sampling is driven by explicit ChaCha streams: a `(seed, stream)` pair
//! fully determines the draw, so parallel consumers derive disjoint streams
//! from `(seed, chunk index)` and results are reproducible bit for bit. The
//! Gaussian transform is pinned here (polar form of Box-Muller) rather than
//! delegated, for the same reason.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;
use rand_core::{Rng, SeedableRng};

use crate::numerics::{self, ComplexMatrix, NumericsError};
use crate::specfun::{log_beta, SpecFunError};
use crate::SymmetryClass;

/// Attempts at resampling a spherical spectrum before giving up on a
/// persistently singular `K1`.
const MAX_RESAMPLE: u32 = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("matrix pair dimensions do not match class {class} at size {n}")]
    BadSampleDims { class: SymmetryClass, n: usize },
    #[error("K1 remained singular after {0} resampling attempts")]
    ResampleExhausted(u32),
    #[error("coincident eigenvalues in density evaluation")]
    CoincidentEigenvalues,
    #[error("eigenvalue list length {got} does not match N = {expect}")]
    BadSpectrumLength { got: usize, expect: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Deterministic generator for a `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform double in `[0, 1)` from the top 53 bits of one output word.
#[inline]
pub fn uniform_f64(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard complex Gaussian with `E|z|^2 = 1` (each component has variance
/// one half): `z = sqrt(-ln u1) exp(2 pi i u2)`.
#[inline]
pub fn standard_complex_gaussian(rng: &mut ChaCha12Rng) -> Complex64 {
    let u1 = 1.0 - uniform_f64(rng);
    let u2 = uniform_f64(rng);
    let r = libm::sqrt(-libm::log(u1));
    let phi = 2.0 * PI * u2;
    Complex64::new(r * libm::cos(phi), r * libm::sin(phi))
}

/// A Ginibre pair `(K1, K2)` with class-dependent structure.
#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub class: SymmetryClass,
    pub k1: ComplexMatrix,
    pub k2: ComplexMatrix,
    /// `(seed, stream)` of the generator state that produced this pair, when
    /// it came from a seeded draw.
    pub seed_info: Option<(u64, u64)>,
}

impl EnsembleSample {
    /// Draws a fresh pair from the class ensemble.
    pub fn draw(class: SymmetryClass, n: usize, rng: &mut ChaCha12Rng) -> Self {
        let (k1, k2) = match class {
            SymmetryClass::Aiii => (
                sample_ginibre_complex(n, rng),
                sample_ginibre_complex(n, rng),
            ),
            SymmetryClass::Cii => (
                sample_ginibre_quaternion(n, rng),
                sample_ginibre_quaternion(n, rng),
            ),
        };
        Self {
            class,
            k1,
            k2,
            seed_info: None,
        }
    }

    /// Draws a pair from an explicit `(seed, stream)`, recording it.
    pub fn draw_seeded(class: SymmetryClass, n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut s = Self::draw(class, n, &mut rng);
        s.seed_info = Some((seed, stream));
        s
    }

    /// Wraps externally supplied matrices (deterministic test fields).
    pub fn from_matrices(
        class: SymmetryClass,
        n: usize,
        k1: ComplexMatrix,
        k2: ComplexMatrix,
    ) -> Result<Self, EnsembleError> {
        let d = class.matrix_dim(n);
        if k1.rows() != d || k1.cols() != d || k2.rows() != d || k2.cols() != d {
            return Err(EnsembleError::BadSampleDims { class, n });
        }
        Ok(Self {
            class,
            k1,
            k2,
            seed_info: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.k1.rows()
    }
}

/// `N x N` complex Ginibre matrix: i.i.d. entries with `E K_ij = 0`,
/// `E |K_ij|^2 = 1`, matching the density `exp(-tr K^+ K)`.
pub fn sample_ginibre_complex(n: usize, rng: &mut ChaCha12Rng) -> ComplexMatrix {
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        data.push(standard_complex_gaussian(rng));
    }
    ComplexMatrix::from_vec(n, n, data)
}

/// `2N x 2N` real quaternion Ginibre matrix: `N^2` blocks
/// `[[a, b], [-b*, a*]]` with `a`, `b` i.i.d. standard complex Gaussians,
/// matching the density `exp(-tr K^+ K / 2)` (the quaternion embedding
/// counts each independent entry twice in the trace).
pub fn sample_ginibre_quaternion(n: usize, rng: &mut ChaCha12Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let a = standard_complex_gaussian(rng);
            let b = standard_complex_gaussian(rng);
            m[(2 * i, 2 * j)] = a;
            m[(2 * i, 2 * j + 1)] = b;
            m[(2 * i + 1, 2 * j)] = -b.conj();
            m[(2 * i + 1, 2 * j + 1)] = a.conj();
        }
    }
    m
}

/// Exact structural check of the quaternion reality constraint
/// `[tau_2 (x) 1] K* [tau_2 (x) 1] = K`, block by block.
pub fn is_quaternion_real(m: &ComplexMatrix) -> bool {
    let d = m.rows();
    if !m.is_square() || !d.is_multiple_of(2) {
        return false;
    }
    for i in 0..d / 2 {
        for j in 0..d / 2 {
            let a = m[(2 * i, 2 * j)];
            let b = m[(2 * i, 2 * j + 1)];
            if m[(2 * i + 1, 2 * j + 1)] != a.conj() || m[(2 * i + 1, 2 * j)] != -b.conj() {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of the spherical matrix `Y = K1^{-1} K2`.
///
/// For CII the spectrum is closed under conjugation; it is reported in full
/// (2N values). `resamples` counts discarded draws with singular `K1`.
#[derive(Debug, Clone)]
pub struct SphericalSpectrum {
    pub class: SymmetryClass,
    pub eigenvalues: Vec<Complex64>,
    pub resamples: u32,
}

impl SphericalSpectrum {
    /// Representatives in the closed upper half plane, one per conjugate
    /// pair, for CII spectra; the identity for AIII.
    pub fn upper_half_representatives(&self) -> Vec<Complex64> {
        match self.class {
            SymmetryClass::Aiii => self.eigenvalues.clone(),
            SymmetryClass::Cii => {
                let mut ups: Vec<Complex64> = self
                    .eigenvalues
                    .iter()
                    .copied()
                    .filter(|z| z.im >= 0.0)
                    .collect();
                ups.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
                ups.truncate(self.eigenvalues.len() / 2);
                ups
            }
        }
    }
}

/// Draws the spectrum of `Y = K1^{-1} K2` for a fresh Ginibre pair,
/// resampling (with count) when `K1` is numerically singular.
pub fn spherical_sample(
    class: SymmetryClass,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<SphericalSpectrum, EnsembleError> {
    let mut resamples = 0;
    loop {
        let s = EnsembleSample::draw(class, n, rng);
        match numerics::lu_factor(&s.k1) {
            Ok(lu) => {
                let y = lu.solve_matrix(&s.k2);
                let eigenvalues = numerics::eigvals(&y)?;
                return Ok(SphericalSpectrum {
                    class,
                    eigenvalues,
                    resamples,
                });
            }
            Err(NumericsError::Singular { .. }) => {
                resamples += 1;
                if resamples >= MAX_RESAMPLE {
                    return Err(EnsembleError::ResampleExhausted(resamples));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Log of the joint eigenvalue density of the complex spherical ensemble,
///
/// ```text
/// G(z) = (1/c) |Delta_N(z)|^2 / prod_j (1 + |z_j|^2)^{N+1},
/// c    = pi^N N! prod_{j=1..N} B(j, N+1-j),
/// ```
///
/// for AIII; for CII the input is the `N` upper-half-plane representatives
/// `z_j` and the density is
///
/// ```text
/// G(z) = (1/c) Delta_2N(z, z*) prod_j (z_j - z_j*) / (1 + |z_j|^2)^{2N+2},
/// c    = (2 pi)^N N! prod_{j=1..N} B(2j, 2N+2-2j),
/// ```
///
/// evaluated with the conjugate-paired ordering `(z_1, z_1*, ..., z_N, z_N*)`
/// under which it is real and positive.
pub fn log_jpdf_spherical(
    class: SymmetryClass,
    n: usize,
    z: &[Complex64],
) -> Result<f64, EnsembleError> {
    if z.len() != n {
        return Err(EnsembleError::BadSpectrumLength {
            got: z.len(),
            expect: n,
        });
    }
    let nf = n as f64;
    match class {
        SymmetryClass::Aiii => {
            let mut log = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = (z[j] - z[i]).norm();
                    if d == 0.0 {
                        return Err(EnsembleError::CoincidentEigenvalues);
                    }
                    log += 2.0 * libm::log(d);
                }
            }
            for zi in z {
                log -= (nf + 1.0) * libm::log(1.0 + zi.norm_sqr());
            }
            let mut logc = nf * libm::log(PI) + libm::lgamma(nf + 1.0);
            for j in 1..=n {
                logc += log_beta(j as f64, nf + 1.0 - j as f64)?;
            }
            Ok(log - logc)
        }
        SymmetryClass::Cii => {
            // full conjugate-paired vector (z_1, z_1*, ..., z_N, z_N*)
            let mut full = Vec::with_capacity(2 * n);
            for zi in z {
                full.push(*zi);
                full.push(zi.conj());
            }
            let mut log = 0.0;
            let mut phase = 0.0;
            for i in 0..2 * n {
                for j in (i + 1)..2 * n {
                    let d = full[j] - full[i];
                    if d == Complex64::ZERO {
                        return Err(EnsembleError::CoincidentEigenvalues);
                    }
                    log += libm::log(d.norm());
                    phase += d.arg();
                }
            }
            for zi in z {
                let d = zi - zi.conj();
                if d == Complex64::ZERO {
                    return Err(EnsembleError::CoincidentEigenvalues);
                }
                log += libm::log(d.norm());
                phase += d.arg();
                log -= (2.0 * nf + 2.0) * libm::log(1.0 + zi.norm_sqr());
            }
            // the paired ordering makes the density real positive
            debug_assert!(libm::sin(phase).abs() < 1e-6);
            let mut logc = nf * libm::log(2.0 * PI) + libm::lgamma(nf + 1.0);
            for j in 1..=n {
                logc += log_beta(2.0 * j as f64, 2.0 * nf + 2.0 - 2.0 * j as f64)?;
            }
            Ok(log - logc)
        }
    }
}
