//! Closed-form ensemble averages of ratios of parametric determinants.
//!
//! For the chiral unitary class the average of `k` determinants over `k`
//! determinants is a ratio of two `k x k` determinants built from the
//! one-over-one average
//!
//! ```text
//! Z_11(q, p) = (v+(q) v(p) / v+(q) v(q))^N,
//! ```
//!
//! Cauchy-type denominators `i v^T(q_m) tau_2 v(p_n)`. For the chiral
//! symplectic class the average is a Pfaffian of a `2k x 2k` antisymmetric
//! kernel matrix divided by the same Cauchy-type determinant, with three
//! kernel functions built from the skew-orthogonal polynomials `q_{2N-2}`,
//! `q_{2N}` (shifted weight) and the truncated Lerch transcendent.
//!
//! The kernels are implemented in the two printed normalizations ("gauges"):
//! the per-point gauge factors cancel between pairings in every perfect
//! matching of the Pfaffian, so the assembled average is gauge independent.
//! The acceptance suite asserts that cancellation numerically, which is the
//! cheapest end-to-end cross-check of all three kernels at once.
//!
//! Everything is written in the vector form `v(p) = (a(p), b(p))`: the ratio
//! `a/b` appears nowhere, so zeros of `b` are regular points. Powers of
//! order `2N +- 1` are taken in log form with integer phase multiplication,
//! which keeps `N` up to 64 inside `f64` range.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::field::vprod::{bilinear, hermitian, norm_sqr, skew_h, skew_t};
use crate::field::CoefficientField;
use crate::numerics::{log_sum, logdet, pfaffian_log, ComplexMatrix, LogDet, NumericsError};
use crate::specfun::{lerch_phi, SkewPolyEven, SpecFunError};
use crate::SymmetryClass;

/// Relative distinctness floor: two points are usable together when
/// `|a(x) b(y) - b(x) a(y)| > 1e-8 |v(x)| |v(y)|`.
pub const DISTINCT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    #[error("points {kind}[{i}] and {kind2}[{j}] coincide in the kappa sense")]
    CoincidentPoints {
        kind: &'static str,
        kind2: &'static str,
        i: usize,
        j: usize,
    },
    #[error("point lists have mismatched lengths {q} vs {p}")]
    MismatchedLengths { q: usize, p: usize },
    #[error("field class {0} is not the one this formula covers")]
    WrongClass(SymmetryClass),
    #[error("kernel assembly lost antisymmetry: residual {0:.3e}")]
    AsymmetricAssembly(f64),
    #[error("near-singular kernel configuration: |1 + kappa kappa_*| = {0:.3e}")]
    NearSingularKernel(f64),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The two printed normalizations of the CII kernels.
///
/// `Results` is the hatted form (regular at `b(p) = 0`); `Derivation` carries
/// the per-point `b` and `2 pi` factors of the spherical-ensemble route and
/// pairs with the `1/(kappa(q) - kappa(p))` Cauchy determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelGauge {
    Results,
    Derivation,
}

/// Two lists of `k` parameter angles: denominators at `q`, numerators at `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSets {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PointSets {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, AnalyticError> {
        if q.len() != p.len() {
            return Err(AnalyticError::MismatchedLengths {
                q: q.len(),
                p: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    /// Verifies pairwise distinctness (in the kappa sense) of every q-p,
    /// q-q and p-p combination against the field's coefficient vectors.
    pub fn validate(&self, field: &CoefficientField) -> Result<(), AnalyticError> {
        let vq: Vec<_> = self.q.iter().map(|&x| field.eval_v(x)).collect();
        let vp: Vec<_> = self.p.iter().map(|&x| field.eval_v(x)).collect();
        let check = |xs: &[(Complex64, Complex64)],
                     ys: &[(Complex64, Complex64)],
                     kind: &'static str,
                     kind2: &'static str,
                     skip_diag: bool|
         -> Result<(), AnalyticError> {
            for (i, x) in xs.iter().enumerate() {
                for (j, y) in ys.iter().enumerate() {
                    if skip_diag && j <= i {
                        continue;
                    }
                    let scale = libm::sqrt(norm_sqr(*x) * norm_sqr(*y));
                    if skew_t(*x, *y).norm() <= DISTINCT_TOL * scale {
                        return Err(AnalyticError::CoincidentPoints { kind, kind2, i, j });
                    }
                }
            }
            Ok(())
        };
        check(&vq, &vp, "q", "p", false)?;
        check(&vq, &vq, "q", "q", true)?;
        check(&vp, &vp, "p", "p", true)
    }
}

/// AIII one-over-one average `(v+(q) v(p) / v+(q) v(q))^N`.
///
/// Regular for all inputs; equals `cos^N(q - p)` for the trig field.
pub fn aiii_z11(field: &CoefficientField, q: f64, p: f64) -> Complex64 {
    let vq = field.eval_v(q);
    let vp = field.eval_v(p);
    let ratio = hermitian(vq, vp) / Complex64::new(norm_sqr(vq), 0.0);
    LogDet::from_complex(ratio)
        .powi(field.size_param() as i32)
        .value()
}

/// AIII `k|k` average: the ratio of the `Z_11`-weighted and plain Cauchy-type
/// determinants, both computed through their log determinants.
pub fn aiii_zkk(field: &CoefficientField, points: &PointSets) -> Result<Complex64, AnalyticError> {
    if field.class() != SymmetryClass::Aiii {
        return Err(AnalyticError::WrongClass(field.class()));
    }
    points.validate(field)?;
    let k = points.k();
    if k == 0 {
        return Ok(Complex64::ONE);
    }
    let n = field.size_param() as i32;
    let vq: Vec<_> = points.q.iter().map(|&x| field.eval_v(x)).collect();
    let vp: Vec<_> = points.p.iter().map(|&x| field.eval_v(x)).collect();

    let mut num = ComplexMatrix::zeros(k, k);
    let mut den = ComplexMatrix::zeros(k, k);
    for m in 0..k {
        let nq = Complex64::new(norm_sqr(vq[m]), 0.0);
        for j in 0..k {
            let s = skew_t(vq[m], vp[j]);
            let z11 = LogDet::from_complex(hermitian(vq[m], vp[j]) / nq).powi(n);
            den[(m, j)] = 1.0 / s;
            num[(m, j)] = z11.value() / s;
        }
    }
    let ld_num = logdet(&num)?;
    let ld_den = logdet(&den)?;
    Ok(ld_num.div(&ld_den).value())
}

/// Precomputed CII kernel context: the two skew-orthogonal polynomials the
/// kernels evaluate at every point pair.
pub struct CiiKernels<'a> {
    field: &'a CoefficientField,
    n: usize,
    /// `q_{2N-2}` at weight `N`
    q_lower: SkewPolyEven,
    /// `q_{2N}` at weight `N+1`
    q_upper: SkewPolyEven,
    gauge: KernelGauge,
}

impl<'a> CiiKernels<'a> {
    pub fn new(field: &'a CoefficientField, gauge: KernelGauge) -> Result<Self, AnalyticError> {
        if field.class() != SymmetryClass::Cii {
            return Err(AnalyticError::WrongClass(field.class()));
        }
        let n = field.size_param();
        Ok(Self {
            field,
            n,
            q_lower: SkewPolyEven::new(n - 1, n)?,
            q_upper: SkewPolyEven::new(n, n + 1)?,
            gauge,
        })
    }

    /// First kernel (p-p pairings):
    /// `2N(2N+1) [i v^T(p_n) tau_2 v(p_m)]^{2N-1} q_{2N-2}(x)` with
    /// `x = v^T(p_m) v(p_n) / (i v^T(p_m) tau_2 v(p_n))`, denominators
    /// cleared so the expression is polynomial in all arguments.
    pub fn k1(&self, p_m: f64, p_n: f64) -> Result<Complex64, AnalyticError> {
        let vm = self.field.eval_v(p_m);
        let vn = self.field.eval_v(p_n);
        let n = self.n as i32;
        let w = LogDet::from_complex(bilinear(vm, vn));
        // i v^T(p_n) tau_2 v(p_m); q's argument uses the opposite order,
        // an exact sign flip absorbed by the even polynomial
        let s = LogDet::from_complex(skew_t(vn, vm));
        let poly = self.q_lower.eval_cleared(w, s, 2 * n - 1);
        let nf = 2.0 * self.n as f64;
        let mut out = LogDet::from_real(nf * (nf + 1.0)).mul(&poly);
        if self.gauge == KernelGauge::Derivation {
            let b = LogDet::from_complex(vm.1).mul(&LogDet::from_complex(vn.1));
            out = out
                .mul(&b)
                .div(&LogDet::from_real(2.0 * core::f64::consts::PI));
        }
        Ok(out.value())
    }

    /// Second kernel (p-q pairings): the `Z_11`-type average divided by the
    /// Cauchy factor, in terms of
    /// `kappa   = v^T(q) v(p) / (i v^T(q) tau_2 v(p))` and
    /// `kappa_* = v+(q) v(p) / (i v+(q) tau_2 v(p))`:
    ///
    /// ```text
    /// K2(p, q) = [i v^T(q) tau_2 v(p)]^{-(2N+1)} [v^T(p) v(p)]^{2N}
    ///            (1 + kappa kappa_*)^{-(2N+1)}
    ///            [kappa_*^{2N+1} kappa + (2N+1) q_{2N}(kappa_*)]
    /// ```
    pub fn k2(&self, p_n: f64, q_m: f64) -> Result<Complex64, AnalyticError> {
        let vp = self.field.eval_v(p_n);
        let vq = self.field.eval_v(q_m);
        let n = self.n as i32;
        let two_n1 = 2 * n + 1;

        let s_t = skew_t(vq, vp);
        let s_h = skew_h(vq, vp);
        let scale = libm::sqrt(norm_sqr(vq) * norm_sqr(vp));
        if s_t.norm() <= DISTINCT_TOL * scale || s_h.norm() <= DISTINCT_TOL * scale {
            return Err(AnalyticError::CoincidentPoints {
                kind: "p",
                kind2: "q",
                i: 0,
                j: 0,
            });
        }
        let kap = LogDet::from_complex(bilinear(vq, vp)).div(&LogDet::from_complex(s_t));
        let kap_star = LogDet::from_complex(hermitian(vq, vp)).div(&LogDet::from_complex(s_h));

        // 1 + kappa kappa_* in log form, stable for huge and tiny products
        let prod = kap.mul(&kap_star);
        let one_plus = if prod.log_abs > 36.0 {
            prod
        } else if prod.log_abs < -36.0 {
            LogDet::ONE
        } else {
            let g = Complex64::ONE + prod.value();
            if g.norm() < 1e-8 {
                return Err(AnalyticError::NearSingularKernel(g.norm()));
            }
            LogDet::from_complex(g)
        };

        // bracket = kappa_*^{2N+1} kappa + (2N+1) q_{2N}(kappa_*)
        let mut terms: Vec<LogDet> = Vec::with_capacity(self.n + 2);
        terms.push(kap_star.powi(two_n1).mul(&kap));
        let pref = LogDet::from_real(two_n1 as f64);
        for (m, c) in self.q_upper.coeffs().iter().enumerate() {
            terms.push(
                pref.mul(&LogDet::from_real(*c))
                    .mul(&kap_star.powi(2 * m as i32)),
            );
        }
        let bracket = log_sum(&terms);

        let u = LogDet::from_complex(bilinear(vp, vp));
        let s_t_log = LogDet::from_complex(s_t);
        let mut out = u
            .powi(2 * n)
            .div(&s_t_log.powi(two_n1))
            .div(&one_plus.powi(two_n1))
            .mul(&bracket);
        if self.gauge == KernelGauge::Derivation {
            let b = LogDet::from_complex(vp.1).mul(&LogDet::from_complex(vq.1));
            out = out.mul(&b);
        }
        Ok(out.value())
    }

    /// Third kernel (q-q pairings): a Lerch term plus a shifted-weight
    /// polynomial term,
    ///
    /// ```text
    /// K3(q_m, q_n) = -i v^T(q_m) tau_2 v(q_n)
    ///                  [v+(q_m) v*(q_n) / D]^{2N+2} Phi_{2N+2}(u)
    ///              + [i v+(q_n) tau_2 v*(q_m) / D]^{2N+1}
    ///                  q_{2N}(v+(q_n) v*(q_m) / i v+(q_n) tau_2 v*(q_m))
    /// ```
    ///
    /// with `D = |v(q_m)|^2 |v(q_n)|^2` and the Lerch argument
    /// `u = |v^T(q_m) v(q_n)|^2 / D in [0, 1)` (Cauchy-Schwarz); `u -> 1`
    /// only at conjugate-degenerate points, which are rejected.
    pub fn k3(&self, q_m: f64, q_n: f64) -> Result<Complex64, AnalyticError> {
        let vm = self.field.eval_v(q_m);
        let vn = self.field.eval_v(q_n);
        let n = self.n as i32;

        let d = norm_sqr(vm) * norm_sqr(vn);
        let d_log = LogDet::from_real(d);
        let w = bilinear(vm, vn);
        let u = w.norm_sqr() / d;
        let lerch = lerch_phi(2 * self.n as u32 + 1, Complex64::new(u, 0.0))?;

        // -i v^T tau_2 v = -(a(q_m) b(q_n) - a(q_n) b(q_m))
        let st = skew_t(vm, vn);
        let term1 = LogDet::from_complex(-st)
            .mul(&LogDet::from_complex(w.conj()).div(&d_log).powi(2 * n + 2))
            .mul(&LogDet::from_complex(lerch));

        // i v+(q_n) tau_2 v*(q_m) = conj(i v^T(q_n) tau_2 v(q_m)) = -conj(st)
        let cs = LogDet::from_complex(-st.conj());
        let cw = LogDet::from_complex(w.conj());
        let term2 = self
            .q_upper
            .eval_cleared(cw, cs, 2 * n + 1)
            .div(&d_log.powi(2 * n + 1));

        let mut out = term1.value() + term2.value();
        if self.gauge == KernelGauge::Derivation {
            out *= 2.0 * core::f64::consts::PI * vm.1 * vn.1;
        }
        Ok(out)
    }
}

/// Assembles the `2k x 2k` antisymmetric kernel matrix of the CII average,
/// interleaved as `(p_1, q_1, p_2, q_2, ...)`: block `(m, n)` is
/// `[[K1(p_m, p_n), K2(p_m, q_n)], [-K2(p_n, q_m), K3(q_m, q_n)]]`.
///
/// Off-diagonal blocks are computed once and mirrored, so the returned
/// matrix is skew-symmetric by construction; the independent evaluations of
/// `K1` and `K3` with swapped arguments are asserted against the mirrored
/// values to `1e-9` relative.
pub fn skew_kernel_matrix(
    field: &CoefficientField,
    points: &PointSets,
    gauge: KernelGauge,
) -> Result<ComplexMatrix, AnalyticError> {
    let kernels = CiiKernels::new(field, gauge)?;
    let k = points.k();
    let mut s = ComplexMatrix::zeros(2 * k, 2 * k);
    let mut scale = 0.0f64;
    let mut residual = 0.0f64;
    for m in 0..k {
        // diagonal block: K1(p, p) = 0 = K3(q, q), only K2 survives
        let k2_mm = kernels.k2(points.p[m], points.q[m])?;
        s[(2 * m, 2 * m + 1)] = k2_mm;
        s[(2 * m + 1, 2 * m)] = -k2_mm;
        for n in (m + 1)..k {
            let k1 = kernels.k1(points.p[m], points.p[n])?;
            let k1_swap = kernels.k1(points.p[n], points.p[m])?;
            let k3 = kernels.k3(points.q[m], points.q[n])?;
            let k3_swap = kernels.k3(points.q[n], points.q[m])?;
            let k2_mn = kernels.k2(points.p[m], points.q[n])?;
            let k2_nm = kernels.k2(points.p[n], points.q[m])?;
            residual = residual
                .max((k1 + k1_swap).norm())
                .max((k3 + k3_swap).norm());
            scale = scale.max(k1.norm()).max(k3.norm()).max(k2_mn.norm());

            s[(2 * m, 2 * n)] = k1;
            s[(2 * n, 2 * m)] = -k1;
            s[(2 * m, 2 * n + 1)] = k2_mn;
            s[(2 * n + 1, 2 * m)] = -k2_mn;
            s[(2 * m + 1, 2 * n)] = -k2_nm;
            s[(2 * n, 2 * m + 1)] = k2_nm;
            s[(2 * m + 1, 2 * n + 1)] = k3;
            s[(2 * n + 1, 2 * m + 1)] = -k3;
        }
        scale = scale.max(k2_mm.norm());
    }
    if residual > 1e-9 * scale.max(1e-300) {
        return Err(AnalyticError::AsymmetricAssembly(residual / scale));
    }
    Ok(s)
}

/// CII `k|k` average: Pfaffian of the kernel matrix over the Cauchy-type
/// determinant matched to the kernel gauge.
///
/// The interleaved row ordering `(p_1, q_1, ...)` together with the
/// denominator `det[1 / (i v^T(q_m) tau_2 v(p_n))]` fixes the overall sign:
/// at `k = 1` the Pfaffian is the upper-right entry and the average reduces
/// to `i v^T(q) tau_2 v(p) K2(p, q)`, which also pins the coincidence limit
/// to one.
pub fn cii_zkk(
    field: &CoefficientField,
    points: &PointSets,
    gauge: KernelGauge,
) -> Result<Complex64, AnalyticError> {
    if field.class() != SymmetryClass::Cii {
        return Err(AnalyticError::WrongClass(field.class()));
    }
    points.validate(field)?;
    let k = points.k();
    if k == 0 {
        return Ok(Complex64::ONE);
    }
    let s = skew_kernel_matrix(field, points, gauge)?;
    let pf = pfaffian_log(&s)?;

    let vq: Vec<_> = points.q.iter().map(|&x| field.eval_v(x)).collect();
    let vp: Vec<_> = points.p.iter().map(|&x| field.eval_v(x)).collect();
    let mut den = ComplexMatrix::zeros(k, k);
    for m in 0..k {
        for n in 0..k {
            den[(m, n)] = match gauge {
                KernelGauge::Results => 1.0 / skew_t(vq[m], vp[n]),
                // 1/(kappa(q) - kappa(p)) = b(p) b(q) / (i v^T(q) tau_2 v(p))
                KernelGauge::Derivation => vp[n].1 * vq[m].1 / skew_t(vq[m], vp[n]),
            };
        }
    }
    let ld_den = logdet(&den)?;
    Ok(pf.div(&ld_den).value())
}

/// CII kernel entry points mirroring the assembled matrix, one pair at a
/// time (mostly for tests and oracle comparisons).
pub fn cii_kernel_1(
    field: &CoefficientField,
    p_m: f64,
    p_n: f64,
    gauge: KernelGauge,
) -> Result<Complex64, AnalyticError> {
    CiiKernels::new(field, gauge)?.k1(p_m, p_n)
}

pub fn cii_kernel_2(
    field: &CoefficientField,
    p_n: f64,
    q_m: f64,
    gauge: KernelGauge,
) -> Result<Complex64, AnalyticError> {
    CiiKernels::new(field, gauge)?.k2(p_n, q_m)
}

pub fn cii_kernel_3(
    field: &CoefficientField,
    q_m: f64,
    q_n: f64,
    gauge: KernelGauge,
) -> Result<Complex64, AnalyticError> {
    CiiKernels::new(field, gauge)?.k3(q_m, q_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::stream_rng;
    use crate::ensembles::uniform_f64;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel_close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn z11_at_coincident_points_is_one() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 3);
        assert!((aiii_z11(&field, 0.8, 0.8) - Complex64::ONE).norm() < 1e-14);
    }

    #[test]
    fn z11_trig_is_cos_power() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 4);
        for (q, p) in [(0.3, 1.1), (2.0, 0.2), (5.5, 5.0)] {
            let expect = libm::pow(libm::cos(q - p), 4.0);
            assert!(rel_close(aiii_z11(&field, q, p), c(expect, 0.0), 1e-12));
        }
    }

    #[test]
    fn z11_su2_invariance() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 3);
        let mut rng = stream_rng(31, 0);
        for _ in 0..20 {
            let alpha = c(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5);
            let beta = c(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5);
            let norm = libm::sqrt(alpha.norm_sqr() + beta.norm_sqr());
            let (alpha, beta) = (alpha / norm, beta / norm);
            let rotated = field.linear_combine(alpha, beta, -beta.conj(), alpha.conj());
            let (q, p) = (0.7, 1.9);
            assert!(rel_close(
                aiii_z11(&field, q, p),
                aiii_z11(&rotated, q, p),
                1e-12
            ));
        }
    }

    #[test]
    fn zkk_reduces_to_z11_at_k1() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 3);
        let points = PointSets::new(vec![0.5], vec![1.3]).unwrap();
        let z = aiii_zkk(&field, &points).unwrap();
        assert!(rel_close(z, aiii_z11(&field, 0.5, 1.3), 1e-12));
    }

    #[test]
    fn zkk_permutation_invariance() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 2);
        let base = PointSets::new(vec![0.1, 0.7, 1.9], vec![0.4, 1.2, 2.6]).unwrap();
        let z = aiii_zkk(&field, &base).unwrap();
        let permuted = PointSets::new(vec![1.9, 0.1, 0.7], vec![1.2, 2.6, 0.4]).unwrap();
        let zp = aiii_zkk(&field, &permuted).unwrap();
        assert!(rel_close(z, zp, 1e-11));
    }

    #[test]
    fn zkk_rejects_coincident_points() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 2);
        let points = PointSets::new(vec![0.5, 0.5 + 1e-12], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            aiii_zkk(&field, &points),
            Err(AnalyticError::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn zkk_coincidence_limit_approaches_one() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 2);
        let q = vec![0.3, 1.4];
        let mut err = [0.0f64; 2];
        for (idx, eps) in [1e-3, 1e-4].iter().enumerate() {
            let p: Vec<f64> = q.iter().map(|x| x + eps).collect();
            let z = aiii_zkk(&field, &PointSets::new(q.clone(), p).unwrap()).unwrap();
            err[idx] = (z - Complex64::ONE).norm();
        }
        assert!(err[1] < 0.2 * err[0], "no trend: {err:?}");
        assert!(err[1] < 1e-5);
    }

    #[test]
    fn zkk_normalization_limit() {
        // (prod a(q)/a(p))^N Z -> 1 when a is scaled by a huge factor
        let field = CoefficientField::trig(SymmetryClass::Aiii, 3);
        let scaled = field.linear_combine(
            c(1e6, 0.0),
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::ONE,
        );
        let points = PointSets::new(vec![0.4, 1.1], vec![0.8, 2.3]).unwrap();
        let z = aiii_zkk(&scaled, &points).unwrap();
        let mut factor = LogDet::ONE;
        for (&q, &p) in points.q.iter().zip(points.p.iter()) {
            let aq = scaled.eval_v(q).0;
            let ap = scaled.eval_v(p).0;
            factor = factor.mul(
                &LogDet::from_complex(aq)
                    .div(&LogDet::from_complex(ap))
                    .powi(3),
            );
        }
        let normed = factor.mul(&LogDet::from_complex(z)).value();
        assert!(
            (normed - Complex64::ONE).norm() < 1e-4,
            "normalization limit {normed}"
        );
    }

    #[test]
    fn cii_k1_antisymmetry_and_diagonal() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        let k1 = cii_kernel_1(&field, 0.4, 1.5, KernelGauge::Results).unwrap();
        let k1t = cii_kernel_1(&field, 1.5, 0.4, KernelGauge::Results).unwrap();
        assert!((k1 + k1t).norm() < 1e-12 * k1.norm());
        let diag = cii_kernel_1(&field, 0.9, 0.9, KernelGauge::Results).unwrap();
        assert_eq!(diag, Complex64::ZERO);
    }

    #[test]
    fn cii_k3_antisymmetry() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        for (qm, qn) in [(0.4, 1.3), (2.2, 0.9), (0.15, 2.8)] {
            let a = cii_kernel_3(&field, qm, qn, KernelGauge::Results).unwrap();
            let b = cii_kernel_3(&field, qn, qm, KernelGauge::Results).unwrap();
            assert!(
                (a + b).norm() < 1e-10 * a.norm().max(b.norm()),
                "K3({qm},{qn}) = {a} vs -K3({qn},{qm}) = {b}"
            );
        }
    }

    #[test]
    fn cii_k1_gauge_factor() {
        // derivation = results * b(p_m) b(p_n) / 2 pi
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 3);
        let (pm, pn) = (0.7, 1.9);
        let res = cii_kernel_1(&field, pm, pn, KernelGauge::Results).unwrap();
        let der = cii_kernel_1(&field, pm, pn, KernelGauge::Derivation).unwrap();
        let b = field.eval_v(pm).1 * field.eval_v(pn).1;
        assert!(rel_close(
            der,
            res * b / (2.0 * core::f64::consts::PI),
            1e-12
        ));
    }

    #[test]
    fn cii_k2_k3_gauge_factors() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        let (p, q) = (0.3, 1.1);
        let res = cii_kernel_2(&field, p, q, KernelGauge::Results).unwrap();
        let der = cii_kernel_2(&field, p, q, KernelGauge::Derivation).unwrap();
        let b = field.eval_v(p).1 * field.eval_v(q).1;
        assert!(rel_close(der, res * b, 1e-12));

        let (qm, qn) = (0.4, 1.3);
        let res = cii_kernel_3(&field, qm, qn, KernelGauge::Results).unwrap();
        let der = cii_kernel_3(&field, qm, qn, KernelGauge::Derivation).unwrap();
        let b = field.eval_v(qm).1 * field.eval_v(qn).1;
        assert!(rel_close(der, res * b * 2.0 * core::f64::consts::PI, 1e-12));
    }

    #[test]
    fn cii_k1_reduces_to_polynomial_form() {
        // the cleared sum against a direct evaluation away from s = 0
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 3);
        let kernels = CiiKernels::new(&field, KernelGauge::Results).unwrap();
        let (pm, pn) = (0.6, 2.1);
        let vm = field.eval_v(pm);
        let vn = field.eval_v(pn);
        let s = skew_t(vn, vm);
        let x = bilinear(vm, vn) / skew_t(vm, vn);
        let n = 3.0 * 2.0;
        let direct =
            n * (n + 1.0) * LogDet::from_complex(s).powi(5).value() * kernels.q_lower.eval(x);
        let got = kernels.k1(pm, pn).unwrap();
        assert!(rel_close(got, direct, 1e-11));
    }

    #[test]
    fn cii_zkk_k1_identity() {
        // Z at k = 1 equals i v^T(q) tau_2 v(p) K2(p, q)
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 1);
        let (q, p) = (1.1, 0.3);
        let points = PointSets::new(vec![q], vec![p]).unwrap();
        let z = cii_zkk(&field, &points, KernelGauge::Results).unwrap();
        let vq = field.eval_v(q);
        let vp = field.eval_v(p);
        let expect = skew_t(vq, vp) * cii_kernel_2(&field, p, q, KernelGauge::Results).unwrap();
        assert!(rel_close(z, expect, 1e-12));
    }

    #[test]
    fn cii_zkk_gauge_independence() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 1);
        let mut rng = stream_rng(77, 0);
        let mut done = 0;
        while done < 20 {
            let q = vec![
                uniform_f64(&mut rng) * 6.0 + 0.05,
                uniform_f64(&mut rng) * 6.0 + 0.05,
            ];
            let p = vec![
                uniform_f64(&mut rng) * 6.0 + 0.05,
                uniform_f64(&mut rng) * 6.0 + 0.05,
            ];
            let points = match PointSets::new(q, p) {
                Ok(pt) => pt,
                Err(_) => continue,
            };
            if points.validate(&field).is_err() {
                continue;
            }
            let zr = match cii_zkk(&field, &points, KernelGauge::Results) {
                Ok(z) => z,
                Err(_) => continue,
            };
            let zd = cii_zkk(&field, &points, KernelGauge::Derivation).unwrap();
            assert!(rel_close(zr, zd, 1e-9), "gauges differ: {zr} vs {zd}");
            done += 1;
        }
    }

    #[test]
    fn cii_zkk_permutation_invariance() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 2);
        let base = PointSets::new(vec![0.4, 1.3], vec![0.3, 1.1]).unwrap();
        let z = cii_zkk(&field, &base, KernelGauge::Results).unwrap();
        let permuted = PointSets::new(vec![1.3, 0.4], vec![1.1, 0.3]).unwrap();
        let zp = cii_zkk(&field, &permuted, KernelGauge::Results).unwrap();
        assert!(rel_close(z, zp, 1e-10), "{z} vs {zp}");
        // gauge agreement away from N = 1 as well
        let zd = cii_zkk(&field, &base, KernelGauge::Derivation).unwrap();
        assert!(rel_close(z, zd, 1e-9));
    }

    #[test]
    fn cii_zkk_coincidence_limit() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 1);
        let q = vec![0.5, 1.7];
        let mut err = [0.0f64; 2];
        for (idx, eps) in [1e-3, 1e-4].iter().enumerate() {
            let p: Vec<f64> = q.iter().map(|x| x + eps).collect();
            let z = cii_zkk(
                &field,
                &PointSets::new(q.clone(), p).unwrap(),
                KernelGauge::Results,
            )
            .unwrap();
            err[idx] = (z - Complex64::ONE).norm();
        }
        assert!(err[1] < 0.2 * err[0], "no trend: {err:?}");
        assert!(err[1] < 1e-3, "far from 1: {err:?}");
    }

    #[test]
    fn cii_zkk_so2_and_real_scale_invariance() {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 1);
        let points = PointSets::new(vec![0.4, 1.3], vec![0.3, 1.1]).unwrap();
        let z = cii_zkk(&field, &points, KernelGauge::Results).unwrap();
        let mut rng = stream_rng(78, 0);
        for _ in 0..20 {
            let theta = uniform_f64(&mut rng) * 2.0 * core::f64::consts::PI;
            let lam = 0.5 + 1.5 * uniform_f64(&mut rng);
            let (ct, st) = (libm::cos(theta), libm::sin(theta));
            // v -> lambda U^T v with U in SO(2)
            let rotated = field.linear_combine(
                c(lam * ct, 0.0),
                c(lam * st, 0.0),
                c(-lam * st, 0.0),
                c(lam * ct, 0.0),
            );
            let zr = cii_zkk(&rotated, &points, KernelGauge::Results).unwrap();
            assert!(rel_close(z, zr, 1e-9), "SO(2)/scale variance: {z} vs {zr}");
        }
    }

    #[test]
    fn aiii_zkk_su2_and_complex_scale_invariance() {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 3);
        let points = PointSets::new(vec![0.1, 0.7], vec![0.3, 1.2]).unwrap();
        let z = aiii_zkk(&field, &points).unwrap();
        let mut rng = stream_rng(79, 0);
        for _ in 0..20 {
            let alpha = c(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5);
            let beta = c(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5);
            let norm = libm::sqrt(alpha.norm_sqr() + beta.norm_sqr());
            let (alpha, beta) = (alpha / norm, beta / norm);
            let s = c(
                uniform_f64(&mut rng) * 2.0 - 1.0,
                uniform_f64(&mut rng) * 2.0 - 1.0,
            );
            if s.norm() < 0.1 {
                continue;
            }
            let transformed = field
                .linear_combine(alpha, beta, -beta.conj(), alpha.conj())
                .scale(s);
            let zt = aiii_zkk(&transformed, &points).unwrap();
            assert!(rel_close(z, zt, 1e-10), "invariance broken: {z} vs {zt}");
        }
    }
}
