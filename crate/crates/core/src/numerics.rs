//! Dense complex linear algebra primitives.
//!
//! Everything here is sized for matrices of at most a few hundred rows.
//! Determinants are only ever handled in log form ([`LogDet`]): products of
//! determinants over many parameter points at matrix dimensions up to 64
//! overflow `f64` long before the final ratio does.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Pivot magnitudes below this are treated as an exactly singular matrix.
/// Callers interpret the error as "spectral gap closed / coincident points".
pub const PIVOT_MIN: f64 = 1e-300;

/// Iteration budget for the eigenvalue QR iteration, per matrix row.
const QR_SWEEPS_PER_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("singular matrix: pivot magnitude {pivot:.3e} at step {step}")]
    Singular { step: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("pfaffian requires even dimension, got {0}")]
    OddDimension(usize),
    #[error("matrix is not skew-symmetric: max asymmetry {asymmetry:.3e} vs scale {scale:.3e}")]
    NotSkewSymmetric { asymmetry: f64, scale: f64 },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major construction; panics if the entry count does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Verifies the finiteness invariant on every entry.
    pub fn check_finite(&self) -> Result<(), NumericsError> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(NumericsError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self + c * other`, entrywise.
    pub fn add_scaled(&self, c: Complex64, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(other.data.iter()) {
            *o += c * x;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Largest entry magnitude (max norm).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }
}

impl core::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Wraps a phase into the principal range `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    if phi.is_infinite() || phi.is_nan() {
        return phi;
    }
    let mut w = libm::remainder(phi, 2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    }
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// A nonzero complex value stored as `exp(log_abs) * exp(i * phase)`.
///
/// The phase is kept in the principal range `(-pi, pi]`. The zero value is
/// representable with `log_abs = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: f64,
}

impl LogDet {
    pub const ONE: LogDet = LogDet {
        log_abs: 0.0,
        phase: 0.0,
    };

    pub const ZERO: LogDet = LogDet {
        log_abs: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub fn new(log_abs: f64, phase: f64) -> Self {
        Self {
            log_abs,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::ZERO {
            return Self::ZERO;
        }
        Self {
            log_abs: libm::log(z.norm()),
            phase: z.arg(),
        }
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }

    /// Materializes the value; overflows to `inf` beyond `f64` range.
    pub fn value(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::ZERO;
        }
        let r = libm::exp(self.log_abs);
        Complex64::new(r * libm::cos(self.phase), r * libm::sin(self.phase))
    }

    /// The natural logarithm as a complex number, `log_abs + i * phase`.
    pub fn ln_complex(&self) -> Complex64 {
        Complex64::new(self.log_abs, self.phase)
    }

    pub fn mul(&self, other: &LogDet) -> LogDet {
        if self.is_zero() || other.is_zero() {
            return LogDet::ZERO;
        }
        LogDet::new(self.log_abs + other.log_abs, self.phase + other.phase)
    }

    pub fn div(&self, other: &LogDet) -> LogDet {
        if self.is_zero() {
            return LogDet::ZERO;
        }
        LogDet::new(self.log_abs - other.log_abs, self.phase - other.phase)
    }

    /// Integer power with the phase tracked by integer multiplication.
    pub fn powi(&self, k: i32) -> LogDet {
        if k == 0 {
            return LogDet::ONE;
        }
        if self.is_zero() {
            return if k > 0 {
                LogDet::ZERO
            } else {
                LogDet::ONE.div(&LogDet::ZERO)
            };
        }
        LogDet::new(self.log_abs * k as f64, self.phase * k as f64)
    }

    pub fn conj(&self) -> LogDet {
        LogDet::new(self.log_abs, -self.phase)
    }

    pub fn neg(&self) -> LogDet {
        LogDet::new(self.log_abs, self.phase + PI)
    }
}

/// Sum of values given in log form, scaled by the largest magnitude so the
/// partial sums cannot overflow.
pub fn log_sum(terms: &[LogDet]) -> LogDet {
    let lead = terms
        .iter()
        .map(|t| t.log_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    if lead == f64::NEG_INFINITY {
        return LogDet::ZERO;
    }
    let mut acc = Complex64::ZERO;
    for t in terms {
        if t.is_zero() {
            continue;
        }
        let r = libm::exp(t.log_abs - lead);
        acc += Complex64::new(r * libm::cos(t.phase), r * libm::sin(t.phase));
    }
    if acc == Complex64::ZERO {
        return LogDet::ZERO;
    }
    LogDet::new(lead + libm::log(acc.norm()), acc.arg())
}

/// LU factorization with partial pivoting, `P A = L U`.
pub struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    odd_swaps: bool,
}

/// Factorizes a square matrix; fails when a pivot magnitude drops below
/// [`PIVOT_MIN`].
pub fn lu_factor(m: &ComplexMatrix) -> Result<LuFactors, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut odd_swaps = false;

    for k in 0..n {
        let mut pmax = 0.0;
        let mut prow = k;
        for i in k..n {
            let a = lu[(i, k)].norm();
            if a > pmax {
                pmax = a;
                prow = i;
            }
        }
        if pmax < PIVOT_MIN {
            return Err(NumericsError::Singular {
                step: k,
                pivot: pmax,
            });
        }
        if prow != k {
            lu.swap_rows(prow, k);
            perm.swap(prow, k);
            odd_swaps = !odd_swaps;
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let mult = lu[(i, k)] / pivot;
            lu[(i, k)] = mult;
            for j in (k + 1)..n {
                let s = lu[(k, j)];
                lu[(i, j)] -= mult * s;
            }
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        odd_swaps,
    })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Log determinant from the pivots and the permutation sign.
    pub fn logdet(&self) -> LogDet {
        let mut log_abs = 0.0;
        let mut phase = if self.odd_swaps { PI } else { 0.0 };
        for i in 0..self.lu.rows {
            let u = self.lu[(i, i)];
            log_abs += libm::log(u.norm());
            phase += u.arg();
        }
        LogDet::new(log_abs, phase)
    }

    /// Solves `A x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&pi| b[pi]).collect();
        // forward: L y = P b
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut out = ComplexMatrix::zeros(n, b.cols());
        let mut col = vec![Complex64::ZERO; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Log determinant of a square matrix.
///
/// Exact for triangular input (no elimination happens); an empty matrix has
/// determinant one.
pub fn logdet(m: &ComplexMatrix) -> Result<LogDet, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if m.rows == 0 {
        return Ok(LogDet::ONE);
    }
    Ok(lu_factor(m)?.logdet())
}

/// All eigenvalues of a general square complex matrix, with multiplicity,
/// in no particular order.
///
/// Householder reduction to Hessenberg form followed by an explicitly
/// shifted QR iteration (Wilkinson shift, complex Givens rotations).
pub fn eigvals(m: &ComplexMatrix) -> Result<Vec<Complex64>, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut h = hessenberg(m);
    let mut eigs = vec![Complex64::ZERO; n];
    let budget = QR_SWEEPS_PER_DIM * n;
    let mut sweeps = 0usize;
    let mut stuck = 0usize;

    let mut hi = n - 1;
    loop {
        // deflate converged trailing blocks
        let lo = active_window(&h, hi);
        if lo == hi {
            eigs[hi] = h[(hi, hi)];
            if hi == 0 {
                break;
            }
            hi -= 1;
            stuck = 0;
            continue;
        }

        sweeps += 1;
        if sweeps > budget {
            return Err(NumericsError::NoConvergence { sweeps: budget });
        }
        stuck += 1;
        let shift = if stuck.is_multiple_of(16) {
            // exceptional shift to break symmetric stalls
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_step(&mut h, lo, hi, shift);
    }
    Ok(eigs)
}

/// Smallest `lo` such that the subdiagonal entries of `h` are non-negligible
/// throughout `(lo, hi]`.
fn active_window(h: &ComplexMatrix, hi: usize) -> usize {
    let mut lo = hi;
    while lo > 0 {
        let sub = h[(lo, lo - 1)].norm();
        let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
        if sub <= f64::EPSILON * scale || sub < PIVOT_MIN {
            break;
        }
        lo -= 1;
    }
    lo
}

fn wilkinson_shift(h: &ComplexMatrix, hi: usize) -> Complex64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let tr_half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let e1 = tr_half + root;
    let e2 = tr_half - root;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// One explicit-shift QR sweep on the window `[lo, hi]`.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    // QR by Givens rotations on the subdiagonal
    let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let (c, s, r) = givens(h[(i, i)], h[(i + 1, i)]);
        h[(i, i)] = r;
        h[(i + 1, i)] = Complex64::ZERO;
        for j in (i + 1)..=hi {
            let x = h[(i, j)];
            let y = h[(i + 1, j)];
            h[(i, j)] = c * x + s * y;
            h[(i + 1, j)] = -s.conj() * x + c * y;
        }
        rots.push((c, s));
    }
    // form R Q by applying the adjoint rotations on the right
    for (idx, (c, s)) in rots.iter().enumerate() {
        let i = lo + idx;
        let top = if i + 2 <= hi { i + 2 } else { hi };
        for row in lo..=top {
            let x = h[(row, i)];
            let y = h[(row, i + 1)];
            h[(row, i)] = c * x + s.conj() * y;
            h[(row, i + 1)] = -s * x + c * y;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

/// Complex Givens rotation: returns `(c, s, r)` with `c` real such that
/// `[c, s; -conj(s), c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::ZERO, a);
    }
    if an == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0), b);
    }
    let d = libm::hypot(an, bn);
    let c = an / d;
    let ua = a / an;
    let s = ua * b.conj() / d;
    (c, s, ua * d)
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows;
    let mut h = m.clone();
    for k in 0..n.saturating_sub(2) {
        // reflector for column k below the subdiagonal
        let mut norm2 = 0.0;
        for i in (k + 1)..n {
            norm2 += h[(i, k)].norm_sqr();
        }
        let norm = libm::sqrt(norm2);
        if norm < PIVOT_MIN {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let alpha = if x0 == Complex64::ZERO {
            Complex64::new(norm, 0.0)
        } else {
            (x0 / x0.norm()) * norm
        };
        let mut v = vec![Complex64::ZERO; n];
        v[k + 1] = x0 + alpha;
        for i in (k + 2)..n {
            v[i] = h[(i, k)];
        }
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 < PIVOT_MIN {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // H <- (I - tau v v^+) H
        for j in 0..n {
            let mut dot = Complex64::ZERO;
            for i in (k + 1)..n {
                dot += v[i].conj() * h[(i, j)];
            }
            dot *= tau;
            for i in (k + 1)..n {
                let vi = v[i];
                h[(i, j)] -= vi * dot;
            }
        }
        // H <- H (I - tau v v^+)
        for i in 0..n {
            let mut dot = Complex64::ZERO;
            for j in (k + 1)..n {
                dot += h[(i, j)] * v[j];
            }
            dot *= tau;
            for j in (k + 1)..n {
                let vj = v[j].conj();
                h[(i, j)] -= dot * vj;
            }
        }
    }
    h
}

/// Relative asymmetry tolerance of the Pfaffian precondition.
const SKEW_TOL: f64 = 1e-10;

/// Pfaffian of an even-dimensional skew-symmetric complex matrix, in log
/// form, by skew-symmetric elimination with pivoting (Parlett-Reid).
///
/// Sign convention: `Pf [[0, a], [-a, 0]] = a`.
pub fn pfaffian_log(a: &ComplexMatrix) -> Result<LogDet, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if !n.is_multiple_of(2) {
        return Err(NumericsError::OddDimension(n));
    }
    let scale = a.max_abs();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a[(i, j)] + a[(j, i)]).norm());
        }
    }
    if asym > SKEW_TOL * scale && scale > 0.0 {
        return Err(NumericsError::NotSkewSymmetric {
            asymmetry: asym,
            scale,
        });
    }
    if n == 0 {
        return Ok(LogDet::ONE);
    }

    let mut w = a.clone();
    let mut pf = LogDet::ONE;
    for k in (0..n).step_by(2) {
        // pivot: largest entry in row k to the right of the diagonal
        let mut pmax = 0.0;
        let mut pcol = k + 1;
        for j in (k + 1)..n {
            let m = w[(k, j)].norm();
            if m > pmax {
                pmax = m;
                pcol = j;
            }
        }
        if pmax < PIVOT_MIN {
            return Ok(LogDet::ZERO);
        }
        if pcol != k + 1 {
            w.swap_rows(pcol, k + 1);
            w.swap_cols(pcol, k + 1);
            pf = pf.neg();
        }
        let pivot = w[(k, k + 1)];
        pf = pf.mul(&LogDet::from_complex(pivot));
        // clear row/column k beyond k+1 by a congruence with row/col k+1
        for j in (k + 2)..n {
            let mult = w[(k, j)] / pivot;
            if mult == Complex64::ZERO {
                continue;
            }
            for i in 0..n {
                let s = w[(i, k + 1)];
                w[(i, j)] -= mult * s;
            }
            for i in 0..n {
                let s = w[(k + 1, i)];
                w[(j, i)] -= mult * s;
            }
        }
    }
    Ok(pf)
}

/// Pfaffian as a plain complex number; see [`pfaffian_log`].
pub fn pfaffian(a: &ComplexMatrix) -> Result<Complex64, NumericsError> {
    Ok(pfaffian_log(a)?.value())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
