//! Stochastic estimators for the determinant-ratio averages, the
//! determinant-product averages, the reweighted spherical functionals and
//! winding-density correlators.
//!
//! Ratios of characteristic polynomials are only guaranteed integrable, not
//! of finite variance, so the default aggregation for anything with
//! determinants in a denominator is median-of-means over 32 blocks; the
//! plain mean remains available and both can be derived from the same block
//! statistics. Per-sample values are handled in log form and exponentiated
//! only relative to a running block maximum.
//!
//! Sampling is organized in blocks: block `i` of a run draws from ChaCha
//! stream `i` of the run seed, so an identical `(seed, n_samples, blocks)`
//! triple reproduces the estimate bit for bit regardless of whether the
//! blocks were computed serially or in parallel (the reduction is an ordered
//! fold over block index).

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;

use crate::ensembles::{spherical_sample, stream_rng, EnsembleError, EnsembleSample};
use crate::field::{CoefficientField, FieldError};
use crate::numerics::{logdet, LogDet, NumericsError};
use crate::specfun::{log_beta, SpecFunError};
use crate::winding::{winding_density, WindingError};
use crate::SymmetryClass;

/// Default number of median-of-means blocks (also the parallel grain).
pub const DEFAULT_BLOCKS: u32 = 32;

/// A run whose rejected-sample fraction exceeds this fails outright: the
/// surviving average would be biased.
pub const MAX_REJECT_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("{rejected} of {n_samples} samples rejected (singular configurations); rate exceeds {MAX_REJECT_RATE}")]
    ExcessiveRejections { rejected: u64, n_samples: u64 },
    #[error("estimator needs at least one sample")]
    NoSamples,
    #[error("class {0} not valid for this estimator")]
    WrongClass(SymmetryClass),
    #[error("reweighted functional needs l - k even, got k = {k}, l = {l}")]
    OddImbalance { k: usize, l: usize },
    #[error("reweighted functional needs M + (l-k)/2 < N + 1, got M = {m}")]
    BadWeightSize { m: usize },
    #[error("kappa undefined: b vanishes at point {0}")]
    KappaUndefined(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Winding(#[from] WindingError),
}

/// Aggregation rule for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PlainMean,
    MedianOfMeans { blocks: u32 },
}

impl Method {
    pub fn default_heavy_tail() -> Self {
        Method::MedianOfMeans {
            blocks: DEFAULT_BLOCKS,
        }
    }

    fn blocks(&self) -> u32 {
        match self {
            Method::PlainMean => DEFAULT_BLOCKS,
            Method::MedianOfMeans { blocks } => (*blocks).max(1),
        }
    }
}

/// Monte Carlo result with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub n_samples: u64,
    pub rejected: u64,
    pub method: Method,
    pub seed: u64,
    /// Effective sample size of the reweighting factors, for reweighted
    /// estimators only.
    pub ess: Option<f64>,
}

impl Estimate {
    /// `|mean - reference| / stderr`, the z-score against an exact value.
    pub fn z_score(&self, reference: Complex64) -> f64 {
        (self.mean - reference).norm() / self.stderr
    }
}

/// Running sum of values given in log form, scaled by the largest magnitude
/// seen so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    scale: f64,
    sum: Complex64,
}

impl ScaledSum {
    pub const EMPTY: ScaledSum = ScaledSum {
        scale: f64::NEG_INFINITY,
        sum: Complex64::ZERO,
    };

    pub fn add(&mut self, term: LogDet) {
        if term.is_zero() {
            return;
        }
        if term.log_abs > self.scale {
            let factor = libm::exp(self.scale - term.log_abs);
            self.sum *= factor;
            self.scale = term.log_abs;
        }
        let r = libm::exp(term.log_abs - self.scale);
        self.sum += Complex64::new(r * libm::cos(term.phase), r * libm::sin(term.phase));
    }

    pub fn merge(&mut self, other: &ScaledSum) {
        if other.scale == f64::NEG_INFINITY {
            return;
        }
        if other.scale > self.scale {
            let factor = libm::exp(self.scale - other.scale);
            self.sum = self.sum * factor + other.sum;
            self.scale = other.scale;
        } else {
            self.sum += other.sum * libm::exp(other.scale - self.scale);
        }
    }

    /// The sum as a log-form value.
    pub fn total(&self) -> LogDet {
        if self.scale == f64::NEG_INFINITY || self.sum == Complex64::ZERO {
            return LogDet::ZERO;
        }
        LogDet::new(self.scale + libm::log(self.sum.norm()), self.sum.arg())
    }

    /// Materialized sum; may overflow to infinity for extreme scales.
    pub fn value(&self) -> Complex64 {
        self.total().value()
    }
}

/// Per-block sufficient statistics of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBlock {
    pub count: u64,
    pub rejected: u64,
    /// sum of sample values
    pub val: ScaledSum,
    /// sum of |value|^2
    pub val_sq: ScaledSum,
    /// sum of reweighting factors and their squares (log-weights of zero
    /// contribute one, keeping ESS = n for unweighted estimators)
    pub wt: ScaledSum,
    pub wt_sq: ScaledSum,
}

impl ValueBlock {
    fn empty() -> Self {
        Self {
            count: 0,
            rejected: 0,
            val: ScaledSum::EMPTY,
            val_sq: ScaledSum::EMPTY,
            wt: ScaledSum::EMPTY,
            wt_sq: ScaledSum::EMPTY,
        }
    }
}

/// Deterministic partition of `n_samples` over ChaCha streams: block `i`
/// draws `count(i)` samples from stream `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub n_samples: u64,
    pub blocks: u32,
    pub seed: u64,
}

impl BlockSpec {
    pub fn new(n_samples: u64, blocks: u32, seed: u64) -> Self {
        Self {
            n_samples,
            blocks: blocks.max(1),
            seed,
        }
    }

    /// Samples assigned to block `i`: the remainder spreads over the first
    /// blocks.
    pub fn count(&self, i: u32) -> u64 {
        let b = self.blocks as u64;
        let base = self.n_samples / b;
        let extra = self.n_samples % b;
        base + u64::from((i as u64) < extra)
    }
}

/// One sample: a log-form value and the log of its reweighting factor
/// (zero when the estimator is not reweighted). `None` rejects the draw.
pub type SampleDraw = Option<(LogDet, f64)>;

/// Runs one block of an estimator; the parallel unit.
pub fn value_block<F>(spec: &BlockSpec, block: u32, mut f: F) -> Result<ValueBlock, McError>
where
    F: FnMut(&mut ChaCha12Rng) -> Result<SampleDraw, McError>,
{
    let mut rng = stream_rng(spec.seed, block as u64);
    let mut out = ValueBlock::empty();
    for _ in 0..spec.count(block) {
        out.count += 1;
        match f(&mut rng)? {
            Some((value, log_weight)) => {
                out.val.add(value);
                out.val_sq.add(LogDet::new(2.0 * value.log_abs, 0.0));
                out.wt.add(LogDet::new(log_weight, 0.0));
                out.wt_sq.add(LogDet::new(2.0 * log_weight, 0.0));
            }
            None => out.rejected += 1,
        }
    }
    Ok(out)
}

/// Serial reference driver: an ordered fold of [`value_block`] over all
/// blocks (a parallel driver must reduce in the same order).
pub fn run_blocks<F>(spec: &BlockSpec, mut f: F) -> Result<Vec<ValueBlock>, McError>
where
    F: FnMut(&mut ChaCha12Rng) -> Result<SampleDraw, McError>,
{
    (0..spec.blocks)
        .map(|i| value_block(spec, i, &mut f))
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Folds block statistics into an [`Estimate`] under the requested method,
/// enforcing the rejection-rate bound.
pub fn estimate_from_blocks(
    blocks: &[ValueBlock],
    method: Method,
    seed: u64,
    reweighted: bool,
) -> Result<Estimate, McError> {
    let n_samples: u64 = blocks.iter().map(|b| b.count).sum();
    let rejected: u64 = blocks.iter().map(|b| b.rejected).sum();
    if n_samples == 0 {
        return Err(McError::NoSamples);
    }
    if (rejected as f64) > MAX_REJECT_RATE * n_samples as f64 {
        return Err(McError::ExcessiveRejections {
            rejected,
            n_samples,
        });
    }
    let kept = n_samples - rejected;
    if kept == 0 {
        return Err(McError::NoSamples);
    }

    let (mean, stderr) = match method {
        Method::PlainMean => {
            let mut val = ScaledSum::EMPTY;
            let mut val_sq = ScaledSum::EMPTY;
            for b in blocks {
                val.merge(&b.val);
                val_sq.merge(&b.val_sq);
            }
            let mean = val.total().div(&LogDet::from_real(kept as f64)).value();
            let sum_sq = val_sq.value().re;
            let var =
                ((sum_sq - kept as f64 * mean.norm_sqr()) / (kept.max(2) - 1) as f64).max(0.0);
            (mean, libm::sqrt(var / kept as f64))
        }
        Method::MedianOfMeans { .. } => {
            let means: Vec<Complex64> = blocks
                .iter()
                .filter(|b| b.count > b.rejected)
                .map(|b| {
                    b.val
                        .total()
                        .div(&LogDet::from_real((b.count - b.rejected) as f64))
                        .value()
                })
                .collect();
            let bn = means.len();
            if bn == 0 {
                return Err(McError::NoSamples);
            }
            let mean = Complex64::new(
                median(means.iter().map(|m| m.re).collect()),
                median(means.iter().map(|m| m.im).collect()),
            );
            let centroid: Complex64 = means.iter().sum::<Complex64>() / bn as f64;
            let ss: f64 = means.iter().map(|m| (m - centroid).norm_sqr()).sum();
            let sd = libm::sqrt(ss / (bn.max(2) - 1) as f64);
            // sqrt(pi/2) efficiency factor of the median of near-Gaussian
            // block means
            (mean, 1.2533141373155003 * sd / libm::sqrt(bn as f64))
        }
    };

    let ess = if reweighted {
        let mut wt = ScaledSum::EMPTY;
        let mut wt_sq = ScaledSum::EMPTY;
        for b in blocks {
            wt.merge(&b.wt);
            wt_sq.merge(&b.wt_sq);
        }
        let l = wt.total();
        let l2 = wt_sq.total();
        Some(libm::exp(2.0 * l.log_abs - l2.log_abs))
    } else {
        None
    };

    Ok(Estimate {
        mean,
        stderr,
        n_samples,
        rejected,
        method,
        seed,
        ess,
    })
}

/// Log of `prod_j det K(p_j) / prod_m det K(q_m)` for one sample; `None`
/// when any factor is singular.
fn log_det_ratio(
    field: &CoefficientField,
    sample: &EnsembleSample,
    q: &[f64],
    p: &[f64],
) -> Result<Option<LogDet>, McError> {
    let mut acc = LogDet::ONE;
    for &pj in p {
        let k = field.eval_k(sample, pj)?;
        match logdet(&k) {
            Ok(ld) => acc = acc.mul(&ld),
            Err(NumericsError::Singular { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    for &qm in q {
        let k = field.eval_k(sample, qm)?;
        match logdet(&k) {
            Ok(ld) => acc = acc.div(&ld),
            Err(NumericsError::Singular { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(acc))
}

/// One block of the determinant-ratio estimator; the unit a parallel driver
/// maps over before folding with [`estimate_from_blocks`] in block order.
pub fn partition_block(
    field: &CoefficientField,
    q: &[f64],
    p: &[f64],
    spec: &BlockSpec,
    block: u32,
) -> Result<ValueBlock, McError> {
    value_block(spec, block, |rng| {
        let sample = EnsembleSample::draw(field.class(), field.size_param(), rng);
        Ok(log_det_ratio(field, &sample, q, p)?.map(|ld| (ld, 0.0)))
    })
}

/// Ensemble average of `prod_j det K(p_j) / prod_m det K(q_m)` over fresh
/// Ginibre pairs of the field's class. `q` and `p` may have different
/// lengths; the empty product is one.
pub fn mc_partition(
    field: &CoefficientField,
    q: &[f64],
    p: &[f64],
    n_samples: u64,
    seed: u64,
    method: Method,
) -> Result<Estimate, McError> {
    if q.is_empty() && p.is_empty() {
        return Ok(Estimate {
            mean: Complex64::ONE,
            stderr: 0.0,
            n_samples,
            rejected: 0,
            method,
            seed,
            ess: None,
        });
    }
    let spec = BlockSpec::new(n_samples, method.blocks(), seed);
    let blocks: Vec<ValueBlock> = (0..spec.blocks)
        .map(|i| partition_block(field, q, p, &spec, i))
        .collect::<Result<_, _>>()?;
    estimate_from_blocks(&blocks, method, seed, false)
}

/// `< det K(p_m) det K(p_n) > / < det K1^2 >` over real quaternion pairs of
/// complex dimension `2(N-1)`, both averages on the same stream, with the
/// delta-method standard error of the ratio.
///
/// This is the Monte Carlo side of the first Pfaffian kernel: the closed
/// form is `[i v^T(p_n) tau_2 v(p_m)]^{2N-2} q_{2N-2}(x)` with the usual
/// polynomial argument. At `N = 1` the matrices are empty and the ratio is
/// exactly one.
pub fn mc_det_product(
    field: &CoefficientField,
    p_m: f64,
    p_n: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Estimate, McError> {
    if field.class() != SymmetryClass::Cii {
        return Err(McError::WrongClass(field.class()));
    }
    let n = field.size_param();
    let sub = CoefficientField::new(SymmetryClass::Cii, field.form().clone(), n - 1);
    let method = Method::PlainMean;
    let spec = BlockSpec::new(n_samples, DEFAULT_BLOCKS, seed);

    // per-block scaled sums of a, b, |a|^2, |b|^2, a b*
    #[derive(Clone)]
    struct Ratio {
        a: ScaledSum,
        b: ScaledSum,
        aa: ScaledSum,
        bb: ScaledSum,
        ab: ScaledSum,
        count: u64,
        rejected: u64,
    }
    let mut blocks: Vec<Ratio> = Vec::with_capacity(spec.blocks as usize);
    for i in 0..spec.blocks {
        let mut rng = stream_rng(seed, i as u64);
        let mut blk = Ratio {
            a: ScaledSum::EMPTY,
            b: ScaledSum::EMPTY,
            aa: ScaledSum::EMPTY,
            bb: ScaledSum::EMPTY,
            ab: ScaledSum::EMPTY,
            count: 0,
            rejected: 0,
        };
        for _ in 0..spec.count(i) {
            blk.count += 1;
            let sample = EnsembleSample::draw(SymmetryClass::Cii, n - 1, &mut rng);
            let da = logdet(&sub.eval_k(&sample, p_m)?);
            let db = logdet(&sub.eval_k(&sample, p_n)?);
            let d1 = logdet(&sample.k1);
            match (da, db, d1) {
                (Ok(da), Ok(db), Ok(d1)) => {
                    let za = da.mul(&db);
                    let zb = d1.powi(2);
                    blk.a.add(za);
                    blk.b.add(zb);
                    blk.aa.add(LogDet::new(2.0 * za.log_abs, 0.0));
                    blk.bb.add(LogDet::new(2.0 * zb.log_abs, 0.0));
                    blk.ab.add(za.mul(&zb.conj()));
                }
                _ => blk.rejected += 1,
            }
        }
        blocks.push(blk);
    }

    let n_total: u64 = blocks.iter().map(|b| b.count).sum();
    let rejected: u64 = blocks.iter().map(|b| b.rejected).sum();
    if (rejected as f64) > MAX_REJECT_RATE * n_total as f64 {
        return Err(McError::ExcessiveRejections {
            rejected,
            n_samples: n_total,
        });
    }
    let kept = n_total - rejected;
    if kept == 0 {
        return Err(McError::NoSamples);
    }
    let mut a = ScaledSum::EMPTY;
    let mut b = ScaledSum::EMPTY;
    let mut aa = ScaledSum::EMPTY;
    let mut bb = ScaledSum::EMPTY;
    let mut ab = ScaledSum::EMPTY;
    for blk in &blocks {
        a.merge(&blk.a);
        b.merge(&blk.b);
        aa.merge(&blk.aa);
        bb.merge(&blk.bb);
        ab.merge(&blk.ab);
    }
    let a_tot = a.total();
    let b_tot = b.total();
    let ratio = a_tot.div(&b_tot);
    let mean = ratio.value();

    // sum |a_i - R b_i|^2 / |sum b / n|^2, all relative to the mean of b
    let b_mean = b_tot.div(&LogDet::from_real(kept as f64));
    let rel = |x: LogDet| x.div(&b_mean.powi(2)).value();
    let t_aa = rel(aa.total());
    let t_bb = rel(bb.total());
    let t_ab = rel(ab.total());
    let ssq = (t_aa - 2.0 * (mean.conj() * t_ab) + mean.norm_sqr() * t_bb)
        .re
        .max(0.0);
    let stderr = libm::sqrt(ssq / ((kept.max(2) - 1) as f64 * kept as f64));

    Ok(Estimate {
        mean,
        stderr,
        n_samples: n_total,
        rejected,
        method,
        seed,
        ess: None,
    })
}

/// Reweighted spherical functional: the `M`-variable integral with the
/// weight of the size-`N` ensemble,
///
/// ```text
/// Z~(q, p) = E_M[ prod_r (1 + |z_r|^2)^{2(M-N)}
///                 prod_j prod_n (kappa(p_n) + z_j)(kappa(p_n) + z_j*)
///                      / prod_m (kappa(q_m) + z_j)(kappa(q_m) + z_j*) ] * C
/// ```
///
/// where the expectation runs over the size-`M` quaternion spherical
/// spectrum and `C` is the exact ratio of normalization constants (log-Beta
/// sums). Requires `l - k` even and `M + (l-k)/2 < N + 1`. The effective
/// sample size of the reweighting factors is reported.
pub fn mc_z_tilde(
    field: &CoefficientField,
    m_vars: usize,
    q: &[f64],
    p: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Estimate, McError> {
    if field.class() != SymmetryClass::Cii {
        return Err(McError::WrongClass(field.class()));
    }
    let n = field.size_param();
    let (k, l) = (q.len(), p.len());
    if (l as i64 - k as i64) % 2 != 0 {
        return Err(McError::OddImbalance { k, l });
    }
    let shift = (l as i64 - k as i64) / 2;
    let m_eff = m_vars as i64 + shift;
    if m_eff > n as i64 || m_eff < 0 {
        return Err(McError::BadWeightSize { m: m_vars });
    }

    let kappa = |x: f64| -> Result<Complex64, McError> {
        let (a, b) = field.eval_v(x);
        if b.norm() < 1e-14 * (a.norm() + b.norm()) {
            return Err(McError::KappaUndefined(x));
        }
        Ok(a / b)
    };
    let kq: Vec<Complex64> = q.iter().map(|&x| kappa(x)).collect::<Result<_, _>>()?;
    let kp: Vec<Complex64> = p.iter().map(|&x| kappa(x)).collect::<Result<_, _>>()?;

    // C = (2 pi)^{-(l-k)/2} prod_{j<=M} B(2j, 2M+2-2j)
    //                     / prod_{j<=M+(l-k)/2} B(2j, 2N+2-2j)
    let mut log_c = -(shift as f64) * libm::log(2.0 * PI);
    for j in 1..=m_vars {
        log_c += log_beta(2.0 * j as f64, 2.0 * m_vars as f64 + 2.0 - 2.0 * j as f64)?;
    }
    for j in 1..=(m_eff as usize) {
        log_c -= log_beta(2.0 * j as f64, 2.0 * n as f64 + 2.0 - 2.0 * j as f64)?;
    }
    let c_const = LogDet::new(log_c, 0.0);

    let method = Method::default_heavy_tail();
    let spec = BlockSpec::new(n_samples, method.blocks(), seed);
    let weight_exp = m_vars as f64 - n as f64; // applied to all 2M eigenvalues
    let blocks = run_blocks(&spec, |rng| {
        let spectrum = spherical_sample(SymmetryClass::Cii, m_vars, rng)?;
        let mut log_weight = 0.0;
        let mut value = c_const;
        for z in &spectrum.eigenvalues {
            log_weight += weight_exp * libm::log(1.0 + z.norm_sqr());
            for kpn in &kp {
                let f = kpn + z;
                if f == Complex64::ZERO {
                    return Ok(None);
                }
                value = value.mul(&LogDet::from_complex(f));
            }
            for kqm in &kq {
                let f = kqm + z;
                if f.norm() < 1e-280 {
                    return Ok(None);
                }
                value = value.div(&LogDet::from_complex(f));
            }
        }
        value = value.mul(&LogDet::new(log_weight, 0.0));
        Ok(Some((value, log_weight)))
    })?;
    estimate_from_blocks(&blocks, method, seed, true)
}

/// Average of `prod_j w(p_j)` over fresh samples, the direct estimator of
/// the winding-density correlator.
pub fn mc_correlator(
    field: &CoefficientField,
    p: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Estimate, McError> {
    let method = Method::default_heavy_tail();
    let spec = BlockSpec::new(n_samples, method.blocks(), seed);
    let blocks = run_blocks(&spec, |rng| {
        let sample = EnsembleSample::draw(field.class(), field.size_param(), rng);
        let mut prod = Complex64::ONE;
        for &pj in p {
            match winding_density(field, &sample, pj) {
                Ok(w) => prod *= w,
                Err(WindingError::GapClosed { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Some((LogDet::from_complex(prod), 0.0)))
    })?;
    estimate_from_blocks(&blocks, method, seed, false)
}

/// Correlator estimator over an externally supplied sample source; the
/// deterministic-field tests drive this with a constant source.
pub fn mc_correlator_with<F>(
    p: &[f64],
    n_samples: u64,
    seed: u64,
    field: &CoefficientField,
    mut source: F,
) -> Result<Estimate, McError>
where
    F: FnMut(&mut ChaCha12Rng) -> EnsembleSample,
{
    let method = Method::default_heavy_tail();
    let spec = BlockSpec::new(n_samples, method.blocks(), seed);
    let blocks = run_blocks(&spec, |rng| {
        let sample = source(rng);
        let mut prod = Complex64::ONE;
        for &pj in p {
            match winding_density(field, &sample, pj) {
                Ok(w) => prod *= w,
                Err(WindingError::GapClosed { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Some((LogDet::from_complex(prod), 0.0)))
    })?;
    estimate_from_blocks(&blocks, method, seed, false)
}
