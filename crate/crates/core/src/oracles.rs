//! Independent slow references: adaptive quadrature over the complex plane
//! for the Lerch-form pair integral, the monomial skew product, and the
//! Heine representation of the first nontrivial skew-orthogonal polynomial.
//!
//! These exist to check the closed forms and the fast paths against
//! something that shares no code with them; nothing here is called from the
//! production evaluation paths.
//!
//! All plane integrals go through polar coordinates with the compactifying
//! substitution `rho = t / (1 - t)`; the integrands decay like
//! `rho^{-(2N+2)}` so the transformed integrands vanish (or stay bounded and
//! smooth) at `t = 1`. Adaptive refinement is a worst-panel-first heap with
//! an embedded 7/15-node Gauss-Legendre error estimate per panel.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::numerics::gauss_legendre;
use crate::specfun::SpecFunError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("evaluation budget {budget} exhausted at estimated error {est_error:.3e}")]
    BudgetExceeded { budget: u64, est_error: f64 },
    #[error("kappa points coincide")]
    CoincidentKappa,
    #[error("weight index N = {0} too large for quadrature (limit {1})")]
    WeightTooLarge(usize, usize),
    #[error("monomial exponents ({a}, {b}) not integrable at weight {weight}")]
    NotIntegrable { a: usize, b: usize, weight: usize },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Quadrature outcome with its own error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub est_error: f64,
    pub evaluations: u64,
}

/// Evaluation cap shared by the plane integrals.
pub const QUAD_BUDGET: u64 = 10_000_000;

struct Panel {
    t0: f64,
    t1: f64,
    f0: f64,
    f1: f64,
    value: Complex64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

struct Rules {
    lo_nodes: Vec<f64>,
    lo_weights: Vec<f64>,
    hi_nodes: Vec<f64>,
    hi_weights: Vec<f64>,
}

impl Rules {
    fn new() -> Self {
        let (lo_nodes, lo_weights) = gauss_legendre(7);
        let (hi_nodes, hi_weights) = gauss_legendre(15);
        Self {
            lo_nodes,
            lo_weights,
            hi_nodes,
            hi_weights,
        }
    }
}

/// Tensor Gauss-Legendre over one `(t, phi)` panel at both rule orders;
/// returns the high-order value and the difference as error estimate.
fn panel_eval<F>(f: &F, rules: &Rules, t0: f64, t1: f64, f0: f64, f1: f64) -> (Complex64, f64, u64)
where
    F: Fn(f64, f64) -> Complex64,
{
    let eval = |nodes: &[f64], weights: &[f64]| -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (xi, wi) in nodes.iter().zip(weights) {
            let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xi;
            let mut row = Complex64::ZERO;
            for (yj, wj) in nodes.iter().zip(weights) {
                let phi = 0.5 * (f0 + f1) + 0.5 * (f1 - f0) * yj;
                row += *wj * f(t, phi);
            }
            acc += *wi * row;
        }
        acc * (0.25 * (t1 - t0) * (f1 - f0))
    };
    let lo = eval(&rules.lo_nodes, &rules.lo_weights);
    let hi = eval(&rules.hi_nodes, &rules.hi_weights);
    let evals = (rules.lo_nodes.len() * rules.lo_nodes.len()
        + rules.hi_nodes.len() * rules.hi_nodes.len()) as u64;
    (hi, (hi - lo).norm(), evals)
}

/// Adaptive 2-D integration of `f(t, phi)` over `[0,1] x [0, 2 pi]`
/// (the integrand carries its own Jacobian), worst panel first.
fn integrate_2d<F>(f: F, rel_tol: f64, budget: u64) -> Result<QuadratureResult, QuadError>
where
    F: Fn(f64, f64) -> Complex64,
{
    let rules = Rules::new();
    let mut heap: BinaryHeap<Panel> = BinaryHeap::new();
    let mut evaluations = 0u64;
    let mut total = Complex64::ZERO;
    let mut total_err = 0.0f64;

    // 4 x 4 starting grid
    let init = 4usize;
    for i in 0..init {
        for j in 0..init {
            let t0 = i as f64 / init as f64;
            let t1 = (i + 1) as f64 / init as f64;
            let f0 = 2.0 * PI * j as f64 / init as f64;
            let f1 = 2.0 * PI * (j + 1) as f64 / init as f64;
            let (v, e, n) = panel_eval(&f, &rules, t0, t1, f0, f1);
            evaluations += n;
            total += v;
            total_err += e;
            heap.push(Panel {
                t0,
                t1,
                f0,
                f1,
                value: v,
                err: e,
            });
        }
    }

    while total_err > rel_tol * total.norm().max(1e-300) {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        if evaluations >= budget {
            return Err(QuadError::BudgetExceeded {
                budget,
                est_error: total_err,
            });
        }
        total -= worst.value;
        total_err -= worst.err;
        let tm = 0.5 * (worst.t0 + worst.t1);
        let fm = 0.5 * (worst.f0 + worst.f1);
        for (t0, t1, f0, f1) in [
            (worst.t0, tm, worst.f0, fm),
            (tm, worst.t1, worst.f0, fm),
            (worst.t0, tm, fm, worst.f1),
            (tm, worst.t1, fm, worst.f1),
        ] {
            let (v, e, n) = panel_eval(&f, &rules, t0, t1, f0, f1);
            evaluations += n;
            total += v;
            total_err += e;
            heap.push(Panel {
                t0,
                t1,
                f0,
                f1,
                value: v,
                err: e,
            });
        }
    }
    Ok(QuadratureResult {
        value: total,
        est_error: total_err,
        evaluations,
    })
}

/// Adaptive 1-D integration of `f(t)` over `[0, 1]`.
fn integrate_1d<F>(f: F, rel_tol: f64, budget: u64) -> Result<QuadratureResult, QuadError>
where
    F: Fn(f64) -> f64,
{
    let rules = Rules::new();
    let seg_eval = |t0: f64, t1: f64| -> (f64, f64, u64) {
        let go = |nodes: &[f64], weights: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (xi, wi) in nodes.iter().zip(weights) {
                let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xi;
                acc += wi * f(t);
            }
            acc * 0.5 * (t1 - t0)
        };
        let lo = go(&rules.lo_nodes, &rules.lo_weights);
        let hi = go(&rules.hi_nodes, &rules.hi_weights);
        (hi, (hi - lo).abs(), 22)
    };

    struct Seg {
        t0: f64,
        t1: f64,
        value: f64,
        err: f64,
    }
    impl PartialEq for Seg {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Seg {}
    impl PartialOrd for Seg {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Seg {
        fn cmp(&self, other: &Self) -> Ordering {
            self.err.total_cmp(&other.err)
        }
    }

    let mut heap: BinaryHeap<Seg> = BinaryHeap::new();
    let mut evaluations = 0u64;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for i in 0..8 {
        let t0 = i as f64 / 8.0;
        let t1 = (i + 1) as f64 / 8.0;
        let (v, e, n) = seg_eval(t0, t1);
        evaluations += n;
        total += v;
        total_err += e;
        heap.push(Seg {
            t0,
            t1,
            value: v,
            err: e,
        });
    }
    while total_err > rel_tol * total.abs().max(1e-300) {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        if evaluations >= budget {
            return Err(QuadError::BudgetExceeded {
                budget,
                est_error: total_err,
            });
        }
        total -= worst.value;
        total_err -= worst.err;
        let tm = 0.5 * (worst.t0 + worst.t1);
        for (t0, t1) in [(worst.t0, tm), (tm, worst.t1)] {
            let (v, e, n) = seg_eval(t0, t1);
            evaluations += n;
            total += v;
            total_err += e;
            heap.push(Seg {
                t0,
                t1,
                value: v,
                err: e,
            });
        }
    }
    Ok(QuadratureResult {
        value: Complex64::new(total, 0.0),
        est_error: total_err,
        evaluations,
    })
}

/// Plane integral
///
/// ```text
/// J = int d[z] (1 + |z|^2)^{-(2N+2)} [(z + k1)(z* + k2)]^{-1}
///             [(1 - k1* z) / (1 + |k1|^2)]^{2N+1}
/// ```
///
/// in polar coordinates centered on the pole at `z = -k1`, which the polar
/// Jacobian cancels exactly; the remaining `1/|z + k2*|` singularity is
/// integrable and handled by the panel heap. Its closed form is a Lerch
/// transcendent, which the acceptance suite compares against.
pub fn quad_j(
    kappa1: Complex64,
    kappa2: Complex64,
    n: usize,
) -> Result<QuadratureResult, QuadError> {
    if n > 4 {
        return Err(QuadError::WeightTooLarge(n, 4));
    }
    if (kappa1 - kappa2).norm() < 1e-12 {
        return Err(QuadError::CoincidentKappa);
    }
    let power = 2 * n as i32 + 1;
    let norm1 = 1.0 + kappa1.norm_sqr();
    let f = move |t: f64, phi: f64| -> Complex64 {
        if t >= 1.0 {
            return Complex64::ZERO;
        }
        let rho = t / (1.0 - t);
        let dir = Complex64::new(libm::cos(phi), libm::sin(phi));
        let z = -kappa1 + rho * dir;
        let w = 1.0 + z.norm_sqr();
        // 1/(z + kappa1) = dir.conj() / rho cancels one Jacobian rho
        let denom2 = z.conj() + kappa2;
        if denom2 == Complex64::ZERO {
            return Complex64::ZERO;
        }
        let hol = (Complex64::ONE - kappa1.conj() * z) / norm1;
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        libm::pow(w, -(2.0 * n as f64 + 2.0)) * dir.conj() / denom2 * hol.powi(power) * jac
    };
    integrate_2d(f, 1e-7, QUAD_BUDGET)
}

/// Skew product `<z^{a-1} | z^{b-1}>` of two monomials: the angular integral
/// selects `|a - b| = 1` analytically and the radial Beta-type integral is
/// done numerically; equals half the antisymmetric kernel entry `D_ab`.
pub fn quad_skew_product(a: usize, b: usize, n: usize) -> Result<QuadratureResult, QuadError> {
    if a == 0 || b == 0 || a > 2 * n + 1 || b > 2 * n + 1 {
        return Err(QuadError::NotIntegrable { a, b, weight: n });
    }
    let sign = if b == a + 1 {
        1.0
    } else if a == b + 1 {
        -1.0
    } else {
        return Ok(QuadratureResult {
            value: Complex64::ZERO,
            est_error: 0.0,
            evaluations: 0,
        });
    };
    // radial: int_0^inf rho^{a+b} (1 + rho^2)^{-(2N+2)} d rho
    let pow = (a + b) as f64;
    let weight = 2.0 * n as f64 + 2.0;
    let radial = integrate_1d(
        move |t: f64| -> f64 {
            if t >= 1.0 {
                return 0.0;
            }
            let rho = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            libm::pow(rho, pow) * libm::pow(1.0 + rho * rho, -weight) * jac
        },
        1e-10,
        QUAD_BUDGET,
    )?;
    Ok(QuadratureResult {
        value: 2.0 * PI * sign * radial.value,
        est_error: 2.0 * PI * radial.est_error,
        evaluations: radial.evaluations,
    })
}

/// Heine-formula check of `q_2` at one point: the one-variable ratio
///
/// ```text
/// q_2(x) = int d[z] (z* - z)(z - x)(z* - x) g(z) / int d[z] (z* - z) g(z)
/// ```
///
/// with `g(z) = (z - z*)(1 + |z|^2)^{-(2N+2)}`, computed by plane quadrature
/// of numerator and denominator. The `value` is the ratio; callers compare
/// it against the Beta-sum coefficients.
pub fn heine_q2_check(n: usize, x: f64) -> Result<QuadratureResult, QuadError> {
    if n > 4 {
        return Err(QuadError::WeightTooLarge(n, 4));
    }
    let weight = 2.0 * n as f64 + 2.0;
    // (z* - z) g(z) = 4 Im(z)^2 (1 + |z|^2)^{-(2N+2)}, real positive
    let base = move |t: f64, phi: f64| -> (f64, Complex64) {
        if t >= 1.0 {
            return (0.0, Complex64::ZERO);
        }
        let rho = t / (1.0 - t);
        let z = rho * Complex64::new(libm::cos(phi), libm::sin(phi));
        let jac = rho / ((1.0 - t) * (1.0 - t));
        let g = 4.0 * z.im * z.im * libm::pow(1.0 + z.norm_sqr(), -weight) * jac;
        (g, z)
    };
    let num = integrate_2d(
        move |t, phi| {
            let (g, z) = base(t, phi);
            let xc = Complex64::new(x, 0.0);
            g * (z - xc) * (z.conj() - xc)
        },
        1e-9,
        QUAD_BUDGET,
    )?;
    let den = integrate_2d(
        move |t, phi| Complex64::new(base(t, phi).0, 0.0),
        1e-9,
        QUAD_BUDGET,
    )?;
    let value = num.value / den.value;
    let rel =
        num.est_error / num.value.norm().max(1e-300) + den.est_error / den.value.norm().max(1e-300);
    Ok(QuadratureResult {
        value,
        est_error: rel * value.norm(),
        evaluations: num.evaluations + den.evaluations,
    })
}

/// Closed-form target of [`quad_j`]: the Lerch transcendent expression, for
/// the acceptance comparisons.
pub fn quad_j_closed_form(
    kappa1: Complex64,
    kappa2: Complex64,
    n: usize,
) -> Result<Complex64, QuadError> {
    let norm1 = 1.0 + kappa1.norm_sqr();
    let norm2 = 1.0 + kappa2.norm_sqr();
    let cross = Complex64::ONE + kappa1 * kappa2;
    let u = cross.norm_sqr() / (norm1 * norm2);
    let pref =
        ((Complex64::ONE + (kappa1 * kappa2).conj()) / (norm1 * norm2)).powi(2 * n as i32 + 2);
    let lerch = crate::specfun::lerch_phi(2 * n as u32 + 1, Complex64::new(u, 0.0))?;
    Ok(PI * pref * lerch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{monomial_skew_product, skew_poly_even};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quad_j_matches_lerch_closed_form() {
        let k1 = c(0.3, 0.2);
        let k2 = c(-0.5, 0.7);
        let got = quad_j(k1, k2, 1).unwrap();
        let expect = quad_j_closed_form(k1, k2, 1).unwrap();
        assert!(
            (got.value - expect).norm() < 1e-6 * expect.norm(),
            "quad {} vs closed {}",
            got.value,
            expect
        );
    }

    #[test]
    fn quad_j_kappa_swap_symmetry() {
        let k1 = c(0.4, -0.3);
        let k2 = c(-0.2, 0.5);
        let a = quad_j(k1, k2, 1).unwrap();
        let b = quad_j(k2, k1, 1).unwrap();
        assert!(
            (a.value - b.value).norm() < 2e-6 * a.value.norm(),
            "{} vs {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn quad_j_conjugation_symmetry() {
        // conjugating both kappas conjugates the integral (z -> z* change of
        // variables in the plane integral)
        let k1 = c(0.0, 0.45);
        let k2 = c(0.0, -0.8);
        let a = quad_j(k1, k2, 1).unwrap();
        let b = quad_j(k1.conj(), k2.conj(), 1).unwrap();
        assert!((a.value - b.value.conj()).norm() < 2e-6 * a.value.norm());
    }

    #[test]
    fn quad_j_validates_inputs() {
        assert!(matches!(
            quad_j(c(0.1, 0.0), c(0.1, 0.0), 1),
            Err(QuadError::CoincidentKappa)
        ));
        assert!(matches!(
            quad_j(c(0.1, 0.0), c(0.4, 0.0), 9),
            Err(QuadError::WeightTooLarge(9, 4))
        ));
    }

    #[test]
    fn skew_product_matches_beta() {
        // (a, b) = (1, 2), N = 2: pi B(4, 2)
        let got = quad_skew_product(1, 2, 2).unwrap();
        let expect = PI * libm::exp(crate::specfun::log_beta(4.0, 2.0).unwrap());
        assert!((got.value.re - expect).abs() < 1e-8 * expect);
        assert!(got.value.im.abs() < 1e-12);

        // against the exact kernel for several neighbors
        for (a, b, n) in [(1usize, 2usize, 2usize), (2, 3, 3), (4, 5, 3)] {
            let got = quad_skew_product(a, b, n).unwrap();
            let exact = monomial_skew_product(a, b, n).unwrap() / 2.0;
            assert!(
                (got.value.re - exact).abs() < 1e-8 * exact.abs(),
                "({a},{b},{n}): {} vs {exact}",
                got.value.re
            );
        }
    }

    #[test]
    fn skew_product_angular_selection_and_antisymmetry() {
        let zero = quad_skew_product(2, 2, 2).unwrap();
        assert_eq!(zero.value, Complex64::ZERO);
        assert_eq!(zero.evaluations, 0);
        let ab = quad_skew_product(2, 3, 3).unwrap();
        let ba = quad_skew_product(3, 2, 3).unwrap();
        assert!((ab.value + ba.value).norm() < 1e-12);
    }

    #[test]
    fn heine_q2_values_by_hand() {
        // q_2^{(2)}(0) = 2/3 and q_2^{(2)}(1) = 5/3
        let at0 = heine_q2_check(2, 0.0).unwrap();
        assert!((at0.value.re - 2.0 / 3.0).abs() < 1e-6);
        assert!(at0.value.im.abs() < 1e-9);
        let at1 = heine_q2_check(2, 1.0).unwrap();
        assert!((at1.value.re - 5.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn heine_matches_beta_sum_poly() {
        for n in [2usize, 3] {
            for x in [0.0, 0.5, 1.0] {
                let quad = heine_q2_check(n, x).unwrap();
                let poly = skew_poly_even(1, n, c(x, 0.0)).unwrap();
                assert!(
                    (quad.value - poly).norm() < 1e-6 * poly.norm().max(0.1),
                    "N={n} x={x}: {} vs {poly}",
                    quad.value
                );
            }
        }
    }

    #[test]
    fn quadrature_error_shrinks_with_budget() {
        // halving demand: a tighter tolerance must tighten the estimate
        let k1 = c(0.25, 0.15);
        let k2 = c(-0.4, 0.55);
        let loose = integrate_2d(
            |t, phi| {
                let rho = t / (1.0 - t);
                let dir = Complex64::new(libm::cos(phi), libm::sin(phi));
                let z = -k1 + rho * dir;
                let jac = 1.0 / ((1.0 - t) * (1.0 - t));
                libm::pow(1.0 + z.norm_sqr(), -4.0) * dir.conj() / (z.conj() + k2) * jac
            },
            1e-4,
            QUAD_BUDGET,
        )
        .unwrap();
        let tight = integrate_2d(
            |t, phi| {
                let rho = t / (1.0 - t);
                let dir = Complex64::new(libm::cos(phi), libm::sin(phi));
                let z = -k1 + rho * dir;
                let jac = 1.0 / ((1.0 - t) * (1.0 - t));
                libm::pow(1.0 + z.norm_sqr(), -4.0) * dir.conj() / (z.conj() + k2) * jac
            },
            2.5e-5,
            QUAD_BUDGET,
        )
        .unwrap();
        assert!(tight.est_error < 0.5 * loose.est_error);
        assert!(tight.evaluations > loose.evaluations);
        assert!((tight.value - loose.value).norm() < 1e-3 * tight.value.norm());
    }
}
