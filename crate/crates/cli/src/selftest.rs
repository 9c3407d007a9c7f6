//! Built-in quick verification: a fast subset of the full acceptance
//! checks, one line per check, a few seconds total.

use chiralwind_core::analytic::{aiii_z11, cii_zkk, KernelGauge, PointSets};
use chiralwind_core::ensembles::{stream_rng, uniform_f64, EnsembleSample};
use chiralwind_core::field::CoefficientField;
use chiralwind_core::montecarlo::{mc_partition, Method};
use chiralwind_core::numerics::{logdet, pfaffian_log, ComplexMatrix};
use chiralwind_core::oracles::quad_skew_product;
use chiralwind_core::specfun::{
    lerch_phi_closed, lerch_phi_series, monomial_skew_product, poly_skew_product, skew_norm,
    skew_poly_even_dense, skew_poly_odd_dense,
};
use chiralwind_core::winding::winding_number;
use chiralwind_core::{Complex64, SymmetryClass};

use crate::config::{Overrides, RunConfig};
use crate::AppError;

struct Report {
    failures: u32,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("ok    {name}: {detail}");
        } else {
            println!("FAIL  {name}: {detail}");
            self.failures += 1;
        }
    }
}

pub fn run(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, _) = RunConfig::resolve(ov)?;
    let mut report = Report { failures: 0 };
    let seed = cfg.seed;

    // log determinant splits over products
    {
        let mut rng = stream_rng(seed, 1);
        let dim = 5;
        let a = ComplexMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5)
        });
        let b = ComplexMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5)
        });
        let lhs = logdet(&a.matmul(&b)).map_err(numeric)?;
        let rhs = logdet(&a)
            .map_err(numeric)?
            .mul(&logdet(&b).map_err(numeric)?);
        let err = (lhs.log_abs - rhs.log_abs).abs()
            + chiralwind_core::numerics::wrap_phase(lhs.phase - rhs.phase).abs();
        report.check("logdet-product", err < 1e-9, format!("residual {err:.2e}"));
    }

    // Pfaffian squared reproduces the determinant
    {
        let mut rng = stream_rng(seed, 2);
        let dim = 6;
        let mut a = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let z = Complex64::new(uniform_f64(&mut rng) - 0.5, uniform_f64(&mut rng) - 0.5);
                a[(i, j)] = z;
                a[(j, i)] = -z;
            }
        }
        let pf2 = pfaffian_log(&a).map_err(numeric)?.powi(2);
        let det = logdet(&a).map_err(numeric)?;
        let err = (pf2.log_abs - det.log_abs).abs()
            + chiralwind_core::numerics::wrap_phase(pf2.phase - det.phase).abs();
        report.check(
            "pfaffian-squared",
            err < 1e-9,
            format!("residual {err:.2e}"),
        );
    }

    // skew-orthogonality via the exact monomial kernel at N = 4
    {
        let weight = 4;
        let mut worst = 0.0f64;
        for j in 0..weight {
            for l in 0..weight {
                let ev = skew_poly_even_dense(j, weight).map_err(numeric)?;
                let od = skew_poly_odd_dense(l);
                let eo = poly_skew_product(&ev, &od, weight).map_err(numeric)?;
                let h = skew_norm(j, weight).map_err(numeric)?;
                let expect = if j == l { h } else { 0.0 };
                worst = worst.max((eo - expect).abs() / h);
            }
        }
        report.check(
            "skew-orthogonality",
            worst < 1e-11,
            format!("worst {worst:.2e}"),
        );
    }

    // Lerch closed route vs tail series
    {
        let z = Complex64::new(0.62, 0.31);
        let closed = lerch_phi_closed(7, z).map_err(numeric)?;
        let series = lerch_phi_series(7, z, 2000);
        let rel = (closed - series).norm() / series.norm();
        report.check(
            "lerch-routes",
            rel < 1e-12,
            format!("relative gap {rel:.2e}"),
        );
    }

    // monomial skew product: quadrature vs Beta closed form
    {
        let quad = quad_skew_product(2, 3, 3).map_err(numeric)?;
        let exact = monomial_skew_product(2, 3, 3).map_err(numeric)? / 2.0;
        let rel = (quad.value.re - exact).abs() / exact.abs();
        report.check(
            "skew-product-quadrature",
            rel < 1e-8,
            format!("relative {rel:.2e}"),
        );
    }

    // AIII closed form vs a short Monte Carlo run (4 sigma)
    {
        let field = CoefficientField::trig(SymmetryClass::Aiii, 2);
        let est = mc_partition(
            &field,
            &[0.5],
            &[0.9],
            100_000,
            seed,
            Method::default_heavy_tail(),
        )
        .map_err(numeric)?;
        let exact = aiii_z11(&field, 0.5, 0.9);
        let z = est.z_score(exact);
        report.check("aiii-vs-mc", z < 4.0, format!("z-score {z:.2}"));
    }

    // CII gauge independence of the assembled average
    {
        let field = CoefficientField::trig_tr(SymmetryClass::Cii, 1);
        let points = PointSets::new(vec![0.4, 1.3], vec![0.3, 1.1]).map_err(numeric)?;
        let zr = cii_zkk(&field, &points, KernelGauge::Results).map_err(numeric)?;
        let zd = cii_zkk(&field, &points, KernelGauge::Derivation).map_err(numeric)?;
        let rel = (zr - zd).norm() / zr.norm();
        report.check(
            "cii-gauge-independence",
            rel < 1e-9,
            format!("relative gap {rel:.2e}"),
        );
    }

    // winding of the pure phase rotation
    {
        let n = 4;
        let field = CoefficientField::trig(SymmetryClass::Aiii, n);
        let k1 = ComplexMatrix::identity(n);
        let k2 = ComplexMatrix::identity(n).scale(Complex64::new(0.0, 1.0));
        let sample =
            EnsembleSample::from_matrices(SymmetryClass::Aiii, n, k1, k2).map_err(numeric)?;
        let res = winding_number(&field, &sample, cfg.grid).map_err(numeric)?;
        report.check(
            "winding-phase-rotation",
            res.w == n as i64,
            format!("W = {} (expect {n})", res.w),
        );
    }

    if report.failures == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(AppError::Verification(format!(
            "{} selftest check(s) failed",
            report.failures
        )))
    }
}

fn numeric<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Numeric(e.to_string())
}
