//! Run configuration: JSON schema, flag overrides and field construction.
//!
//! Every output file embeds the fully resolved configuration, so a run can
//! be reproduced byte for byte from its own header.

use std::path::PathBuf;

use chiralwind_core::analytic::KernelGauge;
use chiralwind_core::field::{CoefficientField, FieldForm, FourierSeries};
use chiralwind_core::montecarlo::Method;
use chiralwind_core::{Complex64, SymmetryClass};
use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassSpec {
    Aiii,
    Cii,
}

impl ClassSpec {
    pub fn to_class(self) -> SymmetryClass {
        match self {
            ClassSpec::Aiii => SymmetryClass::Aiii,
            ClassSpec::Cii => SymmetryClass::Cii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    Trig,
    TrigTr,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    PlainMean,
    MedianOfMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeSpec {
    Results,
    Derivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatSpec {
    Csv,
    Json,
}

/// Field specification: builtin trig forms or truncated Fourier series with
/// complex coefficients given as `[re, im]` pairs for harmonics `-M..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub form: FormSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_a: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_b: Option<Vec<[f64; 2]>>,
}

/// The resolved run configuration embedded into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub class: ClassSpec,
    pub n: usize,
    pub field: FieldSpec,
    pub grid: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_points: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_points: Option<Vec<f64>>,
    pub n_samples: u64,
    pub seed: u64,
    pub method: MethodSpec,
    pub blocks: u32,
    pub gauge: GaugeSpec,
    pub format: FormatSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            class: ClassSpec::Aiii,
            n: 4,
            field: FieldSpec {
                form: FormSpec::Trig,
                fourier_a: None,
                fourier_b: None,
            },
            grid: 100,
            k: 1,
            q_points: None,
            p_points: None,
            n_samples: 100_000,
            seed: 42,
            method: MethodSpec::MedianOfMeans,
            blocks: 32,
            gauge: GaugeSpec::Results,
            format: FormatSpec::Csv,
        }
    }
}

/// Command line overrides applied on top of the shared defaults and any
/// `--config` file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// symmetry class: aiii or cii
    #[arg(long)]
    pub class: Option<String>,
    /// matrix size parameter N
    #[arg(long)]
    pub n: Option<usize>,
    /// number of parameter points per determinant list
    #[arg(long)]
    pub k: Option<usize>,
    /// Monte Carlo sample count
    #[arg(long)]
    pub samples: Option<u64>,
    /// random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// output format: csv or json
    #[arg(long)]
    pub format: Option<String>,
    /// momentum grid steps
    #[arg(long)]
    pub grid: Option<usize>,
    /// CII kernel gauge: results or derivation
    #[arg(long)]
    pub gauge: Option<String>,
    /// aggregation: median-of-means or plain-mean
    #[arg(long)]
    pub method: Option<String>,
}

impl RunConfig {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(ov: &Overrides) -> Result<(Self, Option<PathBuf>), AppError> {
        let mut cfg = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    AppError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| AppError::Config(format!("invalid config: {e}")))?
            }
            None => RunConfig::default(),
        };
        if let Some(class) = &ov.class {
            cfg.class = match class.to_ascii_lowercase().as_str() {
                "aiii" => ClassSpec::Aiii,
                "cii" => ClassSpec::Cii,
                other => return Err(AppError::Config(format!("unknown class '{other}'"))),
            };
            // the builtin field default follows the class unless overridden
            if cfg.field.form == FormSpec::Trig && cfg.class == ClassSpec::Cii {
                cfg.field.form = FormSpec::TrigTr;
            }
        }
        if let Some(n) = ov.n {
            cfg.n = n;
        }
        if let Some(k) = ov.k {
            cfg.k = k;
        }
        if let Some(s) = ov.samples {
            cfg.n_samples = s;
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(g) = ov.grid {
            cfg.grid = g;
        }
        if let Some(f) = &ov.format {
            cfg.format = match f.to_ascii_lowercase().as_str() {
                "csv" => FormatSpec::Csv,
                "json" => FormatSpec::Json,
                other => return Err(AppError::Config(format!("unknown format '{other}'"))),
            };
        }
        if let Some(g) = &ov.gauge {
            cfg.gauge = match g.to_ascii_lowercase().as_str() {
                "results" => GaugeSpec::Results,
                "derivation" => GaugeSpec::Derivation,
                other => return Err(AppError::Config(format!("unknown gauge '{other}'"))),
            };
        }
        if let Some(m) = &ov.method {
            cfg.method = match m.to_ascii_lowercase().as_str() {
                "plain-mean" => MethodSpec::PlainMean,
                "median-of-means" => MethodSpec::MedianOfMeans,
                other => return Err(AppError::Config(format!("unknown method '{other}'"))),
            };
        }
        cfg.validate()?;
        Ok((cfg, ov.out.clone()))
    }

    fn validate(&self) -> Result<(), AppError> {
        if self.n == 0 {
            return Err(AppError::Config("n must be at least 1".into()));
        }
        if self.grid < 16 {
            return Err(AppError::Config("grid must be at least 16".into()));
        }
        if self.k == 0 {
            return Err(AppError::Config("k must be at least 1".into()));
        }
        if self.blocks == 0 {
            return Err(AppError::Config("blocks must be at least 1".into()));
        }
        if self.field.form == FormSpec::Fourier {
            for (name, coeffs) in [
                ("fourier_a", &self.field.fourier_a),
                ("fourier_b", &self.field.fourier_b),
            ] {
                match coeffs {
                    None => return Err(AppError::Config(format!("fourier form requires {name}"))),
                    Some(c) if c.len() % 2 == 0 => {
                        return Err(AppError::Config(format!(
                            "{name} must have odd length (harmonics -M..=M)"
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let (Some(q), Some(p)) = (&self.q_points, &self.p_points) {
            if q.len() != p.len() {
                return Err(AppError::Config(format!(
                    "q_points and p_points must have equal length, got {} vs {}",
                    q.len(),
                    p.len()
                )));
            }
        }
        Ok(())
    }

    pub fn class(&self) -> SymmetryClass {
        self.class.to_class()
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodSpec::PlainMean => Method::PlainMean,
            MethodSpec::MedianOfMeans => Method::MedianOfMeans {
                blocks: self.blocks,
            },
        }
    }

    pub fn gauge(&self) -> KernelGauge {
        match self.gauge {
            GaugeSpec::Results => KernelGauge::Results,
            GaugeSpec::Derivation => KernelGauge::Derivation,
        }
    }

    pub fn build_field(&self) -> Result<CoefficientField, AppError> {
        let class = self.class();
        let form = match self.field.form {
            FormSpec::Trig => FieldForm::Trig,
            FormSpec::TrigTr => FieldForm::TrigTr,
            FormSpec::Fourier => {
                let to_series = |pairs: &Vec<[f64; 2]>| -> Result<FourierSeries, AppError> {
                    FourierSeries::new(
                        pairs
                            .iter()
                            .map(|[re, im]| Complex64::new(*re, *im))
                            .collect(),
                    )
                    .map_err(|e| AppError::Config(e.to_string()))
                };
                FieldForm::Fourier {
                    a: to_series(self.field.fourier_a.as_ref().unwrap())?,
                    b: to_series(self.field.fourier_b.as_ref().unwrap())?,
                }
            }
        };
        Ok(CoefficientField::new(class, form, self.n))
    }

    /// Point sets for the analytic/verification commands: explicit lists if
    /// given, otherwise the documented per-class defaults for `k = 1, 2`.
    pub fn point_sets(&self) -> Result<(Vec<f64>, Vec<f64>), AppError> {
        if let (Some(q), Some(p)) = (&self.q_points, &self.p_points) {
            return Ok((q.clone(), p.clone()));
        }
        let (q, p) = match (self.class, self.k) {
            (ClassSpec::Aiii, 1) => (vec![0.5], vec![0.9]),
            (ClassSpec::Aiii, 2) => (vec![0.1, 0.7], vec![0.3, 1.2]),
            (ClassSpec::Cii, 1) => (vec![1.1], vec![0.3]),
            (ClassSpec::Cii, 2) => (vec![0.4, 1.3], vec![0.3, 1.1]),
            (_, k) => {
                return Err(AppError::Config(format!(
                    "no default points for k = {k}; supply q_points and p_points"
                )))
            }
        };
        Ok((q, p))
    }
}
