//! Experiment configuration, λ-sweeps, identity checks and report files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    beta_moment_check, det_integral_identity_check, homotopy_integral, predict_logdet,
    predict_trace, predict_trace_displayed, AsymptoticCoefficients, HomotopyReport,
    IntegralIdentityReport, MomentIdentityReport, SpectralData,
};
use crate::error::{Error, Result};
use crate::factorization::{
    cone_factorize, FactorizationDiagnostics, FactorizationOptions, FactorizationResult,
};
use crate::lattice::{ConeSpec, FrequencyPoint, PrimitiveVector, TriangleInstance};
use crate::par;
use crate::structured::{build_system, structured_inverse_columns, SolveReport, SolverMode, StructuredOptions};
use crate::symbol::{synthesize, FourierMap, GridFunction};
use crate::toeplitz::{assemble_toeplitz, logdet_and_trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleConfig {
    pub nu1: [i64; 2],
    pub a: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolMode {
    /// Entries are the coefficients of α and f = |α|².
    AlphaCoeffs,
    /// Entries are the coefficients of f.
    FCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolConfig {
    pub mode: SymbolMode,
    pub entries: FourierMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambda_list: Vec<u32>,
}

fn default_grid() -> usize {
    256
}
fn default_box() -> usize {
    64
}
fn default_tol_spec() -> f64 {
    1e-10
}
fn default_tol_fact() -> f64 {
    1e-8
}
fn default_tol_solve() -> f64 {
    1e-12
}
fn default_nodes() -> usize {
    32
}
fn default_structured_limit() -> usize {
    600
}
fn default_dense_limit() -> usize {
    6000
}
fn default_solver() -> SolverMode {
    SolverMode::Neumann
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default = "default_box")]
    pub box_m: usize,
    #[serde(default = "default_tol_spec")]
    pub tol_spec: f64,
    #[serde(default = "default_tol_fact")]
    pub tol_fact: f64,
    #[serde(default = "default_tol_solve")]
    pub tol_solve: f64,
    #[serde(default = "default_solver")]
    pub solver_mode: SolverMode,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    /// Structured inversion runs only up to this many lattice points.
    #[serde(default = "default_structured_limit")]
    pub structured_limit: usize,
    #[serde(default)]
    pub structured_box_m: Option<usize>,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all numerics fields have defaults")
    }
}

fn default_identity_lambdas() -> Vec<u32> {
    vec![1, 2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityConfig {
    /// Perturbation h in the determinant identity; `None` means 1 − f.
    #[serde(default)]
    pub h_entries: Option<FourierMap>,
    #[serde(default = "default_identity_lambdas")]
    pub lambdas: Vec<u32>,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            h_entries: None,
            lambdas: default_identity_lambdas(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub json_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub triangle: TriangleConfig,
    pub symbol: SymbolConfig,
    pub cone: [[i64; 2]; 2],
    pub sweep: SweepConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub identities: IdentityConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// Everything derived from a config that does not depend on λ.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub base: TriangleInstance,
    pub cone: ConeSpec,
    pub f_coeffs: FourierMap,
    pub f_grid: GridFunction,
    pub factorization: FactorizationResult,
    pub coefficients: AsymptoticCoefficients,
}

/// f̂(j) = Σ_k α̂(k)·conj(α̂(k − j)).
pub fn modulus_squared(alpha: &FourierMap) -> FourierMap {
    let mut f = FourierMap::new(true);
    for (k1, a1) in alpha.iter() {
        for (k2, a2) in alpha.iter() {
            f.add(k1 - k2, a1 * a2.conj());
        }
    }
    f
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn triangle_at(&self, lambda: u32) -> Result<TriangleInstance> {
        let [al, be] = self.triangle.nu1;
        TriangleInstance::new(PrimitiveVector::new(al, be)?, self.triangle.a, lambda)
    }

    pub fn cone_spec(&self) -> Result<ConeSpec> {
        let [e1, e2] = self.cone;
        ConeSpec::from_points(FrequencyPoint::new(e1[0], e1[1]), FrequencyPoint::new(e2[0], e2[1]))
    }

    pub fn factorization_options(&self) -> FactorizationOptions {
        FactorizationOptions {
            grid_n: self.numerics.grid_n,
            box_m: self.numerics.box_m,
            tol_spec: self.numerics.tol_spec,
            tol_fact: self.numerics.tol_fact,
            ..Default::default()
        }
    }

    pub fn structured_options(&self) -> StructuredOptions {
        StructuredOptions {
            box_m: self.numerics.structured_box_m,
            solver: self.numerics.solver_mode,
            tol_solve: self.numerics.tol_solve,
            dense_limit: self.numerics.dense_limit,
            ..Default::default()
        }
    }

    /// Coefficients of f from either symbol mode.
    pub fn f_coeffs(&self) -> FourierMap {
        match self.symbol.mode {
            SymbolMode::FCoeffs => self.symbol.entries.clone(),
            SymbolMode::AlphaCoeffs => modulus_squared(&self.symbol.entries),
        }
    }

    /// Validates the config and computes the λ-independent data.
    pub fn prepare(&self) -> Result<PreparedExperiment> {
        if self.sweep.lambda_list.is_empty() {
            return Err(Error::InvalidConfig("sweep.lambda_list is empty".into()));
        }
        if self.sweep.lambda_list.contains(&0) {
            return Err(Error::ZeroLambda);
        }
        let base = self.triangle_at(1)?;
        let cone = self.cone_spec()?;
        let f_coeffs = self.f_coeffs();
        if f_coeffs.hermitian_defect() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "symbol is not real-valued (hermitian defect {:.3e})",
                f_coeffs.hermitian_defect()
            )));
        }
        let f_grid = synthesize(&f_coeffs, self.numerics.grid_n)?.map(|z| Complex64::new(z.re, 0.0));
        let factorization = cone_factorize(&f_grid, &cone, &self.factorization_options())?;
        let coefficients = if factorization.is_exact() {
            AsymptoticCoefficients::compute(&f_grid, &factorization)?
        } else {
            AsymptoticCoefficients::from_symbol(&f_grid)?
        };
        Ok(PreparedExperiment {
            config: self.clone(),
            base,
            cone,
            f_coeffs,
            f_grid,
            factorization,
            coefficients,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: u32,
    pub n_points: usize,
    pub trace_dense: f64,
    pub trace_structured: Option<f64>,
    pub trace_predicted: f64,
    /// Prediction with the correction taken as +λ(𝔖₁c₁ + 𝔖₂c₂).
    pub trace_predicted_displayed: f64,
    pub logdet_dense: f64,
    pub logdet_predicted: f64,
    pub resid_trace_per_lambda: f64,
    pub resid_logdet_per_lambda: f64,
    /// |Λ|·∫1/f.
    pub trace_volume: f64,
    /// |Λ|·∫ln f.
    pub logdet_volume: f64,
    pub structured_report: Option<SolveReport>,
    /// Why the structured trace is missing, when it is.
    pub structured_skipped: Option<String>,
    pub factorization: FactorizationDiagnostics,
    pub wall_time_s: f64,
}

fn record_at(p: &PreparedExperiment, lambda: u32) -> Result<SweepRecord> {
    let start = Instant::now();
    let t = p.base.at_lambda(lambda)?;
    let m = assemble_toeplitz(&p.f_coeffs, &t);
    let (logdet_dense, trace_dense) = logdet_and_trace(&m)?;
    let c = &p.coefficients;
    let trace_predicted = predict_trace(c, &t);
    let logdet_predicted = predict_logdet(c, &t);
    let (mut trace_structured, mut structured_report, mut structured_skipped) = (None, None, None);
    if t.n_points > p.config.numerics.structured_limit {
        structured_skipped = Some(format!(
            "{} lattice points above the structured limit",
            t.n_points
        ));
    } else if !p.factorization.is_exact() {
        structured_skipped = Some("factorization is on the singular path".into());
    } else {
        match build_system(&p.factorization, &t, &p.config.structured_options()) {
            Ok(sys) => {
                let (cols, report) = structured_inverse_columns(&sys)?;
                trace_structured = Some(cols.iter().enumerate().map(|(i, c)| c.values[i].re).sum());
                structured_report = Some(report);
            }
            Err(Error::TooLarge { size, limit }) => {
                structured_skipped = Some(format!("exchange block {size} above {limit}"));
            }
            Err(e) => return Err(e),
        }
    }
    let lam = lambda as f64;
    let f = &p.factorization;
    Ok(SweepRecord {
        lambda,
        n_points: t.n_points,
        trace_dense,
        trace_structured,
        trace_predicted,
        trace_predicted_displayed: predict_trace_displayed(c, &t),
        logdet_dense,
        logdet_predicted,
        resid_trace_per_lambda: (trace_dense - trace_predicted) / lam,
        resid_logdet_per_lambda: (logdet_dense - logdet_predicted) / lam,
        trace_volume: t.n_points as f64 * c.mean_recip,
        logdet_volume: t.n_points as f64 * c.mean_log,
        structured_report,
        structured_skipped,
        factorization: FactorizationDiagnostics {
            residual_sup: f.residual_sup,
            residual_l2: f.residual_l2,
            leak_alpha: f.leak_alpha,
            leak_beta: f.leak_beta,
        },
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One record per λ in config order.
pub fn run_sweep(p: &PreparedExperiment) -> Result<Vec<SweepRecord>> {
    let lambdas = &p.config.sweep.lambda_list;
    par::map_slice(lambdas, |&l| record_at(p, l).map_err(|e| e.at_lambda(l)))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeField {
    Trace,
    Logdet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Data minus fitted line, per record.
    pub residuals: Vec<f64>,
}

/// Least squares of (value − volume term) against λ.
pub fn fit_slope(records: &[SweepRecord], field: SlopeField) -> Result<SlopeFit> {
    if records.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: records.len(),
        });
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            let y = match field {
                SlopeField::Trace => r.trace_dense - r.trace_volume,
                SlopeField::Logdet => r.logdet_dense - r.logdet_volume,
            };
            (r.lambda as f64, y)
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: 1,
        });
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(SlopeFit {
        slope,
        intercept,
        residuals: pts.iter().map(|p| p.1 - slope * p.0 - intercept).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityChecks {
    pub moments: Option<MomentIdentityReport>,
    pub integral: Vec<IntegralIdentityReport>,
    pub homotopy: HomotopyReport,
}

/// Moment identity, determinant integral identity and homotopy integral.
pub fn check_identities(p: &PreparedExperiment) -> Result<IdentityChecks> {
    let cfg = &p.config;
    let moments = if p.factorization.is_exact() {
        let sd = SpectralData::of(&p.f_grid)?;
        let log_recip = sd.log.scaled(Complex64::new(-1.0, 0.0));
        Some(beta_moment_check(&p.factorization, &sd.recip, &log_recip)?)
    } else {
        None
    };
    let h = match &cfg.identities.h_entries {
        Some(h) => h.clone(),
        None => {
            let mut h = p.f_coeffs.scaled(Complex64::new(-1.0, 0.0));
            h.add(FrequencyPoint::ORIGIN, Complex64::new(1.0, 0.0));
            h.pruned(0.0)
        }
    };
    let nodes = cfg.numerics.quadrature_nodes;
    let mut integral = Vec::new();
    for &l in &cfg.identities.lambdas {
        let t = p.base.at_lambda(l)?;
        integral.push(
            det_integral_identity_check(&h, &t, nodes, cfg.numerics.grid_n)
                .map_err(|e| e.at_lambda(l))?,
        );
    }
    let homotopy = homotopy_integral(&p.f_grid, &p.base, nodes)?;
    Ok(IdentityChecks {
        moments,
        integral,
        homotopy,
    })
}

pub const CSV_COLUMNS: [&str; 9] = [
    "lambda",
    "n_points",
    "trace_dense",
    "trace_structured",
    "trace_predicted",
    "resid_trace_per_lambda",
    "logdet_dense",
    "logdet_predicted",
    "resid_logdet_per_lambda",
];

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: std::io::Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.lambda.to_string(),
            r.n_points.to_string(),
            num(r.trace_dense),
            r.trace_structured.map(num).unwrap_or_default(),
            num(r.trace_predicted),
            num(r.resid_trace_per_lambda),
            num(r.logdet_dense),
            num(r.logdet_predicted),
            num(r.resid_logdet_per_lambda),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: ExperimentConfig,
    pub coefficients: AsymptoticCoefficients,
    pub records: Vec<SweepRecord>,
    pub trace_fit: Option<SlopeFit>,
    pub logdet_fit: Option<SlopeFit>,
    pub identities: Option<IdentityChecks>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Writes the CSV, the JSON document and one two-column file per residual
/// series into `dir` (config paths win when set).
pub fn emit_report(doc: &ReportDocument, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let outs = &doc.config.outputs;
    let csv = outs.csv_path.clone().unwrap_or_else(|| dir.join("sweep.csv"));
    let json = outs.json_path.clone().unwrap_or_else(|| dir.join("report.json"));
    write_csv(&doc.records, std::fs::File::create(&csv)?)?;
    std::fs::write(&json, serde_json::to_string_pretty(doc)?)?;
    let mut plots = Vec::new();
    let series: [(&str, fn(&SweepRecord) -> f64); 2] = [
        ("resid_trace_per_lambda", |r| r.resid_trace_per_lambda),
        ("resid_logdet_per_lambda", |r| r.resid_logdet_per_lambda),
    ];
    for (name, get) in series {
        let path = dir.join(format!("{name}.dat"));
        let body: String = doc
            .records
            .iter()
            .map(|r| format!("{} {}\n", r.lambda, num(get(r))))
            .collect();
        std::fs::write(&path, body)?;
        plots.push(path);
    }
    Ok(ReportFiles { csv, json, plots })
}

/// Sweep, fits and (optionally) identity checks in one document.
pub fn build_report(p: &PreparedExperiment, with_identities: bool) -> Result<ReportDocument> {
    let records = run_sweep(p)?;
    let identities = if with_identities {
        Some(check_identities(p)?)
    } else {
        None
    };
    Ok(ReportDocument {
        config: p.config.clone(),
        coefficients: p.coefficients,
        trace_fit: fit_slope(&records, SlopeField::Trace).ok(),
        logdet_fit: fit_slope(&records, SlopeField::Logdet).ok(),
        records,
        identities,
    })
}
