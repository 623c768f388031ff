//! Config-driven experiments: wire a matrix, a family, and diagnostics
//! into a reproducible report. The exact path is deterministic, so report
//! files are byte-identical across runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    almost_sure_profile, ae_pointwise_check, in_probability_profile, lp_profile, materialize,
    Assessment, ConvergenceProfile, MaterializedSequence, ModeKind, PointwiseReport, Verdict,
};
use crate::dyadic::DyadicRational;
use crate::error::{Error, Result};
use crate::sequences::{self, RateSpec, SequenceFamily, SupportSpec};
use crate::step_rv::{PExponent, StepRandomVariable, DEFAULT_PIECE_CAP};
use crate::summability::{ApplyOptions, RegularityReport, RowSpec, SummabilityMatrix, Tail};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const ENV_OUT_DIR: &str = "RVSUM_OUT_DIR";

const DEFAULT_REGULARITY_DEPTH: usize = 1000;
const DEFAULT_REGULARITY_TOL: f64 = 1e-9;

fn default_piece_cap() -> usize {
    DEFAULT_PIECE_CAP
}

fn default_precision() -> f64 {
    1e-9
}

fn default_from_index() -> usize {
    1
}

fn default_step() -> usize {
    1
}

fn default_regularity_depth() -> usize {
    DEFAULT_REGULARITY_DEPTH
}

fn default_regularity_tol() -> f64 {
    DEFAULT_REGULARITY_TOL
}

/// Matrix description: a builtin name or an explicit dense prefix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Builtin {
        builtin: String,
    },
    Dense {
        dense: Vec<Vec<f64>>,
        #[serde(default)]
        tail: TailSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TailSpec {
    Named(NamedTail),
    L1 { l1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTail {
    Zero,
}

impl Default for TailSpec {
    fn default() -> Self {
        TailSpec::Named(NamedTail::Zero)
    }
}

impl TailSpec {
    fn to_tail(self) -> Tail<f64> {
        match self {
            TailSpec::Named(NamedTail::Zero) => Tail::Zero,
            TailSpec::L1 { l1 } => Tail::L1Bound(l1),
        }
    }
}

impl MatrixSpec {
    pub fn builtin(name: &str) -> Self {
        MatrixSpec::Builtin {
            builtin: name.to_string(),
        }
    }

    pub fn build(&self) -> Result<SummabilityMatrix<f64>> {
        match self {
            MatrixSpec::Builtin { builtin } => match builtin.as_str() {
                "cesaro" => Ok(SummabilityMatrix::cesaro()),
                "identity" => Ok(SummabilityMatrix::identity()),
                "first-column-ones" | "first_column_ones" => {
                    Ok(SummabilityMatrix::first_column_ones())
                }
                other => Err(Error::Config(format!(
                    "unknown builtin matrix {other:?}; known: cesaro, identity, \
                     first-column-ones"
                ))),
            },
            MatrixSpec::Dense { dense, tail } => {
                let rows = dense
                    .iter()
                    .map(|coeffs| RowSpec::new(coeffs.clone(), tail.to_tail()))
                    .collect::<Result<Vec<_>>>()?;
                SummabilityMatrix::dense(rows)
            }
        }
    }
}

/// Family description: a builtin name plus its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<DyadicRational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_target: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportSpec>,
}

impl FamilySpec {
    pub fn named(family: &str) -> Self {
        Self {
            family: family.to_string(),
            epsilon: None,
            decay: None,
            norm_target: None,
            support: None,
        }
    }

    pub fn build(&self) -> Result<SequenceFamily<f64>> {
        match self.family.as_str() {
            "example1" => Ok(sequences::example1()),
            "example2" => {
                let epsilon = self.epsilon.clone().ok_or_else(|| {
                    Error::Config("family example2 needs an \"epsilon\" parameter".into())
                })?;
                sequences::example2(epsilon)
            }
            "synthetic_as" | "synthetic-as" => {
                let decay = self.decay.ok_or_else(|| {
                    Error::Config("family synthetic_as needs a \"decay\" parameter".into())
                })?;
                Ok(sequences::synthetic_as_spec(
                    decay,
                    self.support.unwrap_or(SupportSpec::Full),
                ))
            }
            "synthetic_lp" | "synthetic-lp" => {
                let norm_target = self.norm_target.ok_or_else(|| {
                    Error::Config("family synthetic_lp needs a \"norm_target\" parameter".into())
                })?;
                Ok(sequences::synthetic_lp_spec(norm_target))
            }
            other => Err(Error::Config(format!(
                "unknown family {other:?}; known: {}",
                list_families()
                    .iter()
                    .map(|info| info.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }
}

/// One diagnostic to run, with its mode parameters and verdict parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: ModeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<PExponent<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Verdict bound: statistics must fall below this to count as
    /// converging.
    pub epsilon: f64,
    /// Verdict index: convergence must hold from this index on.
    #[serde(default = "default_from_index")]
    pub from_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<DyadicRational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl ModeSpec {
    pub fn in_probability(lambda: f64, epsilon: f64, from_index: usize) -> Self {
        Self {
            mode: ModeKind::InProbability,
            lambda: Some(lambda),
            p: None,
            window: None,
            epsilon,
            from_index,
            omegas: None,
            horizon: None,
        }
    }

    pub fn almost_sure(lambda: f64, window: usize, epsilon: f64, from_index: usize) -> Self {
        Self {
            mode: ModeKind::AlmostSure,
            lambda: Some(lambda),
            p: None,
            window: Some(window),
            epsilon,
            from_index,
            omegas: None,
            horizon: None,
        }
    }

    pub fn lp(p: PExponent<f64>, epsilon: f64, from_index: usize) -> Self {
        Self {
            mode: ModeKind::Lp,
            lambda: None,
            p: Some(p),
            window: None,
            epsilon,
            from_index,
            omegas: None,
            horizon: None,
        }
    }

    fn label(&self) -> &'static str {
        match self.mode {
            ModeKind::InProbability => "in_probability",
            ModeKind::AlmostSure => "almost_sure",
            ModeKind::Lp => "lp",
            ModeKind::AePointwise => "ae_pointwise",
        }
    }
}

/// Inclusive index range with an optional step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexRange {
    pub start: usize,
    pub end: usize,
    #[serde(default = "default_step")]
    pub step: usize,
}

impl IndexRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self {
            start,
            end,
            step: 1,
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.start < 1 || self.end < self.start || self.step < 1 {
            return Err(Error::Config(format!(
                "invalid index range [{}, {}] step {}",
                self.start, self.end, self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegularitySpec {
    #[serde(default = "default_regularity_depth")]
    pub depth: usize,
    #[serde(default = "default_regularity_tol")]
    pub tol: f64,
}

impl Default for RegularitySpec {
    fn default() -> Self {
        Self {
            depth: DEFAULT_REGULARITY_DEPTH,
            tol: DEFAULT_REGULARITY_TOL,
        }
    }
}

/// Full experiment description; this is the JSON config file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    pub family: FamilySpec,
    pub modes: Vec<ModeSpec>,
    pub indices: IndexRange,
    #[serde(default)]
    pub regularity: RegularitySpec,
    /// Seed for the Monte Carlo path; unused by the exact path but echoed
    /// into the report for reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_piece_cap")]
    pub piece_cap: usize,
    #[serde(default = "default_precision")]
    pub apply_precision: f64,
    /// Also write two-column `profile_<mode>.dat` files for plotting.
    #[serde(default)]
    pub gnuplot: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_value_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(matrix: MatrixSpec, family: FamilySpec, indices: IndexRange) -> Self {
        Self {
            matrix,
            family,
            modes: Vec::new(),
            indices,
            regularity: RegularitySpec::default(),
            seed: None,
            piece_cap: DEFAULT_PIECE_CAP,
            apply_precision: 1e-9,
            gnuplot: false,
            tail_value_bound: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        self.indices.validate()?;
        if self.piece_cap < 1 {
            return Err(Error::Config("piece_cap must be positive".into()));
        }
        if self.apply_precision.is_nan() || self.apply_precision <= 0.0 {
            return Err(Error::Config("apply_precision must be positive".into()));
        }
        for spec in &self.modes {
            match spec.mode {
                ModeKind::InProbability | ModeKind::AlmostSure => {
                    if spec.lambda.is_none() {
                        return Err(Error::Config(format!(
                            "mode {} needs a \"lambda\" parameter",
                            spec.label()
                        )));
                    }
                    if spec.mode == ModeKind::AlmostSure && spec.window.is_none() {
                        return Err(Error::Config(
                            "mode almost_sure needs a \"window\" parameter".into(),
                        ));
                    }
                }
                ModeKind::Lp => {
                    if spec.p.is_none() {
                        return Err(Error::Config("mode lp needs a \"p\" parameter".into()));
                    }
                }
                ModeKind::AePointwise => {
                    if spec.omegas.as_ref().is_none_or(|o| o.is_empty()) {
                        return Err(Error::Config(
                            "mode ae_pointwise needs a non-empty \"omegas\" list".into(),
                        ));
                    }
                }
            }
            Assessment::new(spec.epsilon, spec.from_index)?;
        }
        Ok(())
    }

    /// Largest sequence index any configured diagnostic touches.
    fn needed_terms(&self) -> usize {
        let mut needed = self.indices.end;
        for spec in &self.modes {
            match spec.mode {
                ModeKind::AlmostSure => {
                    needed = needed.max(self.indices.end + spec.window.unwrap_or(0));
                }
                ModeKind::AePointwise => {
                    needed = needed.max(spec.horizon.unwrap_or(self.indices.end));
                }
                _ => {}
            }
        }
        needed
    }
}

/// Preservation outcome for one mode: did the matrix map a convergent
/// input to a convergent output?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preservation {
    /// Input converges and the transformed sequence converges.
    Preserved,
    /// Input converges but the transformed sequence diverges.
    Counterexample,
    InputDiverges,
    InputInconclusive,
    Inconclusive,
}

fn preservation(input: &Verdict<f64>, transformed: &Verdict<f64>) -> Preservation {
    match (input, transformed) {
        (Verdict::ConvergesBelow { .. }, Verdict::ConvergesBelow { .. }) => {
            Preservation::Preserved
        }
        (Verdict::ConvergesBelow { .. }, Verdict::Diverges { .. }) => {
            Preservation::Counterexample
        }
        (Verdict::ConvergesBelow { .. }, Verdict::Inconclusive) => Preservation::Inconclusive,
        (Verdict::Diverges { .. }, _) => Preservation::InputDiverges,
        (Verdict::Inconclusive, _) => Preservation::InputInconclusive,
    }
}

/// Either a per-index profile or a per-omega pointwise report.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum ProfileOutcome {
    Profile(ConvergenceProfile<f64>),
    Pointwise(Vec<PointwiseReport<f64>>),
}

impl ProfileOutcome {
    fn verdict(&self) -> Verdict<f64> {
        match self {
            ProfileOutcome::Profile(profile) => profile.verdict,
            ProfileOutcome::Pointwise(reports) => {
                if reports.iter().all(|r| r.verdict.converges()) {
                    reports[0].verdict
                } else if let Some(diverging) =
                    reports.iter().find(|r| r.verdict.diverges())
                {
                    diverging.verdict
                } else {
                    Verdict::Inconclusive
                }
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ModeReport {
    pub label: String,
    pub spec: ModeSpec,
    /// True iff every materialized input term is finite a.e.
    pub input_finite_ae: bool,
    pub limit_finite_ae: bool,
    pub input: ProfileOutcome,
    pub transformed: ProfileOutcome,
    pub preservation: Preservation,
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub matrix: String,
    pub family: String,
    pub regularity: RegularityReport<f64>,
    pub modes: Vec<ModeReport>,
}

/// Runs the full experiment described by `config`. Deterministic on the
/// exact path: re-running produces bit-identical reports.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let matrix = config.matrix.build()?;
    let family = config.family.build()?;
    let indices = config.indices.indices();
    let needed = config.needed_terms();

    let input = materialize(&family, needed)?;
    let apply_opts = ApplyOptions {
        precision: config.apply_precision,
        tail_value_bound: config.tail_value_bound,
        piece_cap: config.piece_cap,
    };
    let transformed_terms: Vec<StepRandomVariable<f64>> = (1..=needed)
        .map(|i| matrix.apply_row(i, input.terms(), &apply_opts))
        .collect::<Result<_>>()?;
    let transformed = MaterializedSequence::new(transformed_terms);

    let regularity = matrix.check_regularity(config.regularity.depth, config.regularity.tol);

    let input_finite_ae = input.terms().iter().all(StepRandomVariable::finite_ae);
    let limit_finite_ae = family.limit().finite_ae();

    let mut modes = Vec::with_capacity(config.modes.len());
    let mut used_labels: Vec<String> = Vec::new();
    for spec in &config.modes {
        let assessment = Assessment::new(spec.epsilon, spec.from_index)?;
        let (input_outcome, transformed_outcome) =
            run_mode(spec, &input, &transformed, &family, &indices, config, &assessment)?;
        let preservation =
            preservation(&input_outcome.verdict(), &transformed_outcome.verdict());
        let mut label = spec.label().to_string();
        let repeats = used_labels.iter().filter(|l| **l == label).count();
        used_labels.push(label.clone());
        if repeats > 0 {
            label = format!("{label}_{}", repeats + 1);
        }
        modes.push(ModeReport {
            label,
            spec: spec.clone(),
            input_finite_ae,
            limit_finite_ae,
            input: input_outcome,
            transformed: transformed_outcome,
            preservation,
        });
    }

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        matrix: matrix.name().to_string(),
        family: family.name().to_string(),
        regularity,
        modes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_mode(
    spec: &ModeSpec,
    input: &MaterializedSequence<f64>,
    transformed: &MaterializedSequence<f64>,
    family: &SequenceFamily<f64>,
    indices: &[usize],
    config: &ExperimentConfig,
    assessment: &Assessment<f64>,
) -> Result<(ProfileOutcome, ProfileOutcome)> {
    let limit = family.limit();
    let cap = config.piece_cap;
    match spec.mode {
        ModeKind::InProbability => {
            let lambda = spec.lambda.expect("validated");
            Ok((
                ProfileOutcome::Profile(in_probability_profile(
                    input, limit, lambda, indices, cap, assessment,
                )?),
                ProfileOutcome::Profile(in_probability_profile(
                    transformed,
                    limit,
                    lambda,
                    indices,
                    cap,
                    assessment,
                )?),
            ))
        }
        ModeKind::AlmostSure => {
            let lambda = spec.lambda.expect("validated");
            let window = spec.window.expect("validated");
            Ok((
                ProfileOutcome::Profile(almost_sure_profile(
                    input, limit, lambda, window, indices, cap, assessment,
                )?),
                ProfileOutcome::Profile(almost_sure_profile(
                    transformed,
                    limit,
                    lambda,
                    window,
                    indices,
                    cap,
                    assessment,
                )?),
            ))
        }
        ModeKind::Lp => {
            let p = spec.p.expect("validated");
            Ok((
                ProfileOutcome::Profile(lp_profile(input, limit, p, indices, cap, assessment)?),
                ProfileOutcome::Profile(lp_profile(
                    transformed,
                    limit,
                    p,
                    indices,
                    cap,
                    assessment,
                )?),
            ))
        }
        ModeKind::AePointwise => {
            let omegas = spec.omegas.as_ref().expect("validated");
            let horizon = spec.horizon.unwrap_or(config.indices.end);
            let checked: Vec<usize> = indices.iter().copied().filter(|&n| n <= horizon).collect();
            if checked.is_empty() {
                return Err(Error::Config(
                    "no profile index lies at or below the pointwise horizon".into(),
                ));
            }
            Ok((
                ProfileOutcome::Pointwise(ae_pointwise_check(
                    input,
                    Some(limit),
                    omegas,
                    horizon,
                    &checked,
                    assessment,
                )?),
                ProfileOutcome::Pointwise(ae_pointwise_check(
                    transformed,
                    Some(limit),
                    omegas,
                    horizon,
                    &checked,
                    assessment,
                )?),
            ))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// CSV rendering of a profile: `(n, statistic, certified)` rows, or
/// `(omega, n, deviation)` rows for pointwise reports.
pub fn profile_csv(outcome: &ProfileOutcome) -> String {
    match outcome {
        ProfileOutcome::Profile(profile) => {
            let mut out = String::from("n,statistic,certified\n");
            for (n, stat) in profile.indices.iter().zip(&profile.statistics) {
                out.push_str(&format!("{n},{stat},{}\n", profile.certified));
            }
            out
        }
        ProfileOutcome::Pointwise(reports) => {
            let mut out = String::from("omega,n,deviation\n");
            for report in reports {
                for (n, deviation) in report.indices.iter().zip(&report.deviations) {
                    out.push_str(&format!("{},{n},{deviation}\n", report.omega));
                }
            }
            out
        }
    }
}

/// Writes `report.json` plus one `profile_<mode>.csv` per mode (the
/// transformed profile; the input profile goes to
/// `profile_<mode>_input.csv`). Returns the paths written.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut written = Vec::new();

    let mut json = serde_json::to_vec_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    json.push(b'\n');
    let report_path = dir.join("report.json");
    write_file(&report_path, &json)?;
    written.push(report_path);

    for mode in &report.modes {
        let transformed_path = dir.join(format!("profile_{}.csv", mode.label));
        write_file(&transformed_path, profile_csv(&mode.transformed).as_bytes())?;
        written.push(transformed_path);

        let input_path = dir.join(format!("profile_{}_input.csv", mode.label));
        write_file(&input_path, profile_csv(&mode.input).as_bytes())?;
        written.push(input_path);

        if report.config.gnuplot {
            if let ProfileOutcome::Profile(profile) = &mode.transformed {
                let mut data = String::new();
                for (n, stat) in profile.indices.iter().zip(&profile.statistics) {
                    data.push_str(&format!("{n} {}\n", stat.to_f64()));
                }
                let dat_path = dir.join(format!("profile_{}.dat", mode.label));
                write_file(&dat_path, data.as_bytes())?;
                written.push(dat_path);
            }
        }
    }
    Ok(written)
}

/// Builtin family catalog for `list-families`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub parameters: &'static str,
    pub declared_modes: &'static str,
}

pub fn list_families() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo {
            name: "example1",
            parameters: "none (indices guarded to [1, 511])",
            declared_modes: "in-probability",
        },
        FamilyInfo {
            name: "example2",
            parameters: "epsilon: dyadic in (0, 1), e.g. \"1/4\"",
            declared_modes: "ae-pointwise, almost-sure, in-probability, lp",
        },
        FamilyInfo {
            name: "synthetic_as",
            parameters: "decay: \"1/n\" | \"1/n^2\" | \"zero\"; support: \"full\" | \"shrinking\"",
            declared_modes: "almost-sure, in-probability",
        },
        FamilyInfo {
            name: "synthetic_lp",
            parameters: "norm_target: \"1/n\" | \"1/n^2\" | \"zero\"",
            declared_modes: "lp",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Statistic;

    fn in_probability_config(matrix: &str, end: usize) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(
            MatrixSpec::builtin(matrix),
            FamilySpec::named("example1"),
            IndexRange::new(16, end),
        );
        config.modes = vec![ModeSpec::in_probability(1.0, 0.5, 16)];
        config.regularity = RegularitySpec {
            depth: 100,
            tol: 1e-9,
        };
        config
    }

    #[test]
    fn averaging_the_block_family_is_a_counterexample() {
        let report = run(&in_probability_config("cesaro", 64)).unwrap();
        let mode = &report.modes[0];
        assert_eq!(mode.preservation, Preservation::Counterexample);
        match (&mode.input, &mode.transformed) {
            (ProfileOutcome::Profile(input), ProfileOutcome::Profile(transformed)) => {
                assert!(input.verdict.converges());
                assert!(transformed.verdict.diverges());
                assert!(transformed
                    .statistics
                    .iter()
                    .all(|s| s.to_f64() == 1.0));
            }
            _ => panic!("expected profiles"),
        }
    }

    #[test]
    fn identity_preserves_every_profile() {
        let report = run(&in_probability_config("identity", 64)).unwrap();
        let mode = &report.modes[0];
        assert_eq!(mode.preservation, Preservation::Preserved);
        match (&mode.input, &mode.transformed) {
            (ProfileOutcome::Profile(input), ProfileOutcome::Profile(transformed)) => {
                assert_eq!(input.statistics, transformed.statistics);
            }
            _ => panic!("expected profiles"),
        }
    }

    #[test]
    fn averaging_preserves_synthetic_almost_sure_decay() {
        let mut config = ExperimentConfig::new(
            MatrixSpec::builtin("cesaro"),
            FamilySpec {
                decay: Some(RateSpec::InverseN),
                ..FamilySpec::named("synthetic_as")
            },
            IndexRange::new(1, 64),
        );
        config.modes = vec![ModeSpec::almost_sure(0.1, 64, 0.5, 1)];
        let report = run(&config).unwrap();
        assert_eq!(report.modes[0].preservation, Preservation::Preserved);
    }

    #[test]
    fn infinite_first_term_blocks_preservation() {
        let mut config = ExperimentConfig::new(
            MatrixSpec::builtin("cesaro"),
            FamilySpec {
                epsilon: Some("1/4".parse().unwrap()),
                ..FamilySpec::named("example2")
            },
            IndexRange::new(1, 32),
        );
        config.modes = vec![ModeSpec::in_probability(1.0, 0.1, 2)];
        let report = run(&config).unwrap();
        let mode = &report.modes[0];
        assert!(!mode.input_finite_ae);
        assert!(mode.limit_finite_ae);
        assert_eq!(mode.preservation, Preservation::Counterexample);
        match &mode.transformed {
            ProfileOutcome::Profile(profile) => {
                for stat in &profile.statistics {
                    assert_eq!(
                        stat,
                        &Statistic::Probability(num_rational::BigRational::new(
                            1.into(),
                            4.into()
                        ))
                    );
                }
            }
            _ => panic!("expected a profile"),
        }
    }

    #[test]
    fn config_errors_are_reported_as_config_errors() {
        let mut config = in_probability_config("cesaro", 64);
        config.modes[0].lambda = None;
        assert!(matches!(run(&config), Err(Error::Config(_))));

        let unknown = ExperimentConfig::new(
            MatrixSpec::builtin("cesaro"),
            FamilySpec::named("no-such-family"),
            IndexRange::new(1, 4),
        );
        assert!(matches!(run(&unknown), Err(Error::Config(_))));

        let bad_matrix = ExperimentConfig::new(
            MatrixSpec::builtin("no-such-matrix"),
            FamilySpec::named("example1"),
            IndexRange::new(1, 4),
        );
        assert!(matches!(run(&bad_matrix), Err(Error::Config(_))));
    }

    #[test]
    fn guard_violations_surface_from_the_family() {
        let config = in_probability_config("cesaro", 600);
        assert!(matches!(run(&config), Err(Error::GuardRange { .. })));
    }

    #[test]
    fn config_json_round_trips() {
        let text = r#"{
            "matrix": {"builtin": "cesaro"},
            "family": {"family": "example2", "epsilon": "1/4"},
            "modes": [
                {"mode": "in-probability", "lambda": 1.0, "epsilon": 0.1, "from_index": 2},
                {"mode": "lp", "p": "inf", "epsilon": 0.1}
            ],
            "indices": {"start": 1, "end": 32}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.piece_cap, DEFAULT_PIECE_CAP);
        assert_eq!(config.modes.len(), 2);
        let round = serde_json::to_string(&config).unwrap();
        let back = ExperimentConfig::from_json(&round).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), round);
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let config = in_probability_config("cesaro", 48);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let paths_a = write_report(&run(&config).unwrap(), dir_a.path()).unwrap();
        let paths_b = write_report(&run(&config).unwrap(), dir_b.path()).unwrap();
        assert_eq!(paths_a.len(), paths_b.len());
        for (a, b) in paths_a.iter().zip(&paths_b) {
            assert_eq!(
                std::fs::read(a).unwrap(),
                std::fs::read(b).unwrap(),
                "{} vs {}",
                a.display(),
                b.display()
            );
        }
    }

    #[test]
    fn dense_matrix_specs_build_and_apply() {
        let text = r#"{
            "matrix": {"dense": [[1.0], [0.5, 0.5]], "tail": "zero"},
            "family": {"family": "synthetic_lp", "norm_target": "1/n"},
            "modes": [{"mode": "lp", "p": 1, "epsilon": 0.9}],
            "indices": {"start": 1, "end": 2}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        let report = run(&config).unwrap();
        match &report.modes[0].transformed {
            ProfileOutcome::Profile(profile) => {
                assert_eq!(profile.statistics[0], Statistic::Norm(1.0));
                assert_eq!(profile.statistics[1], Statistic::Norm(0.75));
            }
            _ => panic!("expected a profile"),
        }
    }
}
