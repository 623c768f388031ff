use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicRational;
use crate::error::{Error, Result};
use crate::extended_real::ExtendedReal;
use crate::scalar::{compensated_sum, Scalar};
use crate::step_rv::{
    linear_combination, sup_family, EventPredicate, PExponent, StepRandomVariable,
};

/// Default sample count for the Monte Carlo path.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// The four convergence modes the diagnostics can measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    AePointwise,
    AlmostSure,
    InProbability,
    Lp,
}

/// A sequence of step random variables indexed from 1.
pub trait Sequence<S: Scalar> {
    fn term(&self, n: usize) -> Result<StepRandomVariable<S>>;
}

/// Terms 1..=len held in memory; profiles over many indices should
/// materialize once instead of regenerating terms per index.
#[derive(Debug, Clone)]
pub struct MaterializedSequence<S> {
    terms: Vec<StepRandomVariable<S>>,
}

impl<S: Scalar> MaterializedSequence<S> {
    pub fn new(terms: Vec<StepRandomVariable<S>>) -> Self {
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in index order; `terms()[n - 1]` is term `n`.
    pub fn terms(&self) -> &[StepRandomVariable<S>] {
        &self.terms
    }
}

impl<S: Scalar> Sequence<S> for MaterializedSequence<S> {
    fn term(&self, n: usize) -> Result<StepRandomVariable<S>> {
        if n < 1 || n > self.terms.len() {
            return Err(Error::GuardRange {
                n,
                min: 1,
                max: self.terms.len(),
            });
        }
        Ok(self.terms[n - 1].clone())
    }
}

pub fn materialize<S: Scalar>(
    x: &dyn Sequence<S>,
    last: usize,
) -> Result<MaterializedSequence<S>> {
    let terms = (1..=last).map(|n| x.term(n)).collect::<Result<_>>()?;
    Ok(MaterializedSequence::new(terms))
}

/// One per-index measurement: an exact tail probability or an `L_p` norm.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic<S> {
    Probability(BigRational),
    Norm(S),
}

impl<S: Scalar> Statistic<S> {
    /// Strict comparison against a scalar threshold; exact on the
    /// probability side (the threshold is converted to a rational).
    pub fn below(&self, threshold: S) -> bool {
        match self {
            Statistic::Probability(r) => {
                r < &BigRational::from_float(threshold.as_f64())
                    .expect("thresholds are finite")
            }
            Statistic::Norm(v) => *v < threshold,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Statistic::Probability(r) => r.to_f64().unwrap_or(f64::NAN),
            Statistic::Norm(v) => v.as_f64(),
        }
    }
}

impl<S: Scalar> std::fmt::Display for Statistic<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Probability(r) => write!(f, "{r}"),
            Statistic::Norm(v) => write!(f, "{v}"),
        }
    }
}

impl<S: Scalar> Serialize for Statistic<S> {
    fn serialize<Ser: serde::Serializer>(
        &self,
        serializer: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        match self {
            Statistic::Probability(_) => serializer.collect_str(self),
            Statistic::Norm(v) => serializer.serialize_f64(v.as_f64()),
        }
    }
}

/// Outcome of assessing a profile against `(epsilon, from_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict<S> {
    /// Every statistic from `from_index` on is strictly below `epsilon`;
    /// `from_index` is the smallest checked index with that property. The
    /// qualifying tail must span at least the top quartile of checked
    /// indices, so a single final dip cannot certify convergence.
    ConvergesBelow { epsilon: S, from_index: usize },
    /// The statistic stayed at or above `epsilon` across the entire top
    /// quartile of checked indices. Finite data cannot prove divergence;
    /// this records a persistent floor.
    Diverges { floor: S, from_index: usize },
    Inconclusive,
}

impl<S> Verdict<S> {
    pub fn converges(&self) -> bool {
        matches!(self, Verdict::ConvergesBelow { .. })
    }

    pub fn diverges(&self) -> bool {
        matches!(self, Verdict::Diverges { .. })
    }
}

/// Verdict parameters: the `epsilon` bound and the first index `N` from
/// which it must hold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Assessment<S> {
    pub epsilon: S,
    pub from_index: usize,
}

impl<S: Scalar> Assessment<S> {
    pub fn new(epsilon: S, from_index: usize) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= S::zero() {
            return Err(Error::Config(format!(
                "verdict epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            from_index: from_index.max(1),
        })
    }
}

/// Mode and parameters a profile was computed for.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Mode<S: Scalar> {
    InProbability { lambda: S },
    AlmostSure { lambda: S, window: usize },
    Lp { p: PExponent<S> },
    AePointwise { horizon: usize },
}

/// Per-index statistics for one convergence mode plus the rendered verdict.
///
/// `certified` distinguishes the exact step-function path from Monte Carlo
/// estimates. Almost-sure statistics are certified lower bounds of the true
/// sup-tail probability: truncating the supremum to a window can only
/// shrink the event.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ConvergenceProfile<S: Scalar> {
    pub mode: Mode<S>,
    pub indices: Vec<usize>,
    pub statistics: Vec<Statistic<S>>,
    pub certified: bool,
    /// True when every checked term and the limit are finite a.e., the
    /// hypothesis the preservation statements require.
    pub finite_ae_hypothesis: bool,
    pub verdict: Verdict<S>,
}

/// Verdict for a finished profile under different `(epsilon, N)` parameters.
pub fn assess<S: Scalar>(
    profile: &ConvergenceProfile<S>,
    assessment: &Assessment<S>,
) -> Verdict<S> {
    let below: Vec<bool> = profile
        .statistics
        .iter()
        .map(|s| s.below(assessment.epsilon))
        .collect();
    let floors: Vec<f64> = profile.statistics.iter().map(Statistic::to_f64).collect();
    verdict_core(&profile.indices, &below, &floors, assessment)
}

fn verdict_core<S: Scalar>(
    indices: &[usize],
    below: &[bool],
    floors: &[f64],
    assessment: &Assessment<S>,
) -> Verdict<S> {
    if indices.is_empty() {
        return Verdict::Inconclusive;
    }
    let quartile = (indices.len() / 4).max(1);
    // Smallest checked index >= from_index whose entire tail stays below;
    // the tail must cover at least the top quartile to count as evidence.
    let mut tail_ok = vec![false; below.len()];
    let mut ok = true;
    for k in (0..below.len()).rev() {
        ok = ok && below[k];
        tail_ok[k] = ok;
    }
    let coverage_cutoff = indices.len() - quartile;
    for k in 0..=coverage_cutoff {
        if indices[k] >= assessment.from_index && tail_ok[k] {
            return Verdict::ConvergesBelow {
                epsilon: assessment.epsilon,
                from_index: indices[k],
            };
        }
    }
    // Persistent floor across the top quartile of checked indices.
    let start = indices.len() - quartile;
    if below[start..].iter().all(|b| !b) {
        let floor = floors[start..].iter().copied().fold(f64::INFINITY, f64::min);
        return Verdict::Diverges {
            floor: S::of(floor),
            from_index: indices[start],
        };
    }
    Verdict::Inconclusive
}

fn hypothesis<S: Scalar>(
    limit: &StepRandomVariable<S>,
    terms: impl IntoIterator<Item = bool>,
) -> bool {
    limit.finite_ae() && terms.into_iter().all(|ok| ok)
}

/// Exact tail probabilities `P(|X_n - limit| > lambda)` at each index.
pub fn in_probability_profile<S: Scalar>(
    x: &dyn Sequence<S>,
    limit: &StepRandomVariable<S>,
    lambda: S,
    indices: &[usize],
    cap: usize,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    require_positive_lambda(lambda)?;
    let one = S::one();
    let mut statistics = Vec::with_capacity(indices.len());
    let mut all_finite = true;
    for &n in indices {
        let term = x.term(n)?;
        all_finite &= term.finite_ae();
        let diff = linear_combination(&[one, -one], &[&term, limit], cap)?;
        let event = EventPredicate::AbsGreaterThan(ExtendedReal::from_real(lambda));
        statistics.push(Statistic::Probability(diff.prob(&event)));
    }
    Ok(finish_profile(
        Mode::InProbability { lambda },
        indices,
        statistics,
        hypothesis(limit, [all_finite]),
        assessment,
    ))
}

/// Exact windowed sup-tail probabilities
/// `P(sup_{n <= m <= n + window} |X_m - limit| > lambda)`.
///
/// The statistic is a certified lower bound of the infinite-sup probability:
/// growing the window can only grow the event.
pub fn almost_sure_profile<S: Scalar>(
    x: &dyn Sequence<S>,
    limit: &StepRandomVariable<S>,
    lambda: S,
    window: usize,
    indices: &[usize],
    cap: usize,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    require_positive_lambda(lambda)?;
    if window < 1 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let mut statistics = Vec::with_capacity(indices.len());
    let mut all_finite = true;
    for &n in indices {
        let family: Vec<StepRandomVariable<S>> =
            (n..=n + window).map(|m| x.term(m)).collect::<Result<_>>()?;
        all_finite &= family.iter().all(StepRandomVariable::finite_ae);
        let refs: Vec<&StepRandomVariable<S>> = family.iter().collect();
        let sup = sup_family(&refs, limit, cap)?;
        let event = EventPredicate::GreaterThan(ExtendedReal::from_real(lambda));
        statistics.push(Statistic::Probability(sup.prob(&event)));
    }
    Ok(finish_profile(
        Mode::AlmostSure { lambda, window },
        indices,
        statistics,
        hypothesis(limit, [all_finite]),
        assessment,
    ))
}

/// Doubling-window sweep `(w, 2w, 4w)`; stabilization across the sweep is
/// the practical signal that the window truncation has converged.
pub fn almost_sure_window_sweep<S: Scalar>(
    x: &dyn Sequence<S>,
    limit: &StepRandomVariable<S>,
    lambda: S,
    window: usize,
    indices: &[usize],
    cap: usize,
    assessment: &Assessment<S>,
) -> Result<Vec<ConvergenceProfile<S>>> {
    [window, window * 2, window * 4]
        .into_iter()
        .map(|w| almost_sure_profile(x, limit, lambda, w, indices, cap, assessment))
        .collect()
}

/// Restricted `L_p` distances `||X_n - limit||_p` at each index.
///
/// The preservation statements assume every term is finite a.e.; when that
/// fails the profile is still computed (on the finite parts) but carries
/// `finite_ae_hypothesis = false`.
pub fn lp_profile<S: Scalar>(
    x: &dyn Sequence<S>,
    limit: &StepRandomVariable<S>,
    p: PExponent<S>,
    indices: &[usize],
    cap: usize,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    let one = S::one();
    let mut statistics = Vec::with_capacity(indices.len());
    let mut all_finite = true;
    for &n in indices {
        let term = x.term(n)?;
        all_finite &= term.finite_ae();
        let diff = linear_combination(&[one, -one], &[&term, limit], cap)?;
        statistics.push(Statistic::Norm(diff.expectation_p(&p).value));
    }
    Ok(finish_profile(
        Mode::Lp { p },
        indices,
        statistics,
        hypothesis(limit, [all_finite]),
        assessment,
    ))
}

fn finish_profile<S: Scalar>(
    mode: Mode<S>,
    indices: &[usize],
    statistics: Vec<Statistic<S>>,
    finite_ae_hypothesis: bool,
    assessment: &Assessment<S>,
) -> ConvergenceProfile<S> {
    let mut profile = ConvergenceProfile {
        mode,
        indices: indices.to_vec(),
        statistics,
        certified: true,
        finite_ae_hypothesis,
        verdict: Verdict::Inconclusive,
    };
    profile.verdict = assess(&profile, assessment);
    profile
}

/// Pointwise diagnostic at one sample point.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct PointwiseReport<S: Scalar> {
    pub omega: DyadicRational,
    pub indices: Vec<usize>,
    /// At each index `n`: `sup_{n <= m <= horizon} |X_m(omega) - r|` where
    /// `r` is the target value when one was supplied, else the value at the
    /// horizon. Without a target only Cauchy-style existence is measured;
    /// no limit value is claimed.
    pub deviations: Vec<ExtendedReal<S>>,
    pub against_target: bool,
    pub verdict: Verdict<S>,
}

/// Evaluates the sequence along each sample point and measures tail
/// deviations up to `horizon`.
pub fn ae_pointwise_check<S: Scalar>(
    x: &dyn Sequence<S>,
    target: Option<&StepRandomVariable<S>>,
    omegas: &[DyadicRational],
    horizon: usize,
    indices: &[usize],
    assessment: &Assessment<S>,
) -> Result<Vec<PointwiseReport<S>>> {
    if horizon < 1 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&n| n < 1 || n > horizon) {
        return Err(Error::Config(format!(
            "pointwise index {bad} is outside [1, horizon = {horizon}]"
        )));
    }
    let mut reports = Vec::with_capacity(omegas.len());
    for omega in omegas {
        let values: Vec<ExtendedReal<S>> = (1..=horizon)
            .map(|m| x.term(m)?.evaluate(omega))
            .collect::<Result<_>>()?;
        let reference = match target {
            Some(t) => t.evaluate(omega)?,
            None => values[horizon - 1],
        };
        // Suffix sweep: deviation at n is the max over m in [n, horizon].
        let mut suffix = vec![ExtendedReal::zero(); horizon];
        let mut running = ExtendedReal::zero();
        for m in (0..horizon).rev() {
            running = running.max((values[m] - reference).abs());
            suffix[m] = running;
        }
        let deviations: Vec<ExtendedReal<S>> =
            indices.iter().map(|&n| suffix[n - 1]).collect();
        let epsilon_value = ExtendedReal::from_real(assessment.epsilon);
        let below: Vec<bool> = deviations.iter().map(|d| *d < epsilon_value).collect();
        let floors: Vec<f64> = deviations
            .iter()
            .map(|d| {
                if d.is_infinite() {
                    f64::INFINITY
                } else {
                    d.finite_part().as_f64()
                }
            })
            .collect();
        let verdict = verdict_core(indices, &below, &floors, assessment);
        reports.push(PointwiseReport {
            omega: omega.clone(),
            indices: indices.to_vec(),
            deviations,
            against_target: target.is_some(),
            verdict,
        });
    }
    Ok(reports)
}

fn require_positive_lambda<S: Scalar>(lambda: S) -> Result<()> {
    if !lambda.is_finite() || lambda <= S::zero() {
        return Err(Error::Config(format!(
            "lambda must be a positive real, got {lambda}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Monte Carlo path: black-box samplers, clearly labeled approximate.
// ---------------------------------------------------------------------------

/// Options for the Monte Carlo estimators. The seed is mandatory so runs
/// are reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

impl McOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            samples: DEFAULT_MC_SAMPLES,
            seed,
        }
    }
}

/// A sequence given only through point evaluation at sampled `omega`.
pub struct BlackBoxSequence<'a, S> {
    pub term: Box<dyn Fn(usize, f64) -> ExtendedReal<S> + 'a>,
    pub limit: Box<dyn Fn(f64) -> ExtendedReal<S> + 'a>,
}

/// Adapts exact step-function data to the black-box interface, for
/// cross-checking the Monte Carlo estimators against the exact path.
pub fn black_box_from_steps<'a, S: Scalar>(
    x: &'a MaterializedSequence<S>,
    limit: &'a StepRandomVariable<S>,
) -> BlackBoxSequence<'a, S> {
    BlackBoxSequence {
        term: Box::new(|n, omega| {
            x.terms[n - 1]
                .value_at_f64(omega)
                .expect("sampled omega lies in [0, 1)")
        }),
        limit: Box::new(|omega| {
            limit
                .value_at_f64(omega)
                .expect("sampled omega lies in [0, 1)")
        }),
    }
}

fn sample_points(mc: &McOptions) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(mc.seed);
    (0..mc.samples).map(|_| rng.random::<f64>()).collect()
}

fn mc_probability<S: Scalar>(hits: usize, samples: usize) -> Statistic<S> {
    Statistic::Probability(BigRational::new(BigInt::from(hits), BigInt::from(samples)))
}

/// Monte Carlo estimate of the in-probability profile; `certified = false`.
pub fn mc_in_probability_profile<S: Scalar>(
    x: &BlackBoxSequence<'_, S>,
    lambda: S,
    indices: &[usize],
    mc: &McOptions,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    require_positive_lambda(lambda)?;
    require_samples(mc)?;
    let points = sample_points(mc);
    let threshold = ExtendedReal::from_real(lambda);
    let statistics = indices
        .iter()
        .map(|&n| {
            let hits = points
                .iter()
                .filter(|&&omega| ((x.term)(n, omega) - (x.limit)(omega)).abs() > threshold)
                .count();
            mc_probability(hits, mc.samples)
        })
        .collect();
    Ok(finish_mc_profile(
        Mode::InProbability { lambda },
        indices,
        statistics,
        assessment,
    ))
}

/// Monte Carlo estimate of the windowed sup-tail profile.
pub fn mc_almost_sure_profile<S: Scalar>(
    x: &BlackBoxSequence<'_, S>,
    lambda: S,
    window: usize,
    indices: &[usize],
    mc: &McOptions,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    require_positive_lambda(lambda)?;
    require_samples(mc)?;
    if window < 1 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let points = sample_points(mc);
    let threshold = ExtendedReal::from_real(lambda);
    let statistics = indices
        .iter()
        .map(|&n| {
            let hits = points
                .iter()
                .filter(|&&omega| {
                    let limit_value = (x.limit)(omega);
                    (n..=n + window)
                        .any(|m| ((x.term)(m, omega) - limit_value).abs() > threshold)
                })
                .count();
            mc_probability(hits, mc.samples)
        })
        .collect();
    Ok(finish_mc_profile(
        Mode::AlmostSure { lambda, window },
        indices,
        statistics,
        assessment,
    ))
}

/// Monte Carlo estimate of the `L_p` profile. For `p = inf` this reports
/// the maximum sampled deviation, an approximation of the essential sup.
pub fn mc_lp_profile<S: Scalar>(
    x: &BlackBoxSequence<'_, S>,
    p: PExponent<S>,
    indices: &[usize],
    mc: &McOptions,
    assessment: &Assessment<S>,
) -> Result<ConvergenceProfile<S>> {
    require_samples(mc)?;
    let points = sample_points(mc);
    let statistics = indices
        .iter()
        .map(|&n| {
            let deviations: Vec<S> = points
                .iter()
                .map(|&omega| {
                    let diff = (x.term)(n, omega) - (x.limit)(omega);
                    if diff.is_infinite() {
                        S::infinity()
                    } else {
                        diff.finite_part().abs()
                    }
                })
                .collect();
            let value = if deviations.iter().any(|d| !d.is_finite()) {
                S::infinity()
            } else {
                match p {
                    PExponent::Finite(p) => {
                        let mean = compensated_sum(deviations.iter().map(|d| d.powf(p)))
                            / S::of_usize(mc.samples);
                        mean.powf(S::one() / p)
                    }
                    PExponent::Infinity => deviations.iter().copied().fold(S::zero(), S::max),
                }
            };
            Statistic::Norm(value)
        })
        .collect();
    Ok(finish_mc_profile(Mode::Lp { p }, indices, statistics, assessment))
}

fn finish_mc_profile<S: Scalar>(
    mode: Mode<S>,
    indices: &[usize],
    statistics: Vec<Statistic<S>>,
    assessment: &Assessment<S>,
) -> ConvergenceProfile<S> {
    let mut profile = ConvergenceProfile {
        mode,
        indices: indices.to_vec(),
        statistics,
        certified: false,
        finite_ae_hypothesis: true,
        verdict: Verdict::Inconclusive,
    };
    profile.verdict = assess(&profile, assessment);
    profile
}

fn require_samples(mc: &McOptions) -> Result<()> {
    if mc.samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    Ok(())
}

/// Half-width of the Wilson score interval for a Bernoulli proportion.
pub fn wilson_half_width(p_hat: f64, samples: usize, z: f64) -> f64 {
    let n = samples as f64;
    (z / (1.0 + z * z / n)) * (p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences;
    use crate::step_rv::DEFAULT_PIECE_CAP;

    type Rv = StepRandomVariable<f64>;
    type Ext = ExtendedReal<f64>;

    fn assessment(epsilon: f64, from: usize) -> Assessment<f64> {
        Assessment::new(epsilon, from).unwrap()
    }

    fn constant_family(c: f64) -> MaterializedSequence<f64> {
        MaterializedSequence::new(vec![Rv::constant(Ext::from_real(c)); 64])
    }

    /// Tail probability halves at each power of two: term n carries the
    /// value 2 on [0, 1/2^floor(log2 n)).
    fn halving_family(last: usize) -> MaterializedSequence<f64> {
        let terms = (1..=last)
            .map(|n| {
                let m = (usize::BITS - 1 - n.leading_zeros()).min(30);
                let hi = DyadicRational::new(1u64, m).unwrap();
                if hi.is_one() {
                    Rv::constant(Ext::from_real(2.0))
                } else {
                    Rv::indicator(DyadicRational::zero(), hi, Ext::from_real(2.0)).unwrap()
                }
            })
            .collect();
        MaterializedSequence::new(terms)
    }

    #[test]
    fn constant_sequence_has_zero_statistics() {
        let x = constant_family(3.5);
        let limit = Rv::constant(Ext::from_real(3.5));
        let indices: Vec<usize> = (1..=32).collect();
        let profile = in_probability_profile(
            &x,
            &limit,
            1.0,
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(1e-6, 1),
        )
        .unwrap();
        assert!(profile
            .statistics
            .iter()
            .all(|s| *s == Statistic::Probability(BigRational::from_integer(0.into()))));
        assert_eq!(
            profile.verdict,
            Verdict::ConvergesBelow {
                epsilon: 1e-6,
                from_index: 1
            }
        );

        let as_profile = almost_sure_profile(
            &x,
            &limit,
            1.0,
            8,
            &(1..=32).collect::<Vec<_>>(),
            DEFAULT_PIECE_CAP,
            &assessment(1e-6, 1),
        )
        .unwrap();
        assert!(as_profile.verdict.converges());
    }

    #[test]
    fn halving_profile_converges_past_two_to_the_ten() {
        let x = halving_family(2048);
        let limit = Rv::zero();
        let indices: Vec<usize> = (2..=2048).collect();
        let profile = in_probability_profile(
            &x,
            &limit,
            1.0,
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(1e-3, 1),
        )
        .unwrap();
        // Statistic at n is exactly 2^-floor(log2 n); it first drops
        // below 1e-3 at n = 2^10.
        assert_eq!(
            profile.verdict,
            Verdict::ConvergesBelow {
                epsilon: 1e-3,
                from_index: 1024
            }
        );
    }

    #[test]
    fn synthetic_decay_windowed_statistics_vanish_past_one_over_lambda() {
        let family = sequences::synthetic_as(
            "decay",
            |n| 1.0 / n as f64,
            |_| (DyadicRational::zero(), DyadicRational::one()),
        );
        let x = materialize(&family, 96).unwrap();
        let limit = Rv::zero();
        let indices: Vec<usize> = (1..=32).collect();
        let profile = almost_sure_profile(
            &x,
            &limit,
            0.1,
            8,
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(0.5, 1),
        )
        .unwrap();
        for (&n, stat) in profile.indices.iter().zip(&profile.statistics) {
            // Oracle: sup over m >= n of 1/m is 1/n, so the event is all of
            // [0, 1) exactly when 1/n > lambda.
            let expected = if 1.0 / n as f64 > 0.1 { 1 } else { 0 };
            assert_eq!(
                *stat,
                Statistic::Probability(BigRational::from_integer(expected.into())),
                "n = {n}"
            );
        }
    }

    #[test]
    fn window_sweep_is_monotone_and_stabilizes_on_decaying_input() {
        let family = sequences::synthetic_as(
            "decay",
            |n| 1.0 / n as f64,
            |_| (DyadicRational::zero(), DyadicRational::one()),
        );
        let x = materialize(&family, 200).unwrap();
        let limit = Rv::zero();
        let indices: Vec<usize> = (1..=24).collect();
        let sweep = almost_sure_window_sweep(
            &x,
            &limit,
            0.1,
            8,
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(0.5, 1),
        )
        .unwrap();
        for k in 0..indices.len() {
            let small = sweep[0].statistics[k].to_f64();
            let mid = sweep[1].statistics[k].to_f64();
            let large = sweep[2].statistics[k].to_f64();
            assert!(small <= mid && mid <= large);
            // Decaying input: the sup is attained at m = n, so the window
            // sweep has already stabilized.
            assert_eq!(sweep[0].statistics[k], sweep[2].statistics[k]);
        }
    }

    #[test]
    fn one_window_of_blocks_covers_everything() {
        // At n = 16 with window 16 the sup runs over one full level of
        // blocks, whose supports tile [0, 1); the statistic is exactly 1.
        let family = sequences::example1::<f64>();
        let x = materialize(&family, 48).unwrap();
        let profile = almost_sure_profile(
            &x,
            family.limit(),
            1.0,
            16,
            &[16],
            DEFAULT_PIECE_CAP,
            &assessment(0.5, 1),
        )
        .unwrap();
        assert_eq!(
            profile.statistics[0],
            Statistic::Probability(BigRational::from_integer(1.into()))
        );
    }

    #[test]
    fn block_family_diverges_in_l1() {
        // Oracle: value times measure per construction, 4^(m+i) * 2^-m,
        // which is unbounded in n.
        let family = sequences::example1::<f64>();
        let x = materialize(&family, 64).unwrap();
        let indices: Vec<usize> = (2..=64).collect();
        let profile = lp_profile(
            &x,
            family.limit(),
            PExponent::finite(1.0).unwrap(),
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(1.0, 1),
        )
        .unwrap();
        for (&n, stat) in profile.indices.iter().zip(&profile.statistics) {
            let m = n.ilog2();
            let i = n - (1usize << m);
            let expected = 4f64.powi((m as usize + i) as i32) * 2f64.powi(-(m as i32));
            assert_eq!(*stat, Statistic::Norm(expected), "n = {n}");
        }
        assert!(profile.verdict.diverges());
    }

    #[test]
    fn lp_profile_of_shrinking_constants() {
        let family = sequences::synthetic_lp("lp", |n| 1.0 / n as f64);
        let x = materialize(&family, 64).unwrap();
        let limit = Rv::zero();
        let indices: Vec<usize> = (1..=64).collect();
        let profile = lp_profile(
            &x,
            &limit,
            PExponent::finite(1.0).unwrap(),
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(0.1, 1),
        )
        .unwrap();
        for (&n, stat) in profile.indices.iter().zip(&profile.statistics) {
            assert_eq!(*stat, Statistic::Norm(1.0 / n as f64));
        }
        assert!(profile.finite_ae_hypothesis);
        assert_eq!(
            profile.verdict,
            Verdict::ConvergesBelow {
                epsilon: 0.1,
                from_index: 11
            }
        );
    }

    #[test]
    fn lp_profile_scales_exactly_under_power_of_two_factors() {
        let base = sequences::synthetic_lp("lp", |n| 1.0 / n as f64);
        let x = materialize(&base, 32).unwrap();
        let scaled_terms: Vec<Rv> = (1..=32)
            .map(|n| {
                linear_combination(&[4.0], &[&x.term(n).unwrap()], DEFAULT_PIECE_CAP).unwrap()
            })
            .collect();
        let scaled = MaterializedSequence::new(scaled_terms);
        let limit = Rv::zero();
        let indices: Vec<usize> = (1..=32).collect();
        for p in [
            PExponent::finite(1.0).unwrap(),
            PExponent::finite(2.0).unwrap(),
            PExponent::Infinity,
        ] {
            let base_profile = lp_profile(
                &x, &limit, p, &indices, DEFAULT_PIECE_CAP, &assessment(0.1, 1),
            )
            .unwrap();
            let scaled_profile = lp_profile(
                &scaled, &limit, p, &indices, DEFAULT_PIECE_CAP, &assessment(0.1, 1),
            )
            .unwrap();
            for k in 0..indices.len() {
                assert_eq!(
                    scaled_profile.statistics[k].to_f64(),
                    4.0 * base_profile.statistics[k].to_f64(),
                    "p = {p}, k = {k}"
                );
            }
        }
    }

    #[test]
    fn lp_profile_flags_the_finiteness_hypothesis() {
        let family = sequences::example2(DyadicRational::new(1u64, 2).unwrap()).unwrap();
        let x = materialize(&family, 8).unwrap();
        let profile = lp_profile(
            &x,
            family.limit(),
            PExponent::finite(1.0).unwrap(),
            &[1, 2, 3],
            DEFAULT_PIECE_CAP,
            &assessment(0.1, 1),
        )
        .unwrap();
        assert!(!profile.finite_ae_hypothesis);
    }

    #[test]
    fn pointwise_check_on_a_constant_sequence() {
        let x = constant_family(2.0);
        let limit = Rv::constant(Ext::from_real(2.0));
        let omegas = [DyadicRational::zero(), DyadicRational::new(3u64, 3).unwrap()];
        let reports = ae_pointwise_check(
            &x,
            Some(&limit),
            &omegas,
            32,
            &[1, 8, 16],
            &assessment(1e-9, 1),
        )
        .unwrap();
        for report in &reports {
            assert!(report.deviations.iter().all(|d| *d == Ext::zero()));
            assert!(report.verdict.converges());
        }
    }

    #[test]
    fn pointwise_check_sees_the_repeating_spike_at_zero() {
        // At omega = 0 the sliding-block family fires at every n = 2^m with
        // value 4^m, so the pointwise sequence does not converge there.
        let family = sequences::example1::<f64>();
        let x = materialize(&family, 300).unwrap();
        let omegas = [DyadicRational::zero()];
        let indices: Vec<usize> = (1..=300).step_by(7).collect();
        let reports = ae_pointwise_check(
            &x,
            Some(family.limit()),
            &omegas,
            300,
            &indices,
            &assessment(0.5, 1),
        )
        .unwrap();
        let report = &reports[0];
        assert!(!report.verdict.converges());
        // Oracle: direct evaluation of the construction at omega = 0;
        // the largest spike past n is 4^floor(log2(horizon)).
        assert_eq!(report.deviations[0], Ext::from_real(4f64.powi(8)));
    }

    #[test]
    fn pointwise_check_cauchy_mode_after_averaging() {
        // Arithmetic means of a convergent scalar sequence converge to the
        // same limit; checked here against the scalar oracle.
        let terms: Vec<Rv> = (1..=128)
            .map(|n| Rv::constant(Ext::from_real(1.0 + 1.0 / n as f64)))
            .collect();
        let means: Vec<Rv> = (1..=128)
            .map(|i| {
                let coeffs = vec![1.0 / i as f64; i];
                let refs: Vec<&Rv> = terms[..i].iter().collect();
                linear_combination(&coeffs, &refs, DEFAULT_PIECE_CAP).unwrap()
            })
            .collect();
        let x = MaterializedSequence::new(means);
        let omegas = [DyadicRational::new(1u64, 1).unwrap()];
        let indices: Vec<usize> = (1..=128).collect();
        let reports =
            ae_pointwise_check(&x, None, &omegas, 128, &indices, &assessment(0.05, 1)).unwrap();
        let report = &reports[0];
        assert!(!report.against_target);
        // Scalar oracle: the mean at n is 1 + H_n / n.
        let oracle = |n: usize| {
            1.0 + (1..=n).map(|j| 1.0 / j as f64).sum::<f64>() / n as f64
        };
        let horizon_value = oracle(128);
        for (pos, &n) in indices.iter().enumerate() {
            let expected = (oracle(n) - horizon_value).abs();
            let got = report.deviations[pos].finite_part();
            assert!(
                (got - expected).abs() <= 1e-12,
                "n = {n}: {got} vs {expected}"
            );
        }
        assert!(report.verdict.converges());
    }

    #[test]
    fn pointwise_check_separates_cauchy_existence_from_limit_claims() {
        // A constant-first-column matrix maps every sequence to the
        // constant sequence (X_1, X_1, ...): pointwise limits exist
        // everywhere, but they differ from the declared limit wherever
        // X_1 does. Cauchy mode must accept, target mode must not.
        let x1 = Rv::indicator(
            DyadicRational::zero(),
            DyadicRational::new(1u64, 1).unwrap(),
            Ext::from_real(5.0),
        )
        .unwrap();
        let transformed = MaterializedSequence::new(vec![x1; 64]);
        let omegas = [DyadicRational::new(1u64, 2).unwrap()];
        let indices: Vec<usize> = (1..=64).collect();

        let cauchy =
            ae_pointwise_check(&transformed, None, &omegas, 64, &indices, &assessment(0.1, 1))
                .unwrap();
        assert!(cauchy[0].verdict.converges());

        let against_zero = ae_pointwise_check(
            &transformed,
            Some(&Rv::zero()),
            &omegas,
            64,
            &indices,
            &assessment(0.1, 1),
        )
        .unwrap();
        assert!(against_zero[0].verdict.diverges());
        assert!(against_zero[0]
            .deviations
            .iter()
            .all(|d| *d == Ext::from_real(5.0)));
    }

    #[test]
    fn verdict_requires_a_persistent_floor_to_diverge() {
        let indices: Vec<usize> = (1..=16).collect();
        let mk = |stats: Vec<f64>| ConvergenceProfile::<f64> {
            mode: Mode::InProbability { lambda: 1.0 },
            indices: indices.clone(),
            statistics: stats.into_iter().map(Statistic::Norm).collect(),
            certified: true,
            finite_ae_hypothesis: true,
            verdict: Verdict::Inconclusive,
        };
        let flat = mk(vec![1.0; 16]);
        assert!(assess(&flat, &assessment(0.5, 1)).diverges());

        let oscillating = mk((0..16).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect());
        assert_eq!(
            assess(&oscillating, &assessment(0.5, 1)),
            Verdict::Inconclusive
        );
    }

    #[test]
    fn monte_carlo_estimates_agree_with_the_exact_path() {
        let family = sequences::example1::<f64>();
        let x = materialize(&family, 40).unwrap();
        let limit = family.limit().clone();
        let indices = [4usize, 8, 16, 32];
        let mc = McOptions::new(0x5eed);
        let exact = in_probability_profile(
            &x,
            &limit,
            1.0,
            &indices,
            DEFAULT_PIECE_CAP,
            &assessment(0.5, 1),
        )
        .unwrap();
        let black_box = black_box_from_steps(&x, &limit);
        let estimated =
            mc_in_probability_profile(&black_box, 1.0, &indices, &mc, &assessment(0.5, 1))
                .unwrap();
        assert!(!estimated.certified);
        for (k, &n) in indices.iter().enumerate() {
            let p = exact.statistics[k].to_f64();
            let p_hat = estimated.statistics[k].to_f64();
            let half_width = wilson_half_width(p_hat, mc.samples, 1.96);
            assert!(
                (p_hat - p).abs() <= 4.0 * half_width,
                "n = {n}: exact {p}, estimate {p_hat}, hw {half_width}"
            );
        }

        let lp_exact = lp_profile(
            &x,
            &limit,
            PExponent::finite(1.0).unwrap(),
            &[2, 4],
            DEFAULT_PIECE_CAP,
            &assessment(0.5, 1),
        )
        .unwrap();
        let lp_estimated = mc_lp_profile(
            &black_box,
            PExponent::finite(1.0).unwrap(),
            &[2, 4],
            &mc,
            &assessment(0.5, 1),
        )
        .unwrap();
        for k in 0..2 {
            let exact_v = lp_exact.statistics[k].to_f64();
            let est_v = lp_estimated.statistics[k].to_f64();
            assert!(
                (est_v - exact_v).abs() <= 0.05 * exact_v.max(1.0),
                "{est_v} vs {exact_v}"
            );
        }
    }
}
