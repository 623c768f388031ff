use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};
use crate::step_rv::{linear_combination, StepRandomVariable, DEFAULT_PIECE_CAP};

/// Declared behavior of a matrix row beyond its explicit support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail<S> {
    /// Coefficients beyond the support are exactly zero.
    Zero,
    /// The l1 mass of the coefficients beyond the support is at most this.
    L1Bound(S),
}

/// One matrix row: explicit coefficients for columns `1..=J` plus a tail
/// descriptor that makes infinite-row application certifiable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct RowSpec<S> {
    coefficients: Vec<S>,
    tail: Tail<S>,
}

impl<S: Scalar> RowSpec<S> {
    pub fn new(coefficients: Vec<S>, tail: Tail<S>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedRow(
                "coefficients must be finite reals".into(),
            ));
        }
        if let Tail::L1Bound(bound) = tail {
            if !bound.is_finite() || bound < S::zero() {
                return Err(Error::MalformedRow(
                    "l1 tail bound must be a finite non-negative real".into(),
                ));
            }
        }
        Ok(Self { coefficients, tail })
    }

    pub fn zero_tail(coefficients: Vec<S>) -> Result<Self> {
        Self::new(coefficients, Tail::Zero)
    }

    pub fn coefficients(&self) -> &[S] {
        &self.coefficients
    }

    pub fn tail(&self) -> Tail<S> {
        self.tail
    }

    pub fn support_len(&self) -> usize {
        self.coefficients.len()
    }

    /// Entry in column `j` (1-based); `None` when the entry lies in an
    /// l1-bounded tail and is therefore not individually known.
    pub fn entry(&self, j: usize) -> Option<S> {
        if j >= 1 && j <= self.coefficients.len() {
            Some(self.coefficients[j - 1])
        } else {
            match self.tail {
                Tail::Zero => Some(S::zero()),
                Tail::L1Bound(bound) if bound == S::zero() => Some(S::zero()),
                Tail::L1Bound(_) => None,
            }
        }
    }

    /// Upper bound on `|a_{ij}|`, usable even inside an l1 tail.
    fn entry_upper(&self, j: usize) -> S {
        match self.entry(j) {
            Some(value) => value.abs(),
            None => self.tail_bound(),
        }
    }

    fn tail_bound(&self) -> S {
        match self.tail {
            Tail::Zero => S::zero(),
            Tail::L1Bound(bound) => bound,
        }
    }

    /// Certified upper bound on the l1 mass of the whole row.
    pub fn abs_sum(&self) -> S {
        compensated_sum(self.coefficients.iter().map(|c| c.abs())) + self.tail_bound()
    }

    /// Compensated sum of the explicit coefficients; the true row sum lies
    /// within `tail_bound` of this.
    pub fn sum(&self) -> S {
        compensated_sum(self.coefficients.iter().copied())
    }
}

/// Analytic certificates for a builtin family. Finite-depth checks cannot
/// certify the three regularity limits; these flags carry the closed-form
/// knowledge that does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct AnalyticFlags<S> {
    /// Exact norm `M = sup_i sum_j |a_{ij}|` when known in closed form.
    pub norm: Option<S>,
    /// Every column tends to zero.
    pub column_limits_zero: bool,
    /// Row sums tend to one.
    pub row_sums_limit_one: bool,
}

enum RowSource<S> {
    Generator(Arc<dyn Fn(usize) -> RowSpec<S> + Send + Sync>),
    Dense(Vec<RowSpec<S>>),
}

impl<S> std::fmt::Debug for RowSource<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowSource::Generator(_) => f.write_str("Generator(..)"),
            RowSource::Dense(rows) => write!(f, "Dense({} rows)", rows.len()),
        }
    }
}

/// Infinite summability matrix given as a lazy row generator (or a dense
/// finite prefix), with optional analytic certificates.
#[derive(Debug)]
pub struct SummabilityMatrix<S> {
    name: String,
    rows: RowSource<S>,
    flags: Option<AnalyticFlags<S>>,
}

/// Options for applying one matrix row to a sequence.
#[derive(Debug, Clone, Copy)]
pub struct ApplyOptions<S> {
    /// Budget for the certified truncation error on finite parts.
    pub precision: S,
    /// Uniform bound on `sup_j ||X_j||_inf` over the tail terms; required
    /// to certify an l1-bounded tail.
    pub tail_value_bound: Option<S>,
    pub piece_cap: usize,
}

impl<S: Scalar> Default for ApplyOptions<S> {
    fn default() -> Self {
        Self {
            precision: S::of(1e-9),
            tail_value_bound: None,
            piece_cap: DEFAULT_PIECE_CAP,
        }
    }
}

impl<S: Scalar> SummabilityMatrix<S> {
    pub fn from_generator(
        name: impl Into<String>,
        generator: impl Fn(usize) -> RowSpec<S> + Send + Sync + 'static,
        flags: Option<AnalyticFlags<S>>,
    ) -> Self {
        Self {
            name: name.into(),
            rows: RowSource::Generator(Arc::new(generator)),
            flags,
        }
    }

    /// Matrix of arithmetic means: row `i` is `1/i` on columns `1..=i`.
    pub fn cesaro() -> Self {
        Self::from_generator(
            "cesaro",
            |i| {
                let weight = S::one() / S::of_usize(i);
                RowSpec::new(vec![weight; i], Tail::Zero).expect("1/i is finite")
            },
            Some(AnalyticFlags {
                // Rows are probability vectors: i * (1/i) = 1 in exact
                // rational arithmetic, and columns decay like 1/i.
                norm: Some(S::one()),
                column_limits_zero: true,
                row_sums_limit_one: true,
            }),
        )
    }

    pub fn identity() -> Self {
        Self::from_generator(
            "identity",
            |i| {
                let mut coefficients = vec![S::zero(); i];
                coefficients[i - 1] = S::one();
                RowSpec::new(coefficients, Tail::Zero).expect("unit row is finite")
            },
            Some(AnalyticFlags {
                norm: Some(S::one()),
                column_limits_zero: true,
                row_sums_limit_one: true,
            }),
        )
    }

    /// Every row picks the first term: `a_{i1} = 1` and zeros elsewhere,
    /// so rows sum to one but column 1 never decays. The canonical witness
    /// for a summability method that fails the column-limit condition.
    pub fn first_column_ones() -> Self {
        Self::from_generator(
            "first-column-ones",
            |_| RowSpec::new(vec![S::one()], Tail::Zero).expect("unit row is finite"),
            None,
        )
    }

    /// Finite prefix given by explicit rows; carries no analytic flags.
    pub fn dense(rows: Vec<RowSpec<S>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::MalformedRow("a dense matrix needs at least one row".into()));
        }
        Ok(Self {
            name: "dense".into(),
            rows: RowSource::Dense(rows),
            flags: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn flags(&self) -> Option<&AnalyticFlags<S>> {
        self.flags.as_ref()
    }

    /// Row `i` (1-based); `None` past the end of a dense prefix.
    pub fn row(&self, i: usize) -> Option<RowSpec<S>> {
        if i < 1 {
            return None;
        }
        match &self.rows {
            RowSource::Generator(generator) => Some(generator(i)),
            RowSource::Dense(rows) => rows.get(i - 1).cloned(),
        }
    }

    /// `Some(len)` for dense prefixes, `None` for infinite generators.
    pub fn row_count(&self) -> Option<usize> {
        match &self.rows {
            RowSource::Generator(_) => None,
            RowSource::Dense(rows) => Some(rows.len()),
        }
    }

    /// `(Ax)_i = sum_j a_{ij} X_j` over the row's explicit support, exact
    /// for zero tails. Infinite coefficients combine linearly, so an
    /// infinite `X_j` with `a_{ij} != 0` makes the result infinite on the
    /// corresponding pieces. For l1-bounded tails the truncation error on
    /// finite parts is certified against `opts.precision`.
    pub fn apply_row(
        &self,
        i: usize,
        x: &[StepRandomVariable<S>],
        opts: &ApplyOptions<S>,
    ) -> Result<StepRandomVariable<S>> {
        let row = self.row(i).ok_or_else(|| Error::RowUnavailable {
            name: self.name.clone(),
            index: i,
        })?;
        let needed = row.support_len();
        if x.len() < needed {
            return Err(Error::InsufficientSequence {
                row: i,
                needed,
                got: x.len(),
            });
        }
        match row.tail {
            Tail::Zero => {}
            Tail::L1Bound(bound) if bound == S::zero() => {}
            Tail::L1Bound(bound) => match opts.tail_value_bound {
                None => {
                    return Err(Error::UncertifiableTail {
                        row: i,
                        reason: "an l1-bounded tail needs a uniform bound on the tail terms"
                            .into(),
                    })
                }
                Some(value_bound) => {
                    let error = bound * value_bound;
                    if error.is_nan() || error > opts.precision {
                        return Err(Error::UncertifiableTail {
                            row: i,
                            reason: format!(
                                "tail mass {bound} times value bound {value_bound} \
                                 exceeds the precision budget {}",
                                opts.precision
                            ),
                        });
                    }
                }
            },
        }
        if needed == 0 {
            return Ok(StepRandomVariable::zero());
        }
        let refs: Vec<&StepRandomVariable<S>> = x[..needed].iter().collect();
        linear_combination(row.coefficients(), &refs, opts.piece_cap)
    }
}

// ---------------------------------------------------------------------------
// Regularity checking.
// ---------------------------------------------------------------------------

/// Ratio below which a near-depth magnitude counts as decaying toward its
/// limit. A 1/i column shrinks by a factor of about two between depth/2
/// and depth, comfortably below this.
const DECAY_HOLD_RATIO: f64 = 0.75;

/// Ratio above which a near-depth magnitude counts as stagnant. Stagnation
/// above tolerance across the whole near-depth window produces a failure
/// witness.
const STAGNATION_RATIO: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessAxis {
    Row,
    Column,
}

/// Index and value exhibiting a condition failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct Witness<S> {
    pub axis: WitnessAxis,
    pub index: usize,
    pub value: S,
}

/// Finite-depth verdict for one regularity condition.
///
/// `HoldsAtDepth` records that the data at this depth is consistent with
/// the condition (within tolerance, or decaying toward it); it is not a
/// proof of the limit. Limits are certified only by analytic flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
#[serde(bound(serialize = "S: Scalar"))]
pub enum ConditionVerdict<S> {
    HoldsAtDepth,
    Fails { witness: Witness<S> },
    Undetermined,
}

impl<S> ConditionVerdict<S> {
    pub fn failed(&self) -> bool {
        matches!(self, ConditionVerdict::Fails { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverallRegularity {
    Regular,
    NotRegular,
    UndeterminedAtDepth,
}

/// Verdicts for the three regularity conditions at a finite checking depth:
/// uniformly bounded absolute row sums, vanishing column limits, and row
/// sums tending to one.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct RegularityReport<S> {
    pub matrix: String,
    pub depth: usize,
    /// `min(depth, rows available)` for dense prefixes.
    pub checked_depth: usize,
    pub tol: S,
    /// Finite-depth estimate of `M = sup_i sum_j |a_{ij}|`, including
    /// declared tail bounds.
    pub norm_estimate: S,
    /// Exact norm certified by analytic flags, when present.
    pub certified_norm: Option<S>,
    pub condition1: ConditionVerdict<S>,
    pub condition2: ConditionVerdict<S>,
    pub condition3: ConditionVerdict<S>,
    pub overall: OverallRegularity,
}

impl<S: Scalar> RegularityReport<S> {
    /// The certified norm when available, else the finite-depth estimate.
    pub fn norm(&self) -> S {
        self.certified_norm.unwrap_or(self.norm_estimate)
    }
}

struct WindowStats<S> {
    upper_max: S,
    known_min: Option<S>,
    all_known: bool,
}

fn column_window<S: Scalar>(rows: &[RowSpec<S>], window: &[usize], j: usize) -> WindowStats<S> {
    let mut upper_max = S::zero();
    let mut known_min: Option<S> = None;
    let mut all_known = true;
    for &i in window {
        let row = &rows[i - 1];
        upper_max = upper_max.max(row.entry_upper(j));
        match row.entry(j) {
            Some(value) => {
                let magnitude = value.abs();
                known_min = Some(match known_min {
                    Some(current) => current.min(magnitude),
                    None => magnitude,
                });
            }
            None => all_known = false,
        }
    }
    WindowStats {
        upper_max,
        known_min,
        all_known,
    }
}

impl<S: Scalar> SummabilityMatrix<S> {
    /// Checks the three regularity conditions on rows `1..=depth`.
    ///
    /// Finite-depth checks alone cannot certify the limit conditions, so
    /// without analytic flags the overall verdict is at best
    /// `UndeterminedAtDepth`; a failure witness always wins over flags.
    pub fn check_regularity(&self, depth: usize, tol: S) -> RegularityReport<S> {
        let depth = depth.max(1);
        let checked = match self.row_count() {
            Some(count) => depth.min(count),
            None => depth,
        };
        let rows: Vec<RowSpec<S>> = (1..=checked)
            .map(|i| self.row(i).expect("rows 1..=checked exist"))
            .collect();

        // Condition 1: the l1 mass of every checked row, tails included.
        let norm_estimate = rows
            .iter()
            .map(RowSpec::abs_sum)
            .fold(S::zero(), S::max);
        let condition1 = ConditionVerdict::HoldsAtDepth;

        let quarter = (checked / 4).max(1);
        let near: Vec<usize> = (checked.saturating_sub(quarter) + 1..=checked).collect();
        let mid_end = (checked / 2).max(1);
        let mid: Vec<usize> = (mid_end.saturating_sub(quarter) + 1..=mid_end).collect();
        // Stagnation compares the near window against the mid window; with
        // a single checked row the windows coincide and can prove nothing.
        let windows_distinct = mid_end < near[0];

        let decay = S::of(DECAY_HOLD_RATIO);
        let stagnation = S::of(STAGNATION_RATIO);

        // Condition 2: columns with enough runway (j <= checked/2) must
        // vanish or visibly decay between the mid and near windows.
        let mut condition2 = ConditionVerdict::HoldsAtDepth;
        let mut any_undetermined = false;
        for j in 1..=(checked / 2).max(1) {
            let near_stats = column_window(&rows, &near, j);
            let mid_stats = column_window(&rows, &mid, j);
            if near_stats.upper_max <= tol
                || near_stats.upper_max <= decay * mid_stats.upper_max
            {
                continue;
            }
            let stagnant = windows_distinct
                && near_stats.all_known
                && near_stats.known_min.is_some_and(|min| min > tol)
                && near_stats.upper_max >= stagnation * mid_stats.upper_max;
            if stagnant {
                condition2 = ConditionVerdict::Fails {
                    witness: Witness {
                        axis: WitnessAxis::Column,
                        index: j,
                        value: near_stats.upper_max,
                    },
                };
                break;
            }
            any_undetermined = true;
        }
        if !condition2.failed() && any_undetermined {
            condition2 = ConditionVerdict::Undetermined;
        }

        // Condition 3: row-sum deviations from 1 near the depth, widened
        // by any tail uncertainty.
        let deviation = |i: usize| {
            let row = &rows[i - 1];
            (row.sum() - S::one()).abs() + row.tail_bound()
        };
        let near_devs: Vec<(usize, S)> = near.iter().map(|&i| (i, deviation(i))).collect();
        let mid_dev_max = mid
            .iter()
            .map(|&i| deviation(i))
            .fold(S::zero(), S::max);
        let (near_argmax, near_dev_max) = near_devs
            .iter()
            .copied()
            .fold((near[0], S::zero()), |acc, (i, d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
        let near_dev_min = near_devs
            .iter()
            .map(|&(_, d)| d)
            .fold(S::infinity(), S::min);
        let condition3 = if near_dev_max <= tol || near_dev_max <= decay * mid_dev_max {
            ConditionVerdict::HoldsAtDepth
        } else if windows_distinct && near_dev_min > tol && near_dev_max >= stagnation * mid_dev_max {
            ConditionVerdict::Fails {
                witness: Witness {
                    axis: WitnessAxis::Row,
                    index: near_argmax,
                    value: rows[near_argmax - 1].sum(),
                },
            }
        } else {
            ConditionVerdict::Undetermined
        };

        let failed = condition1.failed() || condition2.failed() || condition3.failed();
        let certified = self.flags.as_ref().is_some_and(|flags| {
            flags.norm.is_some() && flags.column_limits_zero && flags.row_sums_limit_one
        });
        let overall = if failed {
            OverallRegularity::NotRegular
        } else if certified {
            OverallRegularity::Regular
        } else {
            OverallRegularity::UndeterminedAtDepth
        };

        RegularityReport {
            matrix: self.name.clone(),
            depth,
            checked_depth: checked,
            tol,
            norm_estimate,
            certified_norm: self.flags.as_ref().and_then(|flags| flags.norm),
            condition1,
            condition2,
            condition3,
            overall,
        }
    }
}
