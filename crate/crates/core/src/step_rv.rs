use std::collections::BTreeSet;

use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize};

use crate::dyadic::{DyadicRational, DyadicSum};
use crate::error::{Error, Result};
use crate::extended_real::ExtendedReal;
use crate::scalar::{compensated_sum, Scalar};

/// Default bound on the piece count produced by refinement operations.
pub const DEFAULT_PIECE_CAP: usize = 1 << 20;

/// Extended-real-valued step function on the probability space `[0, 1)`
/// with Lebesgue measure.
///
/// The half-open pieces `[b_k, b_{k+1})` partition `[0, 1)` exactly, so
/// every event that is piecewise constant has an exactly computable
/// probability: a finite sum of dyadic interval lengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct StepRandomVariable<S> {
    breakpoints: Vec<DyadicRational>,
    values: Vec<ExtendedReal<S>>,
}

/// Event over a single step random variable. Each variant is piecewise
/// constant on the variable's partition, so its measure is exact.
#[derive(Debug, Clone, PartialEq)]
pub enum EventPredicate<S> {
    /// `|X| > lambda` with the componentwise absolute value.
    AbsGreaterThan(ExtendedReal<S>),
    /// `X > lambda` in the extended-real order.
    GreaterThan(ExtendedReal<S>),
    /// `X` takes an infinite value.
    IsInfinite,
}

impl<S: Scalar> EventPredicate<S> {
    fn holds(&self, value: &ExtendedReal<S>) -> bool {
        match self {
            EventPredicate::AbsGreaterThan(lambda) => value.abs() > *lambda,
            EventPredicate::GreaterThan(lambda) => *value > *lambda,
            EventPredicate::IsInfinite => value.is_infinite(),
        }
    }
}

/// Exponent for an `L_p` norm: a finite `p >= 1` or the sup-norm marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PExponent<S> {
    Finite(S),
    Infinity,
}

impl<S: Scalar> PExponent<S> {
    pub fn finite(p: S) -> Result<Self> {
        if !p.is_finite() || p < S::one() {
            return Err(Error::Config(format!("p must satisfy p >= 1, got {p}")));
        }
        Ok(PExponent::Finite(p))
    }

    pub fn infinity() -> Self {
        PExponent::Infinity
    }
}

impl<S: Scalar> std::fmt::Display for PExponent<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PExponent::Finite(p) => write!(f, "{p}"),
            PExponent::Infinity => write!(f, "inf"),
        }
    }
}

impl<S: Scalar> Serialize for PExponent<S> {
    fn serialize<Ser: serde::Serializer>(
        &self,
        serializer: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        match self {
            PExponent::Finite(p) => serializer.serialize_f64(p.as_f64()),
            PExponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de, S: Scalar> Deserialize<'de> for PExponent<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(p) => PExponent::finite(S::of(p)).map_err(serde::de::Error::custom),
            Repr::Text(s) if s == "inf" => Ok(PExponent::Infinity),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number >= 1 or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Restricted `L_p` integral per the finite-part convention: infinite-valued
/// pieces are excluded, and `restricted` records whether any were present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ExpectationP<S> {
    pub value: S,
    pub restricted: bool,
}

/// Family re-expressed on the common refinement of all breakpoints.
#[derive(Debug, Clone)]
pub struct Refinement<S> {
    pub breakpoints: Vec<DyadicRational>,
    /// `values[f][k]` is the value of input `f` on piece `k`.
    pub values: Vec<Vec<ExtendedReal<S>>>,
}

impl<S: Scalar> Refinement<S> {
    pub fn piece_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn piece_length(&self, k: usize) -> DyadicRational {
        self.breakpoints[k + 1]
            .checked_sub(&self.breakpoints[k])
            .expect("breakpoints are strictly increasing")
    }
}

impl<S: Scalar> StepRandomVariable<S> {
    pub fn new(breakpoints: Vec<DyadicRational>, values: Vec<ExtendedReal<S>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::MalformedStepFunction(
                "need at least two breakpoints".into(),
            ));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::MalformedStepFunction(format!(
                "{} breakpoints require {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if !breakpoints[0].is_zero() {
            return Err(Error::MalformedStepFunction(
                "first breakpoint must be 0".into(),
            ));
        }
        if !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::MalformedStepFunction(
                "last breakpoint must be 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedStepFunction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: ExtendedReal<S>) -> Self {
        Self {
            breakpoints: vec![DyadicRational::zero(), DyadicRational::one()],
            values: vec![value],
        }
    }

    pub fn zero() -> Self {
        Self::constant(ExtendedReal::zero())
    }

    /// `value` on `[lo, hi)` and zero elsewhere.
    pub fn indicator(
        lo: DyadicRational,
        hi: DyadicRational,
        value: ExtendedReal<S>,
    ) -> Result<Self> {
        if lo >= hi {
            return Err(Error::MalformedStepFunction(format!(
                "empty support [{lo}, {hi})"
            )));
        }
        let mut breakpoints = vec![DyadicRational::zero()];
        let mut values = Vec::new();
        if !lo.is_zero() {
            breakpoints.push(lo.clone());
            values.push(ExtendedReal::zero());
        }
        values.push(value);
        if !hi.is_one() {
            breakpoints.push(hi.clone());
            values.push(ExtendedReal::zero());
        }
        breakpoints.push(DyadicRational::one());
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[DyadicRational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[ExtendedReal<S>] {
        &self.values
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(start, end, value)` over the half-open pieces.
    pub fn pieces(
        &self,
    ) -> impl Iterator<Item = (&DyadicRational, &DyadicRational, &ExtendedReal<S>)> {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (&w[0], &w[1], v))
    }

    /// Value of the unique piece containing `omega`; breakpoints belong to
    /// the piece they start (half-open convention).
    pub fn evaluate(&self, omega: &DyadicRational) -> Result<ExtendedReal<S>> {
        if omega >= &DyadicRational::one() {
            return Err(Error::OmegaOutOfRange {
                omega: omega.to_string(),
            });
        }
        let idx = self.breakpoints.partition_point(|b| b <= omega);
        Ok(self.values[idx - 1])
    }

    /// Evaluation at a float sample point; used by the Monte Carlo path.
    pub fn value_at_f64(&self, omega: f64) -> Result<ExtendedReal<S>> {
        if !(0.0..1.0).contains(&omega) {
            return Err(Error::OmegaOutOfRange {
                omega: omega.to_string(),
            });
        }
        let idx = self.breakpoints.partition_point(|b| b.to_f64() <= omega);
        Ok(self.values[idx - 1])
    }

    /// True iff no piece carries an infinite value. Pieces have positive
    /// measure, so "finite almost everywhere" and "finite everywhere"
    /// coincide for step functions.
    pub fn finite_ae(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Exact Lebesgue measure of the event described by `predicate`.
    pub fn prob(&self, predicate: &EventPredicate<S>) -> BigRational {
        let mut total = DyadicSum::zero();
        for (start, end, value) in self.pieces() {
            if predicate.holds(value) {
                total.add(
                    &end.checked_sub(start)
                        .expect("breakpoints are strictly increasing"),
                );
            }
        }
        total.into_rational()
    }

    /// Restricted `L_p` norm: `(sum over finite pieces of |v|^p * len)^(1/p)`,
    /// or the maximum finite `|v|` for the sup norm. Pieces with infinite
    /// values are excluded from the integral and flagged via `restricted`.
    pub fn expectation_p(&self, p: &PExponent<S>) -> ExpectationP<S> {
        let restricted = !self.finite_ae();
        let value = match p {
            PExponent::Finite(p) => {
                let p = *p;
                let total = compensated_sum(self.pieces().filter(|(_, _, v)| v.is_finite()).map(
                    |(start, end, v)| {
                        let magnitude = v.finite_part().abs();
                        let powered = if p == S::one() {
                            magnitude
                        } else if p == S::of(2.0) {
                            magnitude * magnitude
                        } else {
                            magnitude.powf(p)
                        };
                        let length = S::of(
                            end.checked_sub(start)
                                .expect("breakpoints are strictly increasing")
                                .to_f64(),
                        );
                        powered * length
                    },
                ));
                if p == S::one() {
                    total
                } else if p == S::of(2.0) {
                    total.sqrt()
                } else {
                    total.powf(S::one() / p)
                }
            }
            PExponent::Infinity => self
                .values
                .iter()
                .filter(|v| v.is_finite())
                .map(|v| v.finite_part().abs())
                .fold(S::zero(), S::max),
        };
        ExpectationP { value, restricted }
    }
}

/// Merges the breakpoint sets of a family and re-expresses every member on
/// the merged partition. Exact: no value changes, only finer pieces.
pub fn common_refinement<S: Scalar>(
    family: &[&StepRandomVariable<S>],
    cap: usize,
) -> Result<Refinement<S>> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut merged = BTreeSet::new();
    for rv in family {
        for b in &rv.breakpoints {
            merged.insert(b.clone());
        }
    }
    let breakpoints: Vec<DyadicRational> = merged.into_iter().collect();
    let pieces = breakpoints.len() - 1;
    if pieces > cap {
        return Err(Error::PieceCapExceeded { pieces, cap });
    }

    let values = family
        .iter()
        .map(|rv| {
            let mut out = Vec::with_capacity(pieces);
            let mut fi = 0usize;
            for start in &breakpoints[..pieces] {
                while rv.breakpoints[fi + 1] <= *start {
                    fi += 1;
                }
                out.push(rv.values[fi]);
            }
            out
        })
        .collect();

    Ok(Refinement {
        breakpoints,
        values,
    })
}

/// Builds a step function from refined pieces, coalescing adjacent pieces
/// that carry equal values.
fn from_refined<S: Scalar>(
    breakpoints: &[DyadicRational],
    values: Vec<ExtendedReal<S>>,
) -> StepRandomVariable<S> {
    let mut out_breaks = vec![breakpoints[0].clone()];
    let mut out_values: Vec<ExtendedReal<S>> = Vec::new();
    for (k, value) in values.into_iter().enumerate() {
        match out_values.last() {
            Some(last) if *last == value => {}
            _ => {
                if k > 0 {
                    out_breaks.push(breakpoints[k].clone());
                }
                out_values.push(value);
            }
        }
    }
    out_breaks.push(breakpoints[breakpoints.len() - 1].clone());
    StepRandomVariable {
        breakpoints: out_breaks,
        values: out_values,
    }
}

/// Pointwise `sum_k coeffs[k] * family[k]`, exact on the common refinement.
pub fn linear_combination<S: Scalar>(
    coeffs: &[S],
    family: &[&StepRandomVariable<S>],
    cap: usize,
) -> Result<StepRandomVariable<S>> {
    if coeffs.len() != family.len() {
        return Err(Error::LengthMismatch {
            coeffs: coeffs.len(),
            family: family.len(),
        });
    }
    let refined = common_refinement(family, cap)?;
    let pieces = refined.piece_count();
    let values = (0..pieces)
        .map(|k| {
            let mut acc = ExtendedReal::zero();
            for (f, c) in coeffs.iter().enumerate() {
                acc = acc + refined.values[f][k].scale(*c);
            }
            acc
        })
        .collect();
    Ok(from_refined(&refined.breakpoints, values))
}

/// Pointwise maximum (in the extended-real order) of `|X_m - reference|`
/// over the family. Adding members can only grow the result, which makes
/// windowed suprema certified lower bounds of the infinite supremum.
pub fn sup_family<S: Scalar>(
    family: &[&StepRandomVariable<S>],
    reference: &StepRandomVariable<S>,
    cap: usize,
) -> Result<StepRandomVariable<S>> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut all: Vec<&StepRandomVariable<S>> = family.to_vec();
    all.push(reference);
    let refined = common_refinement(&all, cap)?;
    let pieces = refined.piece_count();
    let reference_values = &refined.values[family.len()];
    let values = (0..pieces)
        .map(|k| {
            refined.values[..family.len()]
                .iter()
                .map(|member| (member[k] - reference_values[k]).abs())
                .max()
                .expect("family is nonempty")
        })
        .collect();
    Ok(from_refined(&refined.breakpoints, values))
}

impl<'de, S: Scalar> Deserialize<'de> for StepRandomVariable<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound(deserialize = "S: Scalar"))]
        struct Repr<S> {
            breakpoints: Vec<DyadicRational>,
            values: Vec<ExtendedReal<S>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        StepRandomVariable::new(repr.breakpoints, repr.values).map_err(serde::de::Error::custom)
    }
}
