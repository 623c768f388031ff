use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ModeKind, Sequence};
use crate::dyadic::DyadicRational;
use crate::error::{Error, Result};
use crate::extended_real::ExtendedReal;
use crate::scalar::Scalar;
use crate::step_rv::StepRandomVariable;

/// Largest index of the sliding-block family whose value `4^(m+i)` still
/// fits an `f64` with room for a few hundred exact additions.
pub const EXAMPLE1_MAX_INDEX: usize = 511;

type Generator<S> = Arc<dyn Fn(usize) -> Result<StepRandomVariable<S>> + Send + Sync>;

/// A named sequence of step random variables with its declared limit and
/// the convergence modes the construction guarantees.
#[derive(Clone)]
pub struct SequenceFamily<S> {
    name: String,
    generator: Generator<S>,
    limit: StepRandomVariable<S>,
    declared_modes: BTreeSet<ModeKind>,
}

impl<S> std::fmt::Debug for SequenceFamily<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SequenceFamily")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> SequenceFamily<S> {
    pub fn new(
        name: impl Into<String>,
        generator: Generator<S>,
        limit: StepRandomVariable<S>,
        declared_modes: impl IntoIterator<Item = ModeKind>,
    ) -> Self {
        Self {
            name: name.into(),
            generator,
            limit,
            declared_modes: declared_modes.into_iter().collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn limit(&self) -> &StepRandomVariable<S> {
        &self.limit
    }

    pub fn declared_modes(&self) -> &BTreeSet<ModeKind> {
        &self.declared_modes
    }
}

impl<S: Scalar> Sequence<S> for SequenceFamily<S> {
    fn term(&self, n: usize) -> Result<StepRandomVariable<S>> {
        (self.generator)(n)
    }
}

fn require_index(n: usize, max: usize) -> Result<()> {
    if n < 1 || n > max {
        return Err(Error::GuardRange { n, min: 1, max });
    }
    Ok(())
}

/// Term `n = 2^m + i` of the sliding-block family: value `4^(m+i)` on the
/// dyadic block `[i/2^m, (i+1)/2^m)` and zero elsewhere. Term 1 is zero.
///
/// Each term has support of measure `2^-m`, so the sequence tends to zero
/// in probability while the block values grow fast enough that arithmetic
/// means stay above one everywhere.
pub fn example1_term<S: Scalar>(n: usize) -> Result<StepRandomVariable<S>> {
    require_index(n, EXAMPLE1_MAX_INDEX)?;
    if n == 1 {
        return Ok(StepRandomVariable::zero());
    }
    let m = n.ilog2();
    let i = (n - (1usize << m)) as u64;
    let value = S::of(2.0f64.powi(2 * (m + i as u32) as i32));
    if !value.is_finite() {
        return Err(Error::Unrealizable(format!(
            "block value 4^{} overflows the scalar type",
            m + i as u32
        )));
    }
    let lo = DyadicRational::new(i, m)?;
    let hi = DyadicRational::new(i + 1, m)?;
    StepRandomVariable::indicator(lo, hi, ExtendedReal::from_real(value))
}

/// The sliding-block family; converges to zero in probability and in no
/// stronger mode.
pub fn example1<S: Scalar>() -> SequenceFamily<S> {
    SequenceFamily::new(
        "example1",
        Arc::new(example1_term::<S>),
        StepRandomVariable::zero(),
        [ModeKind::InProbability],
    )
}

/// First term infinite on `[0, epsilon)`, every later term identically
/// zero. The sequence is eventually equal to its limit, yet the first term
/// is not finite a.e., which is exactly what breaks preservation for any
/// matrix with nonzero first-column entries.
pub fn example2<S: Scalar>(epsilon: DyadicRational) -> Result<SequenceFamily<S>> {
    if epsilon.is_zero() || epsilon >= DyadicRational::one() {
        return Err(Error::Unrealizable(format!(
            "epsilon must lie strictly between 0 and 1, got {epsilon}"
        )));
    }
    let first = StepRandomVariable::indicator(
        DyadicRational::zero(),
        epsilon,
        ExtendedReal::infinity(),
    )?;
    Ok(SequenceFamily::new(
        "example2",
        Arc::new(move |n| {
            require_index(n, usize::MAX)?;
            Ok(if n == 1 {
                first.clone()
            } else {
                StepRandomVariable::zero()
            })
        }),
        StepRandomVariable::zero(),
        [
            ModeKind::AePointwise,
            ModeKind::AlmostSure,
            ModeKind::InProbability,
            ModeKind::Lp,
        ],
    ))
}

/// Family `X_n = decay(n)` on `support(n)`, limit zero. With `decay`
/// non-increasing to zero the windowed sup-tail statistic is bounded by
/// `decay(n)` by construction, so almost-sure convergence is certified.
pub fn synthetic_as<S: Scalar>(
    name: impl Into<String>,
    decay: impl Fn(usize) -> S + Send + Sync + 'static,
    support: impl Fn(usize) -> (DyadicRational, DyadicRational) + Send + Sync + 'static,
) -> SequenceFamily<S> {
    SequenceFamily::new(
        name,
        Arc::new(move |n| {
            require_index(n, usize::MAX)?;
            let height = decay(n);
            if !height.is_finite() || height < S::zero() {
                return Err(Error::Unrealizable(format!(
                    "decay({n}) must be a finite non-negative real, got {height}"
                )));
            }
            if height == S::zero() {
                return Ok(StepRandomVariable::zero());
            }
            let (lo, hi) = support(n);
            StepRandomVariable::indicator(lo, hi, ExtendedReal::from_real(height))
        }),
        StepRandomVariable::zero(),
        [ModeKind::AlmostSure, ModeKind::InProbability],
    )
}

/// Family of constants `X_n = norm_target(n)` on all of `[0, 1)`, limit
/// zero; `||X_n - 0||_p` equals `norm_target(n)` exactly for every `p`
/// including the sup norm.
pub fn synthetic_lp<S: Scalar>(
    name: impl Into<String>,
    norm_target: impl Fn(usize) -> S + Send + Sync + 'static,
) -> SequenceFamily<S> {
    SequenceFamily::new(
        name,
        Arc::new(move |n| {
            require_index(n, usize::MAX)?;
            let target = norm_target(n);
            if !target.is_finite() || target < S::zero() {
                return Err(Error::Unrealizable(format!(
                    "norm_target({n}) must be a finite non-negative real, got {target}"
                )));
            }
            Ok(StepRandomVariable::constant(ExtendedReal::from_real(
                target,
            )))
        }),
        StepRandomVariable::zero(),
        [ModeKind::Lp],
    )
}

/// Named decay rates, addressable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateSpec {
    #[serde(rename = "1/n")]
    InverseN,
    #[serde(rename = "1/n^2")]
    InverseNSquared,
    #[serde(rename = "zero")]
    Zero,
}

impl RateSpec {
    pub fn rate<S: Scalar>(self, n: usize) -> S {
        match self {
            RateSpec::InverseN => S::one() / S::of_usize(n),
            RateSpec::InverseNSquared => {
                let n = S::of_usize(n);
                S::one() / (n * n)
            }
            RateSpec::Zero => S::zero(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RateSpec::InverseN => "1/n",
            RateSpec::InverseNSquared => "1/n^2",
            RateSpec::Zero => "zero",
        }
    }
}

/// Named support shapes for the synthetic almost-sure family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportSpec {
    /// All of `[0, 1)`.
    Full,
    /// `[0, 1/2^min(n, 20))`.
    Shrinking,
}

impl SupportSpec {
    pub fn interval(self, n: usize) -> (DyadicRational, DyadicRational) {
        match self {
            SupportSpec::Full => (DyadicRational::zero(), DyadicRational::one()),
            SupportSpec::Shrinking => {
                let level = (n as u32).min(20);
                (
                    DyadicRational::zero(),
                    DyadicRational::new(1u64, level).expect("1/2^level is in range"),
                )
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SupportSpec::Full => "full",
            SupportSpec::Shrinking => "shrinking",
        }
    }
}

/// Config-addressable constructor for the synthetic almost-sure family.
pub fn synthetic_as_spec<S: Scalar>(decay: RateSpec, support: SupportSpec) -> SequenceFamily<S> {
    synthetic_as(
        format!("synthetic_as({}, {})", decay.label(), support.label()),
        move |n| decay.rate(n),
        move |n| support.interval(n),
    )
}

/// Config-addressable constructor for the synthetic `L_p` family.
pub fn synthetic_lp_spec<S: Scalar>(norm_target: RateSpec) -> SequenceFamily<S> {
    synthetic_lp(
        format!("synthetic_lp({})", norm_target.label()),
        move |n| norm_target.rate(n),
    )
}
