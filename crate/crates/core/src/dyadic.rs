use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact dyadic rational `numer / 2^log2_denom` in `[0, 1]`.
///
/// Stored in canonical form: the numerator is odd, or the exponent is zero.
/// Canonical form makes structural equality coincide with numeric equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numer: BigUint,
    log2_denom: u32,
}

impl DyadicRational {
    pub fn new(numer: impl Into<BigUint>, log2_denom: u32) -> Result<Self> {
        let mut numer: BigUint = numer.into();
        let mut log2_denom = log2_denom;
        while log2_denom > 0 && !numer.is_zero() && !numer.bit(0) {
            numer >>= 1;
            log2_denom -= 1;
        }
        if numer.is_zero() {
            log2_denom = 0;
        }
        let value = Self { numer, log2_denom };
        if value.numer.bits() > u64::from(log2_denom) + 1 || value > Self::one() {
            return Err(Error::DyadicOutOfRange(value.to_string()));
        }
        Ok(value)
    }

    pub fn zero() -> Self {
        Self {
            numer: BigUint::zero(),
            log2_denom: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            numer: BigUint::one(),
            log2_denom: 0,
        }
    }

    pub fn numer(&self) -> &BigUint {
        &self.numer
    }

    pub fn log2_denom(&self) -> u32 {
        self.log2_denom
    }

    pub fn is_zero(&self) -> bool {
        self.numer.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.log2_denom == 0 && self.numer.is_one()
    }

    /// `self - other`, or `None` when `other > self`.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        if other > self {
            return None;
        }
        let level = self.log2_denom.max(other.log2_denom);
        let a = &self.numer << (level - self.log2_denom);
        let b = &other.numer << (level - other.log2_denom);
        Some(Self::new(a - b, level).expect("difference of values in [0,1] stays in [0,1]"))
    }

    pub fn to_rational(&self) -> BigRational {
        let denom = BigInt::one() << self.log2_denom;
        BigRational::new(BigInt::from(self.numer.clone()), denom)
    }

    /// Exact for every breakpoint this crate produces (numerators below 2^53).
    pub fn to_f64(&self) -> f64 {
        match self.numer.to_f64() {
            Some(n) => n * 2.0f64.powi(-(self.log2_denom as i32)),
            None => self.to_rational().to_f64().unwrap_or(f64::NAN),
        }
    }
}

/// Numerator aligned to a common power-of-two level, on a u128 fast path.
fn aligned(n: &BigUint, shift: u32) -> Option<u128> {
    if n.bits() + u64::from(shift) <= 127 {
        n.to_u128().map(|v| v << shift)
    } else {
        None
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let level = self.log2_denom.max(other.log2_denom);
        let (sa, sb) = (level - self.log2_denom, level - other.log2_denom);
        match (aligned(&self.numer, sa), aligned(&other.numer, sb)) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => (&self.numer << sa).cmp(&(&other.numer << sb)),
        }
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_denom == 0 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/2^{}", self.numer, self.log2_denom)
        }
    }
}

impl FromStr for DyadicRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: &str| Error::Parse {
            what: "dyadic rational",
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let s = s.trim();
        match s.split_once('/') {
            None => {
                let numer: BigUint = s.parse().map_err(|_| parse_err("not an integer"))?;
                Self::new(numer, 0)
            }
            Some((num_str, den_str)) => {
                let numer: BigUint = num_str
                    .trim()
                    .parse()
                    .map_err(|_| parse_err("numerator is not an integer"))?;
                let den_str = den_str.trim();
                let log2_denom = if let Some(exp) = den_str.strip_prefix("2^") {
                    exp.parse::<u32>()
                        .map_err(|_| parse_err("exponent is not an integer"))?
                } else {
                    let denom: BigUint = den_str
                        .parse()
                        .map_err(|_| parse_err("denominator is not an integer"))?;
                    if denom.is_zero() || (&denom & (&denom - 1u32)) != BigUint::zero() {
                        return Err(parse_err("denominator is not a power of two"));
                    }
                    (denom.bits() - 1) as u32
                };
                Self::new(numer, log2_denom)
            }
        }
    }
}

impl Serialize for DyadicRational {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact accumulator for sums of dyadic interval lengths.
#[derive(Debug, Clone)]
pub(crate) struct DyadicSum {
    numer: BigUint,
    log2_denom: u32,
}

impl DyadicSum {
    pub fn zero() -> Self {
        Self {
            numer: BigUint::zero(),
            log2_denom: 0,
        }
    }

    pub fn add(&mut self, d: &DyadicRational) {
        let level = self.log2_denom.max(d.log2_denom);
        if level > self.log2_denom {
            self.numer <<= level - self.log2_denom;
            self.log2_denom = level;
        }
        self.numer += &d.numer << (level - d.log2_denom);
    }

    pub fn into_rational(self) -> BigRational {
        let denom = BigInt::one() << self.log2_denom;
        BigRational::new(BigInt::from(self.numer), denom)
    }
}
