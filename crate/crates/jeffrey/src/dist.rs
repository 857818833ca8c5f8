//! Probability distributions over finite sets `{0, .., n-1}`.

use std::fmt;
use std::ops::Index;

use serde::de::{SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::{Result, SIMPLEX_TOL};

/// A real number extended with the two infinities.
///
/// Divergences and log-likelihoods on finite domains are finite except when a
/// support condition fails, and those failures carry meaning (`PosInf` for a
/// divergence, `NegInf` for a log-likelihood). Keeping them as explicit
/// variants instead of IEEE infinities makes the failure impossible to
/// confuse with an overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInf,
    NegInf,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, if there is one.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Collapse to `f64`, mapping the infinite variants to IEEE infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => f64::INFINITY,
            ExtendedReal::NegInf => f64::NEG_INFINITY,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(v)
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInf => write!(f, "inf"),
            ExtendedReal::NegInf => write!(f, "-inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => serializer.serialize_f64(*v),
            ExtendedReal::PosInf => serializer.serialize_str("inf"),
            ExtendedReal::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtendedReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\", or \"-inf\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::from(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<ExtendedReal, E> {
                Ok(ExtendedReal::Finite(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<ExtendedReal, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtendedReal::PosInf),
                    "-inf" => Ok(ExtendedReal::NegInf),
                    other => Err(E::custom(format!("unrecognized extended real: {other:?}"))),
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor)
    }
}

/// A probability distribution over `{0, .., len-1}`.
///
/// Construction validates (entries finite, within [`SIMPLEX_TOL`] of
/// non-negative, total within [`SIMPLEX_TOL`] of 1) and then renormalizes, so
/// a held `Dist` always sums to 1 up to floating rounding. Exact zero entries
/// survive renormalization exactly, which is what makes support bookkeeping
/// reliable downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    weights: Vec<f64>,
}

impl Dist {
    /// Validate and normalize a weight vector into a distribution.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteWeight { index, value });
            }
            if value < -SIMPLEX_TOL {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Self::scale_into(weights)
    }

    /// Normalize an arbitrary non-negative weight vector (any positive total).
    ///
    /// Used internally where sums are known to be positive but not near 1,
    /// e.g. posterior rows before division.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteWeight { index, value });
            }
            if value < -SIMPLEX_TOL {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        Self::scale_into(weights)
    }

    /// Wrap weights already known to sum to 1, without renormalizing.
    ///
    /// For internal re-embedding of a normalized distribution into a larger
    /// domain with exact zeros: renormalizing again would perturb the kept
    /// entries by an ulp.
    pub(crate) fn from_normalized_unchecked(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= crate::SIMPLEX_TOL);
        debug_assert!(weights.iter().all(|w| *w >= 0.0));
        Self { weights }
    }

    /// Validate weights that claim to be normalized already, keeping them
    /// bit-for-bit (tiny negatives are clamped to exact zero).
    ///
    /// This is the deserialization path: files written by this crate hold
    /// already-normalized weights, and renormalizing on load would perturb
    /// them by an ulp — enough to break byte-identical round trips.
    pub(crate) fn near_simplex(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight {
                    index,
                    value: *w,
                });
            }
            if *w < -SIMPLEX_TOL {
                return Err(Error::NegativeWeight {
                    index,
                    value: *w,
                });
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { weights })
    }

    fn scale_into(mut weights: Vec<f64>) -> Result<Self> {
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroMass);
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self { weights })
    }

    /// The uniform distribution over `n` points.
    ///
    /// Panics if `n == 0`; the caller picks `n`, so an empty domain is a bug.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs a nonempty domain");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// The point mass at `at` over `n` points.
    pub fn point(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass index out of range");
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }

    /// The empirical distribution of `samples` over `{0, .., domain_size-1}`:
    /// `weight(i) = count(i) / samples.len()`.
    pub fn from_samples(samples: &[usize], domain_size: usize) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::EmptyDistribution);
        }
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut counts = vec![0u64; domain_size];
        for &s in samples {
            if s >= domain_size {
                return Err(Error::SampleOutOfRange {
                    value: s,
                    domain_size,
                });
            }
            counts[s] += 1;
        }
        // raw counts: their float sum is exactly `samples.len()`, so the
        // single normalization divides each count by exactly n
        Self::normalized(counts.into_iter().map(|c| c as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices with strictly positive weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Shannon entropy in nats, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * w.ln())
            .sum::<f64>()
    }

    /// `sum_i |p(i) - q(i)|`.
    pub fn l1_distance(&self, other: &Dist) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DomainMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

impl Index<usize> for Dist {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct DistVisitor;

        impl<'de> Visitor<'de> for DistVisitor {
            type Value = Dist;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of probabilities summing to 1")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Dist, A::Error> {
                let mut weights = Vec::with_capacity(seq.size_hint().unwrap_or(0));
                while let Some(w) = seq.next_element::<f64>()? {
                    weights.push(w);
                }
                Dist::near_simplex(weights).map_err(serde::de::Error::custom)
            }
        }

        deserializer.deserialize_seq(DistVisitor)
    }
}

/// `KL(p || q) = sum_i p(i) log(p(i)/q(i))` in nats, with `0 log 0 = 0`.
///
/// `PosInf` when some `p(i) > 0` has `q(i) = 0`. A finite result is
/// mathematically non-negative; floating residue below zero is clamped to 0.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<ExtendedReal> {
    if p.len() != q.len() {
        return Err(Error::DomainMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.weights.iter().zip(&q.weights) {
        if pi > 0.0 {
            if qi == 0.0 {
                return Ok(ExtendedReal::PosInf);
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(ExtendedReal::Finite(total.max(0.0)))
}

/// `sum_y tau(y) log predicted(y)` in nats, with `0 log 0 = 0`.
///
/// `NegInf` when some observed `y` (`tau(y) > 0`) has `predicted(y) = 0`.
pub fn log_likelihood(tau: &Dist, predicted: &Dist) -> Result<ExtendedReal> {
    if tau.len() != predicted.len() {
        return Err(Error::DomainMismatch {
            expected: tau.len(),
            actual: predicted.len(),
        });
    }
    let mut total = 0.0;
    for (&ty, &py) in tau.weights.iter().zip(&predicted.weights) {
        if ty > 0.0 {
            if py == 0.0 {
                return Ok(ExtendedReal::NegInf);
            }
            total += ty * py.ln();
        }
    }
    Ok(ExtendedReal::Finite(total))
}
