//! Discrete channels: row-stochastic matrices, push-forward, Bayesian
//! inversion, joints, and the support predicates that govern when inversion
//! is defined.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::Dist;
use crate::error::Error;
use crate::Result;

/// A discrete channel from `N` inputs to `M` outputs.
///
/// Row `x` is the conditional distribution over outputs given input `x`;
/// `rows[x][y]` is `C(y|x)`. Rows are validated and renormalized on
/// construction, so each row sums to 1 up to floating rounding and zero
/// entries are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyChannel);
        }
        let m = rows[0].len();
        let mut out = Vec::with_capacity(rows.len());
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedChannel {
                    row: x,
                    len: row.len(),
                    expected: m,
                });
            }
            let row = Dist::new(row).map_err(|e| Error::InvalidChannelRow {
                row: x,
                source: Box::new(e),
            })?;
            out.push(row.weights().to_vec());
        }
        Ok(Self { rows: out })
    }

    /// The n×n channel that copies its input.
    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|x| {
                let mut row = vec![0.0; n];
                row[x] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    /// The channel whose every row is uniform over `m` outputs.
    pub fn uniform(n: usize, m: usize) -> Self {
        assert!(n > 0 && m > 0, "channel dimensions must be positive");
        Self {
            rows: vec![vec![1.0 / m as f64; m]; n],
        }
    }

    pub fn input_count(&self) -> usize {
        self.rows.len()
    }

    pub fn output_count(&self) -> usize {
        self.rows[0].len()
    }

    /// `C(y|x)`.
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    fn check_input_dim(&self, theta: &Dist) -> Result<()> {
        if theta.len() != self.input_count() {
            return Err(Error::DomainMismatch {
                expected: self.input_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn check_output_dim(&self, tau: &Dist) -> Result<()> {
        if tau.len() != self.output_count() {
            return Err(Error::DomainMismatch {
                expected: self.output_count(),
                actual: tau.len(),
            });
        }
        Ok(())
    }

    /// The output distribution `y ↦ Σ_x θ(x) C(y|x)` induced by prior `theta`.
    pub fn push_forward(&self, theta: &Dist) -> Result<Dist> {
        self.check_input_dim(theta)?;
        let m = self.output_count();
        let mut weights = vec![0.0; m];
        for (x, row) in self.rows.iter().enumerate() {
            let t = theta[x];
            for (w, &c) in weights.iter_mut().zip(row) {
                *w += t * c;
            }
        }
        Dist::normalized(weights)
    }

    /// The likelihood of output `y` as a function of the input:
    /// the vector `x ↦ C(y|x)`. Not normalized.
    pub fn likelihood_column(&self, y: usize) -> Result<Vec<f64>> {
        if y >= self.output_count() {
            return Err(Error::OutputOutOfRange {
                index: y,
                size: self.output_count(),
            });
        }
        Ok(self.rows.iter().map(|row| row[y]).collect())
    }

    /// Bayesian inversion of the channel under prior `theta`.
    ///
    /// Row `y` of the result is the posterior `x ↦ θ(x)C(y|x) / p_θ(y)`,
    /// defined exactly when the predictive mass `p_θ(y)` is positive;
    /// outputs the prior cannot produce get an explicitly undefined row.
    pub fn invert(&self, theta: &Dist) -> Result<InverseChannel> {
        self.check_input_dim(theta)?;
        let predictive = self.push_forward(theta)?;
        let m = self.output_count();
        let mut rows = Vec::with_capacity(m);
        for y in 0..m {
            let raw: Vec<f64> = self.rows.iter().enumerate().map(|(x, r)| theta[x] * r[y]).collect();
            if raw.iter().sum::<f64>() > 0.0 {
                rows.push(Some(Dist::normalized(raw)?));
            } else {
                rows.push(None);
            }
        }
        Ok(InverseChannel {
            rows,
            predictive,
            base_prior: theta.clone(),
        })
    }

    /// The joint distribution `p(x,y) = θ(x) C(y|x)`.
    pub fn joint(&self, theta: &Dist) -> Result<Joint> {
        self.check_input_dim(theta)?;
        let entries = self
            .rows
            .iter()
            .enumerate()
            .map(|(x, row)| row.iter().map(|&c| theta[x] * c).collect())
            .collect();
        Ok(Joint { entries })
    }

    /// True iff the predictive distribution charges every output.
    pub fn has_full_image(&self, theta: &Dist) -> Result<bool> {
        let predictive = self.push_forward(theta)?;
        Ok(predictive.weights().iter().all(|&p| p > 0.0))
    }

    /// True iff every observed output is predicted with positive probability:
    /// `support(tau) ⊆ support(push_forward(theta))`.
    pub fn is_plausible(&self, theta: &Dist, tau: &Dist) -> Result<bool> {
        self.check_output_dim(tau)?;
        let predictive = self.push_forward(theta)?;
        Ok(tau
            .weights()
            .iter()
            .zip(predictive.weights())
            .all(|(&t, &p)| t == 0.0 || p > 0.0))
    }

    /// Drop the inputs that cannot have produced any observed output — the
    /// rows `x` with no `y` satisfying `τ(y) > 0` and `C(y|x) > 0`.
    ///
    /// Returns the reduced channel and the kept-index map (new index →
    /// original index) so estimates can be re-embedded into the original
    /// domain. Errors when nothing survives.
    pub fn prune_inputs(&self, tau: &Dist) -> Result<(Channel, Vec<usize>)> {
        self.check_output_dim(tau)?;
        let kept: Vec<usize> = (0..self.input_count())
            .filter(|&x| {
                self.rows[x]
                    .iter()
                    .zip(tau.weights())
                    .any(|(&c, &t)| t > 0.0 && c > 0.0)
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::AllInputsPruned);
        }
        let rows = kept.iter().map(|&x| self.rows[x].clone()).collect();
        Ok((Channel { rows }, kept))
    }

    /// Parse a comma-separated matrix, one input row per line. A first line
    /// that fails to parse as numbers is treated as a header and skipped.
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut first_data_line = true;
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => {
                    rows.push(row);
                    first_data_line = false;
                }
                Err(e) => {
                    if first_data_line {
                        // header
                        first_data_line = false;
                        continue;
                    }
                    return Err(Error::ChannelParse(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::ChannelParse("no data rows".into()));
        }
        Channel::new(rows)
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    n: usize,
    m: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for Channel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelRepr {
            n: self.input_count(),
            m: self.output_count(),
            rows: self.rows.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ChannelRepr::deserialize(deserializer)?;
        if repr.rows.len() != repr.n {
            return Err(D::Error::custom(format!(
                "channel declares n={} but has {} rows",
                repr.n,
                repr.rows.len()
            )));
        }
        if let Some(bad) = repr.rows.iter().find(|r| r.len() != repr.m) {
            return Err(D::Error::custom(format!(
                "channel declares m={} but a row has {} entries",
                repr.m,
                bad.len()
            )));
        }
        // rows in a serialized channel are already normalized; validate them
        // without renormalizing so loads keep the written bits
        let rows = repr
            .rows
            .into_iter()
            .enumerate()
            .map(|(x, row)| {
                Ok(Dist::near_simplex(row)
                    .map_err(|e| Error::InvalidChannelRow {
                        row: x,
                        source: Box::new(e),
                    })?
                    .weights()
                    .to_vec())
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        if rows.is_empty() || rows[0].is_empty() {
            return Err(D::Error::custom(Error::EmptyChannel));
        }
        Ok(Channel { rows })
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{} channel", self.input_count(), self.output_count())
    }
}

/// The Bayesian inversion of a channel under a fixed prior: a map from
/// outputs back to posterior distributions over inputs.
///
/// Rows are indexed by output; a row is `None` when the prior gives that
/// output zero predictive mass (the posterior is undefined there, and
/// [`InverseChannel::apply`] errors only if the observations actually charge
/// such an output).
#[derive(Debug, Clone)]
pub struct InverseChannel {
    rows: Vec<Option<Dist>>,
    predictive: Dist,
    base_prior: Dist,
}

impl InverseChannel {
    pub fn input_count(&self) -> usize {
        self.base_prior.len()
    }

    pub fn output_count(&self) -> usize {
        self.rows.len()
    }

    /// Posterior over inputs given output `y`, if defined.
    pub fn row(&self, y: usize) -> Option<&Dist> {
        self.rows[y].as_ref()
    }

    /// The prior the inversion was taken at.
    pub fn base_prior(&self) -> &Dist {
        &self.base_prior
    }

    /// The predictive output distribution of the base prior.
    pub fn predictive(&self) -> &Dist {
        &self.predictive
    }

    /// Map an output distribution back through the inversion:
    /// `x ↦ Σ_y τ(y) · posterior_y(x)`.
    ///
    /// Undefined rows are only an error where `tau` actually has mass.
    pub fn apply(&self, tau: &Dist) -> Result<Dist> {
        if tau.len() != self.output_count() {
            return Err(Error::DomainMismatch {
                expected: self.output_count(),
                actual: tau.len(),
            });
        }
        let charged_undefined: Vec<usize> = (0..self.output_count())
            .filter(|&y| tau[y] > 0.0 && self.rows[y].is_none())
            .collect();
        if !charged_undefined.is_empty() {
            return Err(Error::Implausible {
                outputs: charged_undefined,
            });
        }
        let mut weights = vec![0.0; self.input_count()];
        for (y, row) in self.rows.iter().enumerate() {
            let t = tau[y];
            if t == 0.0 {
                continue;
            }
            let row = row.as_ref().expect("charged rows checked above");
            for (w, &r) in weights.iter_mut().zip(row.weights()) {
                *w += t * r;
            }
        }
        Dist::normalized(weights)
    }
}

/// A joint distribution on input×output pairs, `p(x,y) = θ(x) C(y|x)`.
/// Entries are the raw products; the total is 1 up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    entries: Vec<Vec<f64>>,
}

impl Joint {
    pub fn input_count(&self) -> usize {
        self.entries.len()
    }

    pub fn output_count(&self) -> usize {
        self.entries[0].len()
    }

    /// `p(x,y)`.
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.entries[x][y]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: &[f64]) -> Dist {
        Dist::new(w.to_vec()).unwrap()
    }

    fn fixture() -> Channel {
        Channel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn new_validates_rows() {
        assert!(matches!(Channel::new(vec![]), Err(Error::EmptyChannel)));
        assert!(matches!(
            Channel::new(vec![vec![]]),
            Err(Error::EmptyChannel)
        ));
        assert!(matches!(
            Channel::new(vec![vec![1.0], vec![0.5, 0.5]]),
            Err(Error::RaggedChannel { row: 1, .. })
        ));
        assert!(matches!(
            Channel::new(vec![vec![0.6, 0.6]]),
            Err(Error::InvalidChannelRow { row: 0, .. })
        ));
    }

    #[test]
    fn push_forward_values() {
        // identity: push-forward is the prior itself
        let c = Channel::identity(2);
        let p = c.push_forward(&d(&[0.3, 0.7])).unwrap();
        assert_eq!(p.weights(), &[0.3, 0.7]);

        // frozen: mixture of the fixture's rows at equal weight
        let p = fixture().push_forward(&d(&[0.5, 0.5])).unwrap();
        assert!((p[0] - 0.55).abs() < 1e-12);
        assert!((p[1] - 0.45).abs() < 1e-12);

        // uniform channel: rows identical, push-forward uniform
        let c = Channel::uniform(3, 2);
        let p = c.push_forward(&d(&[0.2, 0.5, 0.3])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);

        assert!(c.push_forward(&d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn likelihood_column_reads_off_columns() {
        let c = Channel::identity(2);
        assert_eq!(c.likelihood_column(0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(fixture().likelihood_column(1).unwrap(), vec![0.1, 0.8]);
        let u = Channel::uniform(3, 2);
        assert_eq!(u.likelihood_column(0).unwrap(), vec![0.5, 0.5, 0.5]);
        assert!(matches!(
            u.likelihood_column(2),
            Err(Error::OutputOutOfRange { index: 2, size: 2 })
        ));
    }

    #[test]
    fn invert_identity_is_identity() {
        let c = Channel::identity(2);
        let inv = c.invert(&d(&[0.4, 0.6])).unwrap();
        assert_eq!(inv.row(0).unwrap().weights(), &[1.0, 0.0]);
        assert_eq!(inv.row(1).unwrap().weights(), &[0.0, 1.0]);
    }

    #[test]
    fn invert_fixture_matches_frozen_posteriors() {
        let inv = fixture().invert(&d(&[0.5, 0.5])).unwrap();
        // frozen: (9/11, 2/11) and (1/9, 8/9)
        let r0 = inv.row(0).unwrap();
        assert!((r0[0] - 0.8181818181818181).abs() < 1e-15);
        assert!((r0[1] - 0.18181818181818182).abs() < 1e-15);
        let r1 = inv.row(1).unwrap();
        assert!((r1[0] - 0.11111111111111112).abs() < 1e-15);
        assert!((r1[1] - 0.888888888888889).abs() < 1e-14);
    }

    #[test]
    fn invert_uninformative_channel_returns_prior() {
        let c = Channel::uniform(2, 3);
        let theta = d(&[0.3, 0.7]);
        let inv = c.invert(&theta).unwrap();
        for y in 0..3 {
            let row = inv.row(y).unwrap();
            assert!((row[0] - 0.3).abs() < 1e-15);
            assert!((row[1] - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn invert_marks_unreachable_outputs_undefined() {
        let c = Channel::identity(2);
        let inv = c.invert(&d(&[1.0, 0.0])).unwrap();
        assert!(inv.row(0).is_some());
        assert!(inv.row(1).is_none());
        assert_eq!(inv.predictive().weights(), &[1.0, 0.0]);
    }

    #[test]
    fn apply_inverse_values() {
        // identity: recovers tau
        let inv = Channel::identity(2).invert(&d(&[0.5, 0.5])).unwrap();
        let out = inv.apply(&d(&[0.75, 0.25])).unwrap();
        assert_eq!(out.weights(), &[0.75, 0.25]);

        // frozen: equal mixture of the fixture posteriors = (46/99, 53/99)
        let inv = fixture().invert(&d(&[0.5, 0.5])).unwrap();
        let out = inv.apply(&d(&[0.5, 0.5])).unwrap();
        assert!((out[0] - 0.46464646464646464).abs() < 1e-15);
        assert!((out[1] - 0.5353535353535354).abs() < 1e-15);

        // point mass picks out a single posterior row
        let out = inv.apply(&Dist::point(2, 1)).unwrap();
        assert_eq!(out.weights(), inv.row(1).unwrap().weights());
    }

    #[test]
    fn apply_inverse_errors_only_on_charged_undefined_rows() {
        let inv = Channel::identity(2).invert(&d(&[1.0, 0.0])).unwrap();
        // tau avoids the undefined row: fine
        let out = inv.apply(&d(&[1.0, 0.0])).unwrap();
        assert_eq!(out.weights(), &[1.0, 0.0]);
        // tau charges it: plausibility violation naming the output
        match inv.apply(&d(&[0.5, 0.5])) {
            Err(Error::Implausible { outputs }) => assert_eq!(outputs, vec![1]),
            other => panic!("expected implausibility error, got {other:?}"),
        }
    }

    #[test]
    fn joint_values() {
        let j = Channel::identity(2).joint(&d(&[0.3, 0.7])).unwrap();
        assert_eq!(j.prob(0, 0), 0.3);
        assert_eq!(j.prob(0, 1), 0.0);
        assert_eq!(j.prob(1, 1), 0.7);

        // frozen: entrywise product for the fixture
        let j = fixture().joint(&d(&[0.5, 0.5])).unwrap();
        for (x, y, want) in [(0, 0, 0.45), (0, 1, 0.05), (1, 0, 0.1), (1, 1, 0.4)] {
            assert!((j.prob(x, y) - want).abs() < 1e-15);
        }
        assert!((j.total() - 1.0).abs() < 1e-12);

        // point-mass prior: single row survives
        let j = fixture().joint(&Dist::point(2, 1)).unwrap();
        assert_eq!(j.prob(0, 0), 0.0);
        assert_eq!(j.prob(1, 0), 0.2);
    }

    #[test]
    fn full_image_predicate() {
        let c = Channel::identity(2);
        assert!(c.has_full_image(&d(&[0.5, 0.5])).unwrap());
        assert!(!c.has_full_image(&d(&[1.0, 0.0])).unwrap());
        assert!(fixture().has_full_image(&d(&[1.0, 0.0])).unwrap());
    }

    #[test]
    fn plausibility_predicate() {
        let c = Channel::identity(2);
        assert!(c.is_plausible(&d(&[0.5, 0.5]), &d(&[0.0, 1.0])).unwrap());
        assert!(c.is_plausible(&d(&[1.0, 0.0]), &d(&[1.0, 0.0])).unwrap());
        assert!(!c.is_plausible(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap());
    }

    #[test]
    fn prune_keeps_rows_that_can_explain_observations() {
        // strictly positive channel: nothing pruned
        let c = fixture();
        let (r, kept) = c.prune_inputs(&d(&[0.0, 1.0])).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(r, c);

        // identity with tau on output 0: only input 0 survives
        let c = Channel::identity(2);
        let (r, kept) = c.prune_inputs(&d(&[1.0, 0.0])).unwrap();
        assert_eq!(kept, vec![0]);
        assert_eq!(r.input_count(), 1);
        assert_eq!(r.output_count(), 2);

        // mixed rows: the pruning predicate applied row by row
        let c = Channel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let (_, kept) = c.prune_inputs(&d(&[0.0, 1.0])).unwrap();
        assert_eq!(kept, vec![1, 2]);
    }

    #[test]
    fn prune_errors_when_nothing_survives() {
        let c = Channel::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            c.prune_inputs(&d(&[0.0, 1.0])),
            Err(Error::AllInputsPruned)
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = fixture();
        let s = serde_json::to_string(&c).unwrap();
        let back: Channel = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);

        let ok: Channel =
            serde_json::from_str(r#"{"n":2,"m":2,"rows":[[0.9,0.1],[0.2,0.8]]}"#).unwrap();
        assert_eq!(ok, c);

        // declared dimensions must match the data
        assert!(serde_json::from_str::<Channel>(r#"{"n":3,"m":2,"rows":[[1.0,0.0]]}"#).is_err());
        assert!(serde_json::from_str::<Channel>(r#"{"n":1,"m":3,"rows":[[1.0,0.0]]}"#).is_err());
        // rows must be distributions
        assert!(serde_json::from_str::<Channel>(r#"{"n":1,"m":2,"rows":[[0.9,0.9]]}"#).is_err());
    }

    #[test]
    fn csv_parsing() {
        let c = Channel::from_csv_str("0.9,0.1\n0.2,0.8\n").unwrap();
        assert_eq!(c, fixture());

        // header tolerated
        let c = Channel::from_csv_str("y0,y1\n0.9, 0.1\n0.2, 0.8").unwrap();
        assert_eq!(c, fixture());

        assert!(Channel::from_csv_str("").is_err());
        assert!(Channel::from_csv_str("a,b\nc,d\n").is_err());
        assert!(Channel::from_csv_str("0.9,0.3\n").is_err());
    }
}
