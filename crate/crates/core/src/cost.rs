//! Maximum-likelihood cost of a localization hypothesis, both per target and
//! for the whole network.

use crate::error::{Error, Result};
use crate::network::{NetworkTopology, Node, Position};
use crate::rss_sim::MeasurementSet;

/// Lower bound applied to distances before taking the logarithm.
pub const DEFAULT_DISTANCE_CLAMP: f64 = 1e-6;

/// Current position estimate of every target, exchanged between the
/// per-target populations.
#[derive(Clone, Debug, PartialEq)]
pub struct SharingMatrix {
    estimates: Vec<Position>,
    pub generation: usize,
}

impl SharingMatrix {
    pub fn new(estimates: Vec<Position>) -> Self {
        SharingMatrix {
            estimates,
            generation: 0,
        }
    }

    pub fn estimates(&self) -> &[Position] {
        &self.estimates
    }

    pub fn get(&self, m: usize) -> Position {
        self.estimates[m]
    }

    pub fn set(&mut self, m: usize, estimate: Position) {
        self.estimates[m] = estimate;
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

/// Topology plus measurements: everything the estimator is allowed to see.
#[derive(Clone, Copy, Debug)]
pub struct LocalizationProblem<'a> {
    pub topology: &'a NetworkTopology,
    pub measurements: &'a MeasurementSet,
    pub distance_clamp: f64,
}

impl<'a> LocalizationProblem<'a> {
    pub fn new(topology: &'a NetworkTopology, measurements: &'a MeasurementSet) -> Self {
        LocalizationProblem {
            topology,
            measurements,
            distance_clamp: DEFAULT_DISTANCE_CLAMP,
        }
    }

    pub fn with_distance_clamp(mut self, clamp: f64) -> Self {
        self.distance_clamp = clamp;
        self
    }

    pub fn num_targets(&self) -> usize {
        self.topology.num_targets()
    }

    /// `f_m(candidate)`, with target neighbors placed at `neighbors[k]`.
    /// Target `m` must not be degenerate.
    #[inline]
    pub(crate) fn target_cost(&self, m: usize, candidate: &Position, neighbors: &[Position]) -> f64 {
        let slope = 10.0 * self.measurements.gamma();
        let anchors = self.topology.anchors();
        self.measurements
            .for_target(m)
            .iter()
            .map(|o| {
                let other = match o.from {
                    Node::Anchor(n) => &anchors[n],
                    Node::Target(k) => &neighbors[k],
                };
                let d = candidate.distance(other).max(self.distance_clamp);
                let r = o.p - slope * d.log10();
                o.inv_var * r * r
            })
            .sum()
    }

    pub fn per_target_cost(
        &self,
        m: usize,
        candidate: &Position,
        sharing: &SharingMatrix,
    ) -> Result<f64> {
        self.check_target(m)?;
        if sharing.len() != self.num_targets() {
            return Err(Error::DimensionMismatch(format!(
                "sharing matrix has {} entries for {} targets",
                sharing.len(),
                self.num_targets()
            )));
        }
        Ok(self.target_cost(m, candidate, sharing.estimates()))
    }

    /// Sum of all per-target costs, with target-target distances taken
    /// between the candidates themselves.
    pub fn global_cost(&self, candidates: &[Position]) -> Result<f64> {
        if candidates.len() != self.num_targets() {
            return Err(Error::DimensionMismatch(format!(
                "{} candidates for {} targets",
                candidates.len(),
                self.num_targets()
            )));
        }
        (0..self.num_targets())
            .map(|m| {
                self.check_target(m)?;
                Ok(self.target_cost(m, &candidates[m], candidates))
            })
            .sum()
    }

    fn check_target(&self, m: usize) -> Result<()> {
        if m >= self.num_targets() {
            return Err(Error::DimensionMismatch(format!(
                "target index {m} out of range for {} targets",
                self.num_targets()
            )));
        }
        if self.measurements.for_target(m).is_empty() {
            return Err(Error::DegenerateTarget(m));
        }
        Ok(())
    }
}

pub fn per_target_cost(
    m: usize,
    candidate: &Position,
    measurements: &MeasurementSet,
    topology: &NetworkTopology,
    sharing: &SharingMatrix,
) -> Result<f64> {
    LocalizationProblem::new(topology, measurements).per_target_cost(m, candidate, sharing)
}

pub fn global_cost(
    candidates: &[Position],
    measurements: &MeasurementSet,
    topology: &NetworkTopology,
) -> Result<f64> {
    LocalizationProblem::new(topology, measurements).global_cost(candidates)
}
