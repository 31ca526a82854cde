//! Log-normal shadowing path-loss model and the synthetic measurement
//! generator.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkTopology, Node};

/// Parameters of `L = L0 + 10 gamma log10(d) + v`, reference distance 1 m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Path loss at the 1 m reference distance, dB.
    pub l0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Standard deviation of the shadowing noise, dB.
    pub sigma: f64,
    /// Per ordered pair `(from, target)` overrides of `sigma`.
    #[serde(skip)]
    pub per_edge_sigma: BTreeMap<(Node, usize), f64>,
    /// Use one noise draw for both directions of a target-target link.
    #[serde(default)]
    pub shared_pair_noise: bool,
}

impl PathLossParams {
    pub fn new(l0: f64, gamma: f64, sigma: f64) -> Self {
        PathLossParams {
            l0,
            gamma,
            sigma,
            per_edge_sigma: BTreeMap::new(),
            shared_pair_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !self.l0.is_finite() {
            return Err(Error::param("l0", "must be finite"));
        }
        let sigmas = std::iter::once(&self.sigma).chain(self.per_edge_sigma.values());
        for &s in sigmas {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::param("sigma", format!("must be non-negative, got {s}")));
            }
        }
        Ok(())
    }

    pub fn sigma_for(&self, from: Node, target: usize) -> f64 {
        self.per_edge_sigma
            .get(&(from, target))
            .copied()
            .unwrap_or(self.sigma)
    }
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams::new(40.0, 3.0, 4.0)
    }
}

/// Path loss in dB at distance `d` (meters) with an explicit noise term.
pub fn path_loss(d: f64, params: &PathLossParams, noise: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::param("d", format!("distance must be positive, got {d}")));
    }
    Ok(params.l0 + 10.0 * params.gamma * d.log10() + noise)
}

/// Inverse noise variance used to weight a residual. A noiseless edge
/// (`sigma == 0`) gets unit weight.
pub(crate) fn inverse_variance(sigma: f64) -> f64 {
    if sigma > 0.0 {
        1.0 / (sigma * sigma)
    } else {
        1.0
    }
}

/// One reference-subtracted observation `P = L - L0` made at a target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// The node on the other end of the link.
    pub from: Node,
    /// `L - L0`, dB.
    pub p: f64,
    pub sigma: f64,
    pub inv_var: f64,
}

/// All observations, grouped per target. Within a target the anchor links
/// come first (in anchor order), followed by target links.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    per_target: Vec<Vec<Observation>>,
    params: PathLossParams,
}

impl MeasurementSet {
    pub fn params(&self) -> &PathLossParams {
        &self.params
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn for_target(&self, m: usize) -> &[Observation] {
        &self.per_target[m]
    }

    pub fn num_targets(&self) -> usize {
        self.per_target.len()
    }

    #[cfg(test)]
    pub(crate) fn per_target_mut(&mut self) -> &mut [Vec<Observation>] {
        &mut self.per_target
    }

    pub fn get(&self, from: Node, target: usize) -> Option<&Observation> {
        self.per_target.get(target)?.iter().find(|o| o.from == from)
    }

    pub fn len(&self) -> usize {
        self.per_target.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(from, target, observation)` for every measured ordered pair.
    pub fn iter(&self) -> impl Iterator<Item = (Node, usize, &Observation)> + '_ {
        self.per_target
            .iter()
            .enumerate()
            .flat_map(|(m, obs)| obs.iter().map(move |o| (o.from, m, o)))
    }

    /// Whitespace-separated table `n m d_true P_nm`, one row per observation.
    pub fn write_table<W: Write>(&self, topology: &NetworkTopology, out: &mut W) -> io::Result<()> {
        writeln!(out, "n m d_true P_nm")?;
        for (from, m, o) in self.iter() {
            let d = topology.position(from).distance(&topology.targets()[m]);
            let n = match from {
                Node::Anchor(n) => format!("a{n}"),
                Node::Target(k) => format!("t{k}"),
            };
            writeln!(out, "{n} t{m} {d} {}", o.p)?;
        }
        Ok(())
    }
}

/// Draws one noisy observation for every connected ordered pair.
pub fn generate_measurements<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    params: &PathLossParams,
    rng: &mut R,
) -> Result<MeasurementSet> {
    params.validate()?;
    let targets = topology.targets();
    let mut per_target: Vec<Vec<Observation>> = Vec::with_capacity(targets.len());

    for (m, x) in targets.iter().enumerate() {
        let froms = topology
            .anchor_neighbors(m)
            .iter()
            .map(|&n| Node::Anchor(n))
            .chain(topology.target_neighbors(m).iter().map(|&k| Node::Target(k)));
        let mut obs = Vec::new();
        for from in froms {
            let d = topology.position(from).distance(x);
            if !(d > 0.0) {
                return Err(Error::CoincidentNodes { from, target: m });
            }
            let sigma = params.sigma_for(from, m);
            let reuse = match from {
                Node::Target(k) if params.shared_pair_noise && k < m => per_target[k]
                    .iter()
                    .find(|o| o.from == Node::Target(m))
                    .map(|o| o.p),
                _ => None,
            };
            let p = match reuse {
                Some(p) => p,
                None => {
                    let noise = if sigma > 0.0 {
                        Normal::new(0.0, sigma)
                            .expect("sigma validated")
                            .sample(rng)
                    } else {
                        0.0
                    };
                    10.0 * params.gamma * d.log10() + noise
                }
            };
            obs.push(Observation {
                from,
                p,
                sigma,
                inv_var: inverse_variance(sigma),
            });
        }
        per_target.push(obs);
    }

    Ok(MeasurementSet {
        per_target,
        params: params.clone(),
    })
}
