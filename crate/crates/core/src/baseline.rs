//! Reference estimator: Levenberg-Marquardt on the joint maximum-likelihood
//! cost, started from the true target positions.
//!
//! Its result is a local minimizer next to the truth, which makes it a floor
//! for the achievable error rather than a practical estimator. The residuals
//! and the finite-difference Jacobian are computed here from scratch, so the
//! refiner does not share code with the cost module.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkTopology, Node, Position};
use crate::rss_sim::MeasurementSet;

const DISTANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    pub max_iters: usize,
    /// Forward-difference step, meters.
    pub gradient_step: f64,
    pub damping_init: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub tol: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        RefinerConfig {
            max_iters: 100,
            gradient_step: 1e-6,
            damping_init: 1e-3,
            tol: 1e-10,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.gradient_step > 0.0) {
            return Err(Error::param("gradient_step", "must be positive"));
        }
        if !(self.damping_init > 0.0) {
            return Err(Error::param("damping_init", "must be positive"));
        }
        Ok(())
    }
}

/// Whitened residual vector `(P - 10 gamma log10 d) / sigma` over every
/// measured ordered pair, as a function of the free target coordinates.
///
/// Targets without measurements are not free; they stay at `base`.
pub struct ResidualModel<'a> {
    topology: &'a NetworkTopology,
    measurements: &'a MeasurementSet,
    base: Vec<Position>,
    free: Vec<usize>,
}

impl<'a> ResidualModel<'a> {
    pub fn new(topology: &'a NetworkTopology, measurements: &'a MeasurementSet, base: Vec<Position>) -> Self {
        let free = (0..topology.num_targets())
            .filter(|&m| !measurements.for_target(m).is_empty())
            .collect();
        ResidualModel {
            topology,
            measurements,
            base,
            free,
        }
    }

    /// Indices of the targets whose coordinates are variables.
    pub fn free_targets(&self) -> &[usize] {
        &self.free
    }

    pub fn num_params(&self) -> usize {
        2 * self.free.len()
    }

    pub fn num_residuals(&self) -> usize {
        self.measurements.len()
    }

    /// Packs the free targets of `positions` into a parameter vector.
    pub fn pack(&self, positions: &[Position]) -> DVector<f64> {
        DVector::from_iterator(
            self.num_params(),
            self.free.iter().flat_map(|&m| [positions[m].x, positions[m].y]),
        )
    }

    pub fn unpack(&self, params: &DVector<f64>) -> Vec<Position> {
        let mut out = self.base.clone();
        for (i, &m) in self.free.iter().enumerate() {
            out[m] = Position::new(params[2 * i], params[2 * i + 1]);
        }
        out
    }

    pub fn residuals(&self, params: &DVector<f64>) -> DVector<f64> {
        let positions = self.unpack(params);
        let slope = 10.0 * self.measurements.gamma();
        let values = self.measurements.iter().map(|(from, m, o)| {
            let other = match from {
                Node::Anchor(n) => self.topology.anchors()[n],
                Node::Target(k) => positions[k],
            };
            let dx = positions[m].x - other.x;
            let dy = positions[m].y - other.y;
            let d = (dx * dx + dy * dy).sqrt().max(DISTANCE_FLOOR);
            (o.p - slope * d.log10()) * o.inv_var.sqrt()
        });
        DVector::from_iterator(self.num_residuals(), values)
    }

    /// Forward-difference Jacobian of [`Self::residuals`].
    pub fn jacobian(&self, params: &DVector<f64>, step: f64) -> DMatrix<f64> {
        let r0 = self.residuals(params);
        let mut jac = DMatrix::zeros(r0.len(), params.len());
        let mut shifted = params.clone();
        for j in 0..params.len() {
            shifted[j] = params[j] + step;
            let r = self.residuals(&shifted);
            jac.set_column(j, &((r - &r0) / step));
            shifted[j] = params[j];
        }
        jac
    }
}

/// Levenberg-Marquardt refinement of all target coordinates jointly,
/// starting at the true positions.
pub fn refine_from_truth(
    topology: &NetworkTopology,
    measurements: &MeasurementSet,
    config: &RefinerConfig,
) -> Result<Vec<Position>> {
    config.validate()?;
    let model = ResidualModel::new(topology, measurements, topology.targets().to_vec());
    let mut x = model.pack(topology.targets());
    let mut r = model.residuals(&x);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost { iteration: 0 });
    }
    let mut damping = config.damping_init;

    for iteration in 1..=config.max_iters {
        if cost == 0.0 || x.is_empty() {
            break;
        }
        let jac = model.jacobian(&x, config.gradient_step);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let gradient = &jt * &r;
        let floor = 1e-12 * normal.diagonal().max().max(1.0);

        let mut accepted = false;
        while damping < 1e16 {
            let mut lhs = normal.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += damping * normal[(i, i)].max(floor);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&gradient));
            let candidate = &x + step;
            let r_new = model.residuals(&candidate);
            let cost_new = r_new.norm_squared();
            if !cost_new.is_finite() {
                return Err(Error::NonFiniteCost { iteration });
            }
            if cost_new < cost {
                let decrease = (cost - cost_new) / cost;
                x = candidate;
                r = r_new;
                cost = cost_new;
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if decrease < config.tol {
                    return Ok(model.unpack(&x));
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(model.unpack(&x))
}
