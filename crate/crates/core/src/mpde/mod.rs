//! Multi-population differential evolution.
//!
//! Every target gets its own population of two-gene individuals. Populations
//! only interact through the [`SharingMatrix`]: target-target terms of a
//! target's cost, and the anchoring of its trials, use the current estimates
//! of its neighbors.
//!
//! One generation visits the populations in index order. Each population
//! builds a trial for every member (mutation, crossover, anchoring,
//! redirection), keeps the trial if it is strictly better, and then publishes
//! its best member to the sharing matrix so that later populations in the
//! same generation already see it. With [`DeConfig::jacobi_sharing`] the
//! publication is deferred to the start of the next generation instead, and
//! populations become independent within a generation.

mod operators;

pub use operators::{
    anchor, crossover, mutate, opposite_candidate, polar_offset, primary_candidate, redirect,
    select, Individual, RedirectionArea,
};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{LocalizationProblem, SharingMatrix, DEFAULT_DISTANCE_CLAMP};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{Aoi, Position};
use crate::seeding;

/// How a final estimate is read off a population.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finalize {
    /// Lowest-cost member.
    #[default]
    BestIndividual,
    /// Coordinate-wise mean of all members.
    Midpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    /// Individuals per population.
    pub pop_size: usize,
    /// Differential weight of the mutation.
    pub scale: f64,
    /// Per-gene probability of taking the mutant's gene.
    pub crossover: f64,
    pub generations: usize,
    pub finalize: Finalize,
    pub seed: u64,
    pub distance_clamp: f64,
    /// Publish estimates only between generations.
    pub jacobi_sharing: bool,
    /// Population-level parallelism; only effective with `jacobi_sharing`.
    pub execution: Execution,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            pop_size: 10,
            scale: 0.9,
            crossover: 0.9,
            generations: 50,
            finalize: Finalize::BestIndividual,
            seed: 0,
            distance_clamp: DEFAULT_DISTANCE_CLAMP,
            jacobi_sharing: false,
            execution: Execution::Sequential,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 {
            return Err(Error::param(
                "pop_size",
                format!("mutation needs at least 4 individuals, got {}", self.pop_size),
            ));
        }
        if !(self.scale > 0.0 && self.scale <= 2.0) {
            return Err(Error::param("scale", format!("must lie in (0, 2], got {}", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::param(
                "crossover",
                format!("must lie in [0, 1], got {}", self.crossover),
            ));
        }
        if self.generations < 1 {
            return Err(Error::param("generations", "must be at least 1"));
        }
        if !(self.distance_clamp > 0.0) {
            return Err(Error::param("distance_clamp", "must be positive"));
        }
        Ok(())
    }
}

/// The individuals working on one target, with cached costs.
#[derive(Clone, Debug)]
pub struct Population {
    members: Vec<Individual>,
    fitness: Vec<f64>,
    /// Neighbor estimates the cached fitness was computed with.
    scored_with: Vec<Position>,
    rng: ChaCha8Rng,
}

impl Population {
    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    /// Index of the lowest-cost member; the first one on ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (l, &f) in self.fitness.iter().enumerate().skip(1) {
            if f < self.fitness[best] {
                best = l;
            }
        }
        best
    }

    pub fn best(&self) -> Individual {
        self.members[self.best_index()]
    }

    pub fn midpoint(&self) -> Individual {
        Position::mean(&self.members).expect("populations are never empty")
    }

    fn rescore(&mut self, m: usize, problem: &LocalizationProblem<'_>, estimates: &[Position]) {
        for (x, f) in self.members.iter().zip(self.fitness.iter_mut()) {
            *f = problem.target_cost(m, x, estimates);
        }
        self.scored_with = neighbor_snapshot(problem, m, estimates);
    }

    /// Brings the cached costs up to date with the given estimates.
    fn refresh(&mut self, m: usize, problem: &LocalizationProblem<'_>, estimates: &[Position]) {
        let current = problem
            .topology
            .target_neighbors(m)
            .iter()
            .map(|&k| estimates[k]);
        if !current.eq(self.scored_with.iter().copied()) {
            self.rescore(m, problem, estimates);
        }
    }

    /// One round of variation and selection against fixed neighbor estimates.
    fn evolve(
        &mut self,
        m: usize,
        problem: &LocalizationProblem<'_>,
        estimates: &[Position],
        config: &DeConfig,
    ) {
        self.refresh(m, problem, estimates);
        let topology = problem.topology;
        let aoi = topology.aoi();
        let area = RedirectionArea::of(&self.members);
        let mut next = self.members.clone();
        let rng = &mut self.rng;
        for l in 0..self.members.len() {
            let mutant = mutate(&self.members, l, config.scale, rng);
            let trial = crossover(&self.members[l], &mutant, config.crossover, rng);
            let anchored = anchor(&trial, m, topology, estimates, rng);
            let challenger = area.apply(&anchored, aoi, rng);
            let f = problem.target_cost(m, &challenger, estimates);
            if operators::replaces(self.fitness[l], f) {
                next[l] = challenger;
                self.fitness[l] = f;
            }
        }
        self.members = next;
    }
}

fn neighbor_snapshot(problem: &LocalizationProblem<'_>, m: usize, estimates: &[Position]) -> Vec<Position> {
    problem
        .topology
        .target_neighbors(m)
        .iter()
        .map(|&k| estimates[k])
        .collect()
}

/// All populations, the sharing matrix and the generation counter.
#[derive(Clone, Debug)]
pub struct PopulationState {
    populations: Vec<Population>,
    sharing: SharingMatrix,
    generation: usize,
    degenerate: Vec<bool>,
    aoi: Aoi,
}

impl PopulationState {
    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    pub fn sharing(&self) -> &SharingMatrix {
        &self.sharing
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Targets without measurements; they are pinned at the area center.
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    /// Evolves population `m` once against the current sharing matrix,
    /// without publishing its new best member.
    pub fn evolve_population(&mut self, m: usize, problem: &LocalizationProblem<'_>, config: &DeConfig) {
        if !self.degenerate[m] {
            self.populations[m].evolve(m, problem, self.sharing.estimates(), config);
        }
    }

    fn publish(&mut self, m: usize) {
        if !self.degenerate[m] {
            self.sharing.set(m, self.populations[m].best());
        }
    }
}

/// Builds the initial populations with opposition-based learning.
///
/// For every target, `L` primary candidates and their `L` opposites are
/// drawn. Initial genes that fall outside the area are redirected into the
/// in-area gene range of the same candidate set. The sharing matrix is seeded
/// with each set's mean, all `2L` candidates are scored, the best `L` are
/// kept, and finally the sharing matrix is reset to each population's best.
pub fn init_populations(problem: &LocalizationProblem<'_>, config: &DeConfig) -> Result<PopulationState> {
    config.validate()?;
    let topology = problem.topology;
    let aoi = *topology.aoi();
    let num_targets = topology.num_targets();
    let size = config.pop_size;

    let mut degenerate = Vec::with_capacity(num_targets);
    let mut candidate_sets = Vec::with_capacity(num_targets);
    let mut rngs = Vec::with_capacity(num_targets);
    for m in 0..num_targets {
        let mut rng = seeding::substream(config.seed, m as u64 + 1);
        let is_degenerate = problem.measurements.for_target(m).is_empty();
        let candidates = if is_degenerate {
            vec![aoi.center()]
        } else {
            let anchors: Vec<Position> = topology
                .anchor_neighbors(m)
                .iter()
                .map(|&n| topology.anchors()[n])
                .collect();
            let primary: Vec<Individual> = (0..size)
                .map(|_| primary_candidate(&aoi, &anchors, topology.range(), &mut rng))
                .collect();
            let mut all = primary.clone();
            all.extend(primary.iter().map(|p| opposite_candidate(p, &aoi, &anchors)));
            confine_to_aoi(&mut all, &aoi, &mut rng);
            all
        };
        degenerate.push(is_degenerate);
        candidate_sets.push(candidates);
        rngs.push(rng);
    }

    let mut sharing = SharingMatrix::new(
        candidate_sets
            .iter()
            .map(|c| Position::mean(c).expect("non-empty candidate set"))
            .collect(),
    );

    let mut populations = Vec::with_capacity(num_targets);
    for (m, (candidates, rng)) in candidate_sets.into_iter().zip(rngs).enumerate() {
        let population = if degenerate[m] {
            Population {
                members: candidates,
                fitness: vec![0.0],
                scored_with: Vec::new(),
                rng,
            }
        } else {
            let scores: Vec<f64> = candidates
                .iter()
                .map(|x| problem.target_cost(m, x, sharing.estimates()))
                .collect();
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            order.truncate(size);
            Population {
                members: order.iter().map(|&i| candidates[i]).collect(),
                fitness: order.iter().map(|&i| scores[i]).collect(),
                scored_with: neighbor_snapshot(problem, m, sharing.estimates()),
                rng,
            }
        };
        populations.push(population);
    }

    for (m, pop) in populations.iter().enumerate() {
        sharing.set(m, if degenerate[m] { aoi.center() } else { pop.best() });
    }

    Ok(PopulationState {
        populations,
        sharing,
        generation: 0,
        degenerate,
        aoi,
    })
}

/// Redirects out-of-area genes into the range spanned by the in-area genes
/// of the same set (the whole area if there are none).
fn confine_to_aoi(candidates: &mut [Individual], aoi: &Aoi, rng: &mut ChaCha8Rng) {
    let mut lower = [f64::INFINITY; 2];
    let mut upper = [f64::NEG_INFINITY; 2];
    for c in candidates.iter() {
        for d in 0..2 {
            if aoi.lower(d) <= c[d] && c[d] <= aoi.upper(d) {
                lower[d] = lower[d].min(c[d]);
                upper[d] = upper[d].max(c[d]);
            }
        }
    }
    for d in 0..2 {
        if lower[d] > upper[d] {
            lower[d] = aoi.lower(d);
            upper[d] = aoi.upper(d);
        }
    }
    let area = RedirectionArea { lower, upper };
    for c in candidates.iter_mut() {
        *c = area.apply(c, aoi, rng);
    }
}

/// Advances every population by one generation.
pub fn run_generation(state: &mut PopulationState, problem: &LocalizationProblem<'_>, config: &DeConfig) {
    state.generation += 1;
    state.sharing.generation = state.generation;
    for m in 0..state.populations.len() {
        state.publish(m);
    }

    if config.jacobi_sharing {
        let estimates = state.sharing.estimates().to_vec();
        let degenerate = &state.degenerate;
        config
            .execution
            .for_each_mut(&mut state.populations, |m, pop| {
                if !degenerate[m] {
                    pop.evolve(m, problem, &estimates, config);
                }
            });
    } else {
        for m in 0..state.populations.len() {
            state.evolve_population(m, problem, config);
            state.publish(m);
        }
    }
}

/// Reads the final estimates off the populations.
pub fn finalize(state: &PopulationState, mode: Finalize) -> Vec<Position> {
    state
        .populations
        .iter()
        .zip(&state.degenerate)
        .map(|(pop, &degenerate)| match (degenerate, mode) {
            (true, _) => state.aoi.center(),
            (false, Finalize::BestIndividual) => pop.best(),
            (false, Finalize::Midpoint) => pop.midpoint(),
        })
        .collect()
}

/// Estimates from both finalization rules of one optimization run.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub best: Vec<Position>,
    pub midpoint: Vec<Position>,
    pub degenerate: Vec<bool>,
}

impl Solution {
    pub fn estimates(&self, mode: Finalize) -> &[Position] {
        match mode {
            Finalize::BestIndividual => &self.best,
            Finalize::Midpoint => &self.midpoint,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MultiPopulationDe {
    pub config: DeConfig,
}

impl MultiPopulationDe {
    pub fn new(config: DeConfig) -> Self {
        MultiPopulationDe { config }
    }

    /// Initializes and evolves for `config.generations` generations.
    pub fn evolve(&self, problem: &LocalizationProblem<'_>) -> Result<PopulationState> {
        let problem = problem.with_distance_clamp(self.config.distance_clamp);
        let mut state = init_populations(&problem, &self.config)?;
        for _ in 0..self.config.generations {
            run_generation(&mut state, &problem, &self.config);
        }
        Ok(state)
    }

    pub fn run(&self, problem: &LocalizationProblem<'_>) -> Result<Solution> {
        let state = self.evolve(problem)?;
        Ok(Solution {
            best: finalize(&state, Finalize::BestIndividual),
            midpoint: finalize(&state, Finalize::Midpoint),
            degenerate: state.degenerate.clone(),
        })
    }

    /// Final estimates under the configured finalization rule.
    pub fn localize(&self, problem: &LocalizationProblem<'_>) -> Result<Vec<Position>> {
        let state = self.evolve(problem)?;
        Ok(finalize(&state, self.config.finalize))
    }
}

#[cfg(test)]
mod tests;
