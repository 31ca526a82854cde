//! The per-individual variation operators: opposition-based initialization,
//! mutation, crossover, anchoring, adaptive redirection and selection.

use std::f64::consts::TAU;

use rand::seq::index;
use rand::Rng;

use crate::cost::{LocalizationProblem, SharingMatrix};
use crate::error::Result;
use crate::network::{is_directly_connected, Aoi, NetworkTopology, Position};

/// A candidate position for one target; the two coordinates are its genes.
pub type Individual = Position;

/// Random planar offset `(rs cos t, rs sin t)` where `r` is the product of two
/// independent `U[0,1]` draws and `t ~ U[0, 2pi)`.
pub fn polar_offset<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Position {
    let (r, theta) = draw_polar(rng);
    polar(r, theta, scale)
}

fn draw_polar<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let r = rng.random::<f64>() * rng.random::<f64>();
    let theta = TAU * rng.random::<f64>();
    (r, theta)
}

fn polar(r: f64, theta: f64, scale: f64) -> Position {
    let rho = r * scale;
    Position::new(rho * theta.cos(), rho * theta.sin())
}

/// Primary initial candidate. Without anchors in range it is uniform over the
/// area; otherwise the anchor centroid plus a polar offset of radius scale
/// `range / |anchors|`.
pub fn primary_candidate<R: Rng + ?Sized>(
    aoi: &Aoi,
    anchors_in_range: &[Position],
    range: f64,
    rng: &mut R,
) -> Individual {
    match Position::mean(anchors_in_range) {
        None => aoi.sample_uniform(rng),
        Some(centroid) => centroid + polar_offset(range / anchors_in_range.len() as f64, rng),
    }
}

/// Opposition-based counterpart of `candidate`: the reflection through the
/// area center without anchors in range, through the anchor centroid with.
pub fn opposite_candidate(candidate: &Individual, aoi: &Aoi, anchors_in_range: &[Position]) -> Individual {
    if anchors_in_range.is_empty() {
        Position::new(
            aoi.x_min + aoi.x_max - candidate.x,
            aoi.y_min + aoi.y_max - candidate.y,
        )
    } else {
        let k = 2.0 / anchors_in_range.len() as f64;
        let sum = anchors_in_range
            .iter()
            .fold(Position::default(), |acc, s| acc + *s);
        Position::new(k * sum.x - candidate.x, k * sum.y - candidate.y)
    }
}

/// `members[k] + scale * (members[p] - members[q])` with `k`, `p`, `q`
/// distinct from each other and from `l`. Needs at least four members.
pub fn mutate<R: Rng + ?Sized>(members: &[Individual], l: usize, scale: f64, rng: &mut R) -> Individual {
    let [k, p, q] = donor_indices(members.len(), l, rng);
    let (base, a, b) = (members[k], members[p], members[q]);
    Position::new(base.x + scale * (a.x - b.x), base.y + scale * (a.y - b.y))
}

pub(crate) fn donor_indices<R: Rng + ?Sized>(len: usize, l: usize, rng: &mut R) -> [usize; 3] {
    assert!(len >= 4, "mutation needs at least 4 individuals, got {len}");
    let picks = index::sample(rng, len - 1, 3);
    let skip = |i: usize| if i >= l { i + 1 } else { i };
    [skip(picks.index(0)), skip(picks.index(1)), skip(picks.index(2))]
}

/// Binomial crossover without a forced mutant gene: each gene comes from the
/// mutant iff its own `U[0,1]` draw is at most `crossover_rate`.
pub fn crossover<R: Rng + ?Sized>(
    target: &Individual,
    mutant: &Individual,
    crossover_rate: f64,
    rng: &mut R,
) -> Individual {
    let mut pick = |t: f64, v: f64| {
        if rng.random::<f64>() <= crossover_rate {
            v
        } else {
            t
        }
    };
    let x = pick(target.x, mutant.x);
    let y = pick(target.y, mutant.y);
    Position::new(x, y)
}

/// Pulls a trial back toward the nodes target `m` is known to be linked with.
///
/// The trial violates the anchor (target) constraint if it is out of range of
/// any anchor in range of `m` (any shared estimate of a neighbor of `m`).
/// A trial violating neither is returned as is; otherwise the result is the
/// average of the violated sets' centroids, each jittered by the same polar
/// draw scaled by `range / |set|`.
pub fn anchor<R: Rng + ?Sized>(
    trial: &Individual,
    m: usize,
    topology: &NetworkTopology,
    estimates: &[Position],
    rng: &mut R,
) -> Individual {
    let range = topology.range();
    let anchors = topology.anchor_neighbors(m);
    let neighbors = topology.target_neighbors(m);
    let anchor_points = topology.anchors();

    let off_anchors = anchors
        .iter()
        .any(|&n| !is_directly_connected(trial, &anchor_points[n], range));
    let off_neighbors = neighbors
        .iter()
        .any(|&k| !is_directly_connected(trial, &estimates[k], range));
    if !off_anchors && !off_neighbors {
        return *trial;
    }

    let (r, theta) = draw_polar(rng);
    let mut sum = Position::default();
    let mut count = 0.0;
    if off_anchors {
        let centroid = Position::mean(anchors.iter().map(|&n| &anchor_points[n]))
            .expect("violated anchor set is non-empty");
        sum = sum + centroid + polar(r, theta, range / anchors.len() as f64);
        count += 1.0;
    }
    if off_neighbors {
        let centroid = Position::mean(neighbors.iter().map(|&k| &estimates[k]))
            .expect("violated neighbor set is non-empty");
        sum = sum + centroid + polar(r, theta, range / neighbors.len() as f64);
        count += 1.0;
    }
    sum * (1.0 / count)
}

/// Per-gene `[min, max]` of a population, the redirection area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedirectionArea {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl RedirectionArea {
    pub fn of(members: &[Individual]) -> Self {
        assert!(!members.is_empty(), "redirection area of an empty population");
        let mut lower = [f64::INFINITY; 2];
        let mut upper = [f64::NEG_INFINITY; 2];
        for p in members {
            for d in 0..2 {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
            }
        }
        RedirectionArea { lower, upper }
    }

    /// Replaces every out-of-area gene with a uniform point of the area.
    pub fn apply<R: Rng + ?Sized>(&self, candidate: &Individual, aoi: &Aoi, rng: &mut R) -> Individual {
        let mut genes = [candidate.x, candidate.y];
        for (d, gene) in genes.iter_mut().enumerate() {
            if !(aoi.lower(d) <= *gene && *gene <= aoi.upper(d)) {
                let beta = rng.random::<f64>();
                *gene = beta * (self.upper[d] - self.lower[d]) + self.lower[d];
            }
        }
        Position::new(genes[0], genes[1])
    }
}

/// Adaptive redirection of `candidate` using the gene ranges of `members`.
pub fn redirect<R: Rng + ?Sized>(
    candidate: &Individual,
    members: &[Individual],
    aoi: &Aoi,
    rng: &mut R,
) -> Individual {
    RedirectionArea::of(members).apply(candidate, aoi, rng)
}

/// The lower-cost of `target` and `challenger`; ties keep the target.
pub fn select(
    problem: &LocalizationProblem<'_>,
    m: usize,
    target: &Individual,
    challenger: &Individual,
    sharing: &SharingMatrix,
) -> Result<Individual> {
    let keep = problem.per_target_cost(m, target, sharing)?;
    let other = problem.per_target_cost(m, challenger, sharing)?;
    Ok(if replaces(keep, other) { *challenger } else { *target })
}

#[inline]
pub(crate) fn replaces(incumbent: f64, challenger: f64) -> bool {
    challenger < incumbent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::reference_anchors;
    use crate::rss_sim::{generate_measurements, PathLossParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn p(x: f64, y: f64) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn opposite_without_anchors_reflects_through_area() {
        let aoi = Aoi::square(100.0);
        assert_eq!(opposite_candidate(&p(30.0, 12.5), &aoi, &[]), p(70.0, 87.5));
    }

    #[test]
    fn single_anchor_zero_offset_is_fixed_point() {
        let anchors = [p(40.0, 60.0)];
        let primary = anchors[0] + polar(0.0, 1.3, 40.0);
        assert_eq!(primary, p(40.0, 60.0));
        assert_eq!(opposite_candidate(&primary, &Aoi::square(100.0), &anchors), p(40.0, 60.0));
    }

    #[test]
    fn opposite_through_two_anchor_centroid() {
        let anchors = [p(0.0, 0.0), p(100.0, 0.0)];
        assert_eq!(
            opposite_candidate(&p(70.0, 10.0), &Aoi::square(100.0), &anchors),
            p(30.0, -10.0)
        );
    }

    #[test]
    fn primary_candidates_stay_near_anchor_centroid() {
        let anchors = [p(20.0, 20.0), p(40.0, 20.0)];
        let mut r = rng(1);
        for _ in 0..1000 {
            let c = primary_candidate(&Aoi::square(100.0), &anchors, 40.0, &mut r);
            assert!(c.distance(&p(30.0, 20.0)) <= 20.0 + 1e-12);
        }
    }

    #[test]
    fn mutation_arithmetic() {
        let members = [p(0.0, 0.0), p(10.0, 20.0), p(4.0, 8.0), p(99.0, 99.0), p(7.0, 7.0)];
        let mut r = rng(3);
        for _ in 0..200 {
            let [k, a, b] = donor_indices(members.len(), 4, &mut r.clone());
            let mutant = mutate(&members, 4, 0.5, &mut r);
            let expected = p(
                members[k].x + 0.5 * (members[a].x - members[b].x),
                members[k].y + 0.5 * (members[a].y - members[b].y),
            );
            assert_eq!(mutant, expected);
        }

        let same = [p(1.0, 2.0), p(3.0, 3.0), p(3.0, 3.0), p(3.0, 3.0)];
        let m = mutate(&same, 0, 0.9, &mut r);
        assert_eq!(m, p(3.0, 3.0));
        let m = mutate(&members, 1, 0.0, &mut r);
        assert!(members.contains(&m));

        // fixed donors: k = 0, p = 1, q = 2 reproduce (3, 6)
        let donors = [p(0.0, 0.0), p(10.0, 20.0), p(4.0, 8.0)];
        let v = donors[0] + (donors[1] - donors[2]) * 0.5;
        assert_eq!(v, p(3.0, 6.0));
    }

    #[test]
    fn mutation_indices_are_distinct() {
        let mut r = rng(11);
        for i in 0..100_000 {
            let len = 4 + i % 9;
            let l = i % len;
            let [k, a, b] = donor_indices(len, l, &mut r);
            let all = [k, a, b, l];
            for x in 0..4 {
                assert!(all[x] < len);
                for y in x + 1..4 {
                    assert_ne!(all[x], all[y]);
                }
            }
        }
    }

    #[test]
    fn crossover_extremes_and_rate() {
        let (t, v) = (p(1.0, 2.0), p(3.0, 4.0));
        let mut r = rng(5);
        assert_eq!(crossover(&t, &v, 1.0, &mut r), v);
        assert_eq!(crossover(&t, &v, 0.0, &mut r), t);

        let trials = 100_000;
        let mut from_mutant = 0usize;
        for _ in 0..trials {
            let c = crossover(&t, &v, 0.9, &mut r);
            from_mutant += usize::from(c.x == v.x) + usize::from(c.y == v.y);
        }
        let frac = from_mutant as f64 / (2 * trials) as f64;
        assert!((frac - 0.9).abs() < 0.01, "{frac}");
    }

    fn center_topology(range: f64) -> NetworkTopology {
        NetworkTopology::build(
            vec![p(50.0, 50.0), p(0.0, 0.0)],
            vec![p(50.0, 60.0)],
            range,
            Aoi::square(100.0),
        )
        .unwrap()
    }

    #[test]
    fn anchoring_keeps_consistent_trials() {
        let topo = center_topology(40.0);
        let trial = p(45.0, 55.0);
        assert_eq!(anchor(&trial, 0, &topo, topo.targets(), &mut rng(0)), trial);
    }

    #[test]
    fn anchoring_pulls_into_anchor_disc() {
        let topo = center_topology(40.0);
        assert_eq!(topo.anchor_neighbors(0), &[0]);
        let trial = p(50.0, 95.0);
        let mut r = rng(8);
        for _ in 0..1000 {
            let out = anchor(&trial, 0, &topo, topo.targets(), &mut r);
            let d = out.distance(&p(50.0, 50.0));
            assert!(d <= 40.0 + 1e-12, "{d}");
        }
        // with a zero offset the anchored point is the centroid itself, which
        // is consistent with every anchor in range
        let centroid = p(50.0, 50.0) + polar(0.0, 2.0, 40.0);
        assert!(is_directly_connected(&centroid, &p(50.0, 50.0), 40.0));
    }

    #[test]
    fn anchoring_averages_both_centroids() {
        let topo = NetworkTopology::build(
            vec![p(10.0, 10.0)],
            vec![p(20.0, 10.0), p(20.0, 40.0)],
            35.0,
            Aoi::square(100.0),
        )
        .unwrap();
        assert_eq!(topo.anchor_neighbors(0), &[0]);
        assert_eq!(topo.target_neighbors(0), &[1]);
        let estimates = [p(0.0, 0.0), p(30.0, 40.0)];
        let trial = p(90.0, 90.0);
        let mut r = rng(21);
        let (rr, theta) = draw_polar(&mut r.clone());
        let out = anchor(&trial, 0, &topo, &estimates, &mut r);
        let dot = p(10.0, 10.0) + polar(rr, theta, 35.0);
        let ddot = p(30.0, 40.0) + polar(rr, theta, 35.0);
        let expected = (dot + ddot) * 0.5;
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn redirection_cases() {
        let aoi = Aoi::square(100.0);
        let members = [p(20.0, 10.0), p(60.0, 90.0), p(35.0, 50.0)];
        let mut r = rng(2);
        assert_eq!(redirect(&p(5.0, 5.0), &members, &aoi, &mut r), p(5.0, 5.0));
        for _ in 0..1000 {
            let out = redirect(&p(-5.0, 50.0), &members, &aoi, &mut r);
            assert!((20.0..=60.0).contains(&out.x));
            assert_eq!(out.y, 50.0);
        }
        let flat = [p(30.0, 40.0); 5];
        let out = redirect(&p(120.0, 70.0), &flat, &aoi, &mut r);
        assert_eq!(out, p(30.0, 70.0));
    }

    #[test]
    fn selection_rule() {
        let aoi = Aoi::square(100.0);
        let topo = NetworkTopology::build(reference_anchors(), vec![p(30.0, 30.0)], 40.0, aoi).unwrap();
        let meas = generate_measurements(&topo, &PathLossParams::new(40.0, 3.0, 0.0), &mut rng(0)).unwrap();
        let problem = LocalizationProblem::new(&topo, &meas);
        let sharing = SharingMatrix::new(topo.targets().to_vec());
        let truth = p(30.0, 30.0);
        let far = p(80.0, 80.0);
        assert_eq!(select(&problem, 0, &far, &truth, &sharing).unwrap(), truth);
        assert_eq!(select(&problem, 0, &truth, &far, &sharing).unwrap(), truth);
        assert_eq!(select(&problem, 0, &far, &far, &sharing).unwrap(), far);
    }

    #[test]
    fn selection_tie_keeps_target() {
        let aoi = Aoi::square(100.0);
        let topo = NetworkTopology::build(vec![p(50.0, 50.0)], vec![p(50.0, 70.0)], 40.0, aoi).unwrap();
        let meas = generate_measurements(&topo, &PathLossParams::new(40.0, 3.0, 2.0), &mut rng(4)).unwrap();
        let problem = LocalizationProblem::new(&topo, &meas);
        let sharing = SharingMatrix::new(topo.targets().to_vec());
        let (a, b) = (p(50.0, 60.0), p(60.0, 50.0));
        assert_eq!(
            problem.per_target_cost(0, &a, &sharing).unwrap(),
            problem.per_target_cost(0, &b, &sharing).unwrap()
        );
        assert_eq!(select(&problem, 0, &a, &b, &sharing).unwrap(), a);
        assert_eq!(select(&problem, 0, &b, &a, &sharing).unwrap(), b);
    }
}
