//! Network geometry: node positions, the area of interest and the
//! connectivity sets derived from the true positions.

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Coordinate-wise arithmetic mean. `None` for an empty input.
    pub fn mean<'a, I>(points: I) -> Option<Position>
    where
        I: IntoIterator<Item = &'a Position>,
    {
        let mut count = 0usize;
        let mut sum = Position::default();
        for p in points {
            sum.x += p.x;
            sum.y += p.y;
            count += 1;
        }
        (count > 0).then(|| Position::new(sum.x / count as f64, sum.y / count as f64))
    }
}

impl Index<usize> for Position {
    type Output = f64;

    fn index(&self, d: usize) -> &f64 {
        match d {
            0 => &self.x,
            1 => &self.y,
            _ => panic!("position has two coordinates, got index {d}"),
        }
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Position::new(x, y)
    }
}

/// Axis-aligned rectangular area of interest; also the optimizer's search box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Aoi {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let aoi = Aoi {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        aoi.validate()?;
        Ok(aoi)
    }

    /// `[0, side] x [0, side]`.
    pub fn square(side: f64) -> Self {
        Aoi {
            x_min: 0.0,
            x_max: side,
            y_min: 0.0,
            y_max: side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::InvalidAoi(format!(
                "need x_min < x_max and y_min < y_max, got [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    pub fn lower(&self, d: usize) -> f64 {
        if d == 0 {
            self.x_min
        } else {
            self.y_min
        }
    }

    pub fn upper(&self, d: usize) -> f64 {
        if d == 0 {
            self.x_max
        } else {
            self.y_max
        }
    }

    pub fn contains(&self, p: &Position) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn center(&self) -> Position {
        Position::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            self.x_min + rng.random::<f64>() * (self.x_max - self.x_min),
            self.y_min + rng.random::<f64>() * (self.y_max - self.y_min),
        )
    }
}

/// A node of the network. Indices are zero-based within their kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Anchor(usize),
    Target(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Anchor(n) => write!(f, "anchor {n}"),
            Node::Target(m) => write!(f, "target {m}"),
        }
    }
}

/// Two nodes can measure each other iff their distance is at most `range`.
pub fn is_directly_connected(p: &Position, q: &Position, range: f64) -> bool {
    p.distance(q) <= range
}

/// The nine-anchor layout of the reference scenario, listed verbatim:
/// `(0, 100)` appears twice and `(100, 0)` is absent.
pub fn reference_anchors() -> Vec<Position> {
    [
        (0.0, 0.0),
        (0.0, 50.0),
        (0.0, 100.0),
        (50.0, 100.0),
        (50.0, 50.0),
        (50.0, 0.0),
        (100.0, 100.0),
        (100.0, 50.0),
        (0.0, 100.0),
    ]
    .into_iter()
    .map(|(x, y)| Position::new(x, y))
    .collect()
}

/// A regular `k x k` anchor grid spanning the area, corners included.
pub fn grid_anchors(aoi: &Aoi, k: usize) -> Vec<Position> {
    assert!(k >= 2, "grid needs at least 2 anchors per side");
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    (0..k)
        .flat_map(|i| {
            (0..k).map(move |j| {
                Position::new(step(aoi.x_min, aoi.x_max, i), step(aoi.y_min, aoi.y_max, j))
            })
        })
        .collect()
}

/// Anchor and target positions together with the connectivity sets.
///
/// `anchor_neighbors[m]` is the set of anchors within range of target `m`
/// and `target_neighbors[m]` the set of other targets within range. Both
/// are computed once from the true positions and never change afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    anchors: Vec<Position>,
    targets: Vec<Position>,
    range: f64,
    aoi: Aoi,
    anchor_neighbors: Vec<Vec<usize>>,
    target_neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    pub fn build(
        anchors: Vec<Position>,
        targets: Vec<Position>,
        range: f64,
        aoi: Aoi,
    ) -> Result<Self> {
        aoi.validate()?;
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::param("range", format!("must be positive, got {range}")));
        }
        if anchors.is_empty() || targets.is_empty() {
            return Err(Error::EmptyNetwork {
                anchors: anchors.len(),
                targets: targets.len(),
            });
        }
        let nodes = anchors
            .iter()
            .enumerate()
            .map(|(n, p)| (Node::Anchor(n), p))
            .chain(targets.iter().enumerate().map(|(m, p)| (Node::Target(m), p)));
        for (node, p) in nodes {
            if !p.is_finite() || !aoi.contains(p) {
                return Err(Error::OutsideAoi {
                    node,
                    x: p.x,
                    y: p.y,
                });
            }
        }

        let anchor_neighbors = targets
            .iter()
            .map(|x| {
                (0..anchors.len())
                    .filter(|&n| is_directly_connected(&anchors[n], x, range))
                    .collect()
            })
            .collect();
        let target_neighbors = targets
            .iter()
            .enumerate()
            .map(|(m, x)| {
                (0..targets.len())
                    .filter(|&k| k != m && is_directly_connected(&targets[k], x, range))
                    .collect()
            })
            .collect();

        Ok(NetworkTopology {
            anchors,
            targets,
            range,
            aoi,
            anchor_neighbors,
            target_neighbors,
        })
    }

    pub fn anchors(&self) -> &[Position] {
        &self.anchors
    }

    pub fn targets(&self) -> &[Position] {
        &self.targets
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn aoi(&self) -> &Aoi {
        &self.aoi
    }

    pub fn anchor_neighbors(&self, m: usize) -> &[usize] {
        &self.anchor_neighbors[m]
    }

    pub fn target_neighbors(&self, m: usize) -> &[usize] {
        &self.target_neighbors[m]
    }

    pub fn position(&self, node: Node) -> Position {
        match node {
            Node::Anchor(n) => self.anchors[n],
            Node::Target(m) => self.targets[m],
        }
    }

    /// Centroid of the anchors in range of target `m`.
    pub fn anchor_centroid(&self, m: usize) -> Option<Position> {
        Position::mean(self.anchor_neighbors[m].iter().map(|&n| &self.anchors[n]))
    }

    pub fn is_degenerate(&self, m: usize) -> bool {
        self.anchor_neighbors[m].is_empty() && self.target_neighbors[m].is_empty()
    }

    /// Targets without a single measurement.
    pub fn degenerate_targets(&self) -> Vec<usize> {
        (0..self.num_targets())
            .filter(|&m| self.is_degenerate(m))
            .collect()
    }
}

/// Free-function form of [`NetworkTopology::degenerate_targets`].
pub fn degenerate_targets(topology: &NetworkTopology) -> Vec<usize> {
    topology.degenerate_targets()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn connection_boundary_is_inclusive() {
        assert!(is_directly_connected(&p(0.0, 0.0), &p(0.0, 40.0), 40.0));
        assert!(!is_directly_connected(&p(0.0, 0.0), &p(0.0, 40.001), 40.0));
        assert!(is_directly_connected(&p(0.0, 0.0), &p(30.0, 40.0), 50.0));
    }

    #[test]
    fn single_anchor_in_range() {
        let topo =
            NetworkTopology::build(vec![p(0.0, 0.0)], vec![p(0.0, 10.0)], 40.0, Aoi::square(100.0))
                .unwrap();
        assert_eq!(topo.anchor_neighbors(0), &[0]);
        assert!(topo.target_neighbors(0).is_empty());
    }

    #[test]
    fn targets_see_each_other_but_no_anchor() {
        let topo = NetworkTopology::build(
            vec![p(0.0, 0.0)],
            vec![p(0.0, 50.0), p(0.0, 80.0)],
            40.0,
            Aoi::square(100.0),
        )
        .unwrap();
        assert!(topo.anchor_neighbors(0).is_empty());
        assert!(topo.anchor_neighbors(1).is_empty());
        assert_eq!(topo.target_neighbors(0), &[1]);
        assert_eq!(topo.target_neighbors(1), &[0]);
        assert!(topo.degenerate_targets().is_empty());
    }

    #[test]
    fn center_target_on_reference_grid() {
        let anchors = reference_anchors();
        let target = p(50.0, 50.0);
        let expected: Vec<usize> = anchors
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let (dx, dy) = (s.x - target.x, s.y - target.y);
                dx * dx + dy * dy <= 40.0 * 40.0
            })
            .map(|(n, _)| n)
            .collect();
        assert_eq!(expected, vec![4]);

        let topo = NetworkTopology::build(anchors, vec![target], 40.0, Aoi::square(100.0)).unwrap();
        assert_eq!(topo.anchor_neighbors(0), expected.as_slice());
    }

    #[test]
    fn duplicated_anchors_are_distinct_nodes() {
        let topo =
            NetworkTopology::build(reference_anchors(), vec![p(5.0, 95.0)], 40.0, Aoi::square(100.0))
                .unwrap();
        assert_eq!(topo.num_anchors(), 9);
        assert_eq!(topo.anchor_neighbors(0), &[2, 8]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let aoi = Aoi::square(100.0);
        assert!(matches!(
            NetworkTopology::build(vec![], vec![p(1.0, 1.0)], 40.0, aoi),
            Err(Error::EmptyNetwork { .. })
        ));
        assert!(matches!(
            NetworkTopology::build(vec![p(1.0, 1.0)], vec![], 40.0, aoi),
            Err(Error::EmptyNetwork { .. })
        ));
        assert!(matches!(
            NetworkTopology::build(vec![p(1.0, 1.0)], vec![p(101.0, 1.0)], 40.0, aoi),
            Err(Error::OutsideAoi {
                node: Node::Target(0),
                ..
            })
        ));
        assert!(NetworkTopology::build(vec![p(1.0, 1.0)], vec![p(2.0, 1.0)], 0.0, aoi).is_err());
        assert!(Aoi::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_detection() {
        let aoi = Aoi::square(100.0);
        let isolated =
            NetworkTopology::build(vec![p(0.0, 0.0)], vec![p(100.0, 100.0)], 40.0, aoi).unwrap();
        assert_eq!(degenerate_targets(&isolated), vec![0]);

        let full = NetworkTopology::build(
            reference_anchors(),
            vec![p(10.0, 10.0), p(90.0, 90.0)],
            150.0,
            aoi,
        )
        .unwrap();
        assert!(full.degenerate_targets().is_empty());
    }

    #[test]
    fn grid_layout() {
        let g = grid_anchors(&Aoi::square(100.0), 3);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&p(100.0, 0.0)));
        assert!(g.contains(&p(50.0, 50.0)));
    }

    fn random_net() -> impl Strategy<Value = (Vec<Position>, Vec<Position>, f64)> {
        let pt = (0.0..=100.0f64, 0.0..=100.0f64).prop_map(|(x, y)| Position::new(x, y));
        (
            prop::collection::vec(pt.clone(), 1..10),
            prop::collection::vec(pt, 1..30),
            1.0..150.0f64,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn connectivity_sets_are_consistent((anchors, targets, range) in random_net()) {
            let topo = NetworkTopology::build(anchors, targets, range, Aoi::square(100.0)).unwrap();
            for m in 0..topo.num_targets() {
                let x = topo.targets()[m];
                prop_assert!(!topo.target_neighbors(m).contains(&m));
                for &k in topo.target_neighbors(m) {
                    prop_assert!(is_directly_connected(&topo.targets()[k], &x, range));
                    prop_assert!(topo.target_neighbors(k).contains(&m));
                }
                for n in 0..topo.num_anchors() {
                    let linked = topo.anchor_neighbors(m).contains(&n);
                    prop_assert_eq!(linked, topo.anchors()[n].distance(&x) <= range);
                }
            }
        }
    }
}
