use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Nodes on the intersections of a square mesh, sidelines included.
    Grid,
    /// One node placed at random inside each cell of a square partition.
    Uniform,
    /// Independent uniform positions over the whole field.
    Random,
    /// Explicit positions.
    Custom,
}

impl std::str::FromStr for TopologyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(TopologyKind::Grid),
            "uniform" => Ok(TopologyKind::Uniform),
            "random" => Ok(TopologyKind::Random),
            other => Err(SimError::Topology(format!("unknown topology kind {other:?}"))),
        }
    }
}

/// Node positions in meters plus the in-range relation they induce.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub kind: TopologyKind,
    pub field: f64,
    pub radius: f64,
    pub positions: Vec<(f64, f64)>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Two nodes are in range iff their distance is strictly below `radius`.
    pub fn from_positions(kind: TopologyKind, field: f64, radius: f64, positions: Vec<(f64, f64)>) -> Topology {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if distance(positions[i], positions[j]) < radius {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        Topology {
            kind,
            field,
            radius,
            positions,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn in_range(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(self.positions[i], self.positions[j])
    }

    /// Unordered in-range pairs `(i, j)` with `i < j`.
    pub fn in_range_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn square_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Lays out `n` nodes.
///
/// * grid: `sqrt(n) x sqrt(n)` intersections `spacing` apart, starting at the
///   origin; `n` must be a perfect square.
/// * uniform: the field is cut into `ceil(sqrt(n))^2` cells and the first `n`
///   cells receive one randomly placed node each.
/// * random: i.i.d. uniform positions.
pub fn build_topology(
    kind: TopologyKind,
    n: usize,
    field: f64,
    spacing: f64,
    radius: f64,
    seed: u64,
) -> Result<Topology, SimError> {
    if n < 2 {
        return Err(SimError::Topology("at least two nodes are required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = match kind {
        TopologyKind::Grid => {
            let side =
                square_side(n).ok_or_else(|| SimError::Topology(format!("grid needs a square node count, got {n}")))?;
            (0..n)
                .map(|i| ((i % side) as f64 * spacing, (i / side) as f64 * spacing))
                .collect()
        }
        TopologyKind::Uniform => {
            let side = (n as f64).sqrt().ceil() as usize;
            let cell = field / side as f64;
            (0..n)
                .map(|i| {
                    let (cx, cy) = ((i % side) as f64 * cell, (i / side) as f64 * cell);
                    (cx + rng.gen::<f64>() * cell, cy + rng.gen::<f64>() * cell)
                })
                .collect()
        }
        TopologyKind::Random => (0..n)
            .map(|_| (rng.gen::<f64>() * field, rng.gen::<f64>() * field))
            .collect(),
        TopologyKind::Custom => return Err(SimError::Topology("custom layouts use Topology::from_positions".into())),
    };
    Ok(Topology::from_positions(kind, field, radius, positions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_961_spans_750m() {
        let t = build_topology(TopologyKind::Grid, 961, 750.0, 25.0, 50.0, 0).unwrap();
        assert_eq!(t.len(), 961);
        let max_x = t.positions.iter().map(|p| p.0).fold(0.0, f64::max);
        assert_eq!(max_x, 750.0);
        // interior node: 4 orthogonal + 4 diagonal neighbors
        assert_eq!(t.neighbors(15 * 31 + 15).len(), 8);
        assert_eq!(t.neighbors(0).len(), 3);
    }

    #[test]
    fn grid_49_is_symmetric() {
        let t = build_topology(TopologyKind::Grid, 49, 150.0, 25.0, 50.0, 0).unwrap();
        for i in 0..49 {
            for &j in t.neighbors(i) {
                assert!(t.in_range(j, i));
            }
        }
        // 7x7 king-move graph: 2*7*6 orthogonal + 2*6*6 diagonal edges
        assert_eq!(t.in_range_pairs().count(), 84 + 72);
    }

    #[test]
    fn grid_requires_square() {
        assert!(build_topology(TopologyKind::Grid, 6, 100.0, 25.0, 50.0, 0).is_err());
        assert!(build_topology(TopologyKind::Random, 1, 100.0, 25.0, 50.0, 0).is_err());
    }

    #[test]
    fn random_is_reproducible() {
        let a = build_topology(TopologyKind::Random, 30, 750.0, 0.0, 50.0, 4).unwrap();
        let b = build_topology(TopologyKind::Random, 30, 750.0, 0.0, 50.0, 4).unwrap();
        assert_eq!(a, b);
        let c = build_topology(TopologyKind::Random, 30, 750.0, 0.0, 50.0, 5).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn uniform_places_one_node_per_cell() {
        let t = build_topology(TopologyKind::Uniform, 961, 750.0, 0.0, 50.0, 1).unwrap();
        let cell = 750.0 / 31.0;
        for (i, &(x, y)) in t.positions.iter().enumerate() {
            assert_eq!((x / cell).floor() as usize, i % 31);
            assert_eq!((y / cell).floor() as usize, i / 31);
        }
    }
}
