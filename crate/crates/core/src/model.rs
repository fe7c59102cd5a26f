//! Points, identifiers, configuration and the two clustering cost functions.
//!
//! Every comparison of a distance against a threshold is done on squared
//! integer distances. [`CostValue`] carries the squared distance so that
//! ratios between costs can be checked without rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible side length of the integer box.
pub const MAX_DELTA: i64 = 1 << 31;
/// Largest admissible dimension.
pub const MAX_DIM: usize = 1 << 16;

/// A point of `{1, ..., delta}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point(Vec<i64>);

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Checks that the point lies in `{1, ..., delta}^d`.
    pub fn check_box(&self, d: usize, delta: i64) -> Result<()> {
        if self.0.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.0.len() });
        }
        for (axis, &value) in self.0.iter().enumerate() {
            if value < 1 || value > delta {
                return Err(Error::OutOfBox { axis, value, delta });
            }
        }
        Ok(())
    }
}

impl From<Vec<i64>> for Point {
    fn from(v: Vec<i64>) -> Self {
        Point(v)
    }
}

impl From<&[i64]> for Point {
    fn from(v: &[i64]) -> Self {
        Point(v.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, c) in self.0.iter().enumerate() {
            if t > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Insertion-time identifier. Never reused within one structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointId(pub u64);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The canonical record of one stored coordinate.
///
/// `id` is the identifier the coordinate received when it first became
/// present; later copies only raise `multiplicity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRecord {
    pub point: Point,
    pub id: PointId,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    LowDim,
    HighDim,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" | "low_dim" | "lowdim" => Ok(Mode::LowDim),
            "high" | "high_dim" | "highdim" => Ok(Mode::HighDim),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::LowDim => "low",
            Mode::HighDim => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub d: usize,
    pub delta: i64,
    pub mode: Mode,
    /// Sampling depth of the high-dimensional structure.
    pub ell: usize,
    pub seed: u64,
    /// Grids per level are `ceil(grid_count_factor * log2(n0))`.
    pub grid_count_factor: f64,
}

impl Config {
    pub fn low_dim(d: usize, delta: i64) -> Self {
        Config { d, delta, mode: Mode::LowDim, ell: 1, seed: 0, grid_count_factor: 10.0 }
    }

    pub fn high_dim(d: usize, delta: i64, ell: usize, seed: u64) -> Self {
        Config { d, delta, mode: Mode::HighDim, ell, seed, grid_count_factor: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidConfig(format!("d = {} must be in [1, {MAX_DIM}]", self.d)));
        }
        if self.delta < 1 || self.delta > MAX_DELTA {
            return Err(Error::InvalidConfig(format!(
                "delta = {} must be in [1, {MAX_DELTA}]",
                self.delta
            )));
        }
        if self.ell == 0 || self.ell > 64 {
            return Err(Error::InvalidConfig(format!("ell = {} must be in [1, 64]", self.ell)));
        }
        if !(self.grid_count_factor.is_finite() && self.grid_count_factor > 0.0) {
            return Err(Error::InvalidConfig("grid_count_factor must be positive".into()));
        }
        Ok(())
    }
}

/// A Euclidean distance, stored as its exact square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct CostValue {
    sq: u128,
}

impl CostValue {
    pub const ZERO: CostValue = CostValue { sq: 0 };

    pub fn from_squared(sq: u128) -> Self {
        CostValue { sq }
    }

    pub fn squared(self) -> u128 {
        self.sq
    }

    pub fn value(self) -> f64 {
        (self.sq as f64).sqrt()
    }

    /// Exact test of `self <= factor * other`.
    pub fn at_most_times(self, factor: u64, other: CostValue) -> bool {
        let f = factor as u128;
        match other.sq.checked_mul(f * f) {
            Some(rhs) => self.sq <= rhs,
            None => true,
        }
    }

    /// `self / other`, with `0 / 0` read as 1.
    pub fn ratio_to(self, other: CostValue) -> f64 {
        if other.sq == 0 {
            if self.sq == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            ((self.sq as f64) / (other.sq as f64)).sqrt()
        }
    }
}

impl fmt::Display for CostValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Squared Euclidean distance of two equal-length coordinate slices.
pub fn dist_sq(a: &[i64], b: &[i64]) -> u128 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let t = x.abs_diff(y) as u128;
            t * t
        })
        .sum()
}

/// `true` iff `||a - b|| <= 2^level`.
pub fn within_pow2(a: &[i64], b: &[i64], level: usize) -> bool {
    dist_sq(a, b) <= 1u128 << (2 * level)
}

pub fn distance(p: &Point, q: &Point) -> Result<CostValue> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    Ok(CostValue::from_squared(dist_sq(p.coords(), q.coords())))
}

fn check_dims(points: &[Point]) -> Result<()> {
    if let Some(first) = points.first() {
        for p in points {
            if p.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), got: p.dim() });
            }
        }
    }
    Ok(())
}

/// Maximum cluster diameter of `partition`, given as index lists into
/// `points`. The lists must be disjoint and cover every index.
pub fn diameter_cost(points: &[Point], partition: &[Vec<usize>]) -> Result<CostValue> {
    check_dims(points)?;
    let mut seen = vec![false; points.len()];
    for cluster in partition {
        for &idx in cluster {
            if idx >= points.len() {
                return Err(Error::InvalidArgument(format!("index {idx} out of range")));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::InvalidArgument(format!("index {idx} appears twice")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("index {missing} is not covered")));
    }
    let mut worst = 0u128;
    for cluster in partition {
        for (a, &x) in cluster.iter().enumerate() {
            for &y in &cluster[a + 1..] {
                worst = worst.max(dist_sq(points[x].coords(), points[y].coords()));
            }
        }
    }
    Ok(CostValue::from_squared(worst))
}

/// Largest distance from a point to its nearest center.
pub fn center_cost(points: &[Point], centers: &[Point]) -> Result<CostValue> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("center set is empty".into()));
    }
    check_dims(points)?;
    check_dims(centers)?;
    if let (Some(p), Some(c)) = (points.first(), centers.first()) {
        if p.dim() != c.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: c.dim() });
        }
    }
    let worst = points
        .iter()
        .map(|p| centers.iter().map(|c| dist_sq(p.coords(), c.coords())).min().unwrap_or(0))
        .max()
        .unwrap_or(0);
    Ok(CostValue::from_squared(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[i64]) -> Vec<Point> {
        v.iter().map(|&x| Point::new(vec![x])).collect()
    }

    #[test]
    fn distance_examples() {
        let d = |a: Vec<i64>, b: Vec<i64>| distance(&a.into(), &b.into()).unwrap().value();
        assert_eq!(d(vec![1], vec![1]), 0.0);
        assert_eq!(d(vec![1, 1], vec![4, 5]), 5.0);
        assert_eq!(d(vec![1], vec![9]), 8.0);
        assert!(matches!(
            distance(&vec![1].into(), &vec![1, 2].into()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diameter_examples() {
        let p = pts(&[1, 2, 5, 9]);
        assert_eq!(diameter_cost(&p, &[vec![0, 1, 2], vec![3]]).unwrap().value(), 4.0);
        assert_eq!(diameter_cost(&p, &[vec![0, 1], vec![2], vec![3]]).unwrap().value(), 1.0);
        let singletons: Vec<Vec<usize>> = (0..4).map(|i| vec![i]).collect();
        assert_eq!(diameter_cost(&p, &singletons).unwrap(), CostValue::ZERO);
        assert!(diameter_cost(&p, &[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(diameter_cost(&p, &[vec![0, 1]]).is_err());
    }

    #[test]
    fn center_examples() {
        let p = pts(&[1, 2, 5, 9]);
        assert_eq!(center_cost(&p, &pts(&[1, 9])).unwrap().value(), 4.0);
        assert_eq!(center_cost(&p, &p).unwrap(), CostValue::ZERO);
        assert_eq!(center_cost(&p, &pts(&[5])).unwrap().value(), 4.0);
        assert!(center_cost(&p, &[]).is_err());
    }

    #[test]
    fn box_check() {
        let p = Point::new(vec![1, 9]);
        assert!(p.check_box(2, 9).is_ok());
        assert!(matches!(p.check_box(2, 8), Err(Error::OutOfBox { axis: 1, .. })));
        assert!(matches!(p.check_box(3, 9), Err(Error::DimensionMismatch { .. })));
        assert!(Point::new(vec![0]).check_box(1, 9).is_err());
    }

    fn point_strategy(d: usize, delta: i64) -> impl Strategy<Value = Point> {
        proptest::collection::vec(1..=delta, d).prop_map(Point::new)
    }

    proptest! {
        #[test]
        fn symmetry_and_triangle(
            (a, b, c) in (1usize..5).prop_flat_map(|d| (
                point_strategy(d, 1000), point_strategy(d, 1000), point_strategy(d, 1000)
            ))
        ) {
            let ab = distance(&a, &b).unwrap();
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
            let ac = distance(&a, &c).unwrap().value();
            let cb = distance(&c, &b).unwrap().value();
            prop_assert!(ab.value() <= ac + cb + 1e-9);
        }

        #[test]
        fn threshold_comparison_is_exact(
            (a, b) in (1usize..6).prop_flat_map(|d| (point_strategy(d, 1 << 20), point_strategy(d, 1 << 20))),
            level in 0usize..24,
        ) {
            // Reference uses exact rational arithmetic via u128 on the
            // unsquared side: compare floor(sqrt) and remainder.
            let sq = dist_sq(a.coords(), b.coords());
            let root = num_integer::Roots::sqrt(&sq);
            let limit = 1u128 << level;
            let reference = root < limit || (root == limit && root * root == sq);
            prop_assert_eq!(within_pow2(a.coords(), b.coords(), level), reference);
        }

        #[test]
        fn center_diameter_sandwich(
            raw in proptest::collection::vec((1i64..30, 1i64..30), 2..9),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let points: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(vec![x, y])).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let parts = rng.random_range(1..=points.len());
            let mut clusters = vec![Vec::new(); parts];
            for idx in 0..points.len() {
                clusters[if idx < parts { idx } else { rng.random_range(0..parts) }].push(idx);
            }
            let diam = diameter_cost(&points, &clusters).unwrap();
            // Assign each point to its own cluster's representative.
            let mut radius = 0u128;
            let mut reps = Vec::new();
            for c in &clusters {
                let rep = c[rng.random_range(0..c.len())];
                reps.push(points[rep].clone());
                for &x in c {
                    radius = radius.max(dist_sq(points[x].coords(), points[rep].coords()));
                }
            }
            let assigned = CostValue::from_squared(radius);
            let nearest = center_cost(&points, &reps).unwrap();
            prop_assert!(nearest <= assigned);
            prop_assert!(nearest <= diam);
            prop_assert!(diam.at_most_times(2, assigned));
        }
    }
}
