//! Grid-hash structure for constant dimension.
//!
//! Level `i` hashes each member of `P_i` to the grid cell of width
//! `2^i / sqrt(d)` that contains it. A new point climbs the levels until it
//! finds a member within `2^i`, to which it links. Cell keys are computed in
//! scaled integer coordinates: the key of coordinate `c` on level `i` is
//! `floor((c - 1) * sqrt(d) / 2^i) = isqrt((c - 1)^2 * d) >> i`.

use std::collections::{BTreeMap, HashMap};

use num_integer::Roots;

use crate::error::{Error, Result};
use crate::hierarchy::{self, level_count, Family};
use crate::model::{within_pow2, Config, Point, PointId, PointRecord};
use crate::rankset::RankSet;

#[derive(Debug, Clone)]
struct Node {
    record: PointRecord,
    /// Ids of the extra copies, most recent last.
    copies: Vec<PointId>,
    /// `isqrt((c - 1)^2 * d)` per axis.
    scaled: Box<[u64]>,
    /// Highest level this record belongs to.
    top: usize,
    /// Parent on level `top + 1`, if `top < M`.
    link: Option<PointId>,
    /// `children[i]`: records of `P_{i-1} \ P_i` linked to this one, ascending.
    children: Vec<Vec<PointId>>,
}

impl Node {
    fn children_at(&mut self, level: usize) -> &mut Vec<PointId> {
        if self.children.len() <= level {
            self.children.resize_with(level + 1, Vec::new);
        }
        &mut self.children[level]
    }
}

/// Members of one level, bucketed by grid cell.
#[derive(Debug, Clone, Default)]
pub struct GridLevel {
    cells: HashMap<Box<[u64]>, Vec<PointId>>,
    size: usize,
}

impl GridLevel {
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    fn insert(&mut self, key: Box<[u64]>, id: PointId) {
        self.cells.entry(key).or_default().push(id);
        self.size += 1;
    }

    fn remove(&mut self, key: &[u64], id: PointId) {
        if let Some(cell) = self.cells.get_mut(key) {
            if let Some(pos) = cell.iter().position(|&x| x == id) {
                cell.swap_remove(pos);
                self.size -= 1;
            }
            if cell.is_empty() {
                self.cells.remove(key);
            }
        }
    }
}

fn scale(c: i64, d: usize) -> u64 {
    let v = (c - 1) as u128;
    (v * v * d as u128).sqrt() as u64
}

#[derive(Debug, Clone)]
pub struct LowDim {
    d: usize,
    delta: i64,
    max_level: usize,
    next_id: u64,
    total: u64,
    by_point: HashMap<Point, PointId>,
    nodes: BTreeMap<PointId, Node>,
    levels: Vec<GridLevel>,
    /// `diff[i]` for `1 <= i <= M`; index 0 unused.
    diff: Vec<RankSet>,
}

impl LowDim {
    pub fn new(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let max_level = level_count(cfg.d, cfg.delta);
        Ok(LowDim {
            d: cfg.d,
            delta: cfg.delta,
            max_level,
            next_id: 0,
            total: 0,
            by_point: HashMap::new(),
            nodes: BTreeMap::new(),
            levels: vec![GridLevel::default(); max_level + 1],
            diff: vec![RankSet::new(); max_level + 1],
        })
    }

    fn key(scaled: &[u64], level: usize) -> Box<[u64]> {
        scaled.iter().map(|&s| s >> level).collect()
    }

    /// Per-axis inclusive key ranges of the cells that can hold a point
    /// within `2^level` of `point`.
    fn probe_ranges(&self, point: &Point, level: usize) -> Vec<(u64, u64)> {
        let reach = 1i64 << level.min(62);
        point
            .coords()
            .iter()
            .map(|&c| {
                let lo = c.saturating_sub(reach).max(1);
                let hi = c.saturating_add(reach).min(self.delta);
                (scale(lo, self.d) >> level, scale(hi, self.d) >> level)
            })
            .collect()
    }

    fn probe_cell_count(ranges: &[(u64, u64)]) -> u128 {
        ranges
            .iter()
            .map(|&(lo, hi)| (hi - lo + 1) as u128)
            .try_fold(1u128, |acc, n| acc.checked_mul(n))
            .unwrap_or(u128::MAX)
    }

    /// Members of `P_level` within `2^level` of `point`, found by probing the
    /// grid cells covering the search box. Ascending id.
    pub fn probe_candidates(&self, point: &Point, level: usize) -> Result<Vec<PointId>> {
        point.check_box(self.d, self.delta)?;
        if level > self.max_level {
            return Err(Error::InvalidArgument(format!("level {level} above top {}", self.max_level)));
        }
        Ok(self.probe_grid(point, level, &self.probe_ranges(point, level)))
    }

    fn probe_grid(&self, point: &Point, level: usize, ranges: &[(u64, u64)]) -> Vec<PointId> {
        let grid = &self.levels[level];
        let mut out = Vec::new();
        let mut key: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        loop {
            if let Some(cell) = grid.cells.get(key.as_slice()) {
                for &id in cell {
                    let other = &self.nodes[&id].record.point;
                    if within_pow2(point.coords(), other.coords(), level) {
                        out.push(id);
                    }
                }
            }
            // Odometer over the box.
            let mut axis = 0;
            loop {
                if axis == key.len() {
                    out.sort_unstable();
                    return out;
                }
                if key[axis] < ranges[axis].1 {
                    key[axis] += 1;
                    break;
                }
                key[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// Members of `P_level` within `2^level` of `point`, by linear scan.
    pub fn scan_candidates(&self, point: &Point, level: usize) -> Vec<PointId> {
        let mut out: Vec<PointId> = self
            .levels
            .get(level)
            .into_iter()
            .flat_map(|g| g.cells.values().flatten())
            .copied()
            .filter(|id| within_pow2(point.coords(), self.nodes[id].record.point.coords(), level))
            .collect();
        out.sort_unstable();
        out
    }

    fn nearest_member(&self, point: &Point, level: usize) -> Option<PointId> {
        let ranges = self.probe_ranges(point, level);
        let found = if Self::probe_cell_count(&ranges) > self.levels[level].len() as u128 {
            self.scan_candidates(point, level)
        } else {
            self.probe_grid(point, level, &ranges)
        };
        found.first().copied()
    }

    /// Continues the climb of `id`, which is a member of every level below
    /// `start` and of none from `start` on.
    fn ascend(&mut self, id: PointId, start: usize) {
        let point = self.nodes[&id].record.point.clone();
        for level in start..=self.max_level {
            if let Some(parent) = self.nearest_member(&point, level) {
                let node = self.nodes.get_mut(&id).expect("node exists");
                node.top = level - 1;
                node.link = Some(parent);
                self.diff[level].insert(id.0);
                let children = self.nodes.get_mut(&parent).expect("parent exists").children_at(level);
                let pos = children.binary_search(&id).unwrap_or_else(|p| p);
                children.insert(pos, id);
                return;
            }
            let node = self.nodes.get_mut(&id).expect("node exists");
            node.top = level;
            let key = Self::key(&node.scaled, level);
            self.levels[level].insert(key, id);
        }
        let node = self.nodes.get_mut(&id).expect("node exists");
        node.top = self.max_level;
        node.link = None;
    }

    pub fn insert(&mut self, point: Point) -> Result<PointId> {
        point.check_box(self.d, self.delta)?;
        let id = PointId(self.next_id);
        self.next_id += 1;
        self.total += 1;
        if let Some(existing) = self.by_point.get(&point) {
            let node = self.nodes.get_mut(existing).expect("indexed node exists");
            node.record.multiplicity += 1;
            node.copies.push(id);
            return Ok(id);
        }
        let scaled: Box<[u64]> = point.coords().iter().map(|&c| scale(c, self.d)).collect();
        self.levels[0].insert(Self::key(&scaled, 0), id);
        self.by_point.insert(point.clone(), id);
        self.nodes.insert(
            id,
            Node {
                record: PointRecord { point, id, multiplicity: 1 },
                copies: Vec::new(),
                scaled,
                top: 0,
                link: None,
                children: Vec::new(),
            },
        );
        self.ascend(id, 1);
        Ok(id)
    }

    pub fn delete(&mut self, point: &Point) -> Result<()> {
        point.check_box(self.d, self.delta)?;
        let id = *self.by_point.get(point).ok_or(Error::NotFound)?;
        self.total -= 1;
        {
            let node = self.nodes.get_mut(&id).expect("indexed node exists");
            if node.record.multiplicity > 1 {
                node.record.multiplicity -= 1;
                node.copies.pop();
                return Ok(());
            }
        }
        self.by_point.remove(point);
        let node = self.nodes.remove(&id).expect("indexed node exists");
        for level in 0..=node.top {
            self.levels[level].remove(&Self::key(&node.scaled, level), id);
        }
        if let Some(parent) = node.link {
            let level = node.top + 1;
            self.diff[level].remove(id.0);
            let siblings = self.nodes.get_mut(&parent).expect("parent exists").children_at(level);
            siblings.retain(|&c| c != id);
        }
        for (level, children) in node.children.iter().enumerate() {
            for &child in children {
                self.diff[level].remove(child.0);
                let c = self.nodes.get_mut(&child).expect("child exists");
                debug_assert_eq!(c.top + 1, level);
                c.link = None;
                self.ascend(child, level);
            }
        }
        Ok(())
    }

    pub fn cluster(&self, point: &Point, k: usize) -> Result<PointRecord> {
        hierarchy::representative(self, point, k)
    }

    /// Highest level `id` belongs to.
    pub fn top_level(&self, id: PointId) -> Option<usize> {
        self.nodes.get(&id).map(|n| n.top)
    }

    pub fn grid_level(&self, level: usize) -> Option<&GridLevel> {
        self.levels.get(level)
    }

    /// Cross-checks child lists against parent links. Returns a description
    /// of every mismatch.
    pub fn check_child_index(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (&id, node) in &self.nodes {
            if let Some(parent) = node.link {
                let level = node.top + 1;
                let listed = self
                    .nodes
                    .get(&parent)
                    .and_then(|p| p.children.get(level))
                    .is_some_and(|c| c.binary_search(&id).is_ok());
                if !listed {
                    problems.push(format!("{id} links to {parent} at level {level} but is not its child"));
                }
            } else if node.top != self.max_level {
                problems.push(format!("{id} stops at level {} without a link", node.top));
            }
            for (level, children) in node.children.iter().enumerate() {
                for child in children {
                    match self.nodes.get(child) {
                        Some(c) if c.link == Some(id) && c.top + 1 == level => {}
                        _ => problems.push(format!("{child} listed as child of {id} at level {level}")),
                    }
                }
                if children.windows(2).any(|w| w[0] >= w[1]) {
                    problems.push(format!("children of {id} at level {level} out of order"));
                }
            }
        }
        problems
    }
}

impl Family for LowDim {
    fn dim(&self) -> usize {
        self.d
    }

    fn delta(&self) -> i64 {
        self.delta
    }

    fn max_level(&self) -> usize {
        self.max_level
    }

    fn distinct_len(&self) -> usize {
        self.nodes.len()
    }

    fn total_len(&self) -> u64 {
        self.total
    }

    fn lookup(&self, point: &Point) -> Option<PointId> {
        self.by_point.get(point).copied()
    }

    fn record(&self, id: PointId) -> Option<&PointRecord> {
        self.nodes.get(&id).map(|n| &n.record)
    }

    fn ids(&self) -> Vec<PointId> {
        self.nodes.keys().copied().collect()
    }

    fn level_size(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, GridLevel::len)
    }

    fn is_member(&self, level: usize, id: PointId) -> bool {
        self.nodes.get(&id).is_some_and(|n| n.top >= level)
    }

    fn level_members(&self, level: usize) -> Vec<PointId> {
        self.nodes.iter().filter(|(_, n)| n.top >= level).map(|(&id, _)| id).collect()
    }

    fn parent(&self, level: usize, id: PointId) -> Result<PointId> {
        if level == 0 || level > self.max_level {
            return Err(Error::InvalidArgument(format!("no parent links at level {level}")));
        }
        let node = self.nodes.get(&id).ok_or(Error::NotFound)?;
        if node.top >= level {
            Ok(id)
        } else if node.top + 1 == level {
            node.link.ok_or_else(|| Error::Inconsistent(format!("{id} has no link at level {level}")))
        } else {
            Err(Error::NotAMember(id, level - 1))
        }
    }

    fn diff_rank(&self, level: usize, id: PointId) -> Option<usize> {
        self.diff.get(level).and_then(|s| s.rank(id.0))
    }

    fn diff_len(&self, level: usize) -> usize {
        self.diff.get(level).map_or(0, RankSet::len)
    }
}
