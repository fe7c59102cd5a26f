//! Randomly shifted grids for high dimension.
//!
//! Level `i` (for `1 <= i <= M`) holds the members of `P_{i-1}` in `g`
//! independently shifted grids with cells of side `2 sqrt(d) 2^i`. Every
//! member draws a rank in `[0, ell]`; a member is covered when one of its
//! cells holds a member of higher rank. `P_i` is a set of uncovered members
//! no two of which share a cell in any grid, and every uncovered member
//! outside that set shares a cell with one inside it. A member's parent is
//! reached by hopping to higher-rank cell mates until an uncovered one is
//! found, then to the set member in its cell.
//!
//! Changes to `P_i` propagate to level `i + 1` as member insertions and
//! removals. The whole structure is rebuilt with fresh randomness whenever
//! the number of distinct points leaves `[n0 / 2, 2 n0]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_integer::Roots;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::{self, level_count, Family};
use crate::model::{dist_sq, Config, Point, PointId, PointRecord};
use crate::rankset::RankSet;

const FRAC_BITS: u32 = 32;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform 64-bit draw for a record at a level, fixed by seed and epoch.
pub fn draw_u(seed: u64, epoch: u64, level: usize, id: PointId) -> u64 {
    let mut h = splitmix(seed);
    for v in [epoch, level as u64, id.0] {
        h = splitmix(h ^ v);
    }
    h
}

/// `t[j] ~ n0^(-j / ell) * 2^64`; `t[0]` admits every draw.
pub fn rank_thresholds(n0: usize, ell: usize) -> Vec<u64> {
    (0..=ell)
        .map(|j| {
            if j == 0 {
                u64::MAX
            } else {
                let p = (n0 as f64).powf(-(j as f64) / ell as f64);
                (p * 2f64.powi(64)).min(u64::MAX as f64) as u64
            }
        })
        .collect()
}

/// Largest `j` with `u < t[j]`, or 0.
pub fn rank_of(u: u64, thresholds: &[u64]) -> usize {
    (1..thresholds.len()).rev().find(|&j| u < thresholds[j]).unwrap_or(0)
}

/// Cell index of coordinate `c >= 0` on `level` for a shift of
/// `frac / 2^32` cell widths: `floor(c / (2^(level+1) sqrt(d)) + frac / 2^32)`.
pub fn cell_key(c: i64, level: usize, d: usize, frac: u32) -> i64 {
    let side = 2f64.powi(level as i32 + 1) * (d as f64).sqrt();
    let x = c as f64 / side + frac as f64 / 2f64.powi(FRAC_BITS as i32);
    if (x - x.round()).abs() > 1e-6 {
        return x.floor() as i64;
    }
    exact_cell_key(c, level, d, frac)
}

/// Integer-only evaluation of [`cell_key`].
pub fn exact_cell_key(c: i64, level: usize, d: usize, frac: u32) -> i64 {
    let c = c as u128;
    let scale = (d as u128) << (2 * (level + 1));
    let a = (c * c / scale).sqrt();
    // Carry iff frac(c / side) + frac / 2^F >= 1, i.e. c 2^F >= N side with
    // N = (a + 1) 2^F - frac.
    let n = ((a + 1) << FRAC_BITS) - frac as u128;
    let lhs = (c * c) << (2 * FRAC_BITS);
    let carry = match n.checked_mul(n).and_then(|v| v.checked_mul(scale)) {
        Some(rhs) => lhs >= rhs,
        None => false,
    };
    (a + carry as u128) as i64
}

#[derive(Debug, Clone)]
struct Cell {
    grid: u32,
    occupants: Vec<(PointId, u8)>,
    per_rank: Box<[u32]>,
    designated: Option<PointId>,
}

impl Cell {
    fn max_rank(&self) -> Option<usize> {
        self.per_rank.iter().rposition(|&n| n > 0)
    }
}

#[derive(Debug, Clone)]
struct Member {
    rank: u8,
    /// Grids in which a cell mate has higher rank.
    cover: u32,
    in_set: bool,
    slots: Box<[u32]>,
    pos: Box<[u32]>,
}

#[derive(Debug, Clone, Default)]
struct Level {
    cells: Vec<Cell>,
    free: Vec<u32>,
    index: HashMap<Box<[i64]>, u32>,
    members: HashMap<PointId, Member>,
    set: BTreeSet<PointId>,
    diff: RankSet,
}

#[derive(Debug, Clone)]
struct Entry {
    record: PointRecord,
    copies: Vec<PointId>,
}

/// Net change of one level's set during a batch: `+1` joined, `-1` left.
type Changes = BTreeMap<PointId, i8>;

fn note(changes: &mut Changes, id: PointId, delta: i8) {
    let v = changes.entry(id).or_insert(0);
    *v += delta;
    if *v == 0 {
        changes.remove(&id);
    }
}

#[derive(Debug, Clone)]
pub struct HighDim {
    d: usize,
    delta: i64,
    ell: usize,
    seed: u64,
    factor: f64,
    max_level: usize,
    next_id: u64,
    total: u64,
    by_point: HashMap<Point, PointId>,
    entries: BTreeMap<PointId, Entry>,
    epoch: u64,
    rebuilds: u64,
    n0: usize,
    grids: usize,
    thresholds: Vec<u64>,
    /// `shifts[level][grid * d + axis]`.
    shifts: Vec<Vec<u32>>,
    /// Index 0 unused.
    levels: Vec<Level>,
}

impl HighDim {
    pub fn new(cfg: &Config) -> Result<Self> {
        Self::with_initial_size(cfg, 2)
    }

    /// Starts with size estimate `n0` in place of the default 2.
    pub fn with_initial_size(cfg: &Config, n0: usize) -> Result<Self> {
        cfg.validate()?;
        if cfg.ell > u8::MAX as usize {
            return Err(Error::InvalidConfig("ell too large".into()));
        }
        let mut hd = HighDim {
            d: cfg.d,
            delta: cfg.delta,
            ell: cfg.ell,
            seed: cfg.seed,
            factor: cfg.grid_count_factor,
            max_level: level_count(cfg.d, cfg.delta),
            next_id: 0,
            total: 0,
            by_point: HashMap::new(),
            entries: BTreeMap::new(),
            epoch: 0,
            rebuilds: 0,
            n0: n0.max(2),
            grids: 0,
            thresholds: Vec::new(),
            shifts: Vec::new(),
            levels: Vec::new(),
        };
        hd.reset_levels();
        Ok(hd)
    }

    fn reset_levels(&mut self) {
        self.grids = ((self.factor * (self.n0 as f64).log2()).ceil() as usize).max(1);
        self.thresholds = rank_thresholds(self.n0, self.ell);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed) ^ splitmix(self.epoch ^ 0x5eed));
        self.shifts = (0..=self.max_level)
            .map(|level| {
                if level == 0 {
                    Vec::new()
                } else {
                    (0..self.grids * self.d).map(|_| rng.random::<u32>()).collect()
                }
            })
            .collect();
        self.levels = vec![Level::default(); self.max_level + 1];
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn rebuild_count(&self) -> u64 {
        self.rebuilds
    }

    pub fn size_estimate(&self) -> usize {
        self.n0
    }

    pub fn grid_count(&self) -> usize {
        self.grids
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    pub fn shift(&self, level: usize, grid: usize, axis: usize) -> u32 {
        self.shifts[level][grid * self.d + axis]
    }

    /// Rank stored for a member of `P_{level-1}` at `level`.
    pub fn rank(&self, level: usize, id: PointId) -> Option<usize> {
        self.levels.get(level)?.members.get(&id).map(|m| m.rank as usize)
    }

    pub fn cover(&self, level: usize, id: PointId) -> Option<u32> {
        self.levels.get(level)?.members.get(&id).map(|m| m.cover)
    }

    fn key(&self, point: &Point, level: usize, grid: usize) -> Box<[i64]> {
        let shifts = &self.shifts[level][grid * self.d..(grid + 1) * self.d];
        std::iter::once(grid as i64)
            .chain(point.coords().iter().zip(shifts).map(|(&c, &f)| cell_key(c, level, self.d, f)))
            .collect()
    }

    fn coords(&self, id: PointId) -> &Point {
        &self.entries[&id].record.point
    }

    fn designate(&mut self, level: usize, id: PointId, changes: &mut Changes) {
        let lv = &mut self.levels[level];
        let m = lv.members.get_mut(&id).expect("member exists");
        m.in_set = true;
        for &s in m.slots.iter() {
            lv.cells[s as usize].designated = Some(id);
        }
        lv.set.insert(id);
        lv.diff.remove(id.0);
        note(changes, id, 1);
    }

    fn undesignate(&mut self, level: usize, id: PointId, changes: &mut Changes) {
        let lv = &mut self.levels[level];
        let m = lv.members.get_mut(&id).expect("member exists");
        m.in_set = false;
        for &s in m.slots.iter() {
            lv.cells[s as usize].designated = None;
        }
        lv.set.remove(&id);
        lv.diff.insert(id.0);
        note(changes, id, -1);
    }

    fn try_admit(&mut self, level: usize, id: PointId, changes: &mut Changes) {
        let lv = &self.levels[level];
        let Some(m) = lv.members.get(&id) else { return };
        if m.cover == 0 && !m.in_set && m.slots.iter().all(|&s| lv.cells[s as usize].designated.is_none()) {
            self.designate(level, id, changes);
        }
    }

    /// Uncovered members of the given cells outside the set, ascending.
    fn uncovered_in(&self, level: usize, slots: &[u32]) -> BTreeSet<PointId> {
        let lv = &self.levels[level];
        slots
            .iter()
            .flat_map(|&s| lv.cells[s as usize].occupants.iter())
            .filter(|(y, _)| lv.members.get(y).is_some_and(|m| m.cover == 0 && !m.in_set))
            .map(|&(y, _)| y)
            .collect()
    }

    fn insert_member(&mut self, level: usize, id: PointId, changes: &mut Changes) {
        let point = self.coords(id).clone();
        let rank = rank_of(draw_u(self.seed, self.epoch, level, id), &self.thresholds);
        let keys: Vec<Box<[i64]>> = (0..self.grids).map(|g| self.key(&point, level, g)).collect();
        let ell = self.ell;
        let lv = &mut self.levels[level];
        let mut slots = Vec::with_capacity(keys.len());
        let mut pos = Vec::with_capacity(keys.len());
        let mut cover = 0u32;
        let mut newly_covered = Vec::new();
        for (grid, key) in keys.into_iter().enumerate() {
            let slot = match lv.index.get(&key) {
                Some(&s) => s,
                None => {
                    let cell = Cell {
                        grid: grid as u32,
                        occupants: Vec::new(),
                        per_rank: vec![0; ell + 1].into_boxed_slice(),
                        designated: None,
                    };
                    let s = match lv.free.pop() {
                        Some(s) => {
                            lv.cells[s as usize] = cell;
                            s
                        }
                        None => {
                            lv.cells.push(cell);
                            (lv.cells.len() - 1) as u32
                        }
                    };
                    lv.index.insert(key, s);
                    s
                }
            };
            let cell = &mut lv.cells[slot as usize];
            match cell.max_rank() {
                Some(top) if top > rank => cover += 1,
                Some(top) if top < rank => {
                    for &(y, r) in &cell.occupants {
                        if r as usize == top {
                            let m = lv.members.get_mut(&y).expect("occupant is a member");
                            m.cover += 1;
                            if m.cover == 1 {
                                newly_covered.push(y);
                            }
                        }
                    }
                }
                _ => {}
            }
            pos.push(cell.occupants.len() as u32);
            cell.occupants.push((id, rank as u8));
            cell.per_rank[rank] += 1;
            slots.push(slot);
        }
        lv.members.insert(
            id,
            Member { rank: rank as u8, cover, in_set: false, slots: slots.into(), pos: pos.into() },
        );
        lv.diff.insert(id.0);

        newly_covered.sort_unstable();
        newly_covered.dedup();
        let mut reprocess = Vec::new();
        for y in newly_covered {
            if self.levels[level].members[&y].in_set {
                self.undesignate(level, y, changes);
                reprocess.extend(self.levels[level].members[&y].slots.iter().copied());
            }
        }
        for y in self.uncovered_in(level, &reprocess) {
            self.try_admit(level, y, changes);
        }
        self.try_admit(level, id, changes);
    }

    fn remove_member(&mut self, level: usize, id: PointId, changes: &mut Changes) {
        let point = self.coords(id).clone();
        let was_in = self.levels[level].members[&id].in_set;
        if was_in {
            self.undesignate(level, id, changes);
        }
        let member = self.levels[level].members.remove(&id).expect("member exists");
        self.levels[level].diff.remove(id.0);
        let mut candidates = BTreeSet::new();
        let mut emptied = Vec::new();
        {
            let lv = &mut self.levels[level];
            for (&slot, &p) in member.slots.iter().zip(member.pos.iter()) {
                let cell = &mut lv.cells[slot as usize];
                cell.occupants.swap_remove(p as usize);
                if let Some(&(moved, _)) = cell.occupants.get(p as usize) {
                    let grid = cell.grid as usize;
                    lv.members.get_mut(&moved).expect("occupant is a member").pos[grid] = p;
                }
                cell.per_rank[member.rank as usize] -= 1;
                if cell.occupants.is_empty() {
                    emptied.push((cell.grid as usize, slot));
                    continue;
                }
                let top = cell.max_rank().expect("cell nonempty");
                if top < member.rank as usize {
                    for &(y, r) in &cell.occupants {
                        if r as usize == top {
                            let m = lv.members.get_mut(&y).expect("occupant is a member");
                            m.cover -= 1;
                            if m.cover == 0 {
                                candidates.insert(y);
                            }
                        }
                    }
                }
                if was_in {
                    for &(y, _) in &cell.occupants {
                        if lv.members[&y].cover == 0 {
                            candidates.insert(y);
                        }
                    }
                }
            }
        }
        for (grid, slot) in emptied {
            let key = self.key(&point, level, grid);
            let lv = &mut self.levels[level];
            lv.index.remove(&key);
            lv.cells[slot as usize].designated = None;
            lv.free.push(slot);
        }
        for y in candidates {
            self.try_admit(level, y, changes);
        }
    }

    /// Applies member changes at `start` and propagates set changes upward.
    fn cascade(&mut self, start: usize, mut removals: Vec<PointId>, mut inserts: Vec<PointId>) {
        for level in start..=self.max_level {
            if removals.is_empty() && inserts.is_empty() {
                break;
            }
            let mut changes = Changes::new();
            removals.sort_unstable();
            inserts.sort_unstable();
            for &id in &removals {
                self.remove_member(level, id, &mut changes);
            }
            for &id in &inserts {
                self.insert_member(level, id, &mut changes);
            }
            removals = changes.iter().filter(|(_, &v)| v < 0).map(|(&id, _)| id).collect();
            inserts = changes.iter().filter(|(_, &v)| v > 0).map(|(&id, _)| id).collect();
        }
    }

    /// Rebuilds when the last update moved the distinct count out of
    /// `[n0 / 2, 2 n0]`: above it after an insertion, below it after a
    /// deletion. A count still climbing towards the initial estimate does
    /// not trigger.
    fn maybe_rebuild(&mut self, grew: bool) {
        let n = self.entries.len();
        let out = if grew { n > 2 * self.n0 } else { 2 * n < self.n0 };
        if !out {
            return;
        }
        self.n0 = n.max(2);
        self.epoch += 1;
        self.rebuilds += 1;
        self.reset_levels();
        let ids: Vec<PointId> = self.entries.keys().copied().collect();
        for id in ids {
            self.cascade(1, Vec::new(), vec![id]);
        }
    }

    pub fn insert(&mut self, point: Point) -> Result<PointId> {
        point.check_box(self.d, self.delta)?;
        let id = PointId(self.next_id);
        self.next_id += 1;
        self.total += 1;
        if let Some(existing) = self.by_point.get(&point) {
            let e = self.entries.get_mut(existing).expect("indexed entry exists");
            e.record.multiplicity += 1;
            e.copies.push(id);
            return Ok(id);
        }
        self.by_point.insert(point.clone(), id);
        self.entries.insert(id, Entry { record: PointRecord { point, id, multiplicity: 1 }, copies: Vec::new() });
        self.cascade(1, Vec::new(), vec![id]);
        self.maybe_rebuild(true);
        Ok(id)
    }

    pub fn delete(&mut self, point: &Point) -> Result<()> {
        point.check_box(self.d, self.delta)?;
        let id = *self.by_point.get(point).ok_or(Error::NotFound)?;
        self.total -= 1;
        {
            let e = self.entries.get_mut(&id).expect("indexed entry exists");
            if e.record.multiplicity > 1 {
                e.record.multiplicity -= 1;
                e.copies.pop();
                return Ok(());
            }
        }
        self.cascade(1, vec![id], Vec::new());
        self.by_point.remove(point);
        self.entries.remove(&id);
        self.maybe_rebuild(false);
        Ok(())
    }

    pub fn cluster(&self, point: &Point, k: usize) -> Result<PointRecord> {
        hierarchy::representative(self, point, k)
    }

    /// Parent of a member of `P_{level-1} \ P_level`.
    fn find_parent(&self, level: usize, id: PointId) -> Result<PointId> {
        let lv = &self.levels[level];
        let origin = self.coords(id).coords();
        let nearest = |cands: &mut dyn Iterator<Item = PointId>| {
            cands.min_by_key(|&c| (dist_sq(origin, self.coords(c).coords()), c))
        };
        // Walk every higher-rank chain from `id`; collect reachable set
        // members and designated records, keep the one nearest to `id`.
        let mut seen = BTreeSet::from([id]);
        let mut frontier = vec![id];
        let mut found: Vec<PointId> = Vec::new();
        while let Some(cur) = frontier.pop() {
            let m = &lv.members[&cur];
            if m.in_set {
                found.push(cur);
                continue;
            }
            found.extend(m.slots.iter().filter_map(|&s| lv.cells[s as usize].designated));
            if m.cover == 0 {
                continue;
            }
            let rank = m.rank;
            for &s in &m.slots {
                for &(y, r) in &lv.cells[s as usize].occupants {
                    if r > rank && seen.insert(y) {
                        frontier.push(y);
                    }
                }
            }
        }
        if let Some(p) = nearest(&mut found.into_iter()) {
            return Ok(p);
        }
        Err(Error::Inconsistent(format!("no parent for {id} at level {level}")))
    }

    /// Recounts occupancy and cover from the cells and compares with the
    /// incremental bookkeeping. Returns a description of every mismatch.
    pub fn check_bookkeeping(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for level in 1..=self.max_level {
            let lv = &self.levels[level];
            let expected: BTreeSet<PointId> = if level == 1 {
                self.entries.keys().copied().collect()
            } else {
                self.levels[level - 1].set.clone()
            };
            let mut have: Vec<PointId> = lv.members.keys().copied().collect();
            have.sort_unstable();
            if have != expected.iter().copied().collect::<Vec<_>>() {
                problems.push(format!("level {level}: member set differs from the level below"));
            }
            for (&id, m) in &lv.members {
                let mut cover = 0;
                for (grid, (&s, &p)) in m.slots.iter().zip(m.pos.iter()).enumerate() {
                    let cell = &lv.cells[s as usize];
                    if cell.grid as usize != grid || cell.occupants.get(p as usize).map(|o| o.0) != Some(id) {
                        problems.push(format!("level {level}: {id} misplaced in grid {grid}"));
                    }
                    if lv.index.get(&self.key(self.coords(id), level, grid)) != Some(&s) {
                        problems.push(format!("level {level}: {id} indexed under a stale key in grid {grid}"));
                    }
                    if cell.occupants.iter().any(|&(_, r)| r > m.rank) {
                        cover += 1;
                    }
                    if m.in_set && cell.designated != Some(id) {
                        problems.push(format!("level {level}: {id} in the set but not designated"));
                    }
                }
                if cover != m.cover {
                    problems.push(format!("level {level}: {id} cover {} but recount {cover}", m.cover));
                }
                if m.in_set != lv.set.contains(&id) || m.in_set == lv.diff.contains(id.0) {
                    problems.push(format!("level {level}: {id} set flags disagree"));
                }
            }
            let live: usize = lv.index.len();
            if live + lv.free.len() != lv.cells.len() {
                problems.push(format!("level {level}: slab leaks cells"));
            }
        }
        problems
    }
}

impl Family for HighDim {
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
        self.entries.len()
    }

    fn total_len(&self) -> u64 {
        self.total
    }

    fn lookup(&self, point: &Point) -> Option<PointId> {
        self.by_point.get(point).copied()
    }

    fn record(&self, id: PointId) -> Option<&PointRecord> {
        self.entries.get(&id).map(|e| &e.record)
    }

    fn ids(&self) -> Vec<PointId> {
        self.entries.keys().copied().collect()
    }

    fn level_size(&self, level: usize) -> usize {
        match level {
            0 => self.entries.len(),
            l => self.levels.get(l).map_or(0, |lv| lv.set.len()),
        }
    }

    fn is_member(&self, level: usize, id: PointId) -> bool {
        match level {
            0 => self.entries.contains_key(&id),
            l => self.levels.get(l).is_some_and(|lv| lv.set.contains(&id)),
        }
    }

    fn level_members(&self, level: usize) -> Vec<PointId> {
        match level {
            0 => self.ids(),
            l => self.levels.get(l).map_or_else(Vec::new, |lv| lv.set.iter().copied().collect()),
        }
    }

    fn parent(&self, level: usize, id: PointId) -> Result<PointId> {
        if level == 0 || level > self.max_level {
            return Err(Error::InvalidArgument(format!("no parent links at level {level}")));
        }
        if !self.entries.contains_key(&id) {
            return Err(Error::NotFound);
        }
        match self.levels[level].members.get(&id) {
            None => Err(Error::NotAMember(id, level - 1)),
            Some(m) if m.in_set => Ok(id),
            Some(_) => self.find_parent(level, id),
        }
    }

    fn diff_rank(&self, level: usize, id: PointId) -> Option<usize> {
        if level == 0 {
            return None;
        }
        self.levels.get(level).and_then(|lv| lv.diff.rank(id.0))
    }

    fn diff_len(&self, level: usize) -> usize {
        if level == 0 {
            return 0;
        }
        self.levels.get(level).map_or(0, |lv| lv.diff.len())
    }
}

/// Fraction of `trials` random shifts on `level` that put `a` and `b` in
/// different cells of a single grid.
pub fn split_rate(a: &Point, b: &Point, level: usize, trials: usize, seed: u64) -> f64 {
    let d = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = 0usize;
    let mut fracs = vec![0u32; d];
    for _ in 0..trials {
        fracs.iter_mut().for_each(|f| *f = rng.random());
        let apart = a
            .coords()
            .iter()
            .zip(b.coords())
            .zip(&fracs)
            .any(|((&x, &y), &f)| cell_key(x, level, d, f) != cell_key(y, level, d, f));
        split += apart as usize;
    }
    split as f64 / trials.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::validate_family;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn grid_points(n: usize, d: usize, delta: i64, salt: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(salt);
        let mut seen = BTreeSet::new();
        while seen.len() < n {
            seen.insert((0..d).map(|_| rng.random_range(1..=delta)).collect::<Vec<i64>>());
        }
        seen.into_iter().map(Point::new).collect()
    }

    fn healthy(hd: &HighDim) {
        assert!(hd.check_bookkeeping().is_empty(), "{:?}", hd.check_bookkeeping());
        let alpha = 2.0 * hd.d as f64 * (hd.ell as f64 + 1.0);
        let report = validate_family(hd, alpha);
        let non_separation: Vec<_> = report
            .violations
            .iter()
            .filter(|v| !matches!(v, hierarchy::Violation::Separation { .. } | hierarchy::Violation::Root { .. }))
            .collect();
        assert!(non_separation.is_empty(), "{non_separation:?}");
    }

    #[test]
    fn exact_key_matches_float_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20_000 {
            let c = rng.random_range(1..=1i64 << 31);
            let level = rng.random_range(1..20usize);
            let d = rng.random_range(1..300usize);
            let f: u32 = rng.random();
            assert_eq!(cell_key(c, level, d, f), exact_cell_key(c, level, d, f), "c={c} level={level} d={d} f={f}");
        }
    }

    #[test]
    fn key_boundaries() {
        // d = 4, level 1: side 8.
        assert_eq!(exact_cell_key(7, 1, 4, 0), 0);
        assert_eq!(exact_cell_key(8, 1, 4, 0), 1);
        assert_eq!(exact_cell_key(4, 1, 4, 1 << 31), 1);
        assert_eq!(exact_cell_key(3, 1, 4, 1 << 31), 0);
        assert_eq!(cell_key(8, 1, 4, 0), 1);
        assert_eq!(cell_key(4, 1, 4, 1 << 31), 1);
    }

    #[test]
    fn ranks_follow_thresholds() {
        let t = rank_thresholds(16, 2);
        assert_eq!(t[0], u64::MAX);
        assert_eq!(t[1], 1 << 62);
        assert_eq!(t[2], 1 << 60);
        assert_eq!(rank_of(0, &t), 2);
        assert_eq!(rank_of(1 << 61, &t), 1);
        assert_eq!(rank_of(u64::MAX, &t), 0);
    }

    #[test]
    fn seeded_fixture_is_reproducible() {
        let cfg = Config::high_dim(2, 16, 2, 42);
        let pts = grid_points(8, 2, 16, 7);
        let build = || {
            let mut hd = HighDim::with_initial_size(&cfg, 8).unwrap();
            for p in &pts {
                hd.insert(p.clone()).unwrap();
            }
            hd
        };
        let mut a = build();
        let b = build();
        assert_eq!(a.rebuild_count(), 0);
        assert_eq!(hierarchy::export_dendrogram(&a).unwrap(), hierarchy::export_dendrogram(&b).unwrap());
        healthy(&a);
        for p in &pts[..3] {
            a.delete(p).unwrap();
            healthy(&a);
        }
        assert_eq!(a.distinct_len(), 5);
        assert_eq!(a.rebuild_count(), 0);
    }

    #[test]
    fn rebuild_schedule() {
        let cfg = Config::high_dim(3, 32, 2, 1);
        let pts = grid_points(9, 3, 32, 3);
        let mut hd = HighDim::new(&cfg).unwrap();
        for p in &pts[..4] {
            hd.insert(p.clone()).unwrap();
        }
        let before = hd.rebuild_count();
        assert_eq!(hd.size_estimate(), 2);
        for p in &pts[4..] {
            hd.insert(p.clone()).unwrap();
        }
        assert_eq!(hd.rebuild_count(), before + 1);
        assert_eq!(hd.size_estimate(), 5);
        healthy(&hd);

        let mut hd = HighDim::with_initial_size(&cfg, 4).unwrap();
        for p in &pts {
            hd.insert(p.clone()).unwrap();
        }
        assert_eq!(hd.rebuild_count(), 1);
        assert_eq!(hd.size_estimate(), 9);
        assert_eq!(hd.epoch(), 1);
        for p in &pts[..5] {
            hd.delete(p).unwrap();
        }
        assert_eq!(hd.rebuild_count(), 2);
        assert_eq!(hd.size_estimate(), 4);
        healthy(&hd);

        let hd = HighDim::with_initial_size(&cfg, 64).unwrap();
        assert_eq!(hd.grid_count(), 60);
    }

    #[test]
    fn oscillation_does_not_rebuild() {
        let cfg = Config::high_dim(2, 64, 1, 5);
        let mut hd = HighDim::with_initial_size(&cfg, 8).unwrap();
        let pts = grid_points(9, 2, 64, 11);
        for p in &pts[..8] {
            hd.insert(p.clone()).unwrap();
        }
        for _ in 0..20 {
            hd.insert(pts[8].clone()).unwrap();
            hd.delete(&pts[8]).unwrap();
        }
        assert_eq!(hd.rebuild_count(), 0);
        healthy(&hd);
    }

    #[test]
    fn shrinks_to_empty() {
        let cfg = Config::high_dim(4, 64, 3, 8);
        let mut hd = HighDim::new(&cfg).unwrap();
        let pts = grid_points(40, 4, 64, 4);
        for p in &pts {
            hd.insert(p.clone()).unwrap();
        }
        healthy(&hd);
        for p in pts.iter().rev() {
            hd.delete(p).unwrap();
            healthy(&hd);
        }
        assert!(hd.is_empty());
        for level in 1..=hd.max_level() {
            assert_eq!(hd.level_size(level), 0);
            assert_eq!(hd.diff_len(level), 0);
        }
        assert_eq!(hd.delete(&pts[0]), Err(Error::NotFound));
    }

    #[test]
    fn duplicates_keep_structure() {
        let cfg = Config::high_dim(2, 16, 1, 3);
        let mut hd = HighDim::with_initial_size(&cfg, 4).unwrap();
        let pts = grid_points(4, 2, 16, 2);
        for p in &pts {
            hd.insert(p.clone()).unwrap();
        }
        let before = hierarchy::export_dendrogram(&hd).unwrap();
        let copy = hd.insert(pts[1].clone()).unwrap();
        assert_eq!(copy, PointId(4));
        assert_eq!(hd.record(PointId(1)).unwrap().multiplicity, 2);
        hd.delete(&pts[1]).unwrap();
        assert_eq!(hierarchy::export_dendrogram(&hd).unwrap(), before);
    }

    #[test]
    fn parents_are_close_members() {
        let cfg = Config::high_dim(3, 32, 2, 17);
        let mut hd = HighDim::new(&cfg).unwrap();
        for p in grid_points(50, 3, 32, 21) {
            hd.insert(p).unwrap();
        }
        let hops_bound = 2 * 3 * (2 + 1);
        for level in 1..=hd.max_level() {
            for id in hd.level_members(level - 1) {
                let p = hd.parent(level, id).unwrap();
                assert!(hd.is_member(level, p));
                let limit = (hops_bound as u128).pow(2) << (2 * level);
                assert!(dist_sq(hd.coords(id).coords(), hd.coords(p).coords()) <= limit);
            }
        }
        assert!(matches!(hd.parent(0, PointId(0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn separation_probability_check() {
        // Diagonal pair at distance exactly 2^i in four dimensions.
        let a = Point::new(vec![10, 10, 10, 10]);
        let b = Point::new(vec![11, 11, 11, 11]);
        let rate = split_rate(&a, &b, 1, 20_000, 1);
        assert!(rate <= 0.51, "{rate}");
        let a = Point::new(vec![100, 7]);
        let b = Point::new(vec![104, 7]);
        let rate = split_rate(&a, &b, 2, 20_000, 2);
        assert!((rate - 4.0 / (8.0 * 2f64.sqrt())).abs() < 0.02, "{rate}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_updates_keep_invariants(
            seed in any::<u64>(),
            ell in 1usize..4,
            ops in proptest::collection::vec((any::<bool>(), 1i64..=16, 1i64..=16), 1..60),
        ) {
            let mut hd = HighDim::new(&Config::high_dim(2, 16, ell, seed)).unwrap();
            for (ins, x, y) in ops {
                let p = Point::new(vec![x, y]);
                if ins {
                    hd.insert(p).unwrap();
                } else {
                    let _ = hd.delete(&p);
                }
                prop_assert!(hd.check_bookkeeping().is_empty());
            }
            healthy(&hd);
        }
    }
}
