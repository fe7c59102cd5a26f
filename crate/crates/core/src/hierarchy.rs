//! Backend-independent view of a good family `P_0 ⊇ P_1 ⊇ ... ⊇ P_M`.
//!
//! Both dynamic structures implement [`Family`]. Everything a caller can ask
//! of a hierarchy (ancestors, representatives for a given `k`, materialized
//! clusterings, the dendrogram export and exhaustive validation) is written
//! once here against that trait.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{dist_sq, Point, PointId, PointRecord};
use crate::rankset::RankSet;

/// Number of the top level: the smallest `M` with `2^M >= sqrt(d) * (delta - 1)`.
///
/// Returns 0 for `delta == 1`. For `delta >= 2` the result is at least 1 so
/// that two distinct points always meet at a separated level.
pub fn level_count(d: usize, delta: i64) -> usize {
    if delta <= 1 {
        return 0;
    }
    let span = (delta - 1) as u128;
    let target = (d as u128) * span * span;
    let mut m = 0usize;
    while (1u128 << (2 * m)) < target {
        m += 1;
    }
    m.max(1)
}

/// Read access to a nested family with parent links and ordered
/// difference sets `P_{i-1} \ P_i`.
pub trait Family {
    fn dim(&self) -> usize;
    fn delta(&self) -> i64;
    fn max_level(&self) -> usize;
    /// `|P_0|`.
    fn distinct_len(&self) -> usize;
    /// Number of stored copies, counting multiplicity.
    fn total_len(&self) -> u64;
    fn lookup(&self, point: &Point) -> Option<PointId>;
    fn record(&self, id: PointId) -> Option<&PointRecord>;
    /// All canonical ids in ascending order.
    fn ids(&self) -> Vec<PointId>;
    fn level_size(&self, level: usize) -> usize;
    fn is_member(&self, level: usize, id: PointId) -> bool;
    /// Members of `P_level` in ascending id order.
    fn level_members(&self, level: usize) -> Vec<PointId>;
    /// For `1 <= level <= M` and `id` in `P_{level-1}`, the parent in `P_level`.
    /// Members of `P_level` are their own parent.
    fn parent(&self, level: usize, id: PointId) -> Result<PointId>;
    /// 1-based rank of `id` within `P_{level-1} \ P_level` by ascending id.
    fn diff_rank(&self, level: usize, id: PointId) -> Option<usize>;
    fn diff_len(&self, level: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.distinct_len() == 0
    }
}

fn check_level<F: Family + ?Sized>(fam: &F, level: usize) -> Result<()> {
    if level > fam.max_level() {
        return Err(Error::InvalidArgument(format!(
            "level {level} exceeds the top level {}",
            fam.max_level()
        )));
    }
    Ok(())
}

/// `p^level(id)`: follow parent links from level 1 up to `level`.
pub fn ancestor_id<F: Family + ?Sized>(fam: &F, id: PointId, level: usize) -> Result<PointId> {
    check_level(fam, level)?;
    if fam.record(id).is_none() {
        return Err(Error::NotFound);
    }
    let mut cur = id;
    for i in 1..=level {
        cur = fam.parent(i, cur)?;
    }
    Ok(cur)
}

pub fn ancestor<F: Family + ?Sized>(fam: &F, point: &Point, level: usize) -> Result<PointRecord> {
    let id = fam.lookup(point).ok_or(Error::NotFound)?;
    let anc = ancestor_id(fam, id, level)?;
    fam.record(anc).cloned().ok_or(Error::NotFound)
}

/// Representative of `id` in the clustering with exactly `min(k, |P_0|)`
/// clusters.
///
/// With `i` the first level holding at most `k` members, the
/// representatives are `P_i` plus the first `k - |P_i|` elements of
/// `P_{i-1} \ P_i` by id.
pub fn representative_id<F: Family + ?Sized>(fam: &F, id: PointId, k: usize) -> Result<PointId> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if fam.is_empty() {
        return Err(Error::Empty);
    }
    if fam.record(id).is_none() {
        return Err(Error::NotFound);
    }
    let level = (0..=fam.max_level())
        .find(|&j| fam.level_size(j) <= k)
        .ok_or(Error::Degenerate { k })?;
    if level == 0 {
        return Ok(id);
    }
    let q = ancestor_id(fam, id, level - 1)?;
    let promoted = k - fam.level_size(level);
    match fam.diff_rank(level, q) {
        Some(rank) if rank <= promoted => Ok(q),
        _ => fam.parent(level, q),
    }
}

pub fn representative<F: Family + ?Sized>(fam: &F, point: &Point, k: usize) -> Result<PointRecord> {
    if fam.is_empty() {
        return Err(Error::Empty);
    }
    let id = fam.lookup(point).ok_or(Error::NotFound)?;
    let rep = representative_id(fam, id, k)?;
    fam.record(rep).cloned().ok_or(Error::NotFound)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub representative: PointId,
    /// Canonical ids of the coordinates in this cluster, ascending.
    pub members: Vec<PointId>,
    /// Total multiplicity of the members.
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clustering {
    pub k: usize,
    /// Ordered by representative id.
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn representatives(&self) -> Vec<PointId> {
        self.clusters.iter().map(|c| c.representative).collect()
    }

    /// Cluster label of every id.
    pub fn assignment(&self) -> HashMap<PointId, PointId> {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |&m| (m, c.representative)))
            .collect()
    }
}

/// Groups every stored coordinate by its representative for `k`.
/// `k` larger than `|P_0|` is treated as `|P_0|`.
pub fn clustering_at_k<F: Family + ?Sized>(fam: &F, k: usize) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if fam.is_empty() {
        return Err(Error::Empty);
    }
    let mut groups: BTreeMap<PointId, Cluster> = BTreeMap::new();
    for id in fam.ids() {
        let rep = representative_id(fam, id, k)?;
        let weight = fam.record(id).map_or(0, |r| r.multiplicity);
        let entry = groups.entry(rep).or_insert_with(|| Cluster {
            representative: rep,
            members: Vec::new(),
            weight: 0,
        });
        entry.members.push(id);
        entry.weight += weight;
    }
    Ok(Clustering { k, clusters: groups.into_values().collect() })
}

/// The compacted hierarchy: per level its members and the link of every
/// member of the level below.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DendrogramExport {
    pub max_level: usize,
    pub n_distinct: usize,
    pub n_total: u64,
    pub level_sizes: Vec<usize>,
    pub members: Vec<Vec<PointId>>,
    /// `links[i]` holds `(child, parent)` for every child in `P_{i-1}`;
    /// `links[0]` is empty.
    pub links: Vec<Vec<(PointId, PointId)>>,
}

impl DendrogramExport {
    /// Line format: `H <M> <n_distinct> <n_total>`, then `S <level> <size>`
    /// for each level, then `L <level> <child> <parent>` ordered by level
    /// and child id. An empty structure yields the header alone.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "H {} {} {}", self.max_level, self.n_distinct, self.n_total);
        if self.n_distinct == 0 {
            return out;
        }
        for (level, size) in self.level_sizes.iter().enumerate() {
            let _ = writeln!(out, "S {level} {size}");
        }
        for (level, links) in self.links.iter().enumerate() {
            for (child, parent) in links {
                let _ = writeln!(out, "L {level} {child} {parent}");
            }
        }
        out
    }
}

pub fn export_dendrogram<F: Family + ?Sized>(fam: &F) -> Result<DendrogramExport> {
    let max_level = fam.max_level();
    if fam.is_empty() {
        return Ok(DendrogramExport {
            max_level,
            n_distinct: 0,
            n_total: 0,
            level_sizes: Vec::new(),
            members: Vec::new(),
            links: Vec::new(),
        });
    }
    let members: Vec<Vec<PointId>> = (0..=max_level).map(|i| fam.level_members(i)).collect();
    let mut links = vec![Vec::new()];
    for level in 1..=max_level {
        let mut at_level = Vec::with_capacity(members[level - 1].len());
        for &child in &members[level - 1] {
            at_level.push((child, fam.parent(level, child)?));
        }
        links.push(at_level);
    }
    Ok(DendrogramExport {
        max_level,
        n_distinct: fam.distinct_len(),
        n_total: fam.total_len(),
        level_sizes: members.iter().map(Vec::len).collect(),
        members,
        links,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// `|P_0|` differs from the number of stored coordinates.
    BaseLevel { expected: usize, got: usize },
    /// A member of `P_level` missing from `P_{level-1}`.
    Nesting { level: usize, id: PointId },
    /// `|P_M| != 1` for a nonempty structure.
    Root { size: usize },
    /// Two members of `P_level` within `2^level`.
    Separation { level: usize, a: PointId, b: PointId, distance: f64 },
    /// A parent farther than `alpha * 2^level`.
    ParentDistance { level: usize, id: PointId, parent: PointId, distance: f64 },
    /// A parent outside `P_level`, or a member not linked to itself.
    ParentNotMember { level: usize, id: PointId, parent: PointId },
    /// `p^level(x)` farther than `alpha * 2^(level+1)`.
    AncestorDistance { level: usize, id: PointId, ancestor: PointId, distance: f64 },
    /// A parent link could not be computed.
    ParentLookup { level: usize, id: PointId, detail: String },
    /// Sizes or difference sets disagree with the member sets.
    Bookkeeping { level: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BaseLevel { expected, got } => {
                write!(f, "base: |P_0| = {got}, expected {expected}")
            }
            Violation::Nesting { level, id } => write!(f, "nesting: {id} in P_{level} but not below"),
            Violation::Root { size } => write!(f, "root: top level has {size} members"),
            Violation::Separation { level, a, b, distance } => {
                write!(f, "separation: level {level} pair ({a}, {b}) at distance {distance}")
            }
            Violation::ParentDistance { level, id, parent, distance } => {
                write!(f, "parent: level {level} {id} -> {parent} at distance {distance}")
            }
            Violation::ParentNotMember { level, id, parent } => {
                write!(f, "parent: level {level} {id} -> {parent} is not a valid member link")
            }
            Violation::AncestorDistance { level, id, ancestor, distance } => {
                write!(f, "ancestor: level {level} {id} -> {ancestor} at distance {distance}")
            }
            Violation::ParentLookup { level, id, detail } => {
                write!(f, "lookup: level {level} {id}: {detail}")
            }
            Violation::Bookkeeping { level, detail } => write!(f, "bookkeeping: level {level}: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn separation_count(&self) -> usize {
        self.violations.iter().filter(|v| matches!(v, Violation::Separation { .. })).count()
    }
}

fn exceeds(sq: u128, alpha: f64, level: usize) -> bool {
    let bound = alpha * (level as f64).exp2();
    (sq as f64) > bound * bound
}

/// Exhaustive check of the family conditions with parent factor `alpha`.
///
/// Quadratic in the number of points per level; meant for small instances.
pub fn validate_family<F: Family + ?Sized>(fam: &F, alpha: f64) -> ValidationReport {
    let mut violations = Vec::new();
    if fam.is_empty() {
        return ValidationReport { alpha, violations };
    }
    let max_level = fam.max_level();
    let members: Vec<Vec<PointId>> = (0..=max_level).map(|i| fam.level_members(i)).collect();
    if members[0].len() != fam.distinct_len() {
        violations.push(Violation::BaseLevel { expected: fam.distinct_len(), got: members[0].len() });
    }
    let point = |id: PointId| fam.record(id).map(|r| r.point.coords().to_vec());

    for level in 0..=max_level {
        if fam.level_size(level) != members[level].len() {
            violations.push(Violation::Bookkeeping {
                level,
                detail: format!(
                    "level_size {} but {} members",
                    fam.level_size(level),
                    members[level].len()
                ),
            });
        }
        if level == 0 {
            continue;
        }
        let below: BTreeSet<PointId> = members[level - 1].iter().copied().collect();
        for &id in &members[level] {
            if !below.contains(&id) {
                violations.push(Violation::Nesting { level, id });
            }
        }
        // Separation.
        let coords: Vec<(PointId, Vec<i64>)> =
            members[level].iter().filter_map(|&id| point(id).map(|c| (id, c))).collect();
        let limit = 1u128 << (2 * level);
        for (a, (ida, ca)) in coords.iter().enumerate() {
            for (idb, cb) in &coords[a + 1..] {
                let sq = dist_sq(ca, cb);
                if sq <= limit {
                    violations.push(Violation::Separation {
                        level,
                        a: *ida,
                        b: *idb,
                        distance: (sq as f64).sqrt(),
                    });
                }
            }
        }
        // Difference set bookkeeping.
        let upper: BTreeSet<PointId> = members[level].iter().copied().collect();
        let diff: Vec<PointId> = members[level - 1].iter().copied().filter(|id| !upper.contains(id)).collect();
        if fam.diff_len(level) != diff.len() {
            violations.push(Violation::Bookkeeping {
                level,
                detail: format!("diff_len {} but {} non-promoted", fam.diff_len(level), diff.len()),
            });
        }
        for (pos, &id) in diff.iter().enumerate() {
            if fam.diff_rank(level, id) != Some(pos + 1) {
                violations.push(Violation::Bookkeeping {
                    level,
                    detail: format!("rank of {id} is {:?}, expected {}", fam.diff_rank(level, id), pos + 1),
                });
            }
        }
        // Parent links.
        for &id in &members[level - 1] {
            match fam.parent(level, id) {
                Ok(parent) => {
                    let linked_ok = upper.contains(&parent) && (!upper.contains(&id) || parent == id);
                    if !linked_ok {
                        violations.push(Violation::ParentNotMember { level, id, parent });
                        continue;
                    }
                    if let (Some(a), Some(b)) = (point(id), point(parent)) {
                        let sq = dist_sq(&a, &b);
                        if exceeds(sq, alpha, level) {
                            violations.push(Violation::ParentDistance {
                                level,
                                id,
                                parent,
                                distance: (sq as f64).sqrt(),
                            });
                        }
                    }
                }
                Err(e) => violations.push(Violation::ParentLookup { level, id, detail: e.to_string() }),
            }
        }
    }
    if members[max_level].len() != 1 {
        violations.push(Violation::Root { size: members[max_level].len() });
    }

    // Accumulated distance to ancestors.
    let has_link_errors = violations
        .iter()
        .any(|v| matches!(v, Violation::ParentLookup { .. } | Violation::ParentNotMember { .. }));
    if !has_link_errors {
        for &id in &members[0] {
            let Some(origin) = point(id) else { continue };
            let mut cur = id;
            for level in 1..=max_level {
                match fam.parent(level, cur) {
                    Ok(p) => cur = p,
                    Err(_) => break,
                }
                if let Some(c) = point(cur) {
                    let sq = dist_sq(&origin, &c);
                    if exceeds(sq, alpha, level + 1) {
                        violations.push(Violation::AncestorDistance {
                            level,
                            id,
                            ancestor: cur,
                            distance: (sq as f64).sqrt(),
                        });
                    }
                }
            }
        }
    }
    ValidationReport { alpha, violations }
}

/// An explicit, owned family: the output of the static construction and a
/// frozen snapshot of either dynamic structure.
#[derive(Debug, Clone)]
pub struct GoodFamily {
    d: usize,
    delta: i64,
    max_level: usize,
    records: BTreeMap<PointId, PointRecord>,
    by_point: HashMap<Point, PointId>,
    levels: Vec<BTreeSet<PointId>>,
    /// `links[i]`: parent for each `x` in `P_{i-1} \ P_i`.
    links: Vec<BTreeMap<PointId, PointId>>,
    diff: Vec<RankSet>,
}

impl GoodFamily {
    /// Builds a family from member sets (`levels[0..=M]`) and the parent of
    /// every non-promoted record (`links[i]` for level `i`).
    pub fn from_parts(
        d: usize,
        delta: i64,
        records: Vec<PointRecord>,
        levels: Vec<BTreeSet<PointId>>,
        links: Vec<BTreeMap<PointId, PointId>>,
    ) -> Result<Self> {
        let max_level = levels.len().checked_sub(1).ok_or_else(|| {
            Error::InvalidArgument("a family needs at least one level".into())
        })?;
        if links.len() != levels.len() {
            return Err(Error::InvalidArgument("links and levels differ in length".into()));
        }
        let by_point = records.iter().map(|r| (r.point.clone(), r.id)).collect();
        let records: BTreeMap<PointId, PointRecord> = records.into_iter().map(|r| (r.id, r)).collect();
        let mut diff = vec![RankSet::new()];
        for level in 1..=max_level {
            let mut set = RankSet::new();
            for id in &levels[level - 1] {
                if !levels[level].contains(id) {
                    set.insert(id.0);
                }
            }
            diff.push(set);
        }
        Ok(GoodFamily { d, delta, max_level, records, by_point, levels, links, diff })
    }

    /// Freezes the current state of any family.
    pub fn snapshot<F: Family + ?Sized>(fam: &F) -> Result<Self> {
        let ids = fam.ids();
        let records: Vec<PointRecord> = ids.iter().filter_map(|&id| fam.record(id).cloned()).collect();
        let levels: Vec<BTreeSet<PointId>> =
            (0..=fam.max_level()).map(|i| fam.level_members(i).into_iter().collect()).collect();
        let mut links = vec![BTreeMap::new()];
        for level in 1..=fam.max_level() {
            let mut map = BTreeMap::new();
            for &id in &levels[level - 1] {
                if !levels[level].contains(&id) {
                    map.insert(id, fam.parent(level, id)?);
                }
            }
            links.push(map);
        }
        GoodFamily::from_parts(fam.dim(), fam.delta(), records, levels, links)
    }

    /// Adds `id` to `P_level` without touching other levels. Used to
    /// construct faulty families.
    pub fn force_member(&mut self, level: usize, id: PointId) {
        if level < self.levels.len() && self.levels[level].insert(id) && level > 0 {
            self.links[level].remove(&id);
            self.diff[level].remove(id.0);
        }
        if level + 1 < self.levels.len() && !self.levels[level + 1].contains(&id) {
            // Keep a link to a member of the next level so lookups succeed.
            if let Some(&top) = self.levels[level + 1].iter().next() {
                self.links[level + 1].insert(id, top);
                self.diff[level + 1].insert(id.0);
            }
        }
    }

    /// Finds the closest pair of distinct coordinates and forces both into
    /// the lowest level whose threshold they fail to exceed. Returns the
    /// level, or `None` with fewer than two coordinates.
    pub fn inject_close_pair(&mut self) -> Option<usize> {
        let recs: Vec<&PointRecord> = self.records.values().collect();
        let mut best: Option<(u128, PointId, PointId)> = None;
        for (a, ra) in recs.iter().enumerate() {
            for rb in &recs[a + 1..] {
                let sq = dist_sq(ra.point.coords(), rb.point.coords());
                if best.is_none_or(|(b, _, _)| sq < b) {
                    best = Some((sq, ra.id, rb.id));
                }
            }
        }
        let (sq, a, b) = best?;
        let level = (1..=self.max_level).find(|&i| sq <= 1u128 << (2 * i))?;
        for l in 1..=level {
            self.force_member(l, a);
            self.force_member(l, b);
        }
        Some(level)
    }
}

impl Family for GoodFamily {
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
        self.records.len()
    }

    fn total_len(&self) -> u64 {
        self.records.values().map(|r| r.multiplicity).sum()
    }

    fn lookup(&self, point: &Point) -> Option<PointId> {
        self.by_point.get(point).copied()
    }

    fn record(&self, id: PointId) -> Option<&PointRecord> {
        self.records.get(&id)
    }

    fn ids(&self) -> Vec<PointId> {
        self.records.keys().copied().collect()
    }

    fn level_size(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, BTreeSet::len)
    }

    fn is_member(&self, level: usize, id: PointId) -> bool {
        self.levels.get(level).is_some_and(|s| s.contains(&id))
    }

    fn level_members(&self, level: usize) -> Vec<PointId> {
        self.levels.get(level).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn parent(&self, level: usize, id: PointId) -> Result<PointId> {
        if level == 0 || level > self.max_level {
            return Err(Error::InvalidArgument(format!("no parent links at level {level}")));
        }
        if self.levels[level].contains(&id) {
            return Ok(id);
        }
        if !self.levels[level - 1].contains(&id) {
            return Err(Error::NotAMember(id, level - 1));
        }
        self.links[level].get(&id).copied().ok_or(Error::NotAMember(id, level - 1))
    }

    fn diff_rank(&self, level: usize, id: PointId) -> Option<usize> {
        self.diff.get(level).and_then(|s| s.rank(id.0))
    }

    fn diff_len(&self, level: usize) -> usize {
        self.diff.get(level).map_or(0, RankSet::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_counts() {
        assert_eq!(level_count(1, 9), 3);
        assert_eq!(level_count(1, 1), 0);
        assert_eq!(level_count(2, 5), 3);
        assert_eq!(level_count(1, 2), 1);
        assert_eq!(level_count(1, 3), 1);
        assert_eq!(level_count(4, 3), 2);
    }

    /// The 1-d instance {1, 2, 5, 9} with ids in that order, built by hand.
    fn line_family() -> GoodFamily {
        let records: Vec<PointRecord> = [1, 2, 5, 9]
            .iter()
            .enumerate()
            .map(|(i, &x)| PointRecord { point: Point::new(vec![x]), id: PointId(i as u64), multiplicity: 1 })
            .collect();
        let set = |v: &[u64]| v.iter().map(|&i| PointId(i)).collect::<BTreeSet<_>>();
        let levels = vec![set(&[0, 1, 2, 3]), set(&[0, 2, 3]), set(&[0, 3]), set(&[0])];
        let link = |v: &[(u64, u64)]| v.iter().map(|&(a, b)| (PointId(a), PointId(b))).collect::<BTreeMap<_, _>>();
        let links = vec![BTreeMap::new(), link(&[(1, 0)]), link(&[(2, 0)]), link(&[(3, 0)])];
        GoodFamily::from_parts(1, 9, records, levels, links).unwrap()
    }

    fn p(x: i64) -> Point {
        Point::new(vec![x])
    }

    #[test]
    fn ancestors() {
        let fam = line_family();
        assert_eq!(ancestor(&fam, &p(2), 1).unwrap().point, p(1));
        assert_eq!(ancestor(&fam, &p(5), 2).unwrap().point, p(1));
        assert_eq!(ancestor(&fam, &p(9), 0).unwrap().point, p(9));
        assert_eq!(ancestor(&fam, &p(4), 1), Err(Error::NotFound));
    }

    #[test]
    fn representatives_and_clusterings() {
        let fam = line_family();
        assert_eq!(representative(&fam, &p(2), 3).unwrap().point, p(1));
        assert_eq!(representative(&fam, &p(5), 2).unwrap().point, p(1));
        for x in [1, 2, 5, 9] {
            assert_eq!(representative(&fam, &p(x), 4).unwrap().point, p(x));
        }
        assert!(representative(&fam, &p(2), 0).is_err());
        assert_eq!(representative(&fam, &p(3), 2), Err(Error::NotFound));

        let c2 = clustering_at_k(&fam, 2).unwrap();
        let ids = |v: &[u64]| v.iter().map(|&i| PointId(i)).collect::<Vec<_>>();
        assert_eq!(c2.clusters.len(), 2);
        assert_eq!(c2.clusters[0].members, ids(&[0, 1, 2]));
        assert_eq!(c2.clusters[1].members, ids(&[3]));
        let c4 = clustering_at_k(&fam, 4).unwrap();
        assert!(c4.clusters.iter().all(|c| c.members.len() == 1));
        let c1 = clustering_at_k(&fam, 1).unwrap();
        assert_eq!(c1.clusters[0].members, ids(&[0, 1, 2, 3]));
        assert_eq!(clustering_at_k(&fam, 3).unwrap().clusters.len(), 3);
    }

    #[test]
    fn promoted_t_set_member() {
        // k = 2 lands on level 2 with |P_2| = 2, so no promotion; k = 3 lands on
        // level 1 where |P_1| = 3. Check a case with a real promotion instead:
        // drop 9 from P_1 so that P_1 = {1, 5} and k = 3 promotes 9 back.
        let records: Vec<PointRecord> = [1, 2, 5, 9]
            .iter()
            .enumerate()
            .map(|(i, &x)| PointRecord { point: p(x), id: PointId(i as u64), multiplicity: 1 })
            .collect();
        let set = |v: &[u64]| v.iter().map(|&i| PointId(i)).collect::<BTreeSet<_>>();
        let link = |v: &[(u64, u64)]| v.iter().map(|&(a, b)| (PointId(a), PointId(b))).collect::<BTreeMap<_, _>>();
        let fam = GoodFamily::from_parts(
            1,
            9,
            records,
            vec![set(&[0, 1, 2, 3]), set(&[0, 2]), set(&[0]), set(&[0])],
            vec![BTreeMap::new(), link(&[(1, 0), (3, 2)]), link(&[(2, 0)]), BTreeMap::new()],
        )
        .unwrap();
        // k = 3: level 1 (|P_1| = 2), one promotion from {2, 9} by id -> id 1 (coord 2).
        let c = clustering_at_k(&fam, 3).unwrap();
        assert_eq!(c.representatives(), vec![PointId(0), PointId(1), PointId(2)]);
        assert_eq!(representative_id(&fam, PointId(3), 3).unwrap(), PointId(2));
    }

    #[test]
    fn dendrogram_text() {
        let fam = line_family();
        let text = export_dendrogram(&fam).unwrap().to_text();
        let expected = "H 3 4 4\nS 0 4\nS 1 3\nS 2 2\nS 3 1\n\
L 1 0 0\nL 1 1 0\nL 1 2 2\nL 1 3 3\n\
L 2 0 0\nL 2 2 0\nL 2 3 3\n\
L 3 0 0\nL 3 3 0\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn validation() {
        let fam = line_family();
        assert!(validate_family(&fam, 2.0).is_ok());
        assert!(validate_family(&fam, 1.0).is_ok());

        let mut bad = line_family();
        bad.force_member(2, PointId(1));
        let report = validate_family(&bad, 2.0);
        assert_eq!(report.separation_count(), 1);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Nesting { level: 2, .. })));

        let mut injected = line_family();
        assert_eq!(injected.inject_close_pair(), Some(1));
        assert!(validate_family(&injected, 2.0).separation_count() >= 1);
    }
}
