#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hkcenter::highdim::{draw_u, exact_cell_key, rank_of, rank_thresholds, HighDim};
use hkcenter::{Family, Point, PointId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(r: &mut ChaCha8Rng, d: usize, delta: i64) -> Point {
    Point::new((0..d).map(|_| r.random_range(1..=delta)).collect())
}

pub fn distinct_points(r: &mut ChaCha8Rng, n: usize, d: usize, delta: i64) -> Vec<Point> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let p = random_point(r, d, delta);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub enum Step {
    Insert(Point),
    Delete(Point),
}

/// Random interleaving of inserts (some repeating live points) and deletes
/// of live points, keeping at most `max_live` distinct points alive.
pub fn scenario(r: &mut ChaCha8Rng, d: usize, delta: i64, len: usize, max_live: usize) -> Vec<Step> {
    let mut live: Vec<Point> = Vec::new();
    let mut steps = Vec::new();
    while steps.len() < len {
        let roll: f64 = r.random();
        if !live.is_empty() && (roll < 0.3 || live.len() >= max_live) {
            let i = r.random_range(0..live.len());
            steps.push(Step::Delete(live.swap_remove(i)));
        } else if !live.is_empty() && roll < 0.4 {
            let p = live[r.random_range(0..live.len())].clone();
            live.push(p.clone());
            steps.push(Step::Insert(p));
        } else {
            let p = random_point(r, d, delta);
            let distinct: BTreeSet<&Point> = live.iter().collect();
            if distinct.len() >= max_live && !distinct.contains(&p) {
                continue;
            }
            live.push(p.clone());
            steps.push(Step::Insert(p));
        }
    }
    steps
}

/// From-scratch recomputation of the shifted-grid structure from the same
/// seed, epoch, shifts and size estimate. Returns a description of every
/// disagreement with the maintained state.
pub fn highdim_oracle(hd: &HighDim) -> Vec<String> {
    let mut problems = Vec::new();
    let d = hd.dim();
    let thresholds = rank_thresholds(hd.size_estimate(), hd.ell());
    if thresholds != hd.thresholds() {
        problems.push("rank thresholds differ".into());
    }
    let coords = |id: PointId| hd.record(id).expect("stored id").point.coords().to_vec();
    for level in 1..=hd.max_level() {
        let below: Vec<PointId> = hd.level_members(level - 1);
        let set: BTreeSet<PointId> = hd.level_members(level).into_iter().collect();
        let mut rank = BTreeMap::new();
        for &x in &below {
            let r = rank_of(draw_u(hd.seed(), hd.epoch(), level, x), &thresholds);
            if hd.rank(level, x) != Some(r) {
                problems.push(format!("level {level}: rank of {x} is {:?}, expected {r}", hd.rank(level, x)));
            }
            rank.insert(x, r);
        }
        // cells[grid]: key -> occupants
        let mut cells: Vec<BTreeMap<Vec<i64>, Vec<PointId>>> = vec![BTreeMap::new(); hd.grid_count()];
        let mut keys: BTreeMap<PointId, Vec<Vec<i64>>> = BTreeMap::new();
        for &x in &below {
            let c = coords(x);
            let per_grid: Vec<Vec<i64>> = (0..hd.grid_count())
                .map(|g| (0..d).map(|a| exact_cell_key(c[a], level, d, hd.shift(level, g, a))).collect())
                .collect();
            for (g, k) in per_grid.iter().enumerate() {
                cells[g].entry(k.clone()).or_default().push(x);
            }
            keys.insert(x, per_grid);
        }
        let mates = |x: PointId| -> Vec<(usize, &Vec<PointId>)> {
            keys[&x].iter().enumerate().map(|(g, k)| (g, &cells[g][k])).collect()
        };
        let mut covered = BTreeSet::new();
        for &x in &below {
            let cover = mates(x).iter().filter(|(_, occ)| occ.iter().any(|y| rank[y] > rank[&x])).count() as u32;
            if hd.cover(level, x) != Some(cover) {
                problems.push(format!("level {level}: cover of {x} is {:?}, expected {cover}", hd.cover(level, x)));
            }
            if cover > 0 {
                covered.insert(x);
            }
        }
        for &x in &set {
            if !rank.contains_key(&x) {
                problems.push(format!("level {level}: {x} selected but not in the level below"));
                continue;
            }
            if covered.contains(&x) {
                problems.push(format!("level {level}: selected {x} is covered"));
            }
            for (g, occ) in mates(x) {
                if let Some(y) = occ.iter().find(|&&y| y != x && set.contains(&y)) {
                    problems.push(format!("level {level}: selected {x} and {y} share a cell in grid {g}"));
                }
            }
        }
        for &x in &below {
            if covered.contains(&x) || set.contains(&x) {
                continue;
            }
            let dominated = mates(x).iter().any(|(_, occ)| occ.iter().any(|y| set.contains(y) && rank[y] == rank[&x]));
            if !dominated {
                problems.push(format!("level {level}: uncovered {x} has no selected cell mate of its rank"));
            }
        }
        if hd.diff_len(level) != below.len() - set.len() {
            problems.push(format!("level {level}: difference set has {} entries", hd.diff_len(level)));
        }
    }
    problems
}
