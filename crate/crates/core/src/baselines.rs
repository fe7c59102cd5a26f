//! Static reference algorithms and exact optima for small instances.
//!
//! Every greedy scan and tie-break runs in input order, which callers keep
//! equal to ascending id.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::hierarchy::{level_count, GoodFamily};
use crate::model::{dist_sq, CostValue, Point, PointId, PointRecord};

/// Default size limit for the exact diameter optimum.
pub const DIAM_GUARD: usize = 14;
/// Default size limit for the exact center optimum.
pub const CENTER_GUARD: usize = 16;

/// Greedy maximal independent sets level by level, scanning by ascending id.
/// Every dropped record links to the smallest-id kept record within `2^i`.
pub fn static_good_family(d: usize, delta: i64, records: &[PointRecord]) -> Result<GoodFamily> {
    let mut sorted: Vec<PointRecord> = records.to_vec();
    sorted.sort_by_key(|r| r.id);
    let mut seen = BTreeSet::new();
    for r in &sorted {
        r.point.check_box(d, delta)?;
        if !seen.insert(r.point.clone()) {
            return Err(Error::InvalidArgument(format!("coordinate {} appears twice", r.point)));
        }
    }
    let max_level = level_count(d, delta);
    let mut levels: Vec<BTreeSet<PointId>> = vec![sorted.iter().map(|r| r.id).collect()];
    let mut links = vec![BTreeMap::new()];
    let coords: BTreeMap<PointId, &Point> = sorted.iter().map(|r| (r.id, &r.point)).collect();
    for level in 1..=max_level {
        let limit = 1u128 << (2 * level);
        let mut kept: Vec<PointId> = Vec::new();
        let mut link = BTreeMap::new();
        for &id in &levels[level - 1] {
            let p = coords[&id].coords();
            match kept.iter().find(|&&q| dist_sq(p, coords[&q].coords()) <= limit) {
                Some(&q) => {
                    link.insert(id, q);
                }
                None => kept.push(id),
            }
        }
        levels.push(kept.into_iter().collect());
        links.push(link);
    }
    GoodFamily::from_parts(d, delta, sorted, levels, links)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in [1, {n}]")));
    }
    Ok(())
}

/// Farthest-first traversal from the first point. Returns center indices in
/// selection order.
pub fn gonzalez(points: &[Point], k: usize) -> Result<Vec<usize>> {
    check_k(points.len(), k)?;
    let mut centers = vec![0usize];
    let mut nearest: Vec<u128> = points.iter().map(|p| dist_sq(p.coords(), points[0].coords())).collect();
    while centers.len() < k {
        let (far, _) = nearest
            .iter()
            .enumerate()
            .fold((0usize, 0u128), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        centers.push(far);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(dist_sq(p.coords(), points[far].coords()));
        }
    }
    Ok(centers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution {
    /// The accepted guess; the returned centers have radius at most `2 * tau`.
    pub tau: CostValue,
    pub centers: Vec<usize>,
}

fn greedy_independent(points: &[Point], limit_sq: u128) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if kept.iter().all(|&q| dist_sq(p.coords(), points[q].coords()) > limit_sq) {
            kept.push(i);
        }
    }
    kept
}

/// Threshold guessing over `0` and the sorted pairwise distances; the first
/// guess `tau` whose greedy independent set in the `<= 2 tau` graph has at
/// most `k` points wins.
pub fn hochbaum_shmoys(points: &[Point], k: usize) -> Result<ThresholdSolution> {
    check_k(points.len(), k)?;
    let mut guesses: Vec<u128> = vec![0];
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            guesses.push(dist_sq(p.coords(), q.coords()));
        }
    }
    guesses.sort_unstable();
    guesses.dedup();
    for tau_sq in guesses {
        let centers = greedy_independent(points, 4 * tau_sq);
        if centers.len() <= k {
            return Ok(ThresholdSolution { tau: CostValue::from_squared(tau_sq), centers });
        }
    }
    Err(Error::Inconsistent("no threshold admitted k centers".into()))
}

fn guard(points: &[Point], limit: usize) -> Result<()> {
    if points.len() > limit {
        return Err(Error::GuardExceeded { size: points.len(), guard: limit });
    }
    Ok(())
}

/// `profile[k - 1]` is the optimal diameter with at most `k` clusters, for
/// `k = 1..=n`. Dynamic programming over subsets; `O(n 3^n)`.
pub fn opt_diam_profile(points: &[Point], limit: usize) -> Result<Vec<CostValue>> {
    guard(points, limit)?;
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let full = (1usize << n) - 1;
    let mut diam = vec![0u128; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let mut worst = diam[rest];
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            worst = worst.max(dist_sq(points[low].coords(), points[j].coords()));
            r &= r - 1;
        }
        diam[mask] = worst;
    }
    let mut profile = vec![CostValue::from_squared(diam[full])];
    let mut prev = diam.clone();
    for _parts in 2..=n {
        let mut cur = prev.clone();
        for mask in 1..=full {
            let low = 1usize << mask.trailing_zeros();
            let others = mask ^ low;
            // Submasks of `others`; the part holding the lowest bit is `sub | low`.
            let mut sub = others;
            loop {
                let part = sub | low;
                if part != mask {
                    let cand = diam[part].max(prev[mask ^ part]);
                    if cand < cur[mask] {
                        cur[mask] = cand;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & others;
            }
        }
        profile.push(CostValue::from_squared(cur[full]));
        prev = cur;
    }
    Ok(profile)
}

pub fn brute_force_opt_diam(points: &[Point], k: usize) -> Result<CostValue> {
    check_k(points.len(), k)?;
    Ok(opt_diam_profile(points, DIAM_GUARD)?[k - 1])
}

/// `profile[k - 1]` is the optimal radius with `k` centers chosen from the
/// input, for `k = 1..=n`. Enumerates every center subset.
pub fn opt_center_profile(points: &[Point], limit: usize) -> Result<Vec<CostValue>> {
    guard(points, limit)?;
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut pair = vec![0u128; n * n];
    for a in 0..n {
        for b in 0..n {
            pair[a * n + b] = dist_sq(points[a].coords(), points[b].coords());
        }
    }
    let mut best = vec![u128::MAX; n];
    for mask in 1usize..(1 << n) {
        let size = mask.count_ones() as usize;
        let mut worst = 0u128;
        for p in 0..n {
            let mut near = u128::MAX;
            let mut m = mask;
            while m != 0 {
                let c = m.trailing_zeros() as usize;
                near = near.min(pair[p * n + c]);
                m &= m - 1;
            }
            worst = worst.max(near);
            if worst >= best[size - 1] {
                break;
            }
        }
        best[size - 1] = best[size - 1].min(worst);
    }
    Ok(best.into_iter().map(CostValue::from_squared).collect())
}

pub fn brute_force_opt_center(points: &[Point], k: usize) -> Result<CostValue> {
    check_k(points.len(), k)?;
    Ok(opt_center_profile(points, CENTER_GUARD)?[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{validate_family, Family};
    use crate::model::{center_cost, diameter_cost};
    use proptest::prelude::*;

    fn line(v: &[i64]) -> Vec<Point> {
        v.iter().map(|&x| Point::new(vec![x])).collect()
    }

    fn records(points: &[Point]) -> Vec<PointRecord> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| PointRecord { point: p.clone(), id: PointId(i as u64), multiplicity: 1 })
            .collect()
    }

    /// Literal enumeration of set partitions through restricted growth strings.
    fn enumerate_opt_diam(points: &[Point], k: usize) -> u128 {
        let n = points.len();
        let mut labels = vec![0usize; n];
        let mut best = u128::MAX;
        fn rec(i: usize, used: usize, k: usize, labels: &mut [usize], points: &[Point], best: &mut u128) {
            if i == labels.len() {
                let mut worst = 0;
                for a in 0..labels.len() {
                    for b in a + 1..labels.len() {
                        if labels[a] == labels[b] {
                            worst = worst.max(dist_sq(points[a].coords(), points[b].coords()));
                        }
                    }
                }
                *best = (*best).min(worst);
                return;
            }
            for l in 0..=used.min(k - 1) {
                labels[i] = l;
                rec(i + 1, used.max(l + 1), k, labels, points, best);
            }
        }
        rec(0, 0, k, &mut labels, points, &mut best);
        best
    }

    #[test]
    fn static_family_line() {
        let pts = line(&[1, 2, 5, 9]);
        let fam = static_good_family(1, 9, &records(&pts)).unwrap();
        let coords = |i: usize| -> Vec<i64> {
            fam.level_members(i).iter().map(|&id| fam.record(id).unwrap().point.coords()[0]).collect()
        };
        assert_eq!(coords(1), vec![1, 5, 9]);
        assert_eq!(coords(2), vec![1, 9]);
        assert_eq!(coords(3), vec![1]);
        assert!(validate_family(&fam, 1.0).is_ok());
    }

    #[test]
    fn static_family_single_point() {
        let fam = static_good_family(2, 20, &records(&[Point::new(vec![3, 4])])).unwrap();
        for i in 0..=fam.max_level() {
            assert_eq!(fam.level_size(i), 1);
        }
    }

    #[test]
    fn static_family_rejects_duplicates() {
        let pts = line(&[3, 3]);
        assert!(static_good_family(1, 9, &records(&pts)).is_err());
    }

    /// Six labelled points arranged so that the family comes out as
    /// P_1 = {2, 3, 5, 6}, P_2 = {2, 5}, P_3 = {5}. Ids follow the scan
    /// order 5, 2, 3, 6, 1, 4.
    #[test]
    fn six_point_topology() {
        let label_coords: [(u8, [i64; 2]); 6] =
            [(5, [1, 1]), (2, [1, 6]), (3, [4, 6]), (6, [4, 1]), (1, [2, 6]), (4, [5, 6])];
        let pts: Vec<Point> = label_coords.iter().map(|(_, c)| Point::new(c.to_vec())).collect();
        let fam = static_good_family(2, 6, &records(&pts)).unwrap();
        assert_eq!(fam.max_level(), 3);
        let labels = |i: usize| -> BTreeSet<u8> {
            fam.level_members(i).iter().map(|id| label_coords[id.0 as usize].0).collect()
        };
        assert_eq!(labels(1), BTreeSet::from([2, 3, 5, 6]));
        assert_eq!(labels(2), BTreeSet::from([2, 5]));
        assert_eq!(labels(3), BTreeSet::from([5]));
        assert!(validate_family(&fam, 1.0).is_ok());
    }

    #[test]
    fn gonzalez_line() {
        let pts = line(&[1, 2, 5, 9]);
        let c2 = gonzalez(&pts, 2).unwrap();
        assert_eq!(c2, vec![0, 3]);
        let centers: Vec<Point> = c2.iter().map(|&i| pts[i].clone()).collect();
        assert_eq!(center_cost(&pts, &centers).unwrap().value(), 4.0);
        let all = gonzalez(&pts, 4).unwrap();
        let centers: Vec<Point> = all.iter().map(|&i| pts[i].clone()).collect();
        assert_eq!(center_cost(&pts, &centers).unwrap(), CostValue::ZERO);
        let c1 = gonzalez(&pts, 1).unwrap();
        assert_eq!(c1, vec![0]);
        assert_eq!(center_cost(&pts, &[pts[0].clone()]).unwrap().value(), 8.0);
        assert!(gonzalez(&pts, 0).is_err());
        assert!(gonzalez(&pts, 5).is_err());
    }

    #[test]
    fn hochbaum_shmoys_line() {
        let pts = line(&[1, 2, 5, 9]);
        let s = hochbaum_shmoys(&pts, 2).unwrap();
        // Pairwise distances are {1, 3, 4, 4, 7, 8}; tau = 1 leaves three
        // independent points, tau = 3 leaves {1, 9}.
        assert_eq!(s.tau.value(), 3.0);
        assert_eq!(s.centers, vec![0, 3]);
        let s = hochbaum_shmoys(&pts, 4).unwrap();
        assert_eq!(s.tau, CostValue::ZERO);
        assert_eq!(s.centers, vec![0, 1, 2, 3]);
        let s = hochbaum_shmoys(&pts, 1).unwrap();
        assert_eq!(s.centers.len(), 1);
        let centers: Vec<Point> = s.centers.iter().map(|&i| pts[i].clone()).collect();
        let opt = brute_force_opt_center(&pts, 1).unwrap();
        assert!(center_cost(&pts, &centers).unwrap().at_most_times(2, opt));
    }

    #[test]
    fn exact_optima_line() {
        let pts = line(&[1, 2, 5, 9]);
        assert_eq!(brute_force_opt_diam(&pts, 2).unwrap().value(), 4.0);
        assert_eq!(brute_force_opt_diam(&pts, 3).unwrap().value(), 1.0);
        assert_eq!(brute_force_opt_diam(&pts, 4).unwrap(), CostValue::ZERO);
        // Best pair of centers is {2, 9}: 5 is 3 away from 2.
        assert_eq!(brute_force_opt_center(&pts, 2).unwrap().value(), 3.0);
        assert_eq!(brute_force_opt_center(&pts, 4).unwrap(), CostValue::ZERO);
        assert_eq!(brute_force_opt_center(&pts, 1).unwrap().value(), 4.0);
    }

    #[test]
    fn guards() {
        let pts: Vec<Point> = (1..=15).map(|x| Point::new(vec![x])).collect();
        assert!(matches!(brute_force_opt_diam(&pts, 2), Err(Error::GuardExceeded { .. })));
        let pts: Vec<Point> = (1..=17).map(|x| Point::new(vec![x])).collect();
        assert!(matches!(brute_force_opt_center(&pts, 2), Err(Error::GuardExceeded { .. })));
    }

    fn small_instance() -> impl Strategy<Value = Vec<Point>> {
        (1usize..4).prop_flat_map(|d| {
            proptest::collection::btree_set(proptest::collection::vec(1i64..12, d), 1..8)
                .prop_map(|s| s.into_iter().map(Point::new).collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(pts in small_instance()) {
            let profile = opt_diam_profile(&pts, DIAM_GUARD).unwrap();
            for k in 1..=pts.len() {
                prop_assert_eq!(profile[k - 1].squared(), enumerate_opt_diam(&pts, k));
            }
        }

        #[test]
        fn two_approximations(pts in small_instance()) {
            let opt = opt_center_profile(&pts, CENTER_GUARD).unwrap();
            let diam = opt_diam_profile(&pts, DIAM_GUARD).unwrap();
            for k in 1..=pts.len() {
                let to_points = |idx: &[usize]| idx.iter().map(|&i| pts[i].clone()).collect::<Vec<_>>();
                let g = center_cost(&pts, &to_points(&gonzalez(&pts, k).unwrap())).unwrap();
                prop_assert!(g.at_most_times(2, opt[k - 1]));
                let hs = hochbaum_shmoys(&pts, k).unwrap();
                let h = center_cost(&pts, &to_points(&hs.centers)).unwrap();
                prop_assert!(h.at_most_times(2, opt[k - 1]));
                prop_assert!(opt[k - 1] <= diam[k - 1]);
                prop_assert!(diam[k - 1].at_most_times(2, opt[k - 1]));
            }
            // The DP optimum is attained by some partition.
            let singletons: Vec<Vec<usize>> = (0..pts.len()).map(|i| vec![i]).collect();
            prop_assert_eq!(diameter_cost(&pts, &singletons).unwrap(), diam[pts.len() - 1]);
        }

        #[test]
        fn static_family_is_one_good(pts in small_instance()) {
            let d = pts[0].dim();
            let fam = static_good_family(d, 12, &records(&pts)).unwrap();
            prop_assert!(validate_family(&fam, 1.0).is_ok());
        }
    }
}
