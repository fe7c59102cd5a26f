mod common;

use common::{distinct_points, rng, scenario, Step};
use hkcenter::baselines::static_good_family;
use hkcenter::hierarchy::{export_dendrogram, validate_family};
use hkcenter::lowdim::LowDim;
use hkcenter::{Config, Family};
use proptest::prelude::*;

fn records<F: Family>(fam: &F) -> Vec<hkcenter::PointRecord> {
    fam.ids().into_iter().map(|id| fam.record(id).unwrap().clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn insert_only_matches_static_greedy(seed in any::<u64>(), d in 1usize..4, n in 1usize..30) {
        let delta = 32;
        let pts = distinct_points(&mut rng(seed), n, d, delta);
        let mut ld = LowDim::new(&Config::low_dim(d, delta)).unwrap();
        for p in &pts {
            ld.insert(p.clone()).unwrap();
        }
        let st = static_good_family(d, delta, &records(&ld)).unwrap();
        prop_assert_eq!(export_dendrogram(&ld).unwrap(), export_dendrogram(&st).unwrap());
    }

    #[test]
    fn mixed_updates_stay_valid(seed in any::<u64>(), d in 1usize..4) {
        let delta = 16;
        let mut r = rng(seed);
        let steps = scenario(&mut r, d, delta, 60, 20);
        let mut ld = LowDim::new(&Config::low_dim(d, delta)).unwrap();
        for step in &steps {
            match step {
                Step::Insert(p) => { ld.insert(p.clone()).unwrap(); }
                Step::Delete(p) => ld.delete(p).unwrap(),
            }
            let report = validate_family(&ld, 2.0);
            prop_assert!(report.is_ok(), "{:?}", report.violations);
            prop_assert!(ld.check_child_index().is_empty());
        }
    }
}

#[test]
fn deleting_everything_leaves_empty_levels() {
    let pts = distinct_points(&mut rng(7), 25, 2, 16);
    let mut ld = LowDim::new(&Config::low_dim(2, 16)).unwrap();
    for p in &pts {
        ld.insert(p.clone()).unwrap();
    }
    for p in pts.iter().rev() {
        ld.delete(p).unwrap();
    }
    assert!(ld.is_empty());
    assert!((0..=ld.max_level()).all(|i| ld.level_size(i) == 0));
}
