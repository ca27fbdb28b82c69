//! Seed-sweep soak of the randomized invariants, including three-view
//! warehouses that exercise the pairwise merge fold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use viewkeeper_core::avderive::derive_av_set;
use viewkeeper_core::gluing::merge_fold;
use viewkeeper_core::maintenance::{init_state, MaintenancePlan};
use viewkeeper_core::relstore::evaluate_view;
use viewkeeper_testkit::{
    brute_force_view, random_batch, random_catalog, random_database, random_view, CatalogShape,
    KeyCounter,
};

#[test]
fn soak_self_maintainability_many_seeds() {
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xDEAD_0000 + seed);
        let catalog = random_catalog(&mut rng, &CatalogShape::default());
        let mut db = random_database(&catalog, 12, &mut rng);
        let views = vec![
            random_view(&catalog, "v1", &mut rng),
            random_view(&catalog, "v2", &mut rng),
            random_view(&catalog, "v3", &mut rng),
        ];
        let avsets: Vec<_> = views.iter().map(|v| derive_av_set(&catalog, v)).collect();
        let merged = merge_fold(&db, &avsets.iter().collect::<Vec<_>>()).unwrap();
        let plan = MaintenancePlan::merged(avsets, merged).unwrap();
        let mut state = init_state(&db, &views, plan).unwrap();
        let mut keys = KeyCounter::seeded_from(&db);
        for step in 0..12 {
            let batch = random_batch(&db, &mut keys, 4, 3, &mut rng);
            if batch.is_empty() {
                continue;
            }
            db.insert_batch(&batch).unwrap();
            state.apply_batch(&batch).unwrap();
            for view in &views {
                let oracle = evaluate_view(&db, view).unwrap();
                assert_eq!(
                    state.mv(&view.name).unwrap(),
                    &oracle,
                    "seed {seed} step {step} view {}",
                    view.name
                );
            }
            let fresh = state.plan().materialize(&db).unwrap();
            assert_eq!(state.avs(), &fresh, "seed {seed} step {step} avs");
        }
    }
}

#[test]
fn soak_eval_vs_brute_force_many_seeds() {
    for seed in 0..150u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF_0000 + seed);
        let catalog = random_catalog(&mut rng, &CatalogShape::default());
        let view = random_view(&catalog, "v", &mut rng);
        let per_relation = match view.relations.len() {
            1 => 60,
            2 => 25,
            _ => 9,
        };
        let db = random_database(&catalog, per_relation, &mut rng);
        assert_eq!(
            evaluate_view(&db, &view).unwrap(),
            brute_force_view(&db, &view),
            "seed {seed}"
        );
    }
}
