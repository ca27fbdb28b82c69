//! Shape checks for the bundled two-view workload: the join digraph, the
//! derived auxiliary-view definitions, and spot cardinalities of the
//! generated dataset.

use viewkeeper_cli::gen::{bundled_catalog, bundled_views, gen_dataset, GenParams};
use viewkeeper_core::avderive::{derive_av_set, needs_av, retained_attrs, tuple_count_report};
use viewkeeper_core::catalog::{parse_view, view_join_digraph, CmpOp, Predicate};
use viewkeeper_core::gluing::{merge_av_sets, reconstruct_av, AvUnit};
use viewkeeper_core::relstore::evaluate_view;
use viewkeeper_core::Value;

#[test]
fn bundled_schema_has_four_relations_and_four_foreign_keys() {
    let catalog = bundled_catalog();
    assert_eq!(catalog.len(), 4);
    let fk_count: usize = catalog.relations().map(|r| r.foreign_keys.len()).sum();
    assert_eq!(fk_count, 4);
    assert_eq!(
        catalog.topo_order().unwrap(),
        vec!["Department", "Courses", "Student", "Results"]
    );
}

#[test]
fn bundled_views_split_where_into_joins_and_local_predicates() {
    let catalog = bundled_catalog();
    let (it, bba) = bundled_views(&catalog);
    for view in [&it, &bba] {
        assert_eq!(view.joins.len(), 4);
        assert_eq!(view.local_predicates.len(), 2);
        assert_eq!(
            view.local_predicates["Courses"],
            Predicate::cmp("Session", CmpOp::Eq, Value::text("2010-2014"))
        );
    }
    assert_eq!(
        it.local_predicates["Department"],
        Predicate::cmp("Dep_name", CmpOp::Eq, Value::text("IT"))
    );
    assert_eq!(
        bba.local_predicates["Department"],
        Predicate::cmp("Dep_name", CmpOp::Eq, Value::text("BBA"))
    );
}

#[test]
fn bundled_view_digraph_matches_the_foreign_keys() {
    let catalog = bundled_catalog();
    let (it, _) = bundled_views(&catalog);
    let digraph = view_join_digraph(&catalog, &it);
    let mut edges: Vec<(&str, &str)> = digraph.edges().collect();
    edges.sort();
    assert_eq!(
        edges,
        vec![
            ("Courses", "Department"),
            ("Results", "Courses"),
            ("Results", "Student"),
            ("Student", "Department"),
        ]
    );
    assert_eq!(digraph.sources(), vec!["Results"]);
}

#[test]
fn derived_av_set_has_the_expected_shapes() {
    let catalog = bundled_catalog();
    let (it, bba) = bundled_views(&catalog);

    assert!(!needs_av(&catalog, &it, "Results").unwrap());
    for relation in ["Department", "Student", "Courses"] {
        assert!(needs_av(&catalog, &it, relation).unwrap());
    }

    let avset = derive_av_set(&catalog, &it);
    assert_eq!(avset.pruned, vec!["Results"]);
    assert_eq!(avset.eval_order, vec!["Department", "Student", "Courses"]);

    let dept = &avset.avs["Department"];
    assert_eq!(dept.retained_attributes, vec!["Dep_no", "HOD_name"]);
    assert!(dept.local_predicate.is_some());
    assert!(dept.memberships.is_empty());

    let student = &avset.avs["Student"];
    assert_eq!(
        student.retained_attributes,
        vec!["Roll_no", "Name", "Dep_no"]
    );
    assert!(student.local_predicate.is_none());
    assert_eq!(student.memberships.len(), 1);
    assert_eq!(student.memberships[0].av, dept.name);
    assert_eq!(student.memberships[0].attributes, vec!["Dep_no"]);

    let courses = &avset.avs["Courses"];
    assert_eq!(
        courses.retained_attributes,
        vec!["Course_code", "Course_name", "Dep_no"]
    );
    assert!(courses.local_predicate.is_some());
    assert_eq!(courses.memberships.len(), 1);
    assert_eq!(courses.memberships[0].av, dept.name);

    // The second view derives the same shapes with its own predicate.
    let avset2 = derive_av_set(&catalog, &bba);
    for relation in ["Department", "Student", "Courses"] {
        assert_eq!(
            avset.avs[relation].retained_attributes,
            avset2.avs[relation].retained_attributes
        );
    }
    assert_eq!(
        retained_attrs(&catalog, &bba, "Student"),
        student.retained_attributes
    );
}

#[test]
fn name_selectivity_on_default_dataset() {
    // One department in 25 carries each selected name.
    let db = gen_dataset(&GenParams::default()).unwrap();
    let single = parse_view(
        "CREATE VIEW it_dept AS SELECT Department.Dep_no FROM Department \
         WHERE Department.Dep_name = 'IT';",
        db.catalog(),
    )
    .unwrap();
    assert_eq!(evaluate_view(&db, &single).unwrap().len(), 1);
}

#[test]
fn initial_view_cardinalities_are_fixed_by_the_generator() {
    let (it, bba) = bundled_views(&bundled_catalog());

    let default_db = gen_dataset(&GenParams::default()).unwrap();
    assert_eq!(evaluate_view(&default_db, &it).unwrap().len(), 4);
    assert_eq!(evaluate_view(&default_db, &bba).unwrap().len(), 4);

    let mixed = GenParams {
        sessions_bba: 100,
        ..GenParams::default()
    };
    let mixed_db = gen_dataset(&mixed).unwrap();
    assert_eq!(evaluate_view(&mixed_db, &it).unwrap().len(), 4);
    assert_eq!(evaluate_view(&mixed_db, &bba).unwrap().len(), 8);
}

#[test]
fn scaled_dataset_count_report_follows_the_same_arithmetic() {
    // At scale 0.1: 2 departments, 150 students and 50 courses each, the
    // per-department session rate unchanged.
    let params = GenParams {
        scale: 0.1,
        ..GenParams::default()
    };
    let db = gen_dataset(&params).unwrap();
    let (it, _) = bundled_views(db.catalog());
    let avset = derive_av_set(db.catalog(), &it);
    let report = tuple_count_report(&db, &it, &avset).unwrap();
    let rows: Vec<(u64, u64, u64)> = report
        .rows
        .iter()
        .map(|r| (r.base, r.pass_local, r.av))
        .collect();
    assert_eq!(
        rows,
        vec![(2, 1, 1), (300, 300, 150), (100, 4, 2), (150, 150, 0)]
    );
}

#[test]
fn glued_units_reconstruct_the_single_department_and_its_students() {
    let params = GenParams {
        sessions_bba: 100,
        ..GenParams::default()
    };
    let db = gen_dataset(&params).unwrap();
    let catalog = db.catalog().clone();
    let (it, bba) = bundled_views(&catalog);
    let a1 = derive_av_set(&catalog, &it);
    let a2 = derive_av_set(&catalog, &bba);
    let merged = merge_av_sets(&db, &a1, &a2).unwrap();

    // Environment with the per-view extents for the direct comparison.
    let mut env = viewkeeper_core::relstore::AvEnv::new();
    for set in [&a1, &a2] {
        for (name, extent) in set.materialize(&db).unwrap().extents() {
            env.insert_extent(name.clone(), extent.clone());
        }
    }

    let AvUnit::Glued(dept) = &merged.entries["Department"][0] else {
        panic!("department stored separately")
    };
    let dept_extent = dept.materialize(&db, &env).unwrap();
    let it_side = reconstruct_av(dept, 0, &dept_extent, &env).unwrap();
    assert_eq!(it_side.len(), 1);
    assert_eq!(
        it_side,
        env.resolve(&a1.avs["Department"].name)
            .unwrap()
            .into_owned()
    );

    let AvUnit::Glued(student) = &merged.entries["Student"][0] else {
        panic!("student stored separately")
    };
    let student_extent = student.materialize(&db, &env).unwrap();
    let bba_side = reconstruct_av(student, 1, &student_extent, &env).unwrap();
    assert_eq!(bba_side.len(), 120);
    assert_eq!(
        bba_side,
        env.resolve(&a2.avs["Student"].name).unwrap().into_owned()
    );
}
