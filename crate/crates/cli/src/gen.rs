//! Deterministic dataset generator for the student-records schema.
//!
//! Entities are dealt round-robin over departments so per-department counts
//! are fixed numbers, not expectations: at defaults, 25 departments get 120
//! students and 40 courses each, and the configured number of
//! session-passing courses lands evenly (2 per department at 50). Only the
//! grade, marks, and CNIC columns draw from the seeded generator, and none
//! of them influence any count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viewkeeper_core::catalog::{parse_schema, parse_view, Catalog, ViewDef};
use viewkeeper_core::relstore::{Database, InsertionBatch};
use viewkeeper_core::value::{Decimal, Value};
use viewkeeper_core::Tuple;

/// Bundled schema definition.
pub const SCHEMA_SQL: &str = include_str!("../assets/schema.sql");
/// Bundled view over the IT department.
pub const RESULTS_IT_SQL: &str = include_str!("../assets/results_it.sql");
/// Bundled view over the BBA department.
pub const RESULTS_BBA_SQL: &str = include_str!("../assets/results_bba.sql");

/// Session value the bundled views select on.
pub const SESSION_CURRENT: &str = "2010-2014";
/// Session value for all other courses.
pub const SESSION_OTHER: &str = "2015-2019";

pub fn bundled_catalog() -> Catalog {
    parse_schema(SCHEMA_SQL).expect("bundled schema parses")
}

pub fn bundled_views(catalog: &Catalog) -> (ViewDef, ViewDef) {
    (
        parse_view(RESULTS_IT_SQL, catalog).expect("bundled IT view parses"),
        parse_view(RESULTS_BBA_SQL, catalog).expect("bundled BBA view parses"),
    )
}

/// Errors from dataset generation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("impossible generator parameters: {0}")]
pub struct GenError(pub String);

/// Generator parameters. Counts are the base-scale cardinalities;
/// `sessions_it` and `sessions_bba` fix how many courses sit in the
/// selected session per scenario, expressed as a total over the base
/// department count (so 50 over 25 departments means 2 per department).
/// `sessions_bba` applies to the BBA department, `sessions_it` to every
/// other department.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub departments: u64,
    pub students: u64,
    pub courses: u64,
    pub results: u64,
    pub sessions_it: u64,
    pub sessions_bba: u64,
    pub seed: u64,
    pub scale: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            departments: 25,
            students: 3000,
            courses: 1000,
            results: 1500,
            sessions_it: 50,
            sessions_bba: 50,
            seed: 42,
            scale: 1.0,
        }
    }
}

/// Scaled cardinalities and per-department session rates derived from the
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenShape {
    pub departments: u64,
    pub students: u64,
    pub courses: u64,
    pub results: u64,
    /// Session-passing courses in each non-BBA department.
    pub rate_it: u64,
    /// Session-passing courses in the BBA department.
    pub rate_bba: u64,
}

impl GenParams {
    fn scaled(&self, count: u64) -> u64 {
        (count as f64 * self.scale).floor() as u64
    }

    /// Validates the parameters and resolves scaled counts and rates.
    pub fn shape(&self) -> Result<GenShape, GenError> {
        if self.scale <= 0.0 || !self.scale.is_finite() {
            return Err(GenError(format!("scale {} is not positive", self.scale)));
        }
        if self.departments == 0 {
            return Err(GenError("department count must be positive".into()));
        }
        let shape = GenShape {
            departments: self.scaled(self.departments),
            students: self.scaled(self.students),
            courses: self.scaled(self.courses),
            results: self.scaled(self.results),
            rate_it: self.sessions_it / self.departments,
            rate_bba: self.sessions_bba / self.departments,
        };
        if shape.departments < 2 {
            return Err(GenError(format!(
                "need at least 2 departments for the named IT and BBA departments, got {}",
                shape.departments
            )));
        }
        for (name, sessions) in [
            ("sessions-it", self.sessions_it),
            ("sessions-bba", self.sessions_bba),
        ] {
            if sessions % self.departments != 0 {
                return Err(GenError(format!(
                    "{name} {sessions} does not spread evenly over {} departments",
                    self.departments
                )));
            }
        }
        let courses_per_dept = shape.courses / shape.departments;
        if shape.rate_it.max(shape.rate_bba) > courses_per_dept {
            return Err(GenError(format!(
                "session rate {} exceeds the {} courses per department",
                shape.rate_it.max(shape.rate_bba),
                courses_per_dept
            )));
        }
        if shape.results > 0 && (shape.students == 0 || shape.courses == 0) {
            return Err(GenError(
                "results need students and courses to reference".into(),
            ));
        }
        Ok(shape)
    }
}

fn round_robin(index: u64, n: u64) -> u64 {
    (index - 1) % n + 1
}

/// Generates the dataset. Deterministic for fixed parameters: identical
/// calls produce identical databases, and dumps of them identical bytes.
pub fn gen_dataset(params: &GenParams) -> Result<Database, GenError> {
    let shape = params.shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut departments: Vec<Tuple> = Vec::with_capacity(shape.departments as usize);
    for d in 1..=shape.departments {
        let name = match d {
            1 => "IT".to_string(),
            2 => "BBA".to_string(),
            _ => format!("DEPT_{d:02}"),
        };
        departments.push(vec![
            Value::Int(d as i64),
            Value::text(name),
            Value::text(format!("HOD_{d:02}")),
        ]);
    }

    let mut students: Vec<Tuple> = Vec::with_capacity(shape.students as usize);
    for s in 1..=shape.students {
        let cnic = format!(
            "{:05}-{:07}-{:01}",
            rng.random_range(0..100_000u32),
            rng.random_range(0..10_000_000u32),
            rng.random_range(0..10u32)
        );
        let fsc = Decimal::from_scaled(rng.random_range(400_0000..=1100_0000));
        students.push(vec![
            Value::Int(s as i64),
            Value::text(format!("STD_{s:04}")),
            Value::text(cnic),
            Value::Dec(fsc),
            Value::Int(round_robin(s, shape.departments) as i64),
        ]);
    }

    let mut courses: Vec<Tuple> = Vec::with_capacity(shape.courses as usize);
    for c in 1..=shape.courses {
        let dept = round_robin(c, shape.departments);
        let round = (c - 1) / shape.departments;
        let rate = if dept == 2 {
            shape.rate_bba
        } else {
            shape.rate_it
        };
        let session = if round < rate {
            SESSION_CURRENT
        } else {
            SESSION_OTHER
        };
        courses.push(vec![
            Value::Int(c as i64),
            Value::text(format!("CRS_{c:04}")),
            Value::text(session),
            Value::Int(dept as i64),
        ]);
    }

    let mut results: Vec<Tuple> = Vec::with_capacity(shape.results as usize);
    for r in 1..=shape.results {
        let gpa = Decimal::from_scaled(rng.random_range(2_0000..=4_0000));
        results.push(vec![
            Value::Int(r as i64),
            Value::Int(round_robin(r, shape.students.max(1)) as i64),
            Value::Int(round_robin(r, shape.courses.max(1)) as i64),
            Value::Dec(gpa),
        ]);
    }

    let mut db = Database::new(bundled_catalog());
    db.insert_batch(&InsertionBatch::from([
        ("Department".to_string(), departments),
        ("Student".to_string(), students),
        ("Courses".to_string(), courses),
        ("Results".to_string(), results),
    ]))
    .expect("generated dataset satisfies integrity");
    Ok(db)
}
