//! End-to-end scenario runner: load, derive, optionally glue, initialize,
//! apply batches, and verify the warehouse against the recompute oracle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use viewkeeper_core::avderive::{
    derive_av_set, derive_av_set_local_only, tuple_count_report, AvSet, CountReport,
};
use viewkeeper_core::catalog::{parse_schema, parse_view, Catalog, ViewDef};
use viewkeeper_core::gluing::{decisions_to_tsv, merge_fold, GlueDecision};
use viewkeeper_core::maintenance::{init_state, MaintenancePlan, ViewDelta, WarehouseState};
use viewkeeper_core::relstore::{evaluate_view, load_dir, Database};

use crate::batchfile::parse_batches;
use crate::CliError;

/// Inputs and toggles for one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub schema: PathBuf,
    pub views: Vec<PathBuf>,
    pub data_dir: PathBuf,
    pub batch: Option<PathBuf>,
    /// Referential-integrity pruning on (the full derivation) or off
    /// (local-selection-only auxiliary views).
    pub ri_pruning: bool,
    /// Whether to merge auxiliary views across views by the cost rule.
    pub gluing: bool,
}

impl ScenarioConfig {
    pub fn new(
        schema: impl Into<PathBuf>,
        views: Vec<PathBuf>,
        data_dir: impl Into<PathBuf>,
    ) -> Self {
        ScenarioConfig {
            schema: schema.into(),
            views,
            data_dir: data_dir.into(),
            batch: None,
            ri_pruning: true,
            gluing: true,
        }
    }
}

/// Everything a scenario run produces, for reports and exit status.
pub struct ScenarioOutcome {
    pub catalog: Catalog,
    pub views: Vec<ViewDef>,
    /// The base database after all batches were applied.
    pub db: Database,
    pub avsets: Vec<AvSet>,
    pub count_reports: Vec<CountReport>,
    pub decisions: Vec<GlueDecision>,
    pub state: WarehouseState,
    pub batches_applied: usize,
    /// Per-batch view deltas, in application order.
    pub deltas: Vec<ViewDelta>,
    /// Human-readable oracle failures; empty means the warehouse matched
    /// the recompute oracle after every batch.
    pub oracle_failures: Vec<String>,
}

impl ScenarioOutcome {
    pub fn oracle_ok(&self) -> bool {
        self.oracle_failures.is_empty()
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the schema and view files of a config.
pub fn load_definitions(config: &ScenarioConfig) -> Result<(Catalog, Vec<ViewDef>), CliError> {
    let catalog = parse_schema(&read_to_string(&config.schema)?)?;
    let mut views = Vec::with_capacity(config.views.len());
    for path in &config.views {
        views.push(parse_view(&read_to_string(path)?, &catalog)?);
    }
    Ok((catalog, views))
}

/// Runs the full pipeline. The warehouse state applies every batch from
/// its own extents only; the loaded database is kept as the shadow source
/// the oracle check recomputes from.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome, CliError> {
    let (catalog, views) = load_definitions(config)?;
    let mut db = load_dir(&catalog, &config.data_dir)?;

    let avsets: Vec<AvSet> = views
        .iter()
        .map(|view| {
            if config.ri_pruning {
                derive_av_set(&catalog, view)
            } else {
                derive_av_set_local_only(&catalog, view)
            }
        })
        .collect();
    let mut count_reports = Vec::with_capacity(views.len());
    for (view, avset) in views.iter().zip(&avsets) {
        count_reports.push(tuple_count_report(&db, view, avset)?);
    }

    let (plan, decisions) = if config.gluing {
        let merged = merge_fold(&db, &avsets.iter().collect::<Vec<_>>())?;
        let decisions = merged.decisions.clone();
        (MaintenancePlan::merged(avsets.clone(), merged)?, decisions)
    } else {
        (MaintenancePlan::separate(avsets.clone()), Vec::new())
    };
    let mut state = init_state(&db, &views, plan)?;

    let batches = match &config.batch {
        Some(path) => parse_batches(
            &read_to_string(path)?,
            &catalog,
            &path.display().to_string(),
        )?,
        None => Vec::new(),
    };

    let mut deltas = Vec::with_capacity(batches.len());
    let mut oracle_failures = Vec::new();
    for (idx, batch) in batches.iter().enumerate() {
        // The source applies the batch first; a batch the source rejects is
        // an input error, not a maintenance case.
        db.insert_batch(batch)?;
        deltas.push(state.apply_batch(batch)?);
        check_against_oracle(&state, &db, &views, idx + 1, &mut oracle_failures)?;
    }

    Ok(ScenarioOutcome {
        catalog,
        views,
        db,
        avsets,
        count_reports,
        decisions,
        state,
        batches_applied: batches.len(),
        deltas,
        oracle_failures,
    })
}

/// Compares every materialized view against a fresh recompute and every
/// auxiliary extent against its re-materialized definition.
pub fn check_against_oracle(
    state: &WarehouseState,
    db: &Database,
    views: &[ViewDef],
    batch_no: usize,
    failures: &mut Vec<String>,
) -> Result<(), CliError> {
    for view in views {
        let oracle = evaluate_view(db, view)?;
        let held = state.mv(&view.name).expect("state covers view");
        if held != &oracle {
            failures.push(format!(
                "batch {batch_no}: view {} holds {} rows, recompute yields {}",
                view.name,
                held.len(),
                oracle.len()
            ));
        }
    }
    let fresh = state.plan().materialize(db)?;
    for (name, extent) in state.avs() {
        match fresh.get(name) {
            Some(expected) if expected == extent => {}
            _ => failures.push(format!(
                "batch {batch_no}: auxiliary view {name} diverged from its definition"
            )),
        }
    }
    Ok(())
}

/// Writes the per-view count reports and the glue decision log into a
/// directory.
pub fn write_reports(outcome: &ScenarioOutcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for report in &outcome.count_reports {
        let path = dir.join(format!("{}.counts.tsv", report.view));
        fs::write(&path, report.to_tsv()).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    let path = dir.join("glue_decisions.tsv");
    fs::write(&path, decisions_to_tsv(&outcome.decisions)).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// One status line per view: row count held in the warehouse.
pub fn summarize(outcome: &ScenarioOutcome) -> String {
    let mut out = String::new();
    for view in &outcome.views {
        let held = outcome.state.mv(&view.name).map(|s| s.len()).unwrap_or(0);
        let counters = outcome.state.counters(&view.name);
        let _ = writeln!(
            out,
            "{}: {} rows, {} delta joins, {} skipped applications",
            view.name, held, counters.delta_joins, counters.skipped
        );
    }
    let _ = writeln!(
        out,
        "{} batches applied, oracle {}",
        outcome.batches_applied,
        if outcome.oracle_ok() {
            "ok"
        } else {
            "MISMATCH"
        }
    );
    out
}
