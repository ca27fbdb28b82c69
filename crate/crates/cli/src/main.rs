//! `viewkeeper` command-line interface.

#![allow(clippy::result_large_err)]

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viewkeeper_cli::batchfile::format_view_delta;
use viewkeeper_cli::gen::{gen_dataset, GenParams, RESULTS_BBA_SQL, RESULTS_IT_SQL, SCHEMA_SQL};
use viewkeeper_cli::report::write_reference_reports;
use viewkeeper_cli::scenario::{run_scenario, summarize, write_reports, ScenarioConfig};
use viewkeeper_cli::{CliError, EXIT_INPUT_ERROR, EXIT_OK, EXIT_ORACLE_MISMATCH};
use viewkeeper_core::avderive::{derive_av_set, derive_av_set_local_only, tuple_count_report};
use viewkeeper_core::gluing::{decisions_to_tsv, merge_fold};
use viewkeeper_core::relstore::{load_dir, write_dir};

/// Self-maintainable view warehouse: generate data, derive auxiliary
/// views, glue them, apply insertion batches, and verify against a full
/// recompute.
#[derive(Parser)]
#[command(name = "viewkeeper", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DefinitionArgs {
    /// Schema definition file.
    #[arg(long)]
    schema: PathBuf,
    /// View definition file; repeat for several views.
    #[arg(long = "view", required = true)]
    views: Vec<PathBuf>,
    /// Directory of per-relation CSV files.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the student-records dataset (CSV files plus the schema and
    /// view definitions) into a directory.
    Gen {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed; the VIEWKEEPER_SEED environment variable
        /// overrides this flag.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Scale factor applied to all cardinalities.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Session-passing course total (over the base department count)
        /// for every department except BBA.
        #[arg(long = "sessions-it", default_value_t = 50)]
        sessions_it: u64,
        /// Session-passing course total (over the base department count)
        /// for the BBA department.
        #[arg(long = "sessions-bba", default_value_t = 50)]
        sessions_bba: u64,
        /// Base department count.
        #[arg(long, default_value_t = 25)]
        departments: u64,
        /// Base student count.
        #[arg(long, default_value_t = 3000)]
        students: u64,
        /// Base course count.
        #[arg(long, default_value_t = 1000)]
        courses: u64,
        /// Base result count.
        #[arg(long, default_value_t = 1500)]
        results: u64,
    },
    /// Derive one view's auxiliary views and write its tuple-count report.
    Derive {
        /// Schema definition file.
        #[arg(long)]
        schema: PathBuf,
        /// View definition file.
        #[arg(long)]
        view: PathBuf,
        /// Directory of per-relation CSV files.
        #[arg(long)]
        data: PathBuf,
        /// Where to write the count report (TSV).
        #[arg(long)]
        report: PathBuf,
        /// Skip referential-integrity pruning: every relation keeps a
        /// local-selection auxiliary view.
        #[arg(long = "no-ri")]
        no_ri: bool,
    },
    /// Merge the views' auxiliary-view sets and write the glue decision
    /// log. With more than two views the merge folds pairwise in input
    /// order (an extension of the two-view algorithm).
    Glue {
        #[command(flatten)]
        defs: DefinitionArgs,
        /// Where to write the decision log (TSV).
        #[arg(long = "plan-out")]
        plan_out: PathBuf,
        #[arg(long = "no-ri")]
        no_ri: bool,
    },
    /// Materialize the warehouse and apply insertion batches using only
    /// warehouse-resident data; prints each batch's view delta records.
    Apply {
        #[command(flatten)]
        defs: DefinitionArgs,
        /// Batch file: `relation,v1,v2,...` records, blank line between
        /// batches.
        #[arg(long)]
        batch: PathBuf,
        /// Write delta records here instead of stdout.
        #[arg(long)]
        deltas: Option<PathBuf>,
        /// Store every auxiliary view separately instead of gluing.
        #[arg(long = "no-glue")]
        no_glue: bool,
    },
    /// Run the pipeline and verify the warehouse against a full recompute
    /// after every batch. Exits 1 on any mismatch.
    Check {
        #[command(flatten)]
        defs: DefinitionArgs,
        #[arg(long)]
        batch: Option<PathBuf>,
        #[arg(long = "no-glue")]
        no_glue: bool,
        #[arg(long = "no-ri")]
        no_ri: bool,
    },
    /// Emit the full report set: per-view count reports, the glue decision
    /// log, and the reference-comparison tables.
    Report {
        #[command(flatten)]
        defs: DefinitionArgs,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        /// Also apply batches and include the oracle verdict.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Gen {
            out,
            seed,
            scale,
            sessions_it,
            sessions_bba,
            departments,
            students,
            courses,
            results,
        } => {
            let seed = match std::env::var("VIEWKEEPER_SEED") {
                Ok(raw) => raw.parse().map_err(|_| {
                    GenParamError(format!("VIEWKEEPER_SEED `{raw}` is not an integer"))
                })?,
                Err(_) => seed,
            };
            let params = GenParams {
                departments,
                students,
                courses,
                results,
                sessions_it,
                sessions_bba,
                seed,
                scale,
            };
            let db = gen_dataset(&params)?;
            write_dir(&db, &out)?;
            write_file(&out.join("schema.sql"), SCHEMA_SQL)?;
            write_file(&out.join("results_it.sql"), RESULTS_IT_SQL)?;
            write_file(&out.join("results_bba.sql"), RESULTS_BBA_SQL)?;
            println!("wrote {} rows to {}", db.total_rows(), out.display());
            Ok(EXIT_OK)
        }
        Command::Derive {
            schema,
            view,
            data,
            report,
            no_ri,
        } => {
            let config = ScenarioConfig::new(schema, vec![view], data);
            let (catalog, views) = viewkeeper_cli::scenario::load_definitions(&config)?;
            let db = load_dir(&catalog, &config.data_dir)?;
            let avset = if no_ri {
                derive_av_set_local_only(&catalog, &views[0])
            } else {
                derive_av_set(&catalog, &views[0])
            };
            let counts = tuple_count_report(&db, &views[0], &avset)?;
            write_file(&report, &counts.to_tsv())?;
            print!("{}", counts.to_tsv());
            Ok(EXIT_OK)
        }
        Command::Glue {
            defs,
            plan_out,
            no_ri,
        } => {
            let config = ScenarioConfig::new(defs.schema, defs.views, defs.data);
            let (catalog, views) = viewkeeper_cli::scenario::load_definitions(&config)?;
            let db = load_dir(&catalog, &config.data_dir)?;
            let avsets: Vec<_> = views
                .iter()
                .map(|v| {
                    if no_ri {
                        derive_av_set_local_only(&catalog, v)
                    } else {
                        derive_av_set(&catalog, v)
                    }
                })
                .collect();
            let merged = merge_fold(&db, &avsets.iter().collect::<Vec<_>>())?;
            let log = decisions_to_tsv(&merged.decisions);
            write_file(&plan_out, &log)?;
            print!("{log}");
            Ok(EXIT_OK)
        }
        Command::Apply {
            defs,
            batch,
            deltas,
            no_glue,
        } => {
            let mut config = ScenarioConfig::new(defs.schema, defs.views, defs.data);
            config.batch = Some(batch);
            config.gluing = !no_glue;
            let outcome = run_scenario(&config)?;
            let mut rendered = String::new();
            for (idx, delta) in outcome.deltas.iter().enumerate() {
                if idx > 0 {
                    rendered.push('\n');
                }
                rendered.push_str(&format_view_delta(delta));
            }
            match deltas {
                Some(path) => write_file(&path, &rendered)?,
                None => print!("{rendered}"),
            }
            eprint!("{}", summarize(&outcome));
            Ok(if outcome.oracle_ok() {
                EXIT_OK
            } else {
                EXIT_ORACLE_MISMATCH
            })
        }
        Command::Check {
            defs,
            batch,
            no_glue,
            no_ri,
        } => {
            let mut config = ScenarioConfig::new(defs.schema, defs.views, defs.data);
            config.batch = batch;
            config.gluing = !no_glue;
            config.ri_pruning = !no_ri;
            let outcome = run_scenario(&config)?;
            print!("{}", summarize(&outcome));
            for failure in &outcome.oracle_failures {
                eprintln!("{failure}");
            }
            Ok(if outcome.oracle_ok() {
                EXIT_OK
            } else {
                EXIT_ORACLE_MISMATCH
            })
        }
        Command::Report { defs, out, batch } => {
            let mut config = ScenarioConfig::new(defs.schema, defs.views, defs.data);
            config.batch = batch;
            let outcome = run_scenario(&config)?;
            write_reports(&outcome, &out)?;
            write_reference_reports(
                &outcome.db,
                &outcome.catalog,
                &outcome.views,
                &outcome.count_reports,
                &outcome.decisions,
                &out,
            )?;
            print!("{}", summarize(&outcome));
            println!("reports written to {}", out.display());
            Ok(if outcome.oracle_ok() {
                EXIT_OK
            } else {
                EXIT_ORACLE_MISMATCH
            })
        }
    }
}

// Small adapter so a bad environment variable reports like other input
// errors.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct GenParamError(String);

impl From<GenParamError> for CliError {
    fn from(err: GenParamError) -> Self {
        CliError::Gen(viewkeeper_cli::gen::GenError(err.0))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_INPUT_ERROR as u8)
        }
    }
}
