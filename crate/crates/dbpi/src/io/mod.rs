//! Readers and writers for the tabular inputs of each subcommand.

mod population;
mod rows;
mod tables;

pub use population::{export_population, ingest_population, read_schema, PopulationSchema};
pub use rows::{read_rows, Field, RawRow};
pub use tables::{
    format_period, parse_period, read_admin_units, read_editing_records, read_margins, read_panel, read_rotating,
    read_survey_table,
};

use std::path::Path;

pub(crate) fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
