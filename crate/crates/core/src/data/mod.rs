//! Tables, deletion masks, causal queries and pattern semantics.

mod csv_io;
mod dataset;
mod pattern;
mod query;
mod schema;

pub use csv_io::{load_csv, read_csv, write_csv};
pub use dataset::{Column, Dataset, DeletionReceipt};
pub use pattern::{satisfies, Pattern, Predicate};
pub(crate) use pattern::{code_label, discrete_codes, domain_size};
pub use query::{CausalQuery, INTERVAL_SLACK};
pub use schema::{AttrKind, Attribute, Schema};
