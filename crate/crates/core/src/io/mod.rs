//! Configuration, input parsing and output files.

pub mod config;
pub mod expr;
pub mod fields;
pub mod report;

pub use config::{read_u_samples, OutputFlags, RunConfig, USpec};
pub use expr::{Harmonic, Trig, UExpr};
pub use fields::{
    angle_from_total, fields_csv, pgm, quiver_csv, read_fields_csv, write_fields_csv, write_pgm, write_quiver,
    FieldsTable, FIELDS_HEADER, QUIVER_HEADER,
};
pub use report::{to_json, write_json, RunReport, Timing, REPORT_KEYS};
