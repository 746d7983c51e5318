//! Case files, the native network format and result tables.

mod json;
mod matpower;
mod table;

pub use json::{
    network_from_json, network_to_json, EdgeRecord, NetworkDocument, NodeRecord, SCHEMA_VERSION,
};
pub use matpower::{
    case30, parse_matpower, sha256_hex, Branch, Bus, Gen, MatpowerCase, CASE30_TEXT,
};
pub use table::{
    format_float, records_from_report, write_csv, write_results_csv, ResultRecord, RESULT_COLUMNS,
};
