//! Data ingestion, model persistence, the simulation designs and the
//! experiment drivers behind the command-line tool.

mod abalone;
mod experiment;
mod model_file;
mod sim;
mod table;

pub use abalone::{abalone_path, load_abalone, parse_abalone, ABALONE_COLUMNS, ABALONE_ENV, HEIGHT_CUTOFF, RINGS_THRESHOLD};
pub use experiment::{
    align_rows, crossval, crossval_auc, fingerprint, run_simulation, score_ols, score_vine, simulation_config,
    simulation_methods, simulation_split, AucSummary, Classifier, ExperimentResult, Method, INTERVAL_ALPHA,
};
pub use model_file::{
    load_model, load_model_doc, model_from_json, model_to_json, save_model, save_model_doc, EdgeDoc, MetadataDoc, ModelDoc,
    VariableDoc, SCHEMA_VERSION,
};
pub use sim::{child_seed, fold_assignment, rng, simulate, train_test_split, true_conditional, SimCase, SimSpec};
pub use table::{read_csv, read_csv_from, write_csv, write_table, write_table_to, CsvData};

#[cfg(test)]
mod tests;
