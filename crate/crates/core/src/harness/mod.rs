//! Experiment drivers: file formats, run configuration, replicated
//! pipelines, tuning sweeps and the real-data protocol.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod real_data;
pub mod sweep;

pub use config::{DataSource, ExperimentConfig, GammaRule, InitKind, LambdaRule, Method};
pub use io::{
    parse_attribute_table, parse_covariates, parse_edge_list, parse_labels, parse_weighted_digraph,
    write_covariates, write_edge_list, write_labels, AttributeTable, ParsedEdgeList,
};
pub use pipeline::{run_pipeline, Aggregate, Dataset, RepRecord, RunRecord, Summary, TraceSummary};
pub use real_data::{real_data_pipeline, RealDataInput, RealDataReport, RealDataRow};
pub use sweep::{sweep_tuning, write_sweep_csv, SweepRow};
