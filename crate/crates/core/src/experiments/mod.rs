//! Dataset generation, persistence and report reproduction.

pub mod charts;
pub mod dataset;
pub mod report;

pub use dataset::{
    build_dataset, dataset_path, default_count, default_degrees, read_records, record_seed,
    BuildSummary, Dataset, ExperimentConfig, GraphRecord, SizePlan,
};
pub use report::{
    dnn_experiment, dnn_figures, emit_charts, regression_experiment, regression_figures,
    table1_figures, table1_report, table1_table, DnnConfig, DnnReport, Figure, RegressionReport,
    ReportTable, Table1Row,
};
