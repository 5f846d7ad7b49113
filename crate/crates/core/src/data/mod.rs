//! CSV ingestion, encoding and splitting of labelled flow records.

mod dataset;
mod load;
mod preprocess;
mod schema;
mod split;

pub use dataset::{Dataset, Labeled, Provenance, RawColumn, RawDataset, RawValue};
pub use load::{load_dataset, load_dataset_with};
pub use preprocess::{preprocess, ColumnTransform, PreprocessPlan};
pub use schema::{ColumnKind, ColumnSpec, DatasetSchema};
pub use split::split_stratified;
