//! Frame-store persistence, experiment configuration, sidecars and CSV.

mod config;
mod csv_out;
mod sidecar;
mod store;

pub use config::{parse_pairs, ExperimentConfig, ScanSettings};
pub use csv_out::{cell, Table};
pub use sidecar::{read_sidecar, sidecar_path, write_sidecar, StoreKind};
pub use store::{
    natural_dtype, read_header, read_store, write_atomic, write_store, write_store_as, Dtype,
    FrameStoreHeader, HEADER_LEN, MAGIC, VERSION,
};
