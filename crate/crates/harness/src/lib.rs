//! Batch experiments on top of `iqa-attack`: intra-model attacks over an
//! image manifest, transfer to other scorers, parameter sweeps and score
//! calibration.

pub mod calibrate;
pub mod manifest;
pub mod oracle_spec;
pub mod report;
pub mod run;
pub mod sweep;
pub mod transfer;

pub use calibrate::{cmd_calibrate, load_mapping, read_score_table};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use oracle_spec::OracleSpec;
pub use report::{Aggregates, Correlations, CurvePoint, EvaluationReport, Failure, ImageRecord, RunInfo};
pub use run::{cmd_attack, snap_to_levels, AttackJob};
pub use sweep::{cmd_sweep, parse_number, summarize, SweepParam, SweepRow, SweepSpec};
pub use transfer::{cmd_transfer, record_files, TransferJob};
