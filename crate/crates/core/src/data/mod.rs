//! Dataset ingestion, the S1/S2 split protocol and the synthetic aggregate
//! generator.

mod classspec;
mod dataset;
mod png;
mod synth;

pub use classspec::{extreme_classes, load_class_specs, parse_class_specs, ClassSpec, SIEVE_BINS_MM};
pub use dataset::{
    load_dataset, make_splits, read_manifest, validation_count, write_dataset, DatasetReport, LabeledSample,
    LoadOptions, ManifestEntry, SampleSet, SplitProtocol,
};
pub use png::{read_png, write_png};
pub use synth::{synth_dataset, synth_sample, Particle, SynthImage, SynthParams};
