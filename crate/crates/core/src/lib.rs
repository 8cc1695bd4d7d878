//! Layer-wise linear probing of embedding dumps.
//!
//! The pipeline: read an `LWPDUMP1` dump ([`dump`]), train one softmax
//! probe per layer on anchor-prompt embeddings ([`probe`]), evaluate every
//! probe under each prompt variant ([`eval`]), and split the resulting
//! accuracy curves into functional stages ([`segment`]). [`synth`] builds
//! dumps with known stage boundaries for end-to-end checks.

pub mod dump;
pub mod eval;
pub mod probe;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod variants;

pub use dump::{
    parse_dump, validate_dump, write_dump, Condition, ConditionKind, Dump, DumpError, DumpHeader,
    SampleMeta, Split, ValidationReport,
};
pub use eval::{
    compliance_filter, evaluate_condition, run_pipeline, CurveSet, EvalError, LayerCurve,
};
pub use probe::{train_probe, LinearProbe, ProbeError, TrainConfig};
pub use segment::{diff_stage_maps, segment, SegmentError, SegmentationParams, Stage, StageMap};
pub use synth::{fixture_curves, synth_generate, EmbeddingDump, SynthConfig, SynthError};
pub use variants::{apply_variant, builtin_catalog, VariantSpec};
