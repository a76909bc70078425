//! The detection cascade end to end, its configuration, the codebook and
//! model training workflows, and section-level evaluation.

mod config;
mod detect;
mod eval;
mod training;

pub use config::PipelineConfig;
pub use detect::{
    blob_crop_rect, detect_stream, encode_blob, encode_patch, parse_alarm_log, AlarmEvent,
    BlobDecision, Detector, FrameReport, StageTimings, StreamSummary,
};
pub use eval::{
    evaluate, evaluate_alarms, parse_labels, validate_labels, EvalOutcome, EvalReport,
    SectionLabel, SectionVerdict, SECTION_LEN,
};
pub use training::{
    encode_patches, harvest_descriptors, load_patches, split_train_test, train_codebook,
    train_codebook_from_patches, train_model, train_model_from_features,
    train_model_from_patches, CodebookTraining, ModelTraining, MIN_PER_CLASS,
};
