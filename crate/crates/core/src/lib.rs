//! Simulation and evaluation of re-translation based simultaneous translation.
//!
//! A session is recorded as an [`EventLog`]: every time the recognized source
//! or the displayed translation changes, the full source and output so far are
//! logged with a timestamp. Sessions are scored on three axes:
//!
//! * quality: BLEU of the final output, re-segmented against the reference
//!   sentences by minimum word error rate;
//! * latency: Translation Lag, seconds between a source word being spoken and
//!   the corresponding output word becoming final;
//! * stability: Normalized Erasure, output tokens erased per final token.
//!
//! The [`pipeline`] module produces such sessions from a timed transcript and
//! a [`ScoringModel`] using beam search biased towards the previous
//! translation and mask-k suppression of unstable tail tokens.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below fix the scalar to `f64`, which the file formats and the CLI use.

pub mod align;
pub mod captions;
pub mod decoder;
pub mod error;
pub mod eventlog;
mod jsonl;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod sweep;

pub use align::{lcp_len, levenshtein, mwer_segment, Segmentation};
pub use captions::{ingest_captions, load_cues, CaptionCue};
pub use decoder::{
    biased_beam_search, load_table_model, mask_tail, search, Context, DecoderConfig, Distribution, Hypothesis,
    ScoringModel, Symbol, TableModel,
};
pub use error::{Error, Result};
pub use eventlog::{load_eventlog, save_eventlog, tokenize, Event, EventLog, TimedToken, TokenVector};
pub use metrics::{
    bleu_corpus, correspondence, erasure, evaluate_all, evaluate_quality, finalization, load_reference,
    normalized_erasure, save_reference, translation_lag, Correspondence, CorrespondenceMap, FinalizationMap,
    LagOptions, MetricsReport, ReferenceDocument, ReferenceSegment, SourceTime, TranslationLag,
};
pub use pipeline::{
    load_transcript, run_simulation, save_transcript, split_sentences, Session, SessionState, SimulationOptions,
    TimedTranscript,
};
pub use scalar::Scalar;
pub use sweep::{load_documents, pareto_frontier, read_rows_csv, sweep, write_rows_csv, Document, SweepGrid, SweepRow};

pub type Event64 = Event<f64>;
pub type EventLog64 = EventLog<f64>;
pub type ReferenceDocument64 = ReferenceDocument<f64>;
pub type TimedTranscript64 = TimedTranscript<f64>;
pub type TableModel64 = TableModel<f64>;
pub type DecoderConfig64 = DecoderConfig<f64>;
pub type MetricsReport64 = MetricsReport<f64>;
pub type SweepRow64 = SweepRow<f64>;

pub type Event32 = Event<f32>;
pub type EventLog32 = EventLog<f32>;
pub type ReferenceDocument32 = ReferenceDocument<f32>;
pub type TableModel32 = TableModel<f32>;
pub type DecoderConfig32 = DecoderConfig<f32>;
pub type MetricsReport32 = MetricsReport<f32>;
