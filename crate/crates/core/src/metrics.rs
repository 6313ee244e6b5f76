//! Quality, latency and stability of a re-translation session.
//!
//! * Quality: case-sensitive corpus BLEU of the final output after it has been
//!   re-segmented against the reference translations by minimum WER.
//! * Latency: Translation Lag, the mean delay between a source word being
//!   spoken and its corresponding output word becoming final.
//! * Stability: Normalized Erasure, the number of displayed tokens deleted from
//!   the output suffix over the session, per final output token.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::align::{lcp_len, mwer_segment};
use crate::error::{Error, Result};
use crate::eventlog::{tokenize, EventLog, TimedToken, TimedTokenRecord, TokenVector};
use crate::jsonl;
use crate::scalar::Scalar;

const MAX_ORDER: usize = 4;

/// One parallel segment: timed source tokens and the reference translation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSegment<T> {
    source: Vec<TimedToken<T>>,
    reference_text: String,
}

impl<T: Scalar> ReferenceSegment<T> {
    pub fn new(source: Vec<TimedToken<T>>, reference_text: impl Into<String>) -> Result<Self> {
        let reference_text = reference_text.into();
        if source.is_empty() {
            return Err(Error::InvalidReference("segment without source tokens".into()));
        }
        if tokenize(&reference_text).is_empty() {
            return Err(Error::InvalidReference("segment with empty reference text".into()));
        }
        Ok(ReferenceSegment { source, reference_text })
    }

    pub fn source(&self) -> &[TimedToken<T>] {
        &self.source
    }

    pub fn reference_text(&self) -> &str {
        &self.reference_text
    }

    pub fn reference_tokens(&self) -> TokenVector {
        tokenize(&self.reference_text)
    }
}

/// Reference source transcription with utterance times, segmented in
/// parallel with the reference translation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceDocument<T> {
    segments: Vec<ReferenceSegment<T>>,
}

impl<T: Scalar> ReferenceDocument<T> {
    pub fn new(segments: Vec<ReferenceSegment<T>>) -> Result<Self> {
        let mut last = T::neg_infinity();
        for tok in segments.iter().flat_map(|s| &s.source) {
            if tok.time < last {
                return Err(Error::InvalidReference(format!(
                    "source token {:?} at {} precedes the previous token at {}",
                    tok.token, tok.time, last
                )));
            }
            last = tok.time;
        }
        Ok(ReferenceDocument { segments })
    }

    pub fn segments(&self) -> &[ReferenceSegment<T>] {
        &self.segments
    }

    pub fn reference_tokens(&self) -> Vec<TokenVector> {
        self.segments.iter().map(ReferenceSegment::reference_tokens).collect()
    }

    /// Utterance times of all source tokens, document order.
    pub fn source_times(&self) -> Vec<T> {
        self.segments.iter().flat_map(|s| s.source.iter().map(|t| t.time)).collect()
    }

    pub fn source_len(&self) -> usize {
        self.segments.iter().map(|s| s.source.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    src: Vec<TimedTokenRecord>,
    #[serde(rename = "ref")]
    reference: String,
}

/// Reads the one-segment-per-line reference format.
pub fn load_reference<T: Scalar, R: BufRead>(reader: R) -> Result<ReferenceDocument<T>> {
    let mut segments = Vec::new();
    for (line, rec) in jsonl::read_records::<SegmentRecord, _>(reader)? {
        let source = rec
            .src
            .into_iter()
            .map(TimedTokenRecord::into_token)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::parse(line, e.to_string()))?;
        segments.push(ReferenceSegment::new(source, rec.reference).map_err(|e| Error::parse(line, e.to_string()))?);
    }
    ReferenceDocument::new(segments)
}

pub fn save_reference<T: Scalar, W: Write>(doc: &ReferenceDocument<T>, mut writer: W) -> Result<()> {
    for seg in &doc.segments {
        let rec = SegmentRecord {
            src: seg.source.iter().map(TimedTokenRecord::from_token).collect(),
            reference: seg.reference_text.clone(),
        };
        jsonl::write_record(&mut writer, &rec)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// BLEU

/// Sufficient statistics for corpus BLEU.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn from_pair<S: Eq + Hash>(hyp: &[S], reference: &[S]) -> Self {
        let mut stats = BleuStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            if hyp.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<&[S], usize> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut hyp_counts: HashMap<&[S], usize> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_default() += 1;
            }
            stats.totals[n - 1] = hyp.len() + 1 - n;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Unsmoothed BLEU-4 in percent.
    pub fn score<T: Scalar>(&self) -> Result<T> {
        if self.ref_len == 0 {
            return Err(Error::Undefined("BLEU is undefined for an empty reference corpus"));
        }
        if self.hyp_len == 0 || self.matches.contains(&0) {
            return Ok(T::zero());
        }
        let log_precision: T = (0..MAX_ORDER)
            .map(|n| (T::from_count(self.matches[n]) / T::from_count(self.totals[n])).ln())
            .sum::<T>()
            / T::from_count(MAX_ORDER);
        let brevity = if self.hyp_len < self.ref_len {
            T::one() - T::from_count(self.ref_len) / T::from_count(self.hyp_len)
        } else {
            T::zero()
        };
        Ok(T::lit(100.0) * (brevity + log_precision).exp())
    }
}

/// Case-sensitive corpus BLEU over paired segments.
pub fn bleu_corpus<T, S, H, R>(hyp_segments: &[H], ref_segments: &[R]) -> Result<T>
where
    T: Scalar,
    S: Eq + Hash,
    H: AsRef<[S]>,
    R: AsRef<[S]>,
{
    if hyp_segments.len() != ref_segments.len() {
        return Err(Error::SegmentMismatch {
            hyp: hyp_segments.len(),
            reference: ref_segments.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (h, r) in hyp_segments.iter().zip(ref_segments) {
        stats.add(&BleuStats::from_pair(h.as_ref(), r.as_ref()));
    }
    stats.score()
}

/// Final output re-segmented against the reference translations.
#[derive(Clone, Debug)]
pub struct AlignedOutput {
    pub tokens: TokenVector,
    pub references: Vec<TokenVector>,
    /// Half-open ranges into `tokens`, one per reference segment.
    pub ranges: Vec<(usize, usize)>,
}

impl AlignedOutput {
    pub fn hyp_segments(&self) -> Vec<&[String]> {
        self.ranges.iter().map(|&(s, e)| &self.tokens[s..e]).collect()
    }
}

pub fn align_final_output<T: Scalar>(log: &EventLog<T>, reference: &ReferenceDocument<T>) -> Result<AlignedOutput> {
    if log.is_empty() {
        return Err(Error::Undefined("cannot evaluate an empty event log"));
    }
    let tokens = log.final_output();
    let references = reference.reference_tokens();
    let seg = mwer_segment(&tokens, &references)?;
    let ranges = seg.ranges(tokens.len());
    Ok(AlignedOutput {
        tokens,
        references,
        ranges,
    })
}

/// BLEU of the final output only; intermediate events do not contribute.
pub fn evaluate_quality<T: Scalar>(log: &EventLog<T>, reference: &ReferenceDocument<T>) -> Result<T> {
    let aligned = align_final_output(log, reference)?;
    bleu_corpus(&aligned.hyp_segments(), &aligned.references)
}

// ---------------------------------------------------------------------------
// Latency

/// When each token of the final output became final.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalizationMap<T> {
    /// 0-based index of the finalizing event for each final output token.
    pub events: Vec<usize>,
    pub times: Vec<T>,
}

/// Token `j` is final at the first event from which on every output keeps
/// tokens `..=j` equal to the final output. A later output that is too short
/// to contain the token counts as a change.
pub fn finalization<T: Scalar>(log: &EventLog<T>) -> FinalizationMap<T> {
    let outputs = log.output_tokens();
    let Some(last) = outputs.last() else {
        return FinalizationMap {
            events: Vec::new(),
            times: Vec::new(),
        };
    };
    // stable[i]: tokens kept from event i onwards.
    let mut stable: Vec<usize> = outputs.iter().map(|o| lcp_len(o, last)).collect();
    for i in (0..stable.len().saturating_sub(1)).rev() {
        stable[i] = stable[i].min(stable[i + 1]);
    }
    let mut events = Vec::with_capacity(last.len());
    let mut i = 0;
    for j in 1..=last.len() {
        while stable[i] < j {
            i += 1;
        }
        events.push(i);
    }
    let times = events.iter().map(|&i| log.events()[i].timestamp()).collect();
    FinalizationMap { events, times }
}

/// How output positions are mapped onto source positions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Correspondence {
    /// Proportional position within the aligned parallel segment.
    #[default]
    Segment,
    /// Proportional position within the whole document. Diagnostic only: it
    /// drifts by many tokens on long documents.
    Document,
}

/// How a fractional source position is turned into an utterance time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SourceTime {
    /// Linear interpolation between the two neighbouring source tokens.
    #[default]
    Interpolate,
    /// Time of the nearest source token (halves round up).
    Nearest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LagOptions {
    pub correspondence: Correspondence,
    pub source_time: SourceTime,
}

/// Source position assigned to one output token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenCorrespondence<T> {
    pub segment: usize,
    pub u_start: usize,
    pub u_len: usize,
    pub v_start: usize,
    pub v_len: usize,
    /// Fractional, 0-based, document-absolute source position.
    pub source_position: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceMap<T> {
    pub tokens: Vec<TokenCorrespondence<T>>,
}

fn segment_position<T: Scalar>(j: usize, u_start: usize, u_len: usize, v_start: usize, v_len: usize) -> T {
    let raw = T::from_count((j - u_start) * v_len) / T::from_count(u_len) + T::from_count(v_start);
    let hi = T::from_count(v_start + v_len - 1);
    raw.max(T::from_count(v_start)).min(hi)
}

fn correspondence_from<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    aligned: &AlignedOutput,
    mode: Correspondence,
) -> CorrespondenceMap<T> {
    let mut v_starts = Vec::with_capacity(reference.segments.len());
    let mut acc = 0;
    for seg in &reference.segments {
        v_starts.push(acc);
        acc += seg.source.len();
    }
    let mut tokens = Vec::with_capacity(aligned.tokens.len());
    match mode {
        Correspondence::Segment => {
            for (segment, &(u_start, u_end)) in aligned.ranges.iter().enumerate() {
                let v_start = v_starts[segment];
                let v_len = reference.segments[segment].source.len();
                for j in u_start..u_end {
                    tokens.push(TokenCorrespondence {
                        segment,
                        u_start,
                        u_len: u_end - u_start,
                        v_start,
                        v_len,
                        source_position: segment_position(j, u_start, u_end - u_start, v_start, v_len),
                    });
                }
            }
        }
        Correspondence::Document => {
            let o_len = aligned.tokens.len();
            let s_len = log.last().map(|e| e.source_tokens().len()).unwrap_or(0);
            let hi = T::from_count(reference.source_len().saturating_sub(1));
            for j in 0..o_len {
                let pos = (T::from_count(j * s_len) / T::from_count(o_len)).min(hi);
                let floor = pos.floor().to_usize().unwrap_or(0);
                let segment = v_starts.partition_point(|&s| s <= floor).saturating_sub(1);
                tokens.push(TokenCorrespondence {
                    segment,
                    u_start: 0,
                    u_len: o_len,
                    v_start: 0,
                    v_len: s_len,
                    source_position: pos,
                });
            }
        }
    }
    CorrespondenceMap { tokens }
}

/// Maps every final output token to a reference source position.
pub fn correspondence<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    mode: Correspondence,
) -> Result<CorrespondenceMap<T>> {
    let aligned = align_final_output(log, reference)?;
    Ok(correspondence_from(log, reference, &aligned, mode))
}

fn source_time_at<T: Scalar>(times: &[T], pos: T, mode: SourceTime) -> T {
    match mode {
        SourceTime::Interpolate => {
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo.to_usize().unwrap_or(0).min(times.len() - 1);
            if frac > T::zero() && lo + 1 < times.len() {
                times[lo] + frac * (times[lo + 1] - times[lo])
            } else {
                times[lo]
            }
        }
        SourceTime::Nearest => {
            let idx = (pos + T::lit(0.5)).floor().to_usize().unwrap_or(0);
            times[idx.min(times.len() - 1)]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationLag<T> {
    pub mean: T,
    pub per_token: Vec<T>,
}

fn lag_from<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    aligned: &AlignedOutput,
    options: LagOptions,
) -> Result<TranslationLag<T>> {
    if aligned.tokens.is_empty() {
        return Err(Error::Undefined("translation lag is undefined for an empty final output"));
    }
    let fin = finalization(log);
    let map = correspondence_from(log, reference, aligned, options.correspondence);
    let times = reference.source_times();
    let per_token: Vec<T> = fin
        .times
        .iter()
        .zip(&map.tokens)
        .map(|(&t_final, c)| t_final - source_time_at(&times, c.source_position, options.source_time))
        .collect();
    Ok(TranslationLag {
        mean: mean(&per_token),
        per_token,
    })
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_count(xs.len())
}

/// Mean over final output tokens of finalization time minus the utterance
/// time of the corresponding source token. Negative lags are kept.
pub fn translation_lag<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    options: LagOptions,
) -> Result<TranslationLag<T>> {
    let aligned = align_final_output(log, reference)?;
    lag_from(log, reference, &aligned, options)
}

// ---------------------------------------------------------------------------
// Stability

/// Tokens deleted from the end of the previous output by each event. The
/// first event is compared against an empty output.
pub fn erasure<T: Scalar>(log: &EventLog<T>) -> Vec<usize> {
    let mut prev = TokenVector::new();
    let mut out = Vec::with_capacity(log.len());
    for cur in log.output_tokens() {
        out.push(prev.len() - lcp_len(&cur, &prev));
        prev = cur;
    }
    out
}

pub fn normalized_erasure<T: Scalar>(log: &EventLog<T>) -> Result<T> {
    let final_len = log.final_output().len();
    if final_len == 0 {
        return Err(Error::Undefined("normalized erasure is undefined for an empty final output"));
    }
    let total: usize = erasure(log).iter().sum();
    Ok(T::from_count(total) / T::from_count(final_len))
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport<T> {
    pub bleu: T,
    pub tl: T,
    pub ne: T,
    pub per_event_erasure: Vec<usize>,
    pub per_token_lag: Vec<T>,
}

/// Everything needed to aggregate a document into a corpus-level score.
#[derive(Clone, Debug)]
pub struct DocumentScores<T> {
    pub bleu_stats: BleuStats,
    pub erasure: Vec<usize>,
    pub lags: Vec<T>,
    pub final_len: usize,
}

pub fn score_document<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    options: LagOptions,
) -> Result<DocumentScores<T>> {
    let aligned = align_final_output(log, reference)?;
    let mut bleu_stats = BleuStats::default();
    for (h, r) in aligned.hyp_segments().into_iter().zip(&aligned.references) {
        bleu_stats.add(&BleuStats::from_pair(h, r));
    }
    let lag = lag_from(log, reference, &aligned, options)?;
    Ok(DocumentScores {
        bleu_stats,
        erasure: erasure(log),
        lags: lag.per_token,
        final_len: aligned.tokens.len(),
    })
}

impl<T: Scalar> MetricsReport<T> {
    /// Pools several documents: corpus BLEU, and TL/NE weighted by final
    /// output length.
    pub fn aggregate<'a, I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DocumentScores<T>>,
    {
        let mut stats = BleuStats::default();
        let mut erasure = Vec::new();
        let mut lags = Vec::new();
        let mut final_len = 0;
        for d in docs {
            stats.add(&d.bleu_stats);
            erasure.extend_from_slice(&d.erasure);
            lags.extend_from_slice(&d.lags);
            final_len += d.final_len;
        }
        if final_len == 0 {
            return Err(Error::Undefined("metrics are undefined for an empty final output"));
        }
        let total_erasure: usize = erasure.iter().sum();
        Ok(MetricsReport {
            bleu: stats.score()?,
            tl: mean(&lags),
            ne: T::from_count(total_erasure) / T::from_count(final_len),
            per_event_erasure: erasure,
            per_token_lag: lags,
        })
    }

    /// Single JSON object `{"bleu", "tl", "ne", "erasure", "lags"}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            bleu: f64,
            tl: f64,
            ne: f64,
            erasure: &'a [usize],
            lags: Vec<f64>,
        }
        let out = Out {
            bleu: self.bleu.as_f64(),
            tl: self.tl.as_f64(),
            ne: self.ne.as_f64(),
            erasure: &self.per_event_erasure,
            lags: self.per_token_lag.iter().map(|x| x.as_f64()).collect(),
        };
        serde_json::to_string(&out).expect("report serializes")
    }
}

/// BLEU, Translation Lag and Normalized Erasure of one session.
pub fn evaluate_all<T: Scalar>(
    log: &EventLog<T>,
    reference: &ReferenceDocument<T>,
    options: LagOptions,
) -> Result<MetricsReport<T>> {
    let doc = score_document(log, reference, options)?;
    MetricsReport::aggregate([&doc])
}
