//! Caption cues to token-level utterance times.
//!
//! Cues are read from a three-column TSV (`start`, `end`, `text`, times in
//! seconds). Each token of a cue gets a time linearly interpolated across the
//! cue's span.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::eventlog::{tokenize, TimedToken};
use crate::pipeline::TimedTranscript;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CaptionCue<T> {
    pub start: T,
    pub end: T,
    pub text: String,
}

impl<T: Scalar> CaptionCue<T> {
    pub fn new(start: T, end: T, text: impl Into<String>) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || start < T::zero() || start >= end {
            return Err(Error::InvalidCaptions(format!("cue span [{start}, {end}) is not a valid interval")));
        }
        Ok(CaptionCue {
            start,
            end,
            text: text.into(),
        })
    }
}

pub fn load_cues<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<CaptionCue<T>>> {
    let mut cues = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let (Some(start), Some(end)) = (cols.next(), cols.next()) else {
            return Err(Error::parse(lineno, "expected start<TAB>end<TAB>text"));
        };
        let text = cols.next().unwrap_or("");
        let parse = |s: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .ok()
                .and_then(T::from_f64)
                .ok_or_else(|| Error::parse(lineno, format!("bad time {s:?}")))
        };
        let cue = CaptionCue::new(parse(start)?, parse(end)?, text).map_err(|e| Error::parse(lineno, e.to_string()))?;
        cues.push(cue);
    }
    Ok(cues)
}

/// Token `m` of the `M` tokens in a cue is timed at
/// `start + m / M * (end - start)`.
pub fn ingest_captions<T: Scalar>(cues: &[CaptionCue<T>]) -> Result<TimedTranscript<T>> {
    for w in cues.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::InvalidCaptions(format!(
                "cue starting at {} overlaps or precedes the cue ending at {}",
                w[1].start, w[0].end
            )));
        }
    }
    let mut tokens = Vec::new();
    for cue in cues {
        let words = tokenize(&cue.text);
        let count = T::from_count(words.len());
        for (m, w) in words.into_inner().into_iter().enumerate() {
            let time = cue.start + T::from_count(m) / count * (cue.end - cue.start);
            tokens.push(TimedToken::new(w, time)?);
        }
    }
    TimedTranscript::new(tokens)
}
