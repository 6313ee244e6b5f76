//! Session event logs: timestamped snapshots of the recognized source and the
//! displayed translation, plus the whitespace tokenizer every metric relies on.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::scalar::{round_ms, Scalar};

/// A sequence of non-empty, whitespace-free tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenVector(Vec<String>);

impl TokenVector {
    pub fn new() -> Self {
        TokenVector(Vec::new())
    }

    /// Builds a vector from pre-split tokens, rejecting empty tokens and
    /// tokens containing whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(bad) = tokens.iter().find(|t| !is_valid_token(t)) {
            return Err(Error::InvalidToken(bad.clone()));
        }
        Ok(TokenVector(tokens))
    }

    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| is_valid_token(t)));
        TokenVector(tokens)
    }

    /// Joins with single spaces; `tokenize` inverts this exactly.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Concatenates several vectors into one.
    pub fn concat<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenVector>,
    {
        TokenVector(parts.into_iter().flat_map(|p| p.0.iter().cloned()).collect())
    }
}

impl Deref for TokenVector {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl AsRef<[String]> for TokenVector {
    fn as_ref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

pub(crate) fn is_valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

/// Splits on runs of whitespace. Case and punctuation are left untouched.
pub fn tokenize(text: &str) -> TokenVector {
    TokenVector(text.split_whitespace().map(str::to_owned).collect())
}

/// A token with its utterance time in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedToken<T> {
    pub token: String,
    pub time: T,
}

impl<T: Scalar> TimedToken<T> {
    pub fn new(token: impl Into<String>, time: T) -> Result<Self> {
        let token = token.into();
        if !is_valid_token(&token) {
            return Err(Error::InvalidToken(token));
        }
        if !time.is_finite() || time < T::zero() {
            return Err(Error::InvalidTime(time.as_f64()));
        }
        Ok(TimedToken { token, time })
    }
}

/// Wire form of a timed token: `{"w": <string>, "time": <number>}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TimedTokenRecord {
    pub w: String,
    pub time: f64,
}

impl TimedTokenRecord {
    pub(crate) fn from_token<T: Scalar>(t: &TimedToken<T>) -> Self {
        TimedTokenRecord {
            w: t.token.clone(),
            time: round_ms(t.time.as_f64()),
        }
    }

    pub(crate) fn into_token<T: Scalar>(self) -> Result<TimedToken<T>> {
        let time = T::from_f64(self.time).ok_or(Error::InvalidTime(self.time))?;
        TimedToken::new(self.w, time)
    }
}

/// One snapshot of a session: everything recognized and displayed up to `timestamp`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event<T> {
    timestamp: T,
    source_text: String,
    output_text: String,
}

impl<T: Scalar> Event<T> {
    pub fn new(timestamp: T, source_text: impl Into<String>, output_text: impl Into<String>) -> Result<Self> {
        if !timestamp.is_finite() || timestamp < T::zero() {
            return Err(Error::InvalidTime(timestamp.as_f64()));
        }
        Ok(Event {
            timestamp,
            source_text: source_text.into(),
            output_text: output_text.into(),
        })
    }

    pub fn timestamp(&self) -> T {
        self.timestamp
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn output_text(&self) -> &str {
        &self.output_text
    }

    pub fn source_tokens(&self) -> TokenVector {
        tokenize(&self.source_text)
    }

    pub fn output_tokens(&self) -> TokenVector {
        tokenize(&self.output_text)
    }

    fn same_state(&self, other: &Self) -> bool {
        self.source_text == other.source_text && self.output_text == other.output_text
    }

    /// Returns a copy with `delta` added to the timestamp.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        Event::new(self.timestamp + delta, self.source_text.clone(), self.output_text.clone())
    }
}

/// Ordered list of events with non-decreasing timestamps and no repeated states.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog<T> {
    events: Vec<Event<T>>,
}

impl<T> Default for EventLog<T> {
    fn default() -> Self {
        EventLog { events: Vec::new() }
    }
}

impl<T: Scalar> EventLog<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a log by appending each event in turn.
    pub fn from_events<I: IntoIterator<Item = Event<T>>>(events: I) -> Result<Self> {
        let mut log = Self::new();
        for e in events {
            log.append(e)?;
        }
        Ok(log)
    }

    /// Appends `event` unless it repeats the last state. Returns whether the
    /// log grew.
    pub fn append(&mut self, event: Event<T>) -> Result<bool> {
        if let Some(last) = self.events.last() {
            if event.timestamp < last.timestamp {
                return Err(Error::NonMonotoneTime {
                    previous: last.timestamp.as_f64(),
                    got: event.timestamp.as_f64(),
                });
            }
            if last.same_state(&event) {
                return Ok(false);
            }
        }
        self.events.push(event);
        Ok(true)
    }

    pub fn events(&self) -> &[Event<T>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last(&self) -> Option<&Event<T>> {
        self.events.last()
    }

    /// Tokenized output of every event, in order.
    pub fn output_tokens(&self) -> Vec<TokenVector> {
        self.events.iter().map(Event::output_tokens).collect()
    }

    /// Tokenized output of the final event, empty for an empty log.
    pub fn final_output(&self) -> TokenVector {
        self.events.last().map(Event::output_tokens).unwrap_or_default()
    }

    /// Adds `delta` seconds to every timestamp.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        Self::from_events(self.events.iter().map(|e| e.shifted(delta)).collect::<Result<Vec<_>>>()?)
    }
}

#[derive(Serialize)]
struct EventOut<'a> {
    t: f64,
    src: &'a str,
    out: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventIn {
    t: f64,
    src: String,
    out: String,
}

/// Reads the `{"t", "src", "out"}` JSONL session format.
pub fn load_eventlog<T: Scalar, R: BufRead>(reader: R) -> Result<EventLog<T>> {
    let mut log = EventLog::new();
    for (line, rec) in jsonl::read_records::<EventIn, _>(reader)? {
        let t = T::from_f64(rec.t).ok_or_else(|| Error::parse(line, "timestamp out of range"))?;
        let event = Event::new(t, rec.src, rec.out).map_err(|e| Error::parse(line, e.to_string()))?;
        log.append(event).map_err(|e| Error::parse(line, e.to_string()))?;
    }
    Ok(log)
}

/// Writes one JSON object per event; timestamps are rounded to milliseconds.
pub fn save_eventlog<T: Scalar, W: Write>(log: &EventLog<T>, mut writer: W) -> Result<()> {
    for e in &log.events {
        let rec = EventOut {
            t: round_ms(e.timestamp.as_f64()),
            src: &e.source_text,
            out: &e.output_text,
        };
        jsonl::write_record(&mut writer, &rec)?;
    }
    writer.flush()?;
    Ok(())
}
