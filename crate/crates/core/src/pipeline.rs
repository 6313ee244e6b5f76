//! Replays a timed transcript as an append-only recognizer stream and
//! re-translates the last, possibly incomplete, sentence on every update.

use std::io::{BufRead, Write};

use crate::decoder::{biased_beam_search, mask_tail, DecoderConfig, ScoringModel};
use crate::error::{Error, Result};
use crate::eventlog::{Event, EventLog, TimedToken, TimedTokenRecord, TokenVector};
use crate::jsonl;
use crate::scalar::Scalar;

/// Recognized tokens with their utterance times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimedTranscript<T> {
    tokens: Vec<TimedToken<T>>,
}

impl<T: Scalar> TimedTranscript<T> {
    pub fn new(tokens: Vec<TimedToken<T>>) -> Result<Self> {
        for w in tokens.windows(2) {
            if w[1].time < w[0].time {
                return Err(Error::NonMonotoneTime {
                    previous: w[0].time.as_f64(),
                    got: w[1].time.as_f64(),
                });
            }
        }
        Ok(TimedTranscript { tokens })
    }

    pub fn tokens(&self) -> &[TimedToken<T>] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Reads one `{"w", "time"}` object per line.
pub fn load_transcript<T: Scalar, R: BufRead>(reader: R) -> Result<TimedTranscript<T>> {
    let mut tokens: Vec<TimedToken<T>> = Vec::new();
    for (line, rec) in jsonl::read_records::<TimedTokenRecord, _>(reader)? {
        let tok = rec.into_token().map_err(|e| Error::parse(line, e.to_string()))?;
        if let Some(prev) = tokens.last() {
            if tok.time < prev.time {
                return Err(Error::parse(line, format!("time {} precedes {}", tok.time, prev.time)));
            }
        }
        tokens.push(tok);
    }
    Ok(TimedTranscript { tokens })
}

pub fn save_transcript<T: Scalar, W: Write>(transcript: &TimedTranscript<T>, mut writer: W) -> Result<()> {
    for tok in &transcript.tokens {
        jsonl::write_record(&mut writer, &TimedTokenRecord::from_token(tok))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn ends_sentence(token: &str) -> bool {
    matches!(token.chars().last(), Some('.' | '!' | '?'))
}

/// Splits after every token ending in `.`, `!` or `?`. The flag tells
/// whether the last sentence is complete (true for no tokens at all).
pub fn split_sentences(tokens: &[String]) -> (Vec<&[String]>, bool) {
    let mut sentences = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if ends_sentence(t) {
            sentences.push(&tokens[start..=i]);
            start = i + 1;
        }
    }
    let last_complete = start == tokens.len();
    if !last_complete {
        sentences.push(&tokens[start..]);
    }
    (sentences, last_complete)
}

/// Transcript and translation accumulated so far.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionState {
    pub transcript: Vec<String>,
    /// Final translations of completed sentences.
    pub frozen: Vec<TokenVector>,
    /// Displayed (masked) translation of the sentence in progress.
    pub live: TokenVector,
    /// Unmasked translation of the sentence in progress; the bias target for
    /// its next re-translation.
    pub previous_unmasked: TokenVector,
}

impl SessionState {
    pub fn displayed_output(&self) -> TokenVector {
        TokenVector::concat(self.frozen.iter().chain(std::iter::once(&self.live)))
    }
}

/// Knobs of the simulated recognizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationOptions<T> {
    /// Tokens per recognizer emission.
    pub chunk: usize,
    /// Constant processing delay added to every event timestamp.
    pub delay: T,
}

impl<T: Scalar> Default for SimulationOptions<T> {
    fn default() -> Self {
        SimulationOptions {
            chunk: 1,
            delay: T::zero(),
        }
    }
}

/// One streaming session over a shared model.
pub struct Session<'m, T, M: ?Sized> {
    model: &'m M,
    config: DecoderConfig<T>,
    delay: T,
    state: SessionState,
    last_time: Option<T>,
}

impl<'m, T: Scalar, M: ScoringModel<T> + ?Sized> Session<'m, T, M> {
    pub fn new(model: &'m M, config: DecoderConfig<T>, delay: T) -> Result<Self> {
        config.validate()?;
        if !delay.is_finite() || delay < T::zero() {
            return Err(Error::InvalidConfig(format!("delay {delay} must be finite and non-negative")));
        }
        Ok(Session {
            model,
            config,
            delay,
            state: SessionState::default(),
            last_time: None,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    fn translate(&self, sentence: &[String], complete: bool, previous: TokenVector) -> Result<TokenVector> {
        biased_beam_search(self.model, sentence, complete, &self.config.with_previous(previous))
    }

    /// Consumes newly recognized tokens and returns the resulting snapshot.
    pub fn step(&mut self, new_tokens: &[TimedToken<T>]) -> Result<Event<T>> {
        let Some(last) = new_tokens.last() else {
            return Err(Error::Undefined("a session step needs at least one new token"));
        };
        let mut prev_time = self.last_time;
        for tok in new_tokens {
            if let Some(p) = prev_time {
                if tok.time < p {
                    return Err(Error::NonMonotoneTime {
                        previous: p.as_f64(),
                        got: tok.time.as_f64(),
                    });
                }
            }
            prev_time = Some(tok.time);
        }
        self.last_time = prev_time;
        self.state.transcript.extend(new_tokens.iter().map(|t| t.token.clone()));

        let transcript = std::mem::take(&mut self.state.transcript);
        let (sentences, last_complete) = split_sentences(&transcript);
        let completed = if last_complete { sentences.len() } else { sentences.len() - 1 };

        for sentence in &sentences[self.state.frozen.len()..completed] {
            let previous = std::mem::take(&mut self.state.previous_unmasked);
            let translation = self.translate(sentence, true, previous)?;
            self.state.frozen.push(translation);
            self.state.live = TokenVector::new();
        }
        if !last_complete {
            let sentence = sentences[completed];
            let previous = std::mem::take(&mut self.state.previous_unmasked);
            let translation = self.translate(sentence, false, previous)?;
            self.state.live = mask_tail(&translation, self.config.mask_k, false);
            self.state.previous_unmasked = translation;
        }
        drop(sentences);
        self.state.transcript = transcript;

        let timestamp = (last.time + self.delay).quantize_ms();
        Event::new(
            timestamp,
            self.state.transcript.join(" "),
            self.state.displayed_output().join(),
        )
    }
}

/// Feeds the transcript through a fresh session, `options.chunk` tokens at a time.
pub fn run_simulation<T: Scalar, M: ScoringModel<T> + ?Sized>(
    transcript: &TimedTranscript<T>,
    model: &M,
    config: &DecoderConfig<T>,
    options: SimulationOptions<T>,
) -> Result<EventLog<T>> {
    if options.chunk == 0 {
        return Err(Error::InvalidConfig("chunk size must be at least 1".into()));
    }
    let mut session = Session::new(model, config.clone(), options.delay)?;
    let mut log = EventLog::new();
    for chunk in transcript.tokens.chunks(options.chunk) {
        log.append(session.step(chunk)?)?;
    }
    Ok(log)
}
