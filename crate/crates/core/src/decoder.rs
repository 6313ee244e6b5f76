//! Next-token scoring models and the re-translation decoder: beam search
//! biased towards the previous translation, and tail masking of translations
//! of incomplete sentences.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::eventlog::{is_valid_token, TokenVector};
use crate::scalar::Scalar;

/// Output symbol of a scoring model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Word(String),
    Eos,
}

impl Symbol {
    pub fn word(w: impl Into<String>) -> Self {
        Symbol::Word(w.into())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Word(w) => f.write_str(w),
            Symbol::Eos => f.write_str("</s>"),
        }
    }
}

/// Probability distribution over output symbols, iterated in symbol order.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T> {
    probs: BTreeMap<Symbol, T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn certain(sym: Symbol) -> Self {
        Distribution {
            probs: BTreeMap::from([(sym, T::one())]),
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Symbol, T)>>(pairs: I) -> Self {
        let mut probs = BTreeMap::new();
        for (s, p) in pairs {
            *probs.entry(s).or_insert_with(T::zero) += p;
        }
        Distribution { probs }
    }

    pub fn get(&self, sym: &Symbol) -> T {
        self.probs.get(sym).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, T)> {
        self.probs.iter().map(|(s, &p)| (s, p))
    }

    pub fn total(&self) -> T {
        self.probs.values().copied().sum()
    }

    /// `(1 - beta) * self + beta * onehot(target)`.
    pub fn mix_with_onehot(&self, target: &Symbol, beta: T) -> Self {
        let keep = T::one() - beta;
        let mut probs: BTreeMap<Symbol, T> = self.probs.iter().map(|(s, &p)| (s.clone(), keep * p)).collect();
        *probs.entry(target.clone()).or_insert_with(T::zero) += beta;
        Distribution { probs }
    }
}

/// Conditional next-token distribution `p(y_j | y_<j, x)`.
pub trait ScoringModel<T: Scalar> {
    fn next_distribution(&self, source: &[String], source_complete: bool, prefix: &[String]) -> Result<Distribution<T>>;
}

impl<T: Scalar, M: ScoringModel<T> + ?Sized> ScoringModel<T> for &M {
    fn next_distribution(&self, source: &[String], source_complete: bool, prefix: &[String]) -> Result<Distribution<T>> {
        (**self).next_distribution(source, source_complete, prefix)
    }
}

/// What follows the source word being translated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    /// The next source token.
    Next(String),
    /// The word ends a completed sentence.
    End,
    /// Unknown or unlisted continuation.
    Any,
}

impl Context {
    /// Accepts `<END>`/`⟨END⟩` and `*`/`∗` for the two markers.
    pub fn parse(s: &str) -> Self {
        match s {
            "<END>" | "⟨END⟩" => Context::End,
            "*" | "∗" => Context::Any,
            w => Context::Next(w.to_owned()),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Next(w) => f.write_str(w),
            Context::End => f.write_str("<END>"),
            Context::Any => f.write_str("*"),
        }
    }
}

/// Monotone, one-word-per-word translation table. Target position `j`
/// translates source position `j`, conditioned on the source word that follows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableModel<T> {
    entries: BTreeMap<(String, Context), Vec<(String, T)>>,
}

#[derive(Default)]
pub struct TableModelBuilder {
    rows: BTreeMap<(String, Context), BTreeMap<String, f64>>,
}

impl TableModelBuilder {
    pub fn add(&mut self, word: &str, context: Context, target: &str, prob: f64) -> Result<&mut Self> {
        for t in [word, target] {
            if !is_valid_token(t) {
                return Err(Error::InvalidModel(format!("invalid token {t:?}")));
            }
        }
        if let Context::Next(c) = &context {
            if !is_valid_token(c) {
                return Err(Error::InvalidModel(format!("invalid context token {c:?}")));
            }
        }
        if !prob.is_finite() || !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidModel(format!("probability {prob} outside [0, 1]")));
        }
        let row = self.rows.entry((word.to_owned(), context.clone())).or_default();
        if row.insert(target.to_owned(), prob).is_some() {
            return Err(Error::InvalidModel(format!("duplicate row ({word}, {context}, {target})")));
        }
        Ok(self)
    }

    pub fn build<T: Scalar>(self) -> Result<TableModel<T>> {
        for ((word, ctx), row) in &self.rows {
            let sum: f64 = row.values().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidModel(format!(
                    "distribution for ({word}, {ctx}) sums to {sum}"
                )));
            }
        }
        let words: BTreeSet<&String> = self.rows.keys().map(|(w, _)| w).collect();
        for w in words {
            if !self.rows.contains_key(&(w.clone(), Context::Any)) {
                return Err(Error::InvalidModel(format!("word {w:?} has no wildcard entry")));
            }
        }
        let entries = self
            .rows
            .into_iter()
            .map(|(key, row)| {
                let dist = row.into_iter().map(|(t, p)| (t, T::lit(p))).collect();
                (key, dist)
            })
            .collect();
        Ok(TableModel { entries })
    }
}

impl<T: Scalar> TableModel<T> {
    pub fn builder() -> TableModelBuilder {
        TableModelBuilder::default()
    }

    /// Every target word the table can produce.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.entries.values().flat_map(|d| d.iter().map(|(t, _)| t.clone())).collect()
    }

    pub fn source_words(&self) -> BTreeSet<String> {
        self.entries.keys().map(|(w, _)| w.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, word: &str, ctx: Context) -> Option<&Vec<(String, T)>> {
        let key = (word.to_owned(), ctx);
        self.entries.get(&key).or_else(|| {
            if key.1 == Context::Any {
                None
            } else {
                self.entries.get(&(key.0, Context::Any))
            }
        })
    }
}

impl<T: Scalar> ScoringModel<T> for TableModel<T> {
    fn next_distribution(&self, source: &[String], source_complete: bool, prefix: &[String]) -> Result<Distribution<T>> {
        let pos = prefix.len();
        if pos >= source.len() {
            return Ok(Distribution::certain(Symbol::Eos));
        }
        let word = &source[pos];
        let ctx = match source.get(pos + 1) {
            Some(next) => Context::Next(next.clone()),
            None if source_complete => Context::End,
            None => Context::Any,
        };
        match self.lookup(word, ctx) {
            None => Ok(Distribution::certain(Symbol::Word(word.clone()))),
            Some(row) if row.is_empty() => Err(Error::InvalidModel(format!("empty distribution for {word:?}"))),
            Some(row) => Ok(Distribution {
                probs: row.iter().map(|(t, p)| (Symbol::Word(t.clone()), *p)).collect(),
            }),
        }
    }
}

/// Reads the tab-separated `source_word context target_word probability`
/// format. Lines starting with `#` and blank lines are ignored.
pub fn load_table_model<T: Scalar, R: BufRead>(reader: R) -> Result<TableModel<T>> {
    let mut builder = TableModel::<T>::builder();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [word, ctx, target, prob] = cols[..] else {
            return Err(Error::parse(lineno, format!("expected 4 tab-separated columns, found {}", cols.len())));
        };
        let prob: f64 = prob
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad probability {prob:?}")))?;
        builder
            .add(word, Context::parse(ctx), target, prob)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
    }
    builder.build()
}

// ---------------------------------------------------------------------------
// Search

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig<T> {
    pub beam_size: usize,
    /// Weight of the previous translation in the next-token mixture.
    pub beta: T,
    /// Tokens hidden from the end of translations of incomplete sentences.
    pub mask_k: usize,
    /// Defaults to `2 * |source| + 5`.
    pub max_len: Option<usize>,
    /// Translation of the previous source prefix (`y'`).
    pub previous_translation: TokenVector,
}

impl<T: Scalar> Default for DecoderConfig<T> {
    fn default() -> Self {
        DecoderConfig {
            beam_size: 4,
            beta: T::zero(),
            mask_k: 0,
            max_len: None,
            previous_translation: TokenVector::new(),
        }
    }
}

impl<T: Scalar> DecoderConfig<T> {
    pub fn new(beam_size: usize, beta: T, mask_k: usize) -> Result<Self> {
        let cfg = DecoderConfig {
            beam_size,
            beta,
            mask_k,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_previous(&self, previous: TokenVector) -> Self {
        DecoderConfig {
            previous_translation: previous,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::InvalidConfig("beam size must be at least 1".into()));
        }
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::InvalidConfig(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.max_len == Some(0) {
            return Err(Error::InvalidConfig("max_len must be positive".into()));
        }
        Ok(())
    }

    pub fn max_len_for(&self, source_len: usize) -> usize {
        self.max_len.unwrap_or(2 * source_len + 5)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis<T> {
    pub tokens: Vec<String>,
    pub logscore: T,
    /// Whether `tokens` is still a prefix of the previous translation.
    pub following_previous: bool,
    pub finished: bool,
}

/// Higher score first, then hypotheses following `y'`, then token order.
fn rank<T: Scalar>(a: &Hypothesis<T>, b: &Hypothesis<T>) -> Ordering {
    b.logscore
        .partial_cmp(&a.logscore)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.following_previous.cmp(&a.following_previous))
        .then_with(|| a.tokens.cmp(&b.tokens))
        .then_with(|| a.finished.cmp(&b.finished))
}

/// Beam search whose next-token distribution, while a hypothesis has
/// followed `y'` exactly and `y'` has a token at this position, is
/// `(1 - beta) * p + beta * onehot(y'_j)`. Returns the best hypothesis, or
/// `None` for an empty source.
pub fn search<T: Scalar, M: ScoringModel<T> + ?Sized>(
    model: &M,
    source: &[String],
    source_complete: bool,
    config: &DecoderConfig<T>,
) -> Result<Option<Hypothesis<T>>> {
    config.validate()?;
    if source.is_empty() {
        return Ok(None);
    }
    let previous = &config.previous_translation;
    let max_len = config.max_len_for(source.len());

    let mut active = vec![Hypothesis {
        tokens: Vec::new(),
        logscore: T::zero(),
        following_previous: true,
        finished: false,
    }];
    let mut best: Option<Hypothesis<T>> = None;

    for step in 0..max_len {
        if active.is_empty() {
            break;
        }
        let mut candidates = Vec::new();
        for hyp in &active {
            let mut dist = model.next_distribution(source, source_complete, &hyp.tokens)?;
            let biased = hyp.following_previous && step < previous.len();
            if biased {
                dist = dist.mix_with_onehot(&Symbol::Word(previous[step].clone()), config.beta);
            }
            for (sym, p) in dist.iter() {
                if p <= T::zero() {
                    continue;
                }
                let logscore = hyp.logscore + p.ln();
                let child = match sym {
                    Symbol::Eos => Hypothesis {
                        tokens: hyp.tokens.clone(),
                        logscore,
                        following_previous: hyp.following_previous,
                        finished: true,
                    },
                    Symbol::Word(w) => {
                        let mut tokens = hyp.tokens.clone();
                        tokens.push(w.clone());
                        Hypothesis {
                            tokens,
                            logscore,
                            following_previous: biased && previous[step] == *w,
                            finished: false,
                        }
                    }
                };
                candidates.push(child);
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(config.beam_size);

        active.clear();
        for c in candidates {
            if c.finished {
                if best.as_ref().is_none_or(|b| rank(&c, b) == Ordering::Less) {
                    best = Some(c);
                }
            } else {
                active.push(c);
            }
        }
        // Scores never increase, so anything already below the best finished
        // hypothesis cannot overtake it.
        if let Some(b) = &best {
            active.retain(|h| h.logscore >= b.logscore);
        }
    }

    if best.is_none() {
        active.sort_by(rank);
        best = active.into_iter().next();
    }
    Ok(best)
}

/// Translation of `source` under biased beam search; empty for an empty source.
pub fn biased_beam_search<T: Scalar, M: ScoringModel<T> + ?Sized>(
    model: &M,
    source: &[String],
    source_complete: bool,
    config: &DecoderConfig<T>,
) -> Result<TokenVector> {
    Ok(search(model, source, source_complete, config)?
        .map(|h| TokenVector::from_vec_unchecked(h.tokens))
        .unwrap_or_default())
}

/// Drops the last `k` tokens unless the source sentence is complete.
pub fn mask_tail(tokens: &TokenVector, k: usize, source_complete: bool) -> TokenVector {
    if source_complete {
        return tokens.clone();
    }
    let keep = tokens.len().saturating_sub(k);
    TokenVector::from_vec_unchecked(tokens[..keep].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::tokenize;

    const MODEL_M: &str = "# toy\na\tb\tX\t1.0\na\t*\tY\t1.0\nb\t<END>\tZ\t1.0\nb\t*\tW\t1.0\n";

    fn model_m() -> TableModel<f64> {
        load_table_model(MODEL_M.as_bytes()).unwrap()
    }

    fn src(s: &str) -> Vec<String> {
        tokenize(s).into_inner()
    }

    fn cfg(beta: f64, prev: &str) -> DecoderConfig<f64> {
        DecoderConfig::new(2, beta, 0).unwrap().with_previous(tokenize(prev))
    }

    #[test]
    fn table_lookup() {
        let m = model_m();
        let d = m.next_distribution(&src("a"), false, &[]).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::word("Y")));
        let d = m.next_distribution(&src("a b"), true, &[]).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::word("X")));
        let d = m.next_distribution(&src("a b"), true, &src("X Z")).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::Eos));
        // unseen exact context falls back to the wildcard entry
        let d = m.next_distribution(&src("a c"), true, &[]).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::word("Y")));
        let d = m.next_distribution(&src("b"), false, &[]).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::word("W")));
        // unknown word copies through
        let d = m.next_distribution(&src("q"), true, &[]).unwrap();
        assert_eq!(d, Distribution::certain(Symbol::word("q")));
    }

    #[test]
    fn search_examples() {
        let m = model_m();
        let out = biased_beam_search(&m, &src("a b"), true, &cfg(0.0, "Y")).unwrap();
        assert_eq!(out.as_slice(), ["X", "Z"]);
        let out = biased_beam_search(&m, &src("a b"), true, &cfg(0.8, "Y")).unwrap();
        assert_eq!(out.as_slice(), ["Y", "Z"]);
        let out = biased_beam_search(&m, &src("a b"), true, &cfg(1.0, "Y")).unwrap();
        assert_eq!(out.first().map(String::as_str), Some("Y"));
        assert!(biased_beam_search(&m, &[], true, &cfg(0.5, "Y")).unwrap().is_empty());
    }

    #[test]
    fn biased_score_accumulates_mixture() {
        let m = model_m();
        let best = search(&m, &src("a b"), true, &cfg(0.8, "Y")).unwrap().unwrap();
        // p'(Y) = 0.8, then unbiased Z and EOS at probability 1
        assert!((best.logscore - 0.8f64.ln()).abs() < 1e-12);
        assert!(!best.following_previous);
        assert!(best.finished);
    }

    #[test]
    fn bias_stops_after_divergence() {
        // Two-way ambiguity at each position.
        let tsv = "a\t*\tA1\t0.6\na\t*\tA2\t0.4\nb\t*\tB1\t0.6\nb\t*\tB2\t0.4\n";
        let m: TableModel<f64> = load_table_model(tsv.as_bytes()).unwrap();
        // y' = [A2, B2]. With beta 0.3: p'(A2) = 0.7*0.4+0.3 = 0.58 > p'(A1) = 0.42.
        let best = search(&m, &src("a b"), true, &cfg(0.3, "A2 B2")).unwrap().unwrap();
        assert_eq!(best.tokens, ["A2", "B2"]);
        assert!(best.following_previous);
        // y' = [A1, B2]: A1 kept; then B2 gets 0.58 vs B1 0.42.
        let best = search(&m, &src("a b"), true, &cfg(0.3, "A1 B2")).unwrap().unwrap();
        assert_eq!(best.tokens, ["A1", "B2"]);
        // Diverging on the first token removes the bias for the second: with
        // beta 0.1, A1 (0.54) beats A2 (0.46); after choosing A1 against
        // y' = [A2, B2] the second token is unbiased.
        let best = search(&m, &src("a b"), true, &cfg(0.1, "A2 B2")).unwrap().unwrap();
        assert_eq!(best.tokens, ["A1", "B1"]);
    }

    #[test]
    fn max_len_fallback_returns_unfinished() {
        let m = model_m();
        let mut c = cfg(1.0, "Y Z Q Q Q Q");
        c.max_len = Some(3);
        let out = biased_beam_search(&m, &src("a b"), true, &c).unwrap();
        assert_eq!(out.as_slice(), ["Y", "Z", "Q"]);
    }

    #[test]
    fn out_of_vocabulary_previous_token_is_mixed_in() {
        let m = model_m();
        let d = m.next_distribution(&src("a"), false, &[]).unwrap().mix_with_onehot(&Symbol::word("Nope"), 0.25);
        assert_eq!(d.get(&Symbol::word("Y")), 0.75);
        assert_eq!(d.get(&Symbol::word("Nope")), 0.25);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn mask_examples() {
        let t = tokenize("New Medicines may be");
        assert_eq!(mask_tail(&t, 2, false).as_slice(), ["New", "Medicines"]);
        assert_eq!(mask_tail(&t, 0, false), t);
        assert_eq!(mask_tail(&t, 10, true), t);
        assert!(mask_tail(&t, 10, false).is_empty());
    }

    #[test]
    fn model_loading_errors() {
        let short = "a\t*\tX\t0.5\na\t*\tY\t0.4\n";
        assert!(matches!(load_table_model::<f64, _>(short.as_bytes()), Err(Error::InvalidModel(_))));
        let dup = "a\t*\tX\t0.5\na\t*\tX\t0.5\n";
        assert!(matches!(load_table_model::<f64, _>(dup.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let no_wild = "a\tb\tX\t1.0\n";
        assert!(load_table_model::<f64, _>(no_wild.as_bytes()).is_err());
        let cols = "a\t*\tX\n";
        assert!(matches!(load_table_model::<f64, _>(cols.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let empty: TableModel<f64> = load_table_model(&b""[..]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(biased_beam_search(&empty, &src("u v"), true, &cfg(0.0, "")).unwrap().as_slice(), ["u", "v"]);
    }

    #[test]
    fn unicode_markers_accepted() {
        let tsv = "a\tb\tX\t1.0\na\t∗\tY\t1.0\nb\t⟨END⟩\tZ\t1.0\nb\t∗\tW\t1.0\n";
        let m: TableModel<f64> = load_table_model(tsv.as_bytes()).unwrap();
        assert_eq!(m, model_m());
    }

    #[test]
    fn invalid_config() {
        assert!(DecoderConfig::new(0, 0.5, 0).is_err());
        assert!(DecoderConfig::new(1, 1.5, 0).is_err());
        assert!(DecoderConfig::new(1, f64::NAN, 0).is_err());
        assert!(DecoderConfig::<f32>::new(1, 0.5, 0).is_ok());
    }

    #[test]
    fn f32_search_matches_f64() {
        let m32: TableModel<f32> = load_table_model(MODEL_M.as_bytes()).unwrap();
        let c = DecoderConfig::new(2, 0.8f32, 0).unwrap().with_previous(tokenize("Y"));
        assert_eq!(biased_beam_search(&m32, &src("a b"), true, &c).unwrap().as_slice(), ["Y", "Z"]);
    }
}
