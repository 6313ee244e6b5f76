//! Independent reference implementations used as test oracles, plus fixture
//! helpers. Nothing here calls the search or alignment code under test.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use retrans::{Distribution, ScoringModel, Symbol, TableModel, TokenVector};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn toy_dir() -> PathBuf {
    data_dir().join("toy")
}

// ---------------------------------------------------------------------------
// Segmentation

/// Full-matrix edit distance.
pub fn edit_distance<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

/// Every non-decreasing cut vector in lexicographic order; keeps the first minimum.
pub fn brute_force_segment<S: PartialEq>(hyp: &[S], refs: &[Vec<S>]) -> (Vec<usize>, usize) {
    let cuts = refs.len() - 1;
    let n = hyp.len();
    let mut best: Option<(Vec<usize>, usize)> = None;
    let mut current = vec![0usize; cuts];
    loop {
        let mut bounds = vec![0];
        bounds.extend(&current);
        bounds.push(n);
        let cost: usize = refs
            .iter()
            .enumerate()
            .map(|(k, r)| edit_distance(&hyp[bounds[k]..bounds[k + 1]], r))
            .sum();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((current.clone(), cost));
        }
        // next non-decreasing vector
        let mut i = cuts;
        loop {
            if i == 0 {
                return best.unwrap();
            }
            i -= 1;
            if current[i] < n {
                current[i] += 1;
                for j in i + 1..cuts {
                    current[j] = current[i];
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Search

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn mixed(dist: Distribution<f64>, following: bool, j: usize, previous: &[String], beta: f64) -> Vec<(Symbol, f64)> {
    if following && j < previous.len() {
        let target = Symbol::Word(previous[j].clone());
        let mut out: Vec<(Symbol, f64)> = dist.iter().map(|(s, p)| (s.clone(), (1.0 - beta) * p)).collect();
        match out.iter_mut().find(|(s, _)| *s == target) {
            Some((_, p)) => *p += beta,
            None => out.push((target, beta)),
        }
        out
    } else {
        dist.iter().map(|(s, p)| (s.clone(), p)).collect()
    }
}

/// Textbook beam search without any bias: keep the `beam` best candidates
/// per step, move finished ones aside, pick the best finished at the end.
pub fn plain_beam_search<M: ScoringModel<f64>>(
    model: &M,
    source: &[String],
    complete: bool,
    beam: usize,
    max_len: usize,
) -> Vec<String> {
    if source.is_empty() {
        return Vec::new();
    }
    let mut live: Vec<(Vec<String>, f64)> = vec![(Vec::new(), 0.0)];
    let mut done: Vec<(Vec<String>, f64)> = Vec::new();
    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut cands: Vec<(Vec<String>, f64, bool)> = Vec::new();
        for (prefix, score) in &live {
            let dist = model.next_distribution(source, complete, prefix).unwrap();
            for (sym, p) in dist.iter() {
                if p <= 0.0 {
                    continue;
                }
                match sym {
                    Symbol::Eos => cands.push((prefix.clone(), score + p.ln(), true)),
                    Symbol::Word(w) => {
                        let mut t = prefix.clone();
                        t.push(w.clone());
                        cands.push((t, score + p.ln(), false));
                    }
                }
            }
        }
        cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
        cands.truncate(beam);
        live.clear();
        for (t, s, fin) in cands {
            if fin {
                done.push((t, s));
            } else {
                live.push((t, s));
            }
        }
    }
    let pool = if done.is_empty() { live } else { done };
    pool.into_iter()
        .min_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)))
        .map(|(t, _)| t)
        .unwrap_or_default()
}

/// Best complete sequence by accumulated log p', enumerating every path.
/// Ties: following y' first, then token order.
pub fn exhaustive_biased<M: ScoringModel<f64>>(
    model: &M,
    source: &[String],
    complete: bool,
    beta: f64,
    previous: &[String],
    max_len: usize,
) -> (Vec<String>, f64) {
    let mut best: Option<(Vec<String>, f64, bool)> = None;
    let mut stack = vec![(Vec::<String>::new(), 0.0f64, true)];
    while let Some((prefix, score, following)) = stack.pop() {
        let j = prefix.len();
        let dist = model.next_distribution(source, complete, &prefix).unwrap();
        let biased = following && j < previous.len();
        for (sym, p) in mixed(dist, following, j, previous, beta) {
            if p <= 0.0 {
                continue;
            }
            let s = score + p.ln();
            match sym {
                Symbol::Eos => {
                    let better = match &best {
                        None => true,
                        Some((bt, bs, bf)) => {
                            s > *bs || (s == *bs && (following && !bf || following == *bf && prefix < *bt))
                        }
                    };
                    if better {
                        best = Some((prefix.clone(), s, following));
                    }
                }
                Symbol::Word(w) => {
                    if j + 1 < max_len {
                        let f = biased && previous[j] == w;
                        let mut t = prefix.clone();
                        t.push(w);
                        stack.push((t, s, f));
                    }
                }
            }
        }
    }
    let (t, s, _) = best.expect("fertility-one models always finish");
    (t, s)
}

// ---------------------------------------------------------------------------
// Random models

pub const SOURCE_WORDS: [&str; 4] = ["a", "b", "c", "d"];
pub const TARGET_WORDS: [&str; 5] = ["P", "Q", "R", "S", "T"];

fn random_dist<R: Rng>(rng: &mut R) -> Vec<(&'static str, f64)> {
    let n = rng.gen_range(1..=3);
    let mut targets = TARGET_WORDS.to_vec();
    targets.shuffle(rng);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    targets[..n].iter().zip(weights).map(|(t, w)| (*t, w / total)).collect()
}

/// Random table over a small vocabulary, serialized as TSV and loaded back.
pub fn random_table_model<R: Rng>(rng: &mut R) -> TableModel<f64> {
    let mut tsv = String::new();
    for w in SOURCE_WORDS {
        if rng.gen_bool(0.15) {
            continue; // unknown word: identity translation
        }
        for (t, p) in random_dist(rng) {
            tsv.push_str(&format!("{w}\t*\t{t}\t{p:.17}\n"));
        }
        let mut contexts: Vec<&str> = SOURCE_WORDS.to_vec();
        contexts.push("<END>");
        for ctx in contexts {
            if rng.gen_bool(0.4) {
                for (t, p) in random_dist(rng) {
                    tsv.push_str(&format!("{w}\t{ctx}\t{t}\t{p:.17}\n"));
                }
            }
        }
    }
    retrans::load_table_model(tsv.as_bytes()).expect("generated model is valid")
}

pub fn random_source<R: Rng>(rng: &mut R, len: usize) -> Vec<String> {
    (0..len).map(|_| SOURCE_WORDS.choose(rng).unwrap().to_string()).collect()
}

pub fn random_target<R: Rng>(rng: &mut R, len: usize) -> TokenVector {
    TokenVector::from_tokens((0..len).map(|_| TARGET_WORDS.choose(rng).unwrap().to_string())).unwrap()
}
