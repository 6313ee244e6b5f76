//! Grid sweeps over the bias weight and mask size, with Pareto selection of
//! quality versus latency under a stability ceiling.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{DecoderConfig, ScoringModel};
use crate::error::{Error, Result};
use crate::metrics::{score_document, LagOptions, MetricsReport, ReferenceDocument};
use crate::metrics::load_reference;
use crate::pipeline::{load_transcript, run_simulation, SimulationOptions, TimedTranscript};
use crate::scalar::Scalar;

/// One evaluated `(beta, k)` configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub beta: T,
    pub k: usize,
    pub bleu: T,
    pub tl: T,
    pub ne: T,
}

/// A talk: its recognizer transcript and its reference.
#[derive(Clone, Debug)]
pub struct Document<T> {
    pub name: String,
    pub transcript: TimedTranscript<T>,
    pub reference: ReferenceDocument<T>,
}

/// Pairs `<name>.jsonl` transcripts with the same-named references, sorted by name.
pub fn load_documents<T: Scalar>(transcripts: &Path, references: &Path) -> Result<Vec<Document<T>>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(transcripts)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_owned());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidConfig(format!("no .jsonl transcripts in {}", transcripts.display())));
    }
    names
        .into_iter()
        .map(|name| {
            let file = format!("{name}.jsonl");
            let open = |dir: &Path| -> Result<BufReader<File>> {
                let path = dir.join(&file);
                File::open(&path)
                    .map(BufReader::new)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
            };
            let transcript = load_transcript(open(transcripts)?)?;
            let reference = load_reference(open(references)?)?;
            Ok(Document { name, transcript, reference })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SweepGrid<T> {
    pub betas: Vec<T>,
    pub ks: Vec<usize>,
    pub beam_size: usize,
    pub simulation: SimulationOptions<T>,
    pub lag: LagOptions,
}

impl<T: Scalar> SweepGrid<T> {
    /// Grid points in ascending `(beta, k)` order, duplicates removed.
    pub fn points(&self) -> Vec<(T, usize)> {
        let mut betas = self.betas.clone();
        betas.sort_by(|a, b| a.partial_cmp(b).expect("beta is not NaN"));
        betas.dedup();
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        betas.iter().flat_map(|&b| ks.iter().map(move |&k| (b, k))).collect()
    }
}

/// Simulates and scores every document under one configuration, pooling
/// the documents into a single report.
pub fn evaluate_config<T, M>(
    docs: &[Document<T>],
    model: &M,
    config: &DecoderConfig<T>,
    simulation: SimulationOptions<T>,
    lag: LagOptions,
) -> Result<MetricsReport<T>>
where
    T: Scalar,
    M: ScoringModel<T> + ?Sized,
{
    let wrap = |doc: &Document<T>, e: Error| Error::Sweep {
        beta: config.beta.as_f64(),
        k: config.mask_k,
        document: doc.name.clone(),
        source: Box::new(e),
    };
    let scores = docs
        .iter()
        .map(|doc| {
            let log = run_simulation(&doc.transcript, model, config, simulation).map_err(|e| wrap(doc, e))?;
            score_document(&log, &doc.reference, lag).map_err(|e| wrap(doc, e))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::aggregate(&scores).map_err(|e| Error::Sweep {
        beta: config.beta.as_f64(),
        k: config.mask_k,
        document: "<all>".into(),
        source: Box::new(e),
    })
}

/// Runs every grid point. Configurations are evaluated in parallel; rows
/// come back in grid order.
pub fn sweep<T, M>(docs: &[Document<T>], model: &M, grid: &SweepGrid<T>) -> Result<Vec<SweepRow<T>>>
where
    T: Scalar,
    M: ScoringModel<T> + Sync + ?Sized,
{
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    points
        .par_iter()
        .map(|&(beta, k)| {
            let config = DecoderConfig::new(grid.beam_size, beta, k)?;
            let report = evaluate_config(docs, model, &config, grid.simulation, grid.lag)?;
            Ok(SweepRow {
                beta,
                k,
                bleu: report.bleu,
                tl: report.tl,
                ne: report.ne,
            })
        })
        .collect()
}

fn dominates<T: Scalar>(a: &SweepRow<T>, b: &SweepRow<T>) -> bool {
    a.bleu >= b.bleu && a.tl <= b.tl && (a.bleu > b.bleu || a.tl < b.tl)
}

/// Indices of rows with `ne <= ne_ceiling` that no other such row beats on
/// both BLEU (higher) and TL (lower).
pub fn pareto_frontier<T: Scalar>(rows: &[SweepRow<T>], ne_ceiling: T) -> Vec<usize> {
    let eligible: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].ne <= ne_ceiling).collect();
    eligible
        .iter()
        .copied()
        .filter(|&i| !eligible.iter().any(|&j| dominates(&rows[j], &rows[i])))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    beta: f64,
    k: usize,
    bleu: f64,
    tl: f64,
    ne: f64,
}

/// Writes `beta,k,bleu,tl,ne` CSV with shortest round-trip float formatting.
pub fn write_rows_csv<'a, T: Scalar, W: Write, I>(rows: I, writer: W) -> Result<()>
where
    I: IntoIterator<Item = &'a SweepRow<T>>,
{
    let mut w = csv::Writer::from_writer(writer);
    let mut any = false;
    for r in rows {
        any = true;
        w.serialize(RowRecord {
            beta: r.beta.as_f64(),
            k: r.k,
            bleu: r.bleu.as_f64(),
            tl: r.tl.as_f64(),
            ne: r.ne.as_f64(),
        })
        .map_err(csv_err)?;
    }
    if !any {
        w.write_record(["beta", "k", "bleu", "tl", "ne"]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<SweepRow<T>>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["beta", "k", "bleu", "tl", "ne"] {
        return Err(Error::parse(1, format!("unexpected header {:?}", headers)));
    }
    r.deserialize::<RowRecord>()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
            let conv = |x: f64| T::from_f64(x).ok_or_else(|| Error::parse(i + 2, "value out of range"));
            Ok(SweepRow {
                beta: conv(rec.beta)?,
                k: rec.k,
                bleu: conv(rec.bleu)?,
                tl: conv(rec.tl)?,
                ne: conv(rec.ne)?,
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(bleu: f64, tl: f64, ne: f64) -> SweepRow<f64> {
        SweepRow { beta: 0.0, k: 0, bleu, tl, ne }
    }

    #[test]
    fn frontier_drops_dominated_rows() {
        let rows = vec![row(20.0, 4.0, 0.5), row(19.0, 5.0, 0.5), row(21.0, 6.0, 0.05), row(18.0, 3.0, 2.0)];
        assert_eq!(pareto_frontier(&rows, f64::INFINITY), vec![0, 2, 3]);
        assert_eq!(pareto_frontier(&rows, 1.0), vec![0, 2]);
        assert_eq!(pareto_frontier(&rows, 0.1), vec![2]);
        assert!(pareto_frontier(&rows, 0.01).is_empty());
    }

    #[test]
    fn tighter_ceiling_can_expose_new_rows() {
        let rows = vec![row(20.0, 4.0, 0.05), row(21.0, 3.0, 0.5)];
        assert_eq!(pareto_frontier(&rows, f64::INFINITY), vec![1]);
        assert_eq!(pareto_frontier(&rows, 0.1), vec![0]);
    }

    #[test]
    fn equal_rows_both_kept() {
        let rows = vec![row(20.0, 4.0, 0.5), row(20.0, 4.0, 0.5)];
        assert_eq!(pareto_frontier(&rows, 1.0), vec![0, 1]);
    }

    #[test]
    fn grid_points_sorted_and_deduped() {
        let grid = SweepGrid {
            betas: vec![0.5, 0.0, 0.5],
            ks: vec![5, 0],
            beam_size: 2,
            simulation: SimulationOptions::default(),
            lag: LagOptions::default(),
        };
        assert_eq!(grid.points(), vec![(0.0, 0), (0.0, 5), (0.5, 0), (0.5, 5)]);
    }

    #[test]
    fn csv_header_and_empty() {
        let mut buf = Vec::new();
        write_rows_csv::<f64, _, _>(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "beta,k,bleu,tl,ne\n");
        let mut buf = Vec::new();
        write_rows_csv(&[SweepRow { beta: 0.5, k: 5, bleu: 20.17, tl: 4.11, ne: 0.12 }], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "beta,k,bleu,tl,ne\n0.5,5,20.17,4.11,0.12\n");
        assert!(read_rows_csv::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_roundtrip(rows in prop::collection::vec((0.0f64..=1.0, 0usize..12, 0.0f64..100.0, -5.0f64..20.0, 0.0f64..10.0), 0..10)) {
            let rows: Vec<SweepRow<f64>> = rows.into_iter().map(|(beta, k, bleu, tl, ne)| SweepRow { beta, k, bleu, tl, ne }).collect();
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf).unwrap();
            let back: Vec<SweepRow<f64>> = read_rows_csv(&buf[..]).unwrap();
            prop_assert_eq!(back, rows);
        }

        #[test]
        fn frontier_is_non_dominated(rows in prop::collection::vec((0u8..6, 0u8..6, 0u8..4), 0..12), ceiling in 0u8..4) {
            let rows: Vec<SweepRow<f64>> = rows.into_iter().map(|(b, t, n)| row(b as f64, t as f64, n as f64)).collect();
            let ceiling = ceiling as f64;
            let front = pareto_frontier(&rows, ceiling);
            for &i in &front {
                prop_assert!(rows[i].ne <= ceiling);
                for r in rows.iter().filter(|r| r.ne <= ceiling) {
                    prop_assert!(!dominates(r, &rows[i]));
                }
            }
            for (i, r) in rows.iter().enumerate() {
                if r.ne <= ceiling && !front.contains(&i) {
                    prop_assert!(rows.iter().any(|o| o.ne <= ceiling && dominates(o, r)));
                }
            }
            // Tightening the ceiling only loses rows, or exposes rows that were
            // dominated by something above the new ceiling.
            let loose = pareto_frontier(&rows, f64::INFINITY);
            for &i in &front {
                prop_assert!(loose.contains(&i) || rows.iter().any(|o| o.ne > ceiling && dominates(o, &rows[i])));
            }
        }
    }
}
