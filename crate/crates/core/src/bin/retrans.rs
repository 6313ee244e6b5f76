use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};

use retrans::{
    evaluate_all, ingest_captions, load_cues, load_documents, load_eventlog, load_reference, load_table_model,
    load_transcript, pareto_frontier, run_simulation, save_eventlog, save_transcript, sweep, write_rows_csv,
    Correspondence, DecoderConfig, LagOptions, SimulationOptions, SweepGrid,
};

#[derive(Parser)]
#[command(name = "retrans", version, about = "Simulate and evaluate re-translation sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn caption cues (start, end, text TSV) into a timed transcript.
    IngestCaptions {
        #[arg(long)]
        cues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a transcript through the re-translation pipeline.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long = "k")]
        k: usize,
        #[arg(long)]
        beam: usize,
        #[arg(long, default_value_t = 1)]
        chunk: usize,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an event log against a reference document.
    Evaluate {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = CorrespondenceArg::Segment)]
        correspondence: CorrespondenceArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate and score every (beta, k) pair over a set of documents.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long)]
        beam: usize,
        #[arg(long, default_value_t = f64::INFINITY)]
        ne_ceiling: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrespondenceArg {
    Segment,
    Document,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

/// `rows.csv` -> `rows.pareto.csv`
fn pareto_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("rows");
    out.with_file_name(format!("{stem}.pareto.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCaptions { cues, out } => {
            let cues = load_cues::<f64, _>(open(&cues)?).with_context(|| format!("reading {}", cues.display()))?;
            let transcript = ingest_captions(&cues)?;
            save_transcript(&transcript, create(&out)?)?;
        }
        Command::Simulate {
            model,
            transcript,
            beta,
            k,
            beam,
            chunk,
            delay,
            out,
        } => {
            let model = load_table_model::<f64, _>(open(&model)?).with_context(|| format!("reading {}", model.display()))?;
            let transcript =
                load_transcript(open(&transcript)?).with_context(|| format!("reading {}", transcript.display()))?;
            let config = DecoderConfig::new(beam, beta, k)?;
            let log = run_simulation(&transcript, &model, &config, SimulationOptions { chunk, delay })?;
            save_eventlog(&log, create(&out)?)?;
        }
        Command::Evaluate {
            events,
            reference,
            correspondence,
            out,
        } => {
            let log = load_eventlog::<f64, _>(open(&events)?).with_context(|| format!("reading {}", events.display()))?;
            let reference =
                load_reference(open(&reference)?).with_context(|| format!("reading {}", reference.display()))?;
            let options = LagOptions {
                correspondence: match correspondence {
                    CorrespondenceArg::Segment => Correspondence::Segment,
                    CorrespondenceArg::Document => Correspondence::Document,
                },
                ..Default::default()
            };
            let report = evaluate_all(&log, &reference, options)?;
            let mut w = create(&out)?;
            writeln!(w, "{}", report.to_json())?;
            w.flush()?;
        }
        Command::Sweep {
            model,
            transcripts,
            references,
            betas,
            ks,
            beam,
            ne_ceiling,
            out,
        } => {
            if ne_ceiling.is_nan() {
                bail!("--ne-ceiling must be a number");
            }
            let model = load_table_model::<f64, _>(open(&model)?).with_context(|| format!("reading {}", model.display()))?;
            let docs = load_documents(&transcripts, &references)?;
            let grid = SweepGrid {
                betas,
                ks,
                beam_size: beam,
                simulation: SimulationOptions::default(),
                lag: LagOptions::default(),
            };
            let rows = sweep(&docs, &model, &grid)?;
            write_rows_csv(&rows, create(&out)?)?;
            let frontier = pareto_frontier(&rows, ne_ceiling);
            write_rows_csv(frontier.iter().map(|&i| &rows[i]), create(&pareto_path(&out))?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
