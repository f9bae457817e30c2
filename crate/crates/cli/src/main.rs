mod exit;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lmstego::corpus;
use lmstego::key::{KeyConfig, Session};
use lmstego::lm_protocol::{serve, ServerConfig};
use lmstego::metrics::sweep::{self, SweepConfig, DEFAULT_SWEEP_TOP_K};
use lmstego::probmodel::DEFAULT_PRECISION;
use lmstego::{Error, LanguageModel, Method, NGramModel, Result};

use crate::io::{read_cover, read_message_bits, write_bits, write_output, BitsFormat, CoverFormat};

#[derive(Parser, Debug)]
#[command(name = "lmstego", version, about = "Hide bits in language-model cover text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an n-gram model on a corpus with one document per line.
    TrainNgram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = corpus::BUILTIN_ORDER)]
        order: usize,
        #[arg(long, default_value_t = corpus::BUILTIN_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in synthetic corpus, one document per line.
    BuiltinCorpus {
        #[arg(long, default_value_t = corpus::BUILTIN_DOCUMENTS)]
        documents: usize,
        #[arg(long, default_value_t = corpus::BUILTIN_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode message bits into cover text.
    Encode {
        #[arg(long)]
        key: PathBuf,
        /// A file (raw bytes, or a string of 0/1 characters) or hex bytes.
        #[arg(long, value_name = "FILE|HEX")]
        message_bits: String,
        #[arg(long, value_enum, default_value_t = CoverFormat::Text)]
        format: CoverFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover message bits from cover text.
    Decode {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        #[arg(long, value_enum, default_value_t = CoverFormat::Text)]
        format: CoverFormat,
        #[arg(long, value_enum, default_value_t = BitsFormat::Auto)]
        output: BitsFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compress a text message and hide it in cover text.
    Hide {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        message: String,
        #[arg(long, value_enum, default_value_t = CoverFormat::Text)]
        format: CoverFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a hidden text message.
    Reveal {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        #[arg(long, value_enum, default_value_t = CoverFormat::Text)]
        format: CoverFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep methods and parameters, reporting bits/word against KL.
    Eval {
        #[arg(long)]
        key: PathBuf,
        /// Cover contexts, one per line; defaults to the key's context.
        #[arg(long)]
        contexts: Option<PathBuf>,
        /// `default` or e.g. `arithmetic:0.4,1.0;huffman:2,16;block:1,3`.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random message length per sample.
        #[arg(long, default_value_t = 128)]
        message_bits: usize,
        #[arg(long, default_value_t = DEFAULT_SWEEP_TOP_K)]
        top_k: usize,
        #[arg(long, default_value_t = DEFAULT_PRECISION)]
        precision: u32,
        /// Seed for block grid points; defaults to the key's block seed.
        #[arg(long)]
        block_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = EvalFormat::Csv)]
        format: EvalFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the vocabulary fingerprint of the key's model.
    Fingerprint {
        #[arg(long)]
        key: PathBuf,
    },
    /// Serve an n-gram model over HTTP.
    ServeNgram {
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        model: Option<PathBuf>,
        #[arg(long)]
        builtin: bool,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Send only the most probable tokens plus the remaining mass.
        #[arg(long)]
        sparse_top: Option<usize>,
        #[arg(long)]
        max_context: Option<usize>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EvalFormat {
    Csv,
    Json,
    Gnuplot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmstego: {e}");
            ExitCode::from(exit::code(&e))
        }
    }
}

fn session(key: &std::path::Path) -> Result<Session> {
    KeyConfig::load(key)?.open()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainNgram {
            corpus,
            order,
            alpha,
            out,
        } => {
            let text = std::fs::read_to_string(&corpus)?;
            let model = NGramModel::train_text(&text, order, alpha)?;
            let file = std::fs::File::create(&out)?;
            model.write_to(std::io::BufWriter::new(file))?;
            eprintln!(
                "vocabulary {} tokens, fingerprint {}",
                model.vocabulary().len(),
                model.vocabulary().fingerprint()
            );
        }
        Command::BuiltinCorpus {
            documents,
            seed,
            out,
        } => {
            let docs = corpus::generate(documents, seed);
            write_output(out.as_deref(), &corpus::to_training_text(&docs))?;
        }
        Command::Encode {
            key,
            message_bits,
            format,
            out,
        } => {
            let s = session(&key)?;
            let message = read_message_bits(&message_bits)?;
            let cover = s.encode(&message)?;
            write_output(out.as_deref(), &io::render(&s, &cover, format)?)?;
        }
        Command::Decode {
            key,
            cover,
            format,
            output,
            out,
        } => {
            let s = session(&key)?;
            let cover = read_cover(&s, &cover, format)?;
            write_bits(out.as_deref(), &s.decode(&cover)?, output)?;
        }
        Command::Hide {
            key,
            message,
            format,
            out,
        } => {
            let s = session(&key)?;
            let cover = s.hide(&message)?;
            write_output(out.as_deref(), &io::render(&s, &cover, format)?)?;
        }
        Command::Reveal {
            key,
            cover,
            format,
            out,
        } => {
            let s = session(&key)?;
            let cover = read_cover(&s, &cover, format)?;
            let text = s.reveal(&cover)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
        }
        Command::Eval {
            key,
            contexts,
            grid,
            samples,
            seed,
            message_bits,
            top_k,
            precision,
            block_seed,
            format,
            out,
        } => {
            let s = session(&key)?;
            let block_seed = block_seed.unwrap_or(match s.key().method {
                Method::Block { seed, .. } => seed,
                _ => 0,
            });
            let grid = sweep::parse_grid(&grid, Some(top_k), precision, block_seed)?;
            let contexts = match contexts {
                Some(path) => std::fs::read_to_string(path)?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| s.context_for(l))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![s.context().to_vec()],
            };
            let config = SweepConfig {
                contexts,
                grid,
                n_samples: samples,
                message_bits,
                max_tokens: s.key().max_tokens,
                seed,
            };
            let points = sweep::run_sweep(s.model(), &config)?;
            let failures: usize = points.iter().map(|p| p.failures).sum();
            if failures > 0 {
                eprintln!("{failures} samples ran out of tokens and were left out");
            }
            let text = match format {
                EvalFormat::Csv => sweep::to_csv(&points),
                EvalFormat::Json => sweep::to_json(&points),
                EvalFormat::Gnuplot => sweep::to_gnuplot(&points),
            };
            write_output(out.as_deref(), &text)?;
        }
        Command::Fingerprint { key } => {
            let s = session(&key)?;
            println!("{}", s.model().vocabulary().fingerprint());
        }
        Command::ServeNgram {
            model,
            builtin,
            addr,
            sparse_top,
            max_context,
        } => {
            let model = match model {
                Some(path) => {
                    let file = std::fs::File::open(&path)
                        .map_err(|e| Error::Config(format!("model {}: {e}", path.display())))?;
                    NGramModel::read_from(std::io::BufReader::new(file))?
                }
                None => {
                    debug_assert!(builtin);
                    corpus::builtin_model()
                }
            };
            let handle = serve(
                model,
                &addr,
                ServerConfig {
                    sparse_top,
                    max_context,
                },
            )?;
            println!("listening on {}", handle.url());
            handle.join();
        }
    }
    Ok(())
}
