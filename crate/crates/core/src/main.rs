use std::io::{BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use rolecraft::corpus::{fixtures::figure1, read_corpus, write_corpus, CorpusFormat};
use rolecraft::decoder::{decode, extract_spans, merge_lattice};
use rolecraft::evaluation::{align, evaluate, EvalMode};
use rolecraft::frames::{BaseRole, FrameInventory};
use rolecraft::pipeline::ablation::{run_ablation, Ablation};
use rolecraft::pipeline::{
    dump_queries, predict_senses, read_intermediates, run_pipeline, select_roles, train_model, with_pool, write_jsonl,
    PipelineConfig, SenseRecord,
};
use rolecraft::querygen::{mark_predicate, QueryStyle};
use rolecraft::role_filter::{gold_roles, score_matrix, tune_lambda, write_role_sets, write_role_sets_to};
use rolecraft::scoring::{protocol, BioRequest, ReferenceModel, RoleRequest, Scorer, ScorerSpec, SenseRequest, TagDistribution};
use rolecraft::synth::{self, SynthConfig};
use rolecraft::{Error, Result};

#[derive(Parser)]
#[command(name = "rolecraft", version, about = "Semantic role labeling as reading comprehension")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's lambda (and clears its threshold).
    #[arg(long, conflicts_with = "threshold")]
    lambda: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = Some(l);
            cfg.threshold = None;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = Some(t);
            cfg.lambda = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Normalize frame files (PropBank XML or JSON Lines) into one JSON Lines inventory.
    IngestFrames {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Convert a CoNLL corpus into normalized JSON Lines.
    Convert {
        #[arg(long)]
        input: PathBuf,
        /// normalized, conll-span or conll-dep
        #[arg(long, default_value = "conll-span")]
        format: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the synthetic corpus (frames, train, dev, test).
    Synth {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = synth::DEFAULT_SENTENCES)]
        sentences: usize,
    },
    /// Train the reference scorer on paths.train, tuning lambda on paths.dev.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Where to write the training summary (JSON); stdout otherwise.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Smallest grid lambda reaching the target recall on the corpus.
    TuneLambda {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Score role presence and keep the global top pairs.
    FilterRoles {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Choose a sense per predicate.
    Disambiguate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full pipeline; writes predictions and, with gold, the report.
    Predict {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Reuse a sense-stage file instead of disambiguating.
        #[arg(long)]
        senses: Option<PathBuf>,
        /// Reuse a role-set file instead of filtering.
        #[arg(long)]
        roles: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Score predictions against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "normalized")]
        format: String,
        /// span or dep
        #[arg(long, default_value = "span")]
        mode: String,
        /// Frame inventory, for the single-sense fraction.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run an ablation series.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// sense-corruption, no-semantics or data-fraction
        #[arg(long)]
        which: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the role queries a run would send.
    DumpQueries {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        senses: Option<PathBuf>,
        #[arg(long)]
        roles: Option<PathBuf>,
        /// semantic or label-only; defaults to the config
        #[arg(long)]
        style: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Decode per-role tag distributions given as JSON.
    Decode {
        /// File with {"lattice": [{"role": "A1", "rows": [[7 probs], ...]}, ...]}; - for stdin.
        #[arg(long, default_value = "-")]
        input: PathBuf,
        /// Also print the merged lattice.
        #[arg(long)]
        debug: bool,
    },
    /// Serve a reference model over the wire protocol (stdio, or TCP with --listen).
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Handshake with a scorer and validate one request of each kind.
    CheckScorer {
        #[arg(long)]
        scorer: ScorerSpec,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_style(s: &str) -> Result<QueryStyle> {
    match s {
        "semantic" => Ok(QueryStyle::Semantic),
        "label-only" => Ok(QueryStyle::LabelOnly),
        other => Err(Error::Config(format!("unknown query style {other:?}"))),
    }
}

#[derive(Deserialize)]
struct LatticeInput {
    lattice: Vec<LatticeEntry>,
}

#[derive(Deserialize)]
struct LatticeEntry {
    role: BaseRole,
    rows: Vec<[f64; 7]>,
}

fn cmd_decode(input: &Path, debug: bool) -> Result<()> {
    let mut text = String::new();
    let read = if input == Path::new("-") {
        std::io::stdin().read_to_string(&mut text)
    } else {
        std::fs::File::open(input).and_then(|mut f| f.read_to_string(&mut text))
    };
    read.map_err(|e| Error::Io {
        path: input.to_path_buf(),
        source: e,
    })?;
    let parsed: LatticeInput = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: input.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let dists = parsed
        .lattice
        .into_iter()
        .map(|e| Ok((e.role, TagDistribution::new(e.rows)?)))
        .collect::<Result<Vec<_>>>()?;
    let lattice = merge_lattice(&dists)?;
    let tags = decode(&lattice);
    let mut out = serde_json::json!({
        "tags": tags.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "spans": extract_spans(&tags),
    });
    if debug {
        out["lattice"] = lattice.debug_json();
    }
    emit(None, &to_json(&out)?)
}

fn cmd_serve(model: &Path, listen: Option<&str>) -> Result<()> {
    let scorer = Arc::new(ReferenceModel::load(model)?);
    match listen {
        None => {
            let stdin = std::io::stdin();
            let n = protocol::serve(scorer.as_ref(), stdin.lock(), std::io::stdout().lock())?;
            info!("answered {n} requests");
            Ok(())
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| Error::Transport(format!("bind {addr}: {e}")))?;
            let local = listener.local_addr().map_err(|e| Error::Transport(e.to_string()))?;
            eprintln!("listening on {local}");
            for stream in listener.incoming() {
                let stream = match stream {
                    Ok(s) => s,
                    Err(e) => {
                        warn!("accept failed: {e}");
                        continue;
                    }
                };
                let scorer = Arc::clone(&scorer);
                std::thread::spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(s) => BufReader::new(s),
                        Err(e) => return warn!("connection setup failed: {e}"),
                    };
                    if let Err(e) = protocol::serve(scorer.as_ref(), reader, stream) {
                        warn!("connection closed: {e}");
                    }
                });
            }
            Ok(())
        }
    }
}

fn cmd_check_scorer(spec: &ScorerSpec, timeout: Duration) -> Result<()> {
    let scorer = spec.open_with_timeout(timeout)?;
    let inst = figure1();
    let marked = mark_predicate(&inst);
    let roles: Vec<BaseRole> = ["A0", "A1", "TMP"].iter().map(|r| r.parse()).collect::<Result<_>>()?;
    let sense = scorer.score_sense(&SenseRequest {
        marked: marked.clone(),
        option_text: "push, cause motion".into(),
    })?;
    let presence = scorer.score_role_presence(&RoleRequest {
        marked: marked.clone(),
        roles: roles.clone(),
    })?;
    let dist = scorer.score_bio_one(&BioRequest {
        marked,
        query_text: "What are the A1 arguments of predicate beaten with meaning thing moving?".into(),
        role: roles[1].clone(),
    })?;
    let report = serde_json::json!({
        "scorer": spec.to_string(),
        "protocol": protocol::PROTOCOL_VERSION,
        "sense": sense,
        "roles": presence,
        "bio_rows": dist.len(),
        "ok": true,
    });
    emit(None, &to_json(&report)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestFrames { input, output } => {
            let inv = FrameInventory::ingest(&input)?;
            inv.save_jsonl(&output)?;
            eprintln!("{} lemmas written to {}", inv.lemma_count(), output.display());
            Ok(())
        }
        Command::Convert { input, format, output } => {
            let instances = read_corpus(&input, format.parse::<CorpusFormat>()?)?;
            write_corpus(&instances, &output)?;
            eprintln!("{} predicates written to {}", instances.len(), output.display());
            Ok(())
        }
        Command::Synth {
            output_dir,
            seed,
            sentences,
        } => {
            let corpus = synth::generate(&SynthConfig {
                seed,
                sentences,
                ..SynthConfig::default()
            });
            synth::write(&corpus, &output_dir)?;
            eprintln!(
                "{} / {} / {} predicates in {}",
                corpus.train.len(),
                corpus.dev.len(),
                corpus.test.len(),
                output_dir.display()
            );
            Ok(())
        }
        Command::Train { cfg, summary } => {
            let cfg = cfg.load()?;
            let inv = cfg.inventory()?;
            let format = cfg.corpus_format()?;
            let train_path = cfg.paths.train.clone().ok_or_else(|| Error::Config("paths.train is not set".into()))?;
            let model_path = cfg.paths.model.clone().ok_or_else(|| Error::Config("paths.model is not set".into()))?;
            let train = read_corpus(&train_path, format)?;
            let dev = match &cfg.paths.dev {
                Some(d) => read_corpus(d, format)?,
                None => Vec::new(),
            };
            let (model, report) = with_pool(cfg.workers, || {
                train_model(&inv, &train, &dev, cfg.roles.as_deref(), cfg.query_style, &cfg.train)
            })??;
            model.save(&model_path)?;
            eprintln!(
                "model written to {} (lambda {}, dev recall {:?})",
                model_path.display(),
                report.tuning.lambda,
                report.tuning.report.recall
            );
            emit(summary.as_deref(), &to_json(&report)?)
        }
        Command::TuneLambda { cfg, target, step } => {
            let cfg = cfg.load()?;
            let instances = read_corpus(&cfg.corpus_path()?, cfg.corpus_format()?)?;
            let stages = cfg.stages()?;
            let result = with_pool(cfg.workers, || -> Result<_> {
                let m = score_matrix(stages.role.as_ref(), &instances, &stages.universe)?;
                tune_lambda(
                    &m,
                    &gold_roles(&instances),
                    target.unwrap_or(cfg.train.target_recall),
                    step.unwrap_or(cfg.train.grid_step),
                )
            })??;
            emit(None, &to_json(&result)?)
        }
        Command::FilterRoles { cfg, output } => {
            let cfg = cfg.load()?;
            let instances = read_corpus(&cfg.corpus_path()?, cfg.corpus_format()?)?;
            let stages = cfg.stages()?;
            let (report, sets, errors) = with_pool(cfg.workers, || select_roles(&instances, &stages, &[]))??;
            for (i, e) in &errors {
                warn!("{}: role stage failed: {e}", instances[*i].key());
            }
            match output {
                Some(p) => write_role_sets(&p, &report, &sets)?,
                None => write_role_sets_to(&mut std::io::stdout().lock(), &report, &sets)?,
            }
            eprintln!("kept {} pairs, speedup {:.3}, recall {:?}", report.kept_pairs, report.speedup, report.recall);
            Ok(())
        }
        Command::Disambiguate { cfg, output } => {
            let cfg = cfg.load()?;
            let inv = cfg.inventory()?;
            let instances = read_corpus(&cfg.corpus_path()?, cfg.corpus_format()?)?;
            let stages = cfg.stages()?;
            let records = with_pool(cfg.workers, || predict_senses(&inv, &instances, &stages))?;
            for r in records.iter().filter(|r| r.error.is_some()) {
                warn!("{}: {}", r.predicate, r.error.as_deref().unwrap_or_default());
            }
            write_records(output.as_deref(), &records)
        }
        Command::Predict {
            cfg,
            senses,
            roles,
            output,
            json,
        } => {
            let mut cfg = cfg.load()?;
            if output.is_some() {
                cfg.paths.output = output;
            }
            let given = read_intermediates(senses.as_deref(), roles.as_deref())?;
            let result = run_pipeline(&cfg, given)?;
            let failed = result.output.failures.len();
            if failed > 0 {
                warn!("{failed} predicates failed; see the log above");
            }
            if let Some(report) = &result.report {
                let text = if json { to_json(report)? } else { report.to_text() };
                emit(None, text.trim_end())?;
            }
            Ok(())
        }
        Command::Evaluate {
            gold,
            pred,
            format,
            mode,
            frames,
            json,
        } => {
            let format: CorpusFormat = format.parse()?;
            let gold = read_corpus(&gold, format)?;
            let pred = read_corpus(&pred, format)?;
            let inv = frames.as_deref().map(FrameInventory::load).transpose()?;
            let preds = align(&gold, &pred)?;
            let report = evaluate(&gold, &preds, mode.parse::<EvalMode>()?, inv.as_ref())?;
            let text = if json { to_json(&report)? } else { report.to_text() };
            emit(None, text.trim_end())
        }
        Command::Ablate { cfg, which, output } => {
            let cfg = cfg.load()?;
            let series = run_ablation(&cfg, which.parse::<Ablation>()?)?;
            emit(output.as_deref(), &to_json(&series)?)
        }
        Command::DumpQueries {
            cfg,
            senses,
            roles,
            style,
            output,
        } => {
            let cfg = cfg.load()?;
            let inv = cfg.inventory()?;
            let instances = read_corpus(&cfg.corpus_path()?, cfg.corpus_format()?)?;
            let style = style.as_deref().map(parse_style).transpose()?.unwrap_or(cfg.query_style);
            let given = read_intermediates(senses.as_deref(), roles.as_deref())?;
            let queries = with_pool(cfg.workers, || -> Result<_> {
                let needs_scorers = given.senses.is_none() || given.roles.is_none();
                let stages = if needs_scorers { Some(cfg.stages()?) } else { None };
                let senses: Vec<SenseRecord> = match given.senses {
                    Some(s) => s,
                    None => predict_senses(&inv, &instances, stages.as_ref().expect("opened")),
                };
                let sets = match given.roles {
                    Some((_, sets)) => sets,
                    None => select_roles(&instances, stages.as_ref().expect("opened"), &[])?.1,
                };
                dump_queries(&inv, &instances, &senses, &sets, style)
            })??;
            write_records(output.as_deref(), &queries)
        }
        Command::Decode { input, debug } => cmd_decode(&input, debug),
        Command::Serve { model, listen } => cmd_serve(&model, listen.as_deref()),
        Command::CheckScorer { scorer, timeout_secs } => cmd_check_scorer(&scorer, Duration::from_secs(timeout_secs)),
    }
}

fn write_records<T: Serialize>(output: Option<&Path>, records: &[T]) -> Result<()> {
    match output {
        Some(p) => write_jsonl(p, records),
        None => {
            let mut out = std::io::stdout().lock();
            for r in records {
                let line = serde_json::to_string(r).map_err(|e| Error::Contract(e.to_string()))?;
                writeln!(out, "{line}").map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rolecraft: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
