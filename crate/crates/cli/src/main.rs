use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lintfix_core::context::{extract_context, ContextConfig};
use lintfix_core::dataset::{
    build_dataset, classify_difficulty, select_samples, BuildConfig, Classification, FeedbackConfig, TemplateStubGenerator,
    TrainingSample,
};
use lintfix_core::lint::{run_linter, LinterConfig};
use lintfix_core::metrics::{match_adoption, summarize, weekly_table, AdoptionRecord, EvalRecord};
use lintfix_core::orchestrator::{fix_all, BackendSpec, CompileCheck, FixConfig};
use lintfix_core::patch::{apply_patch, parse_patch, ApplyMode, BlockStatus};
use lintfix_core::reward::{score_rollout, RewardBreakdown, RewardConfig};
use lintfix_core::udiff::diff_workspaces;
use lintfix_core::{LintIssue, Workspace};
use lintfix_review::ReviewStore;

#[derive(Parser)]
#[command(name = "lintfix", version, about = "Lint-error remediation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured linter and write findings as JSON Lines.
    Scan {
        #[arg(long)]
        workspace: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the extracted context for one finding.
    Context {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        issue: String,
        /// Findings file; the workspace is scanned when absent.
        #[arg(long)]
        issues: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Apply a search/replace patch to a workspace directory.
    Apply {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        patch: PathBuf,
        /// Byte-exact search matching.
        #[arg(long)]
        strict: bool,
        /// Print the resulting diff without writing files.
        #[arg(long)]
        dry_run: bool,
    },
    /// Generate, apply and verify fixes for a set of findings.
    Fix(FixArgs),
    /// Score candidate generations against training samples.
    Reward {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Build, classify and select training samples.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Fix accuracy, redundancy and weekly adoption.
    Metrics {
        /// Evaluation records (sample_id, success, blocks_generated, errors_present).
        #[arg(long)]
        records: PathBuf,
        /// Adoption records, such as a review store's adoptions.jsonl.
        #[arg(long)]
        adoptions: Option<PathBuf>,
        /// Also print the weekly table as TSV.
        #[arg(long)]
        table: bool,
    },
    /// Decide whether a committed diff adopts a suggested diff.
    Adoption {
        #[arg(long)]
        suggested: PathBuf,
        #[arg(long)]
        committed: PathBuf,
    },
    /// Load fixed outcomes into a review store.
    Ingest {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
    },
    /// Run the review HTTP service.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory holding the browser bundle, served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Cold-start samples: one minimal reproducing workspace per finding.
    Build {
        #[arg(long)]
        repo: PathBuf,
        /// Findings file; the repository is scanned when absent.
        #[arg(long)]
        issues: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Attach difficulty from repeated single-shot attempts; drops samples
    /// solved every time.
    Classify {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = "oracle")]
        backend: BackendSpec,
        #[arg(long, default_value_t = 8)]
        attempts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Balanced subset across difficulty bands.
    Select {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FixArgs {
    #[arg(long)]
    workspace: PathBuf,
    #[arg(long)]
    issues: PathBuf,
    /// `oracle`, `scripted:<file>` or `http:<url>#<model>`.
    #[arg(long, default_value = "oracle")]
    backend: BackendSpec,
    #[arg(long, default_value_t = lintfix_core::orchestrator::DEFAULT_MAX_RETRIES)]
    max_retries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one evaluation record per finding.
    #[arg(long)]
    eval_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    deny_new_issues: bool,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML or JSON file with `linter`, `compile`, `apply_mode` and `budget`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    linter: LinterConfig,
    compile: Option<CompileCheck>,
    apply_mode: Option<ApplyMode>,
    budget: Option<usize>,
}

impl ConfigArg {
    fn load(&self) -> Result<FileConfig> {
        let Some(path) = &self.config else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: FileConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.linter.validate()?;
        Ok(cfg)
    }
}

impl FileConfig {
    fn context(&self) -> ContextConfig {
        self.budget.map(ContextConfig::with_budget).unwrap_or_default()
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_workspace(dir: &Path) -> Result<Workspace> {
    Workspace::load_dir(dir).with_context(|| format!("loading workspace {}", dir.display()))
}

fn issues_for(ws: &Workspace, file: Option<&Path>, linter: &LinterConfig) -> Result<Vec<LintIssue>> {
    match file {
        Some(p) => read_jsonl(p),
        None => Ok(run_linter(ws, linter)?),
    }
}

#[derive(Deserialize)]
struct Candidate {
    sample_id: String,
    candidate: String,
}

#[derive(Serialize)]
struct RewardRecord {
    sample_id: String,
    /// Position of the candidate among those for the same sample.
    index: usize,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Scan { workspace, config, out } => {
            let cfg = config.load()?;
            let ws = load_workspace(&workspace)?;
            let issues = run_linter(&ws, &cfg.linter)?;
            write_jsonl(out.as_deref(), &issues)?;
            eprintln!("{} findings", issues.len());
        }
        Command::Context {
            workspace,
            issue,
            issues,
            budget,
            config,
        } => {
            let mut cfg = config.load()?;
            if budget.is_some() {
                cfg.budget = budget;
            }
            let ws = load_workspace(&workspace)?;
            let all = issues_for(&ws, issues.as_deref(), &cfg.linter)?;
            let found = all
                .iter()
                .find(|i| i.issue_id == issue)
                .with_context(|| format!("no finding with id `{issue}`"))?;
            let ctx = extract_context(&ws, found, &cfg.context())?;
            println!("{}", serde_json::to_string_pretty(&ctx)?);
        }
        Command::Apply {
            workspace,
            patch,
            strict,
            dry_run,
        } => {
            let ws = load_workspace(&workspace)?;
            let text = fs::read_to_string(&patch).with_context(|| format!("reading {}", patch.display()))?;
            let parsed = parse_patch(&text);
            let mode = if strict { ApplyMode::Strict } else { ApplyMode::TrimTrailing };
            let report = apply_patch(&ws, &parsed, mode);
            for (block, status) in parsed.blocks.iter().zip(&report.per_block) {
                eprintln!("{}: {status:?}", block.file);
            }
            if parsed.malformed_count > 0 {
                eprintln!("{} malformed block(s) ignored", parsed.malformed_count);
            }
            print!("{}", diff_workspaces(&ws, &report.result));
            if !dry_run {
                report.result.write_to(&workspace)?;
            }
            if report.per_block.iter().any(|s| *s != BlockStatus::Applied) || parsed.blocks.is_empty() {
                std::process::exit(2);
            }
        }
        Command::Fix(args) => run_fix(args)?,
        Command::Reward {
            samples,
            candidates,
            beta,
            out,
            config,
        } => {
            let file_cfg = config.load()?;
            let cfg = RewardConfig {
                linter: file_cfg.linter,
                compile: file_cfg.compile.unwrap_or_default(),
                apply_mode: file_cfg.apply_mode.unwrap_or_default(),
                beta,
                ..RewardConfig::default()
            };
            let samples: Vec<TrainingSample> = read_jsonl(&samples)?;
            let by_id: std::collections::HashMap<&str, &TrainingSample> =
                samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
            let mut seen: std::collections::HashMap<String, usize> = Default::default();
            let mut records = Vec::new();
            for c in read_jsonl::<Candidate>(&candidates)? {
                let sample = by_id
                    .get(c.sample_id.as_str())
                    .with_context(|| format!("candidate for unknown sample `{}`", c.sample_id))?;
                let index = seen.entry(c.sample_id.clone()).or_default();
                let breakdown = score_rollout(sample, &c.candidate, &cfg).with_context(|| format!("scoring {}", c.sample_id))?;
                records.push(RewardRecord {
                    sample_id: c.sample_id,
                    index: *index,
                    breakdown,
                });
                *index += 1;
            }
            write_jsonl(out.as_deref(), &records)?;
        }
        Command::Dataset(cmd) => run_dataset(cmd)?,
        Command::Metrics { records, adoptions, table } => {
            let evals: Vec<EvalRecord> = read_jsonl(&records)?;
            let adoptions: Vec<AdoptionRecord> = match adoptions {
                Some(p) => read_jsonl(&p)?,
                None => Vec::new(),
            };
            let summary = summarize(&evals, &adoptions)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if table {
                print!("{}", weekly_table(&summary.weekly));
            }
        }
        Command::Adoption { suggested, committed } => {
            let s = fs::read_to_string(&suggested)?;
            let c = fs::read_to_string(&committed)?;
            let verdict = match_adoption(&s, &c)?;
            println!("{}", serde_json::json!({ "verdict": verdict }));
        }
        Command::Ingest { store, outcomes } => {
            let store = ReviewStore::open(&store, FeedbackConfig::default())?;
            let summary = store.ingest_outcomes(&outcomes)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Serve {
            store,
            port,
            host,
            ui,
            config,
        } => {
            let cfg = config.load()?;
            let feedback = FeedbackConfig {
                linter: cfg.linter.clone(),
                apply_mode: cfg.apply_mode.unwrap_or_default(),
                context: cfg.context(),
                ..FeedbackConfig::default()
            };
            let store = Arc::new(ReviewStore::open(&store, feedback)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(lintfix_review::serve(store, ui, addr))?;
        }
    }
    Ok(())
}

fn run_fix(args: FixArgs) -> Result<()> {
    let file_cfg = args.config.load()?;
    let ws = load_workspace(&args.workspace)?;
    let issues: Vec<LintIssue> = read_jsonl(&args.issues)?;
    let cfg = FixConfig {
        linter: file_cfg.linter.clone(),
        compile: Some(file_cfg.compile.clone().unwrap_or_default()),
        apply_mode: file_cfg.apply_mode.unwrap_or_default(),
        deny_new_issues: args.deny_new_issues,
        max_retries: args.max_retries,
        context: file_cfg.context(),
    };
    let backend = args.backend.build();
    let results = fix_all(&ws, &issues, backend.as_ref(), &cfg, args.threads);
    let mut records = Vec::new();
    for (issue, r) in issues.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => bail!("{}: {e}", issue.issue_id),
        }
    }
    let fixed = records.iter().filter(|r| r.outcome.is_fixed()).count();
    write_jsonl(args.out.as_deref(), &records)?;
    if let Some(p) = &args.eval_out {
        let evals: Vec<EvalRecord> = records
            .iter()
            .map(|r| EvalRecord::from_outcome(r.issue.issue_id.clone(), &r.outcome, 1))
            .collect();
        write_jsonl(Some(p), &evals)?;
    }
    eprintln!("{fixed}/{} fixed", records.len());
    Ok(())
}

fn run_dataset(cmd: DatasetCommand) -> Result<()> {
    match cmd {
        DatasetCommand::Build { repo, issues, out, config } => {
            let file_cfg = config.load()?;
            let ws = load_workspace(&repo)?;
            let issues = issues_for(&ws, issues.as_deref(), &file_cfg.linter)?;
            let cfg = BuildConfig {
                linter: file_cfg.linter.clone(),
                compile: file_cfg.compile.clone().unwrap_or_default(),
                context: file_cfg.context(),
            };
            let summary = build_dataset(&ws, &issues, &TemplateStubGenerator, &cfg)?;
            for (id, why) in &summary.rejected {
                eprintln!("rejected {id}: {why}");
            }
            write_jsonl(out.as_deref(), &summary.samples)?;
            eprintln!("{} samples, {} rejected", summary.samples.len(), summary.rejected.len());
        }
        DatasetCommand::Classify {
            samples,
            backend,
            attempts,
            out,
            config,
        } => {
            let file_cfg = config.load()?;
            let cfg = FixConfig {
                linter: file_cfg.linter.clone(),
                compile: Some(file_cfg.compile.clone().unwrap_or_default()),
                apply_mode: file_cfg.apply_mode.unwrap_or_default(),
                context: file_cfg.context(),
                ..FixConfig::default()
            };
            let mut kept = Vec::new();
            let mut discarded = 0;
            for mut s in read_jsonl::<TrainingSample>(&samples)? {
                // A fresh backend per sample keeps scripted runs independent.
                let backend = backend.build();
                match classify_difficulty(&s, backend.as_ref(), attempts, &cfg)? {
                    Classification::Discard { .. } => discarded += 1,
                    Classification::Keep { successes, .. } => {
                        s.difficulty = Some(successes);
                        kept.push(s);
                    }
                }
            }
            write_jsonl(out.as_deref(), &kept)?;
            eprintln!("{} kept, {discarded} discarded", kept.len());
        }
        DatasetCommand::Select { samples, cap, out } => {
            let pool: Vec<TrainingSample> = read_jsonl(&samples)?;
            write_jsonl(out.as_deref(), &select_samples(&pool, cap))?;
        }
    }
    Ok(())
}
