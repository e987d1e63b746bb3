//! Generation backends: a rule-template oracle, a scripted mock for
//! adversarial and retry testing, and an HTTP chat-completion client.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::oracle;
use crate::context::CodeContext;
use crate::issue::LintIssue;
use crate::patch::{render_patch, FixPatch, DIVIDER, HEADER_PREFIX, SEARCH_FENCE};
use crate::workspace::Workspace;

pub const DEFAULT_TOKEN_ENV: &str = "LINTFIX_API_TOKEN";

pub struct GenerationRequest<'a> {
    pub prompt: &'a str,
    pub issue: &'a LintIssue,
    pub context: &'a CodeContext,
    pub workspace: &'a Workspace,
    /// 1-based attempt index within one `fix_issue` call.
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Network or server failure; retried once per attempt slot.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unexpected backend response: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, BackendError>;
}

/// Serializable backend selection, also parsed from CLI strings:
/// `oracle`, `scripted:<file.json>`, `http:<url>#<model>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    MockOracle,
    MockScripted { script: Script },
    Http(HttpConfig),
}

impl FromStr for BackendSpec {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" || s == "mock-oracle" {
            return Ok(Self::MockOracle);
        }
        if let Some(path) = s.strip_prefix("scripted:") {
            return Ok(Self::MockScripted {
                script: Script::load(Path::new(path))?,
            });
        }
        if let Some(rest) = s.strip_prefix("http:") {
            let (endpoint, model) = rest.rsplit_once('#').unwrap_or((rest, "default"));
            return Ok(Self::Http(HttpConfig {
                endpoint: endpoint.to_string(),
                model: model.to_string(),
                token_env: DEFAULT_TOKEN_ENV.to_string(),
                timeout_secs: 120,
            }));
        }
        Err(BackendError::Config(format!("unknown backend spec `{s}`")))
    }
}

impl BackendSpec {
    pub fn build(&self) -> Box<dyn GenerationBackend> {
        match self {
            Self::MockOracle => Box::new(OracleBackend::default()),
            Self::MockScripted { script } => Box::new(ScriptedBackend::new(script.clone())),
            Self::Http(cfg) => Box::new(HttpBackend::new(cfg.clone())),
        }
    }
}

/// Answers with the golden patch registered for the issue id, or with the
/// toy rule's template fix. Issues with neither get an empty answer.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    goldens: BTreeMap<String, String>,
}

impl OracleBackend {
    pub fn with_goldens(goldens: BTreeMap<String, String>) -> Self {
        Self { goldens }
    }
}

fn render(patch: &FixPatch) -> String {
    render_patch(patch).unwrap_or_default()
}

impl GenerationBackend for OracleBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        if let Some(text) = self.goldens.get(&req.issue.issue_id) {
            return Ok(text.clone());
        }
        Ok(oracle::synthesize_fix(req.workspace, req.issue)
            .map(|p| render(&p))
            .unwrap_or_default())
    }
}

/// One scripted generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScriptStep {
    /// Literal text.
    Text { text: String },
    /// The oracle's minimal fix.
    Oracle,
    /// Oracle fix plus an unrelated, applicable extra block.
    Redundant,
    /// A block that applies but leaves the finding in place.
    NoOp,
    /// Oracle fix with its closing fence dropped.
    Malformed,
    /// Prose with no patch at all.
    Garbage,
    /// Fails the call with a transport error.
    TransportError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Script {
    /// Steps for issues without an entry in `per_issue`. Once a sequence is
    /// exhausted its last step repeats.
    #[serde(default)]
    pub default: Vec<ScriptStep>,
    #[serde(default)]
    pub per_issue: BTreeMap<String, Vec<ScriptStep>>,
}

impl Script {
    pub fn uniform(steps: Vec<ScriptStep>) -> Self {
        Self {
            default: steps,
            per_issue: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }
}

/// Deterministic per issue: each issue id has its own call counter, so
/// interleaving across issues does not change any issue's sequence.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
    counters: Mutex<HashMap<String, usize>>,
    total_calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            counters: Mutex::new(HashMap::new()),
            total_calls: AtomicUsize::new(0),
        }
    }

    pub fn total_calls(&self) -> usize {
        self.total_calls.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, issue_id: &str) -> usize {
        self.counters
            .lock()
            .expect("counter lock")
            .get(issue_id)
            .copied()
            .unwrap_or(0)
    }
}

/// Materializes a step for an issue.
pub fn realize_step(step: &ScriptStep, ws: &Workspace, issue: &LintIssue) -> Result<String, BackendError> {
    let fix = || oracle::synthesize_fix(ws, issue);
    Ok(match step {
        ScriptStep::Text { text } => text.clone(),
        ScriptStep::Oracle => fix().map(|p| render(&p)).unwrap_or_default(),
        ScriptStep::Redundant => match (fix(), oracle::redundant_block(ws, issue)) {
            (Some(mut p), Some(extra)) => {
                p.blocks.push(extra);
                render(&p)
            }
            (Some(p), None) => render(&p),
            _ => String::new(),
        },
        ScriptStep::NoOp => oracle::noop_block(ws, issue)
            .map(|b| render(&FixPatch::from_blocks(vec![b])))
            .unwrap_or_default(),
        ScriptStep::Malformed => {
            let text = fix().map(|p| render(&p)).unwrap_or_default();
            text.lines()
                .filter(|l| *l != crate::patch::REPLACE_FENCE)
                .map(|l| format!("{l}\n"))
                .collect()
        }
        ScriptStep::Garbage => format!(
            "I could not produce a patch for {}.\n{HEADER_PREFIX}\n{SEARCH_FENCE}\n{DIVIDER}\n",
            issue.rule_id
        ),
        ScriptStep::TransportError => {
            return Err(BackendError::Transport("scripted transport failure".into()))
        }
    })
}

impl GenerationBackend for ScriptedBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        self.total_calls.fetch_add(1, Ordering::SeqCst);
        let steps = self
            .script
            .per_issue
            .get(&req.issue.issue_id)
            .unwrap_or(&self.script.default);
        let n = {
            let mut counters = self.counters.lock().expect("counter lock");
            let c = counters.entry(req.issue.issue_id.clone()).or_insert(0);
            *c += 1;
            *c
        };
        let Some(step) = steps.get(n - 1).or(steps.last()) else {
            return Ok(String::new());
        };
        realize_step(step, req.workspace, req.issue)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.into()
}

fn default_timeout() -> u64 {
    120
}

/// Chat-completion client: the prompt is sent as a single user message and
/// the first choice's content is returned.
pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .expect("http client builds");
        Self { cfg, client }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f32,
}

pub(crate) fn extract_completion(body: &serde_json::Value) -> Option<String> {
    let choice = body.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(|v| v.as_str())
        .map(str::to_string)
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: vec![ChatMessage {
                role: "user",
                content: req.prompt,
            }],
            temperature: 0.0,
        };
        let mut call = self.client.post(&self.cfg.endpoint).json(&body);
        if let Ok(token) = std::env::var(&self.cfg.token_env) {
            call = call.bearer_auth(token);
        }
        let resp = call.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        let json: serde_json::Value = resp
            .json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        extract_completion(&json).ok_or_else(|| BackendError::Protocol("no choices[0] content".into()))
    }
}
