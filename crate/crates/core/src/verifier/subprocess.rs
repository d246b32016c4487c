use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::Deserialize;

use super::{Verdict, Verifier, VerifierError, VerifyRequest};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Regexes that map prover output to verdicts. Checked against stdout in
/// the order parse error, open goals, closed proof.
#[derive(Debug, Clone)]
pub struct PatternTable {
    /// Optional `message` group; the whole match is used without it.
    pub syntax_error: Regex,
    /// Required `label` group, optional `method` group; one label per match.
    pub semantic_error: Regex,
    pub success: Regex,
}

#[derive(Deserialize)]
struct Section {
    pattern: String,
}

#[derive(Deserialize)]
struct PatternFile {
    syntax_error: Section,
    semantic_error: Section,
    success: Section,
}

impl PatternTable {
    /// Line grammar of the bundled mock adapter:
    /// `CLOSED` | `OPEN: <label>` | `PARSE: <message>`.
    pub fn mock_grammar() -> Self {
        Self::new(
            r"(?m)^PARSE: (?P<message>.*?)\r?$",
            r"(?m)^OPEN: (?P<label>.+?)\s*$",
            r"(?m)^CLOSED\s*$",
        )
        .expect("mock grammar patterns")
    }

    pub fn new(syntax_error: &str, semantic_error: &str, success: &str) -> Result<Self, VerifierError> {
        let compile =
            |section: &str, p: &str| Regex::new(p).map_err(|e| VerifierError::PatternTable(format!("[{section}] {e}")));
        let table = PatternTable {
            syntax_error: compile("syntax_error", syntax_error)?,
            semantic_error: compile("semantic_error", semantic_error)?,
            success: compile("success", success)?,
        };
        if !table.semantic_error.capture_names().any(|n| n == Some("label")) {
            return Err(VerifierError::PatternTable(
                "[semantic_error] pattern needs a (?P<label>...) group".into(),
            ));
        }
        Ok(table)
    }

    /// TOML with one `[syntax_error]`, `[semantic_error]` and `[success]`
    /// section, each holding a `pattern` key.
    pub fn from_toml(text: &str) -> Result<Self, VerifierError> {
        let file: PatternFile = toml::from_str(text).map_err(|e| VerifierError::PatternTable(e.to_string()))?;
        Self::new(
            &file.syntax_error.pattern,
            &file.semantic_error.pattern,
            &file.success.pattern,
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, VerifierError> {
        let text = std::fs::read_to_string(path).map_err(|source| VerifierError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

impl Default for PatternTable {
    fn default() -> Self {
        Self::mock_grammar()
    }
}

fn raw_output(stdout: &str, stderr: &str) -> String {
    if stderr.is_empty() {
        stdout.to_owned()
    } else {
        format!("{stdout}\n--- stderr ---\n{stderr}")
    }
}

/// Map raw prover results to exactly one verdict. Anything the table does
/// not recognise, including a crash with no output, is a tool failure.
pub fn classify_output(table: &PatternTable, exit_code: Option<i32>, stdout: &str, stderr: &str) -> Verdict {
    let raw = raw_output(stdout, stderr);
    if let Some(caps) = table.syntax_error.captures(stdout) {
        let message = caps
            .name("message")
            .unwrap_or_else(|| caps.get(0).expect("whole match"))
            .as_str()
            .trim()
            .to_owned();
        return Verdict::syntax(message, raw);
    }
    let mut labels = Vec::new();
    let mut method = None;
    for caps in table.semantic_error.captures_iter(stdout) {
        if let Some(label) = caps.name("label") {
            labels.push(label.as_str().trim().to_owned());
        }
        if method.is_none() {
            method = caps.name("method").map(|m| m.as_str().to_owned());
        }
    }
    labels.retain(|l| !l.is_empty());
    if let Some(v) = Verdict::semantic(labels, method, raw.clone()) {
        return v;
    }
    if table.success.is_match(stdout) {
        return Verdict::success(raw);
    }
    let reason = match exit_code {
        Some(code) => format!("exit code {code} without a recognizable verdict"),
        None => "terminated by signal without a recognizable verdict".to_owned(),
    };
    Verdict::tool_failure(reason, raw)
}

static PUBLIC_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*public\s+(?:final\s+|abstract\s+)*class\s+(\w+)").expect("regex"));

/// Runs an external prover per draft. The command template is split like a
/// shell command line; `{file}` and `{target}` are substituted per call.
#[derive(Debug, Clone)]
pub struct SubprocessVerifier {
    command: Vec<String>,
    table: PatternTable,
    timeout: Duration,
}

impl SubprocessVerifier {
    pub fn new(template: &str, table: PatternTable, timeout: Duration) -> Result<Self, VerifierError> {
        let command = shlex::split(template)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| VerifierError::InvalidTemplate(template.to_owned()))?;
        if !command.iter().any(|c| c.contains("{file}")) {
            return Err(VerifierError::InvalidTemplate(format!(
                "{template} (no {{file}} placeholder)"
            )));
        }
        Ok(SubprocessVerifier {
            command,
            table,
            timeout,
        })
    }

    fn run(&self, request: &VerifyRequest<'_>) -> Result<Verdict, String> {
        let dir = tempfile::tempdir().map_err(|e| format!("creating temp dir: {e}"))?;
        // javac-style tools want the file named after its public class
        let name = PUBLIC_CLASS
            .captures(request.draft)
            .map_or("Draft".to_owned(), |c| c[1].to_owned());
        let file = dir.path().join(format!("{name}.java"));
        std::fs::write(&file, request.draft).map_err(|e| format!("writing draft: {e}"))?;
        let file = file.to_string_lossy();

        let args: Vec<String> = self
            .command
            .iter()
            .map(|a| a.replace("{file}", &file).replace("{target}", request.target))
            .collect();
        let started = Instant::now();
        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("spawning {}: {e}", args[0]))?;

        let mut out = child.stdout.take().expect("piped stdout");
        let mut err = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = out.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = err.read_to_end(&mut buf);
            buf
        });

        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(format!("waiting for prover: {e}")),
            }
        };
        let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
        let wall_time_ms = started.elapsed().as_millis() as u64;

        let mut verdict = match status {
            Some(status) => classify_output(&self.table, status.code(), &stdout, &stderr),
            None => Verdict::tool_failure(
                format!("timed out after {} s", self.timeout.as_secs_f64()),
                raw_output(&stdout, &stderr),
            ),
        };
        verdict.wall_time_ms = wall_time_ms;
        Ok(verdict)
    }
}

impl Verifier for SubprocessVerifier {
    fn verify(&self, request: &VerifyRequest<'_>) -> Verdict {
        self.run(request)
            .unwrap_or_else(|reason| Verdict::tool_failure(reason, ""))
    }
}
