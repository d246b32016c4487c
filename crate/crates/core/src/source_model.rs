//! Partially annotated Java+JML sources with exactly one specification gap.
//!
//! No Java grammar lives here. Method declarations are found with a line
//! regex, which is enough to anchor a gap; everything else is the verifier's
//! business.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comment marking the loop whose invariant is missing.
pub const INVARIANT_MARKER: &str = "//Add invariant here";

/// Answer text used for extraction failures in feedback prompts.
pub const NO_BLOCK_MESSAGE: &str = "no JML block found";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Invariant,
    Contract,
}

impl GapKind {
    pub const ALL: [GapKind; 2] = [GapKind::Invariant, GapKind::Contract];

    pub fn as_str(self) -> &'static str {
        match self {
            GapKind::Invariant => "invariant",
            GapKind::Contract => "contract",
        }
    }
}

impl fmt::Display for GapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "invariant" => Ok(GapKind::Invariant),
            "contract" => Ok(GapKind::Contract),
            other => Err(format!("unknown gap kind '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("source text is empty")]
    EmptySource,
    #[error("no specification gap found: {0}")]
    NoGapFound(String),
    #[error("invariant marker appears on {} lines: {lines:?}", lines.len())]
    MultipleGaps { lines: Vec<usize> },
    #[error("method '{name}' is declared {count} times")]
    AmbiguousMethod { name: String, count: usize },
    #[error("candidate is for a {candidate} gap but the document has a {gap} gap")]
    KindMismatch { gap: GapKind, candidate: GapKind },
    #[error("answer contains no fenced code block")]
    NoFencedBlock,
    #[error("last fenced block of the answer is empty")]
    EmptyBlock,
    #[error("invalid annotation candidate: {0}")]
    InvalidCandidate(String),
}

/// Location of the single missing annotation. Line indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GapSite {
    Invariant {
        line: usize,
        enclosing_method: Option<String>,
    },
    Contract {
        callee: String,
        line: usize,
        calling_method: Option<String>,
    },
}

impl GapSite {
    pub fn kind(&self) -> GapKind {
        match self {
            GapSite::Invariant { .. } => GapKind::Invariant,
            GapSite::Contract { .. } => GapKind::Contract,
        }
    }

    /// Line of the marker comment or of the callee declaration.
    pub fn line(&self) -> usize {
        match self {
            GapSite::Invariant { line, .. } | GapSite::Contract { line, .. } => *line,
        }
    }

    /// Method whose proof obligation decides the task: the method enclosing
    /// the loop, or the caller of the un-annotated callee.
    pub fn target_method(&self) -> Option<&str> {
        match self {
            GapSite::Invariant { enclosing_method, .. } => enclosing_method.as_deref(),
            GapSite::Contract { calling_method, .. } => calling_method.as_deref(),
        }
    }
}

static METHOD_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^[ \t]*(?:(?:public|protected|private|static|final|abstract|synchronized|native|strictfp|default)\s+)*(?:<[^>]*>\s+)?(?P<type>[A-Za-z_$][\w$.]*(?:\s*<[^()]*?>)?(?:\s*\[\s*\])*)\s+(?P<name>[A-Za-z_$][\w$]*)\s*\(",
    )
    .expect("method declaration regex")
});

const NOT_A_TYPE: &[&str] = &[
    "return", "new", "throw", "else", "case", "assert", "yield", "goto", "package", "import",
];
const NOT_A_NAME: &[&str] = &["if", "while", "for", "switch", "catch", "synchronized", "return", "new"];

/// Name of the method declared on `line`, if the line looks like a declaration.
pub fn declared_method(line: &str) -> Option<&str> {
    let caps = METHOD_DECL.captures(line)?;
    let ty = caps.name("type")?.as_str();
    let name = caps.name("name")?.as_str();
    if NOT_A_TYPE.contains(&ty) || NOT_A_NAME.contains(&name) {
        return None;
    }
    Some(name)
}

/// A Java source text with its line table and located gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    text: String,
    /// Byte range of every line, terminator included.
    lines: Vec<Range<usize>>,
    gap: GapSite,
}

impl AnnotatedDocument {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn gap(&self) -> &GapSite {
        &self.gap
    }

    pub fn kind(&self) -> GapKind {
        self.gap.kind()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Line content without its terminator.
    pub fn line(&self, index: usize) -> &str {
        let raw = &self.text[self.lines[index].clone()];
        let body = raw.strip_suffix('\n').unwrap_or(raw);
        body.strip_suffix('\r').unwrap_or(body)
    }

    /// Replace the detected enclosing/calling method, e.g. with the target
    /// named in a task manifest.
    pub fn with_target_method(mut self, name: impl Into<String>) -> Self {
        let name = Some(name.into());
        match &mut self.gap {
            GapSite::Invariant { enclosing_method, .. } => *enclosing_method = name,
            GapSite::Contract { calling_method, .. } => *calling_method = name,
        }
        self
    }

    fn terminator(&self, index: usize) -> &str {
        let raw = &self.text[self.lines[index].clone()];
        &raw[self.line(index).len()..]
    }

    /// (line, name) of every line that looks like a method declaration.
    pub fn method_declarations(&self) -> Vec<(usize, &str)> {
        (0..self.lines.len())
            .filter_map(|i| declared_method(self.line(i)).map(|name| (i, name)))
            .collect()
    }
}

fn line_table(text: &str) -> Vec<Range<usize>> {
    let mut start = 0;
    text.split_inclusive('\n')
        .map(|line| {
            let range = start..start + line.len();
            start = range.end;
            range
        })
        .collect()
}

fn indentation(line: &str) -> &str {
    let trimmed = line.trim_start_matches([' ', '\t']);
    &line[..line.len() - trimmed.len()]
}

/// Locate the gap in `source_text`.
///
/// A single `//Add invariant here` marker makes an invariant gap. Without a
/// marker, `gap_hint` names the callee whose contract is missing.
pub fn parse_document(source_text: &str, gap_hint: Option<&str>) -> Result<AnnotatedDocument, SourceError> {
    if source_text.trim().is_empty() {
        return Err(SourceError::EmptySource);
    }
    let mut doc = AnnotatedDocument {
        text: source_text.to_owned(),
        lines: line_table(source_text),
        gap: GapSite::Invariant {
            line: 0,
            enclosing_method: None,
        },
    };

    let markers: Vec<usize> = (0..doc.line_count())
        .filter(|&i| doc.line(i).contains(INVARIANT_MARKER))
        .collect();
    if markers.len() > 1 {
        return Err(SourceError::MultipleGaps { lines: markers });
    }

    let decls: Vec<(usize, String)> = doc
        .method_declarations()
        .into_iter()
        .map(|(i, n)| (i, n.to_owned()))
        .collect();

    if let Some(&line) = markers.first() {
        let enclosing_method = decls.iter().rev().find(|(i, _)| *i < line).map(|(_, n)| n.clone());
        doc.gap = GapSite::Invariant { line, enclosing_method };
        return Ok(doc);
    }

    let Some(callee) = gap_hint else {
        return Err(SourceError::NoGapFound(
            "no invariant marker and no callee method named".into(),
        ));
    };
    let matching: Vec<usize> = decls.iter().filter(|(_, n)| n == callee).map(|(i, _)| *i).collect();
    let line = match matching.as_slice() {
        [] => return Err(SourceError::NoGapFound(format!("method '{callee}' is not declared"))),
        [line] => *line,
        _ => {
            return Err(SourceError::AmbiguousMethod {
                name: callee.to_owned(),
                count: matching.len(),
            })
        }
    };
    let calling_method = find_caller(&doc, &decls, callee, line);
    doc.gap = GapSite::Contract {
        callee: callee.to_owned(),
        line,
        calling_method,
    };
    Ok(doc)
}

/// First method other than the callee whose line span mentions a call to it.
fn find_caller(doc: &AnnotatedDocument, decls: &[(usize, String)], callee: &str, callee_line: usize) -> Option<String> {
    let call = Regex::new(&format!(r"\b{}\s*\(", regex::escape(callee))).ok()?;
    decls.iter().enumerate().find_map(|(k, (start, name))| {
        if *start == callee_line {
            return None;
        }
        let end = decls.get(k + 1).map_or(doc.line_count(), |(i, _)| *i);
        let calls = (*start..end).any(|i| {
            let line = doc.line(i);
            // skip the method's own name on its declaration line
            let body = if i == *start {
                line.split_once('(').map_or("", |(_, rest)| rest)
            } else {
                line
            };
            call.is_match(body)
        });
        calls.then(|| name.clone())
    })
}

/// One JML comment block proposed for the gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationCandidate {
    jml_text: String,
    kind: GapKind,
}

impl AnnotationCandidate {
    pub fn new(jml_text: impl Into<String>, kind: GapKind) -> Result<Self, SourceError> {
        let jml_text = jml_text.into();
        let trimmed = jml_text.trim_start();
        if trimmed.is_empty() {
            return Err(SourceError::InvalidCandidate("empty annotation".into()));
        }
        if !(trimmed.starts_with("/*@") || trimmed.starts_with("//@")) {
            return Err(SourceError::InvalidCandidate(
                "annotation must start with /*@ or //@".into(),
            ));
        }
        Ok(AnnotationCandidate { jml_text, kind })
    }

    pub fn jml_text(&self) -> &str {
        &self.jml_text
    }

    pub fn kind(&self) -> GapKind {
        self.kind
    }
}

/// A spliced source file together with the lines the candidate occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub text: String,
    pub lines: Range<usize>,
}

/// Insert `cand` at the document's gap.
///
/// An invariant replaces the marker line, keeping its indentation. A contract
/// goes on its own lines directly above the callee declaration. All other
/// bytes are copied unchanged.
pub fn splice(doc: &AnnotatedDocument, cand: &AnnotationCandidate) -> Result<Draft, SourceError> {
    if cand.kind() != doc.kind() {
        return Err(SourceError::KindMismatch {
            gap: doc.kind(),
            candidate: cand.kind(),
        });
    }
    let line = doc.gap.line();
    let indent = indentation(doc.line(line));
    let eol = match doc.terminator(line) {
        "" => "\n",
        t => t,
    };
    let cand_lines: Vec<&str> = cand.jml_text().lines().collect();
    let mut block = String::new();
    for (i, l) in cand_lines.iter().enumerate() {
        block.push_str(indent);
        block.push_str(l);
        let last = i + 1 == cand_lines.len();
        match doc.gap {
            // the replaced marker line's own terminator closes the block
            GapSite::Invariant { .. } if last => block.push_str(doc.terminator(line)),
            _ => block.push_str(eol),
        }
    }

    let range = doc.lines[line].clone();
    let mut text = String::with_capacity(doc.text.len() + block.len());
    text.push_str(&doc.text[..range.start]);
    text.push_str(&block);
    match doc.gap {
        GapSite::Invariant { .. } => text.push_str(&doc.text[range.end..]),
        GapSite::Contract { .. } => text.push_str(&doc.text[range.start..]),
    }
    Ok(Draft {
        text,
        lines: line..line + cand_lines.len(),
    })
}

/// Content of the last triple-backtick fenced block of `answer`.
///
/// Bare JML without a comment opener is wrapped in `/*@ ... @*/`.
pub fn extract_annotation(answer: &str, kind: GapKind) -> Result<AnnotationCandidate, SourceError> {
    let mut last: Option<Vec<&str>> = None;
    let mut open: Option<Vec<&str>> = None;
    for line in answer.lines() {
        if line.trim_start().starts_with("```") {
            match open.take() {
                Some(block) => last = Some(block),
                None => open = Some(Vec::new()),
            }
        } else if let Some(block) = open.as_mut() {
            block.push(line);
        }
    }
    let block = last.ok_or(SourceError::NoFencedBlock)?.join("\n");
    let body = block.trim();
    if body.is_empty() {
        return Err(SourceError::EmptyBlock);
    }
    let jml = if body.starts_with("/*@") || body.starts_with("//@") {
        body.to_owned()
    } else if body.contains('\n') {
        format!("/*@ {body}\n@*/")
    } else {
        format!("/*@ {body} @*/")
    };
    AnnotationCandidate::new(jml, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeWarning {
    MissingNormalBehavior,
    MissingLoopInvariant,
}

impl fmt::Display for ShapeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeWarning::MissingNormalBehavior => f.write_str("missing normal_behavior"),
            ShapeWarning::MissingLoopInvariant => f.write_str("missing loop_invariant"),
        }
    }
}

static NORMAL_BEHAVIOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bnormal_behavior\b").expect("regex"));
static LOOP_INVARIANT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bloop_invariant\b").expect("regex"));

/// Advisory shape check; an empty list means the candidate looks right.
/// Warnings never keep a candidate from the verifier.
pub fn validate_shape(cand: &AnnotationCandidate) -> Vec<ShapeWarning> {
    match cand.kind() {
        GapKind::Contract if !NORMAL_BEHAVIOR.is_match(cand.jml_text()) => {
            vec![ShapeWarning::MissingNormalBehavior]
        }
        GapKind::Invariant if !LOOP_INVARIANT.is_match(cand.jml_text()) => {
            vec![ShapeWarning::MissingLoopInvariant]
        }
        _ => Vec::new(),
    }
}
