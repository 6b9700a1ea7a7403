//! Source spans and diagnostics shared by every DSL stage.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A region of source text. Byte offsets are half-open; line and column
/// numbers are 1-based and count characters, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        let (first, last) = if self.start <= other.start {
            (self, other)
        } else {
            (other, self)
        };
        let end = if last.end >= first.end { last } else { first };
        Span {
            start: first.start,
            end: end.end,
            line: first.line,
            col: first.col,
            end_line: end.end_line,
            end_col: end.end_col,
        }
    }

    pub fn is_within(&self, source: &str) -> bool {
        self.start <= self.end
            && self.end <= source.len()
            && source.is_char_boundary(self.start)
            && source.is_char_boundary(self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable diagnostic codes. The set is closed; the string form is what
/// appears in JSON output and in repair prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Code {
    /// Character outside the lexical alphabet.
    LexChar,
    /// Malformed or non-finite numeric literal.
    LexNumber,
    /// Unexpected token; the message lists what was expected.
    Syntax,
    /// No object named `ego`.
    NoEgo,
    /// Two declarations share a name.
    DuplicateName,
    /// A property appears twice on one object.
    DuplicateProperty,
    /// `Range(lo, hi)` with `lo >= hi`.
    EmptyRange,
    /// `Choice[]` without values.
    EmptyChoice,
    /// Ego declared with a class other than Car or Truck.
    EgoClass,
    /// A size component that is not strictly positive.
    NonPositiveDims,
    /// Reference to an undeclared object, parameter, or behavior.
    UnresolvedRef,
    /// Relative placement that refers to an object declared later.
    ForwardRef,
    /// Cycle in the relative placement graph.
    CircularSpatial,
    /// Wrong number of behavior arguments.
    Arity,
    /// Argument of the wrong kind (side where a number is expected, or the reverse).
    ArgType,
    /// Argument value outside its permitted range.
    ArgRange,
    /// A behavior definition whose body is not a built-in action.
    NotBuiltin,
    /// Distance trigger without a usable subject.
    TriggerSubject,
    /// Trigger threshold outside its permitted range.
    TriggerValue,
    /// Both the behavior definition and its use site carry a trigger.
    DoubleTrigger,
    /// Requirement form outside the supported set.
    UnsupportedRequirement,
    /// Parameter declared but never referenced.
    UnusedParam,
    /// Behavior defined but never used.
    UnusedBehavior,
}

impl Code {
    pub const ALL: [Code; 23] = [
        Code::LexChar,
        Code::LexNumber,
        Code::Syntax,
        Code::NoEgo,
        Code::DuplicateName,
        Code::DuplicateProperty,
        Code::EmptyRange,
        Code::EmptyChoice,
        Code::EgoClass,
        Code::NonPositiveDims,
        Code::UnresolvedRef,
        Code::ForwardRef,
        Code::CircularSpatial,
        Code::Arity,
        Code::ArgType,
        Code::ArgRange,
        Code::NotBuiltin,
        Code::TriggerSubject,
        Code::TriggerValue,
        Code::DoubleTrigger,
        Code::UnsupportedRequirement,
        Code::UnusedParam,
        Code::UnusedBehavior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::LexChar => "E_LEX_CHAR",
            Code::LexNumber => "E_LEX_NUMBER",
            Code::Syntax => "E_SYNTAX",
            Code::NoEgo => "E_NO_EGO",
            Code::DuplicateName => "E_DUPLICATE_NAME",
            Code::DuplicateProperty => "E_DUPLICATE_PROPERTY",
            Code::EmptyRange => "E_EMPTY_RANGE",
            Code::EmptyChoice => "E_EMPTY_CHOICE",
            Code::EgoClass => "E_EGO_CLASS",
            Code::NonPositiveDims => "E_NONPOSITIVE_DIMS",
            Code::UnresolvedRef => "E_UNRESOLVED_REF",
            Code::ForwardRef => "E_FORWARD_REF",
            Code::CircularSpatial => "E_CIRCULAR_SPATIAL",
            Code::Arity => "E_ARITY",
            Code::ArgType => "E_ARG_TYPE",
            Code::ArgRange => "E_ARG_RANGE",
            Code::NotBuiltin => "E_NOT_BUILTIN",
            Code::TriggerSubject => "E_TRIGGER_SUBJECT",
            Code::TriggerValue => "E_TRIGGER_VALUE",
            Code::DoubleTrigger => "E_DOUBLE_TRIGGER",
            Code::UnsupportedRequirement => "E_UNSUPPORTED_REQUIREMENT",
            Code::UnusedParam => "W_UNUSED_PARAM",
            Code::UnusedBehavior => "W_UNUSED_BEHAVIOR",
        }
    }

    pub fn from_str_code(s: &str) -> Option<Code> {
        Code::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::UnusedParam | Code::UnusedBehavior => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Code::from_str_code(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown diagnostic code {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: code.severity(),
            span,
            code,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn to_record(&self) -> DiagnosticRecord {
        DiagnosticRecord {
            code: self.code,
            severity: self.severity,
            line: self.span.line,
            col: self.span.col,
            end_line: self.span.end_line,
            end_col: self.span.end_col,
            message: self.message.clone(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {sev}[{}]: {}",
            self.span.line, self.span.col, self.code, self.message
        )
    }
}

/// Flat JSON form of a diagnostic, one per line in machine output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub code: Code,
    pub severity: Severity,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub message: String,
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Renders diagnostics as JSON lines (one record per line, trailing newline).
pub fn to_json_lines(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&serde_json::to_string(&d.to_record()).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Renders diagnostics as a single JSON array, the form quoted back to the LLM.
pub fn to_json_array(diags: &[Diagnostic]) -> String {
    let records: Vec<DiagnosticRecord> = diags.iter().map(Diagnostic::to_record).collect();
    serde_json::to_string(&records).expect("records serialize")
}
