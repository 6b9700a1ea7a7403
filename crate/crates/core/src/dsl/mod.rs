//! The `.scn` scenario language: lexer, parser, validator, canonical
//! formatter, and seeded sampler.
//!
//! A script declares parameters, behaviors, and traffic participants, plus
//! the requirements a simulated run must meet:
//!
//! ```text
//! param gap = Range(25.0, 35.0)
//!
//! behavior LeadBrake(decel) = Brake(decel) when time > 1.0
//!
//! ego = new Car on lane east at 10.0 with behavior FollowLane(15.0)
//! lead = new Car ahead of ego by gap with speed 10.0 with behavior LeadBrake(6.0)
//!
//! require collision of rear-end
//! terminate when time > 20.0
//! ```

pub mod ast;
pub mod diagnostics;
pub mod format;
pub mod lexer;
pub mod parser;
pub mod sample;
pub mod validate;

pub use ast::{AgentClass, ScenarioAst, Side};
pub use diagnostics::{Code, Diagnostic, DiagnosticRecord, Severity, Span};
pub use format::format_ast;
pub use lexer::tokenize;
pub use parser::parse;
pub use sample::{
    sample_parameters, sample_parameters_on, sample_variations, Action, BehaviorSpec, ConcreteObject,
    ConcreteScenario, LaneExtents, Placement, Requirement, SampleError, TriggerCondition, VariationError,
};
pub use validate::validate;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceScript {
    pub text: String,
    /// A file path, `"llm"`, or `"inline"`.
    pub origin: String,
}

impl SourceScript {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        let origin = origin.into();
        SourceScript {
            text: text.into(),
            origin: if origin.is_empty() { "inline".to_string() } else { origin },
        }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        SourceScript::new(text, "inline")
    }

    pub fn read(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(SourceScript::new(text, path.display().to_string()))
    }
}

/// Result of running every front-end stage over a script.
#[derive(Debug, Clone)]
pub struct Checked {
    pub ast: Option<ScenarioAst>,
    /// Errors and warnings from all stages, in source order.
    pub diagnostics: Vec<Diagnostic>,
}

impl Checked {
    pub fn is_ok(&self) -> bool {
        self.ast.is_some() && !diagnostics::has_errors(&self.diagnostics)
    }
}

/// Tokenize, parse, and validate. `ast` is present when parsing succeeded,
/// even if validation found errors.
pub fn check(script: &SourceScript) -> Checked {
    match parse(&tokenize(&script.text)) {
        Ok(ast) => {
            let diagnostics = validate(&ast);
            Checked { ast: Some(ast), diagnostics }
        }
        Err(diagnostics) => Checked { ast: None, diagnostics },
    }
}

/// Tokenize, parse, and validate; only a script free of errors yields an AST.
pub fn compile(script: &SourceScript) -> Result<ScenarioAst, Vec<Diagnostic>> {
    let checked = check(script);
    match checked.ast {
        Some(ast) if !diagnostics::has_errors(&checked.diagnostics) => Ok(ast),
        _ => Err(checked.diagnostics),
    }
}
