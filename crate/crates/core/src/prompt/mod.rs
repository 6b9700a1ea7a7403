//! LLM-driven script generation: few-shot prompt assembly, an endpoint
//! client, script extraction, and a diagnostic-guided repair loop.

pub mod client;
pub mod library;
pub mod stub;
pub mod template;

pub use client::{call_llm, chat, ChatMessage, EndpointConfig, LlmError};
pub use library::{select_examples, ExampleLibrary, LibraryEntry, LibraryError};
pub use stub::{StubReply, StubServer};
pub use template::{assemble_texts, PromptTemplate};

use crate::dsl::{self, Code, Diagnostic, DiagnosticRecord, ScenarioAst, SourceScript, Span};
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_REPAIR_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioType {
    PedestrianCrossingOccluded,
    VehicleCutIn,
    IntersectionConflict,
    AdverseWeatherLaneChange,
    VehicleCyclistCollision,
    TBoneCollision,
    RearEndCollision,
}

impl ScenarioType {
    pub const ALL: [ScenarioType; 7] = [
        ScenarioType::PedestrianCrossingOccluded,
        ScenarioType::VehicleCutIn,
        ScenarioType::IntersectionConflict,
        ScenarioType::AdverseWeatherLaneChange,
        ScenarioType::VehicleCyclistCollision,
        ScenarioType::TBoneCollision,
        ScenarioType::RearEndCollision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioType::PedestrianCrossingOccluded => "pedestrian-crossing-occluded",
            ScenarioType::VehicleCutIn => "vehicle-cut-in",
            ScenarioType::IntersectionConflict => "intersection-conflict",
            ScenarioType::AdverseWeatherLaneChange => "adverse-weather-lane-change",
            ScenarioType::VehicleCyclistCollision => "vehicle-cyclist-collision",
            ScenarioType::TBoneCollision => "t-bone-collision",
            ScenarioType::RearEndCollision => "rear-end-collision",
        }
    }

    /// Name used inside prompts.
    pub fn human_name(self) -> &'static str {
        match self {
            ScenarioType::PedestrianCrossingOccluded => "occluded pedestrian crossing",
            ScenarioType::VehicleCutIn => "vehicle cut-in",
            ScenarioType::IntersectionConflict => "intersection conflict",
            ScenarioType::AdverseWeatherLaneChange => "adverse-weather lane change",
            ScenarioType::VehicleCyclistCollision => "vehicle-cyclist collision",
            ScenarioType::TBoneCollision => "T-bone collision",
            ScenarioType::RearEndCollision => "rear-end collision",
        }
    }
}

impl std::fmt::Display for ScenarioType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ScenarioType::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = ScenarioType::ALL.iter().map(|t| t.as_str()).collect();
            format!("unknown scenario type `{s}`; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub scenario_type: ScenarioType,
    pub k_examples: usize,
    pub temperature: f64,
    pub seed: u64,
    pub max_repair_rounds: u32,
}

impl GenerationRequest {
    pub fn new(scenario_type: ScenarioType) -> Self {
        GenerationRequest {
            scenario_type,
            k_examples: DEFAULT_K,
            temperature: DEFAULT_TEMPERATURE,
            seed: 0,
            max_repair_rounds: DEFAULT_REPAIR_ROUNDS,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("the response contains no script")]
    EmptyScript,
}

/// Contents of the first fenced code block, or else the trimmed response.
pub fn extract_script(response: &str) -> Result<SourceScript, ExtractError> {
    let text = match response.find("```") {
        Some(open) => {
            let after = &response[open + 3..];
            // skip the info string on the opening fence line
            let body = after.find('\n').map_or("", |nl| &after[nl + 1..]);
            let inner = body.find("```").map_or(body, |close| &body[..close]);
            inner.trim_matches(|c| c == '\n' || c == '\r').to_string()
        }
        None => response.trim().to_string(),
    };
    if text.trim().is_empty() {
        return Err(ExtractError::EmptyScript);
    }
    Ok(SourceScript::new(text, "llm"))
}

pub fn repair_message(errors: &[DiagnosticRecord]) -> String {
    let json = serde_json::to_string(errors).expect("diagnostics serialize");
    format!("Your previous script had these errors: {json}. Please return a corrected full script.")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// The user message sent this round.
    pub prompt: String,
    pub raw_response: String,
    pub extracted_script: Option<String>,
    /// Error diagnostics; empty means the round succeeded.
    pub diagnostics: Vec<DiagnosticRecord>,
    pub warnings: Vec<DiagnosticRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success { script: String },
    Exhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationTranscript {
    pub request: GenerationRequest,
    pub examples: Vec<String>,
    pub rounds: Vec<Round>,
    pub outcome: Outcome,
    #[serde(skip)]
    pub ast: Option<ScenarioAst>,
}

impl GenerationTranscript {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Prompt, call, extract, validate; on errors ask for a repair, keeping the
/// whole conversation, for at most `max_repair_rounds` extra rounds.
pub fn generate_scenario(
    request: &GenerationRequest,
    library: &ExampleLibrary,
    template: &PromptTemplate,
    endpoint: &EndpointConfig,
) -> Result<GenerationTranscript, GenerationError> {
    if request.k_examples == 0 {
        return Err(GenerationError::InvalidRequest("k_examples must be at least 1".into()));
    }
    if !(0.0..=2.0).contains(&request.temperature) {
        return Err(GenerationError::InvalidRequest(format!("temperature {} outside [0, 2]", request.temperature)));
    }
    let examples = select_examples(library, request.scenario_type, request.k_examples, request.seed)?;
    let mut next_prompt = template.assemble(request.scenario_type, &examples);
    let mut messages: Vec<ChatMessage> = Vec::new();
    let mut rounds = Vec::new();

    for _ in 0..=request.max_repair_rounds {
        messages.push(ChatMessage::user(next_prompt.clone()));
        let raw = chat(endpoint, &messages, request.temperature, request.seed)?;
        messages.push(ChatMessage::assistant(raw.clone()));

        let (extracted, diags) = match extract_script(&raw) {
            Ok(script) => {
                let checked = dsl::check(&script);
                let ast = checked.ast.filter(|_| !dsl::diagnostics::has_errors(&checked.diagnostics));
                (Some((script, ast)), checked.diagnostics)
            }
            Err(e) => (None, vec![Diagnostic::new(Code::Syntax, Span::default(), e.to_string())]),
        };
        let errors: Vec<DiagnosticRecord> = diags.iter().filter(|d| d.is_error()).map(Diagnostic::to_record).collect();
        let warnings = diags.iter().filter(|d| !d.is_error()).map(Diagnostic::to_record).collect();
        rounds.push(Round {
            prompt: next_prompt.clone(),
            raw_response: raw,
            extracted_script: extracted.as_ref().map(|(s, _)| s.text.clone()),
            diagnostics: errors.clone(),
            warnings,
        });
        if let Some((script, Some(ast))) = extracted {
            return Ok(GenerationTranscript {
                request: request.clone(),
                examples: examples.iter().map(|e| e.id.clone()).collect(),
                rounds,
                outcome: Outcome::Success { script: script.text },
                ast: Some(ast),
            });
        }
        next_prompt = repair_message(&errors);
    }
    Ok(GenerationTranscript {
        request: request.clone(),
        examples: examples.iter().map(|e| e.id.clone()).collect(),
        rounds,
        outcome: Outcome::Exhausted,
        ast: None,
    })
}
