//! Few-shot prompt assembly.
//!
//! Layout of an assembled prompt (`\n` line breaks, no trailing newline):
//!
//! ```text
//! <preamble> <task instruction>
//!
//! <example header>
//! <example 1>
//!
//! <example 2>
//!
//! <closing>
//! ```

use super::library::LibraryEntry;
use super::ScenarioType;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub preamble: String,
    /// Must contain a parenthetical starting `(e.g., ` for the scenario type
    /// to be interpolated.
    pub task_instruction: String,
    pub example_header: String,
    pub closing: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            preamble: "You are a helpful assistant. Please review the backbone and syntax of the following Scenic \
                       scripts for general driving scenarios."
                .into(),
            task_instruction: "Based on these examples, try to generate a script for a collision scenario (e.g., \
                               pedestrian collision, T-bone collision, rear-end collision)."
                .into(),
            example_header: "Examples of Scenic scripts for driving scenarios:".into(),
            closing: "Your generated Scenic script:".into(),
        }
    }
}

const PAREN: &str = "(e.g., ";

impl PromptTemplate {
    /// The task instruction with `ty`'s name listed first in the `(e.g., ...)`
    /// parenthetical. Left unchanged if the name already appears there.
    pub fn task_for(&self, ty: ScenarioType) -> String {
        let name = ty.human_name();
        let text = &self.task_instruction;
        match text.find(PAREN) {
            Some(at) => {
                let close = text[at..].find(')').map_or(text.len(), |c| at + c);
                if text[at..close].to_lowercase().contains(&name.to_lowercase()) {
                    text.clone()
                } else {
                    let insert = at + PAREN.len();
                    format!("{}{name}, {}", &text[..insert], &text[insert..])
                }
            }
            None => text.clone(),
        }
    }

    pub fn assemble(&self, ty: ScenarioType, examples: &[&LibraryEntry]) -> String {
        let scripts: Vec<&str> = examples.iter().map(|e| e.script.text.trim_end_matches(['\n', '\r'])).collect();
        assemble_texts(self, ty, &scripts)
    }
}

/// Assemble from raw example texts, used verbatim.
pub fn assemble_texts(template: &PromptTemplate, ty: ScenarioType, scripts: &[&str]) -> String {
    let mut out = String::new();
    out.push_str(&template.preamble);
    out.push(' ');
    out.push_str(&template.task_for(ty));
    out.push_str("\n\n");
    out.push_str(&template.example_header);
    out.push('\n');
    out.push_str(&scripts.join("\n\n"));
    out.push_str("\n\n");
    out.push_str(&template.closing);
    out
}
