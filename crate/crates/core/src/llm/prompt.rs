use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

/// Operator list advertised in every prompt. The parser accepts a wider set
/// by default.
pub const OPERATOR_LIST_TEXT: &str = "[+,-,*,/,**,sqrt,sin,sinh,abs]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Init,
    Crossover,
    Mutation,
}

impl PromptKind {
    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Init => "init",
            PromptKind::Crossover => "crossover",
            PromptKind::Mutation => "mutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub dimension: usize,
    pub a1_name: String,
    pub a2_name: String,
    pub operator_list_text: String,
    /// In-context examples, already rendered.
    pub examples: Vec<String>,
    pub kind: PromptKind,
}

impl PromptSpec {
    pub fn new(kind: PromptKind, dimension: usize, a1: &str, a2: &str, examples: Vec<String>) -> Self {
        PromptSpec {
            dimension,
            a1_name: a1.into(),
            a2_name: a2.into(),
            operator_list_text: OPERATOR_LIST_TEXT.into(),
            examples,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptError {
    pub kind: PromptKind,
    pub examples: usize,
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let want = match self.kind {
            PromptKind::Init => "at least 1",
            PromptKind::Crossover => "exactly 2",
            PromptKind::Mutation => "exactly 1",
        };
        write!(
            f,
            "{} prompt needs {want} example(s), got {}",
            self.kind.name(),
            self.examples
        )
    }
}

impl core::error::Error for PromptError {}

/// Instantiates the few-shot template.
///
/// Initialization examples carry an `f(x) = ` prefix; crossover and mutation
/// examples are bare expressions.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    let n = spec.examples.len();
    let ok = match spec.kind {
        PromptKind::Init => n >= 1,
        PromptKind::Crossover => n == 2,
        PromptKind::Mutation => n == 1,
    };
    if !ok {
        return Err(PromptError {
            kind: spec.kind,
            examples: n,
        });
    }
    let d = spec.dimension;
    let mut out = String::new();
    let _ = writeln!(out, "You are an expert in generating optimization benchmark problems.");
    let _ = writeln!(
        out,
        "Create a new {d}-dimensional problem that {} outperforms {}.",
        spec.a1_name, spec.a2_name
    );
    out.push('\n');
    let prefix = if spec.kind == PromptKind::Init { "f(x) = " } else { "" };
    for (k, example) in spec.examples.iter().enumerate() {
        let _ = writeln!(out, "Example {}:", k + 1);
        let _ = writeln!(out, "{prefix}{example}");
    }
    out.push('\n');
    let _ = writeln!(out, "### Instructions ###");
    let _ = writeln!(out, "1. Generate one problem function `f(x)` in {d} dimensions.");
    let _ = writeln!(out, "2. Use only the following operators:{}.", spec.operator_list_text);
    let _ = writeln!(
        out,
        "3. Write in a single line of Python code, starting with `Problem: f(x) = '."
    );
    let _ = writeln!(
        out,
        "4. Output only the required Python code line. Do not provide any explanation, preamble, or concluding remarks."
    );
    out.push('\n');
    out.push_str("Problem: f(x) =");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const INIT_PROMPT: &str = "You are an expert in generating optimization benchmark problems.
Create a new 5-dimensional problem that GA outperforms DE.

Example 1:
f(x) = x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*x[1]*x[2]
Example 2:
f(x) = x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*sin(x[1])*abs(x[2])
Example 3:
f(x) = x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*x[1]*sin(x[2])

### Instructions ###
1. Generate one problem function `f(x)` in 5 dimensions.
2. Use only the following operators:[+,-,*,/,**,sqrt,sin,sinh,abs].
3. Write in a single line of Python code, starting with `Problem: f(x) = '.
4. Output only the required Python code line. Do not provide any explanation, preamble, or concluding remarks.

Problem: f(x) =";

    #[test]
    fn init_prompt_is_bit_exact() {
        let spec = PromptSpec::new(
            PromptKind::Init,
            5,
            "GA",
            "DE",
            vec![
                "x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*x[1]*x[2]".into(),
                "x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*sin(x[1])*abs(x[2])".into(),
                "x[0]**2 + sin(x[1])**2 + abs(x[2]*x[3]) + sqrt(abs(x[4])) + x[0]*x[1]*sin(x[2])".into(),
            ],
        );
        assert_eq!(build_prompt(&spec).unwrap(), INIT_PROMPT);
    }

    #[test]
    fn mutation_prompt_has_single_bare_example() {
        let spec = PromptSpec::new(PromptKind::Mutation, 5, "GA", "DE", vec!["x[0] + x[1]".into()]);
        let p = build_prompt(&spec).unwrap();
        assert!(p.contains("\n\nExample 1:\nx[0] + x[1]\n\n### Instructions ###\n"));
        assert!(!p.contains("Example 2:"));
        assert!(p.contains("in 5 dimensions."));
    }

    #[test]
    fn example_count_is_checked() {
        let spec = PromptSpec::new(PromptKind::Crossover, 5, "GA", "DE", vec!["x[0]".into()]);
        assert_eq!(
            build_prompt(&spec),
            Err(PromptError {
                kind: PromptKind::Crossover,
                examples: 1
            })
        );
        let spec = PromptSpec::new(PromptKind::Mutation, 5, "GA", "DE", vec![]);
        assert!(build_prompt(&spec).is_err());
        let spec = PromptSpec::new(PromptKind::Init, 5, "GA", "DE", vec![]);
        assert!(build_prompt(&spec).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = PromptSpec::new(PromptKind::Crossover, 3, "DE", "GA", vec!["x[0]".into(), "x[1]".into()]);
        assert_eq!(build_prompt(&spec), build_prompt(&spec.clone()));
        assert!(build_prompt(&spec).unwrap().starts_with(
            "You are an expert in generating optimization benchmark problems.\nCreate a new 3-dimensional problem that DE outperforms GA.\n"
        ));
    }
}
