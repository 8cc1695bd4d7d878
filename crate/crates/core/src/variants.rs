//! Prompt variants derived from the anchor question by exact substitution.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dump::{Condition, ConditionKind};

pub const ANCHOR_PROMPT: &str =
    "Does this image show an animal? The answer must be always yes or no.";
pub const ANCHOR_ANSWER: &str = "yes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Lexical,
    SemanticNegation,
    OutputFormat,
}

impl From<VariantKind> for ConditionKind {
    fn from(k: VariantKind) -> Self {
        match k {
            VariantKind::Lexical => ConditionKind::Lexical,
            VariantKind::SemanticNegation => ConditionKind::SemanticNegation,
            VariantKind::OutputFormat => ConditionKind::OutputFormat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub target: String,
    pub replacement: String,
}

impl Substitution {
    pub fn new(target: &str, replacement: &str) -> Self {
        Self {
            target: target.into(),
            replacement: replacement.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub substitutions: Vec<Substitution>,
    #[serde(default)]
    pub expected_answer_override: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum VariantError {
    #[error("condition {0} is not an anchor")]
    NotAnchor(u32),
    #[error("substitution target {0:?} not found")]
    TargetAbsent(String),
    #[error("substitution target {target:?} occurs {count} times")]
    TargetAmbiguous { target: String, count: usize },
    #[error("anchor text is missing required targets: {}", .0.join(", "))]
    MissingTargets(Vec<String>),
    #[error("{0}")]
    AnswerRule(String),
    #[error("malformed variant catalog: {0}")]
    Catalog(String),
}

impl VariantSpec {
    /// Lexical variants keep the answer; semantic negations must flip it.
    /// Output-format variants may remap the answer's surface form.
    pub fn check_answer_rule(&self, anchor_answer: &str) -> Result<(), VariantError> {
        let over = self.expected_answer_override.as_deref();
        match (self.kind, over) {
            (VariantKind::Lexical, Some(a)) if a != anchor_answer => Err(VariantError::AnswerRule(
                "lexical variants must not change the expected answer".into(),
            )),
            (VariantKind::SemanticNegation, None) => Err(VariantError::AnswerRule(
                "semantic negation variants must override the expected answer".into(),
            )),
            (VariantKind::SemanticNegation, Some(a)) if a == anchor_answer => {
                Err(VariantError::AnswerRule(
                    "semantic negation override must differ from the anchor answer".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Applies `spec` to the anchor, substituting left to right. Each target
/// must occur exactly once in the text it is applied to.
pub fn apply_variant(
    anchor: &Condition,
    spec: &VariantSpec,
    new_id: u32,
) -> Result<Condition, VariantError> {
    if anchor.kind != ConditionKind::Anchor {
        return Err(VariantError::NotAnchor(anchor.id));
    }
    spec.check_answer_rule(&anchor.expected_answer)?;
    let mut text = anchor.prompt_text.clone();
    for sub in &spec.substitutions {
        match text.matches(sub.target.as_str()).count() {
            0 => return Err(VariantError::TargetAbsent(sub.target.clone())),
            1 => text = text.replacen(sub.target.as_str(), &sub.replacement, 1),
            count => {
                return Err(VariantError::TargetAmbiguous {
                    target: sub.target.clone(),
                    count,
                })
            }
        }
    }
    Ok(Condition {
        id: new_id,
        kind: spec.kind.into(),
        prompt_text: text,
        expected_answer: spec
            .expected_answer_override
            .clone()
            .unwrap_or_else(|| anchor.expected_answer.clone()),
    })
}

/// The evaluation set: two lexical edits, one semantic negation, one
/// output-format change.
pub fn builtin_specs() -> Vec<VariantSpec> {
    let spec = |kind, target, replacement, answer: Option<&str>| VariantSpec {
        kind,
        substitutions: vec![Substitution::new(target, replacement)],
        expected_answer_override: answer.map(str::to_string),
    };
    vec![
        spec(VariantKind::Lexical, "image", "picture", None),
        spec(VariantKind::Lexical, "show", "feature", None),
        spec(VariantKind::SemanticNegation, "animal", "plane", Some("no")),
        spec(
            VariantKind::OutputFormat,
            "The answer must be always yes or no.",
            "The answer must be always 1 or 0.",
            Some("1"),
        ),
    ]
}

pub fn anchor_condition(id: u32) -> Condition {
    Condition {
        id,
        kind: ConditionKind::Anchor,
        prompt_text: ANCHOR_PROMPT.into(),
        expected_answer: ANCHOR_ANSWER.into(),
    }
}

/// Expands `specs` against the anchor. The anchor comes first; variants get
/// consecutive ids after it.
pub fn expand_catalog(
    anchor: &Condition,
    specs: &[VariantSpec],
) -> Result<Vec<Condition>, VariantError> {
    if anchor.kind != ConditionKind::Anchor {
        return Err(VariantError::NotAnchor(anchor.id));
    }
    let missing: Vec<String> = specs
        .iter()
        .flat_map(|s| &s.substitutions)
        .filter(|s| !anchor.prompt_text.contains(s.target.as_str()))
        .map(|s| s.target.clone())
        .collect();
    if !missing.is_empty() {
        return Err(VariantError::MissingTargets(missing));
    }
    let mut out = vec![anchor.clone()];
    for (i, spec) in specs.iter().enumerate() {
        out.push(apply_variant(anchor, spec, anchor.id + 1 + i as u32)?);
    }
    Ok(out)
}

pub fn builtin_catalog(anchor: &Condition) -> Result<Vec<Condition>, VariantError> {
    expand_catalog(anchor, &builtin_specs())
}

pub fn parse_catalog(json: &str) -> Result<Vec<VariantSpec>, VariantError> {
    serde_json::from_str(json).map_err(|e| VariantError::Catalog(e.to_string()))
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<VariantSpec>, VariantError> {
    let text = std::fs::read_to_string(path).map_err(|e| VariantError::Catalog(e.to_string()))?;
    parse_catalog(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor() -> Condition {
        anchor_condition(0)
    }

    #[test]
    fn lexical_noun_substitution() {
        let c = apply_variant(&anchor(), &builtin_specs()[0], 1).unwrap();
        assert_eq!(
            c.prompt_text,
            "Does this picture show an animal? The answer must be always yes or no."
        );
        assert_eq!(c.expected_answer, "yes");
        assert_eq!(c.kind, ConditionKind::Lexical);
        assert_eq!(c.id, 1);
    }

    #[test]
    fn semantic_negation_flips_answer() {
        let c = apply_variant(&anchor(), &builtin_specs()[2], 3).unwrap();
        assert_eq!(
            c.prompt_text,
            "Does this image show an plane? The answer must be always yes or no."
        );
        assert_eq!(c.expected_answer, "no");
        assert_eq!(c.kind, ConditionKind::SemanticNegation);
    }

    #[test]
    fn output_format_variant() {
        let short = VariantSpec {
            kind: VariantKind::OutputFormat,
            substitutions: vec![Substitution::new("yes or no", "1 or 0")],
            expected_answer_override: Some("1".into()),
        };
        let a = apply_variant(&anchor(), &short, 4).unwrap();
        let b = apply_variant(&anchor(), &builtin_specs()[3], 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.prompt_text,
            "Does this image show an animal? The answer must be always 1 or 0."
        );
        assert_eq!(a.expected_answer, "1");
    }

    #[test]
    fn absent_and_ambiguous_targets() {
        let spec = |t: &str| VariantSpec {
            kind: VariantKind::Lexical,
            substitutions: vec![Substitution::new(t, "x")],
            expected_answer_override: None,
        };
        assert_eq!(
            apply_variant(&anchor(), &spec("zebra"), 1),
            Err(VariantError::TargetAbsent("zebra".into()))
        );
        assert_eq!(
            apply_variant(&anchor(), &spec("an"), 1),
            Err(VariantError::TargetAmbiguous {
                target: "an".into(),
                count: 3
            })
        );
        // Matching is case-sensitive.
        assert!(apply_variant(&anchor(), &spec("Image"), 1).is_err());
    }

    #[test]
    fn answer_rules() {
        let mut s = builtin_specs()[2].clone();
        s.expected_answer_override = None;
        assert!(matches!(
            apply_variant(&anchor(), &s, 1),
            Err(VariantError::AnswerRule(_))
        ));
        s.expected_answer_override = Some("yes".into());
        assert!(apply_variant(&anchor(), &s, 1).is_err());
        let mut s = builtin_specs()[0].clone();
        s.expected_answer_override = Some("no".into());
        assert!(apply_variant(&anchor(), &s, 1).is_err());
    }

    #[test]
    fn builtin_catalog_has_five_conditions() {
        let cs = builtin_catalog(&anchor()).unwrap();
        let kinds: Vec<ConditionKind> = cs.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ConditionKind::Anchor,
                ConditionKind::Lexical,
                ConditionKind::Lexical,
                ConditionKind::SemanticNegation,
                ConditionKind::OutputFormat
            ]
        );
        let ids: Vec<u32> = cs.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            cs[2].prompt_text,
            "Does this image feature an animal? The answer must be always yes or no."
        );
    }

    #[test]
    fn catalog_names_missing_targets() {
        let mut a = anchor();
        a.prompt_text = "Does this image show a dog? The answer must be always yes or no.".into();
        let err = builtin_catalog(&a).unwrap_err();
        assert_eq!(err, VariantError::MissingTargets(vec!["animal".into()]));
        assert!(err.to_string().contains("animal"));
    }

    #[test]
    fn reapplying_to_variant_text_fails() {
        for variant in builtin_catalog(&anchor()).unwrap().into_iter().skip(1) {
            assert_eq!(
                builtin_catalog(&variant),
                Err(VariantError::NotAnchor(variant.id))
            );
            // Even relabelled as an anchor, the consumed target is missing.
            let relabelled = Condition {
                kind: ConditionKind::Anchor,
                ..variant
            };
            assert!(matches!(
                builtin_catalog(&relabelled),
                Err(VariantError::MissingTargets(_))
            ));
        }
    }

    #[test]
    fn catalog_json_round_trip() {
        let json = r#"[
            {"kind": "lexical", "substitutions": [{"target": "image", "replacement": "photo"}]},
            {"kind": "semantic_negation",
             "substitutions": [{"target": "animal", "replacement": "car"}],
             "expected_answer_override": "no"}
        ]"#;
        let specs = parse_catalog(json).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].expected_answer_override, None);
        let back = parse_catalog(&serde_json::to_string(&specs).unwrap()).unwrap();
        assert_eq!(back, specs);
        let cs = expand_catalog(&anchor(), &specs).unwrap();
        assert_eq!(cs[2].expected_answer, "no");
        assert!(matches!(parse_catalog("{"), Err(VariantError::Catalog(_))));
    }
}
