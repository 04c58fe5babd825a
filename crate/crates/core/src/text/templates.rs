use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TextError;

const PLACEHOLDER: &str = "{}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    LabelName,
    AuDescription,
    FeDescription,
    ActivityDescription,
}

impl TemplateKind {
    fn builtin_source(self) -> &'static str {
        match self {
            Self::LabelName => include_str!("../../data/templates/label_name.txt"),
            Self::AuDescription => include_str!("../../data/templates/au_description.txt"),
            Self::FeDescription => include_str!("../../data/templates/fe_description.txt"),
            Self::ActivityDescription => include_str!("../../data/templates/activity_description.txt"),
        }
    }
}

/// Ordered prompt templates of one kind, each with a single `{}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    kind: TemplateKind,
    templates: Vec<String>,
}

impl TemplateSet {
    pub fn new(kind: TemplateKind, templates: Vec<String>) -> Result<Self, TextError> {
        if templates.is_empty() {
            return Err(TextError::EmptySet);
        }
        if let Some(bad) = templates.iter().find(|t| t.matches(PLACEHOLDER).count() != 1) {
            return Err(TextError::BadTemplate { template: bad.clone() });
        }
        if kind == TemplateKind::LabelName && templates.len() != 1 {
            return Err(TextError::NameSetSize { count: templates.len() });
        }
        Ok(Self { kind, templates })
    }

    /// The shipped template list for `kind`.
    pub fn builtin(kind: TemplateKind) -> Self {
        Self::parse(kind, kind.builtin_source()).expect("bundled templates are well-formed")
    }

    /// One template per line; blank lines are skipped.
    pub fn parse(kind: TemplateKind, source: &str) -> Result<Self, TextError> {
        let templates = source
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.trim().is_empty())
            .map(String::from)
            .collect();
        Self::new(kind, templates)
    }

    pub fn from_file(kind: TemplateKind, path: impl AsRef<Path>) -> Result<Self, TextError> {
        Self::parse(kind, &std::fs::read_to_string(path)?)
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Fills template `index` with the lowercased payload.
pub fn render_prompt(set: &TemplateSet, index: usize, payload: &str) -> Result<String, TextError> {
    let template = set.templates.get(index).ok_or(TextError::IndexOutOfRange {
        index,
        len: set.templates.len(),
    })?;
    if payload.is_empty() {
        return Err(TextError::EmptyPayload);
    }
    Ok(template.replacen(PLACEHOLDER, &payload.to_lowercase(), 1))
}

/// Uniform template choice, used for descriptions and activities in training.
pub fn sample_template<R: Rng + ?Sized>(set: &TemplateSet, rng: &mut R) -> Result<usize, TextError> {
    if set.templates.is_empty() {
        return Err(TextError::EmptySet);
    }
    Ok(rng.random_range(0..set.templates.len()))
}
