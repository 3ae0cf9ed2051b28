//! Prompt construction: language tags, template files, the V1-V4 variant
//! registry, and the judge/direct-translation scaffolds.
//!
//! All rendering is pure string substitution. Placeholders use single-brace
//! names (`{joke}`, `{analysis}`, ...) and are replaced in a single pass over
//! the template body, so braces inside the substituted text are never
//! reinterpreted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder names a template body is allowed to use.
pub const ALLOWED_PLACEHOLDERS: &[&str] = &[
    "joke",
    "analysis",
    "src",
    "tgt",
    "source_text",
    "candidate_text",
    "dimension",
];

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("joke text is empty")]
    EmptyJoke,
    #[error("analysis text is empty")]
    EmptyAnalysis,
    #[error("text is empty")]
    EmptyText,
    #[error("source and target language are the same: {0}")]
    SameLanguage(String),
    #[error("unknown language: {0}")]
    UnknownLanguage(String),
    #[error("unknown prompt variant: {0}")]
    UnknownVariant(String),
    #[error("bad template {0}: {1}")]
    BadTemplate(String, String),
    #[error("unbound placeholder {{{0}}} in template {1}")]
    UnboundPlaceholder(String, String),
}

/// A supported language, with the display name used inside prompts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LanguageTag {
    pub code: String,
    pub display_name: String,
}

impl LanguageTag {
    fn new(code: &str, display_name: &str) -> Self {
        Self {
            code: code.to_string(),
            display_name: display_name.to_string(),
        }
    }

    /// Resolve a language code or alias (`en`, `EN`, `zh`, `ZH`, `es`, `SP`,
    /// `de`, `GE`, or a display name) to a canonical tag.
    pub fn parse(s: &str) -> Result<Self, PromptError> {
        match s.trim().to_lowercase().as_str() {
            "en" | "english" => Ok(Self::new("en", "English")),
            "zh" | "chinese" => Ok(Self::new("zh", "Chinese")),
            "es" | "sp" | "spanish" => Ok(Self::new("es", "Spanish")),
            "de" | "ge" | "german" => Ok(Self::new("de", "German")),
            _ => Err(PromptError::UnknownLanguage(s.to_string())),
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)
    }
}

/// Judged quality axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Humour,
    Fluency,
    Coherence,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Humour, Dimension::Fluency, Dimension::Coherence];

    pub fn keyword(&self) -> &'static str {
        match self {
            Dimension::Humour => "humour",
            Dimension::Fluency => "fluency",
            Dimension::Coherence => "coherence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "humour" | "humor" | "h" => Some(Dimension::Humour),
            "fluency" | "f" => Some(Dimension::Fluency),
            "coherence" | "c" => Some(Dimension::Coherence),
            _ => None,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.keyword())
    }
}

/// Judge metric kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Sqm,
    Stars,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Sqm => "SQM",
            Metric::Stars => "STARS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "sqm" => Some(Metric::Sqm),
            "stars" | "star" => Some(Metric::Stars),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// One template: id + variant header and a body with placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub variant: String,
    pub body: String,
}

impl PromptTemplate {
    /// Parse the on-disk format: a one-line `id=... variant=...` header
    /// followed by the body.
    pub fn parse_file(text: &str, origin: &str) -> Result<Self, PromptError> {
        let (header, body) = text.split_once('\n').ok_or_else(|| {
            PromptError::BadTemplate(origin.to_string(), "missing header line".into())
        })?;
        let mut id = None;
        let mut variant = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("id=") {
                id = Some(v.to_string());
            } else if let Some(v) = field.strip_prefix("variant=") {
                variant = Some(v.to_string());
            }
        }
        let id = id.ok_or_else(|| {
            PromptError::BadTemplate(origin.to_string(), "header lacks id=".into())
        })?;
        let variant = variant.ok_or_else(|| {
            PromptError::BadTemplate(origin.to_string(), "header lacks variant=".into())
        })?;
        let body = body.trim_end_matches('\n').to_string();
        for name in placeholders_in(&body) {
            if !ALLOWED_PLACEHOLDERS.contains(&name.as_str()) {
                return Err(PromptError::BadTemplate(
                    origin.to_string(),
                    format!("placeholder {{{name}}} not allowed"),
                ));
            }
        }
        Ok(Self { id, variant, body })
    }

    /// Single-pass render. Every placeholder in the body must have a binding;
    /// substituted text is inserted verbatim and never rescanned.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let tail = &rest[open + 1..];
            match tail.find('}') {
                Some(close) if ALLOWED_PLACEHOLDERS.contains(&&tail[..close]) => {
                    let name = &tail[..close];
                    let value = bindings
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| {
                            PromptError::UnboundPlaceholder(name.to_string(), self.id.clone())
                        })?;
                    out.push_str(value);
                    rest = &tail[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = tail;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Placeholder names occurring in a body, in order.
pub fn placeholders_in(body: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        match tail.find('}') {
            Some(close) => {
                let name = &tail[..close];
                if ALLOWED_PLACEHOLDERS.contains(&name) {
                    found.push(name.to_string());
                    rest = &tail[close + 1..];
                } else {
                    rest = tail;
                }
            }
            None => break,
        }
    }
    found
}

/// The templates one prompt variant supplies for the staged pipeline.
#[derive(Debug, Clone)]
pub struct VariantSet {
    pub decompose_plain: PromptTemplate,
    pub decompose_theory: PromptTemplate,
    pub translate: PromptTemplate,
    pub compose: PromptTemplate,
}

macro_rules! embed {
    ($path:literal) => {
        PromptTemplate::parse_file(include_str!($path), $path).expect("embedded template")
    };
}

fn embedded_registry() -> BTreeMap<String, VariantSet> {
    let mut reg = BTreeMap::new();
    reg.insert(
        "V1".to_string(),
        VariantSet {
            decompose_plain: embed!("../templates/V1/decompose_plain.txt"),
            decompose_theory: embed!("../templates/V1/decompose_theory.txt"),
            translate: embed!("../templates/V1/translate.txt"),
            compose: embed!("../templates/V1/compose.txt"),
        },
    );
    reg.insert(
        "V2".to_string(),
        VariantSet {
            decompose_plain: embed!("../templates/V2/decompose_plain.txt"),
            decompose_theory: embed!("../templates/V2/decompose_theory.txt"),
            translate: embed!("../templates/V2/translate.txt"),
            compose: embed!("../templates/V2/compose.txt"),
        },
    );
    reg.insert(
        "V3".to_string(),
        VariantSet {
            decompose_plain: embed!("../templates/V3/decompose_plain.txt"),
            decompose_theory: embed!("../templates/V3/decompose_theory.txt"),
            translate: embed!("../templates/V3/translate.txt"),
            compose: embed!("../templates/V3/compose.txt"),
        },
    );
    reg.insert(
        "V4".to_string(),
        VariantSet {
            decompose_plain: embed!("../templates/V4/decompose_plain.txt"),
            decompose_theory: embed!("../templates/V4/decompose_theory.txt"),
            translate: embed!("../templates/V4/translate.txt"),
            compose: embed!("../templates/V4/compose.txt"),
        },
    );
    reg
}

/// Renders every prompt the pipeline and judge need. Holds the variant
/// registry plus the variant-independent scaffolds.
#[derive(Debug, Clone)]
pub struct PromptForge {
    registry: BTreeMap<String, VariantSet>,
    variant: String,
    direct: PromptTemplate,
    theory_direct: PromptTemplate,
    judge_sqm: PromptTemplate,
    judge_stars: PromptTemplate,
}

impl Default for PromptForge {
    fn default() -> Self {
        Self::new("V1").expect("V1 is always present")
    }
}

impl PromptForge {
    pub fn new(variant: &str) -> Result<Self, PromptError> {
        let registry = embedded_registry();
        if !registry.contains_key(variant) {
            return Err(PromptError::UnknownVariant(variant.to_string()));
        }
        Ok(Self {
            registry,
            variant: variant.to_string(),
            direct: embed!("../templates/shared/direct.txt"),
            theory_direct: embed!("../templates/shared/theory_direct.txt"),
            judge_sqm: embed!("../templates/shared/judge_sqm.txt"),
            judge_stars: embed!("../templates/shared/judge_stars.txt"),
        })
    }

    /// Override templates from a directory laid out like the shipped
    /// `templates/` tree (`<dir>/V2/compose.txt`, `<dir>/shared/direct.txt`).
    /// Missing files keep their embedded defaults.
    pub fn with_prompt_dir(mut self, dir: &Path) -> Result<Self, PromptError> {
        let load = |path: std::path::PathBuf| -> Result<Option<PromptTemplate>, PromptError> {
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    PromptError::BadTemplate(path.display().to_string(), e.to_string())
                })?;
                Ok(Some(PromptTemplate::parse_file(
                    &text,
                    &path.display().to_string(),
                )?))
            } else {
                Ok(None)
            }
        };
        for (variant, set) in self.registry.iter_mut() {
            let base = dir.join(variant);
            if let Some(t) = load(base.join("decompose_plain.txt"))? {
                set.decompose_plain = t;
            }
            if let Some(t) = load(base.join("decompose_theory.txt"))? {
                set.decompose_theory = t;
            }
            if let Some(t) = load(base.join("translate.txt"))? {
                set.translate = t;
            }
            if let Some(t) = load(base.join("compose.txt"))? {
                set.compose = t;
            }
        }
        let shared = dir.join("shared");
        if let Some(t) = load(shared.join("direct.txt"))? {
            self.direct = t;
        }
        if let Some(t) = load(shared.join("theory_direct.txt"))? {
            self.theory_direct = t;
        }
        if let Some(t) = load(shared.join("judge_sqm.txt"))? {
            self.judge_sqm = t;
        }
        if let Some(t) = load(shared.join("judge_stars.txt"))? {
            self.judge_stars = t;
        }
        Ok(self)
    }

    pub fn variant(&self) -> &str {
        &self.variant
    }

    pub fn variant_ids(&self) -> Vec<String> {
        self.registry.keys().cloned().collect()
    }

    /// The full registry, keyed by variant id.
    pub fn variant_registry(&self) -> &BTreeMap<String, VariantSet> {
        &self.registry
    }

    fn set(&self) -> &VariantSet {
        &self.registry[&self.variant]
    }

    pub fn render_decompose(&self, joke: &str, theory: bool) -> Result<String, PromptError> {
        if joke.trim().is_empty() {
            return Err(PromptError::EmptyJoke);
        }
        let tpl = if theory {
            &self.set().decompose_theory
        } else {
            &self.set().decompose_plain
        };
        tpl.render(&[("joke", joke)])
    }

    pub fn render_translate_analysis(
        &self,
        analysis_text: &str,
        src: &LanguageTag,
        tgt: &LanguageTag,
    ) -> Result<String, PromptError> {
        if analysis_text.trim().is_empty() {
            return Err(PromptError::EmptyAnalysis);
        }
        if src.code == tgt.code {
            return Err(PromptError::SameLanguage(src.code.clone()));
        }
        self.set().translate.render(&[
            ("src", &src.display_name),
            ("tgt", &tgt.display_name),
            ("analysis", analysis_text),
        ])
    }

    pub fn render_compose(
        &self,
        translated_analysis: &str,
        tgt: &LanguageTag,
    ) -> Result<String, PromptError> {
        if translated_analysis.trim().is_empty() {
            return Err(PromptError::EmptyAnalysis);
        }
        self.set().compose.render(&[
            ("tgt", &tgt.display_name),
            ("analysis", translated_analysis),
        ])
    }

    pub fn render_direct_translate(
        &self,
        joke: &str,
        src: &LanguageTag,
        tgt: &LanguageTag,
    ) -> Result<String, PromptError> {
        if joke.trim().is_empty() {
            return Err(PromptError::EmptyJoke);
        }
        if src.code == tgt.code {
            return Err(PromptError::SameLanguage(src.code.clone()));
        }
        self.direct.render(&[
            ("src", &src.display_name),
            ("tgt", &tgt.display_name),
            ("joke", joke),
        ])
    }

    /// Single-call variant that embeds the three-component structure in a
    /// direct translation instruction.
    pub fn render_theory_direct(
        &self,
        joke: &str,
        src: &LanguageTag,
        tgt: &LanguageTag,
    ) -> Result<String, PromptError> {
        if joke.trim().is_empty() {
            return Err(PromptError::EmptyJoke);
        }
        if src.code == tgt.code {
            return Err(PromptError::SameLanguage(src.code.clone()));
        }
        self.theory_direct.render(&[
            ("src", &src.display_name),
            ("tgt", &tgt.display_name),
            ("joke", joke),
        ])
    }

    pub fn render_judge(
        &self,
        metric: Metric,
        dimension: Dimension,
        source_text: &str,
        candidate_text: &str,
        src: &LanguageTag,
        tgt: &LanguageTag,
    ) -> Result<String, PromptError> {
        if source_text.trim().is_empty() || candidate_text.trim().is_empty() {
            return Err(PromptError::EmptyText);
        }
        let tpl = match metric {
            Metric::Sqm => &self.judge_sqm,
            Metric::Stars => &self.judge_stars,
        };
        tpl.render(&[
            ("src", &src.display_name),
            ("tgt", &tgt.display_name),
            ("dimension", dimension.keyword()),
            ("source_text", source_text),
            ("candidate_text", candidate_text),
        ])
    }
}
