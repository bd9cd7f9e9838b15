//! Fallacy registry: definitions, examples, display grouping and
//! context-needed flags.
//!
//! Registries are immutable values. [`FallacyRegistry::register`] returns a new
//! registry with the entry appended, so a shared registry never changes under
//! a reader.
//!
//! # Configuration file
//!
//! A registry round-trips through TOML:
//!
//! ```toml
//! version = "newsroom-2"
//!
//! [[fallacy]]
//! code = "FB"
//! name = "False Balance"
//! definition = "Presenting two sides as equally supported when the evidence is lopsided."
//! example = "A segment pairs a climate scientist with a lone skeptic as equals."
//! group_id = 5
//! context_needed = true
//! # optional: color_index (defaults to group_id mod 8), wiki_title
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of distinct tag colors available to the overlay.
pub const PALETTE_SIZE: u8 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("duplicate fallacy code {0}")]
    DuplicateCode(String),
    #[error("invalid fallacy entry {code:?}: {reason}")]
    InvalidEntry { code: String, reason: String },
    #[error("unknown fallacy code {0}")]
    UnknownCode(String),
    #[error("registry config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallacyType {
    pub code: String,
    pub name: String,
    pub definition: String,
    pub example: String,
    pub group_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color_index: Option<u8>,
    pub context_needed: bool,
    /// English Wikipedia article title (underscored). Derived from `name` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiki_title: Option<String>,
}

impl FallacyType {
    pub fn new(
        code: impl Into<String>,
        name: impl Into<String>,
        definition: impl Into<String>,
        example: impl Into<String>,
        group_id: u32,
        context_needed: bool,
    ) -> Self {
        Self {
            code: code.into(),
            name: name.into(),
            definition: definition.into(),
            example: example.into(),
            group_id,
            color_index: None,
            context_needed,
            wiki_title: None,
        }
    }

    pub fn with_color_index(mut self, color_index: u8) -> Self {
        self.color_index = Some(color_index);
        self
    }

    pub fn with_wiki_title(mut self, title: impl Into<String>) -> Self {
        self.wiki_title = Some(title.into());
        self
    }

    pub fn color_index(&self) -> u8 {
        self.color_index
            .unwrap_or((self.group_id % u32::from(PALETTE_SIZE)) as u8)
    }

    /// Wikipedia title: explicit override, else the name in sentence case.
    pub fn wikipedia_title(&self) -> String {
        if let Some(title) = &self.wiki_title {
            return title.clone();
        }
        self.name
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| if i == 0 { w.to_string() } else { w.to_lowercase() })
            .collect::<Vec<_>>()
            .join("_")
    }

    fn validate(&self) -> Result<(), TaxonomyError> {
        let invalid = |reason: &str| TaxonomyError::InvalidEntry {
            code: self.code.clone(),
            reason: reason.to_string(),
        };
        if self.code.is_empty()
            || !self
                .code
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
        {
            return Err(invalid("code must be non-empty uppercase alphanumeric"));
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.definition.trim().is_empty() {
            return Err(invalid("definition is empty"));
        }
        if self.example.trim().is_empty() {
            return Err(invalid("example is empty"));
        }
        if self.color_index() >= PALETTE_SIZE {
            return Err(invalid("color_index must be in 0..=7"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RegistryFile")]
pub struct FallacyRegistry {
    version: String,
    #[serde(rename = "fallacy")]
    entries: Vec<FallacyType>,
}

/// On-disk shape; converted through the validating constructor.
#[derive(Deserialize)]
struct RegistryFile {
    version: String,
    #[serde(default)]
    fallacy: Vec<FallacyType>,
}

impl TryFrom<RegistryFile> for FallacyRegistry {
    type Error = TaxonomyError;

    fn try_from(file: RegistryFile) -> Result<Self, Self::Error> {
        Self::new(file.version, file.fallacy)
    }
}

impl FallacyRegistry {
    pub fn new(version: impl Into<String>, entries: Vec<FallacyType>) -> Result<Self, TaxonomyError> {
        let mut registry = Self {
            version: version.into(),
            entries: Vec::with_capacity(entries.len()),
        };
        for entry in entries {
            registry.push(entry)?;
        }
        Ok(registry)
    }

    fn push(&mut self, entry: FallacyType) -> Result<(), TaxonomyError> {
        entry.validate()?;
        if self.get(&entry.code).is_some() {
            return Err(TaxonomyError::DuplicateCode(entry.code));
        }
        if let Some(peer) = self.entries.iter().find(|e| e.group_id == entry.group_id) {
            if peer.color_index() != entry.color_index() {
                return Err(TaxonomyError::InvalidEntry {
                    code: entry.code,
                    reason: format!("group {} already uses color {}", peer.group_id, peer.color_index()),
                });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// New registry with `entry` appended. The version gains a `+CODE` suffix.
    pub fn register(&self, entry: FallacyType) -> Result<Self, TaxonomyError> {
        let mut next = self.clone();
        let code = entry.code.clone();
        next.push(entry)?;
        next.version = format!("{}+{}", self.version, code);
        Ok(next)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[FallacyType] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&FallacyType> {
        self.entries.iter().find(|e| e.code == code)
    }

    pub fn position(&self, code: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.code == code)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.get(code).is_some()
    }

    pub fn color_for(&self, code: &str) -> Result<u8, TaxonomyError> {
        self.get(code)
            .map(FallacyType::color_index)
            .ok_or_else(|| TaxonomyError::UnknownCode(code.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TaxonomyError> {
        let file: RegistryFile =
            toml::from_str(text).map_err(|e| TaxonomyError::Config(e.to_string()))?;
        Self::try_from(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("registry serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TaxonomyError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

impl Default for FallacyRegistry {
    fn default() -> Self {
        registry_default()
    }
}

/// Append `entry` to `registry`, returning the extended registry.
pub fn register_fallacy(
    registry: &FallacyRegistry,
    entry: FallacyType,
) -> Result<FallacyRegistry, TaxonomyError> {
    registry.register(entry)
}

pub fn color_for(registry: &FallacyRegistry, code: &str) -> Result<u8, TaxonomyError> {
    registry.color_for(code)
}

/// The nine built-in fallacies. Groups: 0 burden of proof, 1 diversion,
/// 2 evidence distortion, 3 faulty generalization, 4 causal errors.
pub fn registry_default() -> FallacyRegistry {
    let entries = vec![
        FallacyType::new(
            "EBP",
            "Evading the Burden of Proof",
            "This fallacy occurs when someone makes a claim but refuses to provide evidence to support it, shifting the burden of proof to others.",
            "A politician claims that a new policy will improve the economy but does not provide any data or reasoning to support this claim.",
            0,
            false,
        )
        .with_wiki_title("Burden_of_proof_(philosophy)"),
        FallacyType::new(
            "ST",
            "Strawman",
            "Misrepresenting someone's argument to make it easier to refute than the original argument.",
            "Person A says we should have stricter gun control. Person B responds by saying Person A wants to take away all guns, which is a distortion of the original argument.",
            1,
            false,
        )
        .with_wiki_title("Straw_man"),
        FallacyType::new(
            "RH",
            "Red Herring",
            "Diverting attention from the real issue by introducing an irrelevant topic.",
            "During a debate on environmental policies, a politician digresses to the opponent's personal life instead of addressing the policy issue.",
            1,
            false,
        ),
        FallacyType::new(
            "CP",
            "Cherry Picking",
            "Selectively presenting evidence that supports one's argument while ignoring evidence that contradicts it.",
            "A report on climate change highlights only data supporting global warming, ignoring data that suggests otherwise.",
            2,
            true,
        ),
        FallacyType::new(
            "FA",
            "False Analogy",
            "Making a misleading comparison between two things that are not truly comparable.",
            "Comparing the job of a teacher to that of a babysitter, implying they require similar skills and should therefore be compensated similarly.",
            3,
            false,
        )
        .with_wiki_title("Argument_from_analogy"),
        FallacyType::new(
            "HG",
            "Hasty Generalization",
            "Making a generalized statement based on a small or unrepresentative sample.",
            "Meeting three aggressive dogs and concluding that all dogs are aggressive.",
            3,
            true,
        )
        .with_wiki_title("Faulty_generalization"),
        FallacyType::new(
            "PH",
            "Post Hoc",
            "If because one event followed another, the first event caused the second.",
            "Believing that carrying a lucky charm resulted in winning a game, just because the win came after starting to carry the charm.",
            4,
            true,
        )
        .with_wiki_title("Post_hoc_ergo_propter_hoc"),
        FallacyType::new(
            "FC",
            "False Cause",
            "Mistaking correlation for causation, if because two events occur together, one causes the other.",
            "Asserting that ice cream consumption causes drowning because both increase during the summer.",
            4,
            true,
        )
        .with_wiki_title("Questionable_cause"),
        FallacyType::new(
            "VAG",
            "Vagueness",
            "Using imprecise, unclear, or ambiguous language in an argument.",
            "A politician says they will \"make the economy better\" without specifying any actual policies or steps.",
            2,
            false,
        ),
    ];
    FallacyRegistry::new("builtin-9", entries).expect("built-in registry is valid")
}

/// The canonical codes of the built-in registry, in registry order.
pub const DEFAULT_CODES: [&str; 9] = ["EBP", "ST", "RH", "CP", "FA", "HG", "PH", "FC", "VAG"];

#[cfg(test)]
mod tests {
    use super::*;

    fn false_balance() -> FallacyType {
        FallacyType::new(
            "FB",
            "False Balance",
            "Presenting two sides as equally supported when the evidence is lopsided.",
            "A segment pairs a climate scientist with a lone skeptic as equals.",
            5,
            true,
        )
    }

    #[test]
    fn default_registry_has_nine_codes() {
        let r = registry_default();
        let codes: Vec<&str> = r.entries().iter().map(|e| e.code.as_str()).collect();
        assert_eq!(codes, DEFAULT_CODES);
    }

    #[test]
    fn cherry_picking_lookup() {
        let r = registry_default();
        let cp = r.get("CP").unwrap();
        assert_eq!(cp.name, "Cherry Picking");
        assert!(cp.definition.starts_with("Selectively presenting evidence"));
        assert!(r.get("XX").is_none());
    }

    #[test]
    fn context_needed_defaults() {
        let r = registry_default();
        let flagged: Vec<&str> = r
            .entries()
            .iter()
            .filter(|e| e.context_needed)
            .map(|e| e.code.as_str())
            .collect();
        assert_eq!(flagged, ["CP", "HG", "PH", "FC"]);
    }

    #[test]
    fn register_appends_and_preserves_prefix() {
        let base = registry_default();
        let extended = base.register(false_balance()).unwrap();
        assert_eq!(extended.len(), 10);
        assert_eq!(&extended.entries()[..9], base.entries());
        assert_eq!(extended.entries()[9].code, "FB");
        assert_ne!(extended.version(), base.version());
    }

    #[test]
    fn register_rejects_duplicates_and_invalid() {
        let base = registry_default();
        let dup = FallacyType::new("CP", "Again", "def", "ex", 2, false);
        assert_eq!(base.register(dup), Err(TaxonomyError::DuplicateCode("CP".into())));

        let mut empty_def = false_balance();
        empty_def.definition = "  ".into();
        assert!(matches!(base.register(empty_def), Err(TaxonomyError::InvalidEntry { .. })));

        let mut lower = false_balance();
        lower.code = "fb".into();
        assert!(matches!(base.register(lower), Err(TaxonomyError::InvalidEntry { .. })));

        let off_palette = false_balance().with_color_index(9);
        assert!(matches!(base.register(off_palette), Err(TaxonomyError::InvalidEntry { .. })));
    }

    #[test]
    fn colors_follow_groups() {
        let r = registry_default();
        assert_eq!(r.color_for("ST").unwrap(), r.color_for("RH").unwrap());
        assert_eq!(r.color_for("PH").unwrap(), r.color_for("FC").unwrap());
        assert_ne!(r.color_for("EBP").unwrap(), r.color_for("CP").unwrap());
        assert!(r.entries().iter().all(|e| e.color_index() < PALETTE_SIZE));
        assert_eq!(r.color_for("XX"), Err(TaxonomyError::UnknownCode("XX".into())));
    }

    #[test]
    fn mismatched_group_color_rejected() {
        let entry = false_balance();
        let entry = FallacyType { group_id: 2, ..entry }.with_color_index(6);
        assert!(matches!(
            registry_default().register(entry),
            Err(TaxonomyError::InvalidEntry { .. })
        ));
    }

    #[test]
    fn toml_round_trip() {
        let r = registry_default().register(false_balance()).unwrap();
        let text = r.to_toml_string();
        assert!(text.contains("[[fallacy]]"));
        assert_eq!(FallacyRegistry::from_toml_str(&text).unwrap(), r);
    }

    #[test]
    fn toml_duplicate_rejected() {
        let text = r#"
version = "x"
[[fallacy]]
code = "A"
name = "A"
definition = "d"
example = "e"
group_id = 0
context_needed = false
[[fallacy]]
code = "A"
name = "B"
definition = "d"
example = "e"
group_id = 0
context_needed = false
"#;
        assert_eq!(
            FallacyRegistry::from_toml_str(text),
            Err(TaxonomyError::DuplicateCode("A".into()))
        );
    }

    #[test]
    fn wikipedia_titles() {
        let r = registry_default();
        assert_eq!(r.get("CP").unwrap().wikipedia_title(), "Cherry_picking");
        assert_eq!(r.get("RH").unwrap().wikipedia_title(), "Red_herring");
        assert_eq!(r.get("VAG").unwrap().wikipedia_title(), "Vagueness");
        assert_eq!(r.get("ST").unwrap().wikipedia_title(), "Straw_man");
    }
}
