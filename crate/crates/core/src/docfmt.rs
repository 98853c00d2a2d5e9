//! Helpers shared by the structured-text document loaders (curriculum,
//! rubric, archetype mix). All of them are TOML.

use serde::de::DeserializeOwned;

/// 1-based line/column inside a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Location of a byte offset in `text`.
pub fn location_of(text: &str, offset: usize) -> Location {
    let offset = offset.min(text.len());
    let mut line = 1;
    let mut column = 1;
    for (i, c) in text.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    Location { line, column }
}

/// Parse failure with an optional location.
#[derive(Debug, Clone, PartialEq)]
pub struct DocError {
    pub location: Option<Location>,
    pub message: String,
}

impl std::fmt::Display for DocError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.location {
            Some(loc) => write!(f, "{loc}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for DocError {}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T, DocError> {
    toml::from_str(text).map_err(|e| DocError {
        location: e.span().map(|s| location_of(text, s.start)),
        message: e.message().trim().to_string(),
    })
}

pub fn to_toml<T: serde::Serialize>(value: &T) -> String {
    // Every document type here is a plain struct tree, which TOML can always represent.
    toml::to_string_pretty(value).expect("document types serialize to TOML")
}
