use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Caption tokenizer settings. Tokens are always split on whitespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Replace punctuation with spaces, keeping apostrophes between two
    /// alphanumeric characters (`don't`).
    pub strip_punct: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            strip_punct: true,
        }
    }
}

pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut cleaned = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = !cfg.strip_punct
            || c.is_alphanumeric()
            || c.is_whitespace()
            || (c == '\''
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()));
        if !keep {
            cleaned.push(' ');
        } else if cfg.lowercase {
            cleaned.extend(c.to_lowercase());
        } else {
            cleaned.push(c);
        }
    }
    cleaned.split_whitespace().map(String::from).collect()
}
