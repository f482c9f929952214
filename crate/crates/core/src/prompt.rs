//! Alt-text prompt assembly and fine-tuning dataset construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const LABEL_SLOT: &str = "{icon-only label}";
const CONTEXT_SLOT: &str = "{icon context}";

/// The generation prompt. Line breaks and trailing spaces are part of the
/// template; do not reflow.
pub const PROMPT_TEMPLATE: &str = "You are an accessibility assistant to a mobile app Developer. \n\
A mobile app UI element that looks like an icon that developers \n\
often use with icon tag '{icon-only label}' has view hierarchy \n\
content as below: \n\
{icon context}\n\
Generate a short (within 2-7 words), descriptive alt-text for the \n\
UI element. Provide only the alt-text as output, nothing else. \n\
Describe the element as if you were the app developer to help \n\
vision-impaired user understand its functionality and purpose. \n\
Avoid generic words like 'button', 'image', 'icon' etc.";

/// Role preamble; the prompt starts with this sentence followed by
/// [`SYSTEM_SEPARATOR`].
pub const SYSTEM_PREAMBLE: &str = "You are an accessibility assistant to a mobile app Developer.";
pub const SYSTEM_SEPARATOR: &str = " \n";

/// Icon-only labeling prompt sent with the upscaled icon pixels.
pub const ICON_LABEL_PROMPT: &str =
    "You are an image classifier. What is the class of this UI icon? Only provide the class as response.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("{0} must not be blank")]
    BlankInput(&'static str),
    #[error("fine-tune record has an empty {0} message")]
    EmptyMessage(&'static str),
    #[error("fine-tune record must hold system, user and assistant messages in that order")]
    BadRoles,
    #[error("prompt does not start with the system preamble")]
    MissingPreamble,
}

/// Fills the template. Placeholder-like text inside the inputs is left
/// untouched.
pub fn build_prompt(icon_label: &str, context_text: &str) -> Result<String, PromptError> {
    if icon_label.trim().is_empty() {
        return Err(PromptError::BlankInput("icon label"));
    }
    if context_text.trim().is_empty() {
        return Err(PromptError::BlankInput("icon context"));
    }
    let (head, rest) = PROMPT_TEMPLATE
        .split_once(LABEL_SLOT)
        .expect("template has a label slot");
    let (middle, tail) = rest
        .split_once(CONTEXT_SLOT)
        .expect("template has a context slot");
    let mut out = String::with_capacity(
        PROMPT_TEMPLATE.len() + icon_label.len() + context_text.len(),
    );
    out.push_str(head);
    out.push_str(icon_label);
    out.push_str(middle);
    out.push_str(context_text);
    out.push_str(tail);
    Ok(out)
}

/// Splits an assembled prompt into system and user message contents.
pub fn split_prompt(prompt: &str) -> Result<(&str, &str), PromptError> {
    prompt
        .strip_prefix(SYSTEM_PREAMBLE)
        .and_then(|rest| rest.strip_prefix(SYSTEM_SEPARATOR))
        .map(|user| (SYSTEM_PREAMBLE, user))
        .ok_or(PromptError::MissingPreamble)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub screen_id: String,
    pub node_path: String,
    pub icon_label: String,
    pub context_text: String,
    pub prompt: String,
}

impl PromptRecord {
    pub fn new(
        screen_id: &str,
        node_path: &str,
        icon_label: &str,
        context_text: &str,
    ) -> Result<Self, PromptError> {
        Ok(PromptRecord {
            screen_id: screen_id.to_string(),
            node_path: node_path.to_string(),
            icon_label: icon_label.to_string(),
            context_text: context_text.to_string(),
            prompt: build_prompt(icon_label, context_text)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// One chat-format training example: system, user, assistant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneRecord {
    pub messages: Vec<ChatMessage>,
}

const ROLES: [&str; 3] = ["system", "user", "assistant"];

impl FineTuneRecord {
    /// Pairs an assembled prompt with one human caption.
    pub fn new(prompt: &str, caption: &str) -> Result<Self, PromptError> {
        let (system, user) = split_prompt(prompt)?;
        let record = FineTuneRecord {
            messages: ROLES
                .iter()
                .zip([system, user, caption.trim()])
                .map(|(role, content)| ChatMessage {
                    role: role.to_string(),
                    content: content.to_string(),
                })
                .collect(),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.messages.len() != 3
            || self.messages.iter().zip(ROLES).any(|(m, r)| m.role != r)
        {
            return Err(PromptError::BadRoles);
        }
        for (m, role) in self.messages.iter().zip(ROLES) {
            if m.content.trim().is_empty() {
                return Err(PromptError::EmptyMessage(role));
            }
        }
        Ok(())
    }

    pub fn assistant(&self) -> &str {
        self.messages.get(2).map_or("", |m| m.content.as_str())
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Icon classes used to stratify fine-tuning samples. Always contains
/// [`ClassVocab::OTHER`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocab {
    classes: BTreeSet<String>,
    /// Normalized key -> class name.
    index: BTreeMap<String, String>,
}

const RICO_ICON_CLASSES: &str = include_str!("../data/rico_icon_classes.txt");

impl ClassVocab {
    pub const OTHER: &'static str = "other";

    /// Builds a vocabulary from class names, adding "other" if missing.
    /// Blank names are skipped; the first class claiming a normalized key
    /// keeps it.
    pub fn new<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = ClassVocab {
            classes: BTreeSet::new(),
            index: BTreeMap::new(),
        };
        for c in classes {
            vocab.insert(c.as_ref().trim());
        }
        vocab.insert(Self::OTHER);
        vocab
    }

    fn insert(&mut self, class: &str) {
        if class.is_empty() {
            return;
        }
        self.classes.insert(class.to_string());
        self.index
            .entry(class_key(class))
            .or_insert_with(|| class.to_string());
    }

    /// One class per line; `#` starts a comment line.
    pub fn from_lines(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    /// The 99 common Rico icon classes plus "other".
    pub fn rico_icons() -> Self {
        Self::from_lines(RICO_ICON_CLASSES)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, class: &str) -> bool {
        self.classes.contains(class)
    }

    /// Classes in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(String::as_str)
    }

    fn lookup(&self, label: &str) -> Option<&str> {
        self.index.get(&class_key(label)).map(String::as_str)
    }
}

/// Lowercase alphanumerics only: case, spaces, underscores and punctuation
/// are ignored when matching labels to classes.
fn class_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Bins an icon-only label into the vocabulary, falling back to "other".
pub fn assign_class<'v>(icon_label: &str, vocab: &'v ClassVocab) -> &'v str {
    vocab.lookup(icon_label).unwrap_or_else(|| {
        vocab
            .classes
            .get(ClassVocab::OTHER)
            .map_or(ClassVocab::OTHER, String::as_str)
    })
}

/// A training icon with its assigned class and chosen caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledIcon {
    pub icon_id: String,
    pub class: String,
    pub caption: String,
}

/// Draws up to `cap` icons per class without replacement. Classes are
/// visited in lexicographic order with one generator seeded from `seed`;
/// the output is grouped by class in that order, each group in draw order.
pub fn sample_finetune_set(icons: &[LabeledIcon], cap: usize, seed: u64) -> Vec<LabeledIcon> {
    let mut by_class: BTreeMap<&str, Vec<&LabeledIcon>> = BTreeMap::new();
    for icon in icons {
        by_class.entry(icon.class.as_str()).or_default().push(icon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for members in by_class.values() {
        let take = cap.min(members.len());
        let picks = rand::seq::index::sample(&mut rng, members.len(), take);
        out.extend(picks.into_iter().map(|i| members[i].clone()));
    }
    out
}

/// Per-class availability and selection counts, one row per vocabulary
/// class (unused classes included with zero counts) plus any class seen in
/// the data but missing from the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCount {
    pub class: String,
    pub available: usize,
    pub selected: usize,
}

pub fn class_counts(
    pool: &[LabeledIcon],
    selected: &[LabeledIcon],
    vocab: &ClassVocab,
) -> Vec<ClassCount> {
    let mut rows: BTreeMap<String, (usize, usize)> =
        vocab.iter().map(|c| (c.to_string(), (0, 0))).collect();
    for icon in pool {
        rows.entry(icon.class.clone()).or_default().0 += 1;
    }
    for icon in selected {
        rows.entry(icon.class.clone()).or_default().1 += 1;
    }
    rows.into_iter()
        .map(|(class, (available, selected))| ClassCount {
            class,
            available,
            selected,
        })
        .collect()
}
