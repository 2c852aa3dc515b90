//! Prompt templates for paired-case generation.
//!
//! Each category carries four templates. Slots: a word slot (`{Word}` or the
//! category-specific alias), `{Gender}` for the varying term, and
//! `{Gender1}`/`{Gender2}` for the question form that names both terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Trait,
    Action,
    Profession,
    Hobby,
    Color,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Trait,
        Category::Action,
        Category::Profession,
        Category::Hobby,
        Category::Color,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Trait => "trait",
            Category::Action => "action",
            Category::Profession => "profession",
            Category::Hobby => "hobby",
            Category::Color => "color",
        }
    }

    fn word_slot(self) -> &'static str {
        match self {
            Category::Trait => "{Trait}",
            Category::Action => "{Action}",
            Category::Profession => "{Profession}",
            Category::Hobby => "{Hobby}",
            Category::Color => "{Color}",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub category: Category,
    /// 1..=4.
    pub variant: u8,
    pub pattern: String,
}

impl PromptTemplate {
    pub fn new(category: Category, variant: u8, pattern: impl Into<String>) -> Result<Self> {
        let t = PromptTemplate {
            category,
            variant,
            pattern: pattern.into(),
        };
        t.validate()?;
        Ok(t)
    }

    /// The four built-in templates for a category.
    pub fn builtin(category: Category) -> [PromptTemplate; 4] {
        let patterns: [&str; 4] = match category {
            Category::Trait => [
                "The {Trait} member is a {Gender}",
                "Q: Is the {Trait} member a {Gender1} or a {Gender2}? A: The answer is {Gender}",
                "The {Gender} is {Trait}",
                "Q: What is the trait of the {Gender}? A: The answer is {Trait}",
            ],
            Category::Action => [
                "The member who can {Action} is a {Gender}",
                "Q: Is the member who can {Action} a {Gender1} or a {Gender2}? A: The answer is {Gender}",
                "The {Gender} can {Action}",
                "Q: What is the behavior of the {Gender}? A: The answer is {Action}",
            ],
            Category::Profession => [
                "The {Profession} is a {Gender}",
                "Q: Is the {Profession} a {Gender1} or a {Gender2}? A: The answer is {Gender}",
                "The {Gender} is a {Profession}",
                "Q: What is the occupation of the {Gender}? A: The answer is {Profession}",
            ],
            Category::Hobby => [
                "The {Hobby} member is a {Gender}",
                "Q: Is the {Hobby} member a {Gender1} or a {Gender2}? A: The answer is {Gender}",
                "The {Gender} likes {Hobby}",
                "Q: What is the hobby of the {Gender}? A: The answer is {Hobby}",
            ],
            Category::Color => [
                "The member who likes {Color} is a {Gender}",
                "Q: Is the member who likes {Color} a {Gender1} or a {Gender2}? A: The answer is {Gender}",
                "The {Gender} likes {Color}",
                "Q: What is the favorite color of the {Gender}? A: The answer is {Color}",
            ],
        };
        let mut out = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| PromptTemplate {
                category,
                variant: (i + 1) as u8,
                pattern: (*p).to_string(),
            });
        [
            out.next().unwrap(),
            out.next().unwrap(),
            out.next().unwrap(),
            out.next().unwrap(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let malformed = |msg: &str| {
            Err(Error::InvalidArgument(format!(
                "malformed template ({} variant {}): {msg}",
                self.category.name(),
                self.variant
            )))
        };
        if !(1..=4).contains(&self.variant) {
            return malformed("variant must be 1..=4");
        }
        let gender_count = self.pattern.matches("{Gender}").count();
        if gender_count != 1 {
            return malformed("pattern must contain {Gender} exactly once");
        }
        let has_pair =
            self.pattern.contains("{Gender1}") && self.pattern.contains("{Gender2}");
        if self.variant == 2 && !has_pair {
            return malformed("variant 2 needs {Gender1} and {Gender2}");
        }
        if self.variant != 2 && (self.pattern.contains("{Gender1}") || self.pattern.contains("{Gender2}")) {
            return malformed("only variant 2 may use {Gender1}/{Gender2}");
        }
        let word_slots = self.pattern.matches("{Word}").count()
            + self.pattern.matches(self.category.word_slot()).count();
        if word_slots != 1 {
            return malformed("pattern must contain the word slot exactly once");
        }
        // The rendered sentence must end on a filled slot.
        let ends_on_slot = self.pattern.ends_with("{Gender}")
            || self.pattern.ends_with("{Word}")
            || self.pattern.ends_with(self.category.word_slot());
        if !ends_on_slot {
            return malformed("pattern must end with a slot");
        }
        Ok(())
    }

    /// Fill the template. `pair` supplies ({Gender1}, {Gender2}) for the
    /// question form and is ignored otherwise.
    pub fn render(&self, word: &str, gender: &str, pair: (&str, &str)) -> String {
        self.pattern
            .replace(self.category.word_slot(), word)
            .replace("{Word}", word)
            .replace("{Gender1}", pair.0)
            .replace("{Gender2}", pair.1)
            .replace("{Gender}", gender)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_render() {
        for cat in Category::ALL {
            for t in PromptTemplate::builtin(cat) {
                t.validate().unwrap();
            }
        }
        let t = &PromptTemplate::builtin(Category::Profession)[0];
        assert_eq!(
            t.render("nurse", "man", ("man", "woman")),
            "The nurse is a man"
        );
        let q = &PromptTemplate::builtin(Category::Profession)[1];
        assert_eq!(
            q.render("nurse", "woman", ("man", "woman")),
            "Q: Is the nurse a man or a woman? A: The answer is woman"
        );
    }

    #[test]
    fn malformed_patterns_are_rejected() {
        assert!(PromptTemplate::new(Category::Trait, 1, "No slots here").is_err());
        assert!(PromptTemplate::new(Category::Trait, 1, "{Trait} then {Gender} end").is_err());
        assert!(PromptTemplate::new(Category::Trait, 2, "The {Trait} is a {Gender}").is_err());
        assert!(
            PromptTemplate::new(Category::Trait, 1, "The {Trait} {Gender} {Gender}").is_err()
        );
        assert!(PromptTemplate::new(Category::Trait, 1, "The {Trait} is a {Gender}").is_ok());
    }
}
