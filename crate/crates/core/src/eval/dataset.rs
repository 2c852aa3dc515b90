//! Evaluation units and dataset generation/ingestion.
//!
//! Word lists are UTF-8 text, one word per line. Paired, stereotype, and
//! task datasets are JSON-lines, one case per line (schema v1, documented in
//! the README).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

use super::templates::{Category, PromptTemplate};

/// Two sentences differing only in their gender terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedCase {
    pub male_sentence: String,
    pub female_sentence: String,
    /// Variant-2 templates carry the swapped `{Gender1}/{Gender2}` ordering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub male_sentence_alt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub female_sentence_alt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<u8>,
}

impl PairedCase {
    pub fn simple(male: impl Into<String>, female: impl Into<String>) -> Self {
        PairedCase {
            male_sentence: male.into(),
            female_sentence: female.into(),
            male_sentence_alt: None,
            female_sentence_alt: None,
            category: None,
            word: None,
            variant: None,
        }
    }

    /// Swap the male/female sides (used by the metric-symmetry property).
    pub fn swapped(&self) -> Self {
        PairedCase {
            male_sentence: self.female_sentence.clone(),
            female_sentence: self.male_sentence.clone(),
            male_sentence_alt: self.female_sentence_alt.clone(),
            female_sentence_alt: self.male_sentence_alt.clone(),
            category: self.category,
            word: self.word.clone(),
            variant: self.variant,
        }
    }
}

/// Stereotype triple: stereotype / anti-stereotype / nonsensical sentence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StereoCase {
    pub stereotype: String,
    pub anti_stereotype: String,
    pub nonsensical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl StereoCase {
    pub fn validate(&self) -> Result<()> {
        if self.stereotype.is_empty()
            || self.anti_stereotype.is_empty()
            || self.nonsensical.is_empty()
        {
            return Err(Error::InvalidArgument(
                "stereo case has an empty sentence".into(),
            ));
        }
        Ok(())
    }
}

/// Capability probe unit: multiple choice or arithmetic completion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskCase {
    Mcq {
        prompt: String,
        choices: Vec<String>,
        answer_index: usize,
    },
    Arithmetic {
        prompt: String,
        answer: String,
    },
}

impl TaskCase {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskCase::Mcq {
                choices,
                answer_index,
                ..
            } => {
                if choices.len() < 2 {
                    return Err(Error::InvalidArgument("mcq needs >= 2 choices".into()));
                }
                if *answer_index >= choices.len() {
                    return Err(Error::InvalidArgument(format!(
                        "mcq answer index {answer_index} out of range"
                    )));
                }
                Ok(())
            }
            TaskCase::Arithmetic { answer, .. } => {
                if answer.is_empty() {
                    return Err(Error::InvalidArgument("empty arithmetic answer".into()));
                }
                Ok(())
            }
        }
    }
}

/// Per-category word lists, categories in canonical order.
#[derive(Debug, Clone, Default)]
pub struct WordLists {
    pub lists: BTreeMap<Category, Vec<String>>,
}

impl WordLists {
    pub fn insert(&mut self, category: Category, words: Vec<String>) {
        self.lists.insert(category, words);
    }

    /// Load `<category>.txt` files from a directory; absent categories are
    /// skipped, present-but-empty ones are an error.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut out = WordLists::default();
        for category in Category::ALL {
            let path = dir.join(format!("{}.txt", category.name()));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let words: Vec<String> = text
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            if words.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "word list {} is empty",
                    path.display()
                )));
            }
            out.insert(category, words);
        }
        if out.lists.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no word lists found under {}",
                dir.display()
            )));
        }
        Ok(out)
    }

    pub fn total_words(&self) -> usize {
        self.lists.values().map(Vec::len).sum()
    }
}

/// Render paired cases from word lists: four templates per category, one
/// pair per (word, template). Variant 2 renders both gender orderings.
pub fn generate_commonwords(
    wordlists: &WordLists,
    genders: (&str, &str),
) -> Result<Vec<PairedCase>> {
    let (male, female) = genders;
    if male.is_empty() || female.is_empty() {
        return Err(Error::InvalidArgument("empty gender term".into()));
    }
    let mut out = Vec::with_capacity(wordlists.total_words() * 4);
    for (&category, words) in &wordlists.lists {
        if words.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "word list for {} is empty",
                category.name()
            )));
        }
        let templates = PromptTemplate::builtin(category);
        for word in words {
            for template in &templates {
                template.validate()?;
                let case = if template.variant == 2 {
                    PairedCase {
                        male_sentence: template.render(word, male, (male, female)),
                        female_sentence: template.render(word, female, (male, female)),
                        male_sentence_alt: Some(template.render(word, male, (female, male))),
                        female_sentence_alt: Some(template.render(word, female, (female, male))),
                        category: Some(category),
                        word: Some(word.clone()),
                        variant: Some(2),
                    }
                } else {
                    PairedCase {
                        male_sentence: template.render(word, male, (male, female)),
                        female_sentence: template.render(word, female, (male, female)),
                        male_sentence_alt: None,
                        female_sentence_alt: None,
                        category: Some(category),
                        word: Some(word.clone()),
                        variant: Some(template.variant),
                    }
                };
                out.push(case);
            }
        }
    }
    Ok(out)
}

/// Seeded two-digit addition probe ("a+b=" with exact-match answers).
pub fn arithmetic_probe(seed: u64, n: usize) -> Vec<TaskCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: u32 = rng.random_range(10..100);
            let b: u32 = rng.random_range(10..100);
            TaskCase::Arithmetic {
                prompt: format!("{a}+{b}="),
                answer: (a + b).to_string(),
            }
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| {
            Error::Container(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("case serializes");
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lists(words_per_category: usize) -> WordLists {
        let mut wl = WordLists::default();
        for cat in Category::ALL {
            wl.insert(
                cat,
                (0..words_per_category)
                    .map(|i| format!("{}{}", cat.name(), i))
                    .collect(),
            );
        }
        wl
    }

    #[test]
    fn count_law_holds() {
        // 100 words x 5 categories x 4 prompts = 2,000 pairs.
        let pairs = generate_commonwords(&lists(100), ("man", "woman")).unwrap();
        assert_eq!(pairs.len(), 2000);

        let mut one = WordLists::default();
        one.insert(Category::Profession, vec!["nurse".into()]);
        let pairs = generate_commonwords(&one, ("man", "woman")).unwrap();
        assert_eq!(pairs.len(), 4);
    }

    #[test]
    fn nurse_pair_matches_template() {
        let mut wl = WordLists::default();
        wl.insert(Category::Profession, vec!["nurse".into()]);
        let pairs = generate_commonwords(&wl, ("man", "woman")).unwrap();
        let v1 = pairs.iter().find(|p| p.variant == Some(1)).unwrap();
        assert_eq!(v1.male_sentence, "The nurse is a man");
        assert_eq!(v1.female_sentence, "The nurse is a woman");
        let v2 = pairs.iter().find(|p| p.variant == Some(2)).unwrap();
        assert!(v2.male_sentence_alt.is_some());
        assert!(v2
            .male_sentence_alt
            .as_ref()
            .unwrap()
            .contains("a woman or a man"));
    }

    #[test]
    fn empty_word_list_is_rejected() {
        let mut wl = WordLists::default();
        wl.insert(Category::Color, vec![]);
        assert!(generate_commonwords(&wl, ("man", "woman")).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = vec![
            PairedCase::simple("He is tall", "She is tall"),
            PairedCase::simple("a", "b"),
        ];
        write_jsonl(&path, &pairs).unwrap();
        let back: Vec<PairedCase> = read_jsonl(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].male_sentence, "He is tall");

        let tasks = vec![
            TaskCase::Mcq {
                prompt: "Q".into(),
                choices: vec!["a".into(), "b".into()],
                answer_index: 1,
            },
            TaskCase::Arithmetic {
                prompt: "3+5=".into(),
                answer: "8".into(),
            },
        ];
        let tpath = dir.path().join("tasks.jsonl");
        write_jsonl(&tpath, &tasks).unwrap();
        let back: Vec<TaskCase> = read_jsonl(&tpath).unwrap();
        assert!(matches!(back[1], TaskCase::Arithmetic { .. }));
    }

    #[test]
    fn arithmetic_probe_is_seed_stable() {
        let a = arithmetic_probe(9, 100);
        let b = arithmetic_probe(9, 100);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for case in &a {
            case.validate().unwrap();
            if let TaskCase::Arithmetic { prompt, answer } = case {
                let (lhs, rhs) = prompt
                    .trim_end_matches('=')
                    .split_once('+')
                    .expect("a+b form");
                let sum: u32 = lhs.parse::<u32>().unwrap() + rhs.parse::<u32>().unwrap();
                assert_eq!(answer, &sum.to_string());
            }
        }
        let c = arithmetic_probe(10, 100);
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn wordlist_dir_loading() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("trait.txt"), "brave\nkind\n\n").unwrap();
        std::fs::write(dir.path().join("color.txt"), "pink\n").unwrap();
        let wl = WordLists::from_dir(dir.path()).unwrap();
        assert_eq!(wl.lists.len(), 2);
        assert_eq!(wl.lists[&Category::Trait].len(), 2);
        std::fs::write(dir.path().join("hobby.txt"), "\n").unwrap();
        assert!(WordLists::from_dir(dir.path()).is_err());
    }
}
