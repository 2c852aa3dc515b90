//! Deriving attribution cases from paired sentences.
//!
//! Each sentence becomes (prompt, target): the prompt is the sentence minus
//! its final word, the target is the first sub-token of that word with its
//! leading space. Both sides of a pair contribute one case (primary
//! orderings only for variant-2 templates).

use crate::attribution::ScoredCase;
use crate::error::{Error, Result};
use crate::eval::dataset::PairedCase;
use crate::model::Tokenizer;

/// (prompt tokens incl. bos, target token) for one sentence.
pub fn scored_case_from_sentence(tokenizer: &Tokenizer, sentence: &str) -> Result<ScoredCase> {
    let trimmed = sentence.trim_end();
    let split = trimmed.rfind(' ').ok_or_else(|| {
        Error::InvalidArgument(format!("sentence `{sentence}` has no final word to score"))
    })?;
    let prompt = &trimmed[..split];
    let target_str = &trimmed[split..]; // includes the leading space
    let target_ids = tokenizer.encode_raw(target_str)?;
    let target = *target_ids
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("empty target in `{sentence}`")))?;
    let tokens = tokenizer.encode(prompt)?;
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "prompt of `{sentence}` encodes to nothing"
        )));
    }
    Ok(ScoredCase { tokens, target })
}

/// Explicit prompt + target word (leading space added when missing).
pub fn scored_case_from_prompt(
    tokenizer: &Tokenizer,
    prompt: &str,
    target_word: &str,
) -> Result<ScoredCase> {
    let target_str = if target_word.starts_with(' ') {
        target_word.to_string()
    } else {
        format!(" {target_word}")
    };
    let target_ids = tokenizer.encode_raw(&target_str)?;
    let target = *target_ids
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty target word".into()))?;
    let tokens = tokenizer.encode(prompt)?;
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("prompt encodes to nothing".into()));
    }
    Ok(ScoredCase { tokens, target })
}

/// Both sides of every pair as scored cases, in pair order (male, female).
pub fn scored_cases_from_pairs(
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
) -> Result<Vec<ScoredCase>> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        out.push(scored_case_from_sentence(tokenizer, &pair.male_sentence)?);
        out.push(scored_case_from_sentence(tokenizer, &pair.female_sentence)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_splits_on_final_word() {
        let tok = Tokenizer::byte_level(true);
        let case = scored_case_from_sentence(&tok, "The nurse is a man").unwrap();
        // Prompt is "The nurse is a" plus bos; target is the space byte of " man".
        assert_eq!(case.tokens[0], 256);
        assert_eq!(case.tokens.len(), 1 + "The nurse is a".len());
        assert_eq!(case.target, u32::from(b' '));
        assert!(scored_case_from_sentence(&tok, "single").is_err());
    }

    #[test]
    fn merged_target_takes_first_subtoken() {
        let tok =
            Tokenizer::byte_level_with_merges(true, &[("Ġ", "m")]).unwrap();
        let case = scored_case_from_sentence(&tok, "The nurse is a man").unwrap();
        assert_eq!(case.target, tok.token_id("Ġm").unwrap());
    }

    #[test]
    fn pairs_yield_two_cases_each() {
        let tok = Tokenizer::byte_level(true);
        let pairs = vec![PairedCase::simple("He is tall", "She is tall")];
        let cases = scored_cases_from_pairs(&tok, &pairs).unwrap();
        assert_eq!(cases.len(), 2);
    }
}
