//! Bias and capability metrics.
//!
//! All likelihoods are char-normalized entropies. Proportion-style metrics
//! credit exact ties 0.5 so a perfectly symmetric model reads exactly 50.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::entropy::{char_normalized_entropy, greedy_decode};
use crate::model::{Tokenizer, TransformerWeights};

use super::dataset::{PairedCase, StereoCase, TaskCase};

/// Entropy of one pair side, averaging the variant-2 alternate ordering when
/// present.
fn side_entropy(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    sentence: &str,
    alt: Option<&str>,
) -> Result<f64> {
    let main = char_normalized_entropy(weights, tokenizer, sentence)?;
    match alt {
        Some(alt) => {
            let alt = char_normalized_entropy(weights, tokenizer, alt)?;
            Ok(0.5 * (main + alt))
        }
        None => Ok(main),
    }
}

/// (H_male, H_female) for one pair.
pub fn pair_entropies(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pair: &PairedCase,
) -> Result<(f64, f64)> {
    let hm = side_entropy(
        weights,
        tokenizer,
        &pair.male_sentence,
        pair.male_sentence_alt.as_deref(),
    )?;
    let hf = side_entropy(
        weights,
        tokenizer,
        &pair.female_sentence,
        pair.female_sentence_alt.as_deref(),
    )?;
    Ok((hm, hf))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanAbsDiff {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Mean |H_male - H_female| over pairs; pairs whose sentences fail the
/// entropy preconditions are skipped and counted.
pub fn mean_abs_entropy_diff(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
) -> Result<MeanAbsDiff> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no paired cases".into()));
    }
    let diffs: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|p| pair_entropies(weights, tokenizer, p).ok().map(|(m, f)| m - f))
        .collect();
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for d in diffs.iter().flatten() {
        sum += d.abs();
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "every pair failed entropy preconditions".into(),
        ));
    }
    Ok(MeanAbsDiff {
        value: sum / n as f64,
        evaluated: n,
        skipped: pairs.len() - n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryBias {
    pub category: String,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    pub mean_abs_entropy_diff: f64,
    pub mean_signed_entropy_diff: f64,
    /// Share (percent) of pairs with H_male < H_female; ties credit 0.5.
    pub proportion_male_lower: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasMetrics {
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    pub mean_abs_entropy_diff: f64,
    pub mean_signed_entropy_diff: f64,
    pub proportion_male_lower: f64,
    pub per_category: Vec<CategoryBias>,
}

fn summarize(diffs: &[f64]) -> (f64, f64, f64) {
    let n = diffs.len() as f64;
    let mean_abs = diffs.iter().map(|d| d.abs()).sum::<f64>() / n;
    let mean_signed = diffs.iter().sum::<f64>() / n;
    let mut credit = 0.0f64;
    for &d in diffs {
        if d < 0.0 {
            credit += 1.0;
        } else if d == 0.0 {
            credit += 0.5;
        }
    }
    (mean_abs, mean_signed, 100.0 * credit / n)
}

/// Entropy-difference evaluation over paired cases, with a per-category
/// breakdown. d = H_male - H_female; proportion counts H_male < H_female.
pub fn entropy_difference_eval(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
) -> Result<BiasMetrics> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no paired cases".into()));
    }
    let diffs: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|p| pair_entropies(weights, tokenizer, p).ok().map(|(m, f)| m - f))
        .collect();

    let mut all = Vec::new();
    let mut by_cat: std::collections::BTreeMap<String, (Vec<f64>, usize)> = Default::default();
    let mut skipped_total = 0usize;
    for (pair, diff) in pairs.iter().zip(diffs.iter()) {
        let cat = pair
            .category
            .map_or_else(|| "uncategorized".to_string(), |c| c.name().to_string());
        let entry = by_cat.entry(cat).or_default();
        match diff {
            Some(d) => {
                all.push(*d);
                entry.0.push(*d);
            }
            None => {
                skipped_total += 1;
                entry.1 += 1;
            }
        }
    }
    if all.is_empty() {
        return Err(Error::InvalidArgument(
            "every pair failed entropy preconditions".into(),
        ));
    }
    let (mean_abs, mean_signed, proportion) = summarize(&all);
    let per_category = by_cat
        .into_iter()
        .filter(|(_, (diffs, _))| !diffs.is_empty())
        .map(|(category, (diffs, skipped))| {
            let (a, s, p) = summarize(&diffs);
            CategoryBias {
                category,
                pairs_evaluated: diffs.len(),
                pairs_skipped: skipped,
                mean_abs_entropy_diff: a,
                mean_signed_entropy_diff: s,
                proportion_male_lower: p,
            }
        })
        .collect();
    Ok(BiasMetrics {
        pairs_evaluated: all.len(),
        pairs_skipped: skipped_total,
        mean_abs_entropy_diff: mean_abs,
        mean_signed_entropy_diff: mean_signed,
        proportion_male_lower: proportion,
        per_category,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StereoMetrics {
    pub lms: f64,
    pub ss: f64,
    pub icat: f64,
    pub cases_evaluated: usize,
    pub cases_skipped: usize,
}

/// ICAT = LMS * min(SS, 100 - SS) / 50.
pub fn icat(lms: f64, ss: f64) -> f64 {
    lms * ss.min(100.0 - ss) / 50.0
}

/// Language-modeling score, stereotype score, and ICAT over stereotype
/// triples. LMS counts min(H_s, H_a) < H_n; SS counts H_s < H_a; exact ties
/// credit 0.5.
pub fn stereoset_eval(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    cases: &[StereoCase],
) -> Result<StereoMetrics> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no stereo cases".into()));
    }
    for case in cases {
        case.validate()?;
    }
    let entropies: Vec<Option<(f64, f64, f64)>> = cases
        .par_iter()
        .map(|c| {
            let hs = char_normalized_entropy(weights, tokenizer, &c.stereotype).ok()?;
            let ha = char_normalized_entropy(weights, tokenizer, &c.anti_stereotype).ok()?;
            let hn = char_normalized_entropy(weights, tokenizer, &c.nonsensical).ok()?;
            Some((hs, ha, hn))
        })
        .collect();
    let mut lms_credit = 0.0f64;
    let mut ss_credit = 0.0f64;
    let mut n = 0usize;
    for e in entropies.iter().flatten() {
        let (hs, ha, hn) = *e;
        let best = hs.min(ha);
        if best < hn {
            lms_credit += 1.0;
        } else if best == hn {
            lms_credit += 0.5;
        }
        if hs < ha {
            ss_credit += 1.0;
        } else if hs == ha {
            ss_credit += 0.5;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "every stereo case failed entropy preconditions".into(),
        ));
    }
    let lms = 100.0 * lms_credit / n as f64;
    let ss = 100.0 * ss_credit / n as f64;
    Ok(StereoMetrics {
        lms,
        ss,
        icat: icat(lms, ss),
        cases_evaluated: n,
        cases_skipped: cases.len() - n,
    })
}

/// Mean absolute char-normalized entropy difference over sentence pairs.
pub fn winogender_eval(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
) -> Result<MeanAbsDiff> {
    mean_abs_entropy_diff(weights, tokenizer, pairs)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Percent correct.
    pub accuracy: f64,
    pub cases: usize,
    /// Cases whose decision was an exact tie (first index taken).
    pub ties: usize,
}

/// Multiple choice by minimum char-normalized entropy of prompt + choice.
pub fn mcq_accuracy(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    cases: &[TaskCase],
) -> Result<AccuracyReport> {
    let mcq: Vec<(&String, &Vec<String>, usize)> = cases
        .iter()
        .map(|c| match c {
            TaskCase::Mcq {
                prompt,
                choices,
                answer_index,
            } => {
                c.validate()?;
                Ok((prompt, choices, *answer_index))
            }
            TaskCase::Arithmetic { .. } => Err(Error::InvalidArgument(
                "arithmetic case passed to mcq_accuracy".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    if mcq.is_empty() {
        return Err(Error::InvalidArgument("no mcq cases".into()));
    }
    let outcomes: Vec<(bool, bool)> = mcq
        .par_iter()
        .map(|(prompt, choices, answer)| -> Result<(bool, bool)> {
            let mut best = 0usize;
            let mut best_h = f64::INFINITY;
            let mut tie = false;
            for (i, choice) in choices.iter().enumerate() {
                let text = format!("{prompt}{choice}");
                let h = char_normalized_entropy(weights, tokenizer, &text)?;
                if h < best_h {
                    best_h = h;
                    best = i;
                    tie = false;
                } else if h == best_h {
                    tie = true;
                }
            }
            Ok((best == *answer, tie))
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = outcomes.iter().filter(|(c, _)| *c).count();
    let ties = outcomes.iter().filter(|(_, t)| *t).count();
    Ok(AccuracyReport {
        accuracy: 100.0 * correct as f64 / outcomes.len() as f64,
        cases: outcomes.len(),
        ties,
    })
}

/// Exact-match accuracy of greedily decoded answers.
pub fn arithmetic_accuracy(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    cases: &[TaskCase],
) -> Result<AccuracyReport> {
    let arith: Vec<(&String, &String)> = cases
        .iter()
        .map(|c| match c {
            TaskCase::Arithmetic { prompt, answer } => {
                c.validate()?;
                Ok((prompt, answer))
            }
            TaskCase::Mcq { .. } => Err(Error::InvalidArgument(
                "mcq case passed to arithmetic_accuracy".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    if arith.is_empty() {
        return Err(Error::InvalidArgument("no arithmetic cases".into()));
    }
    let outcomes: Vec<bool> = arith
        .par_iter()
        .map(|(prompt, answer)| -> Result<bool> {
            let want: Vec<char> = answer.chars().collect();
            let decoded = greedy_decode(weights, tokenizer, prompt, want.len() + 2)?;
            let got: Vec<char> = decoded.chars().take(want.len()).collect();
            Ok(got == want)
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = outcomes.iter().filter(|c| **c).count();
    Ok(AccuracyReport {
        accuracy: 100.0 * correct as f64 / outcomes.len() as f64,
        cases: outcomes.len(),
        ties: 0,
    })
}

/// Combined accuracy over a mixed probe (mcq + arithmetic).
pub fn probe_accuracy(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    cases: &[TaskCase],
) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("empty capability probe".into()));
    }
    let mcq: Vec<TaskCase> = cases
        .iter()
        .filter(|c| matches!(c, TaskCase::Mcq { .. }))
        .cloned()
        .collect();
    let arith: Vec<TaskCase> = cases
        .iter()
        .filter(|c| matches!(c, TaskCase::Arithmetic { .. }))
        .cloned()
        .collect();
    let mut correct = 0.0f64;
    if !mcq.is_empty() {
        let r = mcq_accuracy(weights, tokenizer, &mcq)?;
        correct += r.accuracy / 100.0 * r.cases as f64;
    }
    if !arith.is_empty() {
        let r = arithmetic_accuracy(weights, tokenizer, &arith)?;
        correct += r.accuracy / 100.0 * r.cases as f64;
    }
    Ok(100.0 * correct / cases.len() as f64)
}
