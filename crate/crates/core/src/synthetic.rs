//! Hand-constructed models and probes for validation.
//!
//! These fixtures plant known circuits inside otherwise inert or random
//! weights so that attribution, filtering, and editing behavior can be
//! checked against ground truth: a biased neuron writing a gendered logit
//! direction, a start-position neuron feeding an attention carrier, a
//! capability neuron that common-task accuracy depends on, and a two-layer
//! chain whose downstream coefficient flips sign when the upstream neuron is
//! masked.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::eval::dataset::{generate_commonwords, PairedCase, TaskCase, WordLists};
use crate::eval::templates::Category;
use crate::forward::forward;
use crate::model::{
    random_model, zero_model, Activation, FfnFamily, ModelConfig, NeuronId, NeuronKind,
    NormFamily, PositionFamily, Tokenizer, TransformerWeights,
};

/// Token ids of the two gender terms as they appear in sentences
/// (space-prefixed single tokens).
#[derive(Debug, Clone, Copy)]
pub struct GenderTokens {
    pub male: u32,
    pub female: u32,
}

/// Byte-level tokenizer whose merges make "him"/"her" (and their
/// space-prefixed forms) single tokens. Equal-length terms keep char
/// normalization from introducing its own asymmetry.
pub fn gendered_tokenizer() -> (Tokenizer, GenderTokens) {
    let merges = [
        ("i", "m"),
        ("h", "im"),
        ("e", "r"),
        ("h", "er"),
        ("Ġ", "him"),
        ("Ġ", "her"),
    ];
    let tok = Tokenizer::byte_level_with_merges(true, &merges).expect("closed merge set");
    let male = tok.token_id("Ġhim").expect("merged token");
    let female = tok.token_id("Ġher").expect("merged token");
    (tok, GenderTokens { male, female })
}

pub const GENDER_TERMS: (&str, &str) = ("him", "her");

/// The 10-word-per-category sample lists shipped with the crate.
pub fn sample_wordlists() -> WordLists {
    let mut wl = WordLists::default();
    let files: [(Category, &str); 5] = [
        (
            Category::Trait,
            include_str!("../data/commonwords_sample/trait.txt"),
        ),
        (
            Category::Action,
            include_str!("../data/commonwords_sample/action.txt"),
        ),
        (
            Category::Profession,
            include_str!("../data/commonwords_sample/profession.txt"),
        ),
        (
            Category::Hobby,
            include_str!("../data/commonwords_sample/hobby.txt"),
        ),
        (
            Category::Color,
            include_str!("../data/commonwords_sample/color.txt"),
        ),
    ];
    for (cat, text) in files {
        wl.insert(
            cat,
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        );
    }
    wl
}

/// Two words per category; enough pairs to exercise every code path fast.
pub fn small_wordlists() -> WordLists {
    let mut wl = WordLists::default();
    wl.insert(Category::Trait, vec!["brave".into(), "kind".into()]);
    wl.insert(Category::Action, vec!["teach".into(), "lead".into()]);
    wl.insert(Category::Profession, vec!["nurse".into(), "guard".into()]);
    wl.insert(Category::Hobby, vec!["gaming".into(), "baking".into()]);
    wl.insert(Category::Color, vec!["pink".into(), "blue".into()]);
    wl
}

/// Multiple-choice probe whose correct choice always contains the marker
/// byte `Z`; a model that boosts `Z` scores 100.
pub fn marker_mcq_probe(seed: u64, n: usize) -> Vec<TaskCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Letters that cannot participate in the gendered tokenizer's merges,
    // so every choice stays exactly three tokens.
    let letters: Vec<char> = ('a'..='y')
        .filter(|c| !matches!(c, 'e' | 'h' | 'i' | 'm' | 'r'))
        .collect();
    (0..n)
        .map(|_| {
            let l1 = letters[rng.random_range(0..letters.len())];
            let l2 = letters[rng.random_range(0..letters.len())];
            let mut wrong = || letters[rng.random_range(0..letters.len())];
            let (w1, w2) = (wrong(), wrong());
            let answer_index = rng.random_range(0..3usize);
            let mut choices = vec![
                format!("{l1}{w1}{l2}"),
                format!("{l1}{w2}{l2}"),
            ];
            choices.insert(answer_index, format!("{l1}Z{l2}"));
            TaskCase::Mcq {
                prompt: "pick: ".into(),
                choices,
                answer_index,
            }
        })
        .collect()
}

fn unit(d: usize, axis: usize, scale: f32) -> Array1<f32> {
    let mut v = Array1::<f32>::zeros(d);
    v[axis] = scale;
    v
}

// Axis layout of the planted-bias model.
const AX_CONTENT: usize = 0; // every non-bos embedding
const AX_GENDER: usize = 1; // unembedding offset: +5 for male term, -5 for female
const AX_MARKER: usize = 2; // 'Z' logit boost
const AX_GENERAL: usize = 3; // written by the start-position neuron
const AX_CARRIER: usize = 4; // attention carrier output, read by both gender rows
const AX_BOS: usize = 5; // bos embedding

/// A planted-bias model plus the datasets to analyze it with.
pub struct PlantedBias {
    pub weights: TransformerWeights,
    pub tokenizer: Tokenizer,
    pub gender_tokens: GenderTokens,
    /// Writes the gendered logit direction on every content position.
    pub bias_neuron: NeuronId,
    /// Boosts the probe marker; masking it collapses probe accuracy.
    pub capability_neuron: NeuronId,
    /// Fires only at position 0 and feeds the attention carrier.
    pub general_neuron: NeuronId,
    /// Transfers the position-0 signal to later positions.
    pub carrier_neuron: NeuronId,
    pub pairs: Vec<PairedCase>,
    pub probe: Vec<TaskCase>,
}

/// Build the planted-bias model:
///
/// * layer 0 FFN 5 — "general" neuron gated by the bos axis, so it only
///   fires at position 0, writing the general axis;
/// * layer 1 head 0 neuron 2 — carrier whose subkey reads the general axis
///   (dominant position 0) and whose subvalue raises both gender rows
///   equally;
/// * layer 1 FFN 3 — bias neuron gated by the content axis, writing the
///   gendered logit direction (+male / -female);
/// * layer 1 FFN 7 — capability neuron gated by content, boosting the probe
///   marker 'Z' and echoing the general axis so it ranks as a query neuron.
///
/// All other neuron rows are exactly zero. Gender rows of the unembedding
/// are identical except on the gender axis and nothing writes that axis but
/// the bias neuron, so masking it removes the pair asymmetry bit-exactly.
pub fn planted_bias_model() -> PlantedBias {
    let (tokenizer, gender_tokens) = gendered_tokenizer();
    let vocab_size = tokenizer.vocab_len();
    let d = 16usize;
    let config = ModelConfig {
        n_layers: 2,
        d_model: d,
        n_heads: 1,
        d_head: d,
        d_ffn: 12,
        vocab_size,
        context_limit: 128,
        ffn_family: FfnFamily::SingleGate,
        norm_family: NormFamily::PreRmsnorm,
        position_family: PositionFamily::Rotary,
        activation: Some(Activation::Relu),
        bos_token_id: 256,
        add_bos: true,
    };
    let mut w = zero_model(&config).expect("valid config");

    // Embeddings: pure content axis for every token, bos axis for bos.
    for id in 0..vocab_size {
        w.embedding.row_mut(id).assign(&unit(d, AX_CONTENT, 1.0));
    }
    w.embedding.row_mut(256).assign(&unit(d, AX_BOS, 1.0));

    // Unembedding: small noise everywhere, structured rows on top.
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let noise = Normal::new(0.0f64, 0.05).expect("valid normal");
    for mut row in w.unembedding.rows_mut() {
        for v in row.iter_mut() {
            *v = noise.sample(&mut rng) as f32;
        }
    }
    let male = gender_tokens.male as usize;
    let female = gender_tokens.female as usize;
    // Gender rows: identical base (carrier + marker components included),
    // then +/- on the gender axis only.
    let mut base = w.unembedding.row(male).to_owned();
    base[AX_GENDER] = 0.0;
    base = base + unit(d, AX_CARRIER, 3.0) + unit(d, AX_MARKER, 3.0);
    w.unembedding
        .row_mut(male)
        .assign(&(&base + &unit(d, AX_GENDER, 5.0)));
    w.unembedding
        .row_mut(female)
        .assign(&(&base - &unit(d, AX_GENDER, 5.0)));
    // The bare (not space-prefixed) forms can show up inside ordinary words;
    // keep them gender-neutral so only the slot tokens differ.
    for (a, b) in [("him", "her"), ("im", "er")] {
        let ia = tokenizer.token_id(a).unwrap() as usize;
        let ib = tokenizer.token_id(b).unwrap() as usize;
        let row = w.unembedding.row(ia).to_owned();
        w.unembedding.row_mut(ib).assign(&row);
    }
    // Marker row: the capability axis only, no noise.
    w.unembedding
        .row_mut(b'Z' as usize)
        .assign(&unit(d, AX_MARKER, 6.0));

    // Unit-normalizing norms (scale 1/sqrt(d) turns RMS norm into x/|x|).
    let norm_scale = 1.0 / (d as f32).sqrt();
    for layer in &mut w.layers {
        layer.norm1.scale.fill(norm_scale);
        layer.norm2.scale.fill(norm_scale);
    }
    w.final_norm.scale.fill(norm_scale);

    // Layer 0: general neuron, gated by the bos axis.
    let general_neuron = NeuronId::ffn(0, 5);
    w.layers[0].fc1.row_mut(5).assign(&unit(d, AX_BOS, 8.0));
    w.layers[0].fc2.column_mut(5).assign(&unit(d, AX_GENERAL, 4.0));

    // Layer 1 attention: carrier neuron (uniform attention, W_q = W_k = 0).
    let carrier_neuron = NeuronId::attn(1, 0, 2);
    w.layers[1].w_v.row_mut(2).assign(&unit(d, AX_GENERAL, 6.0));
    w.layers[1].w_o.column_mut(2).assign(&unit(d, AX_CARRIER, 2.0));

    // Layer 1 FFN: bias neuron and capability neuron, both content-gated.
    let bias_neuron = NeuronId::ffn(1, 3);
    w.layers[1].fc1.row_mut(3).assign(&unit(d, AX_CONTENT, 4.0));
    w.layers[1].fc2.column_mut(3).assign(&unit(d, AX_GENDER, 3.0));

    let capability_neuron = NeuronId::ffn(1, 7);
    w.layers[1].fc1.row_mut(7).assign(&unit(d, AX_CONTENT, 4.0));
    w.layers[1]
        .fc2
        .column_mut(7)
        .assign(&(unit(d, AX_MARKER, 3.0) + unit(d, AX_GENERAL, 1.0)));

    let pairs = generate_commonwords(&small_wordlists(), GENDER_TERMS).expect("valid lists");
    let probe = marker_mcq_probe(77, 100);

    PlantedBias {
        weights: w,
        tokenizer,
        gender_tokens,
        bias_neuron,
        capability_neuron,
        general_neuron,
        carrier_neuron,
        pairs,
        probe,
    }
}

/// Random-weight model made exactly gender-symmetric: the two gender terms
/// share embedding and unembedding rows, so every paired metric ties.
pub struct SymmetricModel {
    pub weights: TransformerWeights,
    pub tokenizer: Tokenizer,
    pub gender_tokens: GenderTokens,
    pub pairs: Vec<PairedCase>,
}

pub fn symmetric_model(seed: u64) -> SymmetricModel {
    let (tokenizer, gender_tokens) = gendered_tokenizer();
    let config = ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_head: 8,
        d_ffn: 12,
        vocab_size: tokenizer.vocab_len(),
        context_limit: 128,
        ffn_family: FfnFamily::SingleGate,
        norm_family: NormFamily::PreRmsnorm,
        position_family: PositionFamily::Rotary,
        activation: Some(Activation::Gelu),
        bos_token_id: 256,
        add_bos: true,
    };
    let mut weights = random_model(&config, seed).expect("valid config");
    let male = gender_tokens.male as usize;
    let female = gender_tokens.female as usize;
    let e = weights.embedding.row(male).to_owned();
    weights.embedding.row_mut(female).assign(&e);
    let u = weights.unembedding.row(male).to_owned();
    weights.unembedding.row_mut(female).assign(&u);
    let pairs = generate_commonwords(&small_wordlists(), GENDER_TERMS).expect("valid lists");
    SymmetricModel {
        weights,
        tokenizer,
        gender_tokens,
        pairs,
    }
}

/// One strongly planted value neuron inside a random model.
pub struct PlantedNeuron {
    pub weights: TransformerWeights,
    pub tokens: Vec<u32>,
    pub target: u32,
    pub id: NeuronId,
}

/// Plant a value neuron of the requested kind into a random model: its
/// subkey is aligned with the actual (attention-weighted) input at the final
/// position and its subvalue with the target's unembedding row, so it
/// dominates every other neuron's importance.
pub fn plant_value_neuron(seed: u64, kind: NeuronKind) -> Result<PlantedNeuron> {
    let config = ModelConfig {
        n_layers: 2,
        d_model: 24,
        n_heads: 2,
        d_head: 12,
        d_ffn: 16,
        vocab_size: 64,
        context_limit: 32,
        ffn_family: FfnFamily::SingleGate,
        norm_family: NormFamily::PreRmsnorm,
        position_family: PositionFamily::Rotary,
        activation: Some(Activation::Gelu),
        bos_token_id: 0,
        add_bos: true,
    };
    let mut weights = random_model(&config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let tokens: Vec<u32> = std::iter::once(0)
        .chain((0..7).map(|_| rng.random_range(1..64u32)))
        .collect();
    let target: u32 = rng.random_range(1..64);
    let layer = (seed as usize) % config.n_layers;
    let t = tokens.len() - 1;

    let trace = forward(&weights, &tokens)?;
    let target_dir = {
        let row = weights.unembedding.row(target as usize);
        let norm = row.dot(&row).sqrt().max(1e-6);
        row.mapv(|v| v / norm)
    };

    let id = match kind {
        NeuronKind::Ffn => {
            let index = (seed as usize * 7 + 3) % config.d_ffn;
            let x = trace.layers[layer].ffn_input.row(t);
            let norm = x.dot(&x).sqrt().max(1e-6);
            let aligned = x.mapv(|v| 3.0 * v / norm);
            weights.layers[layer].fc1.row_mut(index).assign(&aligned);
            weights.layers[layer]
                .fc2
                .column_mut(index)
                .assign(&target_dir);
            NeuronId::ffn(layer, index)
        }
        NeuronKind::Attn => {
            let head = (seed as usize) % config.n_heads;
            let index = (seed as usize * 5 + 1) % config.d_head;
            let lt = &trace.layers[layer];
            let alpha = lt.attn_scores[head].row(t);
            let mut pooled = Array1::<f32>::zeros(config.d_model);
            for p in 0..=t {
                pooled = pooled + lt.attn_input.row(p).mapv(|v| v * alpha[p]);
            }
            let norm = pooled.dot(&pooled).sqrt().max(1e-6);
            let aligned = pooled.mapv(|v| 4.0 * v / norm);
            let row = head * config.d_head + index;
            weights.layers[layer].w_v.row_mut(row).assign(&aligned);
            weights.layers[layer].w_o.column_mut(row).assign(&target_dir);
            NeuronId::attn(layer, head, index)
        }
    };
    Ok(PlantedNeuron {
        weights,
        tokens,
        target,
        id,
    })
}

/// Two-layer chain: masking the upstream neuron flips the sign of the
/// downstream neuron's coefficient.
pub struct PlantedChain {
    pub weights: TransformerWeights,
    pub tokenizer: Tokenizer,
    pub upstream: NeuronId,
    pub downstream: NeuronId,
    pub prompt: &'static str,
}

const AX_CHAIN_LINK: usize = 6; // written by upstream, read by downstream
const AX_CHAIN_BASE: usize = 7; // present in every content embedding

/// Gated-family model where the downstream neuron's up-projection reads
/// +link -base. With the upstream neuron active the link term dominates
/// (positive coefficient); masked, only -base remains (negative).
pub fn planted_chain_model() -> PlantedChain {
    let tokenizer = Tokenizer::byte_level(true);
    let d = 16usize;
    let config = ModelConfig {
        n_layers: 2,
        d_model: d,
        n_heads: 1,
        d_head: d,
        d_ffn: 8,
        vocab_size: 257,
        context_limit: 64,
        ffn_family: FfnFamily::Gated,
        norm_family: NormFamily::PreRmsnorm,
        position_family: PositionFamily::Rotary,
        activation: Some(Activation::Silu),
        bos_token_id: 256,
        add_bos: true,
    };
    let mut w = zero_model(&config).expect("valid config");
    for id in 0..=255usize {
        w.embedding
            .row_mut(id)
            .assign(&(unit(d, AX_CONTENT, 1.0) + unit(d, AX_CHAIN_BASE, 0.5)));
    }
    w.embedding.row_mut(256).assign(&unit(d, AX_BOS, 1.0));
    for row in 0..config.vocab_size {
        w.unembedding[(row, AX_GENDER)] = 0.1 * (row as f32 % 7.0 - 3.0);
    }

    let upstream = NeuronId::ffn(0, 2);
    let gate = |w: &mut TransformerWeights, l: usize, k: usize| {
        w.layers[l]
            .gate
            .as_mut()
            .expect("gated family")
            .row_mut(k)
            .assign(&unit(d, AX_CONTENT, 5.0));
    };
    gate(&mut w, 0, 2);
    w.layers[0].fc1.row_mut(2).assign(&unit(d, AX_CONTENT, 5.0));
    w.layers[0]
        .fc2
        .column_mut(2)
        .assign(&unit(d, AX_CHAIN_LINK, 4.0));

    let downstream = NeuronId::ffn(1, 4);
    gate(&mut w, 1, 4);
    // Placeholder up-projection; calibrated below from the actual stream.
    w.layers[1]
        .fc1
        .row_mut(4)
        .assign(&(unit(d, AX_CHAIN_LINK, 1.0) - unit(d, AX_CHAIN_BASE, 1.0)));
    w.layers[1].fc2.column_mut(4).assign(&unit(d, AX_GENDER, 2.0));

    let prompt = "3+5=";
    let tokens = tokenizer.encode(prompt).expect("byte text");
    let trace = forward(&w, &tokens).expect("forward");
    let x = trace.layers[1].ffn_input.row(tokens.len() - 1);
    let link = x[AX_CHAIN_LINK].max(1e-4);
    let base = x[AX_CHAIN_BASE].max(1e-4);
    // up . x = 2*base with the link present, -base without it.
    let calibrated =
        unit(d, AX_CHAIN_LINK, 3.0 * base / link) - unit(d, AX_CHAIN_BASE, 1.0);
    w.layers[1].fc1.row_mut(4).assign(&calibrated);

    PlantedChain {
        weights: w,
        tokenizer,
        upstream,
        downstream,
        prompt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editing::mask_neurons;
    use crate::eval::metrics::{entropy_difference_eval, mcq_accuracy, probe_accuracy};
    use crate::eval::scored_cases_from_pairs;

    #[test]
    fn gendered_tokenizer_merges_terms() {
        let (tok, g) = gendered_tokenizer();
        let ids = tok.encode_raw(" him").unwrap();
        assert_eq!(ids, vec![g.male]);
        let ids = tok.encode_raw(" her").unwrap();
        assert_eq!(ids, vec![g.female]);
        assert_eq!(tok.decode(&[g.male, g.female]).unwrap(), " him her");
    }

    #[test]
    fn sample_wordlists_have_ten_words_each() {
        let wl = sample_wordlists();
        assert_eq!(wl.lists.len(), 5);
        for words in wl.lists.values() {
            assert_eq!(words.len(), 10);
        }
        let pairs = generate_commonwords(&wl, ("man", "woman")).unwrap();
        assert_eq!(pairs.len(), 200);
    }

    #[test]
    fn planted_bias_shows_bias_and_passes_probe() {
        let pb = planted_bias_model();
        let metrics =
            entropy_difference_eval(&pb.weights, &pb.tokenizer, &pb.pairs).unwrap();
        assert!(
            metrics.mean_abs_entropy_diff > 1e-4,
            "planted bias too small: {}",
            metrics.mean_abs_entropy_diff
        );
        assert_eq!(metrics.proportion_male_lower, 100.0);
        let acc = mcq_accuracy(&pb.weights, &pb.tokenizer, &pb.probe).unwrap();
        assert_eq!(acc.accuracy, 100.0);
    }

    #[test]
    fn masking_planted_bias_neuron_removes_asymmetry_exactly() {
        let pb = planted_bias_model();
        let masked = mask_neurons(&pb.weights, &[pb.bias_neuron]).unwrap();
        let metrics = entropy_difference_eval(&masked, &pb.tokenizer, &pb.pairs).unwrap();
        assert_eq!(metrics.mean_abs_entropy_diff, 0.0);
        assert_eq!(metrics.proportion_male_lower, 50.0);
        let acc = mcq_accuracy(&masked, &pb.tokenizer, &pb.probe).unwrap();
        assert_eq!(acc.accuracy, 100.0, "bias edit must not touch the probe");
    }

    #[test]
    fn masking_capability_neuron_collapses_probe() {
        let pb = planted_bias_model();
        let masked = mask_neurons(&pb.weights, &[pb.capability_neuron]).unwrap();
        let acc = probe_accuracy(&masked, &pb.tokenizer, &pb.probe).unwrap();
        assert!(acc < 60.0, "probe should collapse, got {acc}");
    }

    #[test]
    fn general_neuron_fires_only_at_start() {
        let pb = planted_bias_model();
        let cases = scored_cases_from_pairs(&pb.tokenizer, &pb.pairs[..4]).unwrap();
        for case in &cases {
            let trace = forward(&pb.weights, &case.tokens).unwrap();
            let m = trace.ffn_coefficients(0).unwrap();
            assert!(m[(0, 5)] > 1.0);
            for i in 1..case.tokens.len() {
                assert_eq!(m[(i, 5)], 0.0);
            }
        }
    }

    #[test]
    fn symmetric_model_ties_every_pair() {
        let sm = symmetric_model(3);
        let metrics =
            entropy_difference_eval(&sm.weights, &sm.tokenizer, &sm.pairs).unwrap();
        assert_eq!(metrics.mean_abs_entropy_diff, 0.0);
        assert_eq!(metrics.proportion_male_lower, 50.0);
    }

    #[test]
    fn chain_flips_downstream_sign() {
        let chain = planted_chain_model();
        let tokens = chain.tokenizer.encode(chain.prompt).unwrap();
        let t = tokens.len() - 1;
        let before = forward(&chain.weights, &tokens).unwrap();
        let coef_before =
            before.layers[1].coefficients[(t, chain.downstream.index)];
        let masked = mask_neurons(&chain.weights, &[chain.upstream]).unwrap();
        let after = forward(&masked, &tokens).unwrap();
        let coef_after = after.layers[1].coefficients[(t, chain.downstream.index)];
        assert!(coef_before > 0.0, "before: {coef_before}");
        assert!(coef_after < 0.0, "after: {coef_after}");
    }
}
