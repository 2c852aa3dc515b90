//! Byte-level BPE tokenizer.
//!
//! Vocabulary comes from a token→id JSON file, merge rules from a text file
//! with one space-separated pair per line in priority order. Bytes are mapped
//! to printable unicode symbols first (the GPT-2 byte-encoder scheme), so any
//! byte string round-trips through encode/decode.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// GPT-2 style byte<->unicode tables.
fn byte_unicode_tables() -> (HashMap<u8, char>, HashMap<char, u8>) {
    let mut bs: Vec<u16> = (33..=126).chain(161..=172).chain(174..=255).collect();
    let mut cs: Vec<u32> = bs.iter().map(|&b| u32::from(b)).collect();
    let mut n = 0u32;
    for b in 0..=255u16 {
        if !bs.contains(&b) {
            bs.push(b);
            cs.push(256 + n);
            n += 1;
        }
    }
    let mut enc = HashMap::new();
    let mut dec = HashMap::new();
    for (b, c) in bs.iter().zip(cs.iter()) {
        let ch = char::from_u32(*c).expect("valid codepoint");
        enc.insert(*b as u8, ch);
        dec.insert(ch, *b as u8);
    }
    (enc, dec)
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    token_to_id: HashMap<String, u32>,
    id_to_token: HashMap<u32, String>,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), u32>,
    bos_id: Option<u32>,
    byte_encoder: HashMap<u8, char>,
    byte_decoder: HashMap<char, u8>,
}

impl Tokenizer {
    pub fn new(
        vocab: HashMap<String, u32>,
        merges: Vec<(String, String)>,
        bos_id: Option<u32>,
    ) -> Result<Self> {
        let mut id_to_token = HashMap::with_capacity(vocab.len());
        for (tok, id) in &vocab {
            if id_to_token.insert(*id, tok.clone()).is_some() {
                return Err(Error::Tokenizer(format!("duplicate token id {id}")));
            }
        }
        if let Some(bos) = bos_id {
            if !id_to_token.contains_key(&bos) {
                return Err(Error::Tokenizer(format!("bos id {bos} not in vocabulary")));
            }
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            let merged = format!("{}{}", pair.0, pair.1);
            if !vocab.contains_key(&merged) {
                return Err(Error::Tokenizer(format!(
                    "merge `{} {}` produces `{merged}` which is not in the vocabulary",
                    pair.0, pair.1
                )));
            }
            ranks.entry(pair.clone()).or_insert(rank as u32);
        }
        let (byte_encoder, byte_decoder) = byte_unicode_tables();
        Ok(Tokenizer {
            token_to_id: vocab,
            id_to_token,
            merges,
            ranks,
            bos_id,
            byte_encoder,
            byte_decoder,
        })
    }

    /// Minimal tokenizer covering every byte, optionally with a bos token.
    /// The bos string is `<s>` with id 256.
    pub fn byte_level(with_bos: bool) -> Self {
        Self::byte_level_with_merges(with_bos, &[]).expect("byte alphabet is closed")
    }

    /// Byte-level tokenizer extended with explicit merge rules; every merged
    /// token is added to the vocabulary in merge order.
    pub fn byte_level_with_merges(
        with_bos: bool,
        merges: &[(&str, &str)],
    ) -> Result<Self> {
        let (byte_encoder, _) = byte_unicode_tables();
        let mut vocab = HashMap::new();
        for b in 0..=255u8 {
            vocab.insert(byte_encoder[&b].to_string(), u32::from(b));
        }
        let mut next_id = 256u32;
        let bos_id = if with_bos {
            vocab.insert("<s>".to_string(), next_id);
            next_id += 1;
            Some(256)
        } else {
            None
        };
        let mut owned = Vec::with_capacity(merges.len());
        for (a, b) in merges {
            let merged = format!("{a}{b}");
            vocab.entry(merged).or_insert_with(|| {
                let id = next_id;
                next_id += 1;
                id
            });
            owned.push((a.to_string(), b.to_string()));
        }
        Self::new(vocab, owned, bos_id)
    }

    pub fn from_files(
        vocab_path: impl AsRef<Path>,
        merges_path: impl AsRef<Path>,
        bos_id: Option<u32>,
    ) -> Result<Self> {
        let vocab_path = vocab_path.as_ref();
        let text =
            std::fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
        let vocab: HashMap<String, u32> =
            serde_json::from_str(&text).map_err(|e| Error::json(vocab_path, e))?;
        let merges_path = merges_path.as_ref();
        let text =
            std::fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
        let mut merges = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => merges.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(Error::Tokenizer(format!(
                        "malformed merge line `{line}` in {}",
                        merges_path.display()
                    )))
                }
            }
        }
        Self::new(vocab, merges, bos_id)
    }

    pub fn to_files(
        &self,
        vocab_path: impl AsRef<Path>,
        merges_path: impl AsRef<Path>,
    ) -> Result<()> {
        let vocab_path = vocab_path.as_ref();
        // Sorted map for reproducible bytes.
        let sorted: std::collections::BTreeMap<&String, u32> =
            self.token_to_id.iter().map(|(k, v)| (k, *v)).collect();
        let text = serde_json::to_string_pretty(&sorted).expect("vocab serializes");
        std::fs::write(vocab_path, text).map_err(|e| Error::io(vocab_path, e))?;
        let merges_path = merges_path.as_ref();
        let mut lines = String::from("#version: 0.2\n");
        for (a, b) in &self.merges {
            lines.push_str(a);
            lines.push(' ');
            lines.push_str(b);
            lines.push('\n');
        }
        std::fs::write(merges_path, lines).map_err(|e| Error::io(merges_path, e))
    }

    pub fn bos_id(&self) -> Option<u32> {
        self.bos_id
    }

    pub fn vocab_len(&self) -> usize {
        self.token_to_id.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Encode text; prepends bos when the tokenizer carries one.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        let mut ids = Vec::new();
        if let Some(bos) = self.bos_id {
            ids.push(bos);
        }
        ids.extend(self.encode_bytes(text.as_bytes())?);
        Ok(ids)
    }

    /// Encode without any bos, regardless of configuration.
    pub fn encode_raw(&self, text: &str) -> Result<Vec<u32>> {
        self.encode_bytes(text.as_bytes())
    }

    pub fn encode_bytes(&self, bytes: &[u8]) -> Result<Vec<u32>> {
        if bytes.is_empty() {
            return Ok(Vec::new());
        }
        let mut symbols: Vec<String> = bytes
            .iter()
            .map(|b| self.byte_encoder[b].to_string())
            .collect();
        // Apply merges greedily in rank order: repeatedly merge the
        // lowest-ranked pair present anywhere in the sequence.
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..symbols.len().saturating_sub(1) {
                let key = (symbols[i].clone(), symbols[i + 1].clone());
                if let Some(&rank) = self.ranks.get(&key) {
                    if best.map_or(true, |(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let (a, b) = self.merges[rank as usize].clone();
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
                    merged.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    merged.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
            .iter()
            .map(|s| {
                self.token_to_id
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Tokenizer(format!("symbol `{s}` not in vocabulary")))
            })
            .collect()
    }

    /// Decode ids back to text. The bos token decodes to nothing.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let bytes = self.decode_bytes(ids)?;
        String::from_utf8(bytes)
            .map_err(|e| Error::Tokenizer(format!("decoded bytes are not UTF-8: {e}")))
    }

    pub fn decode_bytes(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            if Some(id) == self.bos_id {
                continue;
            }
            let token = self
                .id_to_token
                .get(&id)
                .ok_or(Error::UnknownTokenId(id))?;
            for ch in token.chars() {
                let byte = self
                    .byte_decoder
                    .get(&ch)
                    .ok_or_else(|| Error::Tokenizer(format!("token `{token}` holds non-byte symbol")))?;
                out.push(*byte);
            }
        }
        Ok(out)
    }

    /// String form of a single token id (raw bytes, lossy for display).
    pub fn token_text(&self, id: u32) -> Result<String> {
        let token = self
            .id_to_token
            .get(&id)
            .ok_or(Error::UnknownTokenId(id))?;
        let bytes: Vec<u8> = token
            .chars()
            .filter_map(|c| self.byte_decoder.get(&c).copied())
            .collect();
        if bytes.is_empty() {
            Ok(token.clone())
        } else {
            Ok(String::from_utf8_lossy(&bytes).into_owned())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn byte_tables_are_bijective() {
        let (enc, dec) = byte_unicode_tables();
        assert_eq!(enc.len(), 256);
        assert_eq!(dec.len(), 256);
        for b in 0..=255u8 {
            assert_eq!(dec[&enc[&b]], b);
        }
    }

    #[test]
    fn round_trip_simple_text() {
        let tok = Tokenizer::byte_level(true);
        let ids = tok.encode("The nurse is a").unwrap();
        assert_eq!(ids[0], 256);
        assert_eq!(tok.decode(&ids).unwrap(), "The nurse is a");
    }

    #[test]
    fn empty_input_with_bos() {
        let tok = Tokenizer::byte_level(true);
        assert_eq!(tok.encode("").unwrap(), vec![256]);
        let tok = Tokenizer::byte_level(false);
        assert!(tok.encode("").unwrap().is_empty());
    }

    #[test]
    fn merges_apply_in_rank_order() {
        // "hello world" splits into exactly two tokens once the merge chain
        // builds "hello" and "Ġworld".
        let merges = [
            ("h", "e"),
            ("l", "l"),
            ("he", "ll"),
            ("hell", "o"),
            ("w", "o"),
            ("r", "l"),
            ("wo", "rl"),
            ("worl", "d"),
            ("Ġ", "world"),
        ];
        let tok = Tokenizer::byte_level_with_merges(false, &merges).unwrap();
        let ids = tok.encode("hello world").unwrap();
        assert_eq!(ids.len(), 2, "got {:?}", ids);
        assert_eq!(tok.decode(&ids).unwrap(), "hello world");
    }

    #[test]
    fn unknown_id_in_decode() {
        let tok = Tokenizer::byte_level(false);
        assert!(matches!(
            tok.decode(&[9999]),
            Err(Error::UnknownTokenId(9999))
        ));
    }

    #[test]
    fn round_trip_random_byte_strings() {
        let tok = Tokenizer::byte_level(true);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let len = rng.random_range(0..64);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let ids = tok.encode_bytes(&bytes).unwrap();
            assert_eq!(tok.decode_bytes(&ids).unwrap(), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let merges = [("a", "b"), ("ab", "c")];
        let tok = Tokenizer::byte_level_with_merges(true, &merges).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let vocab = dir.path().join("vocab.json");
        let mfile = dir.path().join("merges.txt");
        tok.to_files(&vocab, &mfile).unwrap();
        let back = Tokenizer::from_files(&vocab, &mfile, Some(256)).unwrap();
        let ids = tok.encode("abc abx").unwrap();
        assert_eq!(back.encode("abc abx").unwrap(), ids);
        assert_eq!(back.decode(&ids).unwrap(), "abc abx");
    }

    #[test]
    fn merge_referencing_missing_token_is_rejected() {
        let mut vocab = HashMap::new();
        vocab.insert("a".to_string(), 0u32);
        vocab.insert("b".to_string(), 1u32);
        let err = Tokenizer::new(vocab, vec![("a".into(), "b".into())], None).unwrap_err();
        assert!(err.to_string().contains("ab"));
    }
}
