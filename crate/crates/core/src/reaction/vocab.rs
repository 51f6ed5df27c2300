use std::collections::HashMap;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Bijection between token strings and ids. Ids 0..4 are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Builds a vocabulary from non-reserved tokens; duplicates keep their
    /// first position.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary { tokens: Vec::new(), index: HashMap::new() };
        for r in RESERVED {
            vocab.push(r.to_string());
        }
        for t in tokens {
            vocab.push(t.into());
        }
        vocab
    }

    fn push(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len() as u32);
            self.tokens.push(token);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn lookup(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK)).collect()
    }

    pub fn is_special(id: u32) -> bool {
        id < RESERVED.len() as u32
    }

    /// One token per line; the line number is the id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> io::Result<Self> {
        let tokens: Vec<&str> = text.lines().collect();
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "vocabulary must start with the reserved tokens"));
        }
        let vocab = Vocabulary::from_tokens(tokens[RESERVED.len()..].iter().copied());
        if vocab.len() != tokens.len() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "vocabulary contains duplicate tokens"));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Reserved ids first, then distinct tokens in order of first appearance.
pub fn build_token_vocab<'a, I, S>(corpus: I) -> Vocabulary
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    Vocabulary::from_tokens(corpus.into_iter().flat_map(|seq| seq.iter().map(|t| t.as_ref().to_string())))
}

/// Model-ready ids. The target is framed by BOS and EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub source_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
}

impl EncodedExample {
    pub fn new<S: AsRef<str>>(vocab: &Vocabulary, source: &[S], target: &[S]) -> Self {
        let mut target_ids = Vec::with_capacity(target.len() + 2);
        target_ids.push(BOS);
        target_ids.extend(vocab.encode(target));
        target_ids.push(EOS);
        EncodedExample { source_ids: vocab.encode(source), target_ids }
    }
}
