use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

use super::SmilesError;

/// Atom-wise SMILES token pattern. Alternatives are tried in order, so the
/// two-letter halogens win over their one-letter prefixes.
pub const TOKEN_PATTERN: &str = r"(\[[^\]]+]|Br?|Cl?|N|O|S|P|F|I|b|c|n|o|s|p|\(|\)|\.|=|#|-|\+|\\|\/|:|~|@|\?|>|\*|\$|%[0-9]{2}|[0-9])";

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"\A{TOKEN_PATTERN}")).expect("token pattern compiles"))
}

/// One lexeme of a SMILES string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits `smiles` into tokens, returning each token with its byte offset.
pub(crate) fn tokenize_spans(smiles: &str) -> Result<Vec<(usize, &str)>, SmilesError> {
    let re = token_regex();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < smiles.len() {
        match re.find(&smiles[pos..]) {
            Some(m) => {
                out.push((pos, &smiles[pos..pos + m.end()]));
                pos += m.end();
            }
            None => {
                let ch = smiles[pos..].chars().next().expect("pos is within the string");
                return Err(SmilesError::UnrecognizedCharacter { position: pos, ch });
            }
        }
    }
    Ok(out)
}

pub fn tokenize(smiles: &str) -> Result<Vec<Token>, SmilesError> {
    Ok(tokenize_spans(smiles)?.into_iter().map(|(_, t)| Token(t.to_string())).collect())
}

pub fn detokenize<T: AsRef<str>>(tokens: &[T]) -> String {
    tokens.iter().map(AsRef::as_ref).collect()
}
