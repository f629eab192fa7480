//! Whitespace tokenization helpers shared by every module.
//!
//! Tokens are whitespace-delimited and keep their punctuation. Lexical
//! matching looks at a token's lowercase *core*: the token with leading and
//! trailing non-alphanumeric characters stripped.

pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn owned_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses whitespace runs to single spaces and trims both ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits a token into (leading punctuation, core, trailing punctuation).
pub fn split_affixes(token: &str) -> (&str, &str, &str) {
    let start = token
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i);
    let Some(start) = start else {
        return (token, "", "");
    };
    let end = token
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(token.len());
    (&token[..start], &token[start..end], &token[end..])
}

pub fn core_lower(token: &str) -> String {
    split_affixes(token).1.to_lowercase()
}

/// Replaces the core of `token` with `word`, keeping its punctuation.
pub fn replace_core(token: &str, word: &str) -> String {
    let (pre, _, post) = split_affixes(token);
    format!("{pre}{word}{post}")
}

/// Lowercased, trimmed answer key; multi-word answers keep single spaces.
pub fn answer_key(answer: &str) -> String {
    normalize_ws(&answer.to_lowercase())
}

pub fn is_single_token(word: &str) -> bool {
    word.split_whitespace().count() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affixes() {
        assert_eq!(split_affixes("bench."), ("", "bench", "."));
        assert_eq!(split_affixes("\"Red,\""), ("\"", "Red", ",\""));
        assert_eq!(split_affixes("what's"), ("", "what's", ""));
        assert_eq!(split_affixes("..."), ("...", "", ""));
        assert_eq!(core_lower("Giraffe?"), "giraffe");
        assert_eq!(replace_core("dog,", "cat"), "cat,");
    }

    #[test]
    fn whitespace() {
        assert_eq!(normalize_ws("  a \t b\n c "), "a b c");
        assert_eq!(word_count("  "), 0);
        assert_eq!(word_count("a man, riding."), 3);
    }
}
