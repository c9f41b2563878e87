//! Rule-based punctuation normalization, tokenization and lowercasing.
//!
//! The rule table is versioned ([`TOKENIZER_VERSION`]); any change to the
//! tables below must bump it.

pub const TOKENIZER_VERSION: &str = "mmtl-tok v1";

/// Characters rewritten before tokenization.
const CHAR_MAP: &[(char, &str)] = &[
    ('\u{201C}', "\""), // “
    ('\u{201D}', "\""), // ”
    ('\u{201E}', "\""), // „
    ('\u{201F}', "\""), // ‟
    ('\u{00AB}', "\""), // «
    ('\u{00BB}', "\""), // »
    ('\u{2018}', "'"),  // ‘
    ('\u{2019}', "'"),  // ’
    ('\u{201A}', "'"),  // ‚
    ('\u{201B}', "'"),  // ‛
    ('\u{2010}', "-"),  // hyphen
    ('\u{2011}', "-"),  // non-breaking hyphen
    ('\u{2012}', "-"),  // figure dash
    ('\u{2013}', "-"),  // en dash
    ('\u{2014}', "-"),  // em dash
    ('\u{2015}', "-"),  // horizontal bar
    ('\u{2212}', "-"),  // minus sign
    ('\u{2026}', "..."),
];

/// Always split off as standalone tokens. `@` is included so the BPE
/// continuation marker can never occur inside a token.
const SPLIT: &[char] = &[
    '.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']', '{', '}', '@', '/', '\\', '*', '+', '=', '<', '>', '|', '#',
    '$', '%', '&', '^', '~', '`',
];

/// Split off unless flanked by alphanumerics on both sides (`don't`, `t-shirt`).
const WORD_INTERNAL: &[char] = &['\'', '-'];

/// Split off unless flanked by digits on both sides (`3.5`, `1,000`).
const NUMERIC_INTERNAL: &[char] = &['.', ','];

/// Normalizes punctuation, splits it from words and lowercases.
pub fn normalize_line(raw: &str) -> Vec<String> {
    let mut text = String::with_capacity(raw.len());
    for c in raw.chars() {
        match CHAR_MAP.iter().find(|(from, _)| *from == c) {
            Some((_, to)) => text.push_str(to),
            None => text.push(c),
        }
    }
    let text = text.to_lowercase();
    let chars: Vec<char> = text.chars().collect();

    let mut tokens = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, tokens: &mut Vec<String>| {
        if !cur.is_empty() {
            tokens.push(std::mem::take(cur));
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut cur, &mut tokens);
            continue;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let between = |pred: fn(&char) -> bool| prev.is_some_and(|p| pred(&p)) && next.is_some_and(|n| pred(&n));
        let keep = (NUMERIC_INTERNAL.contains(&c) && between(char::is_ascii_digit))
            || (WORD_INTERNAL.contains(&c) && between(|ch| ch.is_alphanumeric()));
        if !keep && (SPLIT.contains(&c) || WORD_INTERNAL.contains(&c)) {
            flush(&mut cur, &mut tokens);
            tokens.push(c.to_string());
        } else {
            cur.push(c);
        }
    }
    flush(&mut cur, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(normalize_line("A man, smiling."), toks(&["a", "man", ",", "smiling", "."]));
        assert_eq!(normalize_line(""), Vec::<String>::new());
        assert_eq!(normalize_line("   \t "), Vec::<String>::new());
    }

    #[test]
    fn curly_quotes_become_straight() {
        assert_eq!(normalize_line("\u{201C}Hello\u{201D}"), toks(&["\"", "hello", "\""]));
    }

    #[test]
    fn dashes_and_internal_punctuation() {
        assert_eq!(normalize_line("a t\u{2013}shirt"), toks(&["a", "t-shirt"]));
        assert_eq!(normalize_line("wait \u{2014} now"), toks(&["wait", "-", "now"]));
        assert_eq!(normalize_line("Don\u{2019}t pay 3.50 or 1,000"), toks(&["don't", "pay", "3.50", "or", "1,000"]));
        assert_eq!(normalize_line("'quoted'"), toks(&["'", "quoted", "'"]));
        assert_eq!(normalize_line("end.Start"), toks(&["end", ".", "start"]));
    }

    #[test]
    fn whitespace_collapses() {
        assert_eq!(normalize_line("two\u{00A0}\u{00A0}words\n"), toks(&["two", "words"]));
    }

    #[test]
    fn marker_characters_are_isolated() {
        assert_eq!(normalize_line("x@@y"), toks(&["x", "@", "@", "y"]));
    }
}
