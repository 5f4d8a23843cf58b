//! Tokenizers compatible with SacreBLEU's `13a` (mteval-v13a) and `zh` modes.

use std::sync::OnceLock;

use regex::Regex;

use crate::corpus::Lang;

struct PostTokenizer {
    rules: [(Regex, &'static str); 4],
}

fn post_tokenizer() -> &'static PostTokenizer {
    static RULES: OnceLock<PostTokenizer> = OnceLock::new();
    RULES.get_or_init(|| PostTokenizer {
        rules: [
            // Symbols and punctuation except apostrophe, comma, hyphen and period.
            (Regex::new(r"([\{-~\[-`\x20-&\(-\+:-@/])").unwrap(), " $1 "),
            // Periods and commas unless both neighbours are digits.
            (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
            (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
            // Dash following a digit.
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ],
    })
}

/// Whitespace as understood by Python's `str.split()`, which additionally
/// treats the ASCII separators U+001C..U+001F as whitespace.
fn is_py_whitespace(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn collapse_whitespace(s: &str) -> String {
    s.split(is_py_whitespace)
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn post_tokenize(line: &str) -> String {
    let mut line = line.to_owned();
    for (re, rep) in &post_tokenizer().rules {
        line = re.replace_all(&line, *rep).into_owned();
    }
    collapse_whitespace(&line)
}

/// mteval-v13a tokenization.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    post_tokenize(&format!(" {line} "))
}

// Code point ranges treated as Chinese characters. Two entries of the
// reference table are written as five-digit `\uXXXXX` escapes, which the
// reference compares as two-character strings; the effective ranges that
// result (U+2001..=U+2A6D and U+2F81..=U+2FA1) are reproduced here.
const CHINESE_RANGES: &[(u32, u32)] = &[
    (0x3400, 0x4db5),
    (0x4e00, 0x9fa5),
    (0x9fa6, 0x9fbb),
    (0xf900, 0xfa2d),
    (0xfa30, 0xfa6a),
    (0xfa70, 0xfad9),
    (0x2001, 0x2a6d),
    (0x2f81, 0x2fa1),
    (0xff00, 0xffef),
    (0x2e80, 0x2eff),
    (0x3000, 0x303f),
    (0x31c0, 0x31ef),
    (0x2f00, 0x2fdf),
    (0x2ff0, 0x2fff),
    (0x3100, 0x312f),
    (0x31a0, 0x31bf),
    (0xfe10, 0xfe1f),
    (0xfe30, 0xfe4f),
    (0x2600, 0x26ff),
    (0x2700, 0x27bf),
    (0x3200, 0x32ff),
    (0x3300, 0x33ff),
];

pub fn is_chinese_char(c: char) -> bool {
    let cp = c as u32;
    CHINESE_RANGES
        .iter()
        .any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

/// Character-level tokenization for Chinese; other text follows the 13a rules
/// (without the markup unescaping step).
pub fn tokenize_zh(line: &str) -> String {
    let line = line.trim_matches(is_py_whitespace);
    let mut spaced = String::with_capacity(line.len() * 3);
    for c in line.chars() {
        if is_chinese_char(c) {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    post_tokenize(&spaced)
}

/// Tokens used by BLEU and ROUGE for text in `lang`.
pub fn tokens(text: &str, lang: Lang) -> Vec<String> {
    let text = text.trim_end_matches(is_py_whitespace);
    let joined = match lang {
        Lang::Zh => tokenize_zh(text),
        Lang::En | Lang::De => tokenize_13a(text),
    };
    joined
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_a_splits_punctuation() {
        assert_eq!(
            tokenize_13a("Hello, world. It's 3.5 a-b"),
            "Hello , world . It's 3.5 a-b"
        );
        assert_eq!(tokenize_13a("He said \"no\"!"), "He said \" no \" !");
        assert_eq!(
            tokenize_13a("1954-1960 (approx.)"),
            "1954 - 1960 ( approx . )"
        );
        assert_eq!(tokenize_13a("a &amp; b"), "a & b");
    }

    #[test]
    fn zh_splits_characters() {
        assert_eq!(
            tokenize_zh("我们“是”的 hello, world. 3.5 a-b"),
            "我 们 “ 是 ” 的 hello , world . 3.5 a-b"
        );
        assert_eq!(tokenize_zh("他1954年出生。"), "他 1954 年 出 生 。");
    }

    #[test]
    fn reference_range_quirk_is_kept() {
        assert!(is_chinese_char('\u{201c}'));
        assert!(!is_chinese_char('\u{2000}'));
        assert!(is_chinese_char('\u{2a6d}'));
        assert!(!is_chinese_char('\u{2a6e}'));
        assert!(!is_chinese_char('é'));
    }

    #[test]
    fn token_lists() {
        assert_eq!(tokens("the cat.", Lang::En), vec!["the", "cat", "."]);
        assert_eq!(tokens("猫 狗", Lang::Zh), vec!["猫", "狗"]);
        assert!(tokens("   ", Lang::De).is_empty());
    }
}
