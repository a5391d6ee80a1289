//! Whitespace/digit pre-tokenization and the byte-level alphabet.

use std::sync::OnceLock;

use super::profile::{Profile, WORD_MARKER};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreToken {
    pub text: String,
    /// Must be encoded as raw bytes: a literal word-marker character in the
    /// input, which would otherwise decode as a space.
    pub raw: bool,
}

impl PreToken {
    fn word(text: String) -> Self {
        PreToken { text, raw: false }
    }
}

struct ByteTable {
    to_char: [char; 256],
    to_byte: Vec<Option<u8>>,
}

fn byte_table() -> &'static ByteTable {
    static TABLE: OnceLock<ByteTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let printable = |b: u32| {
            (u32::from(b'!')..=u32::from(b'~')).contains(&b)
                || (0xA1..=0xAC).contains(&b)
                || (0xAE..=0xFF).contains(&b)
        };
        let mut to_char = ['\0'; 256];
        let mut next = 256u32;
        for b in 0..256u32 {
            let cp = if printable(b) {
                b
            } else {
                next += 1;
                next - 1
            };
            to_char[b as usize] = char::from_u32(cp).expect("valid scalar");
        }
        let mut to_byte = vec![None; 512];
        for (b, c) in to_char.iter().enumerate() {
            to_byte[*c as usize] = Some(b as u8);
        }
        ByteTable { to_char, to_byte }
    })
}

/// The printable stand-in for a raw byte (GPT-2 style byte-level alphabet).
pub fn byte_to_char(b: u8) -> char {
    byte_table().to_char[b as usize]
}

pub fn char_to_byte(c: char) -> Option<u8> {
    byte_table().to_byte.get(c as usize).copied().flatten()
}

pub fn byte_level_encode(s: &str) -> String {
    s.bytes().map(byte_to_char).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Space,
    Digit,
    Other,
    Raw,
}

fn classify(c: char, profile: &Profile) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if !profile.byte_level_pretok && c == WORD_MARKER {
        Class::Raw
    } else if profile.digit_split && c.is_numeric() {
        Class::Digit
    } else {
        Class::Other
    }
}

/// Splits normalized text into pre-tokens. Whitespace runs, digit runs and
/// other runs are separated; a single space directly before a non-digit run
/// is attached to it as the word marker. Concatenating the pieces (with
/// markers mapped back to spaces) reproduces the input, plus a leading space
/// under the dummy-prefix rule.
pub fn pretokenize(text: &str, profile: &Profile) -> Vec<PreToken> {
    if text.is_empty() {
        return Vec::new();
    }
    let owned;
    let src: &str = if profile.dummy_prefix {
        owned = format!(" {text}");
        &owned
    } else {
        text
    };

    let mut runs: Vec<(usize, usize, Class)> = Vec::new();
    for (i, c) in src.char_indices() {
        let class = classify(c, profile);
        let end = i + c.len_utf8();
        match runs.last_mut() {
            Some(last) if last.2 == class && class != Class::Raw => last.1 = end,
            _ => runs.push((i, end, class)),
        }
    }

    let mut spans: Vec<(usize, usize, bool)> = Vec::with_capacity(runs.len());
    let mut carry: Option<usize> = None;
    for (k, &(start, end, class)) in runs.iter().enumerate() {
        match class {
            Class::Space => {
                let next_is_word = runs.get(k + 1).is_some_and(|r| r.2 == Class::Other);
                if next_is_word && src[start..end].ends_with(' ') {
                    if end - 1 > start {
                        spans.push((start, end - 1, false));
                    }
                    carry = Some(end - 1);
                } else {
                    spans.push((start, end, false));
                }
            }
            Class::Other => spans.push((carry.take().unwrap_or(start), end, false)),
            Class::Digit => spans.push((start, end, false)),
            Class::Raw => spans.push((start, end, true)),
        }
    }

    spans
        .into_iter()
        .map(|(s, e, raw)| {
            let piece = &src[s..e];
            if raw {
                PreToken {
                    text: piece.to_owned(),
                    raw: true,
                }
            } else if profile.byte_level_pretok {
                PreToken::word(byte_level_encode(piece))
            } else {
                PreToken::word(piece.replace(' ', &WORD_MARKER.to_string()))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(v: Vec<PreToken>) -> Vec<String> {
        v.into_iter().map(|p| p.text).collect()
    }

    #[test]
    fn digit_runs_split() {
        assert_eq!(
            texts(pretokenize("ab12cd", &Profile::huggingface())),
            ["ab", "12", "cd"]
        );
        assert_eq!(
            texts(pretokenize("ab12cd", &Profile::sentencepiece())),
            ["▁ab", "12", "cd"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(pretokenize("", &Profile::sentencepiece()).is_empty());
        assert!(pretokenize("", &Profile::huggingface()).is_empty());
    }

    #[test]
    fn sp_marks_every_word() {
        assert_eq!(
            texts(pretokenize("hello world", &Profile::sentencepiece())),
            ["▁hello", "▁world"]
        );
        assert_eq!(
            texts(pretokenize("a  b", &Profile::sentencepiece())),
            ["▁a", "▁", "▁b"]
        );
        assert_eq!(
            texts(pretokenize("a 12", &Profile::sentencepiece())),
            ["▁a", "▁", "12"]
        );
        assert_eq!(
            texts(pretokenize("x\ty", &Profile::sentencepiece())),
            ["▁x", "\t", "y"]
        );
    }

    #[test]
    fn hf_maps_to_byte_alphabet() {
        assert_eq!(
            texts(pretokenize("hello world", &Profile::huggingface())),
            ["hello", "Ġworld"]
        );
        assert_eq!(texts(pretokenize("é", &Profile::huggingface())), ["Ã©"]);
    }

    #[test]
    fn literal_marker_is_raw() {
        let p = pretokenize("a\u{2581}b", &Profile::sentencepiece());
        assert_eq!(texts(p.clone()), ["▁a", "▁", "b"]);
        assert_eq!(
            p.iter().map(|t| t.raw).collect::<Vec<_>>(),
            [false, true, false]
        );
    }

    #[test]
    fn byte_table_is_bijective() {
        let mut seen = std::collections::HashSet::new();
        for b in 0..=255u8 {
            let c = byte_to_char(b);
            assert!(!c.is_whitespace() && !c.is_control());
            assert!(seen.insert(c));
            assert_eq!(char_to_byte(c), Some(b));
        }
        assert_eq!(byte_to_char(b' '), 'Ġ');
    }
}
