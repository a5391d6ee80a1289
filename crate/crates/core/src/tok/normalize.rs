use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::profile::Profile;

/// NFKC, then (per profile) accent stripping and lowercasing. Idempotent.
pub fn normalize(text: &str, profile: &Profile) -> String {
    let mut out: String = text.nfkc().collect();
    if profile.strip_accents {
        out = out
            .nfd()
            .filter(|&c| !is_combining_mark(c))
            .nfkc()
            .collect();
    }
    if profile.lowercase {
        out = out.to_lowercase().nfkc().collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fullwidth_folds() {
        assert_eq!(normalize("\u{ff21}", &Profile::sentencepiece()), "A");
    }

    #[test]
    fn accents_follow_profile() {
        assert_eq!(normalize("café", &Profile::huggingface()), "cafe");
        assert_eq!(normalize("café", &Profile::sentencepiece()), "café");
        // Decomposed input composes under NFKC.
        assert_eq!(normalize("cafe\u{301}", &Profile::sentencepiece()), "café");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn idempotent(s in "\\PC{0,24}|[\u{0300}-\u{036f}a-z\u{ff01}-\u{ff5e}\u{1100}-\u{11ff} ]{0,24}") {
            for p in [Profile::sentencepiece(), Profile::huggingface()] {
                let once = normalize(&s, &p);
                prop_assert_eq!(normalize(&once, &p), once);
            }
        }
    }
}
