use std::collections::BTreeSet;

use super::model::{Surface, TokenKind, TokenizerModel};

/// Learned-vocabulary surfaces with profile conventions removed. Specials and
/// byte-fallback tokens are configuration and are left out.
pub fn learned_surfaces(model: &TokenizerModel) -> BTreeSet<Surface> {
    (0..model.vocab_size() as u32)
        .filter(|&id| model.kind(id) == Some(TokenKind::Piece))
        .map(|id| model.surface(id))
        .collect()
}

/// |A ∩ B| / min(|A|, |B|) over learned surfaces; 0 when either side is empty.
pub fn vocab_overlap(a: &TokenizerModel, b: &TokenizerModel) -> f64 {
    set_overlap(&learned_surfaces(a), &learned_surfaces(b))
}

pub fn set_overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let denom = a.len().min(b.len());
    if denom == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / denom as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tok::model::reserved_prefix;
    use crate::tok::pretok::byte_to_char;
    use crate::tok::Profile;

    fn sp(extra: &[&str]) -> TokenizerModel {
        let mut v = reserved_prefix(&Profile::sentencepiece());
        v.extend(["▁"].iter().chain(extra).map(|s| s.to_string()));
        TokenizerModel::new_bpe(Profile::sentencepiece(), v, &[]).unwrap()
    }

    #[test]
    fn identity_and_disjoint() {
        let a = sp(&["x", "y"]);
        assert_eq!(vocab_overlap(&a, &a), 1.0);
        assert_eq!(
            set_overlap(&BTreeSet::from([1, 2]), &BTreeSet::from([3])),
            0.0
        );
        assert_eq!(set_overlap::<u8>(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }

    #[test]
    fn markers_unify_across_profiles() {
        let a = sp(&["w", "o", "r", "d", "▁word"]);
        let mut v = reserved_prefix(&Profile::huggingface());
        v.extend((0..=255u8).map(|b| byte_to_char(b).to_string()));
        v.push("Ġword".into());
        let b = TokenizerModel::new_bpe(Profile::huggingface(), v, &[]).unwrap();
        let sa = learned_surfaces(&a);
        let sb = learned_surfaces(&b);
        assert!(sa.contains(&Surface::Text(" word".into())));
        assert!(sb.contains(&Surface::Text(" word".into())));
        // a: {" ", w, o, r, d, " word"} all present in b.
        assert_eq!(vocab_overlap(&a, &b), 1.0);
        assert_eq!(vocab_overlap(&a, &b), vocab_overlap(&b, &a));
    }
}
