//! Normalization, pre-tokenization and the tokenizer model.

pub(crate) mod lattice;
mod model;
mod normalize;
mod overlap;
mod pretok;
mod profile;

pub use lattice::Edge;
pub use model::{
    byte_token, reserved_prefix, Algorithm, Surface, TokenKind, TokenizerModel, FORMAT_VERSION,
};
pub use normalize::normalize;
pub use overlap::{learned_surfaces, set_overlap, vocab_overlap};
pub use pretok::{byte_level_encode, byte_to_char, char_to_byte, pretokenize, PreToken};
pub use profile::{default_specials, Normalization, Profile, ProfileName, WORD_MARKER};
