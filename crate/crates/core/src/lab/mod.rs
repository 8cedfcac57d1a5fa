//! Small-blocklength codebook laboratory: sampling, enumerators, decoders and
//! error estimates.

pub mod code;
pub mod decode;
pub mod enumerators;
pub mod simulate;
pub mod types;

pub use code::{message_count, Cloud, HccCode};
pub use decode::{decode_gld, decode_ml_strong, decode_weak_bin, gld_posterior, Decision};
pub use enumerators::{
    enumerator_concentration, enumerators, ConcentrationReport, ConcentrationRow, EnumeratorKind, EnumeratorReport,
};
pub use simulate::{estimate_error, exact_error, expurgate_clouds, Decoder, ErrorEstimate, MessageError};
pub use types::{sample_conditional_type, sample_type_sequence};
