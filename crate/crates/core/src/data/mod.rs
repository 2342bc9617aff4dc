//! Dataset ingestion, splitting, minibatch streaming, and synthetic data.

mod idx;
mod split;
mod stream;
mod synth;

pub use idx::{
    encode_idx_f64, encode_idx_labels, encode_idx_u8, load_idx, parse_idx_images, parse_idx_labels,
    parse_idx_pair, IdxError,
};
pub use split::{make_split, Dataset, DatasetSplit};
pub use stream::BatchStream;
pub use synth::{blob_mean, synth_blobs};
