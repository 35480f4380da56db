//! Label-map algorithms: morphology, connected components, myocardium
//! correction, valve extraction and plane splitting, atrial parcellation,
//! fusion of stage predictions, and one-hot/argmax codecs.

mod codec;
mod components;
mod fusion;
mod mask;
mod morphology;
mod parcel;
mod refine;
mod valve;

pub use codec::{argmax_channels, argmax_decode, one_hot_encode};
pub use components::{connected_components, largest_component_cleanup, Components};
pub use fusion::fuse_predictions;
pub use mask::{BinaryMask, Connectivity};
pub use morphology::dilate;
pub use parcel::{parcellate_la_boxes, Annotations, CropBox};
pub use refine::{lv_myo_reassign, ReassignOutcome, MAX_REASSIGN_ITERATIONS};
pub use valve::{adjacency_band, extract_pav, split_by_plane, Plane};
