//! Point-cloud geometry: storage, normalization, nearest-neighbour
//! search, Chamfer distance, rotations, and point-cloud file I/O.

mod chamfer;
mod cloud;
mod io;
mod kdtree;
mod rotation;

pub use chamfer::{chamfer, chamfer_mean, chamfer_rows, nn_indices_rows, NnStrategy};
pub use cloud::{Point3, PointCloud};
pub use io::{format_sig9, load_cloud, save_cloud, write_atomic, CloudFormat};
pub use kdtree::NnTree;
pub use rotation::{rotate_point, rotate_rows, rotation_apply, rotation_apply_inverse, RotationPair};
