//! Data sources: the subclass-cluster distribution, the orthonormal
//! "exact centers" training set, and MNIST.

mod basis;
mod dataset;
pub mod mnist;
mod synthetic;

pub use basis::{average_centers, make_basis, BasisMode, ClusterSpec, SubclassBasis};
pub use dataset::{Dataset, LabeledSample, Provenance, Targets};
pub use mnist::{load_mnist_dir, load_mnist_idx, preprocess_digits, preprocess_parity, MnistSplit, MNIST_FILES};
pub use synthetic::{sample_synthetic, simplified_dataset};
