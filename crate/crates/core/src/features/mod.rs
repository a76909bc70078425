//! Color and texture descriptors: 96-bin global color histograms, upright
//! SURF, and the 88-dimensional SURF + local LAB histogram descriptor.

mod hessian;
mod histogram;
mod sampling;
mod surf;

pub use hessian::{fast_hessian, Keypoint};
pub use histogram::{
    global_histogram, histogram_counts, local_color_histogram, GlobalColorHistogram, GLOBAL_DIM,
    LOCAL_DIM,
};
pub use sampling::{
    sample, sample_frame, FeatureSource, LocalDescriptor, SamplingMode, SamplingPlan,
    DESCRIPTOR_DIM,
};
pub use surf::{surf_descriptor, SURF_DIM};
