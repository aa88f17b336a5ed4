pub mod audio;
pub mod augment;
pub mod dataset;
pub mod ddouble;
pub mod features;
pub mod linalg;
pub mod nn;
pub mod synth;
pub mod trainer;

pub const NUM_CLASSES: usize = 8;
