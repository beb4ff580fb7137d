//! Pixel buffers, distortion measurement and lossless image I/O.

mod io;
mod tensor;

pub use io::{
    load_image, load_raw, quantized, read_raw, save_image, save_raw, to_levels, write_raw,
    RAW_MAGIC,
};
pub(crate) use io::{decode_f32_le, encode_f32_le};
pub use tensor::{DeltaTensor, ImageTensor, Shape};
pub(crate) use tensor::clamp01;
