//! PNG and raw tensor files.
//!
//! PNGs are 8-bit grayscale or RGB; channel value `v` maps to `v / 255`.
//! The raw format is `IQT1`, three little-endian `u32` (height, width,
//! channels) and a row-major little-endian `f32` payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::scalar::Scalar;

pub const RAW_MAGIC: &[u8; 4] = b"IQT1";

pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode_err)?;

    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != png::BitDepth::Eight {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            message: format!("unsupported bit depth {depth:?}, expected 8"),
        });
    }
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported color type {other:?}, expected grayscale or RGB"),
            })
        }
    };

    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        message: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    let shape = Shape::new(frame.height as usize, frame.width as usize, channels);
    let row_bytes = shape.width * channels;

    let scale = T::of(255.0);
    let mut data = Vec::with_capacity(shape.len());
    for row in buf.chunks(frame.line_size).take(shape.height) {
        data.extend(row[..row_bytes].iter().map(|v| T::of(f64::from(*v)) / scale));
    }
    ImageTensor::new(shape, data)
}

/// Writes an 8-bit PNG using round-half-up of `255·e`.
///
/// Unless `quantize` is set, images with elements off the 1/255 grid are
/// rejected so sub-grid perturbations are never silently destroyed.
pub fn save_image<T: Scalar>(
    img: &ImageTensor<T>,
    path: impl AsRef<Path>,
    quantize: bool,
) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::Argument(format!(
                "cannot write {c}-channel image as PNG"
            )))
        }
    };
    if !img.is_normalized() {
        return Err(Error::InvalidImage("elements outside [0, 1]; clip first".into()));
    }
    if !quantize {
        if let Some(index) = img.first_off_grid() {
            return Err(Error::OffGrid {
                index,
                value: img.data()[index].as_f64(),
            });
        }
    }
    let bytes = to_levels(img);

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

/// 8-bit levels exactly as [`save_image`] would write them.
pub fn to_levels<T: Scalar>(img: &ImageTensor<T>) -> Vec<u8> {
    let scale = T::of(255.0);
    let half = T::of(0.5);
    img.data()
        .iter()
        .map(|v| (*v * scale + half).floor().as_f64().clamp(0.0, 255.0) as u8)
        .collect()
}

/// The image a PNG round trip of `img` would produce.
pub fn quantized<T: Scalar>(img: &ImageTensor<T>) -> ImageTensor<T> {
    let scale = T::of(255.0);
    let data = to_levels(img)
        .into_iter()
        .map(|v| T::of(f64::from(v)) / scale)
        .collect();
    ImageTensor::from_parts_unchecked(img.shape(), data)
}

pub fn write_raw<T: Scalar>(img: &ImageTensor<T>, mut out: impl Write) -> std::io::Result<()> {
    let shape = img.shape();
    out.write_all(RAW_MAGIC)?;
    for dim in [shape.height, shape.width, shape.channels] {
        out.write_all(&(dim as u32).to_le_bytes())?;
    }
    for v in img.data() {
        out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raw<T: Scalar>(mut input: impl Read) -> Result<ImageTensor<T>> {
    let bad = |m: &str| Error::InvalidImage(format!("raw tensor: {m}"));
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| bad("truncated header"))?;
    if &header[..4] != RAW_MAGIC {
        return Err(bad("bad magic"));
    }
    let dim = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let shape = Shape::new(dim(4), dim(8), dim(12));
    let mut payload = vec![0u8; shape.len() * 4];
    input
        .read_exact(&mut payload)
        .map_err(|_| bad("truncated payload"))?;
    ImageTensor::new(shape, decode_f32_le(&payload))
}

pub fn save_raw<T: Scalar>(img: &ImageTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_raw(img, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_raw<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw(BufReader::new(file))
}

pub(crate) fn decode_f32_le<T: Scalar>(bytes: &[u8]) -> Vec<T> {
    bytes
        .chunks_exact(4)
        .map(|b| T::of(f64::from(f32::from_le_bytes(b.try_into().unwrap()))))
        .collect()
}

pub(crate) fn encode_f32_le<T: Scalar>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}
