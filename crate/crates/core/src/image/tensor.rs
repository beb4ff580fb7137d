use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Pixel, Scalar};

/// Height, width and channel count of a row-major `h × w × c` buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    /// Number of scalar elements.
    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub const fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    fn check_positive(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidImage(format!("shape {self} has a zero extent")));
        }
        Ok(())
    }

    fn expect_eq(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: *self,
                found: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Row-major pixel buffer with elements in `[0, 1]`.
///
/// Values are immutable once constructed; every transform returns a new
/// tensor. The single exception to the range invariant is [`ImageTensor::add`],
/// whose output is the raw sum and must be passed through
/// [`ImageTensor::clip01`] before use.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

/// Signed perturbation paired with an [`ImageTensor`] of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Pixel> ImageTensor<T> {
    /// Validates length and the `[0, 1]` range.
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        shape.check_positive()?;
        if data.len() != shape.len() {
            return Err(Error::BufferLength {
                shape,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !in_unit_range(*v)) {
            return Err(Error::InvalidImage(format!(
                "element {index} ({:?}) outside [0, 1]",
                data[index]
            )));
        }
        Ok(ImageTensor { shape, data })
    }

    pub fn filled(shape: Shape, value: T) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()])
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for row in 0..shape.height {
            for col in 0..shape.width {
                for ch in 0..shape.channels {
                    data.push(f(row, col, ch));
                }
            }
        }
        Self::new(shape, data)
    }

    pub(crate) fn from_parts_unchecked(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ImageTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[self.shape.index(row, col, channel)]
    }

    /// Whether every element lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|v| in_unit_range(*v))
    }

    /// Largest absolute element-wise difference.
    pub fn linf_distance(&self, other: &Self) -> Result<T> {
        self.shape.expect_eq(&other.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), |acc, d| if d > acc { d } else { acc }))
    }

    pub fn clip01(&self) -> Self {
        let data = self.data.iter().map(|v| clamp01(*v)).collect();
        ImageTensor::from_parts_unchecked(self.shape, data)
    }

    /// Element-wise sum without clamping.
    pub fn add(&self, delta: &DeltaTensor<T>) -> Result<Self> {
        self.shape.expect_eq(&delta.shape)?;
        let data = self
            .data
            .iter()
            .zip(&delta.data)
            .map(|(a, d)| *a + *d)
            .collect();
        Ok(ImageTensor::from_parts_unchecked(self.shape, data))
    }

    /// `self − base` as a delta.
    pub fn delta_from(&self, base: &Self) -> Result<DeltaTensor<T>> {
        base.shape.expect_eq(&self.shape)?;
        let data = self
            .data
            .iter()
            .zip(&base.data)
            .map(|(a, b)| *a - *b)
            .collect();
        Ok(DeltaTensor {
            shape: self.shape,
            data,
        })
    }
}

impl<T: Scalar> ImageTensor<T> {
    pub fn mean(&self) -> T {
        let sum = self.data.iter().fold(T::zero(), |acc, v| acc + *v);
        sum / T::of(self.data.len() as f64)
    }

    /// Index of the first element farther than [`Scalar::grid_tolerance`]
    /// from a multiple of 1/255.
    pub fn first_off_grid(&self) -> Option<usize> {
        let tol = T::grid_tolerance();
        let scale = T::of(255.0);
        self.data.iter().position(|v| {
            let level = (*v * scale).round();
            (*v - level / scale).abs() > tol
        })
    }

    /// Converts every element to another float type.
    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        ImageTensor::from_parts_unchecked(
            self.shape,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }
}

impl<T: Pixel> DeltaTensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::BufferLength {
                shape,
                len: data.len(),
            });
        }
        Ok(DeltaTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        DeltaTensor {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    /// Every element set to `value`.
    pub fn filled(shape: Shape, value: T) -> Self {
        DeltaTensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|d| d.abs())
            .fold(T::zero(), |acc, d| if d > acc { d } else { acc })
    }
}

#[inline]
fn in_unit_range<T: Pixel>(v: T) -> bool {
    v >= T::zero() && v <= T::one()
}

#[inline]
pub(crate) fn clamp01<T: Pixel>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else if v > T::one() {
        T::one()
    } else {
        v
    }
}
