//! Dense real arrays used throughout the network.
//!
//! [`FeatureMap`] is the rank-3 activation volume (`height × width × depth`,
//! row-major, channel fastest). [`Tensor`] is the shape-tagged container the
//! gradient tape and the parameter store work with; kernels are stored as
//! `(k, k, in_depth, out_depth)` and depthwise kernels as `(k, k, depth)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::contract(format!(
                "tensor shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Interprets a rank-3 tensor as `(height, width, depth)`.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, d] => Ok((h, w, d)),
            _ => Err(Error::contract(format!(
                "expected a rank-3 feature map, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<FeatureMap> for Tensor {
    fn from(map: FeatureMap) -> Self {
        Tensor {
            shape: vec![map.height, map.width, map.depth],
            data: map.data,
        }
    }
}

/// Activation volume of `height × width × depth` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    depth: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, depth: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || depth == 0 {
            return Err(Error::contract(format!(
                "feature map dimensions must be positive, got {height}x{width}x{depth}"
            )));
        }
        if data.len() != height * width * depth {
            return Err(Error::contract(format!(
                "{height}x{width}x{depth} feature map needs {} values, got {}",
                height * width * depth,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            height,
            width,
            depth,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, depth: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && depth > 0, "empty feature map");
        Self {
            height,
            width,
            depth,
            data: vec![value; height * width * depth],
        }
    }

    pub fn from_fn(height: usize, width: usize, depth: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0 && depth > 0, "empty feature map");
        let mut data = Vec::with_capacity(height * width * depth);
        for y in 0..height {
            for x in 0..width {
                for c in 0..depth {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            depth,
            data,
        }
    }

    /// Builds a feature map from tensor data without the finiteness scan.
    pub(crate) fn from_raw(height: usize, width: usize, depth: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * depth);
        Self {
            height,
            width,
            depth,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.depth + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.depth]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies out the `height × width` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || y0 + height > self.height || x0 + width > self.width {
            return Err(Error::contract(format!(
                "crop {height}x{width} at ({y0},{x0}) outside {}x{} map",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * self.depth);
        for y in y0..y0 + height {
            let start = self.index(y, x0, 0);
            data.extend_from_slice(&self.data[start..start + width * self.depth]);
        }
        Ok(Self::from_raw(height, width, self.depth, data))
    }
}

impl TryFrom<Tensor> for FeatureMap {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        let (h, w, d) = t.dims3()?;
        FeatureMap::new(h, w, d, t.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    /// Zero padding such that the output spatial size is `ceil(input / stride)`.
    SameHalf,
    Valid,
}

/// Geometry of a square 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub stride: usize,
    pub dilation: usize,
    pub in_depth: usize,
    pub out_depth: usize,
    pub padding: Padding,
}

impl ConvSpec {
    pub fn same(kernel_size: usize, in_depth: usize, out_depth: usize) -> Self {
        Self {
            kernel_size,
            stride: 1,
            dilation: 1,
            in_depth,
            out_depth,
            padding: Padding::SameHalf,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    /// Spatial extent covered by the dilated kernel: `(k - 1) * dr + 1`.
    pub fn effective_extent(&self) -> usize {
        (self.kernel_size - 1) * self.dilation + 1
    }

    pub fn kernel_shape(&self) -> Vec<usize> {
        vec![self.kernel_size, self.kernel_size, self.in_depth, self.out_depth]
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if !matches!(self.stride, 1 | 2) {
            return Err(Error::contract(format!("stride must be 1 or 2, got {}", self.stride)));
        }
        if !matches!(self.dilation, 1 | 2 | 4) {
            return Err(Error::contract(format!(
                "dilation rate must be 1, 2 or 4, got {}",
                self.dilation
            )));
        }
        if self.in_depth == 0 || self.out_depth == 0 {
            return Err(Error::contract("convolution depths must be positive"));
        }
        Ok(())
    }

    /// Output length and leading zero padding along one spatial axis.
    pub fn output_len(&self, input: usize) -> Result<(usize, usize)> {
        axis_geometry(input, self.effective_extent(), self.stride, self.padding)
    }
}

/// `(output_len, pad_before)` for a window of `extent` sliding with `stride`.
pub(crate) fn axis_geometry(input: usize, extent: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::SameHalf => {
            let out = input.div_ceil(stride);
            let needed = (out - 1) * stride + extent;
            let pad_total = needed.saturating_sub(input);
            Ok((out, pad_total / 2))
        }
        Padding::Valid => {
            if input < extent {
                return Err(Error::contract(format!(
                    "valid convolution with extent {extent} on axis of length {input}"
                )));
            }
            Ok(((input - extent) / stride + 1, 0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilated_extent() {
        let spec = ConvSpec::same(3, 1, 1).with_dilation(4);
        assert_eq!(spec.effective_extent(), 9);
        assert_eq!(ConvSpec::same(3, 1, 1).with_dilation(2).effective_extent(), 5);
    }

    #[test]
    fn same_half_sizes() {
        let s1 = ConvSpec::same(3, 1, 1);
        assert_eq!(s1.output_len(7).unwrap(), (7, 1));
        let s2 = s1.with_stride(2);
        assert_eq!(s2.output_len(16).unwrap(), (8, 0));
        assert_eq!(s2.output_len(15).unwrap(), (8, 1));
        assert_eq!(s2.output_len(1).unwrap(), (1, 1));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ConvSpec::same(2, 1, 1).validate().is_err());
        assert!(ConvSpec::same(3, 1, 1).with_stride(3).validate().is_err());
        assert!(ConvSpec::same(3, 1, 1).with_dilation(3).validate().is_err());
        assert!(ConvSpec::same(3, 0, 1).validate().is_err());
    }

    #[test]
    fn feature_map_rejects_non_finite() {
        assert!(matches!(
            FeatureMap::new(1, 1, 1, vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(FeatureMap::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn crop_copies_window() {
        let map = FeatureMap::from_fn(4, 5, 2, |y, x, c| (y * 100 + x * 10 + c) as f64);
        let crop = map.crop(1, 2, 2, 3).unwrap();
        assert_eq!(crop.get(0, 0, 1), 121.0);
        assert_eq!(crop.get(1, 2, 0), 240.0);
        assert!(map.crop(3, 0, 2, 1).is_err());
    }
}
