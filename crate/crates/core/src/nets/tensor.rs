use crate::{Error, Result};

/// Dense `(N, C, D, H, W)` tensor, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor5 {
    dims: [usize; 5],
    data: Vec<f32>,
}

impl Tensor5 {
    pub fn new(dims: [usize; 5], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dims {dims:?} contain 0"
            )));
        }
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::InvalidArgument(format!(
                "tensor {dims:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 5]) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: [usize; 5], v: f32) -> Self {
        assert!(!dims.contains(&0), "tensor dims {dims:?} contain 0");
        Self {
            dims,
            data: vec![v; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.dims[2], self.dims[3], self.dims[4]]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, z: usize, y: usize, x: usize) -> usize {
        let [_, cc, d, h, w] = self.dims;
        (((n * cc + c) * d + z) * h + y) * w + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, z, y, x)]
    }

    /// Channels `[start, start + count)` as a new tensor.
    pub fn channel_range(&self, start: usize, count: usize) -> Self {
        let [n, c, d, h, w] = self.dims;
        assert!(start + count <= c);
        let plane = d * h * w;
        let mut data = Vec::with_capacity(n * count * plane);
        for b in 0..n {
            let from = (b * c + start) * plane;
            data.extend_from_slice(&self.data[from..from + count * plane]);
        }
        Self {
            dims: [n, count, d, h, w],
            data,
        }
    }

    pub fn add_assign(&mut self, other: &Tensor5) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::InvalidArgument(format!(
                "cannot add tensors {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}
