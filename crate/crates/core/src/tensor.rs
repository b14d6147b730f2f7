//! Dense rank-3 array: channels x height x width, channel-major row-major.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Tensor {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Tensor {
        assert_eq!(
            data.len(),
            channels * height * width,
            "data length mismatch"
        );
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Row-major h*w slice of one channel.
    #[inline]
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f32] {
        let start = (c * self.height + y) * self.width;
        &self.data[start..start + self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Spatial sub-block copy: `size x size` window at (x0, y0), all channels.
    pub fn crop(&self, x0: usize, y0: usize, size: usize) -> Tensor {
        assert!(
            x0 + size <= self.width && y0 + size <= self.height,
            "crop out of bounds"
        );
        let mut out = Tensor::zeros(self.channels, size, size);
        for c in 0..self.channels {
            for y in 0..size {
                let src = self.row(c, y0 + y);
                out.channel_mut(c)[y * size..(y + 1) * size].copy_from_slice(&src[x0..x0 + size]);
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
