use crate::error::{Error, Result};
use crate::imagecore::{LabelMap, NUM_CLASSES};

/// Per-pixel, per-class values (logits, probabilities or their gradients),
/// stored as one contiguous plane per class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ClassField {
    pub fn zeros(width: usize, height: usize) -> Self {
        ClassField {
            width,
            height,
            data: vec![0.0; NUM_CLASSES * width * height],
        }
    }

    pub fn from_planes(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != NUM_CLASSES * width * height {
            return Err(Error::InvalidParam(format!(
                "class field of {} values cannot be {width}x{height}",
                data.len()
            )));
        }
        Ok(ClassField {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn plane_mut(&mut self, class: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[class * n..(class + 1) * n]
    }

    pub fn get(&self, pixel: usize, class: usize) -> f64 {
        self.data[class * self.pixels() + pixel]
    }

    pub fn set(&mut self, pixel: usize, class: usize, v: f64) {
        let n = self.pixels();
        self.data[class * n + pixel] = v;
    }

    pub fn pixel(&self, pixel: usize) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|c| self.get(pixel, c))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Numerically stable per-pixel softmax.
    pub fn softmax(&self) -> ClassField {
        let mut out = ClassField::zeros(self.width, self.height);
        for p in 0..self.pixels() {
            let z = self.pixel(p);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e = z.map(|v| (v - max).exp());
            let total: f64 = e.iter().sum();
            for c in 0..NUM_CLASSES {
                out.set(p, c, e[c] / total);
            }
        }
        out
    }

    /// Per-pixel argmax; ties go to the lower class index.
    pub fn argmax(&self) -> LabelMap {
        let labels = (0..self.pixels())
            .map(|p| {
                let v = self.pixel(p);
                let mut best = 0;
                for c in 1..NUM_CLASSES {
                    if v[c] > v[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        LabelMap::new(self.width, self.height, labels).expect("field dims are valid")
    }
}
