use num_traits::Float;

/// Dense row-major tensor. Invariant: `data.len()` equals the product of
/// `shape` and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Float> Tensor<F> {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![F::zero(); n] }
    }

    /// `None` when the buffer length does not match the shape or any entry
    /// is non-finite.
    pub fn from_vec(shape: Vec<usize>, data: Vec<F>) -> Option<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n || data.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Tensor { shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
