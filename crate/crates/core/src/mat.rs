//! Minimal square matrix used for per-pair link quantities.

/// Dense k-by-k matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMat<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Copy> SquareMat<T> {
    pub fn filled(k: usize, value: T) -> Self {
        SquareMat {
            k,
            data: vec![value; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.k + j] = value;
    }
}
