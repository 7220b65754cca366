//! Truncated derivative bundles and their algebra.

/// Value, horizontal derivative and vertical derivatives up to `order`.
///
/// Tensors are row-major: `hess[i*d + j]`, `third[(i*d + j)*d + k]`.
/// Entries above `order` are left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub dim: usize,
    pub order: usize,
    pub value: f64,
    pub horizontal: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub third: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize, order: usize) -> Self {
        let len = |k: usize| if order >= k { dim.pow(k as u32) } else { 0 };
        Self {
            dim,
            order,
            value: 0.0,
            horizontal: 0.0,
            grad: vec![0.0; len(1)],
            hess: vec![0.0; len(2)],
            third: vec![0.0; len(3)],
        }
    }

    pub fn add_assign(&mut self, other: &Jet) {
        self.value += other.value;
        self.horizontal += other.horizontal;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        for (a, b) in self.third.iter_mut().zip(&other.third) {
            *a += b;
        }
    }

    /// Leibniz rule.
    pub fn product(&self, other: &Jet) -> Jet {
        let d = self.dim;
        let (a, b) = (self, other);
        let mut out = Jet::zero(d, self.order);
        out.value = a.value * b.value;
        out.horizontal = a.horizontal * b.value + a.value * b.horizontal;
        if self.order >= 1 {
            for i in 0..d {
                out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..d {
                for j in 0..d {
                    let ij = i * d + j;
                    out.hess[ij] =
                        a.hess[ij] * b.value + a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i] + a.value * b.hess[ij];
                }
            }
        }
        if self.order >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let ijk = (i * d + j) * d + k;
                        let (ij, ik, jk) = (i * d + j, i * d + k, j * d + k);
                        out.third[ijk] = a.third[ijk] * b.value
                            + a.hess[ij] * b.grad[k]
                            + a.hess[ik] * b.grad[j]
                            + a.hess[jk] * b.grad[i]
                            + a.grad[i] * b.hess[jk]
                            + a.grad[j] * b.hess[ik]
                            + a.grad[k] * b.hess[ij]
                            + a.value * b.third[ijk];
                    }
                }
            }
        }
        out
    }

    /// Chain rule for `φ ∘ self` given `[φ, φ', φ'', φ''']` at `self.value`.
    pub fn compose(&self, phi: [f64; 4]) -> Jet {
        let d = self.dim;
        let a = self;
        let [p0, p1, p2, p3] = phi;
        let mut out = Jet::zero(d, self.order);
        out.value = p0;
        out.horizontal = p1 * a.horizontal;
        if self.order >= 1 {
            for i in 0..d {
                out.grad[i] = p1 * a.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..d {
                for j in 0..d {
                    let ij = i * d + j;
                    out.hess[ij] = p2 * a.grad[i] * a.grad[j] + p1 * a.hess[ij];
                }
            }
        }
        if self.order >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let ijk = (i * d + j) * d + k;
                        let (ij, ik, jk) = (i * d + j, i * d + k, j * d + k);
                        out.third[ijk] = p3 * a.grad[i] * a.grad[j] * a.grad[k]
                            + p2 * (a.hess[ij] * a.grad[k] + a.hess[ik] * a.grad[j] + a.hess[jk] * a.grad[i])
                            + p1 * a.third[ijk];
                    }
                }
            }
        }
        out
    }
}
