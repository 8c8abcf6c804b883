//! Small symmetric tensor algebra for the isotropic elasticity operators.
//!
//! Everything here operates on values, has no allocation, and is safe to call
//! from any thread. These kernels sit on the assembly hot path, so dimension
//! mismatches panic instead of returning errors.

use crate::{invalid, Result};

/// Symmetric d x d tensor (d = 2 or 3) in packed storage.
///
/// Layout: diagonal entries first, then off-diagonals.
/// 2D: `[xx, yy, xy]`; 3D: `[xx, yy, zz, xy, xz, yz]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor2 {
    dim: usize,
    v: [f64; 6],
}

impl SymTensor2 {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dim must be 2 or 3");
        Self { dim, v: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zero(dim);
        for i in 0..dim {
            t.v[i] = 1.0;
        }
        t
    }

    pub fn new_2d(xx: f64, yy: f64, xy: f64) -> Self {
        Self { dim: 2, v: [xx, yy, xy, 0.0, 0.0, 0.0] }
    }

    pub fn new_3d(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Self { dim: 3, v: [xx, yy, zz, xy, xz, yz] }
    }

    /// Symmetric part of a full (row-major) d x d matrix.
    pub fn sym_of(dim: usize, m: &[f64]) -> Self {
        assert_eq!(m.len(), dim * dim);
        let mut t = Self::zero(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, 0.5 * (m[i * dim + j] + m[j * dim + i]));
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn packed_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.dim && j < self.dim);
        if i == j {
            return i;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        match (self.dim, a, b) {
            (2, 0, 1) => 2,
            (3, 0, 1) => 3,
            (3, 0, 2) => 4,
            (3, 1, 2) => 5,
            _ => unreachable!(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[self.packed_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.v[self.packed_index(i, j)] = value;
    }

    pub fn trace(&self) -> f64 {
        self.v[..self.dim].iter().sum()
    }

    /// Frobenius inner product `a : b` (off-diagonals count twice).
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        let n_off = self.dim * (self.dim + 1) / 2 - self.dim;
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.v[i] * other.v[i];
        }
        for i in self.dim..self.dim + n_off {
            s += 2.0 * self.v[i] * other.v[i];
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut t = *self;
        for v in &mut t.v {
            *v *= a;
        }
        t
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        let mut t = *self;
        for (v, w) in t.v.iter_mut().zip(other.v.iter()) {
            *v += w;
        }
        t
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Reconstructs the full row-major matrix.
    pub fn to_full(&self) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.get(i, j);
            }
        }
        m
    }
}

/// Trace-free part: `dev(s) = s - (1/d) tr(s) I`.
pub fn dev(s: &SymTensor2) -> SymTensor2 {
    let shift = s.trace() / s.dim() as f64;
    let mut t = *s;
    for i in 0..s.dim() {
        t.v[i] -= shift;
    }
    t
}

/// Positive part of a scalar: `a` if `a > 0`, else `0`.
///
/// The subgradient at 0 is taken as 0 (inactive); see
/// [`positive_part_subgradient`].
pub fn positive_part(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

/// Derivative of [`positive_part`] used by the semismooth Newton solver: 1 on
/// the active branch, 0 elsewhere (including the kink at 0, which keeps the
/// damage Jacobian symmetric positive semidefinite).
pub fn positive_part_subgradient(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Isotropic elastic moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticModuli {
    lambda: f64,
    mu: f64,
    dim: usize,
}

impl ElasticModuli {
    pub fn new(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return invalid(format!("dim must be 2 or 3, got {dim}"));
        }
        if !(lambda > 0.0) || !(mu > 0.0) {
            return invalid(format!(
                "Lame parameters must be positive, got lambda={lambda}, mu={mu}"
            ));
        }
        Ok(Self { lambda, mu, dim })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lipschitz constant of the elasticity map: `2*lambda*d + 2*mu`.
    pub fn lipschitz_constant(&self) -> f64 {
        2.0 * self.lambda * self.dim as f64 + 2.0 * self.mu
    }

    /// Coercivity constant actually attained by the elasticity map:
    /// `<A(t), t> = lambda*tr(t)^2 + 2*mu*<t,t> >= 2*mu*<t,t>`.
    pub fn coercivity_constant(&self) -> f64 {
        2.0 * self.mu
    }

    /// `A(s) = lambda*tr(s)*I + 2*mu*s`.
    ///
    /// Panics if the tensor dimension differs from the moduli dimension.
    pub fn apply(&self, s: &SymTensor2) -> SymTensor2 {
        assert_eq!(self.dim, s.dim(), "tensor dimension mismatch");
        let lt = self.lambda * s.trace();
        let mut t = s.scaled(2.0 * self.mu);
        for i in 0..self.dim {
            t.v[i] += lt;
        }
        t
    }

    /// Square root of the elasticity map:
    /// `A^(1/2)(s) = sqrt(2mu)*s + (sqrt(2mu + d*lambda) - sqrt(2mu))/d * tr(s)*I`,
    /// so that `A^(1/2)(A^(1/2)(s)) = A(s)`.
    pub fn apply_sqrt(&self, s: &SymTensor2) -> SymTensor2 {
        assert_eq!(self.dim, s.dim(), "tensor dimension mismatch");
        let d = self.dim as f64;
        let a = (2.0 * self.mu).sqrt();
        let b = ((2.0 * self.mu + d * self.lambda).sqrt() - a) / d;
        let bt = b * s.trace();
        let mut t = s.scaled(a);
        for i in 0..self.dim {
            t.v[i] += bt;
        }
        t
    }

    /// Elastic energy density `B(s) = A(s):s = lambda*tr(s)^2 + 2*mu*<s,s>`.
    pub fn energy_density(&self, s: &SymTensor2) -> f64 {
        assert_eq!(self.dim, s.dim(), "tensor dimension mismatch");
        let t = s.trace();
        self.lambda * t * t + 2.0 * self.mu * s.inner(s)
    }
}
