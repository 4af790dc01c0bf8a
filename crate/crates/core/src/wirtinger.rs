//! Forward-mode Wirtinger dual numbers.
//!
//! A value carries `∂/∂t_k` and `∂/∂t̄_k` for `K` complex directions, so
//! non-holomorphic expressions (normalizations by `|σ₀|`) differentiate
//! correctly. `conj` swaps and conjugates the two halves.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) trait JetScalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn cst(v: Complex64) -> Self;
    fn val(&self) -> Complex64;
    fn conj(&self) -> Self;
    /// `1/x` for a real-valued `x`.
    fn recip_real(&self) -> Self;
    /// `sqrt(x)` for a real positive `x`.
    fn sqrt_real(&self) -> Self;

    fn norm_sqr(&self) -> Self {
        *self * self.conj()
    }
}

impl JetScalar for Complex64 {
    fn cst(v: Complex64) -> Self {
        v
    }
    fn val(&self) -> Complex64 {
        *self
    }
    fn conj(&self) -> Self {
        num_complex::Complex::conj(self)
    }
    fn recip_real(&self) -> Self {
        Complex64::new(1.0 / self.re, 0.0)
    }
    fn sqrt_real(&self) -> Self {
        Complex64::new(self.re.sqrt(), 0.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Wd<const K: usize> {
    pub v: Complex64,
    pub d: [Complex64; K],
    pub db: [Complex64; K],
}

impl<const K: usize> Wd<K> {
    pub fn seeded(v: Complex64, d: [Complex64; K], db: [Complex64; K]) -> Self {
        Wd { v, d, db }
    }
}

impl<const K: usize> Add for Wd<K> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut r = self;
        r.v += o.v;
        for k in 0..K {
            r.d[k] += o.d[k];
            r.db[k] += o.db[k];
        }
        r
    }
}

impl<const K: usize> Sub for Wd<K> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const K: usize> Neg for Wd<K> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut r = self;
        r.v = -r.v;
        for k in 0..K {
            r.d[k] = -r.d[k];
            r.db[k] = -r.db[k];
        }
        r
    }
}

impl<const K: usize> Mul for Wd<K> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Wd {
            v: self.v * o.v,
            d: [ZERO; K],
            db: [ZERO; K],
        };
        for k in 0..K {
            r.d[k] = self.d[k] * o.v + self.v * o.d[k];
            r.db[k] = self.db[k] * o.v + self.v * o.db[k];
        }
        r
    }
}

impl<const K: usize> JetScalar for Wd<K> {
    fn cst(v: Complex64) -> Self {
        Wd {
            v,
            d: [ZERO; K],
            db: [ZERO; K],
        }
    }
    fn val(&self) -> Complex64 {
        self.v
    }
    fn conj(&self) -> Self {
        let mut r = Wd {
            v: self.v.conj(),
            d: [ZERO; K],
            db: [ZERO; K],
        };
        for k in 0..K {
            r.d[k] = self.db[k].conj();
            r.db[k] = self.d[k].conj();
        }
        r
    }
    fn recip_real(&self) -> Self {
        let x = self.v.re;
        let f = -1.0 / (x * x);
        let mut r = Wd::cst(Complex64::new(1.0 / x, 0.0));
        for k in 0..K {
            r.d[k] = self.d[k] * f;
            r.db[k] = self.db[k] * f;
        }
        r
    }
    fn sqrt_real(&self) -> Self {
        let s = self.v.re.sqrt();
        let f = 0.5 / s;
        let mut r = Wd::cst(Complex64::new(s, 0.0));
        for k in 0..K {
            r.d[k] = self.d[k] * f;
            r.db[k] = self.db[k] * f;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_derivatives() {
        // f(z) = |z|^2 = z z̄ : ∂f = z̄, ∂̄f = z
        let z0 = Complex64::new(0.3, -0.7);
        let z = Wd::<1>::seeded(z0, [Complex64::new(1.0, 0.0)], [ZERO]);
        let f = z.norm_sqr();
        assert!((f.d[0] - z0.conj()).norm() < 1e-15);
        assert!((f.db[0] - z0).norm() < 1e-15);
        // g = 1/|z| : ∂g = -z̄ / (2 |z|^3)
        let g = f.sqrt_real().recip_real();
        let want = -z0.conj() / (2.0 * z0.norm().powi(3));
        assert!((g.d[0] - want).norm() < 1e-14);
    }
}
