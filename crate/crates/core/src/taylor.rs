//! Truncated multivariate Taylor series with complex coefficients.
//!
//! Used to differentiate atom profiles in the independent variables
//! `(u_1..u_n, ū_1..ū_n)` without hand-expanding the cutoff chain rule.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

pub(crate) struct Layout {
    pub order: usize,
    exps: Vec<Vec<u8>>,
    /// (i, j, k): monomial i times monomial j is monomial k.
    mul: Vec<(u16, u16, u16)>,
    /// Per variable: (source, target, factor) for d/dv.
    deriv: Vec<Vec<(u16, u16, f64)>>,
    /// Per variable: (source, target) for multiplication by δv.
    shift: Vec<Vec<(u16, u16)>>,
}

impl Layout {
    fn build(nv: usize, order: usize) -> Layout {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for d in 0..=order {
            let mut cur = vec![0u8; nv];
            enumerate(nv, d, 0, &mut cur, &mut exps);
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let index: HashMap<Vec<u8>, usize> = exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mut mul = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let e: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                mul.push((i as u16, j as u16, index[&e] as u16));
            }
        }
        let mut deriv = vec![Vec::new(); nv];
        for (i, e) in exps.iter().enumerate() {
            for v in 0..nv {
                if e[v] > 0 {
                    let mut t = e.clone();
                    t[v] -= 1;
                    deriv[v].push((i as u16, index[&t] as u16, e[v] as f64));
                }
            }
        }
        let mut shift = vec![Vec::new(); nv];
        for (i, e) in exps.iter().enumerate() {
            if degree[i] == order {
                continue;
            }
            for v in 0..nv {
                let mut t = e.clone();
                t[v] += 1;
                shift[v].push((i as u16, index[&t] as u16));
            }
        }
        Layout {
            order,
            exps,
            mul,
            deriv,
            shift,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    fn var_index(&self, v: usize) -> usize {
        self.exps
            .iter()
            .position(|e| self.degree_of(e) == 1 && e[v] == 1)
            .expect("variable monomial")
    }

    fn degree_of(&self, e: &[u8]) -> usize {
        e.iter().map(|&x| x as usize).sum()
    }
}

fn enumerate(nv: usize, remaining: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == nv - 1 {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        cur[pos] = a as u8;
        enumerate(nv, remaining - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Shared layout for `nv` variables truncated at `order`. Layouts are built
/// once and live for the rest of the process.
pub(crate) fn layout(nv: usize, order: usize) -> &'static Layout {
    static CACHE: OnceLock<RwLock<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(l) = cache.read().unwrap().get(&(nv, order)) {
        return l;
    }
    let mut w = cache.write().unwrap();
    w.entry((nv, order))
        .or_insert_with(|| Box::leak(Box::new(Layout::build(nv, order))))
}

#[derive(Clone)]
pub(crate) struct Tps {
    pub layout: &'static Layout,
    pub c: Vec<Complex64>,
}

impl Tps {
    pub fn constant(layout: &'static Layout, v: Complex64) -> Tps {
        let mut c = vec![Complex64::new(0.0, 0.0); layout.len()];
        c[0] = v;
        Tps { layout, c }
    }

    /// `v0 + δ_var`.
    pub fn variable(layout: &'static Layout, var: usize, v0: Complex64) -> Tps {
        let mut t = Tps::constant(layout, v0);
        let idx = layout.var_index(var);
        t.c[idx] = Complex64::new(1.0, 0.0);
        t
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    pub fn mul(&self, other: &Tps) -> Tps {
        let mut c = vec![Complex64::new(0.0, 0.0); self.c.len()];
        for &(i, j, k) in &self.layout.mul {
            let a = self.c[i as usize];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            c[k as usize] += a * other.c[j as usize];
        }
        Tps { layout: self.layout, c }
    }

    pub fn add(&self, other: &Tps) -> Tps {
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a + b).collect();
        Tps { layout: self.layout, c }
    }

    pub fn scale(&self, s: Complex64) -> Tps {
        Tps {
            layout: self.layout,
            c: self.c.iter().map(|a| a * s).collect(),
        }
    }

    pub fn deriv(&self, var: usize) -> Tps {
        let mut c = vec![Complex64::new(0.0, 0.0); self.c.len()];
        for &(src, dst, f) in &self.layout.deriv[var] {
            c[dst as usize] += self.c[src as usize] * f;
        }
        Tps { layout: self.layout, c }
    }

    /// `self · (v0 + δ_var)`.
    pub fn mul_var(&self, var: usize, v0: Complex64) -> Tps {
        let mut c: Vec<Complex64> = self.c.iter().map(|a| a * v0).collect();
        for &(src, dst) in &self.layout.shift[var] {
            c[dst as usize] += self.c[src as usize];
        }
        Tps { layout: self.layout, c }
    }

    pub fn sub(&self, other: &Tps) -> Tps {
        let c = self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect();
        Tps { layout: self.layout, c }
    }

    /// Compose a univariate series `Σ_k g[k] x^k` with `self - self(0)`.
    pub fn compose(&self, g: &[Complex64]) -> Tps {
        let mut delta = self.clone();
        delta.c[0] = Complex64::new(0.0, 0.0);
        let mut out = Tps::constant(self.layout, Complex64::new(0.0, 0.0));
        for coef in g.iter().rev() {
            out = out.mul(&delta);
            out.c[0] += coef;
        }
        out
    }
}

/// Univariate real Taylor coefficients (order `n`) of `sqrt(q0 + x)`.
pub(crate) fn sqrt_series(q0: f64, n: usize) -> Vec<f64> {
    let s0 = q0.sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut binom = 1.0;
    for k in 0..=n {
        out.push(s0 * binom / q0.powi(k as i32));
        binom *= (0.5 - k as f64) / (k as f64 + 1.0);
    }
    out
}

/// Compose two real univariate series: `g(f(x))` where `f(0)` is the
/// expansion point of `g`. Both truncated at order `n`.
pub(crate) fn compose_real(g: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len() - 1;
    let mut delta = f.to_vec();
    delta[0] = 0.0;
    let mut out = vec![0.0; n + 1];
    for coef in g.iter().rev() {
        let mut next = vec![0.0; n + 1];
        for i in 0..=n {
            if out[i] == 0.0 {
                continue;
            }
            for j in 1..=n - i {
                next[i + j] += out[i] * delta[j];
            }
        }
        next[0] += coef;
        out = next;
    }
    out
}

/// Taylor coefficients of a real polynomial `Σ p[i] t^i` at `t0`, order `n`.
pub(crate) fn poly_series(p: &[f64], t0: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        // d^k/dt^k t^i / k! = C(i, k) t^(i-k)
        let mut binom = 1.0;
        for k in 0..=n.min(i) {
            out[k] += pi * binom * t0.powi((i - k) as i32);
            binom *= (i - k) as f64 / (k as f64 + 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(layout(2, 3).len(), 10);
        assert_eq!(layout(4, 3).len(), 35);
        assert_eq!(layout(1, 4).len(), 5);
    }

    #[test]
    fn product_and_derivative() {
        let l = layout(2, 3);
        let x = Tps::variable(l, 0, c(2.0));
        let y = Tps::variable(l, 1, c(3.0));
        // f = x^2 y ; df/dx = 2xy = 12 at (2,3)
        let f = x.mul(&x).mul(&y);
        assert!((f.value() - c(12.0)).norm() < 1e-14);
        assert!((f.deriv(0).value() - c(12.0)).norm() < 1e-14);
        // d2f/dx dy = 2x = 4
        assert!((f.deriv(0).deriv(1).value() - c(4.0)).norm() < 1e-14);
        let g = x.mul(&y);
        let h = x.mul_var(1, c(3.0));
        for (a, b) in g.c.iter().zip(&h.c) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn sqrt_composition_matches_closed_form() {
        let g = sqrt_series(4.0, 3);
        // sqrt(4 + x) = 2 + x/4 - x^2/64 + x^3/512
        let want = [2.0, 0.25, -1.0 / 64.0, 1.0 / 512.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        // exp-like composition sanity: (1 + x)^2 composed with f = [1, 1] gives
        // series of (1 + x)^2 at... g(t) = t^2 expanded at t0 = 1 -> [1, 2, 1]
        let g2 = poly_series(&[0.0, 0.0, 1.0], 1.0, 3);
        assert_eq!(g2, vec![1.0, 2.0, 1.0, 0.0]);
        let h = compose_real(&g2, &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(h, vec![1.0, 2.0, 1.0, 0.0]);
    }
}
