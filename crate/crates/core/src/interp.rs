//! Off-grid sampling by local barycentric Lagrange interpolation.
//!
//! A 16-point stencil centred on the target, with periodic indexing. Points
//! outside [-L, L) evaluate to zero and are counted by the caller.

use num_complex::Complex64;

use crate::grid::Grid1D;

pub const STENCIL: usize = 16;

struct Weights([f64; STENCIL]);

impl Weights {
    fn new() -> Self {
        // w_j = (-1)^j binom(m-1, j) for equispaced nodes.
        let mut w = [0.0; STENCIL];
        let mut b = 1.0;
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = if j % 2 == 0 { b } else { -b };
            b = b * (STENCIL - 1 - j) as f64 / (j + 1) as f64;
        }
        Weights(w)
    }
}

pub struct Interpolator<'a> {
    grid: Grid1D,
    data: &'a [Complex64],
    w: Weights,
}

impl<'a> Interpolator<'a> {
    pub fn new(grid: Grid1D, data: &'a [Complex64]) -> Self {
        Self {
            grid,
            data,
            w: Weights::new(),
        }
    }

    pub fn inside(&self, x: f64) -> bool {
        let l = self.grid.half_width();
        x >= -l && x < l
    }

    /// Interpolated value at `x`; `None` outside the domain.
    pub fn eval(&self, x: f64) -> Option<Complex64> {
        if !self.inside(x) {
            return None;
        }
        let n = self.grid.n() as i64;
        let s = (x + self.grid.half_width()) / self.grid.dx();
        let base = s.floor() as i64 - (STENCIL as i64 / 2 - 1);
        let t = s - base as f64;
        let idx = |m: usize| (base + m as i64).rem_euclid(n) as usize;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for m in 0..STENCIL {
            let d = t - m as f64;
            if d == 0.0 {
                return Some(self.data[idx(m)]);
            }
            let c = self.w.0[m] / d;
            num += self.data[idx(m)] * c;
            den += c;
        }
        Some(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_smooth_functions() {
        let g = Grid1D::new(512, 10.0).unwrap();
        let f = |x: f64| Complex64::new((-x * x / 4.0).exp(), (0.7 * x).sin() * (-x * x / 8.0).exp());
        let data: Vec<_> = g.xs().into_iter().map(f).collect();
        let it = Interpolator::new(g, &data);
        assert_eq!(it.eval(g.x(100)).unwrap(), data[100]);
        let mut worst: f64 = 0.0;
        for k in 0..997 {
            let x = -9.7 + k as f64 * 0.0193;
            worst = worst.max((it.eval(x).unwrap() - f(x)).norm());
        }
        assert!(worst < 1e-12, "{worst}");
        assert!(it.eval(10.0).is_none());
        assert!(it.eval(-10.01).is_none());
    }

    #[test]
    fn weights_are_alternating_binomials() {
        let w = Weights::new();
        assert_eq!(w.0[0], 1.0);
        assert_eq!(w.0[1], -15.0);
        assert_eq!(w.0[15], -1.0);
    }
}
