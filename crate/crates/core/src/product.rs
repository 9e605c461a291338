//! Galerkin-projected products of truncated Fourier series.
//!
//! Coefficient slices use the centred layout `c[n + n_max]` for `|n| <= n_max`.
//! Real fields are passed as their non-negative half `h[n]`, `n = 0..=n_max`,
//! with `c(-n) = conj(h[n])` implied.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Largest truncation handled by the direct double sum.
pub const DIRECT_PRODUCT_MAX: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn half_to_full(h: &[Complex64], k: i64) -> Complex64 {
    if k >= 0 {
        h[k as usize]
    } else {
        h[(-k) as usize].conj()
    }
}

/// Direct O(N^2) projected product `P_N(f g)`.
pub fn direct_product(n_max: usize, f: &[Complex64], g: &[Complex64], out: &mut [Complex64]) {
    let n = n_max as i64;
    for k in -n..=n {
        let lo = (-n).max(k - n);
        let hi = n.min(k + n);
        let mut acc = ZERO;
        for m in lo..=hi {
            acc += f[(m + n) as usize] * g[(k - m + n) as usize];
        }
        out[(k + n) as usize] = acc;
    }
}

/// Direct projected product `P_N(v u)` with `v` real, given by its half.
pub fn direct_real_times(n_max: usize, v_half: &[Complex64], u: &[Complex64], out: &mut [Complex64]) {
    let n = n_max as i64;
    for k in -n..=n {
        let lo = (-n).max(k - n);
        let hi = n.min(k + n);
        let mut acc = ZERO;
        for m in lo..=hi {
            acc += u[(m + n) as usize] * half_to_full(v_half, k - m);
        }
        out[(k + n) as usize] = acc;
    }
}

/// Direct `P_N(|u|^2)` on the non-negative modes.
pub fn direct_abs2_half(n_max: usize, u: &[Complex64], out: &mut [Complex64]) {
    let n = n_max as i64;
    for k in 0..=n {
        let mut acc = ZERO;
        for m in -n..=(n - k) {
            acc += u[(m + k + n) as usize] * u[(m + n) as usize].conj();
        }
        out[k as usize] = acc;
    }
}

/// Product evaluator choosing the direct sum or a zero-padded transform.
pub struct ProductEngine {
    n_max: usize,
    fft: Option<FftProducts>,
}

struct FftProducts {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftProducts {
    fn new(n_max: usize) -> Self {
        // Length >= 3N + 1 keeps every aliased image off the retained modes.
        let len = (3 * n_max + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            len,
            forward,
            inverse,
            a: vec![ZERO; len],
            b: vec![ZERO; len],
            scratch: vec![ZERO; scratch_len],
        }
    }

    fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.len as i64) as usize
    }

    fn load_full(&self, buf: &mut [Complex64], n_max: usize, c: &[Complex64]) {
        buf.fill(ZERO);
        let n = n_max as i64;
        for k in -n..=n {
            buf[self.slot(k)] = c[(k + n) as usize];
        }
    }

    fn load_half(&self, buf: &mut [Complex64], n_max: usize, h: &[Complex64]) {
        buf.fill(ZERO);
        let n = n_max as i64;
        for k in -n..=n {
            buf[self.slot(k)] = half_to_full(h, k);
        }
    }
}

impl ProductEngine {
    pub fn new(n_max: usize) -> Self {
        let fft = (n_max > DIRECT_PRODUCT_MAX).then(|| FftProducts::new(n_max));
        Self { n_max, fft }
    }

    /// Forces the transform path regardless of size.
    pub fn with_transform(n_max: usize) -> Self {
        Self {
            n_max,
            fft: Some(FftProducts::new(n_max)),
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn uses_transform(&self) -> bool {
        self.fft.is_some()
    }

    pub fn product(&mut self, f: &[Complex64], g: &[Complex64], out: &mut [Complex64]) {
        let n_max = self.n_max;
        match self.fft.as_mut() {
            None => direct_product(n_max, f, g, out),
            Some(ft) => {
                let mut a = std::mem::take(&mut ft.a);
                let mut b = std::mem::take(&mut ft.b);
                ft.load_full(&mut a, n_max, f);
                ft.load_full(&mut b, n_max, g);
                ft.multiply_into(&mut a, &mut b);
                ft.extract_full(&a, n_max, out);
                ft.a = a;
                ft.b = b;
            }
        }
    }

    pub fn real_times(&mut self, v_half: &[Complex64], u: &[Complex64], out: &mut [Complex64]) {
        let n_max = self.n_max;
        match self.fft.as_mut() {
            None => direct_real_times(n_max, v_half, u, out),
            Some(ft) => {
                let mut a = std::mem::take(&mut ft.a);
                let mut b = std::mem::take(&mut ft.b);
                ft.load_half(&mut a, n_max, v_half);
                ft.load_full(&mut b, n_max, u);
                ft.multiply_into(&mut a, &mut b);
                ft.extract_full(&a, n_max, out);
                ft.a = a;
                ft.b = b;
            }
        }
    }

    pub fn abs2_half(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        let n_max = self.n_max;
        match self.fft.as_mut() {
            None => direct_abs2_half(n_max, u, out),
            Some(ft) => {
                let mut a = std::mem::take(&mut ft.a);
                ft.load_full(&mut a, n_max, u);
                ft.inverse.process_with_scratch(&mut a, &mut ft.scratch);
                let scale = 1.0 / ft.len as f64;
                for z in a.iter_mut() {
                    *z = Complex64::new(z.norm_sqr() * scale, 0.0);
                }
                ft.forward.process_with_scratch(&mut a, &mut ft.scratch);
                out[..=n_max].copy_from_slice(&a[..=n_max]);
                ft.a = a;
            }
        }
    }
}

impl FftProducts {
    // On return `a` holds the forward transform of the pointwise product.
    fn multiply_into(&mut self, a: &mut [Complex64], b: &mut [Complex64]) {
        self.inverse.process_with_scratch(a, &mut self.scratch);
        self.inverse.process_with_scratch(b, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x = *x * *y * scale;
        }
        self.forward.process_with_scratch(a, &mut self.scratch);
    }

    fn extract_full(&self, a: &[Complex64], n_max: usize, out: &mut [Complex64]) {
        let n = n_max as i64;
        for k in -n..=n {
            out[(k + n) as usize] = a[self.slot(k)];
        }
    }
}
