//! Square 2D FFTs and the linear (zero-padded) correlations built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec;

/// Forward and inverse plans for an `m x m` transform.
pub struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft2>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    /// Shared plan for size `m` (plans are cached per size).
    pub fn get(m: usize) -> Arc<Fft2> {
        let mut c = cache().lock().unwrap();
        c.entry(m)
            .or_insert_with(|| {
                let mut p = FftPlanner::new();
                Arc::new(Fft2 {
                    m,
                    fwd: p.plan_fft_forward(m),
                    inv: p.plan_fft_inverse(m),
                })
            })
            .clone()
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/m²` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / (self.m * self.m) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        assert_eq!(data.len(), m * m);
        let rows = |d: &mut [Complex64]| {
            exec::chunks_mut(d, m, |_, row| plan.process(row));
        };
        rows(data);
        transpose(data, m);
        rows(data);
        transpose(data, m);
    }
}

fn transpose(d: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            d.swap(i * m + j, j * m + i);
        }
    }
}

/// Embed an `n x n` real array into the bottom-left corner of an `m x m` complex one.
pub fn embed(values: &[f64], n: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..n {
        for i in 0..n {
            out[j * m + i] = Complex64::new(values[j * n + i], 0.0);
        }
    }
    out
}

/// Wrap a signed offset into `0..m`.
#[inline]
pub fn wrap(d: isize, m: usize) -> usize {
    d.rem_euclid(m as isize) as usize
}

/// Linear cross-correlation of two `n x n` arrays on the grid of integer shifts.
///
/// Entry for shift `(a, b)` is `Σ_{i,j} f[i,j] g[i+a, j+b]` with zero extension,
/// stored at `wrap(b)*m + wrap(a)` in a `2n x 2n` array.
#[derive(Clone, Debug)]
pub struct Correlation {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl Correlation {
    pub fn compute(f: &[f64], g: &[f64], n: usize) -> Correlation {
        let m = 2 * n;
        let plan = Fft2::get(m);
        let mut ff = embed(f, n, m);
        let mut gg = embed(g, n, m);
        plan.forward(&mut ff);
        plan.forward(&mut gg);
        for (a, b) in ff.iter_mut().zip(gg.iter()) {
            *a = a.conj() * b;
        }
        plan.inverse(&mut ff);
        Correlation { n, m, data: ff.into_iter().map(|z| z.re).collect() }
    }

    /// Value at the integer shift `(a, b)`; zero for `|a|` or `|b| >= n`.
    pub fn at(&self, a: isize, b: isize) -> f64 {
        let n = self.n as isize;
        if a.abs() >= n || b.abs() >= n {
            return 0.0;
        }
        self.data[wrap(b, self.m) * self.m + wrap(a, self.m)]
    }

    /// Bilinear interpolation at a fractional shift (in cells).
    pub fn interp(&self, a: f64, b: f64) -> f64 {
        let a0 = a.floor();
        let b0 = b.floor();
        let fa = a - a0;
        let fb = b - b0;
        let (a0, b0) = (a0 as isize, b0 as isize);
        let v00 = self.at(a0, b0);
        let v10 = self.at(a0 + 1, b0);
        let v01 = self.at(a0, b0 + 1);
        let v11 = self.at(a0 + 1, b0 + 1);
        (1.0 - fb) * ((1.0 - fa) * v00 + fa * v10) + fb * ((1.0 - fa) * v01 + fa * v11)
    }
}

/// Linear convolution of an `n x n` array with a kernel given on integer offsets.
///
/// `out[i] = Σ_j values[j] · kernel(i - j)`, for output cells inside the window.
pub fn convolve_same<K>(values: &[f64], n: usize, kernel: K) -> Vec<f64>
where
    K: Fn(isize, isize) -> f64,
{
    let m = 2 * n;
    let plan = Fft2::get(m);
    let mut a = embed(values, n, m);
    let mut k = vec![Complex64::new(0.0, 0.0); m * m];
    let nn = n as isize;
    for b in -(nn - 1)..nn {
        for a_ in -(nn - 1)..nn {
            k[wrap(b, m) * m + wrap(a_, m)] = Complex64::new(kernel(a_, b), 0.0);
        }
    }
    plan.forward(&mut a);
    plan.forward(&mut k);
    for (x, y) in a.iter_mut().zip(k.iter()) {
        *x *= y;
    }
    plan.inverse(&mut a);
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[j * n + i] = a[j * m + i].re;
        }
    }
    out
}
