//! The Gaussian `g`, its partial derivatives `h¹, h²` and Laplacian `k`, with
//! dilations `f_β(x) = β⁻² f(x/β)`.
//!
//! Normalization: `g(x) = e^{-π|x|²}`, so `∫g = 1` and `ĝ(ξ) = e^{-π|ξ|²}`.
//! This is the normalization under which the convolution identities
//! `g_α∗g_β = g_γ`, `Σ h_α∗h_β = (αβ/γ²) k_γ`, `k_α∗g_β = (α²/γ²) k_γ`
//! (`γ² = α²+β²`) and the heat equation `∂_t g_t = k_t/(2πt)` hold as written.
//! The wider Gaussian `e^{-2π|x|²}` equals `½ g_{1/√2}`; see [`narrow_gaussian`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::convolve_same;
use crate::planar_fields::{Grid, Window};
use crate::P2;

/// `∫ g`.
pub const GAUSSIAN_MASS: f64 = 1.0;

/// Kernels are truncated beyond this many multiples of `β` (tail below 1e-14
/// relative to the peak, polynomial factor of `k` included).
pub fn truncation_radius() -> f64 {
    (1e16f64.ln() / PI).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    G,
    H1,
    H2,
    K,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub beta: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, beta: f64) -> Result<KernelSpec> {
        if !(beta > 0.0) || !beta.is_finite() {
            return invalid(format!("kernel scale must be positive, got {beta}"));
        }
        Ok(KernelSpec { kind, beta })
    }

    pub fn g(beta: f64) -> KernelSpec {
        KernelSpec { kind: KernelKind::G, beta }
    }

    pub fn k(beta: f64) -> KernelSpec {
        KernelSpec { kind: KernelKind::K, beta }
    }

    pub fn h(l: usize, beta: f64) -> KernelSpec {
        let kind = if l == 1 { KernelKind::H1 } else { KernelKind::H2 };
        KernelSpec { kind, beta }
    }

    pub fn eval(&self, x: P2) -> f64 {
        eval_kernel(*self, x)
    }

    /// Continuous Fourier transform at `ξ` (convention `∫ f(x) e^{-2πi x·ξ} dx`).
    /// Purely imaginary for `h`; returned as `(re, im)`.
    pub fn fourier(&self, xi: P2) -> (f64, f64) {
        let u = xi * self.beta;
        let gh = g_hat(u);
        match self.kind {
            KernelKind::G => (gh, 0.0),
            KernelKind::K => (k_hat(u), 0.0),
            KernelKind::H1 => (0.0, 2.0 * PI * u.x * gh),
            KernelKind::H2 => (0.0, 2.0 * PI * u.y * gh),
        }
    }
}

pub fn g(x: P2) -> f64 {
    (-PI * x.norm2()).exp()
}

pub fn k(x: P2) -> f64 {
    let r2 = x.norm2();
    (-4.0 * PI + 4.0 * PI * PI * r2) * (-PI * r2).exp()
}

pub fn g_hat(xi: P2) -> f64 {
    (-PI * xi.norm2()).exp()
}

pub fn k_hat(xi: P2) -> f64 {
    -4.0 * PI * PI * xi.norm2() * g_hat(xi)
}

/// Radial profiles `g_β(r)` and `k_β(r)` and their transforms, as functions of `|x|²`.
pub fn g_beta_r2(beta: f64, r2: f64) -> f64 {
    (-PI * r2 / (beta * beta)).exp() / (beta * beta)
}

pub fn k_beta_r2(beta: f64, r2: f64) -> f64 {
    let b2 = beta * beta;
    let u = r2 / b2;
    (-4.0 * PI + 4.0 * PI * PI * u) * (-PI * u).exp() / b2
}

pub fn g_hat_beta_r2(beta: f64, xi2: f64) -> f64 {
    (-PI * beta * beta * xi2).exp()
}

pub fn k_hat_beta_r2(beta: f64, xi2: f64) -> f64 {
    let u = beta * beta * xi2;
    -4.0 * PI * PI * u * (-PI * u).exp()
}

/// Closed-form value of the dilated kernel, `β⁻² f(x/β)`.
pub fn eval_kernel(spec: KernelSpec, x: P2) -> f64 {
    let b = spec.beta;
    let y = x * (1.0 / b);
    let base = match spec.kind {
        KernelKind::G => g(y),
        KernelKind::H1 => -2.0 * PI * y.x * g(y),
        KernelKind::H2 => -2.0 * PI * y.y * g(y),
        KernelKind::K => k(y),
    };
    base / (b * b)
}

/// `e^{-2π|x|²}`, the Gaussian as written in some sources; equals `½ g_{1/√2}`.
pub fn narrow_gaussian(x: P2) -> f64 {
    (-2.0 * PI * x.norm2()).exp()
}

fn check_resolved(beta: f64, h: f64) -> Result<()> {
    if beta < 2.0 * h {
        return Err(Error::UnderResolved { beta, min: 2.0 * h });
    }
    Ok(())
}

/// Linear convolution of a sampled function with a closed-form kernel,
/// evaluated on the same window.
pub fn convolve(f: &Grid, spec: KernelSpec) -> Result<Grid> {
    let h = f.h();
    check_resolved(spec.beta, h)?;
    let cut = truncation_radius() * spec.beta;
    convolve_fn(f, |d| if d.norm() > cut { 0.0 } else { eval_kernel(spec, d) })
}

/// Linear convolution with an arbitrary kernel function (evaluated at grid offsets).
pub fn convolve_fn(f: &Grid, kernel: impl Fn(P2) -> f64) -> Result<Grid> {
    let h = f.h();
    let n = f.n();
    let h2 = h * h;
    let values = convolve_same(&f.values, n, |a, b| {
        kernel(P2::new(a as f64 * h, b as f64 * h)) * h2
    });
    Grid::from_values(f.window, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    /// `g_α ∗ g_β = g_γ`
    GG,
    /// `Σ_l h^(l)_α ∗ h^(l)_β = (αβ/γ²) k_γ`
    HH,
    /// `k_α ∗ g_β = (α²/γ²) k_γ`
    KG,
}

impl std::str::FromStr for Identity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Identity> {
        match s {
            "gg" => Ok(Identity::GG),
            "hh" => Ok(Identity::HH),
            "kg" => Ok(Identity::KG),
            _ => Err(Error::Parse(format!("unknown identity `{s}` (gg, hh, kg)"))),
        }
    }
}

/// Right-hand side of an identity as a closed form.
pub fn identity_rhs(which: Identity, alpha: f64, beta: f64) -> impl Fn(P2) -> f64 {
    let g2 = alpha * alpha + beta * beta;
    let gamma = g2.sqrt();
    let (kind, c) = match which {
        Identity::GG => (KernelKind::G, 1.0),
        Identity::HH => (KernelKind::K, alpha * beta / g2),
        Identity::KG => (KernelKind::K, alpha * alpha / g2),
    };
    move |x| c * eval_kernel(KernelSpec { kind, beta: gamma }, x)
}

/// Convolve the left-hand side on `w` and return the maximum absolute deviation
/// from the closed-form right-hand side over all cell centers.
pub fn check_identity(which: Identity, alpha: f64, beta: f64, w: Window) -> Result<f64> {
    let h = w.h();
    if alpha < 4.0 * h || beta < 4.0 * h {
        return invalid(format!("identity check needs alpha, beta >= 4h = {}", 4.0 * h));
    }
    let sample = |spec: KernelSpec| Grid::from_fn(w, |x| eval_kernel(spec, x));
    let lhs = match which {
        Identity::GG => convolve(&sample(KernelSpec::g(alpha)), KernelSpec::g(beta))?,
        Identity::KG => convolve(&sample(KernelSpec::k(alpha)), KernelSpec::g(beta))?,
        Identity::HH => {
            let a = convolve(&sample(KernelSpec::h(1, alpha)), KernelSpec::h(1, beta))?;
            let b = convolve(&sample(KernelSpec::h(2, alpha)), KernelSpec::h(2, beta))?;
            a.add(&b)?
        }
    };
    let rhs = Grid::from_fn(w, identity_rhs(which, alpha, beta));
    Ok(lhs.max_abs_diff(&rhs))
}

/// `|(g_{t+s}(x) − g_{t−s}(x))/(2s) − k_t(x)/(2πt)|`.
pub fn check_heat(t: f64, step: f64, x: P2) -> Result<f64> {
    if !(step > 0.0 && step < t / 2.0) {
        return invalid(format!("need 0 < step < t/2, got step={step}, t={t}"));
    }
    let fd = (eval_kernel(KernelSpec::g(t + step), x) - eval_kernel(KernelSpec::g(t - step), x))
        / (2.0 * step);
    let rhs = eval_kernel(KernelSpec::k(t), x) / (2.0 * PI * t);
    Ok((fd - rhs).abs())
}

/// `Σ_j |k̂(η_j)|` for a lacunary list (`|η_{j+1}| ≥ 2|η_j|`).
pub fn lacunary_sum(etas: &[P2]) -> Result<f64> {
    for (j, w) in etas.windows(2).enumerate() {
        if w[1].norm() < 2.0 * w[0].norm() {
            return invalid(format!(
                "not lacunary at index {}: |eta| = {} then {}",
                j + 1,
                w[0].norm(),
                w[1].norm()
            ));
        }
    }
    Ok(etas.iter().map(|&e| k_hat(e).abs()).sum())
}

/// Dyadic frequencies `(2^j, 0)` for `j` in `from..=to`.
pub fn dyadic_etas(from: i32, to: i32) -> Vec<P2> {
    (from..=to).map(|j| P2::new(2f64.powi(j), 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centered(side: f64, n: usize) -> Window {
        Window::centered(P2::ZERO, side, n).unwrap()
    }

    fn fd_laplacian(f: impl Fn(P2) -> f64, x: P2, e: f64) -> f64 {
        (f(x + P2::new(e, 0.0)) + f(x - P2::new(e, 0.0)) + f(x + P2::new(0.0, e))
            + f(x - P2::new(0.0, e))
            - 4.0 * f(x))
            / (e * e)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_kernel(KernelSpec::g(1.0), P2::ZERO), 1.0);
        assert_eq!(eval_kernel(KernelSpec::g(2.0), P2::ZERO), 0.25);
        assert!((eval_kernel(KernelSpec::k(1.0), P2::ZERO) + 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn k_is_laplacian_of_g() {
        for x in [P2::ZERO, P2::new(0.3, -0.2), P2::new(1.0, 0.5)] {
            let fd = fd_laplacian(g, x, 1e-4);
            assert!((fd - k(x)).abs() < 1e-5, "{x}: {fd} vs {}", k(x));
        }
    }

    #[test]
    fn h_is_gradient_of_g() {
        let e = 1e-5;
        for x in [P2::new(0.3, -0.2), P2::new(-0.7, 0.1)] {
            let d1 = (g(x + P2::new(e, 0.0)) - g(x - P2::new(e, 0.0))) / (2.0 * e);
            let d2 = (g(x + P2::new(0.0, e)) - g(x - P2::new(0.0, e))) / (2.0 * e);
            assert!((d1 - eval_kernel(KernelSpec::h(1, 1.0), x)).abs() < 1e-8);
            assert!((d2 - eval_kernel(KernelSpec::h(2, 1.0), x)).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_mass_by_radial_quadrature() {
        // ∫ g = 2π ∫_0^∞ r e^{-πr²} dr, midpoint rule
        let steps = 200_000;
        let dr = 10.0 / steps as f64;
        let m: f64 = (0..steps)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                2.0 * PI * r * (-PI * r * r).exp() * dr
            })
            .sum();
        assert!((m - GAUSSIAN_MASS).abs() < 1e-9);
        // the wider Gaussian has mass ½
        let m2: f64 = (0..steps)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                2.0 * PI * r * narrow_gaussian(P2::new(r, 0.0)) * dr
            })
            .sum();
        assert!((m2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sampled_kernel_masses() {
        let w = centered(16.0, 128);
        let h = w.h();
        for beta in [8.0 * h, 1.0, 2.0] {
            let mass = |spec: KernelSpec| Grid::from_fn(w, |x| eval_kernel(spec, x)).integrate();
            assert!((mass(KernelSpec::g(beta)) - 1.0).abs() < 1e-8);
            assert!(mass(KernelSpec::h(1, beta)).abs() < 1e-8);
            assert!(mass(KernelSpec::h(2, beta)).abs() < 1e-8);
            assert!(mass(KernelSpec::k(beta)).abs() < 1e-8);
        }
    }

    #[test]
    fn sampled_fourier_matches_closed_form() {
        // Riemann sum of g e^{-2πi x·ξ}: the DFT of the samples
        let w = centered(16.0, 128);
        let samples = Grid::from_fn(w, g);
        let h = w.h();
        for xi in [P2::ZERO, P2::new(0.5, 0.0), P2::new(1.0, 1.0), P2::new(-2.0, 0.7)] {
            let mut re = 0.0;
            let mut im = 0.0;
            for j in 0..w.n {
                for i in 0..w.n {
                    let x = w.cell_center(i, j);
                    let ph = -2.0 * PI * x.dot(xi);
                    re += samples.get(i, j) * ph.cos() * h * h;
                    im += samples.get(i, j) * ph.sin() * h * h;
                }
            }
            assert!((re - g_hat(xi)).abs() < 1e-6 && im.abs() < 1e-6, "{xi}");
        }
    }

    #[test]
    fn delta_convolution_reproduces_kernel() {
        let w = centered(8.0, 64);
        let h = w.h();
        let c = w.cell_center(32, 32);
        let mut delta = Grid::zeros(w);
        delta.values[32 * 64 + 32] = 1.0;
        let beta = 4.0 * h;
        let out = convolve(&delta, KernelSpec::g(beta)).unwrap();
        let peak = eval_kernel(KernelSpec::g(beta), P2::ZERO);
        for j in 0..w.n {
            for i in 0..w.n {
                let want = eval_kernel(KernelSpec::g(beta), w.cell_center(i, j) - c) * h * h;
                if want > 1e-6 * peak * h * h {
                    assert!((out.get(i, j) - want).abs() <= 1e-3 * want.abs() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn convolution_preserves_mass_and_kills_it_for_k() {
        let w = centered(16.0, 128);
        let f = Grid::from_fn(w, |x| if x.norm() < 2.0 { 1.0 } else { 0.0 });
        let m = f.integrate();
        let fg = convolve(&f, KernelSpec::g(0.5)).unwrap();
        assert!((fg.integrate() - m * GAUSSIAN_MASS).abs() < 1e-8);
        let fk = convolve(&f, KernelSpec::k(0.5)).unwrap();
        assert!(fk.integrate().abs() < 1e-8);
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        let w = centered(8.0, 64);
        let f = Grid::zeros(w);
        assert!(matches!(convolve(&f, KernelSpec::g(w.h())), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn identities_hold_on_a_modest_grid() {
        let w = centered(32.0, 256);
        for (a, b) in [(1.0, 1.0), (1.0, 2.0)] {
            for which in [Identity::GG, Identity::HH, Identity::KG] {
                let e = check_identity(which, a, b, w).unwrap();
                assert!(e < 1e-6, "{which:?} {a} {b}: {e}");
            }
        }
    }

    #[test]
    fn kg_prefactor_is_half_for_equal_scales() {
        let f = identity_rhs(Identity::KG, 1.5, 1.5);
        let x = P2::new(0.4, 0.1);
        let k_gamma = eval_kernel(KernelSpec::k(1.5 * 2f64.sqrt()), x);
        assert!((f(x) - 0.5 * k_gamma).abs() < 1e-15);
    }

    #[test]
    fn heat_equation_examples() {
        assert!(check_heat(1.0, 1e-4, P2::new(0.3, 0.0)).unwrap() <= 1e-6);
        assert!(check_heat(1.0, 1e-4, P2::ZERO).unwrap() <= 1e-6);
        assert!(check_heat(5.0, 1e-3, P2::new(1.0, 1.0)).unwrap() <= 1e-7);
        // at the origin both sides equal -2 t^{-3}
        let t: f64 = 1.7;
        let rhs = eval_kernel(KernelSpec::k(t), P2::ZERO) / (2.0 * PI * t);
        assert!((rhs + 2.0 / t.powi(3)).abs() < 1e-12);
        assert!(check_heat(1.0, 0.6, P2::ZERO).is_err());
    }

    #[test]
    fn lacunary_sum_examples() {
        assert_eq!(lacunary_sum(&[]).unwrap(), 0.0);
        assert_eq!(lacunary_sum(&[P2::ZERO]).unwrap(), 0.0);
        let s20 = lacunary_sum(&dyadic_etas(1, 20)).unwrap();
        let s40 = lacunary_sum(&dyadic_etas(1, 40)).unwrap();
        assert!((s40 - s20).abs() < 1e-12);
        let first = 16.0 * PI * PI * (-4.0 * PI).exp();
        assert!((s20 - first) / first < 1e-3);
        assert!(lacunary_sum(&[P2::new(1.0, 0.0), P2::new(1.5, 0.0)]).is_err());
    }

    #[test]
    fn k_hat_matches_numerical_fourier_integral() {
        let eta = P2::new(0.7, 0.0);
        let w = centered(12.0, 256);
        let h = w.h();
        let mut s = 0.0;
        for j in 0..w.n {
            for i in 0..w.n {
                let x = w.cell_center(i, j);
                s += k(x) * (2.0 * PI * x.dot(eta)).cos() * h * h;
            }
        }
        assert!((s - k_hat(eta)).abs() < 1e-9, "{s} vs {}", k_hat(eta));
    }

    #[test]
    fn kernel_fourier_consistency() {
        let spec = KernelSpec::k(1.3);
        let xi = P2::new(0.2, 0.4);
        let (re, im) = spec.fourier(xi);
        assert!((re - k_hat(xi * 1.3)).abs() < 1e-15 && im == 0.0);
    }
}
