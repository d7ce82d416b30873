//! Singular Brascamp–Lieb forms
//!
//! `J_j = −∫_0^∞ ∫∫ Π_r f_r(x + r·v) K_j^{sα}(v) dv dx ds/s`,
//! `K_j^{sα}(v) = k_{sα_j}(v_j) Π_{i≠j} g_{sα_i}(v_i)`,
//!
//! for `n ≤ 3` on grid fields. The `x, v_1` integral is a cross-correlation
//! of two products of shifted fields; it is compressed to a radial profile
//! (kernels are radial) once per outer shift, and every `s` node is then a
//! cheap weighted sum. A kernel narrower than four grid spacings is applied
//! on the frequency side (band-limited reading of the samples); wider ones
//! are summed in space.
//!
//! `n = 3` runs the `n = 2` pipeline on the products `f_{r,0} · τ_{v_3} f_{r,1}`
//! with `v_3` on a coarser sublattice.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec;
use crate::fft::{embed, wrap, Fft2};
use crate::gowers::{FreezeSpec, HypercubeAssignment, VertexFn};
use crate::kernels::{convolve, g_beta_r2, g_hat_beta_r2, k_beta_r2, k_hat_beta_r2, KernelSpec};
use crate::planar_fields::{generate, Grid, GridField, SetSpec, Window};
use crate::P2;

/// Kernel scales below `RESOLVE · spacing` are handled spectrally.
const RESOLVE: f64 = 4.0;

/// Default `v_3` stride for `n = 3`.
pub const V3_STRIDE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub q: usize,
}

impl SGrid {
    /// `[1e-3, 1e3]` with 200 log-spaced nodes.
    pub fn standard() -> SGrid {
        SGrid { s_min: 1e-3, s_max: 1e3, q: 200 }
    }

    /// Range covering kernel scales `[1e-3, 1e3]` for every `α_i`, with the
    /// standard node density.
    pub fn adapted(alpha: &[f64]) -> SGrid {
        let amax = alpha.iter().cloned().fold(f64::MIN, f64::max);
        let amin = alpha.iter().cloned().fold(f64::MAX, f64::min);
        let s_min = 1e-3 / amax;
        let s_max = 1e3 / amin;
        let q = ((200.0 * (s_max / s_min).log10() / 6.0).ceil() as usize).max(200);
        SGrid { s_min, s_max, q }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_min < self.s_max) {
            return invalid(format!("need 0 < s_min < s_max, got [{}, {}]", self.s_min, self.s_max));
        }
        if self.q < 100 {
            return invalid(format!("need at least 100 s nodes, got {}", self.q));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.s_max / self.s_min).ln() / (self.q - 1) as f64
    }

    /// Nodes extended by at least a factor 2 on both ends; returns the nodes
    /// and the offset of `s_min` in them.
    fn extended(&self) -> (Vec<f64>, usize) {
        let d = self.step();
        let extra = (2f64.ln() / d).ceil() as usize;
        let nodes = (0..self.q + 2 * extra)
            .map(|k| self.s_min * ((k as f64 - extra as f64) * d).exp())
            .collect();
        (nodes, extra)
    }
}

fn trapezoid(vals: &[f64], d: f64) -> f64 {
    let n = vals.len();
    let terms: Vec<f64> = vals
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * d * v } else { d * v })
        .collect();
    exec::ordered_sum(&terms)
}

#[derive(Clone, Debug)]
pub struct SBLInstance {
    pub n: usize,
    /// Laplacian coordinate, `1..=n`.
    pub j: usize,
    pub alpha: Vec<f64>,
    pub fields: HypercubeAssignment,
    pub s_grid: SGrid,
}

impl SBLInstance {
    pub fn new(j: usize, alpha: Vec<f64>, fields: HypercubeAssignment, s_grid: SGrid) -> Result<SBLInstance> {
        let n = fields.n();
        let inst = SBLInstance { n, j, alpha, fields, s_grid };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 3 {
            return invalid(format!("forms are implemented for n in 1..=3, got {}", self.n));
        }
        if self.j == 0 || self.j > self.n {
            return invalid(format!("Laplacian coordinate {} outside 1..={}", self.j, self.n));
        }
        if self.alpha.len() != self.n || self.alpha.iter().any(|a| !(*a > 0.0)) {
            return invalid("need n positive scales α_i");
        }
        self.s_grid.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeContribution {
    pub s: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SBLResult {
    pub j: usize,
    pub value: f64,
    pub nodes: Vec<NodeContribution>,
    /// Value on `[s_min/2, 2 s_max]` at the same node density.
    pub extended_value: f64,
    pub converged: bool,
}

pub const CONVERGENCE_REL_TOL: f64 = 1e-3;

impl SBLResult {
    fn from_inner(j: usize, grid: &SGrid, nodes: &[f64], offset: usize, inner: &[f64]) -> SBLResult {
        let d = grid.step();
        let core = &inner[offset..offset + grid.q];
        let value = -trapezoid(core, d);
        let extended_value = -trapezoid(inner, d);
        let contributions = core
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let w = if i == 0 || i == grid.q - 1 { 0.5 * d } else { d };
                NodeContribution { s: nodes[offset + i], contribution: -w * v }
            })
            .collect();
        let converged = (extended_value - value).abs() <= CONVERGENCE_REL_TOL * value.abs().max(1e-300);
        SBLResult { j, value, nodes: contributions, extended_value, converged }
    }

    /// `Σ |node contribution|`, the natural size of the form.
    pub fn abs_mass(&self) -> f64 {
        self.nodes.iter().map(|c| c.contribution.abs()).sum()
    }
}

/// `K_j^{sα}(v) = k_{sα_j}(v_j) Π_{i≠j} g_{sα_i}(v_i)` (`j` is 1-based).
pub fn kernel_eval(alpha: &[f64], j: usize, s: f64, v: &[P2]) -> Result<f64> {
    if !(s > 0.0) {
        return invalid("s must be positive");
    }
    if v.len() != alpha.len() || j == 0 || j > alpha.len() {
        return invalid("kernel arguments do not match the scales");
    }
    Ok(v.iter()
        .zip(alpha)
        .enumerate()
        .map(|(i, (x, a))| {
            let b = s * a;
            if i + 1 == j {
                k_beta_r2(b, x.norm2())
            } else {
                g_beta_r2(b, x.norm2())
            }
        })
        .product())
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    G,
    K,
}

fn kernel_r2(kind: Kind, beta: f64, r2: f64) -> f64 {
    match kind {
        Kind::G => g_beta_r2(beta, r2),
        Kind::K => k_beta_r2(beta, r2),
    }
}

fn kernel_hat_r2(kind: Kind, beta: f64, xi2: f64) -> f64 {
    match kind {
        Kind::G => g_hat_beta_r2(beta, xi2),
        Kind::K => k_hat_beta_r2(beta, xi2),
    }
}

fn signed(i: usize, m: usize) -> isize {
    if i < m / 2 {
        i as isize
    } else {
        i as isize - m as isize
    }
}

/// Grouping of the cells of an `m × m` periodic layout by integer `a² + b²`.
struct Radial {
    index: Vec<u32>,
    r2: Vec<f64>,
}

const SKIP: u32 = u32::MAX;

impl Radial {
    /// Signed offsets `|a|, |b| ≤ limit`.
    fn new(m: usize, limit: isize) -> Radial {
        let mut keys: Vec<i64> = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let (a, b) = (signed(i, m), signed(j, m));
                if a.abs() <= limit && b.abs() <= limit {
                    keys.push((a * a + b * b) as i64);
                }
            }
        }
        keys.sort_unstable();
        keys.dedup();
        let pos: HashMap<i64, u32> = keys.iter().enumerate().map(|(i, &k)| (k, i as u32)).collect();
        let mut index = vec![SKIP; m * m];
        for j in 0..m {
            for i in 0..m {
                let (a, b) = (signed(i, m), signed(j, m));
                if a.abs() <= limit && b.abs() <= limit {
                    index[j * m + i] = pos[&((a * a + b * b) as i64)];
                }
            }
        }
        Radial { index, r2: keys.iter().map(|&k| k as f64).collect() }
    }

    fn compress(&self, data: impl Iterator<Item = f64>, out: &mut [f64]) {
        for (v, &ix) in data.zip(&self.index) {
            if ix != SKIP {
                out[ix as usize] += v;
            }
        }
    }
}

/// Radial profiles of `D_{v}(v_1) = ∫ F_v(x) G_v(x + v_1) dx` for each outer shift `v`:
/// `sp` in space (unnormalized sums) and `fq` in frequency (real part of `conj(F̂)Ĝ`).
struct Profiles {
    n: usize,
    h: f64,
    rows: usize,
    sp: Vec<f64>,
    fq: Vec<f64>,
    rad_sp: Radial,
    rad_fq: Radial,
}

impl Profiles {
    fn build(n: usize, h: f64, rows: usize, pair: impl Fn(usize) -> (Grid, Grid) + Sync + Send) -> Profiles {
        let m = 2 * n;
        let rad_sp = Radial::new(m, n as isize - 1);
        let rad_fq = Radial::new(m, m as isize);
        let (ls, lq) = (rad_sp.r2.len(), rad_fq.r2.len());
        let plan = Fft2::get(m);
        let parts = exec::map_range(rows, |r| {
            let (f, g) = pair(r);
            let mut a = embed(&f.values, n, m);
            let mut b = embed(&g.values, n, m);
            plan.forward(&mut a);
            plan.forward(&mut b);
            for (x, y) in a.iter_mut().zip(&b) {
                *x = x.conj() * y;
            }
            let mut q = vec![0.0; lq];
            rad_fq.compress(a.iter().map(|z| z.re), &mut q);
            plan.inverse(&mut a);
            let mut s = vec![0.0; ls];
            rad_sp.compress(a.iter().map(|z| z.re), &mut s);
            (s, q)
        });
        let mut sp = Vec::with_capacity(rows * ls);
        let mut fq = Vec::with_capacity(rows * lq);
        for (s, q) in parts {
            sp.extend(s);
            fq.extend(q);
        }
        Profiles { n, h, rows, sp, fq, rad_sp, rad_fq }
    }

    /// `∫ D_v(v_1) κ_β(v_1) dv_1` for every row `v`.
    fn apply(&self, kind: Kind, beta: f64) -> Vec<f64> {
        let h = self.h;
        let m = (2 * self.n) as f64;
        let (w, data, len): (Vec<f64>, &[f64], usize) = if beta >= RESOLVE * h {
            let h4 = h.powi(4);
            (self.rad_sp.r2.iter().map(|&r2| h4 * kernel_r2(kind, beta, r2 * h * h)).collect(), &self.sp, self.rad_sp.r2.len())
        } else {
            let c = h * h / (m * m);
            let df2 = 1.0 / (m * h).powi(2);
            (self.rad_fq.r2.iter().map(|&q2| c * kernel_hat_r2(kind, beta, q2 * df2)).collect(), &self.fq, self.rad_fq.r2.len())
        };
        (0..self.rows)
            .map(|r| data[r * len..(r + 1) * len].iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Offsets `(a·stride, b·stride)` with `|a·stride|, |b·stride| ≤ n − 1`, row-major.
fn offsets(n: usize, stride: usize) -> (Vec<(isize, isize)>, usize) {
    let k = (n - 1) / stride;
    let s = stride as isize;
    let ki = k as isize;
    let mut out = Vec::new();
    for b in -ki..=ki {
        for a in -ki..=ki {
            out.push((a * s, b * s));
        }
    }
    (out, k)
}

/// `∫ E(v) κ_β(v) dv` for `E` given on the offsets `(a·d, b·d)`, `|a|,|b| ≤ k`.
fn contract(e: &[f64], k: usize, d: f64, kind: Kind, beta: f64) -> f64 {
    let side = 2 * k + 1;
    if beta >= RESOLVE * d {
        let mut s = 0.0;
        for (idx, v) in e.iter().enumerate() {
            let a = (idx % side) as f64 - k as f64;
            let b = (idx / side) as f64 - k as f64;
            s += v * kernel_r2(kind, beta, (a * a + b * b) * d * d);
        }
        s * d * d
    } else {
        let m = 2 * k + 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        for (idx, v) in e.iter().enumerate() {
            let a = (idx % side) as isize - k as isize;
            let b = (idx / side) as isize - k as isize;
            buf[wrap(b, m) * m + wrap(a, m)] = Complex64::new(*v, 0.0);
        }
        Fft2::get(m).forward(&mut buf);
        let df2 = 1.0 / (m as f64 * d).powi(2);
        let mut s = 0.0;
        for j in 0..m {
            for i in 0..m {
                let (qa, qb) = (signed(i, m) as f64, signed(j, m) as f64);
                s += buf[j * m + i].re * kernel_hat_r2(kind, beta, (qa * qa + qb * qb) * df2);
            }
        }
        s / (m * m) as f64
    }
}

fn grids_of(a: &HypercubeAssignment) -> Result<Vec<Grid>> {
    let gs = (0..1usize << a.n()).map(|i| a.grid(i)).collect::<Result<Vec<_>>>()?;
    if let Some(v) = gs.iter().flat_map(|g| g.values.iter()).find(|v| **v < 0.0) {
        return invalid(format!("forms are evaluated on nonnegative fields, found {v}"));
    }
    Ok(gs)
}

/// Inner integrals for every `j` at every node: `inner[j-1][node]`.
fn inner_all(n: usize, alpha: &[f64], fields: &[Grid], nodes: &[f64], stride: usize) -> Vec<Vec<f64>> {
    let nn = fields[0].n();
    let h = fields[0].h();
    match n {
        1 => {
            let f = (fields[0].clone(), fields[1].clone());
            let prof = Profiles::build(nn, h, 1, |_| f.clone());
            vec![exec::map_range(nodes.len(), |i| prof.apply(Kind::K, nodes[i] * alpha[0])[0])]
        }
        2 => {
            let per = n2_nodes(fields, alpha, nodes, nn, h);
            vec![per.iter().map(|x| x[0]).collect(), per.iter().map(|x| x[1]).collect()]
        }
        _ => {
            let (offs, k3) = offsets(nn, stride);
            let d3 = stride as f64 * h;
            // a[v3] = per node (kg, gk, gg)
            let a: Vec<Vec<[f64; 3]>> = offs
                .iter()
                .map(|&(p, q)| {
                    let prod: Vec<Grid> = (0..4).map(|r| fields[r].mul(&fields[r + 4].shift_cells(p, q)).unwrap()).collect();
                    n2_nodes(&prod, alpha, nodes, nn, h)
                })
                .collect();
            let res = exec::map_range(nodes.len(), |i| {
                let b3 = nodes[i] * alpha[2];
                let col = |c: usize| a.iter().map(|row| row[i][c]).collect::<Vec<f64>>();
                [
                    contract(&col(0), k3, d3, Kind::G, b3),
                    contract(&col(1), k3, d3, Kind::G, b3),
                    contract(&col(2), k3, d3, Kind::K, b3),
                ]
            });
            (0..3).map(|j| res.iter().map(|r| r[j]).collect()).collect()
        }
    }
}

/// `n = 2` inner integrals per node: `[J_1, J_2, GG]` integrands, where `GG`
/// carries Gaussians in both variables.
fn n2_nodes(f: &[Grid], alpha: &[f64], nodes: &[f64], nn: usize, h: f64) -> Vec<[f64; 3]> {
    let (offs, k2) = offsets(nn, 1);
    let prof = Profiles::build(nn, h, offs.len(), |r| {
        let (p, q) = offs[r];
        (f[0].mul(&f[2].shift_cells(p, q)).unwrap(), f[1].mul(&f[3].shift_cells(p, q)).unwrap())
    });
    let with_gg = alpha.len() > 2;
    exec::map_range(nodes.len(), |i| {
        let (b1, b2) = (nodes[i] * alpha[0], nodes[i] * alpha[1]);
        let ek = prof.apply(Kind::K, b1);
        let eg = prof.apply(Kind::G, b1);
        [
            contract(&ek, k2, h, Kind::G, b2),
            contract(&eg, k2, h, Kind::K, b2),
            if with_gg { contract(&eg, k2, h, Kind::G, b2) } else { 0.0 },
        ]
    })
}

/// All `n` forms `J_1, …, J_n` of an instance (the instance's `j` is ignored).
pub fn sbl_forms(inst: &SBLInstance) -> Result<Vec<SBLResult>> {
    inst.validate()?;
    let fields = grids_of(&inst.fields)?;
    let (nodes, offset) = inst.s_grid.extended();
    let inner = inner_all(inst.n, &inst.alpha, &fields, &nodes, V3_STRIDE);
    Ok(inner
        .iter()
        .enumerate()
        .map(|(j, v)| SBLResult::from_inner(j + 1, &inst.s_grid, &nodes, offset, v))
        .collect())
}

pub fn sbl_form(inst: &SBLInstance) -> Result<SBLResult> {
    Ok(sbl_forms(inst)?.swap_remove(inst.j - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Telescoping {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// `Σ_i J_i` against `2π ∫ Π_r f_r`.
pub fn telescoping_check(inst: &SBLInstance) -> Result<Telescoping> {
    let forms = sbl_forms(inst)?;
    let lhs: f64 = forms.iter().map(|f| f.value).sum();
    let fields = grids_of(&inst.fields)?;
    let mut prod = fields[0].clone();
    for f in &fields[1..] {
        prod = prod.mul(f)?;
    }
    let rhs = 2.0 * PI * prod.integrate();
    Ok(Telescoping { lhs, rhs, rel_err: (lhs - rhs).abs() / rhs.abs().max(1e-12) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    pub value: f64,
    pub scale: f64,
    pub ok: bool,
}

/// Evaluate `J_j` on the frozen family `f_{C(r)}`; requires `j` frozen.
pub fn positivity_check(inst: &SBLInstance, spec: &FreezeSpec) -> Result<Positivity> {
    spec.validate(inst.n)?;
    if !spec.is_frozen(inst.j) {
        return invalid(format!("Laplacian coordinate {} is not frozen", inst.j));
    }
    let frozen = SBLInstance { fields: HypercubeAssignment::frozen(&inst.fields, spec)?, ..inst.clone() };
    let r = sbl_form(&frozen)?;
    let scale = r.abs_mass();
    Ok(Positivity { value: r.value, scale, ok: r.value >= -1e-6 * scale })
}

/// `2 ∫_0^{Ξ} w(ξ) cos(2π d ξ) dξ` by composite Gauss–Legendre.
fn cosine_transform(w: impl Fn(f64) -> f64, d: f64, upper: f64) -> f64 {
    const X: [f64; 8] = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const W: [f64; 8] = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ];
    let panels = 64;
    let width = upper / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * width;
        for (x, wt) in X.iter().zip(W) {
            let xi = c + 0.5 * width * x;
            s += wt * w(xi) * (2.0 * PI * d * xi).cos();
        }
    }
    2.0 * s * 0.5 * width
}

/// Independent evaluation of `J_1` for `n = 2`, all four vertices equal to the
/// separable field `φ(x)φ(y)` (sampled at the cell centers of `w`), through
///
/// `J_1 = ∫ ds/s ∫ g_{sα_2}(v_2) · 2 Σ_l ‖H_{v_2} ∗ h^{(l)}_{sα_1/√2}‖² dv_2`,
/// `H_{v_2}(x) = f(x) f(x + v_2)`.
///
/// Each factor is one-dimensional: `‖·‖²` and the `v_2` integral are sums over
/// sample pairs against cosine transforms of the band-limited multipliers,
/// computed by quadrature.
pub fn square_norm_oracle(w: Window, phi: impl Fn(f64) -> f64, alpha: [f64; 2], grid: SGrid) -> Result<f64> {
    grid.validate()?;
    let n = w.n;
    let h = w.h();
    let xs: Vec<f64> = (0..n).map(|i| phi(w.cell_center(i, 0).x)).collect();
    let ys: Vec<f64> = (0..n).map(|j| phi(w.cell_center(0, j).y)).collect();
    let nyq = 0.5 / h;
    let lim = n as isize - 1;
    // shifted products H_k(a) = φ_a φ_{a+k}
    let shifted = |v: &[f64], k: isize| -> Vec<f64> {
        (0..n as isize)
            .map(|a| if a + k >= 0 && a + k < n as isize { v[a as usize] * v[(a + k) as usize] } else { 0.0 })
            .collect()
    };
    let hx: Vec<Vec<f64>> = (-lim..=lim).map(|k| shifted(&xs, k)).collect();
    let hy: Vec<Vec<f64>> = (-lim..=lim).map(|k| shifted(&ys, k)).collect();
    let pair_sum = |hv: &[f64], tab: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            if hv[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                s += hv[a] * hv[b] * tab[a.abs_diff(b)];
            }
        }
        h * h * s
    };
    let d = grid.step();
    let nodes: Vec<f64> = (0..grid.q).map(|k| grid.s_min * (k as f64 * d).exp()).collect();
    let inner = exec::map_range(nodes.len(), |i| {
        let s = nodes[i];
        let gam = s * alpha[0] / 2f64.sqrt();
        let b = s * alpha[1];
        let up = nyq.min(8.0 / gam);
        let w0: Vec<f64> = (0..n).map(|k| cosine_transform(|x| (-2.0 * PI * gam * gam * x * x).exp(), k as f64 * h, up)).collect();
        let w2: Vec<f64> = (0..n)
            .map(|k| {
                cosine_transform(|x| 4.0 * PI * PI * gam * gam * x * x * (-2.0 * PI * gam * gam * x * x).exp(), k as f64 * h, up)
            })
            .collect();
        let upg = nyq.min(8.0 / b);
        let kb: Vec<f64> = (0..=2 * lim as usize)
            .map(|k| cosine_transform(|x| (-PI * b * b * x * x).exp(), k as f64 * h, upg))
            .collect();
        let contract1 = |vals: &dyn Fn(usize) -> f64| -> f64 {
            (0..hx.len()).map(|k| vals(k) * kb[(k as isize - lim).unsigned_abs()]).sum::<f64>() * h
        };
        let ax = contract1(&|k| pair_sum(&hx[k], &w0));
        let bx = contract1(&|k| pair_sum(&hx[k], &w2));
        let ay = contract1(&|k| pair_sum(&hy[k], &w0));
        let by = contract1(&|k| pair_sum(&hy[k], &w2));
        2.0 * (bx * ay + ax * by)
    });
    Ok(trapezoid(&inner, d))
}

/// `(h² Σ |f|^p)^{1/p}`.
pub fn lp_norm(f: &Grid, p: f64) -> f64 {
    let h = f.h();
    (h * h * f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Random indicator smoothed by `g_{4h}` (values stay in `[0, 1]`).
pub fn smooth_random_field(w: Window, seed: u64) -> Result<GridField> {
    let raw = generate(&SetSpec::Random { cell: 4.0 * w.h(), density: 0.5, seed }, w)?;
    let smooth = convolve(raw.grid(), KernelSpec::g(4.0 * w.h()))?;
    GridField::from_grid_clamped(smooth, 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub trial: usize,
    pub alpha: Vec<f64>,
    pub ratio: f64,
    pub norms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundProbe {
    pub n: usize,
    pub max_ratio: f64,
    pub rows: Vec<ProbeRow>,
    /// Pearson correlation of the ratio with `max log α − min log α` (0 when the spread is constant).
    pub trend_corr: f64,
    pub no_trend: bool,
}

impl BoundProbe {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (1..=self.n).map(|i| format!("alpha{i}")).collect();
        writeln!(w, "trial,{},ratio,norms", cols.join(","))?;
        for r in &self.rows {
            let a: Vec<String> = r.alpha.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{},{},{}", r.trial, a.join(","), r.ratio, r.norms)?;
        }
        Ok(())
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx <= 1e-300 || syy <= 1e-300 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// `max_j |J_j| / Π_r ‖f_r‖_{2^n}` on random smooth fields with `α_i`
/// log-uniform in `[1e-2, 1e2]`; every vertex gets its own field.
pub fn bound_probe(n: usize, trials: usize, seed: u64, w: Window) -> Result<BoundProbe> {
    if n == 0 || n > 2 {
        return invalid(format!("bound probe supports n in 1..=2, got {n}"));
    }
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(trials);
    let mut spreads = Vec::with_capacity(trials);
    for trial in 0..trials {
        let alpha: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let fields = (0..1u64 << n)
            .map(|r| smooth_random_field(w, seed.wrapping_mul(1_000_003).wrapping_add((trial as u64) << 8 | r)).map(VertexFn::field))
            .collect::<Result<Vec<_>>>()?;
        let asg = HypercubeAssignment::new(n, fields)?;
        let p = f64::from(1u32 << n);
        let norms: f64 = (0..1usize << n).map(|r| asg.grid(r).map(|g| lp_norm(&g, p))).collect::<Result<Vec<_>>>()?.iter().product();
        let inst = SBLInstance::new(1, alpha.clone(), asg, SGrid::adapted(&alpha))?;
        let forms = sbl_forms(&inst)?;
        let top = forms.iter().map(|f| f.value.abs()).fold(0.0, f64::max);
        let lo = alpha.iter().cloned().fold(f64::MAX, f64::min).ln();
        let hi = alpha.iter().cloned().fold(f64::MIN, f64::max).ln();
        spreads.push(hi - lo);
        rows.push(ProbeRow { trial, alpha, ratio: top / norms, norms });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let trend_corr = pearson(&spreads, &ratios);
    Ok(BoundProbe {
        n,
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        rows,
        trend_corr,
        no_trend: trend_corr.abs() <= 0.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{k, narrow_gaussian};

    fn gaussian_window(n: usize) -> Window {
        Window::centered(P2::ZERO, 4.0, n).unwrap()
    }

    fn gaussian_field(n: usize) -> GridField {
        GridField::from_fn(gaussian_window(n), narrow_gaussian).unwrap()
    }

    fn instance(n: usize, j: usize, alpha: Vec<f64>, f: GridField) -> SBLInstance {
        SBLInstance::new(j, alpha, HypercubeAssignment::constant(n, f).unwrap(), SGrid::standard()).unwrap()
    }

    #[test]
    fn kernel_eval_examples() {
        let v0 = kernel_eval(&[1.0], 1, 1.0, &[P2::ZERO]).unwrap();
        assert!((v0 - k(P2::ZERO)).abs() < 1e-12);
        assert!((v0 + 4.0 * PI).abs() < 1e-12);
        let v1 = P2::new(0.3, -0.2);
        let val = kernel_eval(&[1.5, 2.0], 1, 0.7, &[v1, P2::ZERO]).unwrap();
        let want = k_beta_r2(0.7 * 1.5, v1.norm2()) / (0.7f64 * 2.0).powi(2);
        assert!((val - want).abs() < 1e-12 * want.abs());
        let c: f64 = 2.5;
        let args = [P2::new(0.2, 0.1), P2::new(-0.4, 0.3)];
        let a = kernel_eval(&[1.0, 2.0], 2, 0.8, &args).unwrap();
        let b = kernel_eval(&[1.0, 2.0], 2, 0.8 * c, &[args[0] * c, args[1] * c]).unwrap();
        assert!((b - a * c.powi(-4)).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn n1_gaussian_is_half_pi() {
        let r = sbl_form(&instance(1, 1, vec![1.0], gaussian_field(32))).unwrap();
        assert!((r.value - PI / 2.0).abs() < 0.01 * PI / 2.0, "{}", r.value);
        assert!(r.converged);
        let total = r.value.abs();
        assert!(r.nodes[0].contribution.abs() <= 1e-6 * total);
        assert!(r.nodes.last().unwrap().contribution.abs() <= 1e-6 * total);
    }

    #[test]
    fn n2_gaussian_telescopes() {
        let t = telescoping_check(&instance(2, 1, vec![1.0, 3.0], gaussian_field(32))).unwrap();
        assert!((t.rhs - PI / 4.0).abs() < 1e-3, "{t:?}");
        assert!(t.rel_err <= 2e-2, "{t:?}");
    }

    #[test]
    fn zero_vertex_gives_zero() {
        let w = gaussian_window(16);
        let f = GridField::from_fn(w, narrow_gaussian).unwrap();
        let z = GridField::constant(w, 0.0).unwrap();
        let asg = HypercubeAssignment::new(
            2,
            vec![VertexFn::field(f.clone()), VertexFn::field(f.clone()), VertexFn::field(z), VertexFn::field(f)],
        )
        .unwrap();
        let inst = SBLInstance::new(1, vec![1.0, 1.0], asg, SGrid::standard()).unwrap();
        assert_eq!(sbl_form(&inst).unwrap().value, 0.0);
    }

    #[test]
    fn square_norm_representation_matches() {
        let w = gaussian_window(32);
        let f = GridField::from_fn(w, narrow_gaussian).unwrap();
        for alpha in [[1.0, 1.0], [1.0, 3.0], [2.0, 0.5]] {
            let main = sbl_form(&instance(2, 1, alpha.to_vec(), f.clone())).unwrap().value;
            let oracle = square_norm_oracle(w, |x| (-2.0 * PI * x * x).exp(), alpha, SGrid::standard()).unwrap();
            assert!(main >= 0.0);
            assert!((main - oracle).abs() <= 0.02 * oracle, "{alpha:?}: {main} vs {oracle}");
        }
    }

    #[test]
    fn positivity_requires_frozen_j() {
        let inst = instance(2, 1, vec![1.0, 1.0], gaussian_field(16));
        assert!(positivity_check(&inst, &FreezeSpec::new(vec![(2, 0)])).is_err());
        let p = positivity_check(&inst, &FreezeSpec::new(vec![(1, 0)])).unwrap();
        assert!(p.ok && p.value >= 0.0);
    }

    #[test]
    fn s_grid_validation() {
        assert!(SGrid { s_min: 1.0, s_max: 0.5, q: 200 }.validate().is_err());
        assert!(SGrid { s_min: 1e-3, s_max: 1e3, q: 50 }.validate().is_err());
        let a = SGrid::adapted(&[1e-2, 1e2]);
        assert!(a.s_min <= 1e-5 * 1.0001 && a.s_max >= 1e5 * 0.9999 && a.q >= 300);
    }
}
