//! Gowers box norms `U^n` (n ≤ 3) of nonnegative grid fields.
//!
//! Integrals over `x, v_1, …, v_n` are Riemann sums over integer cell shifts,
//! so every quantity here is exactly a finite sum and translation by whole
//! cells leaves it unchanged. Two identities keep the cost down:
//!
//! * `‖f‖_{U²}⁴ = h⁶ Σ_v C(v)²` with `C` the autocorrelation of `f`, computed on
//!   the frequency side as `Σ |F̂|⁴ / m²`;
//! * the `U²` hypercube sum factors over `v_2`, leaving
//!   `Σ_{v_1} C_{00,10}(v_1) C_{01,11}(v_1)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::fft::{embed, Correlation, Fft2};
use crate::planar_fields::{check_same, Grid, GridField, Window};
use crate::P2;

/// A function placed at a hypercube vertex.
#[derive(Clone, Debug)]
pub enum VertexFn {
    /// The constant 1 (extends beyond the window).
    One,
    Field(Arc<GridField>),
}

impl VertexFn {
    pub fn field(f: GridField) -> VertexFn {
        VertexFn::Field(Arc::new(f))
    }
}

/// Functions `f_r`, `r ∈ {0,1}^n`; vertex `r` is stored at index `Σ r_i 2^{i-1}`.
#[derive(Clone, Debug)]
pub struct HypercubeAssignment {
    n: usize,
    assign: Vec<VertexFn>,
    window: Option<Window>,
}

pub const MAX_DIM: usize = 6;

/// Index of a vertex given as a 0/1 slice `(r_1, …, r_n)`.
pub fn vertex_index(r: &[u8]) -> usize {
    r.iter().enumerate().map(|(i, &b)| (b as usize & 1) << i).sum()
}

pub fn vertex_bits(idx: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((idx >> i) & 1) as u8).collect()
}

impl HypercubeAssignment {
    pub fn new(n: usize, assign: Vec<VertexFn>) -> Result<HypercubeAssignment> {
        if n == 0 || n > MAX_DIM {
            return invalid(format!("hypercube dimension must be in 1..={MAX_DIM}, got {n}"));
        }
        if assign.len() != 1 << n {
            return invalid(format!("need {} vertex functions, got {}", 1 << n, assign.len()));
        }
        let mut window: Option<Window> = None;
        for v in &assign {
            if let VertexFn::Field(f) = v {
                match window {
                    None => window = Some(f.window),
                    Some(w) => check_same(&w, &f.window)?,
                }
            }
        }
        Ok(HypercubeAssignment { n, assign, window })
    }

    /// Every vertex carries `f`.
    pub fn constant(n: usize, f: GridField) -> Result<HypercubeAssignment> {
        let f = Arc::new(f);
        HypercubeAssignment::new(n, (0..1 << n).map(|_| VertexFn::Field(f.clone())).collect())
    }

    /// `f_r = base_{C(r)}` for a freeze spec `C`.
    pub fn frozen(base: &HypercubeAssignment, spec: &FreezeSpec) -> Result<HypercubeAssignment> {
        spec.validate(base.n)?;
        let assign = (0..1 << base.n)
            .map(|idx| {
                let r = freeze(spec, &vertex_bits(idx, base.n))?;
                Ok(base.assign[vertex_index(&r)].clone())
            })
            .collect::<Result<Vec<_>>>()?;
        HypercubeAssignment::new(base.n, assign)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[VertexFn] {
        &self.assign
    }

    pub fn get(&self, idx: usize) -> &VertexFn {
        &self.assign[idx]
    }

    /// Shared window of the non-sentinel fields, if any.
    pub fn window(&self) -> Option<Window> {
        self.window
    }

    /// Vertex function as a grid; `One` becomes all-ones on the shared window.
    pub fn grid(&self, idx: usize) -> Result<Grid> {
        match &self.assign[idx] {
            VertexFn::Field(f) => Ok(f.grid().clone()),
            VertexFn::One => {
                let w = self
                    .window
                    .ok_or_else(|| Error::Invalid("all vertices are ONE; no window to realize them on".into()))?;
                Ok(Grid { window: w, values: vec![1.0; w.len()] })
            }
        }
    }

    /// `Π_r f_r(p_r)` for explicit evaluation points (piecewise constant lookup).
    pub fn product_at(&self, points: &[P2]) -> f64 {
        let mut prod = 1.0;
        for (v, p) in self.assign.iter().zip(points) {
            if let VertexFn::Field(f) = v {
                prod *= f.value_at(*p);
                if prod == 0.0 {
                    return 0.0;
                }
            }
        }
        prod
    }
}

/// Pairs `(i, a)` with `i ∈ 1..=n` and `a ∈ {0,1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreezeSpec {
    pub pairs: Vec<(usize, u8)>,
}

impl FreezeSpec {
    pub fn new(pairs: Vec<(usize, u8)>) -> FreezeSpec {
        FreezeSpec { pairs }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.pairs.len() > n {
            return invalid(format!("{} frozen pairs exceed dimension {n}", self.pairs.len()));
        }
        for (k, &(i, a)) in self.pairs.iter().enumerate() {
            if i == 0 || i > n {
                return invalid(format!("freeze index {i} out of range 1..={n}"));
            }
            if a > 1 {
                return invalid(format!("freeze value {a} is not 0 or 1"));
            }
            if self.pairs[..k].iter().any(|&(j, _)| j == i) {
                return invalid(format!("freeze index {i} repeated"));
            }
        }
        Ok(())
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.pairs.iter().any(|&(j, _)| j == i)
    }
}

/// Replace the frozen coordinates of `r` by their frozen values.
pub fn freeze(spec: &FreezeSpec, r: &[u8]) -> Result<Vec<u8>> {
    spec.validate(r.len())?;
    let mut out = r.to_vec();
    for &(i, a) in &spec.pairs {
        out[i - 1] = a;
    }
    Ok(out)
}

fn check_nonnegative(g: &Grid) -> Result<()> {
    if let Some(v) = g.values.iter().find(|v| **v < 0.0) {
        return invalid(format!("Gowers norms are taken of nonnegative fields, found {v}"));
    }
    Ok(())
}

/// `h⁶ Σ_v C(v)²` computed as `h⁶ Σ_k |F̂_k|⁴ / m²` on a `2n` padding.
fn u2_fourth(g: &Grid) -> f64 {
    let n = g.n();
    let m = 2 * n;
    let plan = Fft2::get(m);
    let mut a: Vec<Complex64> = embed(&g.values, n, m);
    plan.forward(&mut a);
    let quartic: Vec<f64> = a.iter().map(|z| z.norm_sqr() * z.norm_sqr()).collect();
    let h = g.h();
    h.powi(6) * exec::ordered_sum(&quartic) / (m * m) as f64
}

/// `h⁶ Σ_{v_1} C_{ab}(v_1) C_{cd}(v_1)`: the `n = 2` hypercube sum.
fn u2_form(f00: &Grid, f10: &Grid, f01: &Grid, f11: &Grid) -> f64 {
    let n = f00.n();
    let c1 = Correlation::compute(&f00.values, &f10.values, n);
    let c2 = Correlation::compute(&f01.values, &f11.values, n);
    let terms: Vec<f64> = c1.data.iter().zip(c2.data.iter()).map(|(a, b)| a * b).collect();
    f00.h().powi(6) * exec::ordered_sum(&terms)
}

/// Default coarsening stride of the `v_3` loop.
pub const U3_STRIDE: usize = 4;

fn v3_offsets(n: usize, stride: usize) -> Vec<(isize, isize)> {
    let n = n as isize;
    let s = stride as isize;
    let kmax = (n - 1) / s;
    let mut out = Vec::new();
    for b in -kmax..=kmax {
        for a in -kmax..=kmax {
            out.push((a * s, b * s));
        }
    }
    out
}

/// `Σ_{v_3 ∈ sZ²} (sh)² · F(v_3)` in a fixed order.
fn v3_sum(n: usize, h: f64, stride: usize, f: impl Fn(isize, isize) -> f64 + Sync + Send) -> f64 {
    let offs = v3_offsets(n, stride);
    let terms = exec::map_range(offs.len(), |k| f(offs[k].0, offs[k].1));
    let w = (stride as f64 * h).powi(2);
    w * exec::ordered_sum(&terms)
}

/// `‖f‖_{U^n}`: `n = 1, 2` exact on the grid; `n = 3` with `v_3` on a stride-4 sublattice.
pub fn gowers_norm(f: &Grid, n: usize) -> Result<f64> {
    gowers_norm_strided(f, n, U3_STRIDE)
}

pub fn gowers_norm_strided(f: &Grid, n: usize, stride: usize) -> Result<f64> {
    check_nonnegative(f)?;
    match n {
        1 => Ok(f.integrate()),
        2 => Ok(u2_fourth(f).max(0.0).powf(0.25)),
        3 => {
            if stride == 0 {
                return invalid("stride must be positive");
            }
            let s = v3_sum(f.n(), f.h(), stride, |a, b| u2_fourth(&f.mul(&f.shift_cells(a, b)).unwrap()));
            Ok(s.max(0.0).powf(0.125))
        }
        _ => invalid(format!("Gowers norm supported for n in 1..=3, got {n}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GcsReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Hypercube correlation `∫ Π_r f_r(x + r·v)` on the same lattice as [`gowers_norm`].
pub fn hypercube_correlation(a: &HypercubeAssignment) -> Result<f64> {
    let grids = (0..1 << a.n).map(|i| a.grid(i)).collect::<Result<Vec<_>>>()?;
    for g in &grids {
        check_nonnegative(g)?;
    }
    match a.n {
        1 => Ok(grids[0].integrate() * grids[1].integrate()),
        2 => Ok(u2_form(&grids[0], &grids[1], &grids[2], &grids[3])),
        3 => {
            let g = &grids;
            Ok(v3_sum(g[0].n(), g[0].h(), U3_STRIDE, |p, q| {
                let m = |r: usize| g[r].mul(&g[r + 4].shift_cells(p, q)).unwrap();
                u2_form(&m(0), &m(1), &m(2), &m(3))
            }))
        }
        n => invalid(format!("hypercube correlation supported for n in 1..=3, got {n}")),
    }
}

/// Gowers–Cauchy–Schwarz: `lhs ≤ Π_r ‖f_r‖_{U^n}`, accepted with relative slack `1e-6`.
pub fn gcs_check(a: &HypercubeAssignment) -> Result<GcsReport> {
    let lhs = hypercube_correlation(a)?;
    let mut rhs = 1.0;
    for i in 0..1 << a.n {
        rhs *= gowers_norm(&a.grid(i)?, a.n)?;
    }
    Ok(GcsReport { lhs, rhs, ok: lhs <= rhs * (1.0 + 1e-6) })
}

/// Axis-parallel square `[min, min + side]²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cube {
    pub min: P2,
    pub side: f64,
}

impl Cube {
    pub fn contains(&self, p: P2) -> bool {
        p.x >= self.min.x && p.y >= self.min.y && p.x <= self.min.x + self.side && p.y <= self.min.y + self.side
    }
}

/// `‖f‖_{U^n} / (|Q|^{-1+(n+1)/2^n} ∫_Q f)`.
pub fn box_lower_ratio(f: &Grid, q: Cube, n: usize) -> Result<f64> {
    if !(q.side > 0.0) {
        return invalid("cube side must be positive");
    }
    let w = f.window;
    for j in 0..w.n {
        for i in 0..w.n {
            if f.get(i, j) != 0.0 && !q.contains(w.cell_center(i, j)) {
                return invalid(format!("field is supported outside the cube at cell ({i}, {j})"));
            }
        }
    }
    let mass = f.integrate();
    if mass == 0.0 {
        return invalid("ratio undefined: the field integrates to zero on the cube");
    }
    let area = q.side * q.side;
    let expo = -1.0 + (n as f64 + 1.0) / (1u32 << n) as f64;
    Ok(gowers_norm(f, n)? / (area.powf(expo) * mass))
}
