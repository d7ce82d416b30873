//! Truncated joint upper Banach density estimators.
//!
//! The asymptotic quantities (sup over `M`, limsup over `R`) are replaced by
//! explicit truncation parameters. The evaluation square `z + [0,R]²` is given
//! in [`TruncationParams`] and is independent of the field window: fields are
//! zero outside their window, so the window should contain the square plus a
//! margin of the largest `r` (times `2^n` for hypercube forms).
//!
//! `n = 1` estimates are deterministic (exact box integrals of the
//! piecewise-constant field at cell centers). Higher forms use Monte Carlo
//! with one ChaCha stream per batch and the same samples for every `(z, r)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::exec;
use crate::gowers::{vertex_bits, HypercubeAssignment, VertexFn};
use crate::planar_fields::{check_same, Grid, GridField};
use crate::P2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    #[serde(rename = "M")]
    pub m: f64,
    /// Side of the evaluation squares.
    #[serde(rename = "R")]
    pub r_side: f64,
    pub r_values: Vec<f64>,
    pub z_values: Vec<P2>,
    pub mc_samples: usize,
    pub seed: u64,
}

pub const MIN_MC_SAMPLES: usize = 10_000;

impl TruncationParams {
    /// `r ∈ {M, 2M, 4M, …} ∩ [M, R/2^n]`.
    pub fn geometric(m: f64, r_side: f64, n: u32, z_values: Vec<P2>) -> Result<TruncationParams> {
        let bound = r_side / f64::from(1u32 << n);
        let mut r_values = Vec::new();
        let mut r = m;
        while r <= bound * (1.0 + 1e-12) {
            r_values.push(r);
            r *= 2.0;
        }
        let p = TruncationParams { m, r_side, r_values, z_values, mc_samples: 1_000_000, seed: 0 };
        p.validate(n)?;
        Ok(p)
    }

    pub fn with_mc(mut self, samples: usize, seed: u64) -> TruncationParams {
        self.mc_samples = samples;
        self.seed = seed;
        self
    }

    /// Upper end of the inf range for the `n`-dimensional form.
    pub fn r_bound(&self, n: u32) -> f64 {
        self.r_side / f64::from(1u32 << n)
    }

    pub fn validate(&self, n: u32) -> Result<()> {
        if !(self.m >= 1.0) {
            return invalid(format!("M must be >= 1, got {}", self.m));
        }
        if !(self.r_side > 0.0) {
            return invalid("R must be positive");
        }
        if self.r_side < f64::from(1u32 << n) * self.m {
            return invalid(format!("empty inf range: R = {} < 2^{n} M = {}", self.r_side, f64::from(1u32 << n) * self.m));
        }
        if self.r_values.is_empty() {
            return invalid("r_values is empty");
        }
        if self.z_values.is_empty() {
            return invalid("z_values is empty");
        }
        let bound = self.r_bound(n) * (1.0 + 1e-12);
        for w in self.r_values.windows(2) {
            if !(w[1] > w[0]) {
                return invalid("r_values must be strictly increasing");
            }
        }
        if let Some(r) = self.r_values.iter().find(|r| **r < self.m || **r > bound) {
            return invalid(format!("r = {r} outside [M, R/2^{n}] = [{}, {}]", self.m, self.r_bound(n)));
        }
        Ok(())
    }

    fn validate_mc(&self, n: u32) -> Result<()> {
        self.validate(n)?;
        if self.mc_samples < MIN_MC_SAMPLES {
            return invalid(format!("mc_samples must be >= {MIN_MC_SAMPLES}, got {}", self.mc_samples));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub params: TruncationParams,
    /// Per `z`, per `r` values (`table[z][r]`).
    pub table: Vec<Vec<f64>>,
    pub argmax_z: usize,
    pub argmin_r: usize,
}

/// The JSON record emitted for an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub value: f64,
    pub stderr: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R")]
    pub r_side: f64,
    pub r_values: Vec<f64>,
    pub z_values: Vec<P2>,
    pub seed: u64,
}

impl DensityEstimate {
    pub fn record(&self) -> DensityRecord {
        DensityRecord {
            value: self.value,
            stderr: self.stderr,
            m: self.params.m,
            r_side: self.params.r_side,
            r_values: self.params.r_values.clone(),
            z_values: self.params.z_values.clone(),
            seed: self.params.seed,
        }
    }

    /// `max_z inf_r` over a table of `(value, stderr)`.
    fn from_table(params: &TruncationParams, table: Vec<Vec<(f64, f64)>>) -> DensityEstimate {
        let mut best = (f64::NEG_INFINITY, 0.0, 0, 0);
        for (zi, row) in table.iter().enumerate() {
            let (ri, &(v, se)) = row
                .iter()
                .enumerate()
                .fold(None::<(usize, &(f64, f64))>, |b, (i, x)| match b {
                    Some((_, y)) if y.0 <= x.0 => b,
                    _ => Some((i, x)),
                })
                .unwrap();
            if v > best.0 {
                best = (v, se, zi, ri);
            }
        }
        DensityEstimate {
            value: best.0.clamp(0.0, 1.0),
            stderr: best.1,
            params: params.clone(),
            table: table.into_iter().map(|r| r.into_iter().map(|x| x.0).collect()).collect(),
            argmax_z: best.2,
            argmin_r: best.3,
        }
    }
}

/// `∫_{c-r}^{c+r} f` at every cell center `c`, `f` piecewise constant with spacing `h`.
fn box_filter_1d(vals: &[f64], h: f64, r: f64, out: &mut [f64]) {
    let n = vals.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + vals[i];
    }
    // antiderivative in units of cells, u measured from the window's left edge
    let big = |u: f64| -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= n as f64 {
            prefix[n]
        } else {
            let k = u.floor() as usize;
            prefix[k] + (u - k as f64) * vals[k]
        }
    };
    let ru = r / h;
    for (k, o) in out.iter_mut().enumerate() {
        let c = k as f64 + 0.5;
        *o = h * (big(c + ru) - big(c - ru));
    }
}

/// `∫_{[-r,r]²} f(c + y) dy` at every cell center `c`.
pub fn box_integral(f: &Grid, r: f64) -> Grid {
    let n = f.n();
    let h = f.h();
    let mut rows = vec![0.0; n * n];
    exec::chunks_mut(&mut rows, n, |j, row| box_filter_1d(&f.values[j * n..(j + 1) * n], h, r, row));
    let mut cols = vec![0.0; n * n];
    exec::chunks_mut(&mut cols, n, |i, col| {
        let c: Vec<f64> = (0..n).map(|j| rows[j * n + i]).collect();
        box_filter_1d(&c, h, r, col);
    });
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[j * n + i] = cols[i * n + j];
        }
    }
    Grid { window: f.window, values }
}

/// Fraction of each cell inside `z + [0,R]²`.
fn coverage(g: &Grid, z: P2, side: f64) -> Vec<f64> {
    let w = g.window;
    let h = w.h();
    let cov1 = |lo: f64, k: usize, o: f64| -> f64 {
        let a = o + k as f64 * h;
        let b = a + h;
        ((b.min(lo + side) - a.max(lo)).max(0.0)) / h
    };
    let cx: Vec<f64> = (0..w.n).map(|i| cov1(z.x, i, w.origin.x)).collect();
    let cy: Vec<f64> = (0..w.n).map(|j| cov1(z.y, j, w.origin.y)).collect();
    let mut out = Vec::with_capacity(w.len());
    for &y in &cy {
        for &x in &cx {
            out.push(x * y);
        }
    }
    out
}

/// `(1/((2r)²R²)) ∫_{z+[0,R]²} 1_A(x) ∫ 1_B(y) 1_{[-r,r]²}(x-y) dy dx`.
pub fn joint_inner(a: &Grid, b: &Grid, z: P2, side: f64, r: f64) -> Result<f64> {
    check_same(&a.window, &b.window)?;
    let boxed = box_integral(b, r);
    let cov = coverage(a, z, side);
    let h = a.h();
    let terms: Vec<f64> = (0..a.values.len()).map(|k| a.values[k] * boxed.values[k] * cov[k]).collect();
    Ok(h * h * exec::ordered_sum(&terms) / (4.0 * r * r * side * side))
}

/// Deterministic truncated `δ(A, B)`: max over `z`, inf over `r`.
pub fn joint_density(a: &GridField, b: &GridField, p: &TruncationParams) -> Result<DensityEstimate> {
    p.validate(1)?;
    check_same(&a.window, &b.window)?;
    let boxes: Vec<Grid> = p.r_values.iter().map(|&r| box_integral(b, r)).collect();
    let h = a.h();
    let table = p
        .z_values
        .iter()
        .map(|&z| {
            let cov = coverage(a, z, p.r_side);
            p.r_values
                .iter()
                .zip(&boxes)
                .map(|(&r, bx)| {
                    let terms: Vec<f64> = (0..a.values.len()).map(|k| a.values[k] * bx.values[k] * cov[k]).collect();
                    (h * h * exec::ordered_sum(&terms) / (4.0 * r * r * p.r_side * p.r_side), 0.0)
                })
                .collect()
        })
        .collect();
    Ok(DensityEstimate::from_table(p, table))
}

const BATCH: usize = 8192;

/// Mean and standard error of `f(x, u)` with `x` uniform in `z + [0,R]²` and
/// `u` uniform in `([-1,1]²)^k`; one ChaCha stream per batch.
fn mc_mean<F>(p: &TruncationParams, z: P2, k: usize, f: F) -> (f64, f64)
where
    F: Fn(P2, &[P2]) -> f64 + Sync + Send,
{
    let total = p.mc_samples;
    let batches = total.div_ceil(BATCH);
    let parts = exec::map_range(batches, |bi| {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(bi as u64);
        let count = BATCH.min(total - bi * BATCH);
        let mut u = vec![P2::ZERO; k];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let x = z + P2::new(rng.random::<f64>(), rng.random::<f64>()) * p.r_side;
            for ui in u.iter_mut() {
                *ui = P2::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0);
            }
            let v = f(x, &u);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let s = exec::ordered_sum(&parts.iter().map(|x| x.0).collect::<Vec<_>>());
    let s2 = exec::ordered_sum(&parts.iter().map(|x| x.1).collect::<Vec<_>>());
    let nf = total as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn mc_table<F>(p: &TruncationParams, k: usize, f: F) -> Vec<Vec<(f64, f64)>>
where
    F: Fn(P2, &[P2], f64) -> f64 + Sync + Send,
{
    p.z_values
        .iter()
        .map(|&z| p.r_values.iter().map(|&r| mc_mean(p, z, k, |x, u| f(x, u, r))).collect())
        .collect()
}

/// Product `F_{A,B}(x; v_1,v_2,v_3; s_1,s_2,s_3)` of the ten memberships.
pub fn f_ab(a: &Grid, b: &Grid, x: P2, v: [P2; 3], s: [P2; 3]) -> f64 {
    let mut prod = b.value_at(x);
    for i in 0..3 {
        if prod == 0.0 {
            return 0.0;
        }
        prod *= a.value_at(x + v[i]);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if prod == 0.0 {
            return 0.0;
        }
        prod *= b.value_at(x + v[i] + v[j]);
    }
    for j in 0..3 {
        if prod == 0.0 {
            return 0.0;
        }
        prod *= b.value_at(x + v[j] + s[j]);
    }
    prod
}

/// Monte Carlo truncated `δ_VC(A, B)`; the inf range is `[M, R/2⁶]`.
pub fn vc_density(a: &GridField, b: &GridField, p: &TruncationParams) -> Result<DensityEstimate> {
    p.validate_mc(6)?;
    check_same(&a.window, &b.window)?;
    let (ga, gb) = (a.grid(), b.grid());
    let table = mc_table(p, 6, |x, u, r| {
        let v = [u[0] * r, u[1] * r, u[2] * r];
        let s = [u[3] * r, u[4] * r, u[5] * r];
        f_ab(ga, gb, x, v, s)
    });
    Ok(DensityEstimate::from_table(p, table))
}

/// The 64-vertex assignment whose hypercube density is `δ_VC(A, B)`, writing
/// `v_4, v_5, v_6` for `s_1, s_2, s_3`.
///
/// `1_A` sits at `e_1, e_2, e_3`; `1_B` at `0`, `e_i + e_j` (`i < j ≤ 3`) and
/// `e_j + e_{j+3}`; every other vertex is ONE.
pub fn vc_assignment(a: &GridField, b: &GridField) -> Result<HypercubeAssignment> {
    let fa = VertexFn::Field(Arc::new(a.clone()));
    let fb = VertexFn::Field(Arc::new(b.clone()));
    let a_vertices = [0b000001, 0b000010, 0b000100];
    let b_vertices = [0, 0b000011, 0b000101, 0b000110, 0b001001, 0b010010, 0b100100];
    let assign = (0..64)
        .map(|idx| {
            if a_vertices.contains(&idx) {
                fa.clone()
            } else if b_vertices.contains(&idx) {
                fb.clone()
            } else {
                VertexFn::One
            }
        })
        .collect();
    HypercubeAssignment::new(6, assign)
}

/// Monte Carlo hypercube density `δ((f_r))`; ONE vertices are skipped.
pub fn generalized_density(a: &HypercubeAssignment, p: &TruncationParams) -> Result<DensityEstimate> {
    let n = a.n();
    p.validate_mc(n as u32)?;
    let active: Vec<(Vec<u8>, &Grid)> = (0..1usize << n)
        .filter_map(|idx| match a.get(idx) {
            VertexFn::One => None,
            VertexFn::Field(f) => Some((vertex_bits(idx, n), f.grid())),
        })
        .collect();
    if active.is_empty() {
        let table = p.z_values.iter().map(|_| p.r_values.iter().map(|_| (1.0, 0.0)).collect()).collect();
        return Ok(DensityEstimate::from_table(p, table));
    }
    let table = mc_table(p, n, |x, u, r| {
        let mut prod = 1.0;
        for (bits, g) in &active {
            let mut pt = x;
            for (i, &b) in bits.iter().enumerate() {
                if b == 1 {
                    pt += u[i] * r;
                }
            }
            prod *= g.value_at(pt);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    });
    Ok(DensityEstimate::from_table(p, table))
}

/// Truncated plain upper Banach density `max_z |A ∩ (z+[0,R]²)| / R²`.
pub fn banach(a: &GridField, p: &TruncationParams) -> f64 {
    let h = a.h();
    p.z_values
        .iter()
        .map(|&z| {
            let cov = coverage(a, z, p.r_side);
            let terms: Vec<f64> = a.values.iter().zip(&cov).map(|(v, c)| v * c).collect();
            h * h * exec::ordered_sum(&terms) / (p.r_side * p.r_side)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    pub n: usize,
    pub banach: f64,
    pub hyper: f64,
    pub hyper_stderr: f64,
    /// Both zero or both positive (hyper counted positive beyond 3 stderr).
    pub signs_agree: bool,
}

/// Plain density against the hypercube density with every vertex `1_A`
/// (deterministic for `n = 1`, Monte Carlo otherwise).
pub fn comparability_probe(a: &GridField, n: usize, p: &TruncationParams) -> Result<Comparability> {
    let est = if n == 1 {
        joint_density(a, a, p)?
    } else {
        generalized_density(&HypercubeAssignment::constant(n, a.clone())?, p)?
    };
    let banach = banach(a, p);
    let hyper_pos = est.value > 3.0 * est.stderr && est.value > 0.0;
    Ok(Comparability {
        n,
        banach,
        hyper: est.value,
        hyper_stderr: est.stderr,
        signs_agree: (banach > 0.0) == hyper_pos,
    })
}
