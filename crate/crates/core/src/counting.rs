//! Counting forms for the two-set distance problem and the ten-point
//! flexible configuration.
//!
//! `N⁰_λ = ∫∫ 1_A(x) 1_B(x+v) dσ_λ(v) dx` is evaluated from one FFT
//! cross-correlation of `A` and `B` read off at the measure atoms. `N^ε_λ`
//! mollifies the `B` side once by `g_{ελ}` (the Gaussian is even, so this
//! equals mollifying the measure).

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::convex_curves::{sample_measure, ConvexCurve, CurveMeasure};
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::kernels::{convolve, g, KernelSpec};
use crate::planar_fields::{check_same, Grid, GridField, ShiftTable};
use crate::P2;

/// `inf_{|z| ≤ 3} g(z) = g(3) = e^{-9π}` for the unit-mass Gaussian.
pub fn c_s() -> f64 {
    (-9.0 * std::f64::consts::PI).exp()
}

/// Lower bound the structured check must clear in any normalization, `e^{-18π}`.
pub fn c_s_floor() -> f64 {
    (-18.0 * std::f64::consts::PI).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub scales: Vec<f64>,
}

impl ScaleLadder {
    /// Checks `λ_1 > 1`, `2λ_k ≤ λ_{k+1}` and `λ_J ≤ bound`.
    pub fn new(scales: Vec<f64>, bound: f64) -> Result<ScaleLadder> {
        if scales.is_empty() {
            return invalid("empty scale ladder");
        }
        if !(scales[0] > 1.0) {
            return invalid(format!("first scale must exceed 1, got {}", scales[0]));
        }
        for w in scales.windows(2) {
            if 2.0 * w[0] > w[1] {
                return invalid(format!("ladder not lacunary: 2·{} > {}", w[0], w[1]));
            }
        }
        let last = *scales.last().unwrap();
        if last > bound {
            return invalid(format!("largest scale {last} exceeds {bound}"));
        }
        Ok(ScaleLadder { scales })
    }

    /// Bound `R/2` for a window of side `R`.
    pub fn for_window(scales: Vec<f64>, side: f64) -> Result<ScaleLadder> {
        ScaleLadder::new(scales, side / 2.0)
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// `ε = (δC_s/(3C_u))²` and `J = ⌈3δC_e log(1/ε)/C_s⌉` as printed (δ placement
/// unresolved; `J` stays a free parameter everywhere else).
pub fn printed_parameter_preset(delta: f64, cs: f64, cu: f64, ce: f64) -> (f64, usize) {
    let eps = (delta * cs / (3.0 * cu)).powi(2);
    let j = (3.0 * delta * ce * (1.0 / eps).ln() / cs).ceil().max(1.0) as usize;
    (eps, j)
}

/// `Σ_k w_k ∫ f(x) g(x + p_k) dx`.
fn measure_sum(f: &Grid, g: &Grid, m: &CurveMeasure) -> Result<f64> {
    let table = ShiftTable::new(f, g)?;
    let terms: Vec<f64> = m.points.iter().zip(&m.weights).map(|(&p, &w)| w * table.at(p)).collect();
    Ok(exec::ordered_sum(&terms))
}

/// `B ∗ g_{ελ}`.
pub fn mollify(b: &Grid, eps: f64, lambda: f64) -> Result<Grid> {
    convolve(b, KernelSpec::g(eps * lambda))
}

/// `N^ε_λ(A, B)` for the measure `m` at scale `λ = m.t`; `ε = 0` is the sharp form.
pub fn szekely_form(a: &Grid, b: &Grid, m: &CurveMeasure, eps: f64) -> Result<f64> {
    check_same(&a.window, &b.window)?;
    if eps < 0.0 {
        return invalid("ε must be nonnegative");
    }
    if eps == 0.0 {
        measure_sum(a, b, m)
    } else {
        measure_sum(a, &mollify(b, eps, m.t)?, m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub scale: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "Neps")]
    pub neps: f64,
    #[serde(rename = "I_s")]
    pub i_s: f64,
    #[serde(rename = "I_e")]
    pub i_e: f64,
    #[serde(rename = "I_u")]
    pub i_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub eps: f64,
    pub rows: Vec<ScaleRow>,
    /// Index into `rows` minimizing `|I_e|`.
    pub j_star: usize,
    /// `min_j |I_e| ≤ Σ_j |I_e| / J`.
    pub pigeonhole_ok: bool,
    /// `max_j |N0 - (I_s + I_e + I_u)|`.
    pub bookkeeping_err: f64,
}

impl CountingReport {
    /// Bookkeeping holds up to the rounding of two subtractions and two
    /// additions: a few ulps of the largest `N` involved.
    pub fn bookkeeping_ok(&self) -> bool {
        let scale = self.rows.iter().map(|r| r.n0.abs().max(r.n1.abs()).max(r.neps.abs())).fold(0.0, f64::max);
        self.bookkeeping_err <= 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scale,N0,N1,Neps,I_s,I_e,I_u")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.scale, r.n0, r.n1, r.neps, r.i_s, r.i_e, r.i_u)?;
        }
        Ok(())
    }
}

/// Per-scale `N⁰, N¹, N^ε` and the split `N⁰ = I_s + I_e + I_u`.
pub fn decompose(
    a: &Grid,
    b: &Grid,
    ladder: &ScaleLadder,
    eps: f64,
    curve: &ConvexCurve,
    k_mu: usize,
) -> Result<CountingReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("ε must lie in (0, 1), got {eps}"));
    }
    check_same(&a.window, &b.window)?;
    let rows = exec::map_range(ladder.len(), |j| -> Result<ScaleRow> {
        let lambda = ladder.scales[j];
        let m = sample_measure(curve, lambda, k_mu)?;
        let table = ShiftTable::new(a, b)?;
        let n0 = exec::ordered_sum(&m.points.iter().zip(&m.weights).map(|(&p, &w)| w * table.at(p)).collect::<Vec<_>>());
        let n1 = szekely_form(a, b, &m, 1.0)?;
        let neps = szekely_form(a, b, &m, eps)?;
        Ok(ScaleRow { scale: lambda, n0, n1, neps, i_s: n1, i_e: neps - n1, i_u: n0 - neps })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let bookkeeping_err = rows.iter().map(|r| (r.n0 - (r.i_s + r.i_e + r.i_u)).abs()).fold(0.0, f64::max);
    let mut j_star = 0;
    for (j, r) in rows.iter().enumerate() {
        if r.i_e.abs() < rows[j_star].i_e.abs() {
            j_star = j;
        }
    }
    let mean = rows.iter().map(|r| r.i_e.abs()).sum::<f64>() / rows.len() as f64;
    Ok(CountingReport { eps, pigeonhole_ok: rows[j_star].i_e.abs() <= mean, rows, j_star, bookkeeping_err })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `N¹_λ ≥ C_s · δ · R²` where `δ` is the inner density at `r = λ`, `R` the evaluation side.
pub fn structured_lower_check(a: &Grid, b: &Grid, m: &CurveMeasure, inner_density: f64, side: f64) -> Result<StructuredCheck> {
    let lhs = szekely_form(a, b, m, 1.0)?;
    let rhs = c_s() * inner_density * side * side;
    Ok(StructuredCheck { lhs, rhs, ok: lhs >= rhs })
}

/// `min_{y ∈ [-λ,λ]²} λ² (σ_λ ∗ g_λ)(y)` on a `grid × grid` lattice (corners included).
pub fn structured_kernel_min(m: &CurveMeasure, grid: usize) -> f64 {
    let lambda = m.t;
    let vals = exec::map_range(grid * grid, |k| {
        let (i, j) = (k % grid, k / grid);
        let s = |i: usize| -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
        let y = P2::new(s(i), s(j)) * lambda;
        m.points.iter().zip(&m.weights).map(|(&p, &w)| w * g((y - p) * (1.0 / lambda))).sum::<f64>()
    });
    vals.into_iter().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub eps: Vec<f64>,
    pub diffs: Vec<f64>,
    /// Least-squares slope of `log|N^ε − N⁰|` on `log ε`; `None` when every difference is below `1e-12`.
    pub slope: Option<f64>,
}

pub fn uniform_scaling_probe(a: &Grid, b: &Grid, m: &CurveMeasure, eps_list: &[f64]) -> Result<ScalingProbe> {
    if eps_list.len() < 2 {
        return invalid("need at least two ε values");
    }
    let n0 = szekely_form(a, b, m, 0.0)?;
    let diffs = eps_list
        .iter()
        .map(|&e| Ok((szekely_form(a, b, m, e)? - n0).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let slope = if diffs.iter().all(|d| *d < 1e-12) {
        None
    } else {
        let pts: Vec<(f64, f64)> = eps_list
            .iter()
            .zip(&diffs)
            .filter(|(_, d)| **d >= 1e-12)
            .map(|(e, d)| (e.ln(), d.ln()))
            .collect();
        if pts.len() < 2 {
            None
        } else {
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            Some(sxy / sxx)
        }
    };
    Ok(ScalingProbe { eps: eps_list.to_vec(), diffs, slope })
}

const BATCH: usize = 4096;

/// Atom of `σ_λ` (mollified by `g_{ελ}` when `ε > 0`, i.e. plus a normal with
/// per-coordinate deviation `ελ/√(2π)`).
fn draw_atom(rng: &mut ChaCha8Rng, m: &CurveMeasure, noise: Option<&Normal<f64>>) -> P2 {
    let p = m.points[rng.random_range(0..m.points.len())];
    match noise {
        Some(nd) => p + P2::new(nd.sample(rng), nd.sample(rng)),
        None => p,
    }
}

fn noise_for(m: &CurveMeasure, eps: f64) -> Result<Option<Normal<f64>>> {
    if eps < 0.0 {
        return invalid("ε must be nonnegative");
    }
    if eps == 0.0 {
        return Ok(None);
    }
    let sd = eps * m.t / (2.0 * std::f64::consts::PI).sqrt();
    Normal::new(0.0, sd).map(Some).map_err(|e| Error::Invalid(e.to_string()))
}

/// Monte Carlo `∫ F_{A,B}(x; v; s) dμ(v_1)…dμ(s_3) dx` over the window: `(value, stderr)`.
pub fn vc_form(a: &Grid, b: &Grid, m: &CurveMeasure, eps: f64, mc_samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_same(&a.window, &b.window)?;
    let w = a.window;
    if m.t > w.side / 64.0 {
        return invalid(format!("scale {} exceeds R/2⁶ = {}", m.t, w.side / 64.0));
    }
    if mc_samples == 0 {
        return invalid("need at least one sample");
    }
    let noise = noise_for(m, eps)?;
    let batches = mc_samples.div_ceil(BATCH);
    let parts = exec::map_range(batches, |bi| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(bi as u64);
        let count = BATCH.min(mc_samples - bi * BATCH);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let x = w.origin + P2::new(rng.random::<f64>(), rng.random::<f64>()) * w.side;
            let mut at = [P2::ZERO; 6];
            for p in at.iter_mut() {
                *p = draw_atom(&mut rng, m, noise.as_ref());
            }
            let v = crate::density::f_ab(a, b, x, [at[0], at[1], at[2]], [at[3], at[4], at[5]]);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let s = exec::ordered_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let s2 = exec::ordered_sum(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
    let n = mc_samples as f64;
    let mean = s / n;
    let var = if mc_samples > 1 { ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
    let area = w.side * w.side;
    Ok((mean * area, (var / n).sqrt() * area))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceWitness {
    pub x: P2,
    pub y: P2,
    pub lambda: f64,
    pub residual: f64,
    pub tol: f64,
}

impl DistanceWitness {
    /// Independent check of the postcondition.
    pub fn verify(&self, a: &GridField, b: &GridField) -> bool {
        a.member(self.x) && b.member(self.y) && ((self.x.dist(self.y) - self.lambda).abs() <= self.tol)
    }
}

/// Default witness tolerance `2h + λ·sag`.
pub fn default_distance_tol(curve: &ConvexCurve, h: f64, lambda: f64) -> f64 {
    2.0 * h + lambda * curve.chord_sag()
}

/// Scan the measure atoms in order of decreasing correlation; for each,
/// look for a cell `x ∈ A` with `x + p ∈ B`, nearest to the window center first.
pub fn find_distance_witness(a: &GridField, b: &GridField, m: &CurveMeasure, tol: f64) -> Result<DistanceWitness> {
    check_same(&a.window, &b.window)?;
    let lambda = m.t;
    let table = ShiftTable::new(a.grid(), b.grid())?;
    let mut order: Vec<(usize, f64)> = m.points.iter().enumerate().map(|(k, &p)| (k, table.at(p))).collect();
    order.retain(|o| o.1 > 0.0);
    if order.is_empty() {
        return Err(Error::NotFound(format!("counting form vanishes at scale {lambda}")));
    }
    // quantized so that rounding noise does not break ties between symmetric atoms
    let top = order.iter().map(|o| o.1).fold(0.0, f64::max);
    order.sort_by_key(|o| (std::cmp::Reverse((o.1 / top * 1e9).round() as i64), o.0));
    let w = a.window;
    let c = w.center();
    let mut cands: Vec<P2> = vec![c];
    let mut cells: Vec<P2> = (0..w.len()).map(|k| w.cell_center(k % w.n, k / w.n)).collect();
    cells.sort_by(|p, q| p.dist(c).partial_cmp(&q.dist(c)).unwrap());
    cands.extend(cells.into_iter().filter(|p| a.member(*p)));
    for (k, _) in order {
        let p = m.points[k];
        for &x in &cands {
            if a.member(x) && b.member(x + p) {
                let y = x + p;
                let residual = (x.dist(y) - lambda).abs();
                if residual <= tol {
                    return Ok(DistanceWitness { x, y, lambda, residual, tol });
                }
                break;
            }
        }
    }
    Err(Error::NotFound(format!("no pair within tolerance {tol} at scale {lambda}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResiduals {
    /// Smallest of the ten field values (≥ ½ when accepted).
    pub min_membership: f64,
    /// Largest distance of a `v_i` or `s_i` from `tΓ`.
    pub on_curve: f64,
    pub min_separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigWitness {
    pub x: P2,
    pub v: [P2; 3],
    pub s: [P2; 3],
    pub points: [P2; 10],
    pub t: f64,
    pub tol: f64,
    pub residuals: ConfigResiduals,
}

/// `x, x+v_1, x+v_2, x+v_3, x+v_1+v_2, x+v_1+v_3, x+v_2+v_3, x+v_1+s_1, x+v_2+s_2, x+v_3+s_3`.
pub fn config_points(x: P2, v: [P2; 3], s: [P2; 3]) -> [P2; 10] {
    [
        x,
        x + v[0],
        x + v[1],
        x + v[2],
        x + v[0] + v[1],
        x + v[0] + v[2],
        x + v[1] + v[2],
        x + v[0] + s[0],
        x + v[1] + s[1],
        x + v[2] + s[2],
    ]
}

/// Which field each configuration point must belong to (`true` = A).
pub const IN_A: [bool; 10] = [false, true, true, true, false, false, false, false, false, false];

fn min_separation(p: &[P2; 10]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..10 {
        for j in (i + 1)..10 {
            d = d.min(p[i].dist(p[j]));
        }
    }
    d
}

impl ConfigWitness {
    /// Validate a candidate: ten points pairwise more than `tol` apart, edge
    /// vectors on `tΓ` within `tol`. Memberships are recorded, not required.
    pub fn new(
        x: P2,
        v: [P2; 3],
        s: [P2; 3],
        curve: &ConvexCurve,
        t: f64,
        tol: f64,
        a: &Grid,
        b: &Grid,
    ) -> Result<ConfigWitness> {
        let points = config_points(x, v, s);
        let sep = min_separation(&points);
        if sep <= tol {
            return invalid(format!("configuration points not distinct (min separation {sep:e} ≤ {tol:e})"));
        }
        let on_curve = v.iter().chain(s.iter()).map(|&q| curve.distance(q, t)).fold(0.0, f64::max);
        if on_curve > tol {
            return invalid(format!("edge vector off the curve by {on_curve:e}"));
        }
        let min_membership = points
            .iter()
            .zip(IN_A)
            .map(|(&p, in_a)| if in_a { a.value_at(p) } else { b.value_at(p) })
            .fold(f64::INFINITY, f64::min);
        Ok(ConfigWitness {
            x,
            v,
            s,
            points,
            t,
            tol,
            residuals: ConfigResiduals { min_membership, on_curve, min_separation: sep },
        })
    }

    pub fn memberships_ok(&self) -> bool {
        self.residuals.min_membership >= 0.5
    }
}

/// Point of `tΓ` at parameter fraction `u ∈ [0,1)` along the samples.
fn curve_point(curve: &ConvexCurve, t: f64, u: f64) -> P2 {
    let k = curve.len() as f64;
    let pos = u.rem_euclid(1.0) * k;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    (curve.sample(i) * (1.0 - f) + curve.sample(i + 1) * f) * t
}

/// Configuration search: first the canonical configuration at the window
/// center (`v` at parameters 0, ⅓, ⅔, `s` rotated by a generic offset), then
/// seeded random draws of `x` and six curve points, batch by batch.
pub fn find_config_witness(
    a: &GridField,
    b: &GridField,
    curve: &ConvexCurve,
    t: f64,
    tol: f64,
    seed: u64,
    budget: usize,
) -> Result<ConfigWitness> {
    check_same(&a.window, &b.window)?;
    let (ga, gb) = (a.grid(), b.grid());
    let w = a.window;
    let canon_v = [0.0, 1.0 / 3.0, 2.0 / 3.0].map(|u| curve_point(curve, t, u));
    let canon_s = [0.0, 1.0 / 3.0, 2.0 / 3.0].map(|u| curve_point(curve, t, u + 0.1591549));
    if let Ok(c) = ConfigWitness::new(w.center(), canon_v, canon_s, curve, t, tol, ga, gb) {
        if c.memberships_ok() {
            return Ok(c);
        }
    }
    let batches = budget.div_ceil(BATCH);
    let group = 16;
    let mut start = 0;
    while start < batches {
        let end = (start + group).min(batches);
        let found = exec::map_range(end - start, |k| {
            let bi = start + k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bi as u64);
            let count = BATCH.min(budget - bi * BATCH);
            for _ in 0..count {
                let x = w.origin + P2::new(rng.random::<f64>(), rng.random::<f64>()) * w.side;
                let mut u = [0.0; 6];
                for ui in u.iter_mut() {
                    *ui = rng.random::<f64>();
                }
                if !b.member(x) {
                    continue;
                }
                let v = [u[0], u[1], u[2]].map(|q| curve_point(curve, t, q));
                let s = [u[3], u[4], u[5]].map(|q| curve_point(curve, t, q));
                let pts = config_points(x, v, s);
                if !pts.iter().zip(IN_A).all(|(&p, in_a)| if in_a { a.member(p) } else { b.member(p) }) {
                    continue;
                }
                if let Ok(c) = ConfigWitness::new(x, v, s, curve, t, tol, ga, gb) {
                    return Some(c);
                }
            }
            None
        });
        if let Some(c) = found.into_iter().flatten().next() {
            return Ok(c);
        }
        start = end;
    }
    Err(Error::NotFound(format!("no configuration within {budget} samples")))
}
