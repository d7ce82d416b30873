//! Closed, centrally symmetric, strictly convex curves stored as dense polylines.
//!
//! Samples run counterclockwise with `samples[i + K/2] = -samples[i]` exactly.
//! Because the curve is centered at the origin the polar angles of the samples
//! increase monotonically, which gives an `O(log K)` gauge function
//! ([`ConvexCurve::gauge`]) used by every intersection predicate.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::kernels::k_hat;
use crate::P2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurveKind {
    Circle,
    Ellipse { a: f64, b: f64 },
    /// `|x|^p + |y|^p = 1`; curvature vanishes at the axis points.
    Superellipse { p: u32 },
    /// Loaded from samples.
    Custom,
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    /// `circle`, `ellipse:a:b`, `superellipse:p`.
    fn from_str(s: &str) -> Result<CurveKind> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`")));
        match parts.as_slice() {
            ["circle"] => Ok(CurveKind::Circle),
            ["ellipse", a, b] => Ok(CurveKind::Ellipse { a: num(a)?, b: num(b)? }),
            ["superellipse", p] => Ok(CurveKind::Superellipse {
                p: p.parse().map_err(|_| Error::Parse(format!("bad exponent `{p}`")))?,
            }),
            _ => Err(Error::Parse(format!("unknown curve `{s}` (circle, ellipse:a:b, superellipse:p)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvexCurve {
    pub kind: CurveKind,
    samples: Vec<P2>,
    angles: Vec<f64>,
    curvature: Vec<f64>,
    pub non_vanishing_curvature: bool,
    pub diameter: f64,
}

/// Default intersection merge tolerance for a curve: `10 · diam / K²`, at scale `t`.
pub fn default_tol(c: &ConvexCurve, t: f64) -> f64 {
    10.0 * c.diameter * t / (c.len() * c.len()) as f64
}

impl ConvexCurve {
    pub fn new(kind: CurveKind, k: usize) -> Result<ConvexCurve> {
        make_curve(kind, k)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[P2] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> P2 {
        self.samples[i % self.samples.len()]
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvature
    }

    pub fn min_curvature(&self) -> f64 {
        self.curvature.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from a sample to its chord neighbours' midpoint, bounding
    /// how far the true curve can stray from the polyline (at scale 1).
    pub fn chord_sag(&self) -> f64 {
        let k = self.len();
        (0..k)
            .map(|i| {
                let a = self.samples[i];
                let b = self.samples[(i + 1) % k];
                let r = self.curvature[i].max(self.curvature[(i + 1) % k]);
                r * (b - a).norm2() / 8.0
            })
            .fold(0.0, f64::max)
    }

    /// Index `i` of the polyline edge `P_i → P_{i+1}` crossed by the ray at angle `phi`.
    fn sector(&self, phi: f64) -> usize {
        let a0 = self.angles[0];
        let mut u = (phi - a0).rem_euclid(2.0 * PI) + a0;
        if u >= a0 + 2.0 * PI {
            u = a0;
        }
        // largest i with angles[i] <= u
        match self.angles.binary_search_by(|a| a.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Minkowski functional of the polygon: `gauge(p) <= 1` iff `p` is inside.
    pub fn gauge(&self, p: P2) -> f64 {
        let r = p.norm();
        if r == 0.0 {
            return 0.0;
        }
        let i = self.sector(p.angle());
        let a = self.samples[i];
        let d = self.sample(i + 1) - a;
        let u = p * (1.0 / r);
        let s = a.cross(d) / u.cross(d);
        r / s
    }

    /// Euclidean distance from `p` to the polyline `tΓ` (centered at the origin).
    pub fn distance(&self, p: P2, t: f64) -> f64 {
        let q = p * (1.0 / t);
        let k = self.len() as isize;
        let i = if q.norm() == 0.0 { 0 } else { self.sector(q.angle()) as isize };
        let mut best = f64::INFINITY;
        for o in -3..=3 {
            let a = self.samples[(i + o).rem_euclid(k) as usize];
            let b = self.samples[(i + o + 1).rem_euclid(k) as usize];
            best = best.min(segment_distance(q, a, b));
        }
        if q.norm() == 0.0 {
            best = self.samples.iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min);
        }
        best * t
    }

    pub fn write_curve<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "CURVE v1 {}", self.len())?;
        for p in &self.samples {
            writeln!(w, "{} {}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn read_curve<R: BufRead>(r: R) -> Result<ConvexCurve> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CURVE input".into()))??;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "CURVE" || toks[1] != "v1" {
            return Err(Error::Parse(format!("bad CURVE header `{header}`")));
        }
        let k: usize = toks[2].parse().map_err(|_| Error::Parse(format!("bad K `{}`", toks[2])))?;
        let mut samples = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing point {i}")))??;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(Error::Parse(format!("point {i} needs two coordinates")));
            }
            samples.push(P2::new(v[0], v[1]));
        }
        from_samples(CurveKind::Custom, samples)
    }
}

fn segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let d = b - a;
    let l2 = d.norm2();
    let s = if l2 == 0.0 { 0.0 } else { ((p - a).dot(d) / l2).clamp(0.0, 1.0) };
    p.dist(a + d * s)
}

fn menger(a: P2, b: P2, c: P2) -> f64 {
    2.0 * (b - a).cross(c - b) / ((b - a).norm() * (c - b).norm() * (c - a).norm())
}

/// Sample a named curve at `k` uniformly spaced parameter values.
pub fn make_curve(kind: CurveKind, k: usize) -> Result<ConvexCurve> {
    if k < 64 || !k.is_power_of_two() {
        return invalid(format!("sample count must be a power of two >= 64, got {k}"));
    }
    let f: Box<dyn Fn(f64) -> P2> = match kind {
        CurveKind::Circle => Box::new(|th: f64| P2::new(th.cos(), th.sin())),
        CurveKind::Ellipse { a, b } => {
            if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
                return invalid(format!("ellipse axes must be positive, got ({a}, {b})"));
            }
            Box::new(move |th: f64| P2::new(a * th.cos(), b * th.sin()))
        }
        CurveKind::Superellipse { p } => {
            if p < 4 || p % 2 != 0 {
                return invalid(format!("superellipse exponent must be even and >= 4, got {p}"));
            }
            let e = 2.0 / p as f64;
            Box::new(move |th: f64| {
                let (c, s) = (th.cos(), th.sin());
                P2::new(c.signum() * c.abs().powf(e), s.signum() * s.abs().powf(e))
            })
        }
        CurveKind::Custom => return invalid("custom curves are built from samples"),
    };
    let half: Vec<P2> = (0..k / 2).map(|i| f(2.0 * PI * i as f64 / k as f64)).collect();
    let mut samples = half.clone();
    samples.extend(half.iter().map(|&p| -p));
    from_samples(kind, samples)
}

/// Build a curve from counterclockwise samples and check the invariants.
pub fn from_samples(kind: CurveKind, samples: Vec<P2>) -> Result<ConvexCurve> {
    let k = samples.len();
    if k < 64 || !k.is_power_of_two() {
        return invalid(format!("sample count must be a power of two >= 64, got {k}"));
    }
    let mut diameter: f64 = 0.0;
    for i in 0..k / 2 {
        diameter = diameter.max(samples[i].dist(samples[i + k / 2]));
    }
    for i in 0..k / 2 {
        let e = (samples[i] + samples[i + k / 2]).norm();
        if e > 1e-9 * diameter {
            return Err(Error::CurveInvariant(format!("not centrally symmetric at sample {i} ({e:e})")));
        }
    }
    let mut curvature = Vec::with_capacity(k);
    for i in 0..k {
        let a = samples[(i + k - 1) % k];
        let b = samples[i];
        let c = samples[(i + 1) % k];
        if (b - a).cross(c - b) <= 0.0 {
            return Err(Error::CurveInvariant(format!("not strictly convex at sample {i}")));
        }
        curvature.push(menger(a, b, c));
    }
    let mut angles = Vec::with_capacity(k);
    let a0 = samples[0].angle();
    let mut prev = a0;
    for (i, p) in samples.iter().enumerate() {
        let mut a = p.angle();
        while a < prev {
            a += 2.0 * PI;
        }
        if i > 0 && a <= prev {
            return Err(Error::CurveInvariant("polar angle not increasing".into()));
        }
        angles.push(a);
        prev = a;
    }
    if angles[k - 1] >= a0 + 2.0 * PI {
        return Err(Error::CurveInvariant("curve winds more than once".into()));
    }
    let min_curv = curvature.iter().cloned().fold(f64::INFINITY, f64::min);
    let non_vanishing_curvature = match kind {
        CurveKind::Superellipse { .. } => false,
        CurveKind::Circle | CurveKind::Ellipse { .. } => true,
        CurveKind::Custom => min_curv * diameter > 1e-2,
    };
    Ok(ConvexCurve { kind, samples, angles, curvature, non_vanishing_curvature, diameter })
}

/// Outward unit normal at sample `i` and the certificate `max_{b≠a} n·(b−a)` (< 0).
pub fn supporting_line(c: &ConvexCurve, i: usize) -> Result<(P2, f64)> {
    let k = c.len();
    if i >= k {
        return invalid(format!("sample index {i} out of range"));
    }
    let d = c.sample(i + 1) - c.sample(i + k - 1);
    let n = P2::new(d.y, -d.x).unit();
    let a = c.samples[i];
    let cert = c
        .samples
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, &b)| n.dot(b - a))
        .fold(f64::NEG_INFINITY, f64::max);
    if cert >= 0.0 {
        return Err(Error::CurveInvariant(format!("supporting line fails at sample {i}: {cert:e}")));
    }
    Ok((n, cert))
}

fn merge(points: Vec<P2>, tol: f64) -> Vec<P2> {
    let mut out: Vec<P2> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.dist(p) <= tol) {
            out.push(p);
        }
    }
    out
}

fn at_most_two(points: Vec<P2>, what: &str) -> Result<Vec<P2>> {
    if points.len() > 2 {
        return Err(Error::CurveInvariant(format!("{what}: {} merged intersections", points.len())));
    }
    Ok(points)
}

/// Intersections of the line `point + s·dir` with the polyline `Γ`, merged at `tol`.
pub fn line_intersections(c: &ConvexCurve, point: P2, dir: P2, tol: f64) -> Result<Vec<P2>> {
    if dir.norm() == 0.0 {
        return invalid("line direction must be nonzero");
    }
    let u = dir.unit();
    let k = c.len();
    let d: Vec<f64> = c.samples.iter().map(|&p| u.cross(p - point)).collect();
    let mut hits = Vec::new();
    for i in 0..k {
        let j = (i + 1) % k;
        if d[i] == 0.0 {
            hits.push(c.samples[i]);
        } else if d[i] * d[j] < 0.0 {
            let s = d[i] / (d[i] - d[j]);
            hits.push(c.samples[i] + (c.samples[j] - c.samples[i]) * s);
        }
    }
    if hits.is_empty() {
        let (i, m) = d
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, v)| (i, *v))
            .unwrap();
        if m.abs() <= tol {
            hits.push(c.samples[i] - u.perp() * m);
        }
    }
    at_most_two(merge(hits, tol), "line")
}

/// Intersections of `v1 + tΓ` and `v2 + tΓ`, merged at `tol`.
pub fn translate_intersections(c: &ConvexCurve, t: f64, v1: P2, v2: P2, tol: f64) -> Result<Vec<P2>> {
    if v1 == v2 {
        return invalid("translates must be distinct");
    }
    if !(t > 0.0) {
        return invalid("scale must be positive");
    }
    let k = c.len();
    let inv = 1.0 / t;
    let q: Vec<P2> = c.samples.iter().map(|&p| v1 + p * t).collect();
    let f = |p: P2| t * (c.gauge((p - v2) * inv) - 1.0);
    let vals: Vec<f64> = q.iter().map(|&p| f(p)).collect();
    let mut hits = Vec::new();
    for i in 0..k {
        let j = (i + 1) % k;
        if vals[i] == 0.0 {
            hits.push(q[i]);
        } else if vals[i] * vals[j] < 0.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            let flo = vals[i];
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(q[i] + (q[j] - q[i]) * mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hits.push(q[i] + (q[j] - q[i]) * (0.5 * (lo + hi)));
        }
    }
    if hits.is_empty() {
        let (i, m) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, v)| (i, *v))
            .unwrap();
        if m.abs() <= tol {
            hits.push(q[i]);
        }
    }
    at_most_two(merge(hits, tol), "translates")
}

/// Centers `b` with `x, y ∈ b + tΓ`; by central symmetry these are `(x+tΓ) ∩ (y+tΓ)`.
pub fn centers_through_two_points(c: &ConvexCurve, t: f64, x: P2, y: P2, tol: f64) -> Result<Vec<P2>> {
    if x == y {
        return invalid("points must be distinct");
    }
    translate_intersections(c, t, x, y, tol)
}

/// Closed containment of `p` in triangle `(a, b, c)`; degenerate triangles fall back to segments.
pub fn in_closed_triangle(p: P2, a: P2, b: P2, c: P2) -> bool {
    let scale = [a, b, c, p]
        .iter()
        .map(|q| q.x.abs().max(q.y.abs()))
        .fold(1.0, f64::max);
    let area = (b - a).cross(c - a);
    if area.abs() > 1e-12 * scale * scale {
        let l1 = (b - p).cross(c - p) / area;
        let l2 = (c - p).cross(a - p) / area;
        let l3 = 1.0 - l1 - l2;
        return l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12;
    }
    let tol = 1e-12 * scale;
    segment_distance(p, a, b) <= tol || segment_distance(p, b, c) <= tol || segment_distance(p, a, c) <= tol
}

/// Witness for the six points `a_i`, `a_i + d`: a point index (0..6, with
/// `3..6` the translated ones) and a triple of other indices whose closed
/// triangle contains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullWitness {
    pub point: usize,
    pub triple: [usize; 3],
}

pub fn hull_points(a: [P2; 3], d: P2) -> [P2; 6] {
    [a[0], a[1], a[2], a[0] + d, a[1] + d, a[2] + d]
}

pub fn hull_lemma_check(a: [P2; 3], d: P2) -> Result<HullWitness> {
    let pts = hull_points(a, d);
    for i in 0..6 {
        for j in (i + 1)..6 {
            if pts[i] == pts[j] {
                return invalid(format!("points {i} and {j} coincide"));
            }
        }
    }
    for p in 0..6 {
        let rest: Vec<usize> = (0..6).filter(|&q| q != p).collect();
        for x in 0..5 {
            for y in (x + 1)..5 {
                for z in (y + 1)..5 {
                    let tri = [rest[x], rest[y], rest[z]];
                    if in_closed_triangle(pts[p], pts[tri[0]], pts[tri[1]], pts[tri[2]]) {
                        return Ok(HullWitness { point: p, triple: tri });
                    }
                }
            }
        }
    }
    Err(Error::NotFound("no point lies in the hull of three others (lemma counterexample candidate)".into()))
}

/// Atomic probability measure on `tΓ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveMeasure {
    pub points: Vec<P2>,
    pub weights: Vec<f64>,
    pub t: f64,
}

/// `K_mu` points equally spaced in arclength on the polyline `tΓ`, weight `1/K_mu`.
pub fn sample_measure(c: &ConvexCurve, t: f64, k_mu: usize) -> Result<CurveMeasure> {
    if k_mu < 4 {
        return invalid("need at least 4 atoms");
    }
    if !(t > 0.0) {
        return invalid("scale must be positive");
    }
    let k = c.len();
    let mut cum = Vec::with_capacity(k + 1);
    cum.push(0.0);
    for i in 0..k {
        let l = c.sample(i).dist(c.sample(i + 1));
        cum.push(cum[i] + l);
    }
    let total = cum[k];
    let at = |s: f64| -> P2 {
        let i = match cum.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(k - 1),
            Err(i) => i - 1,
        };
        let frac = (s - cum[i]) / (cum[i + 1] - cum[i]);
        c.sample(i) + (c.sample(i + 1) - c.sample(i)) * frac
    };
    let mut points: Vec<P2> = Vec::with_capacity(k_mu);
    if k_mu % 2 == 0 {
        let half: Vec<P2> = (0..k_mu / 2).map(|j| at(total * j as f64 / k_mu as f64) * t).collect();
        points.extend(half.iter().cloned());
        points.extend(half.iter().map(|&p| -p));
    } else {
        points.extend((0..k_mu).map(|j| at(total * j as f64 / k_mu as f64) * t));
    }
    let w = 1.0 / k_mu as f64;
    Ok(CurveMeasure { weights: vec![w; k_mu], points, t })
}

impl CurveMeasure {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest resolvable frequency norm, `K_mu / (20 t)`.
    pub fn guard(&self) -> f64 {
        self.len() as f64 / (20.0 * self.t)
    }

    fn fourier_unchecked(&self, xi: P2) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (p, w) in self.points.iter().zip(self.weights.iter()) {
            let (s, c) = (-2.0 * PI * p.dot(xi)).sin_cos();
            re += w * c;
            im += w * s;
        }
        Complex64::new(re, im)
    }
}

/// `Σ_k w_k e^{-2πi p_k·ξ}`.
pub fn measure_fourier(m: &CurveMeasure, xi: P2) -> Result<Complex64> {
    let norm = xi.norm();
    if norm > m.guard() {
        return Err(Error::FrequencyGuard { norm, guard: m.guard() });
    }
    Ok(m.fourier_unchecked(xi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayRow {
    pub direction: usize,
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayProfile {
    pub sup: f64,
    pub argmax: (usize, f64),
    pub table: Vec<DecayRow>,
}

/// Directions `kπ/count`, `k = 0..count` (μ̂ is even, so half a turn suffices).
pub fn standard_directions(count: usize) -> Vec<P2> {
    (0..count).map(|k| P2::polar(1.0, PI * k as f64 / count as f64)).collect()
}

/// Radii `0.1, 0.12, …, 50`.
pub fn standard_radii() -> Vec<f64> {
    (0..=2495).map(|i| 0.1 + 0.02 * i as f64).collect()
}

/// Scan `|ξ|^{1/2} |μ̂(ξ)|` over `ξ = r·u` for the given unit directions and radii.
pub fn decay_profile(m: &CurveMeasure, directions: &[P2], radii: &[f64]) -> Result<DecayProfile> {
    if let Some(r) = radii.iter().find(|r| **r > m.guard()) {
        return Err(Error::FrequencyGuard { norm: *r, guard: m.guard() });
    }
    let per_dir = exec::map_range(directions.len(), |d| {
        let u = directions[d].unit();
        radii
            .iter()
            .map(|&r| DecayRow { direction: d, radius: r, value: r.sqrt() * m.fourier_unchecked(u * r).norm() })
            .collect::<Vec<_>>()
    });
    let table: Vec<DecayRow> = per_dir.into_iter().flatten().collect();
    let best = table
        .iter()
        .fold(None::<&DecayRow>, |b, row| match b {
            Some(b) if b.value >= row.value => Some(b),
            _ => Some(row),
        })
        .ok_or_else(|| Error::Invalid("empty scan grid".into()))?;
    Ok(DecayProfile { sup: best.value, argmax: (best.direction, best.radius), table })
}

/// `max over ξ in grid of |μ̂(λξ) k̂(tλξ)| / t^{1/2}`.
pub fn decay_product_bound(m: &CurveMeasure, t: f64, lambda: f64, grid: &[P2]) -> Result<f64> {
    if let Some(xi) = grid.iter().find(|xi| xi.norm() * lambda > m.guard()) {
        return Err(Error::FrequencyGuard { norm: xi.norm() * lambda, guard: m.guard() });
    }
    let vals = exec::map_range(grid.len(), |i| {
        let xi = grid[i];
        m.fourier_unchecked(xi * lambda).norm() * k_hat(xi * (t * lambda)).abs() / t.sqrt()
    });
    Ok(vals.into_iter().fold(0.0, f64::max))
}
