//! VC dimension of curve-translate trace families `{(b + tΓ) ∩ A : b ∈ B}`.
//!
//! Sets are grid fields read at threshold ½; "on the curve" means within `η`
//! of the polyline. Subsets of a point set `C` (at most 4 points) are bit masks.

use serde::{Deserialize, Serialize};

use crate::convex_curves::{centers_through_two_points, default_tol, ConvexCurve};
use crate::counting::ConfigWitness;
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::planar_fields::{check_same, GridField};
use crate::P2;

/// Largest set size searched.
pub const MAX_SHATTER: usize = 4;
/// Angles per point for the constructed singleton centers `c + tγ(θ)`.
pub const SINGLETON_ANGLES: usize = 16;
/// Default number of grid centers added to constructed ones.
pub const GRID_CENTERS: usize = 256;
/// Largest candidate point list accepted by [`vc_dim`].
pub const MAX_POINTS: usize = 200;

#[derive(Clone, Debug)]
pub struct TraceFamily {
    pub curve: ConvexCurve,
    pub t: f64,
    pub a: GridField,
    pub b: GridField,
    pub eta: f64,
    /// Restrict the family to these centers (B-members among them) instead of all of B.
    pub centers: Option<Vec<P2>>,
}

impl TraceFamily {
    pub fn new(curve: ConvexCurve, t: f64, a: GridField, b: GridField, eta: f64) -> Result<TraceFamily> {
        if !(t > 0.0) {
            return invalid(format!("scale must be positive, got {t}"));
        }
        check_same(&a.window, &b.window)?;
        let sag = curve.chord_sag() * t;
        if !(eta >= sag) {
            return invalid(format!("tolerance {eta:e} below the chord sag {sag:e} at t = {t}"));
        }
        Ok(TraceFamily { curve, t, a, b, eta, centers: None })
    }

    /// Tolerance [`default_tol`].
    pub fn with_default_tol(curve: ConvexCurve, t: f64, a: GridField, b: GridField) -> Result<TraceFamily> {
        let eta = default_tol(&curve, t).max(curve.chord_sag() * t);
        TraceFamily::new(curve, t, a, b, eta)
    }

    /// The subfamily with centers in `centers`.
    pub fn with_centers(mut self, centers: Vec<P2>) -> TraceFamily {
        self.centers = Some(centers);
        self
    }

    fn on_curve(&self, b: P2, c: P2) -> f64 {
        self.curve.distance(c - b, self.t)
    }

    /// Bit `i` set iff `C[i] ∈ A` and `dist(C[i], b + tΓ) ≤ η`. `b` should lie in the window.
    pub fn trace(&self, b: P2, c: &[P2]) -> u32 {
        c.iter()
            .enumerate()
            .filter(|(_, &p)| self.a.member(p) && self.on_curve(b, p) <= self.eta)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn is_center(&self, b: P2) -> bool {
        self.b.member(b) && self.centers.as_ref().is_none_or(|cs| cs.contains(&b))
    }

    fn has_centers(&self) -> bool {
        match &self.centers {
            Some(cs) => cs.iter().any(|&b| self.b.member(b)),
            None => self.b.values.iter().any(|v| *v >= 0.5),
        }
    }

    /// B-member cell centers, every `stride`-th cell in each direction.
    fn grid_centers(&self, budget: usize) -> Vec<P2> {
        if let Some(cs) = &self.centers {
            return cs.iter().copied().filter(|&b| self.b.member(b)).collect();
        }
        let w = self.b.window;
        let n = w.n;
        let members: usize = self.b.values.iter().filter(|v| **v >= 0.5).count();
        let mut stride = 1;
        while members / (stride * stride) > budget.max(1) {
            stride += 1;
        }
        let mut out = Vec::new();
        for j in (0..n).step_by(stride) {
            for i in (0..n).step_by(stride) {
                if self.b.get(i, j) >= 0.5 {
                    out.push(w.cell_center(i, j));
                }
            }
        }
        out
    }

    fn pair_centers(&self, x: P2, y: P2) -> Vec<P2> {
        centers_through_two_points(&self.curve, self.t, x, y, self.eta)
            .map(|v| v.into_iter().filter(|&b| self.is_center(b)).collect())
            .unwrap_or_default()
    }

    /// Constructed centers for `C` (pair centers, then singleton centers),
    /// then up to `grid_budget` grid centers; all B-members.
    pub fn center_candidates(&self, c: &[P2], grid_budget: usize) -> Vec<P2> {
        if self.centers.is_some() {
            return self.grid_centers(grid_budget);
        }
        let mut out = Vec::new();
        for i in 0..c.len() {
            for j in (i + 1)..c.len() {
                out.extend(self.pair_centers(c[i], c[j]));
            }
        }
        let k = self.curve.len();
        for &p in c {
            for a in 0..SINGLETON_ANGLES {
                // half-step offset keeps these off the sampled directions used for C
                let idx = (2 * a + 1) * k / (2 * SINGLETON_ANGLES);
                let b = p + self.curve.sample(idx) * self.t;
                if self.is_center(b) {
                    out.push(b);
                }
            }
        }
        out.extend(self.grid_centers(grid_budget));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetWitness {
    pub subset: Vec<usize>,
    pub center: P2,
    /// Largest distance from a member of the subset to `center + tΓ`.
    pub on_curve: f64,
    /// Smallest distance from an A-point of `C` outside the subset to `center + tΓ`.
    pub clearance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShatterCertificate {
    pub points: Vec<P2>,
    pub t: f64,
    pub eta: f64,
    /// One witness per realized subset, ordered by bit mask.
    pub witnesses: Vec<SubsetWitness>,
    /// All `2^|C|` subsets have a witness.
    pub complete: bool,
}

impl ShatterCertificate {
    /// Recheck every witness against the family.
    pub fn verify(&self, fam: &TraceFamily) -> bool {
        self.complete == (self.witnesses.len() == 1 << self.points.len())
            && self.witnesses.iter().all(|w| {
                let mask = w.subset.iter().fold(0u32, |m, i| m | 1 << i);
                fam.is_center(w.center) && fam.trace(w.center, &self.points) == mask
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn witness(fam: &TraceFamily, c: &[P2], mask: u32, b: P2) -> SubsetWitness {
    let subset: Vec<usize> = (0..c.len()).filter(|i| mask >> i & 1 == 1).collect();
    let on_curve = subset.iter().map(|&i| fam.on_curve(b, c[i])).fold(0.0, f64::max);
    let clearance = (0..c.len())
        .filter(|i| mask >> i & 1 == 0 && fam.a.member(c[*i]))
        .map(|i| fam.on_curve(b, c[i]))
        .reduce(f64::min);
    SubsetWitness { subset, center: b, on_curve, clearance }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShatterOutcome {
    Shattered(ShatterCertificate),
    /// Bit masks of the subsets no candidate realizes.
    Missing(Vec<u32>),
}

impl ShatterOutcome {
    pub fn is_shattered(&self) -> bool {
        matches!(self, ShatterOutcome::Shattered(_))
    }
}

/// Search `candidates` (non-members of B are skipped) for every subset of `c`.
pub fn shatters(fam: &TraceFamily, c: &[P2], candidates: &[P2]) -> Result<ShatterOutcome> {
    if c.len() > MAX_SHATTER {
        return invalid(format!("at most {MAX_SHATTER} points, got {}", c.len()));
    }
    let full = 1usize << c.len();
    let mut found: Vec<Option<P2>> = vec![None; full];
    let mut left = full;
    for &b in candidates {
        if !fam.is_center(b) {
            continue;
        }
        let m = fam.trace(b, c) as usize;
        if found[m].is_none() {
            found[m] = Some(b);
            left -= 1;
            if left == 0 {
                break;
            }
        }
    }
    if left > 0 {
        return Ok(ShatterOutcome::Missing((0..full as u32).filter(|&m| found[m as usize].is_none()).collect()));
    }
    let witnesses = found
        .iter()
        .enumerate()
        .map(|(m, b)| witness(fam, c, m as u32, b.unwrap()))
        .collect();
    Ok(ShatterOutcome::Shattered(ShatterCertificate { points: c.to_vec(), t: fam.t, eta: fam.eta, witnesses, complete: true }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcResult {
    /// Largest shattered size found (a lower bound when `exhausted`).
    pub dim: usize,
    pub certificate: Option<ShatterCertificate>,
    /// Size-4 sets were ruled out by the two-center bound without a search.
    pub size4_pruned: bool,
    /// Shatter tests actually run.
    pub tests: usize,
    pub exhausted: bool,
}

fn dedup(points: &[P2], tol: f64) -> Vec<P2> {
    let mut out: Vec<P2> = Vec::new();
    for &p in points {
        if out.iter().all(|q| q.dist(p) > tol) {
            out.push(p);
        }
    }
    out
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        if !f(&idx) {
            return;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

const CHUNK: usize = 32;

/// Run shatter tests over `sets` in order, chunk by chunk; first success wins.
fn first_shattered(fam: &TraceFamily, pts: &[P2], sets: &[Vec<usize>], budget: usize, tests: &mut usize) -> (Option<ShatterCertificate>, bool) {
    for chunk in sets.chunks(CHUNK) {
        if *tests >= budget {
            return (None, true);
        }
        let take = chunk.len().min(budget - *tests);
        let res = exec::map_range(take, |k| {
            let c: Vec<P2> = chunk[k].iter().map(|&i| pts[i]).collect();
            let cand = fam.center_candidates(&c, GRID_CENTERS);
            match shatters(fam, &c, &cand) {
                Ok(ShatterOutcome::Shattered(cert)) => Some(cert),
                _ => None,
            }
        });
        *tests += take;
        if let Some(c) = res.into_iter().flatten().next() {
            return (Some(c), false);
        }
        if take < chunk.len() {
            return (None, true);
        }
    }
    (None, false)
}

/// Largest shattered subset of `points`, searched by size with pruning:
/// points outside A are dropped, a pair needs as many B-centers through it as
/// there are required subsets containing it, and a triple needs a common
/// translate. `budget` caps the number of shatter tests.
pub fn vc_dim(fam: &TraceFamily, points: &[P2], budget: usize) -> Result<VcResult> {
    if points.len() > MAX_POINTS {
        return invalid(format!("at most {MAX_POINTS} candidate points, got {}", points.len()));
    }
    let pts: Vec<P2> = dedup(points, fam.eta).into_iter().filter(|&p| fam.a.member(p)).collect();
    let n = pts.len();
    let mut out = VcResult { dim: 0, certificate: None, size4_pruned: false, tests: 0, exhausted: false };
    if n == 0 || !fam.has_centers() {
        return Ok(out);
    }
    let pair: Vec<Vec<Vec<P2>>> = {
        let rows = exec::map_range(n, |i| ((i + 1)..n).map(|j| fam.pair_centers(pts[i], pts[j])).collect::<Vec<_>>());
        rows
    };
    let centers = |i: usize, j: usize| -> &Vec<P2> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &pair[a][b - a - 1]
    };
    for size in 1..=3usize {
        let mut sets = Vec::new();
        combinations(n, size, |s| {
            let ok = match size {
                1 => true,
                2 => !centers(s[0], s[1]).is_empty(),
                _ => {
                    [(0, 1), (0, 2), (1, 2)].iter().all(|&(a, b)| centers(s[a], s[b]).len() >= 2)
                        && centers(s[0], s[1]).iter().any(|&b| fam.on_curve(b, pts[s[2]]) <= fam.eta)
                }
            };
            if ok {
                sets.push(s.to_vec());
            }
            true
        });
        let (cert, exhausted) = first_shattered(fam, &pts, &sets, budget, &mut out.tests);
        match cert {
            Some(c) => {
                out.dim = size;
                out.certificate = Some(c);
            }
            None => {
                out.exhausted = exhausted;
                return Ok(out);
            }
        }
    }
    // each pair of a shattered 4-set lies on ≥ 3 distinct members' curves
    let max_pair = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| centers(i, j).len()).max().unwrap_or(0);
    if max_pair < 3 {
        out.size4_pruned = true;
        return Ok(out);
    }
    let mut sets = Vec::new();
    combinations(n, 4, |s| {
        let ok = (0..4).all(|a| ((a + 1)..4).all(|b| centers(s[a], s[b]).len() >= 3));
        if ok {
            sets.push(s.to_vec());
        }
        true
    });
    let (cert, exhausted) = first_shattered(fam, &pts, &sets, budget, &mut out.tests);
    if let Some(c) = cert {
        out.dim = 4;
        out.certificate = Some(c);
    }
    out.exhausted = exhausted;
    Ok(out)
}

/// [`vc_dim`] without any pruning; every subset of size ≤ 4 is tested.
pub fn vc_dim_brute(fam: &TraceFamily, points: &[P2]) -> Result<usize> {
    let pts = dedup(points, fam.eta);
    let mut best = 0;
    for size in 1..=MAX_SHATTER {
        let mut sets = Vec::new();
        combinations(pts.len(), size, |s| {
            sets.push(s.to_vec());
            true
        });
        let mut tests = 0;
        let (cert, _) = first_shattered(fam, &pts, &sets, usize::MAX, &mut tests);
        if cert.is_none() {
            break;
        }
        best = size;
    }
    Ok(best)
}

/// `m` points of `A` on the translate of `tΓ` centered at the window center,
/// followed by A-member grid cells until `budget` points in total.
pub fn default_points(fam: &TraceFamily, m: usize, budget: usize) -> Vec<P2> {
    let center = fam.a.window.center();
    let k = fam.curve.len();
    let mut out: Vec<P2> = (0..m)
        .map(|i| center + fam.curve.sample((i * k) / m.max(1) + k / (4 * m.max(1))) * fam.t)
        .filter(|&p| fam.a.member(p))
        .collect();
    let rest = budget.saturating_sub(out.len());
    let w = fam.a.window;
    let cells: Vec<P2> = (0..w.n * w.n)
        .filter(|i| fam.a.values[*i] >= 0.5)
        .map(|i| w.cell_center(i % w.n, i / w.n))
        .collect();
    if rest > 0 && !cells.is_empty() {
        let step = cells.len().div_ceil(rest);
        out.extend(cells.iter().step_by(step).take(rest));
    }
    out
}

/// Certificate for `C = {x+v_1, x+v_2, x+v_3}` built from a configuration:
/// `x` for `C`, `x+v_i+v_j` for `{i, j}`, `x+v_j+s_j` for `{j}`; the empty
/// set is searched among B-grid cells. Returns an error if a constructed
/// trace disagrees with its subset; a missing empty-set witness gives
/// `complete = false`.
pub fn certificate_from_config(w: &ConfigWitness, fam: &TraceFamily) -> Result<ShatterCertificate> {
    let (x, v, s) = (w.x, w.v, w.s);
    let c = vec![x + v[0], x + v[1], x + v[2]];
    let mut built: Vec<(u32, P2)> = vec![(0b111, x)];
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        built.push((1 << i | 1 << j, x + v[i] + v[j]));
    }
    for j in 0..3 {
        built.push((1 << j, x + v[j] + s[j]));
    }
    for &(mask, b) in &built {
        if !fam.is_center(b) {
            return invalid(format!("constructed center {b} for subset {mask:03b} is not in B"));
        }
        let got = fam.trace(b, &c);
        if got != mask {
            return invalid(format!("trace mismatch at center {b}: expected {mask:03b}, got {got:03b}"));
        }
    }
    let empty = fam.grid_centers(usize::MAX).into_iter().find(|&b| fam.trace(b, &c) == 0);
    if let Some(b) = empty {
        built.push((0, b));
    }
    built.sort_by_key(|(m, _)| *m);
    let complete = built.len() == 8;
    let witnesses = built.iter().map(|&(m, b)| witness(fam, &c, m, b)).collect();
    Ok(ShatterCertificate { points: c, t: fam.t, eta: fam.eta, witnesses, complete })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Refutation {
    /// The pair lies on every curve realizing `{c_1..c_4}`, `{c_1,c_2,c_3}`,
    /// `{c_1,c_2,c_4}` (relabelled), which takes `required` distinct centers;
    /// only `centers` exist.
    PairBound { pair: (usize, usize), centers: Vec<P2>, required: usize },
    /// Some point is in no trace at all.
    Unshatterable,
}

/// Why four points are not shattered.
pub fn four_point_refutation(fam: &TraceFamily, c4: [P2; 4]) -> Result<Refutation> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if c4[i].dist(c4[j]) <= fam.eta {
                return invalid(format!("points {i} and {j} coincide"));
            }
        }
    }
    let cand = fam.center_candidates(&c4, GRID_CENTERS);
    let realized: u32 = cand.iter().filter(|&&b| fam.is_center(b)).fold(0, |m, &b| m | fam.trace(b, &c4));
    if realized != 0b1111 {
        return Ok(Refutation::Unshatterable);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let centers = fam.pair_centers(c4[i], c4[j]);
            if centers.len() < 3 {
                return Ok(Refutation::PairBound { pair: (i, j), centers, required: 3 });
            }
        }
    }
    Err(Error::NotFound("every pair has three or more common centers".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_curves::{make_curve, CurveKind};
    use crate::counting::find_config_witness;
    use crate::planar_fields::{generate, SetSpec, Window};

    fn fam(t: f64, a: SetSpec, b: SetSpec, side: f64, n: usize) -> TraceFamily {
        let w = Window::centered(P2::ZERO, side, n).unwrap();
        let c = make_curve(CurveKind::Circle, 1024).unwrap();
        TraceFamily::with_default_tol(c, t, generate(&a, w).unwrap(), generate(&b, w).unwrap()).unwrap()
    }

    fn ones(t: f64) -> TraceFamily {
        fam(t, SetSpec::AllOnes, SetSpec::AllOnes, 64.0, 128)
    }

    #[test]
    fn trace_examples() {
        let f = ones(1.0);
        assert_eq!(f.trace(P2::ZERO, &[P2::new(1.0, 0.0), P2::new(3.0, 0.0)]), 0b01);
        assert_eq!(f.trace(P2::ZERO, &[]), 0);
        let on: Vec<P2> = [0.0, 2.0, 4.0].iter().map(|&th| P2::polar(1.0, th)).collect();
        assert_eq!(f.trace(P2::ZERO, &on), 0b111);
    }

    #[test]
    fn tolerance_below_sag_rejected() {
        let w = Window::centered(P2::ZERO, 8.0, 16).unwrap();
        let a = generate(&SetSpec::AllOnes, w).unwrap();
        let c = make_curve(CurveKind::Circle, 64).unwrap();
        assert!(TraceFamily::new(c, 1.0, a.clone(), a, 1e-9).is_err());
    }

    #[test]
    fn single_center_family_shatters_nothing() {
        let f = ones(8.0).with_centers(vec![P2::new(0.25, 0.25)]);
        let p = P2::new(8.25, 0.25);
        let cand = f.center_candidates(&[p], GRID_CENTERS);
        let o = shatters(&f, &[p], &cand).unwrap();
        assert!(!o.is_shattered(), "{o:?}");
        assert_eq!(vc_dim(&f, &default_points(&f, 12, 40), 100_000).unwrap().dim, 0);
        let empty = fam(8.0, SetSpec::AllOnes, SetSpec::AllZeros, 64.0, 128);
        assert_eq!(vc_dim(&empty, &default_points(&empty, 12, 40), 100_000).unwrap().dim, 0);
    }

    #[test]
    fn generic_triple_on_common_circle_is_shattered() {
        let f = ones(8.0);
        let c: Vec<P2> = [0.3, 2.1, 4.4].iter().map(|&th| P2::new(1.0, -2.0) + P2::polar(8.0, th)).collect();
        let cand = f.center_candidates(&c, GRID_CENTERS);
        match shatters(&f, &c, &cand).unwrap() {
            ShatterOutcome::Shattered(cert) => {
                assert!(cert.verify(&f));
                let back: ShatterCertificate = serde_json::from_str(&cert.to_json()).unwrap();
                assert_eq!(back, cert);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_ones_circle_has_dimension_three() {
        let f = ones(8.0);
        let pts = default_points(&f, 12, 60);
        let r = vc_dim(&f, &pts, 1_000_000).unwrap();
        assert_eq!(r.dim, 3);
        assert!(r.size4_pruned && !r.exhausted);
        assert!(r.certificate.unwrap().verify(&f));
    }

    #[test]
    fn pruned_search_agrees_with_brute_force() {
        let f = ones(8.0);
        let pts = default_points(&f, 8, 16);
        assert_eq!(vc_dim(&f, &pts, 1_000_000).unwrap().dim, vc_dim_brute(&f, &pts).unwrap());
    }

    #[test]
    fn four_points_refuted() {
        let f = ones(8.0);
        let c4 = [0.2, 1.5, 3.3, 4.9].map(|th| P2::polar(8.0, th));
        match four_point_refutation(&f, c4).unwrap() {
            Refutation::PairBound { centers, required, .. } => assert!(centers.len() < required),
            other => panic!("{other:?}"),
        }
        assert!(four_point_refutation(&f, [c4[0], c4[1], c4[2], c4[0]]).is_err());
        let none = fam(8.0, SetSpec::AllZeros, SetSpec::AllOnes, 64.0, 128);
        assert_eq!(four_point_refutation(&none, c4).unwrap(), Refutation::Unshatterable);
    }

    #[test]
    fn certificate_from_generic_configuration() {
        let f = ones(8.0);
        let w = f.a.window;
        let v = [0.0f64, 120.0, 240.0].map(|d| P2::polar(8.0, d.to_radians()));
        let s = [0.0f64, 120.0, 240.0].map(|d| P2::polar(8.0, (d + 37.0).to_radians()));
        let cw = ConfigWitness::new(w.center(), v, s, &f.curve, 8.0, f.eta, f.a.grid(), f.b.grid()).unwrap();
        let cert = certificate_from_config(&cw, &f).unwrap();
        assert!(cert.complete && cert.verify(&f));
        for wt in &cert.witnesses {
            assert!(wt.on_curve <= f.eta && wt.clearance.is_none_or(|c| c > f.eta));
        }
        // s_j = −v_j collapses x+v_j+s_j onto x
        let bad = [v[0] * -1.0, s[1], s[2]];
        assert!(ConfigWitness::new(w.center(), v, bad, &f.curve, 8.0, f.eta, f.a.grid(), f.b.grid()).is_err());
    }

    #[test]
    fn chessboard_pipeline_certificates() {
        let f = fam(
            7.5,
            SetSpec::Chessboard { cell: 4.0, white: false },
            SetSpec::Chessboard { cell: 4.0, white: true },
            64.0,
            256,
        );
        let complete = (0..3)
            .filter(|&seed| {
                find_config_witness(&f.a, &f.b, &f.curve, f.t, f.eta, seed, 1 << 20)
                    .ok()
                    .and_then(|w| certificate_from_config(&w, &f).ok())
                    .is_some_and(|c| c.complete && c.verify(&f))
            })
            .count();
        assert!(complete >= 2, "{complete}");
    }
}
