//! Functions sampled on square windows, and the example sets.
//!
//! A [`Window`] is `z + [0,R]²` split into `N x N` cells of side `h = R/N`.
//! Values are stored row-major from the bottom-left cell, `values[j*N + i]`,
//! sampled at cell centers. Outside its window a field is zero.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Correlation;
use crate::P2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub origin: P2,
    pub side: f64,
    pub n: usize,
}

impl Window {
    pub fn new(origin: P2, side: f64, n: usize) -> Result<Window> {
        if !(side > 0.0) || !side.is_finite() {
            return invalid(format!("window side must be positive, got {side}"));
        }
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("resolution must be a power of two >= 2, got {n}"));
        }
        Ok(Window { origin, side, n })
    }

    /// Window of side `side` centered at `center`.
    pub fn centered(center: P2, side: f64, n: usize) -> Result<Window> {
        Window::new(center - P2::new(side / 2.0, side / 2.0), side, n)
    }

    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn center(&self) -> P2 {
        self.origin + P2::new(self.side / 2.0, self.side / 2.0)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> P2 {
        let h = self.h();
        self.origin + P2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    /// Cell containing `p`, if `p` is inside the window.
    pub fn cell_of(&self, p: P2) -> Option<(usize, usize)> {
        let h = self.h();
        let u = ((p.x - self.origin.x) / h).floor();
        let v = ((p.y - self.origin.y) / h).floor();
        if u < 0.0 || v < 0.0 || u >= self.n as f64 || v >= self.n as f64 {
            None
        } else {
            Some((u as usize, v as usize))
        }
    }

    pub fn contains(&self, p: P2) -> bool {
        self.cell_of(p).is_some()
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn same_as(&self, o: &Window) -> bool {
        self.origin == o.origin && self.side == o.side && self.n == o.n
    }
}

/// A real-valued (possibly signed) sampled function.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub window: Window,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(window: Window) -> Grid {
        Grid { window, values: vec![0.0; window.len()] }
    }

    pub fn from_values(window: Window, values: Vec<f64>) -> Result<Grid> {
        if values.len() != window.len() {
            return invalid(format!("expected {} values, got {}", window.len(), values.len()));
        }
        Ok(Grid { window, values })
    }

    /// Sample `f` at every cell center.
    pub fn from_fn(window: Window, f: impl Fn(P2) -> f64) -> Grid {
        let n = window.n;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(window.cell_center(i, j)));
            }
        }
        Grid { window, values }
    }

    pub fn n(&self) -> usize {
        self.window.n
    }

    pub fn h(&self) -> f64 {
        self.window.h()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.window.n + i]
    }

    /// Piecewise-constant value at `p` (zero outside the window).
    pub fn value_at(&self, p: P2) -> f64 {
        match self.window.cell_of(p) {
            Some((i, j)) => self.get(i, j),
            None => 0.0,
        }
    }

    fn get_or_zero(&self, i: isize, j: isize) -> f64 {
        let n = self.window.n as isize;
        if i < 0 || j < 0 || i >= n || j >= n {
            0.0
        } else {
            self.values[(j * n + i) as usize]
        }
    }

    /// Bilinear interpolation between cell centers, zero extension outside.
    pub fn bilinear(&self, p: P2) -> f64 {
        let h = self.h();
        let u = (p.x - self.window.origin.x) / h - 0.5;
        let v = (p.y - self.window.origin.y) / h - 0.5;
        let (u0, v0) = (u.floor(), v.floor());
        let (fu, fv) = (u - u0, v - v0);
        let (i, j) = (u0 as isize, v0 as isize);
        let a = self.get_or_zero(i, j);
        let b = self.get_or_zero(i + 1, j);
        let c = self.get_or_zero(i, j + 1);
        let d = self.get_or_zero(i + 1, j + 1);
        (1.0 - fv) * ((1.0 - fu) * a + fu * b) + fv * ((1.0 - fu) * c + fu * d)
    }

    pub fn integrate(&self) -> f64 {
        let h = self.h();
        h * h * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, o: &Grid) -> f64 {
        self.values
            .iter()
            .zip(o.values.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid { window: self.window, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise product (windows must agree).
    pub fn mul(&self, o: &Grid) -> Result<Grid> {
        check_same(&self.window, &o.window)?;
        let values = self.values.iter().zip(o.values.iter()).map(|(a, b)| a * b).collect();
        Ok(Grid { window: self.window, values })
    }

    pub fn add(&self, o: &Grid) -> Result<Grid> {
        check_same(&self.window, &o.window)?;
        let values = self.values.iter().zip(o.values.iter()).map(|(a, b)| a + b).collect();
        Ok(Grid { window: self.window, values })
    }

    /// `p ↦ self(p + (a,b)·h)` on the same window, zero-filled.
    pub fn shift_cells(&self, a: isize, b: isize) -> Grid {
        let n = self.window.n as isize;
        let mut out = Grid::zeros(self.window);
        for j in 0..n {
            for i in 0..n {
                out.values[(j * n + i) as usize] = self.get_or_zero(i + a, j + b);
            }
        }
        out
    }
}

pub(crate) fn check_same(a: &Window, b: &Window) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        invalid("fields must share one window")
    }
}

/// A sampled function with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField(Grid);

impl GridField {
    pub fn new(grid: Grid) -> Result<GridField> {
        if let Some(v) = grid.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("field value {v} outside [0, 1]"));
        }
        Ok(GridField(grid))
    }

    /// Accept values within `tol` of `[0, 1]` and clamp them (rounding noise
    /// from FFT convolutions).
    pub fn from_grid_clamped(grid: Grid, tol: f64) -> Result<GridField> {
        if let Some(v) = grid.values.iter().find(|v| !(-tol..=1.0 + tol).contains(*v)) {
            return invalid(format!("field value {v} outside [0, 1] beyond tolerance {tol}"));
        }
        Ok(GridField(grid.map(|v| v.clamp(0.0, 1.0))))
    }

    pub fn constant(window: Window, c: f64) -> Result<GridField> {
        GridField::new(Grid { window, values: vec![c; window.len()] })
    }

    pub fn from_fn(window: Window, f: impl Fn(P2) -> f64) -> Result<GridField> {
        GridField::new(Grid::from_fn(window, f))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    /// Membership test with threshold ½.
    pub fn member(&self, p: P2) -> bool {
        self.value_at(p) >= 0.5
    }

    pub fn scaled(&self, c: f64) -> Result<GridField> {
        GridField::new(self.0.map(|v| v * c))
    }

    pub fn product(&self, o: &GridField) -> Result<GridField> {
        Ok(GridField(self.0.mul(&o.0)?))
    }

    pub fn write_pfield<W: Write>(&self, w: W) -> Result<()> {
        write_pfield(&self.0, w)
    }

    pub fn read_pfield<R: BufRead>(r: R) -> Result<GridField> {
        GridField::new(read_pfield(r)?)
    }
}

impl Deref for GridField {
    type Target = Grid;
    fn deref(&self) -> &Grid {
        &self.0
    }
}

/// `h² Σ values`: the integral of the piecewise-constant extension.
pub fn integrate(f: &GridField) -> f64 {
    f.integrate()
}

/// `∫ f(x) g(x+v) dx` with `g` interpolated bilinearly and zero outside the window.
pub fn shift_product(f: &Grid, g: &Grid, v: P2) -> Result<f64> {
    check_same(&f.window, &g.window)?;
    let n = f.n();
    let h = f.h();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            let a = f.get(i, j);
            if a != 0.0 {
                s += a * g.bilinear(f.window.cell_center(i, j) + v);
            }
        }
    }
    Ok(s * h * h)
}

/// All shift products of `f` against `g` at once; evaluate with [`ShiftTable::at`].
pub struct ShiftTable {
    corr: Correlation,
    h: f64,
}

impl ShiftTable {
    pub fn new(f: &Grid, g: &Grid) -> Result<ShiftTable> {
        check_same(&f.window, &g.window)?;
        Ok(ShiftTable { corr: Correlation::compute(&f.values, &g.values, f.n()), h: f.h() })
    }

    /// Same value as [`shift_product`] (up to FFT rounding).
    pub fn at(&self, v: P2) -> f64 {
        self.corr.interp(v.x / self.h, v.y / self.h) * self.h * self.h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ring {
    /// `10^n < |x| < 2·10^n`
    Inner,
    /// `6·10^n < |x| < 7·10^n`
    Outer,
}

/// Set descriptions; see [`generate`]. Also parseable from the CLI grammar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetSpec {
    AllOnes,
    AllZeros,
    /// Black squares are those with `floor(x/c) + floor(y/c)` even.
    Chessboard { cell: f64, white: bool },
    /// Balls of radius `n` centered at `(±2^n, 0)`, `n ≥ 1`.
    LacunaryBalls(Side),
    LacunaryAnnuli(Ring),
    /// The grid cell containing the point.
    SingleCell(P2),
    Disk { center: P2, radius: f64 },
    Rect { min: P2, max: P2 },
    /// Blocks of side `cell`, each kept with probability `density`.
    Random { cell: f64, density: f64, seed: u64 },
    Union(Vec<SetSpec>),
    Intersection(Vec<SetSpec>),
    Complement(Box<SetSpec>),
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SetSpec::Chessboard { cell, .. } | SetSpec::Random { cell, .. } if !(*cell > 0.0) => {
                invalid(format!("cell size must be positive, got {cell}"))
            }
            SetSpec::Random { density, .. } if !(0.0..=1.0).contains(density) => {
                invalid(format!("density must lie in [0, 1], got {density}"))
            }
            SetSpec::Disk { radius, .. } if !(*radius >= 0.0) => invalid("negative radius"),
            SetSpec::Union(v) | SetSpec::Intersection(v) => v.iter().try_for_each(|s| s.validate()),
            SetSpec::Complement(s) => s.validate(),
            _ => Ok(()),
        }
    }

    /// Whether the sample point `p` (a cell center of `w`) belongs to the set.
    pub fn contains(&self, p: P2, w: &Window) -> bool {
        match self {
            SetSpec::AllOnes => true,
            SetSpec::AllZeros => false,
            SetSpec::Chessboard { cell, white } => {
                let parity = ((p.x / cell).floor() + (p.y / cell).floor()).rem_euclid(2.0) == 0.0;
                parity != *white
            }
            SetSpec::LacunaryBalls(side) => {
                let sgn = if *side == Side::Plus { 1.0 } else { -1.0 };
                let far = p.norm();
                for k in 1..62 {
                    let c = 2f64.powi(k);
                    let r = k as f64;
                    if c - r > far {
                        break;
                    }
                    if p.dist(P2::new(sgn * c, 0.0)) < r {
                        return true;
                    }
                }
                false
            }
            SetSpec::LacunaryAnnuli(ring) => {
                let (lo, hi) = match ring {
                    Ring::Inner => (1.0, 2.0),
                    Ring::Outer => (6.0, 7.0),
                };
                let r = p.norm();
                let mut scale = 10.0;
                while lo * scale <= r && scale < 1e300 {
                    if r < hi * scale {
                        return true;
                    }
                    scale *= 10.0;
                }
                false
            }
            SetSpec::SingleCell(q) => match (w.cell_of(*q), w.cell_of(p)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
            SetSpec::Disk { center, radius } => p.dist(*center) < *radius,
            SetSpec::Rect { min, max } => p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y,
            SetSpec::Random { cell, density, seed } => {
                let a = (p.x / cell).floor() as i64 as u64;
                let b = (p.y / cell).floor() as i64 as u64;
                let z = splitmix(seed ^ splitmix(a ^ splitmix(b.rotate_left(32))));
                (z >> 11) as f64 / (1u64 << 53) as f64 <= *density
            }
            SetSpec::Union(v) => v.iter().any(|s| s.contains(p, w)),
            SetSpec::Intersection(v) => v.iter().all(|s| s.contains(p, w)),
            SetSpec::Complement(s) => !s.contains(p, w),
        }
    }
}

/// Indicator of `spec` sampled at the cell centers of `w`.
pub fn generate(spec: &SetSpec, w: Window) -> Result<GridField> {
    spec.validate()?;
    Ok(GridField(Grid::from_fn(w, |p| if spec.contains(p, &w) { 1.0 } else { 0.0 })))
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, v: &[SetSpec]| {
            write!(f, "{name}(")?;
            for (k, s) in v.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{s}")?;
            }
            write!(f, ")")
        };
        match self {
            SetSpec::AllOnes => write!(f, "ones"),
            SetSpec::AllZeros => write!(f, "zeros"),
            SetSpec::Chessboard { cell, white: false } => write!(f, "chessboard:{cell}"),
            SetSpec::Chessboard { cell, white: true } => write!(f, "chessboard-white:{cell}"),
            SetSpec::LacunaryBalls(Side::Plus) => write!(f, "balls+"),
            SetSpec::LacunaryBalls(Side::Minus) => write!(f, "balls-"),
            SetSpec::LacunaryAnnuli(Ring::Inner) => write!(f, "annuli-inner"),
            SetSpec::LacunaryAnnuli(Ring::Outer) => write!(f, "annuli-outer"),
            SetSpec::SingleCell(p) => write!(f, "cell:{}:{}", p.x, p.y),
            SetSpec::Disk { center, radius } => write!(f, "disk:{}:{}:{}", center.x, center.y, radius),
            SetSpec::Rect { min, max } => write!(f, "rect:{}:{}:{}:{}", min.x, min.y, max.x, max.y),
            SetSpec::Random { cell, density, seed } => write!(f, "random:{cell}:{density}:{seed}"),
            SetSpec::Union(v) => list(f, "union", v),
            SetSpec::Intersection(v) => list(f, "inter", v),
            SetSpec::Complement(s) => write!(f, "not({s})"),
        }
    }
}

impl FromStr for SetSpec {
    type Err = Error;

    /// Grammar: `ones`, `zeros`, `chessboard[:c]`, `chessboard-white[:c]`,
    /// `balls+`, `balls-`, `annuli-inner`, `annuli-outer`, `cell:x:y`,
    /// `disk:x:y:r`, `rect:x0:y0:x1:y1`, `random:c:p:seed`,
    /// `union(a,b,..)`, `inter(a,b,..)`, `not(a)`.
    fn from_str(s: &str) -> Result<SetSpec> {
        let (spec, rest) = parse_spec(s.trim())?;
        if !rest.trim().is_empty() {
            return Err(Error::Parse(format!("trailing input `{rest}`")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_spec(s: &str) -> Result<(SetSpec, &str)> {
    let s = s.trim_start();
    for (name, kind) in [("union(", 0), ("inter(", 1), ("not(", 2)] {
        if let Some(mut rest) = s.strip_prefix(name) {
            let mut items = Vec::new();
            loop {
                let (item, r) = parse_spec(rest)?;
                items.push(item);
                let r = r.trim_start();
                if let Some(r) = r.strip_prefix(',') {
                    rest = r;
                } else if let Some(r) = r.strip_prefix(')') {
                    rest = r;
                    break;
                } else {
                    return Err(Error::Parse(format!("expected `,` or `)` in `{s}`")));
                }
            }
            let spec = match kind {
                0 => SetSpec::Union(items),
                1 => SetSpec::Intersection(items),
                _ => {
                    if items.len() != 1 {
                        return Err(Error::Parse("not(..) takes one argument".into()));
                    }
                    SetSpec::Complement(Box::new(items.pop().unwrap()))
                }
            };
            return Ok((spec, rest));
        }
    }
    let end = s.find([',', ')']).unwrap_or(s.len());
    let (atom, rest) = s.split_at(end);
    Ok((parse_atom(atom.trim())?, rest))
}

fn parse_atom(a: &str) -> Result<SetSpec> {
    let mut parts = a.split(':');
    let head = parts.next().unwrap_or("");
    let nums: Vec<f64> = parts
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{p}` in `{a}`"))))
        .collect::<Result<_>>()?;
    let want = |k: usize| -> Result<()> {
        if nums.len() == k {
            Ok(())
        } else {
            Err(Error::Parse(format!("`{head}` takes {k} parameters, got {}", nums.len())))
        }
    };
    let spec = match head {
        "ones" | "all-ones" => {
            want(0)?;
            SetSpec::AllOnes
        }
        "zeros" | "all-zeros" => {
            want(0)?;
            SetSpec::AllZeros
        }
        "chessboard" | "chessboard-black" | "chessboard-white" => {
            let cell = match nums.len() {
                0 => 1.0,
                1 => nums[0],
                _ => return Err(Error::Parse(format!("too many parameters in `{a}`"))),
            };
            SetSpec::Chessboard { cell, white: head == "chessboard-white" }
        }
        "balls+" | "lacunary-balls+" => SetSpec::LacunaryBalls(Side::Plus),
        "balls-" | "lacunary-balls-" => SetSpec::LacunaryBalls(Side::Minus),
        "annuli-inner" => SetSpec::LacunaryAnnuli(Ring::Inner),
        "annuli-outer" => SetSpec::LacunaryAnnuli(Ring::Outer),
        "cell" => {
            want(2)?;
            SetSpec::SingleCell(P2::new(nums[0], nums[1]))
        }
        "disk" => {
            want(3)?;
            SetSpec::Disk { center: P2::new(nums[0], nums[1]), radius: nums[2] }
        }
        "rect" => {
            want(4)?;
            SetSpec::Rect { min: P2::new(nums[0], nums[1]), max: P2::new(nums[2], nums[3]) }
        }
        "random" => {
            want(3)?;
            let seed = a
                .rsplit(':')
                .next()
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::Parse(format!("seed must be a non-negative integer in `{a}`")))?;
            SetSpec::Random { cell: nums[0], density: nums[1], seed }
        }
        _ => return Err(Error::Parse(format!("unknown set `{a}`"))),
    };
    Ok(spec)
}

/// Write `PFIELD v1 <z_x> <z_y> <R> <N>` followed by `N` rows, bottom row first.
pub fn write_pfield<W: Write>(g: &Grid, mut w: W) -> Result<()> {
    let win = g.window;
    writeln!(w, "PFIELD v1 {} {} {} {}", win.origin.x, win.origin.y, win.side, win.n)?;
    for j in 0..win.n {
        let row: Vec<String> = (0..win.n).map(|i| format!("{}", g.get(i, j))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_pfield<R: BufRead>(r: R) -> Result<Grid> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty PFIELD input".into()))??;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "PFIELD" || toks[1] != "v1" {
        return Err(Error::Parse(format!("bad PFIELD header `{header}`")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
    let n: usize = toks[5].parse().map_err(|_| Error::Parse(format!("bad N `{}`", toks[5])))?;
    let win = Window::new(P2::new(num(toks[2])?, num(toks[3])?), num(toks[4])?, n)?;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {j}")))??;
        let row: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!("row {j} has {} values, expected {n}", row.len())));
        }
        values.extend(row);
    }
    Grid::from_values(win, values)
}
