//! Binary masks on the torus lattice: construction, measure, perimeter,
//! distance fields and error metrics.
//!
//! All geometry is cyclic. Distances are in continuous units (cell side
//! `1/sqrt(n)`), measured from cell centers. The boundary `dOmega` is the union
//! of lattice edges separating a cell of `Omega` from a cell outside it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pgm::{self, GrayImage};
use crate::tfcore::TfGrid;

/// The set `Omega` as a binary `n x n` matrix indexed `(x, xi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    grid: TfGrid,
    cells: Vec<bool>,
}

impl Mask {
    pub fn empty(grid: TfGrid) -> Self {
        Mask { grid, cells: vec![false; grid.cells()] }
    }

    pub fn full(grid: TfGrid) -> Self {
        Mask { grid, cells: vec![true; grid.cells()] }
    }

    pub fn from_cells(grid: TfGrid, cells: Vec<bool>) -> Result<Self> {
        crate::error::check_len(grid.cells(), cells.len())?;
        Ok(Mask { grid, cells })
    }

    pub fn from_fn(grid: TfGrid, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let n = grid.n();
        let cells = (0..grid.cells()).map(|i| f(i / n, i % n)).collect();
        Mask { grid, cells }
    }

    pub fn grid(&self) -> TfGrid {
        self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, xi: usize) -> bool {
        self.cells[self.grid.index(x, xi)]
    }

    pub fn set(&mut self, x: usize, xi: usize, v: bool) {
        let i = self.grid.index(x, xi);
        self.cells[i] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    /// `|Omega|`, the number of cells times the cell measure.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_measure()
    }

    /// `|dOmega|`: exposed 4-neighbor edges on the torus times the cell side.
    pub fn perimeter(&self) -> f64 {
        self.boundary_edge_count() as f64 * self.grid.cell_side()
    }

    pub fn boundary_edge_count(&self) -> usize {
        let n = self.grid.n();
        let mut edges = 0;
        for x in 0..n {
            for xi in 0..n {
                let c = self.get(x, xi);
                if c != self.get((x + 1) % n, xi) {
                    edges += 1;
                }
                if c != self.get(x, (xi + 1) % n) {
                    edges += 1;
                }
            }
        }
        edges
    }

    pub fn complement(&self) -> Mask {
        Mask { grid: self.grid, cells: self.cells.iter().map(|c| !c).collect() }
    }

    pub fn symmetric_difference(&self, other: &Mask) -> Result<Mask> {
        self.same_grid(other)?;
        Ok(Mask {
            grid: self.grid,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a != b).collect(),
        })
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.same_grid(other)?;
        Ok(Mask {
            grid: self.grid,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.cells.iter().zip(&other.cells).all(|(a, b)| !a || *b)
    }

    fn same_grid(&self, other: &Mask) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension { expected: self.grid.n(), actual: other.grid.n() });
        }
        Ok(())
    }

    /// 8-bit image, 255 inside `Omega`.
    pub fn to_image(&self) -> GrayImage {
        let n = self.grid.n();
        GrayImage {
            width: n,
            height: n,
            pixels: self.cells.iter().map(|&c| if c { 255 } else { 0 }).collect(),
        }
    }

    /// Pixels at or above 128 count as inside `Omega`.
    pub fn from_image(grid: TfGrid, img: &GrayImage) -> Result<Mask> {
        if img.width != grid.n() || img.height != grid.n() {
            return Err(Error::config(format!(
                "mask image is {}x{}, grid needs {}x{}",
                img.width,
                img.height,
                grid.n(),
                grid.n()
            )));
        }
        Ok(Mask { grid, cells: img.pixels.iter().map(|&p| p >= 128).collect() })
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        pgm::write_pgm(file, &self.to_image())
    }

    pub fn load_pgm(grid: TfGrid, path: &Path) -> Result<Mask> {
        let img = pgm::read_pgm(std::fs::File::open(path)?)?;
        Mask::from_image(grid, &img)
    }
}

/// Mask construction recipes. Centers are in cell coordinates `(x, xi)`,
/// radii in continuous units, measures in plane measure.
#[derive(Clone, Debug, PartialEq)]
pub enum ShapeSpec {
    Empty,
    Full,
    Disc { center: Option<(f64, f64)>, measure: f64 },
    Rect { x0: usize, xi0: usize, width: usize, height: usize },
    Annulus { center: Option<(f64, f64)>, inner: f64, outer: f64 },
    Discs(Vec<(Option<(f64, f64)>, f64)>),
    Complement(Box<ShapeSpec>),
    Image(PathBuf),
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn at(c: &Option<(f64, f64)>) -> String {
            c.map(|(x, y)| format!("@{x},{y}")).unwrap_or_default()
        }
        match self {
            ShapeSpec::Empty => write!(f, "empty"),
            ShapeSpec::Full => write!(f, "full"),
            ShapeSpec::Disc { center, measure } => write!(f, "disc:{measure}{}", at(center)),
            ShapeSpec::Rect { x0, xi0, width, height } => {
                write!(f, "rect:{x0},{xi0},{width},{height}")
            }
            ShapeSpec::Annulus { center, inner, outer } => {
                write!(f, "annulus:{inner},{outer}{}", at(center))
            }
            ShapeSpec::Discs(ds) => {
                let parts: Vec<String> = ds.iter().map(|(c, m)| format!("{m}{}", at(c))).collect();
                write!(f, "discs:{}", parts.join(";"))
            }
            ShapeSpec::Complement(inner) => write!(f, "not:{inner}"),
            ShapeSpec::Image(p) => write!(f, "image:{}", p.display()),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::config(format!("expected a number, got '{s}'")))
}

fn parse_center(s: Option<&str>) -> Result<Option<(f64, f64)>> {
    match s {
        None => Ok(None),
        Some(c) => {
            let (a, b) = c
                .split_once(',')
                .ok_or_else(|| Error::config(format!("center '{c}' must be 'x,xi'")))?;
            Ok(Some((parse_f64(a)?, parse_f64(b)?)))
        }
    }
}

impl FromStr for ShapeSpec {
    type Err = Error;

    /// Grammar: `empty`, `full`, `disc:M[@x,xi]`, `rect:x0,xi0,w,h`,
    /// `annulus:r_in,r_out[@x,xi]`, `discs:M[@x,xi];M[@x,xi]...`,
    /// `not:<shape>`, `image:<path.pgm>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let split_at = |a: &str| -> (String, Option<String>) {
            match a.split_once('@') {
                Some((l, r)) => (l.to_string(), Some(r.to_string())),
                None => (a.to_string(), None),
            }
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "empty" => Ok(ShapeSpec::Empty),
            "full" => Ok(ShapeSpec::Full),
            "disc" => {
                let (m, c) = split_at(args);
                Ok(ShapeSpec::Disc { center: parse_center(c.as_deref())?, measure: parse_f64(&m)? })
            }
            "rect" => {
                let v: Vec<usize> = args
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::config(format!("bad rect field '{p}'")))
                    })
                    .collect::<Result<_>>()?;
                if v.len() != 4 {
                    return Err(Error::config("rect needs x0,xi0,width,height"));
                }
                Ok(ShapeSpec::Rect { x0: v[0], xi0: v[1], width: v[2], height: v[3] })
            }
            "annulus" => {
                let (r, c) = split_at(args);
                let (a, b) = r
                    .split_once(',')
                    .ok_or_else(|| Error::config("annulus needs r_in,r_out"))?;
                Ok(ShapeSpec::Annulus {
                    center: parse_center(c.as_deref())?,
                    inner: parse_f64(a)?,
                    outer: parse_f64(b)?,
                })
            }
            "discs" => {
                let ds = args
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| {
                        let (m, c) = split_at(p);
                        Ok((parse_center(c.as_deref())?, parse_f64(&m)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ShapeSpec::Discs(ds))
            }
            "not" => Ok(ShapeSpec::Complement(Box::new(args.parse()?))),
            "image" => Ok(ShapeSpec::Image(PathBuf::from(args.trim()))),
            other => Err(Error::config(format!("unknown shape '{other}'"))),
        }
    }
}

/// Cyclic distance between real cell coordinates, in cells.
fn wrap_real(d: f64, n: f64) -> f64 {
    let d = d.rem_euclid(n);
    d.min(n - d)
}

fn default_center(grid: TfGrid) -> (f64, f64) {
    let h = (grid.n() / 2) as f64;
    (h, h)
}

fn center_distance(grid: TfGrid, c: (f64, f64), x: usize, xi: usize) -> f64 {
    let n = grid.n() as f64;
    let a = wrap_real(x as f64 - c.0, n);
    let b = wrap_real(xi as f64 - c.1, n);
    (a * a + b * b).sqrt() * grid.cell_side()
}

/// Disc of the requested measure: the `round(measure * n)` cells closest to the
/// center, ties broken by cell index. The measure is within half a cell of the target.
fn disc(grid: TfGrid, center: Option<(f64, f64)>, measure: f64) -> Result<Mask> {
    if !(measure >= 0.0) || measure > grid.plane_measure() {
        return Err(Error::config(format!(
            "disc measure {measure} outside [0, {}]",
            grid.plane_measure()
        )));
    }
    let c = center.unwrap_or_else(|| default_center(grid));
    let n = grid.n();
    let mut order: Vec<(f64, usize)> =
        (0..grid.cells()).map(|i| (center_distance(grid, c, i / n, i % n), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let take = (measure * n as f64).round() as usize;
    let mut mask = Mask::empty(grid);
    for &(_, i) in order.iter().take(take) {
        mask.cells[i] = true;
    }
    Ok(mask)
}

pub fn make_mask(grid: TfGrid, shape: &ShapeSpec) -> Result<Mask> {
    match shape {
        ShapeSpec::Empty => Ok(Mask::empty(grid)),
        ShapeSpec::Full => Ok(Mask::full(grid)),
        ShapeSpec::Disc { center, measure } => disc(grid, *center, *measure),
        ShapeSpec::Rect { x0, xi0, width, height } => {
            let n = grid.n();
            if *width > n || *height > n {
                return Err(Error::config(format!("rect {width}x{height} exceeds grid {n}")));
            }
            let mut m = Mask::empty(grid);
            for dx in 0..*width {
                for dxi in 0..*height {
                    m.set((x0 + dx) % n, (xi0 + dxi) % n, true);
                }
            }
            Ok(m)
        }
        ShapeSpec::Annulus { center, inner, outer } => {
            if !(*inner >= 0.0 && outer >= inner) {
                return Err(Error::config("annulus needs 0 <= r_in <= r_out"));
            }
            let area = std::f64::consts::PI * outer * outer;
            if area > grid.plane_measure() {
                return Err(Error::config("annulus outer disc exceeds the plane measure"));
            }
            let c = center.unwrap_or_else(|| default_center(grid));
            Ok(Mask::from_fn(grid, |x, xi| {
                let d = center_distance(grid, c, x, xi);
                d >= *inner && d < *outer
            }))
        }
        ShapeSpec::Discs(ds) => {
            let mut m = Mask::empty(grid);
            for (c, measure) in ds {
                m = m.union(&disc(grid, *c, *measure)?)?;
            }
            Ok(m)
        }
        ShapeSpec::Complement(inner) => Ok(make_mask(grid, inner)?.complement()),
        ShapeSpec::Image(path) => Mask::load_pgm(grid, path),
    }
}

/// One-dimensional squared distance transform of a sampled function on a
/// cycle of length `f.len()` (lower envelope of parabolas).
fn dt_cyclic(f: &[f64]) -> Vec<f64> {
    let len = f.len();
    let ext: Vec<f64> = f.iter().cycle().take(3 * len).copied().collect();
    let m = ext.len();
    let mut v = vec![0usize; m];
    let mut z = vec![0f64; m + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..m {
        if !ext[q].is_finite() {
            continue;
        }
        match first {
            None => {
                first = Some(q);
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                k = 0;
            }
            Some(_) => loop {
                let p = v[k];
                let s = ((ext[q] + (q * q) as f64) - (ext[p] + (p * p) as f64))
                    / (2.0 * q as f64 - 2.0 * p as f64);
                // z[0] is -inf, so this never underflows
                if s <= z[k] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            },
        }
    }
    if first.is_none() {
        return vec![f64::INFINITY; len];
    }
    let mut out = vec![0f64; len];
    let mut j = 0usize;
    for q in len..2 * len {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let d = q as f64 - p as f64;
        out[q - len] = d * d + ext[p];
    }
    out
}

/// Exact squared Euclidean distance transform on a `rows x cols` torus.
/// `features[i]` marks zero-distance sites; the result is in grid units squared.
fn edt_torus(rows: usize, cols: usize, features: &[bool]) -> Vec<f64> {
    let mut f: Vec<f64> =
        features.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let mut col = vec![0f64; rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = f[r * cols + c];
        }
        let d = dt_cyclic(&col);
        for r in 0..rows {
            f[r * cols + c] = d[r];
        }
    }
    for r in 0..rows {
        let d = dt_cyclic(&f[r * cols..(r + 1) * cols]);
        f[r * cols..(r + 1) * cols].copy_from_slice(&d);
    }
    f
}

/// A real value per lattice cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    grid: TfGrid,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, xi: usize) -> f64 {
        self.values[self.grid.index(x, xi)]
    }

    /// Cells with distance strictly below `r`.
    pub fn below(&self, r: f64) -> Mask {
        Mask { grid: self.grid, cells: self.values.iter().map(|&d| d < r).collect() }
    }
}

/// Distance from each cell center to the boundary edge set of `mask`.
///
/// Computed exactly on a twice-refined lattice: the nearest point of an
/// axis-aligned edge to a cell center is either its midpoint or an endpoint.
/// Infinite everywhere when the mask has no boundary.
pub fn boundary_distance(mask: &Mask) -> DistanceField {
    let grid = mask.grid();
    let n = grid.n();
    let m = 2 * n;
    let mut feat = vec![false; m * m];
    let mut mark = |r: usize, c: usize| feat[(r % m) * m + (c % m)] = true;
    for x in 0..n {
        for xi in 0..n {
            let c = mask.get(x, xi);
            if c != mask.get((x + 1) % n, xi) {
                let r = 2 * x + 2;
                mark(r, 2 * xi);
                mark(r, 2 * xi + 1);
                mark(r, 2 * xi + 2);
            }
            if c != mask.get(x, (xi + 1) % n) {
                let cc = 2 * xi + 2;
                mark(2 * x, cc);
                mark(2 * x + 1, cc);
                mark(2 * x + 2, cc);
            }
        }
    }
    let sq = edt_torus(m, m, &feat);
    let scale = 0.5 * grid.cell_side();
    let values = (0..grid.cells())
        .map(|i| {
            let (x, xi) = (i / n, i % n);
            sq[(2 * x + 1) * m + 2 * xi + 1].sqrt() * scale
        })
        .collect();
    DistanceField { grid, values }
}

/// Distance from each cell center to the nearest cell center of `mask`.
pub fn set_distance(mask: &Mask) -> DistanceField {
    let grid = mask.grid();
    let n = grid.n();
    let sq = edt_torus(n, n, mask.cells());
    let side = grid.cell_side();
    DistanceField { grid, values: sq.iter().map(|d| d.sqrt() * side).collect() }
}

/// `[dOmega]^r`: cells whose center lies at distance `< r` from the boundary.
pub fn boundary_neighborhood(mask: &Mask, r: f64) -> Mask {
    boundary_distance(mask).below(r)
}

/// `Omega^r = {z : dist(z, Omega) < r}`, which always contains `Omega`.
pub fn dilate(mask: &Mask, r: f64) -> Mask {
    let mut out = set_distance(mask).below(r);
    for (o, &c) in out.cells.iter_mut().zip(mask.cells()) {
        *o |= c;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub sym_diff_measure: f64,
    pub perimeter: f64,
    /// Smallest `r` such that the error set lies in the closed `r`-neighborhood
    /// of the boundary; 0 for an empty error set, infinite when the truth has no
    /// boundary but errors exist.
    pub containment_radius: f64,
    pub ratio: f64,
}

impl ErrorReport {
    /// `Omega \triangle Omega_hat \subseteq [dOmega]^r`, with ties counted as contained.
    pub fn contained_within(&self, r: f64) -> bool {
        self.containment_radius <= r
    }
}

pub fn error_report(truth: &Mask, estimate: &Mask) -> Result<ErrorReport> {
    let diff = truth.symmetric_difference(estimate)?;
    let sym_diff_measure = diff.measure();
    let perimeter = truth.perimeter();
    let containment_radius = if diff.is_empty() {
        0.0
    } else {
        let dist = boundary_distance(truth);
        diff.cells()
            .iter()
            .zip(dist.values())
            .filter(|(e, _)| **e)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    };
    let ratio = if sym_diff_measure == 0.0 {
        0.0
    } else if perimeter == 0.0 {
        f64::INFINITY
    } else {
        sym_diff_measure / perimeter
    };
    Ok(ErrorReport { sym_diff_measure, perimeter, containment_radius, ratio })
}
