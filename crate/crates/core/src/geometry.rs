//! Planar geometry: half-open dyadic squares, randomly shifted lattices,
//! contours, skeletons and Whitney families.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point of the plane.
pub type Point = Complex64;

/// Convenience constructor.
pub fn pt(re: f64, im: f64) -> Point {
    Complex64::new(re, im)
}

/// Exact `2^-k` for moderate `k`.
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// Closed axis-parallel rectangle `[x0,x1] x [y0,y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

fn gap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (b0 - a1).max(a0 - b1).max(0.0)
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn center(&self) -> Point {
        pt(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn dist_point(&self, p: Point) -> f64 {
        let dx = gap(self.x0, self.x1, p.re, p.re);
        let dy = gap(self.y0, self.y1, p.im, p.im);
        dx.hypot(dy)
    }

    /// Distance between two closed rectangles.
    pub fn dist_rect(&self, o: &Rect) -> f64 {
        let dx = gap(self.x0, self.x1, o.x0, o.x1);
        let dy = gap(self.y0, self.y1, o.y0, o.y1);
        dx.hypot(dy)
    }

    /// Distance from `p` to the boundary of the rectangle.
    pub fn dist_boundary(&self, p: Point) -> f64 {
        if self.contains_closed(p) {
            (p.re - self.x0)
                .min(self.x1 - p.re)
                .min(p.im - self.y0)
                .min(self.y1 - p.im)
        } else {
            self.dist_point(p)
        }
    }

    /// Distance from the closed rectangle `o` (assumed inside `self`) to the boundary of `self`.
    pub fn inner_boundary_gap(&self, o: &Rect) -> f64 {
        (o.x0 - self.x0)
            .min(self.x1 - o.x1)
            .min(o.y0 - self.y0)
            .min(self.y1 - o.y1)
    }

    pub fn contains_closed(&self, p: Point) -> bool {
        p.re >= self.x0 && p.re <= self.x1 && p.im >= self.y0 && p.im <= self.y1
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x0 >= self.x0 && o.x1 <= self.x1 && o.y0 >= self.y0 && o.y1 <= self.y1
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            pt(self.x0, self.y0),
            pt(self.x1, self.y0),
            pt(self.x0, self.y1),
            pt(self.x1, self.y1),
        ]
    }
}

/// Integer address of a dyadic square inside its lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SquareKey {
    pub level: u32,
    pub ix: i64,
    pub iy: i64,
}

impl SquareKey {
    pub fn new(level: u32, ix: i64, iy: i64) -> Self {
        SquareKey { level, ix, iy }
    }

    pub fn parent(&self) -> Option<SquareKey> {
        if self.level == 0 {
            None
        } else {
            Some(SquareKey::new(self.level - 1, self.ix.div_euclid(2), self.iy.div_euclid(2)))
        }
    }

    /// Children in lexicographic order: lower-left, lower-right, upper-left, upper-right.
    pub fn children(&self) -> [SquareKey; 4] {
        let (l, x, y) = (self.level + 1, 2 * self.ix, 2 * self.iy);
        [
            SquareKey::new(l, x, y),
            SquareKey::new(l, x + 1, y),
            SquareKey::new(l, x, y + 1),
            SquareKey::new(l, x + 1, y + 1),
        ]
    }

    /// Whether `self` is `other` or one of its descendants.
    pub fn is_within(&self, other: &SquareKey) -> bool {
        if self.level < other.level {
            return false;
        }
        let s = self.level - other.level;
        (self.ix >> s) == other.ix && (self.iy >> s) == other.iy
    }

    /// The ancestor of `self` at `level` (which must not exceed `self.level`).
    pub fn ancestor(&self, level: u32) -> SquareKey {
        let s = self.level - level;
        SquareKey::new(level, self.ix >> s, self.iy >> s)
    }
}

impl std::fmt::Display for SquareKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.level, self.ix, self.iy)
    }
}

/// A half-open dyadic square `[a, a+side) x [c, c+side)` of a lattice anchored at `anchor`
/// with root side `unit`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicSquare {
    pub key: SquareKey,
    pub anchor: Point,
    pub unit: f64,
}

impl DyadicSquare {
    pub fn new(key: SquareKey, anchor: Point, unit: f64) -> Self {
        DyadicSquare { key, anchor, unit }
    }

    pub fn level(&self) -> u32 {
        self.key.level
    }

    pub fn side(&self) -> f64 {
        self.unit * pow2(-(self.key.level as i32))
    }

    /// Lower-left corner.
    pub fn origin(&self) -> Point {
        let s = self.side();
        pt(
            self.anchor.re + self.key.ix as f64 * s,
            self.anchor.im + self.key.iy as f64 * s,
        )
    }

    /// Closure of the square.
    pub fn rect(&self) -> Rect {
        let s = self.side();
        let (ix, iy) = (self.key.ix as f64, self.key.iy as f64);
        Rect::new(
            self.anchor.re + ix * s,
            self.anchor.re + (ix + 1.0) * s,
            self.anchor.im + iy * s,
            self.anchor.im + (iy + 1.0) * s,
        )
    }

    pub fn center(&self) -> Point {
        self.rect().center()
    }

    pub fn area(&self) -> f64 {
        self.side() * self.side()
    }

    /// Half-open membership test.
    pub fn contains(&self, p: Point) -> bool {
        let r = self.rect();
        p.re >= r.x0 && p.re < r.x1 && p.im >= r.y0 && p.im < r.y1
    }

    fn with_key(&self, key: SquareKey) -> DyadicSquare {
        DyadicSquare::new(key, self.anchor, self.unit)
    }

    /// Children in lexicographic order (lower-left, lower-right, upper-left, upper-right).
    pub fn children(&self) -> [DyadicSquare; 4] {
        self.key.children().map(|k| self.with_key(k))
    }

    /// Child with index in `1..=4` following [`DyadicSquare::children`].
    pub fn child(&self, index: usize) -> Result<DyadicSquare> {
        if !(1..=4).contains(&index) {
            return domain(format!("child index {index} not in 1..=4"));
        }
        Ok(self.children()[index - 1])
    }

    pub fn parent(&self) -> Result<DyadicSquare> {
        match self.key.parent() {
            Some(k) => Ok(self.with_key(k)),
            None => domain("the root square has no parent"),
        }
    }

    /// The square of the same lattice with the given key.
    pub fn sibling_grid(&self, key: SquareKey) -> DyadicSquare {
        self.with_key(key)
    }

    /// Concentric closed square with side multiplied by `factor`.
    pub fn dilate(&self, factor: f64) -> Rect {
        let c = self.center();
        let h = 0.5 * factor * self.side();
        Rect::new(c.re - h, c.re + h, c.im - h, c.im + h)
    }

    /// Distance between closures.
    pub fn dist(&self, other: &DyadicSquare) -> f64 {
        self.rect().dist_rect(&other.rect())
    }

    /// Whether the closure of `self` lies inside the closure of `other`.
    pub fn inside(&self, other: &DyadicSquare) -> bool {
        other.rect().contains_rect(&self.rect())
    }

    /// Whether the half-open squares share a point.
    pub fn meets(&self, other: &DyadicSquare) -> bool {
        let (a, b) = (self.rect(), other.rect());
        a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1
    }
}

/// Long distance `l(Q) + l(R) + dist(Q, R)`.
pub fn long_distance(q: &DyadicSquare, r: &DyadicSquare) -> f64 {
    q.side() + r.side() + q.dist(r)
}

/// A randomly shifted dyadic lattice with root `shift + [-1/2, 1/2)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicLattice {
    pub shift: Point,
    pub seed: u64,
    pub root: DyadicSquare,
}

impl DyadicLattice {
    pub fn with_shift(shift: Point, seed: u64) -> Self {
        let anchor = shift - pt(0.5, 0.5);
        DyadicLattice {
            shift,
            seed,
            root: DyadicSquare::new(SquareKey::new(0, 0, 0), anchor, 1.0),
        }
    }

    pub fn anchor(&self) -> Point {
        self.root.anchor
    }

    pub fn square(&self, key: SquareKey) -> DyadicSquare {
        self.root.sibling_grid(key)
    }

    /// The grid square of the given level containing `p` (half-open convention).
    /// Levels address the infinite extension of the lattice, so the result may lie
    /// outside the root.
    pub fn locate(&self, level: u32, p: Point) -> DyadicSquare {
        let s = pow2(-(level as i32));
        let a = self.anchor();
        let mut ix = ((p.re - a.re) / s).floor() as i64;
        let mut iy = ((p.im - a.im) / s).floor() as i64;
        loop {
            let x0 = a.re + ix as f64 * s;
            let x1 = a.re + (ix + 1) as f64 * s;
            if p.re < x0 {
                ix -= 1;
            } else if p.re >= x1 {
                ix += 1;
            } else {
                break;
            }
        }
        loop {
            let y0 = a.im + iy as f64 * s;
            let y1 = a.im + (iy + 1) as f64 * s;
            if p.im < y0 {
                iy -= 1;
            } else if p.im >= y1 {
                iy += 1;
            } else {
                break;
            }
        }
        self.square(SquareKey::new(level, ix, iy))
    }

    /// All squares of the given level inside the root.
    pub fn squares_at(&self, level: u32) -> Vec<DyadicSquare> {
        let n = 1i64 << level;
        let mut out = Vec::with_capacity((n * n) as usize);
        for iy in 0..n {
            for ix in 0..n {
                out.push(self.square(SquareKey::new(level, ix, iy)));
            }
        }
        out
    }
}

/// Draws the shift uniformly from `[-1/4, 1/4)^2` with a seeded ChaCha generator.
pub fn sample_lattice(seed: u64) -> DyadicLattice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx: f64 = rng.random::<f64>() * 0.5 - 0.25;
    let sy: f64 = rng.random::<f64>() * 0.5 - 0.25;
    DyadicLattice::with_shift(pt(sx, sy), seed)
}

/// Circular arc `center + radius * e^{i t}`, `t` in `[start, start + span]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: Point,
    pub radius: f64,
    pub start: f64,
    pub span: f64,
}

impl Arc {
    pub fn length(&self) -> f64 {
        self.radius * self.span.abs()
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.center + Complex64::from_polar(self.radius, self.start + t * self.span)
    }

    pub fn dist(&self, p: Point) -> f64 {
        let span = self.span.abs();
        if span >= 2.0 * PI {
            return ((p - self.center).norm() - self.radius).abs();
        }
        let lo = if self.span >= 0.0 { self.start } else { self.start + self.span };
        let v = p - self.center;
        let ang = v.arg();
        let rel = (ang - lo).rem_euclid(2.0 * PI);
        if v.norm() > 0.0 && rel <= span {
            (v.norm() - self.radius).abs()
        } else {
            let a = self.point_at(0.0);
            let b = self.point_at(1.0);
            (p - a).norm().min((p - b).norm())
        }
    }
}

/// A finite union of segments and circular arcs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub segments: Vec<(Point, Point)>,
    pub arcs: Vec<Arc>,
}

/// Distance from `p` to the segment `[a, b]`.
pub fn dist_segment(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * d.re + (p - a).im * d.im) / l2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

impl Contour {
    /// Total length (the one-dimensional Hausdorff measure of the parts).
    pub fn length(&self) -> f64 {
        let s: f64 = self.segments.iter().map(|(a, b)| (b - a).norm()).sum();
        let a: f64 = self.arcs.iter().map(Arc::length).sum();
        s + a
    }

    pub fn dist(&self, p: Point) -> f64 {
        let s = self
            .segments
            .iter()
            .map(|&(a, b)| dist_segment(p, a, b))
            .fold(f64::INFINITY, f64::min);
        let a = self.arcs.iter().map(|c| c.dist(p)).fold(f64::INFINITY, f64::min);
        s.min(a)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.arcs.is_empty()
    }

    /// Boundary of a closed rectangle as four segments.
    pub fn rect_boundary(r: &Rect) -> Contour {
        let [ll, lr, ul, ur] = r.corners();
        Contour {
            segments: vec![(ll, lr), (lr, ur), (ur, ul), (ul, ll)],
            arcs: vec![],
        }
    }
}

/// Length of a contour.
pub fn h1_length(g: &Contour) -> f64 {
    g.length()
}

/// Union of the boundaries of the four children: outer boundary plus the interior cross.
pub fn skeleton(r: &DyadicSquare) -> Contour {
    let rect = r.rect();
    let mut c = Contour::rect_boundary(&rect);
    let m = rect.center();
    c.segments.push((pt(m.re, rect.y0), pt(m.re, rect.y1)));
    c.segments.push((pt(rect.x0, m.im), pt(rect.x1, m.im)));
    c
}

/// Truncated Whitney family of a square.
#[derive(Clone, Debug)]
pub struct WhitneyFamily {
    pub squares: Vec<DyadicSquare>,
    /// Area of the boundary collar left uncovered at the truncation level.
    pub residual_area: f64,
    pub max_level: u32,
}

impl WhitneyFamily {
    /// Number of squares whose level relative to the base square equals `rel_level`.
    pub fn count_at(&self, base: &DyadicSquare, rel_level: u32) -> usize {
        self.squares
            .iter()
            .filter(|s| s.level() == base.level() + rel_level)
            .count()
    }
}

/// Maximal dyadic subsquares `S` of `s0` with `dist(S, boundary of s0) >= l(S)`, down to
/// `max_level` generations below `s0`.
pub fn whitney(s0: &DyadicSquare, max_level: u32) -> Result<WhitneyFamily> {
    if max_level < 2 {
        return domain(format!("whitney max_level {max_level} < 2"));
    }
    let outer = s0.rect();
    let mut squares = Vec::new();
    let mut residual = 0.0;
    let mut stack = vec![*s0];
    while let Some(s) = stack.pop() {
        let gap = outer.inner_boundary_gap(&s.rect());
        if gap >= s.side() {
            squares.push(s);
        } else if s.level() - s0.level() < max_level {
            stack.extend(s.children());
        } else {
            residual += s.area();
        }
    }
    squares.sort_by_key(|s| s.key);
    Ok(WhitneyFamily {
        squares,
        residual_area: residual,
        max_level,
    })
}
