//! Exact algebra on the family of piecewise-linear functions with a bottom
//! element (identically minus infinity): evaluation, pointwise min/max, the
//! two-slope kernel `h_[d,c]`, and the epigraph-sum transform `gr_[d,c]`.
//!
//! A finite member is continuous with finitely many segments; it is stored
//! as breakpoints with values plus the two outer ray slopes, so continuity
//! holds by construction.  Epigraphs use the convention
//! `epi(f) = {(x, y): x >= f(y)}` — the first coordinate is cash, the
//! second the argument.

use crate::error::{Error, Result};

/// Slopes within this tolerance are merged during canonicalization.
pub const SLOPE_MERGE_TOL: f64 = 1e-12;

/// A piecewise-linear function or the bottom element.
#[derive(Clone, Debug, PartialEq)]
pub enum PiecewiseLinear {
    /// Identically minus infinity.
    Bottom,
    Finite(PlFn),
}

/// A finite piecewise-linear function.
///
/// `xs` are strictly increasing breakpoints (at least one anchor point is
/// always kept, even for affine functions), `vs` the values there, and the
/// outer rays have slopes `slope_left` / `slope_right`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlFn {
    xs: Vec<f64>,
    vs: Vec<f64>,
    slope_left: f64,
    slope_right: f64,
}

impl PlFn {
    pub fn new(xs: Vec<f64>, vs: Vec<f64>, slope_left: f64, slope_right: f64) -> Result<PlFn> {
        if xs.is_empty() || xs.len() != vs.len() {
            return Err(Error::ShapeMismatch(format!(
                "breakpoints/values length mismatch: {} vs {}",
                xs.len(),
                vs.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if xs.iter().any(|x| !x.is_finite())
            || vs.iter().any(|v| !v.is_finite())
            || !slope_left.is_finite()
            || !slope_right.is_finite()
        {
            return Err(Error::InvalidParameter(
                "breakpoints, values and slopes must be finite".into(),
            ));
        }
        Ok(PlFn {
            xs,
            vs,
            slope_left,
            slope_right,
        })
    }

    /// Affine function `y -> slope * y + intercept`, anchored at 0.
    pub fn affine(slope: f64, intercept: f64) -> PlFn {
        PlFn {
            xs: vec![0.0],
            vs: vec![intercept],
            slope_left: slope,
            slope_right: slope,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.vs
    }

    pub fn slope_left(&self) -> f64 {
        self.slope_left
    }

    pub fn slope_right(&self) -> f64 {
        self.slope_right
    }

    /// All `m + 1` segment slopes from left ray to right ray.
    pub fn slopes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.xs.len() + 1);
        out.push(self.slope_left);
        for i in 1..self.xs.len() {
            out.push((self.vs[i] - self.vs[i - 1]) / (self.xs[i] - self.xs[i - 1]));
        }
        out.push(self.slope_right);
        out
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.xs.len();
        if y <= self.xs[0] {
            return self.vs[0] + self.slope_left * (y - self.xs[0]);
        }
        if y >= self.xs[n - 1] {
            return self.vs[n - 1] + self.slope_right * (y - self.xs[n - 1]);
        }
        // binary search for the segment containing y
        let i = self.xs.partition_point(|&x| x <= y) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (v0, v1) = (self.vs[i], self.vs[i + 1]);
        v0 + (v1 - v0) * (y - x0) / (x1 - x0)
    }

    /// Remove breakpoints separating segments of (nearly) equal slope;
    /// affine functions are re-anchored at 0.  Idempotent.
    pub fn canonicalize(&self) -> PlFn {
        self.canonicalize_with(SLOPE_MERGE_TOL, 0.0)
    }

    /// Canonicalize with explicit tolerances: breakpoints closer than
    /// `x_tol` (scaled) collapse onto their predecessor, then interior
    /// points separating slopes equal within `slope_tol` (scaled) merge.
    pub fn canonicalize_with(&self, slope_tol: f64, x_tol: f64) -> PlFn {
        // collapse slivers first: they carry numerically meaningless
        // slopes
        let mut xs: Vec<f64> = Vec::with_capacity(self.xs.len());
        let mut vs: Vec<f64> = Vec::with_capacity(self.vs.len());
        for (x, v) in self.xs.iter().zip(&self.vs) {
            match xs.last() {
                Some(&prev) if (x - prev).abs() <= x_tol * x.abs().max(1.0) => {}
                _ => {
                    xs.push(*x);
                    vs.push(*v);
                }
            }
        }
        let work = PlFn {
            xs,
            vs,
            slope_left: self.slope_left,
            slope_right: self.slope_right,
        };
        let slopes = work.slopes();
        let mut xs = Vec::with_capacity(work.xs.len());
        let mut vs = Vec::with_capacity(work.vs.len());
        for i in 0..work.xs.len() {
            let (sl, sr) = (slopes[i], slopes[i + 1]);
            let tol = slope_tol * sl.abs().max(sr.abs()).max(1.0);
            if (sl - sr).abs() > tol {
                xs.push(work.xs[i]);
                vs.push(work.vs[i]);
            }
        }
        if xs.is_empty() {
            // Affine: recompute the common slope from the outer rays and
            // anchor at 0.
            let slope = self.slope_left;
            let intercept = self.vs[0] - slope * self.xs[0];
            return PlFn::affine(slope, intercept);
        }
        PlFn {
            xs,
            vs,
            slope_left: self.slope_left,
            slope_right: self.slope_right,
        }
    }
}

impl PiecewiseLinear {
    pub fn affine(slope: f64, intercept: f64) -> PiecewiseLinear {
        PiecewiseLinear::Finite(PlFn::affine(slope, intercept))
    }

    pub fn constant(c: f64) -> PiecewiseLinear {
        PiecewiseLinear::affine(0.0, c)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, PiecewiseLinear::Bottom)
    }

    pub fn as_finite(&self) -> Option<&PlFn> {
        match self {
            PiecewiseLinear::Bottom => None,
            PiecewiseLinear::Finite(f) => Some(f),
        }
    }

    /// Evaluate; `-inf` for the bottom element.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            PiecewiseLinear::Bottom => f64::NEG_INFINITY,
            PiecewiseLinear::Finite(f) => f.eval(y),
        }
    }

    pub fn canonicalize(&self) -> PiecewiseLinear {
        match self {
            PiecewiseLinear::Bottom => PiecewiseLinear::Bottom,
            PiecewiseLinear::Finite(f) => PiecewiseLinear::Finite(f.canonicalize()),
        }
    }

    /// `y -> f(y) + c`
    pub fn shift_value(&self, c: f64) -> PiecewiseLinear {
        self.map_finite(|f| PlFn {
            xs: f.xs.clone(),
            vs: f.vs.iter().map(|v| v + c).collect(),
            slope_left: f.slope_left,
            slope_right: f.slope_right,
        })
    }

    /// `y -> f(y - s)`
    pub fn shift_arg(&self, s: f64) -> PiecewiseLinear {
        self.map_finite(|f| PlFn {
            xs: f.xs.iter().map(|x| x + s).collect(),
            vs: f.vs.clone(),
            slope_left: f.slope_left,
            slope_right: f.slope_right,
        })
    }

    /// `y -> f(-y)`
    pub fn reflect(&self) -> PiecewiseLinear {
        self.map_finite(|f| {
            let xs: Vec<f64> = f.xs.iter().rev().map(|x| -x).collect();
            let vs: Vec<f64> = f.vs.iter().rev().cloned().collect();
            PlFn {
                xs,
                vs,
                slope_left: -f.slope_right,
                slope_right: -f.slope_left,
            }
        })
    }

    /// `y -> -f(y)`; only meaningful for finite functions.
    pub fn negate(&self) -> Result<PiecewiseLinear> {
        match self {
            PiecewiseLinear::Bottom => Err(Error::IllPosed("cannot negate bottom".into())),
            PiecewiseLinear::Finite(f) => Ok(PiecewiseLinear::Finite(PlFn {
                xs: f.xs.clone(),
                vs: f.vs.iter().map(|v| -v).collect(),
                slope_left: -f.slope_left,
                slope_right: -f.slope_right,
            })),
        }
    }

    fn map_finite(&self, op: impl FnOnce(&PlFn) -> PlFn) -> PiecewiseLinear {
        match self {
            PiecewiseLinear::Bottom => PiecewiseLinear::Bottom,
            PiecewiseLinear::Finite(f) => PiecewiseLinear::Finite(op(f)),
        }
    }

    /// Breakpoint/slope dump for debugging, one `x,value` row per
    /// breakpoint plus a trailing slopes row.
    pub fn to_csv(&self) -> String {
        match self {
            PiecewiseLinear::Bottom => "bottom\n".to_string(),
            PiecewiseLinear::Finite(f) => {
                let mut s = String::from("x,value\n");
                for (x, v) in f.xs.iter().zip(&f.vs) {
                    s.push_str(&format!("{x:.17e},{v:.17e}\n"));
                }
                s.push_str(&format!(
                    "slopes,{}\n",
                    f.slopes()
                        .iter()
                        .map(|s| format!("{s:.17e}"))
                        .collect::<Vec<_>>()
                        .join(",")
                ));
                s
            }
        }
    }
}

/// The two-slope kernel `h_[d,c](y) = c y^- - d y^+` for `c >= d`: slopes
/// `-c` then `-d` with a kink at the origin and `h(0) = 0`.
pub fn h_kernel(d: f64, c: f64) -> Result<PiecewiseLinear> {
    if !(c >= d) || !c.is_finite() || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "h kernel requires c >= d, got d={d}, c={c}"
        )));
    }
    Ok(PiecewiseLinear::Finite(PlFn {
        xs: vec![0.0],
        vs: vec![0.0],
        slope_left: -c,
        slope_right: -d,
    }))
}

fn merge_grids(f: &PlFn, g: &PlFn) -> Vec<f64> {
    let mut xs: Vec<f64> = f.xs.iter().chain(g.xs.iter()).cloned().collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| {
        let tol = 1e-14 * a.abs().max(b.abs()).max(1.0);
        (*a - *b).abs() <= tol
    });
    xs
}

/// Crossing of the segments of `f` and `g` over the open interval
/// `(lo, hi)` (either bound may be infinite), assuming both are affine
/// there.
fn crossing_on(f: &PlFn, g: &PlFn, lo: f64, hi: f64) -> Option<f64> {
    // Sample the two affine pieces at a representative point.
    let probe = if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + 1.0
    } else if hi.is_finite() {
        hi - 1.0
    } else {
        0.0
    };
    let slope = |h: &PlFn| {
        if probe <= h.xs[0] {
            h.slope_left
        } else if probe >= h.xs[h.xs.len() - 1] {
            h.slope_right
        } else {
            let i = h.xs.partition_point(|&x| x <= probe) - 1;
            (h.vs[i + 1] - h.vs[i]) / (h.xs[i + 1] - h.xs[i])
        }
    };
    let (sf, sg) = (slope(f), slope(g));
    let slope_diff = sf - sg;
    if slope_diff.abs() <= 1e-15 * sf.abs().max(sg.abs()).max(1.0) {
        return None;
    }
    let (vf, vg) = (f.eval(probe), g.eval(probe));
    let x = probe + (vg - vf) / slope_diff;
    (x > lo && x < hi && x.is_finite()).then_some(x)
}

fn combine(f: &PlFn, g: &PlFn, take_min: bool) -> PlFn {
    let base = merge_grids(f, g);
    let mut xs: Vec<f64> = Vec::with_capacity(base.len() * 2 + 2);
    // crossings on the outer rays and between consecutive grid points
    let first = base[0];
    let last = base[base.len() - 1];
    if let Some(x) = crossing_on(f, g, f64::NEG_INFINITY, first) {
        xs.push(x);
    }
    for (i, &x) in base.iter().enumerate() {
        xs.push(x);
        if i + 1 < base.len() {
            if let Some(c) = crossing_on(f, g, x, base[i + 1]) {
                xs.push(c);
            }
        }
    }
    if let Some(x) = crossing_on(f, g, last, f64::INFINITY) {
        xs.push(x);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| {
        let tol = 1e-14 * a.abs().max(b.abs()).max(1.0);
        (*a - *b).abs() <= tol
    });
    let pick = |a: f64, b: f64| if take_min { a.min(b) } else { a.max(b) };
    let vs: Vec<f64> = xs.iter().map(|&x| pick(f.eval(x), g.eval(x))).collect();
    // Outer slopes: toward -inf the larger left slope dives (smaller values);
    // toward +inf the smaller right slope dives.
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-15 * a.abs().max(b.abs()).max(1.0);
    let slope_left = if eq(f.slope_left, g.slope_left) {
        f.slope_left
    } else {
        let f_wins_min = f.slope_left > g.slope_left;
        if f_wins_min == take_min {
            f.slope_left
        } else {
            g.slope_left
        }
    };
    let slope_right = if eq(f.slope_right, g.slope_right) {
        f.slope_right
    } else {
        let f_wins_min = f.slope_right < g.slope_right;
        if f_wins_min == take_min {
            f.slope_right
        } else {
            g.slope_right
        }
    };
    PlFn {
        xs,
        vs,
        slope_left,
        slope_right,
    }
    .canonicalize()
}

/// Pointwise minimum; the bottom element absorbs.
pub fn pointwise_min(f: &PiecewiseLinear, g: &PiecewiseLinear) -> PiecewiseLinear {
    match (f, g) {
        (PiecewiseLinear::Bottom, _) | (_, PiecewiseLinear::Bottom) => PiecewiseLinear::Bottom,
        (PiecewiseLinear::Finite(a), PiecewiseLinear::Finite(b)) => {
            PiecewiseLinear::Finite(combine(a, b, true))
        }
    }
}

/// Pointwise maximum; the bottom element is the identity.
pub fn pointwise_max(f: &PiecewiseLinear, g: &PiecewiseLinear) -> PiecewiseLinear {
    match (f, g) {
        (PiecewiseLinear::Bottom, other) | (other, PiecewiseLinear::Bottom) => other.clone(),
        (PiecewiseLinear::Finite(a), PiecewiseLinear::Finite(b)) => {
            PiecewiseLinear::Finite(combine(a, b, false))
        }
    }
}

/// Pointwise sum of two finite functions.
pub fn add(f: &PiecewiseLinear, g: &PiecewiseLinear) -> PiecewiseLinear {
    match (f, g) {
        (PiecewiseLinear::Bottom, _) | (_, PiecewiseLinear::Bottom) => PiecewiseLinear::Bottom,
        (PiecewiseLinear::Finite(a), PiecewiseLinear::Finite(b)) => {
            let xs = merge_grids(a, b);
            let vs: Vec<f64> = xs.iter().map(|&x| a.eval(x) + b.eval(x)).collect();
            PiecewiseLinear::Finite(
                PlFn {
                    xs,
                    vs,
                    slope_left: a.slope_left + b.slope_left,
                    slope_right: a.slope_right + b.slope_right,
                }
                .canonicalize(),
            )
        }
    }
}

/// Epigraph-sum transform: the unique function with
/// `epi(gr_[d,c](f)) = epi(h_[d,c]) + epi(f)`, equivalently the infimal
/// convolution `y -> inf_u [h(u) + f(y - u)]`, which is attained for
/// polyhedral inputs.  Returns the bottom element when the infimum is
/// minus infinity (slope incompatibility).
///
/// `f` need not be convex, so the transform convolves each segment of `f`
/// with the two-ray kernel separately and takes the pointwise minimum.
pub fn gr_transform(f: &PiecewiseLinear, d: f64, c: f64) -> Result<PiecewiseLinear> {
    if !(c >= d) || !c.is_finite() || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gr transform requires c >= d, got d={d}, c={c}"
        )));
    }
    let f = match f {
        PiecewiseLinear::Bottom => return Ok(PiecewiseLinear::Bottom),
        PiecewiseLinear::Finite(f) => f.canonicalize(),
    };
    // Unbounded-below detection from the asymptotic slopes: along u -> +inf
    // the integrand behaves like -(d + slope_left) u, along u -> -inf like
    // (c + slope_right) u.
    let tol = 1e-12;
    let sl = f.slope_left;
    let sr = f.slope_right;
    if sl > -d + tol * d.abs().max(1.0) || sr < -c - tol * c.abs().max(1.0) {
        return Ok(PiecewiseLinear::Bottom);
    }
    let two_ray = |anchor_x: f64, anchor_v: f64| PlFn {
        xs: vec![anchor_x],
        vs: vec![anchor_v],
        slope_left: -c,
        slope_right: -d,
    };
    let m = f.xs.len();
    let mut pieces: Vec<PlFn> = Vec::new();

    // Left ray of f, ending at (xs[0], vs[0]) with slope sl <= -d.
    if sl <= -c {
        pieces.push(two_ray(f.xs[0], f.vs[0]));
    } else {
        // -c < sl <= -d: keep the ray, then continue with slope -d.
        pieces.push(PlFn {
            xs: vec![f.xs[0]],
            vs: vec![f.vs[0]],
            slope_left: sl,
            slope_right: -d,
        });
    }
    // Interior segments [x_i, x_{i+1}].
    for i in 0..m.saturating_sub(1) {
        let (a, b) = (f.xs[i], f.xs[i + 1]);
        let (ga, gb) = (f.vs[i], f.vs[i + 1]);
        let s = (gb - ga) / (b - a);
        if s >= -d {
            pieces.push(two_ray(a, ga));
        } else if s <= -c {
            pieces.push(two_ray(b, gb));
        } else {
            pieces.push(PlFn {
                xs: vec![a, b],
                vs: vec![ga, gb],
                slope_left: -c,
                slope_right: -d,
            });
        }
    }
    // Right ray of f, starting at the last breakpoint with slope sr >= -c.
    let (xl, vl) = (f.xs[m - 1], f.vs[m - 1]);
    if sr >= -d {
        pieces.push(two_ray(xl, vl));
    } else {
        pieces.push(PlFn {
            xs: vec![xl],
            vs: vec![vl],
            slope_left: -c,
            slope_right: sr,
        });
    }
    let mut acc = PiecewiseLinear::Finite(pieces[0].clone());
    for p in &pieces[1..] {
        acc = pointwise_min(&acc, &PiecewiseLinear::Finite(p.clone()));
    }
    Ok(acc.canonicalize())
}

/// Membership of `(x, y)` in `epi(f)` with a relative slack on the cash
/// coordinate; everything belongs to the epigraph of the bottom element.
pub fn epi_member(x: f64, y: f64, f: &PiecewiseLinear) -> bool {
    epi_member_tol(x, y, f, 1e-9)
}

/// Epigraph membership with an explicit relative tolerance.
pub fn epi_member_tol(x: f64, y: f64, f: &PiecewiseLinear, tol: f64) -> bool {
    match f {
        PiecewiseLinear::Bottom => true,
        PiecewiseLinear::Finite(g) => {
            let v = g.eval(y);
            let scale = x.abs().max(v.abs()).max(1.0);
            x >= v - tol * scale
        }
    }
}

/// Structural near-equality: canonicalize both sides at the comparison
/// tolerance (collapsing numerical slivers), then compare breakpoints,
/// values and outer slopes.
pub fn approx_same(f: &PiecewiseLinear, g: &PiecewiseLinear, tol: f64) -> bool {
    let canon = |h: &PiecewiseLinear| match h {
        PiecewiseLinear::Bottom => PiecewiseLinear::Bottom,
        PiecewiseLinear::Finite(p) => {
            PiecewiseLinear::Finite(p.canonicalize_with(tol.max(SLOPE_MERGE_TOL), tol))
        }
    };
    match (canon(f), canon(g)) {
        (PiecewiseLinear::Bottom, PiecewiseLinear::Bottom) => true,
        (PiecewiseLinear::Finite(a), PiecewiseLinear::Finite(b)) => {
            let near = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
            a.xs.len() == b.xs.len()
                && a.xs.iter().zip(&b.xs).all(|(x, y)| near(*x, *y))
                && a.vs.iter().zip(&b.vs).all(|(x, y)| near(*x, *y))
                && near(a.slope_left, b.slope_left)
                && near(a.slope_right, b.slope_right)
        }
        _ => false,
    }
}
