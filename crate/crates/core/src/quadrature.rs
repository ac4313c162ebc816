//! One-dimensional adaptive quadrature.
//!
//! The workhorse is a globally adaptive 21-point Gauss-Kronrod rule that
//! integrates vector-valued integrands over finite, semi-infinite and
//! whole-line domains. Panels touching a finite domain endpoint use the
//! quadratic map `x = e + (f - e) v^2`, which absorbs integrable algebraic
//! endpoint singularities; unbounded ends use `x = c + u / (1 - u)`.
//!
//! Densities in this crate are handled as logs. [`integrate_log`] and
//! [`integrate_log_weighted`] locate the peak of a log-integrand, place
//! breakpoints at multiples of its width and integrate the rescaled
//! exponential, so that the result can be returned as a log.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::special::log_gamma;

/// Default relative tolerance for closed-form cross-checks.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Evaluation budget before [`Error::NonConvergent`] is raised.
pub const MAX_EVALS: usize = 1 << 20;

/// Logs below this value are treated as an exact zero.
pub const LOG_UNDERFLOW: f64 = -745.0;

/// Mapped tail nodes closer than this to `u = 1` contribute nothing.
const TAIL_EXCLUSION: f64 = 1e-14;

// Kronrod abscissae and weights (21 points) with the embedded 10-point
// Gauss weights, as tabulated in QUADPACK's qk21.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_292_223,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// An integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite { lo: f64, hi: f64 },
    SemiInfinite { lo: f64 },
    /// The whole real line.
    Real,
}

impl Domain {
    pub fn finite(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Domain::Finite { lo, hi })
        } else {
            Err(Error::domain(format!("finite domain needs lo < hi, got ({lo}, {hi})")))
        }
    }

    pub fn semi_infinite(lo: f64) -> Result<Self> {
        if lo.is_finite() {
            Ok(Domain::SemiInfinite { lo })
        } else {
            Err(Error::domain(format!("semi-infinite domain needs a finite lower end, got {lo}")))
        }
    }

    pub fn lo(&self) -> f64 {
        match *self {
            Domain::Finite { lo, .. } | Domain::SemiInfinite { lo } => lo,
            Domain::Real => f64::NEG_INFINITY,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            Domain::Finite { hi, .. } => hi,
            _ => f64::INFINITY,
        }
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo() && x < self.hi()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult {
    pub values: Vec<f64>,
    pub err_est: Vec<f64>,
    /// Integral of the absolute value of each component.
    pub abs_mass: Vec<f64>,
    pub evals: usize,
}

/// Result of integrating `exp(log_f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogQuadResult {
    pub log_value: f64,
    /// Relative error estimate of `exp(log_value)`.
    pub rel_err: f64,
    pub evals: usize,
}

/// Result of integrating `f(x) * exp(log_w(x))`: the true integrals are
/// `values[i] * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuad {
    pub log_scale: f64,
    pub values: Vec<f64>,
    pub err_est: Vec<f64>,
    pub abs_mass: Vec<f64>,
    pub evals: usize,
}

impl WeightedQuad {
    fn zero(dim: usize, evals: usize) -> Self {
        WeightedQuad {
            log_scale: f64::NEG_INFINITY,
            values: vec![0.0; dim],
            err_est: vec![0.0; dim],
            abs_mass: vec![0.0; dim],
            evals,
        }
    }
}

/// Tolerances and budget for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Also accept errors below `rel_tol` times the integral of `|f|`.
    /// Needed for signed integrands whose integral cancels to zero.
    pub mass_floor: bool,
    pub max_evals: usize,
}

impl QuadOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            abs_tol,
            mass_floor: false,
            max_evals: MAX_EVALS,
        }
    }

    pub fn with_mass_floor(mut self) -> Self {
        self.mass_floor = true;
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.rel_tol) || !ok(self.abs_tol) || (self.rel_tol == 0.0 && self.abs_tol == 0.0) {
            return Err(Error::domain(format!(
                "tolerances must be non-negative and not both zero (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions::new(DEFAULT_REL_TOL, 0.0)
    }
}

/// Integrates a scalar function over `domain`.
pub fn integrate<F>(f: F, domain: Domain, rel_tol: f64, abs_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    integrate_with_breaks(f, domain, &[], rel_tol, abs_tol)
}

/// Like [`integrate`], with interior breakpoints where the integrand has
/// kinks or concentrated mass.
pub fn integrate_with_breaks<F>(
    f: F,
    domain: Domain,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !(rel_tol > 0.0 || abs_tol > 0.0) {
        return Err(Error::domain("tolerances must be positive"));
    }
    let r = integrate_vec(
        |x, out: &mut [f64]| out[0] = f(x),
        1,
        domain,
        breaks,
        QuadOptions::new(rel_tol, abs_tol),
    )?;
    Ok(QuadResult {
        value: r.values[0],
        err_est: r.err_est[0],
        evals: r.evals,
    })
}

/// Integrates a vector-valued function component-wise on a shared panel set.
pub fn integrate_vec<F>(
    f: F,
    dim: usize,
    domain: Domain,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<VecQuadResult>
where
    F: Fn(f64, &mut [f64]),
{
    opts.validate()?;
    if dim == 0 {
        return Err(Error::domain("integrand dimension must be positive"));
    }
    let panels = initial_panels(domain, breaks);
    adaptive(&f, dim, panels, &opts)
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// `x = e + (f - e) v^2` on `v in [0, 1]`.
    Edge { e: f64, f: f64 },
    /// `x = c + dir * u / (1 - u)` on `u in [0, 1)`.
    Tail { c: f64, dir: f64 },
}

impl Map {
    /// Returns the abscissa and `|dx/dv|`, or `None` for excluded nodes.
    #[inline]
    fn apply(self, v: f64) -> Option<(f64, f64)> {
        match self {
            Map::Identity => Some((v, 1.0)),
            Map::Edge { e, f } => {
                let x = e + (f - e) * v * v;
                // Nodes that round onto the endpoint itself are dropped.
                (x != e).then(|| (x, 2.0 * (f - e).abs() * v))
            }
            Map::Tail { c, dir } => {
                if v > 1.0 - TAIL_EXCLUSION {
                    return None;
                }
                let d = 1.0 - v;
                Some((c + dir * v / d, 1.0 / (d * d)))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Panel {
    map: Map,
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: Vec<f64>,
    abs: Vec<f64>,
    key: f64,
}

struct Keyed(Panel);

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.0.key.total_cmp(&other.0.key) == Ordering::Equal
    }
}
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key.total_cmp(&other.0.key)
    }
}

fn initial_panels(domain: Domain, breaks: &[f64]) -> Vec<(Map, f64, f64)> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && domain.contains(*x))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut out = Vec::new();
    let push_interior = |out: &mut Vec<(Map, f64, f64)>, pts: &[f64]| {
        for w in pts.windows(2) {
            out.push((Map::Identity, w[0], w[1]));
        }
    };
    match domain {
        Domain::Finite { lo, hi } => {
            if pts.is_empty() {
                pts.push(0.5 * (lo + hi));
            }
            out.push((Map::Edge { e: lo, f: pts[0] }, 0.0, 1.0));
            push_interior(&mut out, &pts);
            out.push((Map::Edge { e: hi, f: pts[pts.len() - 1] }, 0.0, 1.0));
        }
        Domain::SemiInfinite { lo } => {
            if pts.is_empty() {
                pts.push(lo + 1.0);
            }
            out.push((Map::Edge { e: lo, f: pts[0] }, 0.0, 1.0));
            push_interior(&mut out, &pts);
            out.push((Map::Tail { c: pts[pts.len() - 1], dir: 1.0 }, 0.0, 1.0));
        }
        Domain::Real => {
            if pts.is_empty() {
                pts.push(0.0);
            }
            out.push((Map::Tail { c: pts[0], dir: -1.0 }, 0.0, 1.0));
            push_interior(&mut out, &pts);
            out.push((Map::Tail { c: pts[pts.len() - 1], dir: 1.0 }, 0.0, 1.0));
        }
    }
    out
}

/// Applies the 21-point rule to one panel.
fn eval_panel<F>(f: &F, dim: usize, map: Map, a: f64, b: f64, buf: &mut [f64]) -> Result<Panel>
where
    F: Fn(f64, &mut [f64]),
{
    // buf holds 21 * dim values: index 0 is the centre, then pairs.
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval_at = |v: f64, slot: &mut [f64]| -> Result<()> {
        match map.apply(v) {
            Some((x, jac)) if jac > 0.0 => {
                f(x, slot);
                for s in slot.iter_mut() {
                    if !s.is_finite() {
                        return Err(Error::NonFiniteIntegrand { x });
                    }
                    *s *= jac;
                }
            }
            _ => slot.iter_mut().for_each(|s| *s = 0.0),
        }
        Ok(())
    };

    eval_at(centre, &mut buf[0..dim])?;
    for j in 0..10 {
        let dx = half * XGK[j];
        let (lo_slot, hi_slot) = buf[(1 + 2 * j) * dim..(3 + 2 * j) * dim].split_at_mut(dim);
        eval_at(centre - dx, lo_slot)?;
        eval_at(centre + dx, hi_slot)?;
    }

    let mut value = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    for k in 0..dim {
        let fc = buf[k];
        let mut resk = WGK[10] * fc;
        let mut resg = 0.0;
        let mut resabs = WGK[10] * fc.abs();
        for j in 0..10 {
            let f1 = buf[(1 + 2 * j) * dim + k];
            let f2 = buf[(2 + 2 * j) * dim + k];
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[10] * (fc - mean).abs();
        for j in 0..10 {
            let f1 = buf[(1 + 2 * j) * dim + k];
            let f2 = buf[(2 + 2 * j) * dim + k];
            resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
        }
        let h = half.abs();
        let result = resk * half;
        resabs *= h;
        resasc *= h;
        let mut e = ((resk - resg) * half).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        value[k] = result;
        err[k] = e;
        abs[k] = resabs;
    }
    Ok(Panel {
        map,
        a,
        b,
        value,
        err,
        abs,
        key: 0.0,
    })
}

fn splittable(p: &Panel) -> bool {
    let mid = 0.5 * (p.a + p.b);
    if !(mid > p.a && mid < p.b) {
        return false;
    }
    // The mapped abscissae must also still be distinct.
    match (p.map.apply(p.a.max(0.0)), p.map.apply(mid), p.map.apply(p.b)) {
        (Some((xa, _)), Some((xm, _)), Some((xb, _))) => xa != xm && xm != xb,
        (_, Some(_), _) => true,
        _ => false,
    }
}

fn targets(opts: &QuadOptions, total: &[f64], mass: &[f64]) -> Vec<f64> {
    total
        .iter()
        .zip(mass)
        .map(|(v, m)| {
            let mut t = (opts.rel_tol * v.abs()).max(opts.abs_tol);
            if opts.mass_floor {
                t = t.max(opts.rel_tol * m);
            }
            t
        })
        .collect()
}

fn adaptive<F>(f: &F, dim: usize, init: Vec<(Map, f64, f64)>, opts: &QuadOptions) -> Result<VecQuadResult>
where
    F: Fn(f64, &mut [f64]),
{
    let mut buf = vec![0.0; 21 * dim];
    let mut evals = 0usize;
    let mut panels = Vec::with_capacity(init.len());
    for (map, a, b) in init {
        panels.push(eval_panel(f, dim, map, a, b, &mut buf)?);
        evals += 21;
    }

    let sum = |ps: &[Panel], sel: fn(&Panel) -> &Vec<f64>| -> Vec<f64> {
        let mut s = vec![0.0; dim];
        for p in ps {
            for (acc, v) in s.iter_mut().zip(sel(p)) {
                *acc += v;
            }
        }
        s
    };
    let mut total = sum(&panels, |p| &p.value);
    let mut err = sum(&panels, |p| &p.err);
    let mut mass = sum(&panels, |p| &p.abs);

    // Priority scales are frozen after the first pass.
    let scale: Vec<f64> = targets(opts, &total, &mass)
        .into_iter()
        .map(|t| t.max(f64::MIN_POSITIVE))
        .collect();
    let priority = |p: &Panel| -> f64 {
        p.err
            .iter()
            .zip(&scale)
            .map(|(e, s)| e / s)
            .fold(0.0, f64::max)
    };

    let mut heap = BinaryHeap::with_capacity(panels.len() * 4);
    for mut p in panels {
        p.key = priority(&p);
        heap.push(Keyed(p));
    }
    let mut frozen: Vec<Panel> = Vec::new();

    loop {
        let tgt = targets(opts, &total, &mass);
        if err.iter().zip(&tgt).all(|(e, t)| e <= t) {
            break;
        }
        let Some(Keyed(worst)) = heap.pop() else {
            break;
        };
        if !splittable(&worst) {
            frozen.push(worst);
            continue;
        }
        if evals + 42 > opts.max_evals {
            let max_err = err.iter().copied().fold(0.0, f64::max);
            return Err(Error::NonConvergent {
                evals,
                err_est: max_err,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let mut left = eval_panel(f, dim, worst.map, worst.a, mid, &mut buf)?;
        let mut right = eval_panel(f, dim, worst.map, mid, worst.b, &mut buf)?;
        evals += 42;
        for k in 0..dim {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
            err[k] += left.err[k] + right.err[k] - worst.err[k];
            mass[k] += left.abs[k] + right.abs[k] - worst.abs[k];
            if err[k] < 0.0 {
                err[k] = 0.0;
            }
        }
        left.key = priority(&left);
        right.key = priority(&right);
        heap.push(Keyed(left));
        heap.push(Keyed(right));
    }

    let all: Vec<Panel> = heap.into_iter().map(|k| k.0).chain(frozen).collect();
    Ok(VecQuadResult {
        values: sum(&all, |p| &p.value),
        err_est: sum(&all, |p| &p.err),
        abs_mass: sum(&all, |p| &p.abs),
        evals,
    })
}

/// Location and spread of the maximum of a log-integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPeak {
    pub mode: f64,
    pub log_max: f64,
    /// Distance from the mode at which the log drops by one unit,
    /// capped by the distance to the domain boundary.
    pub left_width: f64,
    pub right_width: f64,
    pub evals: usize,
}

fn scan_points(domain: Domain) -> Vec<f64> {
    let mut pts = Vec::with_capacity(512);
    match domain {
        Domain::Finite { lo, hi } => {
            let w = hi - lo;
            for i in 1..128 {
                pts.push(lo + w * f64::from(i) / 128.0);
            }
            for k in 4..=56 {
                let d = w * 10f64.powf(-f64::from(k) / 4.0);
                pts.push(lo + d);
                pts.push(hi - d);
            }
        }
        Domain::SemiInfinite { lo } => {
            for k in -112..=112 {
                pts.push(lo + 10f64.powf(f64::from(k) / 8.0));
            }
        }
        Domain::Real => {
            pts.push(0.0);
            for k in -112..=112 {
                let d = 10f64.powf(f64::from(k) / 8.0);
                pts.push(d);
                pts.push(-d);
            }
        }
    }
    pts.retain(|x| domain.contains(*x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[inline]
fn clean_log(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Golden-section maximisation on `(l, r)`, starting from a known interior
/// point `m`.
fn golden_max<F: Fn(f64) -> f64>(lf: &F, mut l: f64, mut r: f64, m: f64, fm: f64, evals: &mut usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut best_x, mut best_f) = (m, fm);
    let mut x1 = r - INV_PHI * (r - l);
    let mut x2 = l + INV_PHI * (r - l);
    let mut f1 = clean_log(lf(x1));
    let mut f2 = clean_log(lf(x2));
    *evals += 2;
    for _ in 0..300 {
        if r - l <= 4.0 * f64::EPSILON * (l.abs() + r.abs()) + f64::MIN_POSITIVE {
            break;
        }
        if f1 > best_f {
            best_x = x1;
            best_f = f1;
        }
        if f2 > best_f {
            best_x = x2;
            best_f = f2;
        }
        if f1 < f2 {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + INV_PHI * (r - l);
            f2 = clean_log(lf(x2));
        } else {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - INV_PHI * (r - l);
            f1 = clean_log(lf(x1));
        }
        *evals += 1;
    }
    (best_x, best_f)
}

fn side_width<F: Fn(f64) -> f64>(lf: &F, mode: f64, log_max: f64, dir: f64, room: f64, start: f64, evals: &mut usize) -> f64 {
    if room <= 0.0 {
        return 0.0;
    }
    let target = log_max - 1.0;
    let above = |d: f64, evals: &mut usize| {
        *evals += 1;
        clean_log(lf(mode + dir * d)) > target
    };
    let mut d = start.min(0.5 * room).max(f64::MIN_POSITIVE);
    let (mut inside, mut outside);
    if above(d, evals) {
        inside = d;
        loop {
            d *= 2.0;
            if d >= room {
                return room;
            }
            if !above(d, evals) {
                outside = d;
                break;
            }
            inside = d;
        }
    } else {
        outside = d;
        inside = 0.0;
        for _ in 0..1100 {
            d *= 0.5;
            if d < f64::MIN_POSITIVE * 4.0 {
                break;
            }
            if above(d, evals) {
                inside = d;
                break;
            }
            outside = d;
        }
        if inside == 0.0 {
            return outside;
        }
    }
    for _ in 0..40 {
        let m = 0.5 * (inside + outside);
        if above(m, evals) {
            inside = m;
        } else {
            outside = m;
        }
    }
    0.5 * (inside + outside)
}

/// Finds the global maximum of `lf` on `domain`.
///
/// With a `hint` the hint is taken as the mode and only the widths are
/// searched. Returns `None` when `lf` is `-inf` everywhere it was probed.
pub fn locate_log_peak<F: Fn(f64) -> f64>(lf: &F, domain: Domain, hint: Option<f64>) -> Option<LogPeak> {
    let mut evals = 0usize;
    let mut found = None;
    let mut spacing = None;
    if let Some(h) = hint.filter(|h| domain.contains(*h)) {
        let v = clean_log(lf(h));
        evals += 1;
        if v.is_finite() {
            found = Some((h, v));
        }
    }
    if found.is_none() {
        let pts = scan_points(domain);
        let vals: Vec<f64> = pts.iter().map(|&x| clean_log(lf(x))).collect();
        evals += pts.len();
        let (i, &best) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        if best == f64::NEG_INFINITY {
            return None;
        }
        let l = if i > 0 { pts[i - 1] } else { domain.lo() };
        let r = if i + 1 < pts.len() {
            pts[i + 1]
        } else if domain.hi().is_finite() {
            domain.hi()
        } else {
            pts[i] + 10.0 * (pts[i] - l).abs().max(1.0)
        };
        let l = if l.is_finite() { l } else { pts[i] - 10.0 * (r - pts[i]).abs().max(1.0) };
        spacing = Some(r - l);
        found = Some(golden_max(lf, l, r, pts[i], best, &mut evals));
    }
    let (mode, log_max) = found?;
    if log_max == f64::INFINITY {
        return None;
    }
    let start = spacing.map_or(1e-3 * mode.abs().max(1e-3), |s| 0.25 * s);
    let left_room = mode - domain.lo();
    let right_room = domain.hi() - mode;
    let left_width = side_width(lf, mode, log_max, -1.0, left_room, start, &mut evals);
    let right_width = side_width(lf, mode, log_max, 1.0, right_room, start, &mut evals);
    Some(LogPeak {
        mode,
        log_max,
        left_width,
        right_width,
        evals,
    })
}

const WIDTH_MULTIPLES: [f64; 17] = [
    0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 256.0, 512.0,
];

/// Breakpoints around a located peak.
pub fn peak_breakpoints(peak: &LogPeak, domain: Domain) -> Vec<f64> {
    let mut out = vec![peak.mode];
    for k in WIDTH_MULTIPLES {
        out.push(peak.mode - k * peak.left_width);
        out.push(peak.mode + k * peak.right_width);
    }
    let (lo, hi) = (domain.lo(), domain.hi());
    let guard = |x: f64| {
        let scale = x.abs().max(1e-300);
        (!lo.is_finite() || x - lo > 1e-13 * scale) && (!hi.is_finite() || hi - x > 1e-13 * scale)
    };
    out.retain(|&x| domain.contains(x) && guard(x));
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Integrates `exp(lf(x))` and returns the log of the integral.
pub fn integrate_log<F>(lf: F, domain: Domain, hint: Option<f64>, rel_tol: f64) -> Result<LogQuadResult>
where
    F: Fn(f64) -> f64,
{
    let w = integrate_log_weighted(&lf, |_, out: &mut [f64]| out[0] = 1.0, 1, domain, hint, rel_tol)?;
    let v = w.values[0];
    Ok(LogQuadResult {
        log_value: if v > 0.0 { v.ln() + w.log_scale } else { f64::NEG_INFINITY },
        rel_err: if v > 0.0 { w.err_est[0] / v } else { 0.0 },
        evals: w.evals,
    })
}

/// Integrates `f(x) * exp(lw(x))` for a vector-valued `f`, locating the
/// peak of the weight first. Signed components are accepted; their error
/// target includes `rel_tol` times the integral of `|f| exp(lw)`.
pub fn integrate_log_weighted<W, F>(
    lw: W,
    f: F,
    dim: usize,
    domain: Domain,
    hint: Option<f64>,
    rel_tol: f64,
) -> Result<WeightedQuad>
where
    W: Fn(f64) -> f64,
    F: Fn(f64, &mut [f64]),
{
    let Some(peak) = locate_log_peak(&lw, domain, hint) else {
        return Ok(WeightedQuad::zero(dim, 0));
    };
    let breaks = peak_breakpoints(&peak, domain);
    let shift = peak.log_max;
    let integrand = |x: f64, out: &mut [f64]| {
        let l = lw(x);
        if l.is_nan() || l == f64::INFINITY {
            out.iter_mut().for_each(|o| *o = f64::NAN);
            return;
        }
        let d = l - shift;
        if d < LOG_UNDERFLOW {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        f(x, out);
        let e = d.exp();
        out.iter_mut().for_each(|o| *o *= e);
    };
    let r = integrate_vec(
        integrand,
        dim,
        domain,
        &breaks,
        QuadOptions::new(rel_tol, 0.0).with_mass_floor(),
    )?;
    Ok(WeightedQuad {
        log_scale: shift,
        values: r.values,
        err_est: r.err_est,
        abs_mass: r.abs_mass,
        evals: r.evals + peak.evals,
    })
}

/// Log of the t-weight `t^{(2a+N-2)/4} e^{-t/2} Γ(2a) / (Γ(a) Γ(N/2))`.
pub fn log_t_weight(a: f64, n: u32, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let nf = f64::from(n);
    let norm = log_gamma(2.0 * a).unwrap_or(f64::NAN) - log_gamma(a).unwrap_or(f64::NAN) - log_gamma(0.5 * nf).unwrap_or(f64::NAN);
    norm + 0.25 * (2.0 * a + nf - 2.0) * t.ln() - 0.5 * t
}

fn check_t_weight(a: f64, n: u32, rel_tol: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) || n == 0 {
        return Err(Error::domain(format!("t-weight needs a > 0 and N >= 1 (a = {a}, N = {n})")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::domain("rel_tol must be positive"));
    }
    Ok(())
}

/// `∫₀^∞ f(t) w_{a,N}(t) dt` with the t-weight of [`log_t_weight`].
///
/// The product is formed in linear space, so `f` must be of moderate
/// magnitude; use [`integrate_weighted_t_log`] for integrands that are only
/// representable as logs.
pub fn integrate_weighted_t<F>(f: F, a: f64, n: u32, rel_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    check_t_weight(a, n, rel_tol)?;
    let lw = |t: f64| log_t_weight(a, n, t);
    let nf = f64::from(n);
    let hint = 0.5 * (2.0 * a + nf - 2.0);
    let domain = Domain::SemiInfinite { lo: 0.0 };
    let breaks = locate_log_peak(&lw, domain, (hint > 0.0).then_some(hint))
        .map(|p| peak_breakpoints(&p, domain))
        .unwrap_or_default();
    let r = integrate_vec(
        |t, out: &mut [f64]| {
            let l = lw(t);
            out[0] = if l < LOG_UNDERFLOW { 0.0 } else { f(t) * l.exp() };
        },
        1,
        domain,
        &breaks,
        QuadOptions::new(rel_tol, 0.0).with_mass_floor(),
    )?;
    Ok(QuadResult {
        value: r.values[0],
        err_est: r.err_est[0],
        evals: r.evals,
    })
}

/// `log ∫₀^∞ exp(log_f(t)) w_{a,N}(t) dt`, peak-located on the full product.
pub fn integrate_weighted_t_log<F>(log_f: F, a: f64, n: u32, rel_tol: f64) -> Result<LogQuadResult>
where
    F: Fn(f64) -> f64,
{
    check_t_weight(a, n, rel_tol)?;
    integrate_log(
        |t| log_f(t) + log_t_weight(a, n, t),
        Domain::SemiInfinite { lo: 0.0 },
        None,
        rel_tol,
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
