//! One side of the book in reflected coordinates `x >= 0`.

use crate::error::{Error, Result};
use crate::model::{Side, SideView};
use crate::numerics::{find_root, integrate, maximize_1d, QuadratureConfig, RootConfig};

use super::extension::{extend_over_excluded, Extension, SupportLine};
use super::CnConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegKind {
    Reserved,
    /// Interior quantities at a constant multiplier.
    Interior {
        gamma: f64,
    },
    Matched,
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub kind: SegKind,
    /// Utility at `lo`.
    pub v_lo: f64,
}

#[derive(Debug, Clone)]
pub struct SideSolution {
    pub side: Side,
    pub end: f64,
    pub gamma: f64,
    pub x0: f64,
    pub contact: Option<f64>,
    pub tangent: bool,
    pub exit: Option<f64>,
    pub segments: Vec<Segment>,
    /// One per excluded segment, in order.
    pub extensions: Vec<Extension>,
    pub profit: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplePoint {
    pub q: f64,
    pub v: f64,
    pub gamma: f64,
    pub gamma_reporting_only: bool,
    pub kind: SegKind,
}

pub(crate) struct SideProblem<'a> {
    pub view: SideView<'a>,
    scan_n: usize,
    quad_tol: f64,
    touch_tol: f64,
    root: RootConfig,
    gamma_tol: f64,
    snap_tol: f64,
    exit: Option<f64>,
    /// Where service resumes after the binding region.
    reentry: Option<f64>,
    margin_cuts: Vec<f64>,
}

impl<'a> SideProblem<'a> {
    pub fn new(view: SideView<'a>, cfg: &CnConfig) -> Self {
        Self {
            view,
            scan_n: cfg.binding_scan_n.max(64),
            quad_tol: cfg.quad_tol,
            touch_tol: cfg.touch_tol,
            root: RootConfig::with_tol(1e-14),
            gamma_tol: cfg.gamma_tol,
            snap_tol: cfg.snap_tol,
            exit: None,
            reentry: None,
            margin_cuts: Vec::new(),
        }
    }

    fn quad(&self) -> QuadratureConfig {
        QuadratureConfig::with_tol(self.quad_tol)
    }

    /// Scan nodes on `[lo, hi]`: a uniform grid plus kinks and `extra`.
    fn nodes(&self, lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
        let end = self.view.end();
        let n = self.scan_n;
        let mut xs: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).filter(|&x| x > lo && x < hi).collect();
        xs.extend(self.view.kinks().iter().chain(extra).copied().filter(|&x| x > lo && x < hi));
        xs.push(lo);
        xs.push(hi);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        xs
    }

    fn l(&self, x: f64, gamma: f64) -> f64 {
        self.view.virtual_quantity(x, gamma).unwrap_or(f64::NAN)
    }

    fn slope(&self, x: f64, gamma: f64) -> f64 {
        self.view.psi1(self.l(x, gamma))
    }

    pub fn reserved_boundary(&self, gamma: f64) -> Result<f64> {
        let v = &self.view;
        let end = v.end();
        let g = |x: f64| v.gamma_reserved(x) - gamma;
        if g(0.0) >= 0.0 {
            return Ok(0.0);
        }
        if g(end) < 0.0 {
            return Ok(end);
        }
        // First up-crossing on the scan grid.
        let xs = self.nodes(0.0, end, &[]);
        for w in xs.windows(2) {
            if g(w[1]) >= 0.0 {
                return find_root(g, w[0], w[1], &self.root);
            }
        }
        Ok(end)
    }

    /// `v(x) = w_a + int_{max(a, x0)}^{x} psi1(l(s, gamma)) ds` for interior types.
    fn utility_from(&self, gamma: f64, x0: f64, a: f64, w_a: f64, x: f64) -> Result<f64> {
        if x <= x0 {
            return Ok(0.0);
        }
        let a = a.max(x0);
        if x <= a {
            return Ok(w_a);
        }
        Ok(w_a + integrate(|s| self.slope(s, gamma), a, x, &self.quad())?)
    }

    /// First type in `(0, upto]` whose outside option beats the interior schedule at `gamma`.
    fn find_contact(&self, gamma: f64, x0: f64, upto: f64) -> Result<Option<(f64, f64)>> {
        let v = &self.view;
        let tol = self.touch_tol;
        let xs = self.nodes(0.0, upto, &[x0]);
        let mut w_a = 0.0;
        for win in xs.windows(2) {
            let (a, b) = (win[0], win[1]);
            let ub = v.u0(b);
            if ub.is_infinite() {
                let r = last_finite(|x| v.u0(x), a, b);
                let w_r = self.utility_from(gamma, x0, a, w_a, r)?;
                if w_r - v.u0(r) >= -tol {
                    return Ok(Some((r, w_r)));
                }
                let c = self.cross_root(gamma, x0, a, w_a, r)?;
                return Ok(Some((c, self.utility_from(gamma, x0, a, w_a, c)?)));
            }
            let w_b = self.utility_from(gamma, x0, a, w_a, b)?;
            if w_b - ub < -tol {
                let c = self.cross_root(gamma, x0, a, w_a, b)?;
                return Ok(Some((c, self.utility_from(gamma, x0, a, w_a, c)?)));
            }
            if a >= x0 && ub > 0.0 {
                // Interior minimum of w - u0 inside (a, b).
                let dd = |x: f64| self.slope(x, gamma) - v.du0(x);
                let da = dd(a);
                let db = self.slope(b, gamma) - v.du0_left(b);
                if da < 0.0 && db > 0.0 {
                    let xm = find_root(dd, a, b, &self.root)?;
                    let w_m = self.utility_from(gamma, x0, a, w_a, xm)?;
                    if w_m - v.u0(xm) < -tol {
                        let c = self.cross_root(gamma, x0, a, w_a, xm)?;
                        return Ok(Some((c, self.utility_from(gamma, x0, a, w_a, c)?)));
                    }
                }
            }
            w_a = w_b;
        }
        Ok(None)
    }

    fn cross_root(&self, gamma: f64, x0: f64, a: f64, w_a: f64, b: f64) -> Result<f64> {
        let v = &self.view;
        let d = |x: f64| self.utility_from(gamma, x0, a, w_a, x).unwrap_or(f64::NAN) - v.u0(x);
        // Contact right at a node where the option turns positive.
        if d(a) <= 0.0 {
            return Ok(a);
        }
        find_root(d, a, b, &self.root)
    }

    /// Last type where the interior schedule at multiplier one undercuts the
    /// matching quantity.
    fn compute_exit(&self) -> Result<f64> {
        let v = &self.view;
        let end = v.end();
        let e = |x: f64| {
            let u = v.u0(x);
            if u.is_infinite() {
                return Some(f64::NEG_INFINITY);
            }
            if u <= 0.0 {
                return None;
            }
            v.matching_quantity(x).ok().map(|qc| self.l(x, 1.0) - qc).or(Some(f64::NEG_INFINITY))
        };
        let xs = self.nodes(0.0, end, &[]);
        let last = xs.iter().rposition(|&x| matches!(e(x), Some(y) if y < 0.0));
        let Some(i) = last else {
            return Err(Error::Structure("binding detected but the matching condition never binds".into()));
        };
        if i + 1 == xs.len() {
            return Ok(end);
        }
        let (a, b) = (xs[i], xs[i + 1]);
        match (e(a), e(b)) {
            (Some(ea), Some(eb)) if ea.is_finite() && eb.is_finite() => {
                find_root(|x| e(x).unwrap_or(f64::NAN), a, b, &self.root)
            }
            (Some(ea), _) if ea.is_infinite() => Ok(last_finite(|x| v.u0(x), a, b)),
            _ => Ok(b),
        }
    }

    /// Start of the multiplier-one tail. Past the exit the tail's value falls
    /// with its start point only while the first served type is profitable;
    /// otherwise exclusion continues to the first point where it is not.
    fn compute_reentry(&self, xe: f64) -> Result<f64> {
        let v = &self.view;
        let end = v.end();
        let gain = |x: f64| {
            let u = v.u0(x);
            if !u.is_finite() {
                return f64::INFINITY;
            }
            let q = self.l(x, 1.0);
            let p = v.psi1(q);
            (1.0 - v.cdf(x)) * (p - v.du0(x)) - v.surplus(x, q, u) * v.pdf(x)
        };
        if xe >= end || gain(xe) <= 0.0 {
            return Ok(xe);
        }
        let xs = self.nodes(xe, end, &[]);
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let gb = gain(b);
            if gb <= 0.0 {
                if gain(a).is_infinite() {
                    return Ok(b);
                }
                return find_root(gain, a, b, &self.root);
            }
        }
        Ok(end)
    }

    fn compute_margin_cuts(&self) -> Vec<f64> {
        let v = &self.view;
        let end = v.end();
        let xs = self.nodes(0.0, end, &[]);
        let mut cuts = Vec::new();
        let m = |x: f64| v.margin(x);
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if v.u0(a) <= 0.0 && v.u0(b) <= 0.0 {
                continue;
            }
            let (ma, mb) = (m(a), m(b));
            if (ma < 0.0) == (mb < 0.0) {
                continue;
            }
            if ma.is_finite() && mb.is_finite() {
                if let Ok(r) = find_root(m, a, b, &self.root) {
                    cuts.push(r);
                }
            } else if mb.is_infinite() {
                cuts.push(last_finite(|x| v.u0(x), a, b));
            } else {
                cuts.push(a);
            }
        }
        cuts
    }

    /// Dealer profit on this side at multiplier `gamma`.
    fn profit(&self, gamma: f64, x0: f64, contact: Option<(f64, f64)>) -> Result<f64> {
        let v = &self.view;
        let end = v.end();
        let top = contact.map_or(end, |c| c.0);
        let quad = self.quad().breakpoints(v.kinks());
        let mut total = 0.0;
        if top > x0 {
            let ftop = v.cdf(top);
            total += integrate(
                |s| {
                    let q = self.l(s, gamma);
                    let p = v.psi1(q);
                    (s * p - v.ctilde(q)) * v.pdf(s) - p * (ftop - v.cdf(s))
                },
                x0,
                top,
                &quad,
            )?;
        }
        let Some((c, _)) = contact else {
            return Ok(total);
        };
        let xe = self.exit.unwrap_or(end).max(c);
        if xe > c {
            let mut bps: Vec<f64> = self.margin_cuts.clone();
            bps.extend_from_slice(v.kinks());
            let q2 = self.quad().breakpoints(&bps);
            total += integrate(|s| v.margin(s).max(0.0) * v.pdf(s), c, xe, &q2)?;
        }
        let xr = self.reentry.unwrap_or(xe).max(xe);
        if xr < end {
            total += integrate(
                |s| {
                    let q = self.l(s, 1.0);
                    let p = v.psi1(q);
                    (s * p - v.ctilde(q)) * v.pdf(s) - p * (1.0 - v.cdf(s))
                },
                xr,
                end,
                &quad,
            )?;
            total -= v.u0(xr) * (1.0 - v.cdf(xr));
        }
        Ok(total)
    }

    fn has_contact(&self, gamma: f64, upto: f64) -> Result<bool> {
        let x0 = self.reserved_boundary(gamma)?;
        Ok(self.find_contact(gamma, x0, upto)?.is_some())
    }

    pub fn solve(mut self) -> Result<SideSolution> {
        let end = self.view.end();
        let binding = {
            let x0 = self.reserved_boundary(1.0)?;
            self.find_contact(1.0, x0, end)?.is_some()
        };
        if !binding {
            let x0 = self.reserved_boundary(1.0)?;
            let profit = self.profit(1.0, x0, None)?;
            return Ok(self.finish(1.0, x0, None, false, profit));
        }
        self.exit = Some(self.compute_exit()?);
        self.reentry = Some(self.compute_reentry(self.exit.unwrap())?);
        self.margin_cuts = self.compute_margin_cuts();
        let xe = self.exit.unwrap();
        let upto = xe.max(1e-12);

        let g_lo = self.view.gamma_reserved(0.0).min(1.0);
        let g_t = if self.has_contact(g_lo, upto)? {
            g_lo
        } else {
            let (mut lo, mut hi) = (g_lo, 1.0);
            if !self.has_contact(hi, upto)? {
                return Err(Error::Structure("no binding contact at multiplier one inside the exit point".into()));
            }
            while hi - lo > self.gamma_tol.clamp(1e-15, 1e-13) {
                let mid = 0.5 * (lo + hi);
                if self.has_contact(mid, upto)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };

        let mut failure: Option<Error> = None;
        let (mut g_star, _) = maximize_1d(
            |g| {
                let r = self.reserved_boundary(g).and_then(|x0| {
                    let c = self.find_contact(g, x0, upto)?;
                    match c {
                        Some(_) => self.profit(g, x0, c),
                        None => Ok(f64::NEG_INFINITY),
                    }
                });
                match r {
                    Ok(p) => p,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            },
            g_t,
            1.0,
            &RootConfig::with_tol(self.gamma_tol),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let mut snapped = false;
        if g_star - g_t < self.snap_tol {
            g_star = g_t;
            snapped = true;
        }
        let x0 = self.reserved_boundary(g_star)?;
        let mut contact = self
            .find_contact(g_star, x0, upto)?
            .ok_or_else(|| Error::Structure(format!("optimal multiplier {g_star} has no binding contact")))?;
        let mut tangent = false;
        if snapped && contact.0 > x0 && self.view.u0(contact.0) > 0.0 {
            if let Some(t) = self.tangent_point(g_star, contact.0) {
                let w = self.utility_from(g_star, x0, x0, 0.0, t)?;
                if (w - self.view.u0(t)).abs() <= 1e3 * self.touch_tol {
                    contact = (t, w);
                    tangent = true;
                }
            }
        }
        let profit = self.profit(g_star, x0, Some(contact))?;
        self.build(g_star, x0, contact, tangent, profit)
    }

    /// Root of `l(x, gamma) = q_c(x)` near a contact found at the touching multiplier.
    fn tangent_point(&self, gamma: f64, near: f64) -> Option<f64> {
        let v = &self.view;
        let e = |x: f64| match v.matching_quantity(x) {
            Ok(qc) => self.l(x, gamma) - qc,
            Err(_) => f64::NAN,
        };
        let end = v.end();
        let mut lo = near;
        let mut hi = near;
        for k in 0..40 {
            let d = 1e-7 * 1.6f64.powi(k);
            lo = (near - d).max(0.0);
            hi = (near + d).min(end);
            if v.kinks().iter().any(|&kk| kk > lo && kk < hi) {
                return None;
            }
            let (a, b) = (e(lo), e(hi));
            if a.is_finite() && b.is_finite() && (a < 0.0) != (b < 0.0) {
                break;
            }
            if lo == 0.0 && hi == end {
                return None;
            }
        }
        find_root(e, lo, hi, &self.root).ok()
    }

    fn finish(&self, gamma: f64, x0: f64, _c: Option<(f64, f64)>, tangent: bool, profit: f64) -> SideSolution {
        let end = self.view.end();
        let mut segments = vec![Segment { lo: 0.0, hi: x0, kind: SegKind::Reserved, v_lo: 0.0 }];
        if x0 < end {
            segments.push(Segment { lo: x0, hi: end, kind: SegKind::Interior { gamma }, v_lo: 0.0 });
        }
        SideSolution {
            side: self.view.side,
            end,
            gamma,
            x0,
            contact: None,
            tangent,
            exit: None,
            segments,
            extensions: Vec::new(),
            profit,
        }
    }

    fn build(&self, gamma: f64, x0: f64, contact: (f64, f64), tangent: bool, profit: f64) -> Result<SideSolution> {
        let v = &self.view;
        let end = v.end();
        let (c, w_c) = contact;
        let xe = self.exit.unwrap_or(end).max(c);
        let r = x0.min(c);
        let mut segs = vec![Segment { lo: 0.0, hi: r, kind: SegKind::Reserved, v_lo: 0.0 }];
        if c > x0 {
            segs.push(Segment { lo: x0, hi: c, kind: SegKind::Interior { gamma }, v_lo: 0.0 });
        }
        // Binding region split at margin sign changes.
        let mut cuts: Vec<f64> = self.margin_cuts.iter().copied().filter(|&x| x > c && x < xe).collect();
        cuts.insert(0, c);
        cuts.push(xe);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let kind = if v.u0(mid).is_finite() && v.margin(mid) >= 0.0 { SegKind::Matched } else { SegKind::Excluded };
            match segs.last_mut() {
                Some(s) if s.kind == kind => s.hi = b,
                _ => segs.push(Segment { lo: a, hi: b, kind, v_lo: if a == c { w_c } else { v.u0(a) } }),
            }
        }
        let xr = self.reentry.unwrap_or(xe).max(xe);
        if xr > xe {
            match segs.last_mut() {
                Some(s) if s.kind == SegKind::Excluded => s.hi = xr,
                _ => segs.push(Segment { lo: xe, hi: xr, kind: SegKind::Excluded, v_lo: v.u0(xe) }),
            }
        }
        if xr < end {
            segs.push(Segment { lo: xr, hi: end, kind: SegKind::Interior { gamma: 1.0 }, v_lo: v.u0(xr) });
        }
        let pattern: Vec<SegKind> =
            segs.iter().map(|s| s.kind).filter(|k| matches!(k, SegKind::Matched | SegKind::Excluded)).collect();
        let allowed = matches!(
            pattern.as_slice(),
            [SegKind::Excluded] | [SegKind::Matched] | [SegKind::Excluded, SegKind::Matched]
        );
        if !allowed {
            return Err(Error::Structure(format!(
                "unsupported binding pattern {pattern:?} on the {:?} side (contact {c}, exit {xe})",
                v.side
            )));
        }

        let mut extensions = Vec::new();
        for i in 0..segs.len() {
            if segs[i].kind != SegKind::Excluded {
                continue;
            }
            let (a, b) = (segs[i].lo, segs[i].hi);
            let left_slope = match segs.get(i.wrapping_sub(1)).map(|s| s.kind) {
                Some(SegKind::Interior { gamma: g }) => self.slope(a, g),
                Some(SegKind::Matched) => v.du0_left(a),
                _ => 0.0,
            };
            let left = SupportLine { x: a, v: segs[i].v_lo, slope: left_slope };
            let right = match segs.get(i + 1).map(|s| s.kind) {
                Some(SegKind::Interior { gamma: g }) => Some(SupportLine { x: b, v: v.u0(b), slope: self.slope(b, g) }),
                Some(SegKind::Matched) => Some(SupportLine { x: b, v: v.u0(b), slope: v.du0(b) }),
                _ => None,
            };
            let ext = extend_over_excluded(a, b, left, right)?;
            for k in 1..64 {
                let x = a + (b - a) * k as f64 / 64.0;
                let u = v.u0(x);
                if ext.value(x) > u + 1e-9 * (1.0 + u.abs()) {
                    return Err(Error::Structure(format!(
                        "extension over excluded types ({a}, {b}) exceeds the outside option at x = {x}"
                    )));
                }
            }
            extensions.push(ext);
        }
        Ok(SideSolution {
            side: v.side,
            end,
            gamma,
            x0: r,
            contact: Some(c),
            tangent,
            exit: Some(xe),
            segments: segs,
            extensions,
            profit,
        })
    }

    /// Samples the solution at sorted side coordinates `xs` in `[0, end]`.
    pub fn sample(&self, sol: &SideSolution, xs: &[f64]) -> Result<Vec<SamplePoint>> {
        let v = &self.view;
        let mut out = Vec::with_capacity(xs.len());
        let nseg = sol.segments.len();
        let mut seg_i = 0usize;
        // Running utility inside the current interior segment.
        let mut run: Option<(usize, f64, f64)> = None;
        let mut ext_of = vec![usize::MAX; nseg];
        let mut k = 0;
        for (i, s) in sol.segments.iter().enumerate() {
            if s.kind == SegKind::Excluded {
                ext_of[i] = k;
                k += 1;
            }
        }
        for &x in xs {
            while seg_i + 1 < nseg && x >= sol.segments[seg_i].hi {
                seg_i += 1;
            }
            let seg = sol.segments[seg_i];
            let p = match seg.kind {
                SegKind::Reserved => SamplePoint {
                    q: 0.0,
                    v: 0.0,
                    gamma: v.gamma_reserved(x).min(sol.gamma),
                    gamma_reporting_only: false,
                    kind: seg.kind,
                },
                SegKind::Interior { gamma } => {
                    let (from, w) = match run {
                        Some((j, at, w)) if j == seg_i => (at, w),
                        _ => (seg.lo, seg.v_lo),
                    };
                    let w = if x > from {
                        w + integrate(|s| self.slope(s, gamma), from, x, &self.quad().breakpoints(v.kinks()))?
                    } else {
                        w
                    };
                    run = Some((seg_i, x.max(from), w));
                    SamplePoint { q: self.l(x, gamma), v: w, gamma, gamma_reporting_only: false, kind: seg.kind }
                }
                SegKind::Matched => {
                    let q = v.matching_quantity(x)?;
                    SamplePoint {
                        q,
                        v: v.u0(x),
                        gamma: v.gamma_for_quantity(x, q).clamp(sol.gamma, 1.0),
                        gamma_reporting_only: false,
                        kind: seg.kind,
                    }
                }
                SegKind::Excluded => {
                    let ext = &sol.extensions[ext_of[seg_i]];
                    let q = v.psi1_inv(ext.slope(x))?;
                    let qc = v.matching_quantity(x).unwrap_or(q);
                    SamplePoint {
                        q,
                        v: ext.value(x),
                        gamma: v.gamma_for_quantity(x, qc),
                        gamma_reporting_only: true,
                        kind: seg.kind,
                    }
                }
            };
            out.push(p);
        }
        Ok(out)
    }

    /// Right derivative of the quantity at the reserved boundary times the
    /// marginal utility of the first unit.
    pub fn spread_endpoint(&self, sol: &SideSolution) -> f64 {
        let v = &self.view;
        let x0 = sol.x0;
        let q = self.l(x0, sol.gamma);
        let dq = v.dvirtual_quantity(x0, sol.gamma, q);
        let spec = v.spec;
        dq * (x0 * spec.phi1() + v.sign() * spec.phi2())
    }
}

/// Largest `x` in `[a, b]` with finite `g(x)`, given `g(a)` finite and `g(b)` infinite.
fn last_finite<G: Fn(f64) -> f64>(g: G, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid).is_finite() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
