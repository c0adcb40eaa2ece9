//! Scalar numerical kernels: bracketed roots, adaptive quadrature, 1-D
//! maximization, isotonic regression, monotone cubic interpolation and a
//! small cycle detector for fixed-point iterations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Growth factor used by [`expand_bracket`].
    pub bracket_expansion: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_iter: 200, bracket_expansion: 1.6 }
    }
}

impl RootConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self { abs_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub max_depth: usize,
    pub breakpoints: Vec<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, max_depth: 60, breakpoints: Vec::new() }
    }
}

impl QuadratureConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self { abs_tol, ..Self::default() }
    }

    pub fn breakpoints(mut self, bps: &[f64]) -> Self {
        self.breakpoints = bps.to_vec();
        self
    }
}

/// Root of `g` on `[lo, hi]` by Brent's method (bisection safeguarded
/// secant / inverse quadratic steps). Deterministic.
pub fn find_root<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, cfg: &RootConfig) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi, g_lo: fa, g_hi: fb });
    }
    // Infinite end values defeat interpolation; bisect until both are finite.
    while !(fa.is_finite() && fb.is_finite()) {
        if (b - a).abs() <= cfg.abs_tol {
            return Ok(if fa.is_finite() { a } else { b });
        }
        let m = 0.5 * (a + b);
        let fm = g(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.is_nan() {
            return Err(Error::Bracket { lo, hi, g_lo: fa, g_hi: fb });
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..cfg.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * cfg.abs_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
        if fb.is_nan() {
            return Err(Error::Bracket { lo, hi, g_lo: fa, g_hi: fb });
        }
    }
    Ok(b)
}

/// Grows `[lo, hi]` geometrically until `g` changes sign or `limit` iterations pass.
pub fn expand_bracket<G: FnMut(f64) -> f64>(
    mut g: G,
    mut lo: f64,
    mut hi: f64,
    cfg: &RootConfig,
    limit: usize,
) -> Result<(f64, f64)> {
    let (mut glo, mut ghi) = (g(lo), g(hi));
    for _ in 0..limit {
        if glo.signum() != ghi.signum() || glo == 0.0 || ghi == 0.0 {
            return Ok((lo, hi));
        }
        let w = (hi - lo) * cfg.bracket_expansion;
        if glo.abs() < ghi.abs() {
            lo -= w;
            glo = g(lo);
        } else {
            hi += w;
            ghi = g(hi);
        }
    }
    Err(Error::Bracket { lo, hi, g_lo: glo, g_hi: ghi })
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<G: FnMut(f64) -> f64>(
    g: &mut G,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    tol_floor: f64,
    depth: usize,
) -> std::result::Result<f64, f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm);
    let frm = g(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(left + right);
    }
    let sub_tol = (0.5 * tol).max(tol_floor);
    let l = simpson_rec(g, a, fa, lm, flm, m, fm, left, sub_tol, tol_floor, depth - 1);
    let r = simpson_rec(g, m, fm, rm, frm, b, fb, right, sub_tol, tol_floor, depth - 1);
    match (l, r) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Ok(x), Err(y)) | (Err(x), Ok(y)) | (Err(x), Err(y)) => Err(x + y),
    }
}

/// Adaptive Simpson quadrature (with Richardson correction) on `[a, b]`,
/// split at the configured breakpoints that fall strictly inside.
pub fn integrate<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = cfg.breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);
    let total_len = hi - lo;
    let mut total = 0.0;
    let mut failed = false;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        // Evaluate just inside the panel so one-sided limits are used at breakpoints.
        let nudge = 4.0 * f64::EPSILON * x0.abs().max(x1.abs()).max(1.0);
        let e0 = if cuts.len() > 2 { (x0 + nudge).min(0.5 * (x0 + x1)) } else { x0 };
        let e1 = if cuts.len() > 2 { (x1 - nudge).max(0.5 * (x0 + x1)) } else { x1 };
        let f0 = g(e0);
        let f1 = g(e1);
        let xm = 0.5 * (x0 + x1);
        let fm = g(xm);
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        let tol = cfg.abs_tol * (x1 - x0) / total_len;
        let floor = tol * 1e-4;
        match simpson_rec(&mut g, x0, f0, xm, fm, x1, f1, whole, tol, floor, cfg.max_depth) {
            Ok(v) => total += v,
            Err(v) => {
                total += v;
                failed = true;
            }
        }
    }
    if failed || !total.is_finite() {
        return Err(Error::Quadrature { a, b, partial: sign * total });
    }
    Ok(sign * total)
}

/// Maximizes `g` on `[lo, hi]`: a coarse scan followed by golden-section
/// refinement around the best scan point. Exact for unimodal `g`, best-effort
/// otherwise. Ties go to the smaller argument.
pub fn maximize_1d<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, cfg: &RootConfig) -> (f64, f64) {
    maximize_1d_scan(&mut g, lo, hi, cfg, 32)
}

pub fn maximize_1d_scan<G: FnMut(f64) -> f64>(
    g: &mut G,
    lo: f64,
    hi: f64,
    cfg: &RootConfig,
    scan: usize,
) -> (f64, f64) {
    if hi <= lo {
        let v = g(lo);
        return (lo, v);
    }
    let n = scan.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut best = 0;
    for i in 1..xs.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(n)]);
    let mut best_x = xs[best];
    let mut best_v = vals[best];
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    let mut iter = 0;
    while (b - a) > cfg.abs_tol && iter < cfg.max_iter {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - invphi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + invphi * (b - a);
            gd = g(d);
        }
        iter += 1;
    }
    for (x, v) in [(c, gc), (d, gd)] {
        if v > best_v || (v == best_v && x < best_x) {
            best_x = x;
            best_v = v;
        }
    }
    (best_x, best_v)
}

/// Weighted isotonic (nondecreasing) regression by pool-adjacent-violators.
pub fn isotonic_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        let w = w.max(1e-300);
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (y2, w2, c2) = blocks.pop().unwrap();
            let (y1, w1, c1) = blocks.pop().unwrap();
            blocks.push(((y1 * w1 + y2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(y, _, c)| std::iter::repeat_n(y, c)).collect()
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes), with exact derivative and antiderivative.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    cum: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Parameter("tabulated function needs at least two (x, y) nodes".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("tabulated nodes must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = delta[0];
            m[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    m[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        let mut s = Self { x, y, m, cum: vec![0.0; n] };
        for i in 1..n {
            let seg = s.segment_integral(i - 1, s.x[i]);
            s.cum[i] = s.cum[i - 1] + seg;
        }
        Ok(s)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    fn seg(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    fn basis(&self, i: usize, t: f64) -> (f64, f64, f64, f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        (h, (t - self.x[i]) / h, self.y[i], self.y[i + 1], 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.seg(t);
        let (h, s, y0, y1, _) = self.basis(i, t);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1
    }

    /// Derivative; at a node the right-sided value unless `left` is set.
    pub fn derivative(&self, t: f64, left: bool) -> f64 {
        let mut i = self.seg(t);
        if left && i > 0 && t == self.x[i] {
            i -= 1;
        }
        let (h, s, y0, y1, _) = self.basis(i, t);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0 + (-6.0 * s2 + 6.0 * s) * y1) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (3.0 * s2 - 2.0 * s) * m1
    }

    fn segment_integral(&self, i: usize, t: f64) -> f64 {
        let (h, s, y0, y1, _) = self.basis(i, t);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        h * ((0.5 * s4 - s3 + s) * y0
            + (0.25 * s4 - 2.0 / 3.0 * s3 + 0.5 * s2) * h * m0
            + (-0.5 * s4 + s3) * y1
            + (0.25 * s4 - s3 / 3.0) * h * m1)
    }

    /// Integral from the first node to `t`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let i = self.seg(t);
        self.cum[i] + self.segment_integral(i, t)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Index `j` of the earliest entry in `history` (restricted to the last
/// `window` entries) that lies within `tol` of `candidate` in the sup norm.
pub fn find_revisit(history: &[Vec<f64>], candidate: &[f64], window: usize, tol: f64) -> Option<usize> {
    let start = history.len().saturating_sub(window);
    (start..history.len()).find(|&j| history[j].iter().zip(candidate).all(|(a, b)| (a - b).abs() <= tol))
}

/// Symmetric positive-definite matrix with two off-diagonals, stored by diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Pentadiagonal {
    pub d0: Vec<f64>,
    /// `a[i][i + 1]`
    pub d1: Vec<f64>,
    /// `a[i][i + 2]`
    pub d2: Vec<f64>,
}

impl Pentadiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { d0: vec![0.0; n], d1: vec![0.0; n.saturating_sub(1)], d2: vec![0.0; n.saturating_sub(2)] }
    }

    pub fn len(&self) -> usize {
        self.d0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d0.is_empty()
    }

    /// Adds `w` to entry `(i, j)` and its mirror; `|i - j| <= 2`.
    pub fn add(&mut self, i: usize, j: usize, w: f64) {
        let (i, j) = (i.min(j), i.max(j));
        match j - i {
            0 => self.d0[i] += w,
            1 => self.d1[i] += w,
            2 => self.d2[i] += w,
            _ => panic!("entry ({i}, {j}) is outside the band"),
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = (0..n).map(|i| self.d0[i] * x[i]).collect();
        for i in 0..self.d1.len() {
            y[i] += self.d1[i] * x[i + 1];
            y[i + 1] += self.d1[i] * x[i];
        }
        for i in 0..self.d2.len() {
            y[i] += self.d2[i] * x[i + 2];
            y[i + 2] += self.d2[i] * x[i];
        }
        y
    }

    /// Solves `A x = b` by an `L D L^T` factorization; `None` if `A` is not
    /// numerically positive definite.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        let (mut d, mut l1, mut l2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            if i >= 2 {
                l2[i] = self.d2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let c = if i >= 2 { l2[i] * l1[i - 1] * d[i - 2] } else { 0.0 };
                l1[i] = (self.d1[i - 1] - c) / d[i - 1];
            }
            let mut di = self.d0[i];
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if !(di > 0.0) || !di.is_finite() {
                return None;
            }
            d[i] = di;
        }
        let mut x = b.to_vec();
        for i in 0..n {
            if i >= 1 {
                x[i] -= l1[i] * x[i - 1];
            }
            if i >= 2 {
                x[i] -= l2[i] * x[i - 2];
            }
        }
        for i in 0..n {
            x[i] /= d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                x[i] -= l1[i + 1] * x[i + 1];
            }
            if i + 2 < n {
                x[i] -= l2[i + 2] * x[i + 2];
            }
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn root_of_quadratic_reserved_boundary() {
        let r = find_root(|t| 3.0 * t * t + 6.0 * t + 2.0, -1.0, 0.0, &RootConfig::default()).unwrap();
        assert_abs_diff_eq!(r, -1.0 + 1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r, -0.42265, epsilon = 1e-5);
    }

    #[test]
    fn root_trivial_cases() {
        let cfg = RootConfig::default();
        assert_eq!(find_root(|t| t, -1.0, 1.0, &cfg).unwrap(), 0.0);
        assert_abs_diff_eq!(find_root(|t| 2.0 * t + 1.0, -1.0, 0.0, &cfg).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn root_without_sign_change_is_an_error() {
        let e = find_root(|t| t * t + 1.0, -1.0, 1.0, &RootConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Bracket { .. }));
    }

    #[test]
    fn root_with_infinite_side() {
        let g = |t: f64| if t > 0.3 { f64::NEG_INFINITY } else { 1.0 - t };
        let r = find_root(g, 0.0, 1.0, &RootConfig::with_tol(1e-13)).unwrap();
        assert_abs_diff_eq!(r, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let cfg = QuadratureConfig::default();
        for k in 0..=3 {
            let v = integrate(|t| t.powi(k), 0.0, 1.0, &cfg).unwrap();
            assert_abs_diff_eq!(v, 1.0 / (k as f64 + 1.0), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(integrate(|t| 2.0 * t, 0.0, 1.0, &cfg).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn integrate_splits_at_breakpoints() {
        let g = |t: f64| if t < 0.3 { 1.0 } else { 5.0 };
        let cfg = QuadratureConfig::with_tol(1e-12).breakpoints(&[0.3]);
        assert_abs_diff_eq!(integrate(g, 0.0, 1.0, &cfg).unwrap(), 0.3 + 3.5, epsilon = 1e-12);
    }

    #[test]
    fn integrate_reversed_and_singular_slope() {
        let cfg = QuadratureConfig::with_tol(1e-12);
        let v = integrate(|t: f64| t.powf(0.2), 1.0, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(v, -1.0 / 1.2, epsilon = 1e-11);
    }

    #[test]
    fn maximize_quadratic_vertex() {
        let (x, v) = maximize_1d(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, &RootConfig::with_tol(1e-10));
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn maximize_prefers_smaller_argument_on_ties() {
        let (x, _) = maximize_1d(|_| 1.0, 0.0, 1.0, &RootConfig::default());
        assert_eq!(x, 0.0);
    }

    #[test]
    fn maximize_boundary_optimum() {
        let (x, _) = maximize_1d(|x| x, 0.0, 2.0, &RootConfig::with_tol(1e-12));
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn pav_pools_violators() {
        let out = isotonic_regression(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]);
        assert_eq!(out, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn monotone_cubic_reproduces_lines_and_integrates() {
        let mc = MonotoneCubic::new(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(mc.value(0.75), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(mc.derivative(1.5, false), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mc.antiderivative(2.0), 2.0 + 4.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let mc = MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut prev = mc.value(0.0);
        for i in 1..=300 {
            let v = mc.value(3.0 * i as f64 / 300.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn revisit_detection() {
        let h = vec![vec![0.0, 0.5], vec![0.0, 0.2], vec![0.0, 0.3]];
        assert_eq!(find_revisit(&h, &[0.0, 0.2 + 1e-12], 8, 1e-9), Some(1));
        assert_eq!(find_revisit(&h, &[0.0, 0.5], 2, 1e-9), None);
    }
    #[test]
    fn pentadiagonal_solve() {
        let n = 7;
        let mut a = Pentadiagonal::zeros(n);
        for i in 0..n {
            a.add(i, i, 6.0 + i as f64);
            if i + 1 < n {
                a.add(i, i + 1, -2.0);
            }
            if i + 2 < n {
                a.add(i + 2, i, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul(&x);
        let y = a.solve(&b).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(x[i], y[i], epsilon = 1e-13);
        }
        let mut bad = Pentadiagonal::zeros(3);
        bad.add(0, 0, 1.0);
        bad.add(1, 1, -1.0);
        bad.add(2, 2, 1.0);
        assert!(bad.solve(&[1.0, 1.0, 1.0]).is_none());
    }
}
