use crate::error::{Error, Result};
use crate::numerics::MonotoneCubic;

/// Type density on the closed type interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Linear interpolation of `(theta, f)` nodes; `cum` holds the cdf at the nodes.
    PiecewiseLinear {
        xs: Vec<f64>,
        fs: Vec<f64>,
        cum: Vec<f64>,
    },
    Tabulated {
        curve: MonotoneCubic,
    },
}

impl Density {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Parameter(format!("uniform density needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Density::Uniform { lo, hi })
    }

    pub fn piecewise_linear(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != fs.len() {
            return Err(Error::Parameter("piecewise-linear density needs matching node lists of length >= 2".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("density nodes must be strictly increasing".into()));
        }
        let mut cum = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cum[i] = cum[i - 1] + 0.5 * (fs[i - 1] + fs[i]) * (xs[i] - xs[i - 1]);
        }
        Ok(Density::PiecewiseLinear { xs, fs, cum })
    }

    pub fn tabulated(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        Ok(Density::Tabulated { curve: MonotoneCubic::new(xs, fs)? })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Density::Uniform { .. } => "uniform",
            Density::PiecewiseLinear { .. } => "piecewise_linear",
            Density::Tabulated { .. } => "tabulated",
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Uniform { lo, hi } => (*lo, *hi),
            Density::PiecewiseLinear { xs, .. } => (xs[0], *xs.last().unwrap()),
            Density::Tabulated { curve } => (curve.nodes()[0], *curve.nodes().last().unwrap()),
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Density::Uniform { .. } => Vec::new(),
            Density::PiecewiseLinear { xs, .. } => xs[1..xs.len() - 1].to_vec(),
            Density::Tabulated { curve } => curve.nodes()[1..curve.nodes().len() - 1].to_vec(),
        }
    }

    fn segment(xs: &[f64], t: f64) -> usize {
        let n = xs.len();
        match xs.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return 0.0;
        }
        match self {
            Density::Uniform { lo, hi } => 1.0 / (hi - lo),
            Density::PiecewiseLinear { xs, fs, .. } => {
                let i = Self::segment(xs, t);
                let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
                fs[i] + w * (fs[i + 1] - fs[i])
            }
            Density::Tabulated { curve } => curve.value(t),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        let t = t.clamp(lo, hi);
        match self {
            Density::Uniform { lo, hi } => (t - lo) / (hi - lo),
            Density::PiecewiseLinear { xs, fs, cum } => {
                let i = Self::segment(xs, t);
                let d = t - xs[i];
                let slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]);
                cum[i] + fs[i] * d + 0.5 * slope * d * d
            }
            Density::Tabulated { curve } => curve.antiderivative(t),
        }
    }

    /// Derivative of the density; one-sided at kinks (`left` selects the
    /// left-hand limit).
    pub fn dpdf(&self, t: f64, left: bool) -> f64 {
        match self {
            Density::Uniform { .. } => 0.0,
            Density::PiecewiseLinear { xs, fs, .. } => {
                let mut i = Self::segment(xs, t);
                if left && i > 0 && t <= xs[i] {
                    i -= 1;
                }
                (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
            }
            Density::Tabulated { curve } => curve.derivative(t, left),
        }
    }
}
