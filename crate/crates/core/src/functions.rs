//! Named real functions selectable from the command line and the Python bindings.

use std::fmt;
use std::str::FromStr;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedFunction {
    Identity,
    Negate,
    Square,
    Abs,
    Exp,
    ExpNeg,
    Sin,
    Constant(f64),
    AbsPower(f64),
    IndicatorEq(f64),
    IndicatorGe(f64),
    IndicatorLe(f64),
    /// `1 - e^{-(x+eps)}` for `x ≥ -eps`, zero below.
    ProofPhi(f64),
    /// Triangle of height one centred at `center` with half-width `half_width`.
    Bump {
        center: f64,
        half_width: f64,
    },
}

impl NamedFunction {
    pub fn eval(&self, x: f64) -> f64 {
        use NamedFunction::*;
        match *self {
            Identity => x,
            Negate => -x,
            Square => x * x,
            Abs => x.abs(),
            Exp => x.exp(),
            ExpNeg => (-x).exp(),
            Sin => x.sin(),
            Constant(c) => c,
            AbsPower(p) => x.abs().powf(p),
            IndicatorEq(t) => indicator((x - t).abs() <= 1e-9),
            IndicatorGe(t) => indicator(x >= t),
            IndicatorLe(t) => indicator(x <= t),
            ProofPhi(eps) => {
                if x >= -eps {
                    1.0 - (-(x + eps)).exp()
                } else {
                    0.0
                }
            }
            Bump { center, half_width } => (1.0 - (x - center).abs() / half_width).max(0.0),
        }
    }

    pub fn as_fn(&self) -> impl Fn(f64) -> f64 + Sync + '_ {
        move |x| self.eval(x)
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl FromStr for NamedFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        use NamedFunction::*;
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("function '{s}': {e}"))))
            .collect::<Result<_, _>>()?;
        let arg = |i: usize| {
            args.get(i).copied().ok_or_else(|| Error::Parse(format!("function '{s}' needs {} argument(s)", i + 1)))
        };
        Ok(match head {
            "identity" | "x" => Identity,
            "neg" => Negate,
            "square" => Square,
            "abs" => Abs,
            "exp" => Exp,
            "exp-neg" => ExpNeg,
            "sin" => Sin,
            "const" => Constant(arg(0)?),
            "abs-power" => AbsPower(arg(0)?),
            "indicator-eq" => IndicatorEq(arg(0)?),
            "indicator-ge" => IndicatorGe(arg(0)?),
            "indicator-le" => IndicatorLe(arg(0)?),
            "proof-phi" => ProofPhi(arg(0)?),
            "bump" => {
                let half_width = arg(1)?;
                if !(half_width > 0.0) {
                    return Err(Error::Parse("bump half-width must be positive".into()));
                }
                Bump { center: arg(0)?, half_width }
            }
            other => return Err(Error::Parse(format!("unknown function '{other}'"))),
        })
    }
}

impl fmt::Display for NamedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use NamedFunction::*;
        match self {
            Identity => write!(f, "identity"),
            Negate => write!(f, "neg"),
            Square => write!(f, "square"),
            Abs => write!(f, "abs"),
            Exp => write!(f, "exp"),
            ExpNeg => write!(f, "exp-neg"),
            Sin => write!(f, "sin"),
            Constant(c) => write!(f, "const:{c}"),
            AbsPower(p) => write!(f, "abs-power:{p}"),
            IndicatorEq(t) => write!(f, "indicator-eq:{t}"),
            IndicatorGe(t) => write!(f, "indicator-ge:{t}"),
            IndicatorLe(t) => write!(f, "indicator-le:{t}"),
            ProofPhi(e) => write!(f, "proof-phi:{e}"),
            Bump { center, half_width } => write!(f, "bump:{center}:{half_width}"),
        }
    }
}
