//! Named catalog of data functions for loads, sources, boundary data, and
//! initial conditions.
//!
//! Functions are kept symbolic so configurations round-trip exactly; they are
//! evaluated with the position, the time, and the time-step size (the ramp
//! entry is defined per step).

use std::f64::consts::PI;
use std::fmt;

use crate::{invalid, Result};

/// Scalar data function.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Zero,
    One,
    Constant(f64),
    CoordX,
    CoordY,
    /// `c * x^px * y^py`
    Monomial { px: u32, py: u32, c: f64 },
    /// `c * sin(a pi x) * sin(b pi y)`
    SinPi { a: f64, b: f64, c: f64 },
    /// `c * cos(a pi x) * cos(b pi y)`
    CosPi { a: f64, b: f64, c: f64 },
    /// `c * t / tau`: grows by `c` every time step.
    Ramp(f64),
    /// Source that makes `cos(pi x) cos(pi y)` solve
    /// `theta - div(k grad theta) = source`.
    MmsHeatSource { k_const: f64 },
}

impl ScalarFn {
    pub fn eval(&self, p: [f64; 2], t: f64, tau: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::One => 1.0,
            ScalarFn::Constant(c) => c,
            ScalarFn::CoordX => p[0],
            ScalarFn::CoordY => p[1],
            ScalarFn::Monomial { px, py, c } => c * p[0].powi(px as i32) * p[1].powi(py as i32),
            ScalarFn::SinPi { a, b, c } => c * (a * PI * p[0]).sin() * (b * PI * p[1]).sin(),
            ScalarFn::CosPi { a, b, c } => c * (a * PI * p[0]).cos() * (b * PI * p[1]).cos(),
            ScalarFn::Ramp(c) => c * t / tau,
            ScalarFn::MmsHeatSource { k_const } => {
                (1.0 + 2.0 * PI * PI * k_const) * (PI * p[0]).cos() * (PI * p[1]).cos()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarFn::Zero) || matches!(self, ScalarFn::Constant(c) if *c == 0.0)
    }

    pub fn parse(tokens: &mut std::slice::Iter<'_, &str>) -> Result<Self> {
        let head = tokens.next().ok_or_else(|| err_msg("missing function name"))?;
        let mut num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| err_msg(format!("expected number for {what}")))
        };
        Ok(match *head {
            "zero" => ScalarFn::Zero,
            "one" => ScalarFn::One,
            "constant" => ScalarFn::Constant(num("constant")?),
            "coord_x" => ScalarFn::CoordX,
            "coord_y" => ScalarFn::CoordY,
            "monomial" => {
                let px = num("monomial px")? as u32;
                let py = num("monomial py")? as u32;
                ScalarFn::Monomial { px, py, c: num("monomial c")? }
            }
            "sinpi" => ScalarFn::SinPi { a: num("sinpi a")?, b: num("sinpi b")?, c: num("sinpi c")? },
            "cospi" => ScalarFn::CosPi { a: num("cospi a")?, b: num("cospi b")?, c: num("cospi c")? },
            "ramp" => ScalarFn::Ramp(num("ramp c")?),
            "mms_heat_source" => ScalarFn::MmsHeatSource { k_const: num("mms_heat_source k")? },
            other => return invalid(format!("unknown scalar function '{other}'")),
        })
    }

    pub fn parse_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let mut it = tokens.iter();
        let f = Self::parse(&mut it)?;
        if it.next().is_some() {
            return invalid(format!("trailing tokens in scalar function '{s}'"));
        }
        Ok(f)
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Zero => write!(f, "zero"),
            ScalarFn::One => write!(f, "one"),
            ScalarFn::Constant(c) => write!(f, "constant {c}"),
            ScalarFn::CoordX => write!(f, "coord_x"),
            ScalarFn::CoordY => write!(f, "coord_y"),
            ScalarFn::Monomial { px, py, c } => write!(f, "monomial {px} {py} {c}"),
            ScalarFn::SinPi { a, b, c } => write!(f, "sinpi {a} {b} {c}"),
            ScalarFn::CosPi { a, b, c } => write!(f, "cospi {a} {b} {c}"),
            ScalarFn::Ramp(c) => write!(f, "ramp {c}"),
            ScalarFn::MmsHeatSource { k_const } => write!(f, "mms_heat_source {k_const}"),
        }
    }
}

/// Vector data function: either two scalar components or a named field.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorFn {
    Components(ScalarFn, ScalarFn),
    /// `(w, w)` with `w = sin(pi x) sin(pi y)`, scaled.
    MmsElasticSolution { c: f64 },
    /// Body force under which the scaled `MmsElasticSolution` solves the
    /// static elasticity problem with stiffness coefficient `coeff`.
    MmsElasticForce { lambda: f64, mu: f64, coeff: f64, c: f64 },
}

impl VectorFn {
    pub fn eval(&self, p: [f64; 2], t: f64, tau: f64) -> [f64; 2] {
        match *self {
            VectorFn::Components(ref fx, ref fy) => [fx.eval(p, t, tau), fy.eval(p, t, tau)],
            VectorFn::MmsElasticSolution { c } => {
                let w = (PI * p[0]).sin() * (PI * p[1]).sin();
                [c * w, c * w]
            }
            VectorFn::MmsElasticForce { lambda, mu, coeff, c } => {
                // u = c (w, w) with w = sin(pi x) sin(pi y):
                // f = -div(coeff * A(E(u))) has both components equal to
                // coeff * c * pi^2 * ((lambda + 3 mu) w - (lambda + mu) v),
                // v = cos(pi x) cos(pi y).
                let w = (PI * p[0]).sin() * (PI * p[1]).sin();
                let v = (PI * p[0]).cos() * (PI * p[1]).cos();
                let val = coeff * c * PI * PI * ((lambda + 3.0 * mu) * w - (lambda + mu) * v);
                [val, val]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorFn::Components(a, b) => a.is_zero() && b.is_zero(),
            _ => false,
        }
    }

    pub fn parse_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let mut it = tokens.iter();
        let head = it.next().ok_or_else(|| err_msg("missing vector function"))?;
        let out = match *head {
            "vector" => {
                let fx = ScalarFn::parse(&mut it)?;
                let fy = ScalarFn::parse(&mut it)?;
                VectorFn::Components(fx, fy)
            }
            "mms_elastic_solution" => {
                let c = next_num(&mut it, "mms_elastic_solution c")?;
                VectorFn::MmsElasticSolution { c }
            }
            "mms_elastic_force" => VectorFn::MmsElasticForce {
                lambda: next_num(&mut it, "lambda")?,
                mu: next_num(&mut it, "mu")?,
                coeff: next_num(&mut it, "coeff")?,
                c: next_num(&mut it, "c")?,
            },
            other => return invalid(format!("unknown vector function '{other}'")),
        };
        if it.next().is_some() {
            return invalid(format!("trailing tokens in vector function '{s}'"));
        }
        Ok(out)
    }
}

impl fmt::Display for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorFn::Components(a, b) => write!(f, "vector {a} {b}"),
            VectorFn::MmsElasticSolution { c } => write!(f, "mms_elastic_solution {c}"),
            VectorFn::MmsElasticForce { lambda, mu, coeff, c } => {
                write!(f, "mms_elastic_force {lambda} {mu} {coeff} {c}")
            }
        }
    }
}

fn next_num(it: &mut std::slice::Iter<'_, &str>, what: &str) -> Result<f64> {
    it.next()
        .and_then(|t| t.parse::<f64>().ok())
        .ok_or_else(|| err_msg(format!("expected number for {what}")))
}

fn err_msg(msg: impl Into<String>) -> crate::Error {
    crate::Error::InvalidArgument(msg.into())
}
