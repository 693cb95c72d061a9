//! Scalar functions of a nonnegative radius, used for comparison functions
//! (class-K / class-KL sections), Lipschitz envelopes, and radius-dependent
//! sampler coefficients.
//!
//! Config files name these by preset string: `"zero"`, `"const:c"`,
//! `"linear:c"`, `"affine:a,b"` (a + b·r), `"sqrt:c"`, `"poly:c,p"` (c·r^p),
//! `"table:r=v;r=v;..."` (step interpolation, running max).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone)]
pub enum ScalarFn {
    Zero,
    Const(f64),
    /// c·r
    Linear(f64),
    /// a + b·r
    Affine { offset: f64, slope: f64 },
    /// c·sqrt(r)
    Sqrt(f64),
    /// c·r^p
    Poly { coeff: f64, power: f64 },
    /// Sampled nondecreasing table; evaluates to the value at the smallest
    /// tabulated radius >= r (last value beyond the table).
    Table(Arc<Vec<(f64, f64)>>),
    /// Arbitrary closure; not serializable, intended for tests and
    /// programmatic construction.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ScalarFn {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Const(c) => *c,
            ScalarFn::Linear(c) => c * r,
            ScalarFn::Affine { offset, slope } => offset + slope * r,
            ScalarFn::Sqrt(c) => c * r.sqrt(),
            ScalarFn::Poly { coeff, power } => coeff * r.powf(*power),
            ScalarFn::Table(rows) => {
                for (rr, v) in rows.iter() {
                    if r <= *rr {
                        return *v;
                    }
                }
                rows.last().map(|(_, v)| *v).unwrap_or(0.0)
            }
            ScalarFn::Custom(f) => f(r),
        }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarFn::Custom(Arc::new(f))
    }

    /// Checks f(r_i) <= f(r_{i+1}) on a log-spaced grid over [0, r_max].
    pub fn is_nondecreasing_on_grid(&self, r_max: f64, n: usize) -> bool {
        let mut prev = self.eval(0.0);
        for r in grid_points(r_max, n) {
            let v = self.eval(r);
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                return false;
            }
            prev = v;
        }
        true
    }

    /// True when f(0) == 0 (within absolute tolerance 1e-12).
    pub fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0).abs() <= 1e-12
    }

    /// True when f(r) > 0 for every grid point in (0, r_max].
    pub fn is_positive_on_grid(&self, r_max: f64, n: usize) -> bool {
        grid_points(r_max, n).all(|r| self.eval(r) > 0.0)
    }
}

fn grid_points(r_max: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..=n).map(move |i| r_max * i as f64 / n as f64)
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Custom(_) => write!(f, "ScalarFn::Custom(..)"),
            other => write!(f, "{}", other),
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Zero => write!(f, "zero"),
            ScalarFn::Const(c) => write!(f, "const:{}", c),
            ScalarFn::Linear(c) => write!(f, "linear:{}", c),
            ScalarFn::Affine { offset, slope } => write!(f, "affine:{},{}", offset, slope),
            ScalarFn::Sqrt(c) => write!(f, "sqrt:{}", c),
            ScalarFn::Poly { coeff, power } => write!(f, "poly:{},{}", coeff, power),
            ScalarFn::Table(rows) => {
                write!(f, "table:")?;
                for (i, (r, v)) in rows.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{}={}", r, v)?;
                }
                Ok(())
            }
            ScalarFn::Custom(_) => write!(f, "<custom>"),
        }
    }
}

impl FromStr for ScalarFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "zero" {
            return Ok(ScalarFn::Zero);
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| format!("malformed scalar function `{s}`"))?;
        let nums: Vec<f64> = match name {
            "table" => Vec::new(),
            _ => args
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("bad number `{a}` in `{s}`: {e}"))
                })
                .collect::<Result<_, _>>()?,
        };
        let arity = |n: usize| -> Result<(), String> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` expects {n} argument(s), got {}", nums.len()))
            }
        };
        match name {
            "const" => {
                arity(1)?;
                Ok(ScalarFn::Const(nums[0]))
            }
            "linear" => {
                arity(1)?;
                Ok(ScalarFn::Linear(nums[0]))
            }
            "affine" => {
                arity(2)?;
                Ok(ScalarFn::Affine {
                    offset: nums[0],
                    slope: nums[1],
                })
            }
            "sqrt" => {
                arity(1)?;
                Ok(ScalarFn::Sqrt(nums[0]))
            }
            "poly" => {
                arity(2)?;
                Ok(ScalarFn::Poly {
                    coeff: nums[0],
                    power: nums[1],
                })
            }
            "table" => {
                let mut rows = Vec::new();
                for pair in args.split(';') {
                    let (r, v) = pair
                        .split_once('=')
                        .ok_or_else(|| format!("bad table entry `{pair}`"))?;
                    let r: f64 = r.trim().parse().map_err(|e| format!("{e}"))?;
                    let v: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
                    rows.push((r, v));
                }
                if rows.is_empty() {
                    return Err("empty table".into());
                }
                Ok(ScalarFn::Table(Arc::new(rows)))
            }
            other => Err(format!("unknown scalar function preset `{other}`")),
        }
    }
}

impl Serialize for ScalarFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if matches!(self, ScalarFn::Custom(_)) {
            return Err(serde::ser::Error::custom(
                "custom scalar functions are not serializable",
            ));
        }
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ScalarFn {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_evaluate() {
        assert_eq!(ScalarFn::Zero.eval(3.0), 0.0);
        assert_eq!(ScalarFn::Const(2.0).eval(3.0), 2.0);
        assert_eq!(ScalarFn::Linear(2.0).eval(3.0), 6.0);
        assert_eq!(
            ScalarFn::Affine {
                offset: 1.0,
                slope: 2.0
            }
            .eval(3.0),
            7.0
        );
        assert_eq!(ScalarFn::Sqrt(2.0).eval(4.0), 4.0);
        assert_eq!(
            ScalarFn::Poly {
                coeff: 2.0,
                power: 3.0
            }
            .eval(2.0),
            16.0
        );
    }

    #[test]
    fn parse_round_trip() {
        for s in ["zero", "const:2", "linear:1.5", "affine:1,0.5", "sqrt:3", "poly:2,0.5"] {
            let f: ScalarFn = s.parse().unwrap();
            let back: ScalarFn = f.to_string().parse().unwrap();
            for r in [0.0, 0.3, 1.0, 7.5] {
                assert_eq!(f.eval(r), back.eval(r));
            }
        }
    }

    #[test]
    fn table_step_interpolation() {
        let f: ScalarFn = "table:1=2;3=5".parse().unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(1.0), 2.0);
        assert_eq!(f.eval(2.0), 5.0);
        assert_eq!(f.eval(10.0), 5.0);
    }

    #[test]
    fn monotonicity_checks() {
        assert!(ScalarFn::Linear(1.0).is_nondecreasing_on_grid(10.0, 100));
        assert!(!ScalarFn::custom(|r| -r).is_nondecreasing_on_grid(10.0, 100));
        assert!(ScalarFn::Sqrt(2.0).vanishes_at_zero());
        assert!(!ScalarFn::Const(1.0).vanishes_at_zero());
    }

    #[test]
    fn rejects_malformed() {
        assert!("bogus:1".parse::<ScalarFn>().is_err());
        assert!("linear:a".parse::<ScalarFn>().is_err());
        assert!("affine:1".parse::<ScalarFn>().is_err());
    }
}
