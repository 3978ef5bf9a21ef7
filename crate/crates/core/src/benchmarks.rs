//! Symbolic-regression instances and their fitness cases.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::variable_name;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Koza1,
    Nguyen6,
    Pagie1,
}

impl Problem {
    pub const ALL: [Problem; 3] = [Problem::Koza1, Problem::Nguyen6, Problem::Pagie1];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Koza1 => "koza1",
            Problem::Nguyen6 => "nguyen6",
            Problem::Pagie1 => "pagie1",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Problem::Koza1 => "Koza-1",
            Problem::Nguyen6 => "Nguyen-6",
            Problem::Pagie1 => "Pagie-1",
        }
    }

    pub fn num_vars(self) -> u8 {
        match self {
            Problem::Koza1 | Problem::Nguyen6 => 1,
            Problem::Pagie1 => 2,
        }
    }

    /// Stable tag mixed into run seeds.
    pub fn seed_tag(self) -> u64 {
        match self {
            Problem::Koza1 => 1,
            Problem::Nguyen6 => 2,
            Problem::Pagie1 => 3,
        }
    }

    /// Ground-truth function.
    pub fn target(self, point: &[f64]) -> Result<f64> {
        match self {
            Problem::Koza1 => Ok(koza1(point[0])),
            Problem::Nguyen6 => Ok(nguyen6(point[0])),
            Problem::Pagie1 => pagie1(point[0], point[1]),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "koza1" => Ok(Problem::Koza1),
            "nguyen6" => Ok(Problem::Nguyen6),
            "pagie1" => Ok(Problem::Pagie1),
            other => Err(Error::config(format!("unknown problem '{other}'"))),
        }
    }
}

/// x⁴ + x³ + x² + x
pub fn koza1(x: f64) -> f64 {
    x * x * x * x + x * x * x + x * x + x
}

/// sin(x) + sin(x + x²)
pub fn nguyen6(x: f64) -> f64 {
    x.sin() + (x + x * x).sin()
}

/// 1/(1 + x⁻⁴) + 1/(1 + y⁻⁴), undefined when either input is zero.
pub fn pagie1(x: f64, y: f64) -> Result<f64> {
    if x == 0.0 || y == 0.0 {
        return Err(Error::Domain(format!("pagie1 undefined at ({x}, {y})")));
    }
    Ok(1.0 / (1.0 + x.powi(-4)) + 1.0 / (1.0 + y.powi(-4)))
}

/// Input points and targets for one benchmark instance. Inputs are kept both
/// row-wise and column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessCases {
    points: Vec<Vec<f64>>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl FitnessCases {
    pub fn new(points: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("fitness cases must not be empty"));
        }
        if points.len() != targets.len() {
            return Err(Error::config(format!(
                "{} points but {} targets",
                points.len(),
                targets.len()
            )));
        }
        let arity = points[0].len();
        if arity == 0 || points.iter().any(|p| p.len() != arity) {
            return Err(Error::config("every point must have the same non-zero arity"));
        }
        if points.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::config("fitness cases must be finite"));
        }
        let columns = (0..arity)
            .map(|v| points.iter().map(|p| p[v]).collect())
            .collect();
        Ok(FitnessCases {
            points,
            columns,
            targets,
        })
    }

    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Self> {
        let targets = points.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
        FitnessCases::new(points, targets)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// CSV with header `x[,y],target`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.arity()).map(|v| variable_name(v as u8)).collect();
        header.push("target".into());
        writeln!(out, "{}", header.join(","))?;
        for (p, t) in self.points.iter().zip(&self.targets) {
            let row: Vec<String> = p.iter().chain(std::iter::once(t)).map(f64::to_string).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub const UNIFORM_CASES: usize = 20;
pub const PAGIE_GRID_SIDE: usize = 26;

/// Coordinate `k` of the -5:0.4:5 grid, computed as (2k - 25) / 5 so each
/// value is the double nearest the exact grid point.
fn pagie_coordinate(k: usize) -> f64 {
    (2.0 * k as f64 - 25.0) / 5.0
}

/// Koza-1 and Nguyen-6 draw 20 points uniformly from [-1, 1]; Pagie-1 uses
/// the full 26 × 26 grid over [-5, 5] with step 0.4 (x-major order).
pub fn make_cases<R: Rng + ?Sized>(problem: Problem, rng: &mut R) -> FitnessCases {
    let points: Vec<Vec<f64>> = match problem {
        Problem::Koza1 | Problem::Nguyen6 => (0..UNIFORM_CASES)
            .map(|_| vec![rng.gen_range(-1.0..=1.0)])
            .collect(),
        Problem::Pagie1 => (0..PAGIE_GRID_SIDE)
            .flat_map(|i| {
                (0..PAGIE_GRID_SIDE).map(move |j| vec![pagie_coordinate(i), pagie_coordinate(j)])
            })
            .collect(),
    };
    FitnessCases::from_fn(points, |p| problem.target(p)).expect("standard grids are in-domain")
}
