//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! potential = linear            # linear | quadratic | sine | polynomial
//! potential.coeffs = -2,0 -1,0  # a_0 a_1 ... as re,im pairs (polynomial only)
//! u.center = 0,0
//! u.radius = 1
//! order = 2
//! h.min = 0.001
//! h.max = 0.1
//! h.count = 8
//! grid.per_sector = 10
//! rows = 7
//! matching.rows = 3
//! seed = 7
//! parametrix.h.min = 0.004
//! parametrix.h.max = 0.04
//! parametrix.h.count = 5
//! ```
//!
//! Unknown keys are rejected so that typos do not silently fall back to
//! defaults.

use crate::fit::log_space;
use crate::potential::{Potential, PotentialKind};
use crate::{Error, Result, C64};
use serde::Serialize;

/// Highest order the coefficient pipeline is run at from the CLI.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Sweep {
    /// Log-spaced values from `max` down to `min`.
    pub fn values(&self) -> Vec<f64> {
        log_space(self.max, self.min, self.count)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{name}: empty h sweep")));
        }
        if self.count < 5 {
            return Err(Error::Config(format!("{name}: {} values, slope fits need at least 5", self.count)));
        }
        if !(self.min > 0.0 && self.min < self.max && self.max.is_finite()) {
            return Err(Error::Config(format!("{name}: need 0 < min < max, got {} and {}", self.min, self.max)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// `linear`, `quadratic`, `sine` or `polynomial`.
    pub potential: String,
    pub coeffs: Vec<[f64; 2]>,
    pub u_center: [f64; 2],
    pub u_radius: f64,
    pub order: usize,
    pub h: Sweep,
    pub grid_per_sector: usize,
    pub rows: usize,
    pub matching_rows: usize,
    pub seed: u64,
    pub parametrix_h: Sweep,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: "linear".into(),
            coeffs: Vec::new(),
            u_center: [0.0, 0.0],
            u_radius: 1.0,
            order: 2,
            h: Sweep { min: 1e-3, max: 0.1, count: 8 },
            grid_per_sector: 10,
            rows: 7,
            matching_rows: 3,
            seed: 7,
            parametrix_h: Sweep { min: 0.004, max: 0.04, count: 5 },
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

/// `re,im`
pub fn parse_complex(key: &str, v: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = v.split(',').collect();
    match parts.as_slice() {
        [re, im] => Ok([parse_f64(key, re)?, parse_f64(key, im)?]),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a re,im pair"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::from_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse without validating, so that command-line overrides can be
    /// applied first.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", n + 1)));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "potential" => self.potential = v.to_string(),
            "potential.coeffs" => self.coeffs = v.split_whitespace().map(|p| parse_complex(key, p)).collect::<Result<_>>()?,
            "u.center" => self.u_center = parse_complex(key, v)?,
            "u.radius" => self.u_radius = parse_f64(key, v)?,
            "order" => self.order = parse_usize(key, v)?,
            "h.min" => self.h.min = parse_f64(key, v)?,
            "h.max" => self.h.max = parse_f64(key, v)?,
            "h.count" => self.h.count = parse_usize(key, v)?,
            "grid.per_sector" => self.grid_per_sector = parse_usize(key, v)?,
            "rows" => self.rows = parse_usize(key, v)?,
            "matching.rows" => self.matching_rows = parse_usize(key, v)?,
            "seed" => self.seed = v.trim().parse().map_err(|_| Error::Config(format!("seed: '{v}' is not an integer")))?,
            "parametrix.h.min" => self.parametrix_h.min = parse_f64(key, v)?,
            "parametrix.h.max" => self.parametrix_h.max = parse_f64(key, v)?,
            "parametrix.h.count" => self.parametrix_h.count = parse_usize(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.h.validate("h")?;
        self.parametrix_h.validate("parametrix.h")?;
        if self.order > MAX_ORDER {
            return Err(Error::Config(format!("order {} above the supported maximum {MAX_ORDER}", self.order)));
        }
        if !(self.u_radius > 0.0) {
            return Err(Error::Config("u.radius must be positive".into()));
        }
        if self.grid_per_sector == 0 || self.rows == 0 || self.matching_rows == 0 {
            return Err(Error::Config("grid.per_sector, rows and matching.rows must be positive".into()));
        }
        self.build_potential().map(|_| ())
    }

    pub fn build_potential(&self) -> Result<Potential> {
        let center = C64::new(self.u_center[0], self.u_center[1]);
        let kind = match self.potential.as_str() {
            "polynomial" => {
                if self.coeffs.len() < 2 {
                    return Err(Error::Config("polynomial potential needs potential.coeffs with degree >= 1".into()));
                }
                PotentialKind::Polynomial(self.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect())
            }
            name => Potential::builtin(name)?.kind,
        };
        Ok(Potential::new(kind, center, self.u_radius))
    }

    /// Configuration echo in the input format; parsing it gives `self` back.
    pub fn echo(&self) -> String {
        let mut s = format!("potential = {}\n", self.potential);
        if !self.coeffs.is_empty() {
            let c: Vec<String> = self.coeffs.iter().map(|c| format!("{:?},{:?}", c[0], c[1])).collect();
            s += &format!("potential.coeffs = {}\n", c.join(" "));
        }
        s += &format!("u.center = {:?},{:?}\nu.radius = {:?}\norder = {}\n", self.u_center[0], self.u_center[1], self.u_radius, self.order);
        s += &format!("h.min = {:?}\nh.max = {:?}\nh.count = {}\n", self.h.min, self.h.max, self.h.count);
        s += &format!("grid.per_sector = {}\nrows = {}\nmatching.rows = {}\nseed = {}\n", self.grid_per_sector, self.rows, self.matching_rows, self.seed);
        s += &format!(
            "parametrix.h.min = {:?}\nparametrix.h.max = {:?}\nparametrix.h.count = {}\n",
            self.parametrix_h.min, self.parametrix_h.max, self.parametrix_h.count
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_echo_roundtrip() {
        let text = "# sweep\npotential = polynomial\npotential.coeffs = -2,0 -1,0 0.1,-0.05\nu.radius = 0.9\norder = 1  # low\nh.count = 6\nseed = 42\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.coeffs, vec![[-2.0, 0.0], [-1.0, 0.0], [0.1, -0.05]]);
        assert_eq!((cfg.order, cfg.h.count, cfg.seed, cfg.u_radius), (1, 6, 42, 0.9));
        assert_eq!(ExperimentConfig::parse(&cfg.echo()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "h.count = 0",
            "h.count = 3",
            "h.min = 0.2",
            "order = 9",
            "colour = blue",
            "u.center = 1",
            "potential = cubic",
            "potential = polynomial",
            "just text",
            "h.max = abc",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn sweep_values_are_descending() {
        let v = ExperimentConfig::default().h.values();
        assert_eq!(v.len(), 8);
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[7] - 1e-3).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }
}
