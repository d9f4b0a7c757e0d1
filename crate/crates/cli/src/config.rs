use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use nmgm_core::cases::{find_case, CaseSpec};
use nmgm_core::driver::{ConfigOverrides, RunOptions};
use nmgm_core::jacobian::JacobianVariant;
use nmgm_core::model::DEFAULT_GRAVITY;

/// Cell count: `n` in 1D, `nx x ny` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cells {
    OneD(usize),
    TwoD(usize, usize),
}

impl FromStr for Cells {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |v: &str| v.trim().parse::<usize>().with_context(|| format!("bad cell count `{s}`"));
        match s.split_once(['x', 'X', ',']) {
            Some((a, b)) => Ok(Cells::TwoD(parse(a)?, parse(b)?)),
            None => Ok(Cells::OneD(parse(s)?)),
        }
    }
}

impl fmt::Display for Cells {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cells::OneD(n) => write!(f, "{n}"),
            Cells::TwoD(nx, ny) => write!(f, "{nx}x{ny}"),
        }
    }
}

/// `simplified` / `full`, or an explicit pattern name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianChoice {
    Simplified,
    Full,
    Explicit(JacobianVariant),
}

impl JacobianChoice {
    pub fn resolve(self, two_dimensional: bool) -> JacobianVariant {
        match (self, two_dimensional) {
            (JacobianChoice::Explicit(v), _) => v,
            (JacobianChoice::Simplified, false) => JacobianVariant::J3,
            (JacobianChoice::Full, false) => JacobianVariant::J5,
            (JacobianChoice::Simplified, true) => JacobianVariant::J9,
            (JacobianChoice::Full, true) => JacobianVariant::J21,
        }
    }
}

impl FromStr for JacobianChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simplified" => Ok(JacobianChoice::Simplified),
            "full" => Ok(JacobianChoice::Full),
            other => other
                .to_ascii_uppercase()
                .parse::<JacobianVariant>()
                .map(JacobianChoice::Explicit)
                .map_err(|_| anyhow!("unknown jacobian `{s}` (simplified, full, J3, J5, J9, J21)")),
        }
    }
}

/// Every key of the config file; all optional until validated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub case: Option<String>,
    pub cells: Option<Cells>,
    pub jacobian: Option<JacobianChoice>,
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub omega_sor: Option<f64>,
    pub nu_pre: Option<usize>,
    pub nu_post: Option<usize>,
    pub n_mg: Option<usize>,
    pub max_newton: Option<usize>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub gravity: Option<f64>,
    pub epsilon: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("invalid value `{v}` for `{key}`: {e}"))
}

impl RawConfig {
    /// Parses flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "case" => c.case = Some(v.to_string()),
                "cells" => c.cells = Some(v.parse()?),
                "jacobian" => c.jacobian = Some(v.parse()?),
                "alpha" => c.alpha = Some(value(key, v)?),
                "tau" => c.tau = Some(value(key, v)?),
                "omega_sor" => c.omega_sor = Some(value(key, v)?),
                "nu_pre" => c.nu_pre = Some(value(key, v)?),
                "nu_post" => c.nu_post = Some(value(key, v)?),
                "n_mg" => c.n_mg = Some(value(key, v)?),
                "max_newton" => c.max_newton = Some(value(key, v)?),
                "tol_abs" => c.tol_abs = Some(value(key, v)?),
                "tol_rel" => c.tol_rel = Some(value(key, v)?),
                "gravity" => c.gravity = Some(value(key, v)?),
                "epsilon" => c.epsilon = Some(value(key, v)?),
                "output_dir" => c.output_dir = Some(PathBuf::from(v)),
                _ => bail!("line {}: unknown key `{key}`", lineno + 1),
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                RawConfig { $($f: over.$f.or(self.$f)),* }
            };
        }
        pick!(case, cells, jacobian, alpha, tau, omega_sor, nu_pre, nu_post, n_mg, max_newton, tol_abs, tol_rel, gravity, epsilon, output_dir)
    }

    pub fn validate(self) -> Result<RunConfig> {
        let name = self.case.ok_or_else(|| anyhow!("no case given"))?;
        let case = find_case(&name)?;
        let cells = match (self.cells, &case) {
            (Some(Cells::OneD(n)), CaseSpec::OneD(_)) => Cells::OneD(n),
            (Some(Cells::TwoD(nx, ny)), CaseSpec::TwoD(_)) => Cells::TwoD(nx, ny),
            (None, CaseSpec::OneD(c)) => Cells::OneD(c.default_cells),
            (None, CaseSpec::TwoD(c)) => Cells::TwoD(c.default_cells.0, c.default_cells.1),
            (Some(cells), _) => bail!("cell count `{cells}` does not match the dimension of `{name}`"),
        };
        let two_d = matches!(case, CaseSpec::TwoD(_));
        let overrides = ConfigOverrides {
            alpha: self.alpha,
            tau: self.tau,
            omega_sor: self.omega_sor,
            nu_pre: self.nu_pre,
            nu_post: self.nu_post,
            n_mg: self.n_mg,
            max_newton: self.max_newton,
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            epsilon: self.epsilon,
            jacobian: self.jacobian.map(|j| j.resolve(two_d)),
            ..ConfigOverrides::default()
        };
        if let Some(j) = overrides.jacobian {
            if j.is_two_dimensional() != two_d {
                bail!("jacobian {j} does not match the dimension of `{name}`");
            }
        }
        Ok(RunConfig {
            case,
            cells,
            options: RunOptions {
                gravity: self.gravity.unwrap_or(DEFAULT_GRAVITY),
                min_cells: None,
                overrides,
            },
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

/// A validated run request.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: CaseSpec,
    pub cells: Cells,
    pub options: RunOptions,
    pub output_dir: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let text = "\
# comment
case = smooth-subcritical
cells = 96
jacobian = full
alpha = 2.5
tau = 0.5
omega_sor = 0.9
nu_pre = 3
nu_post = 4
n_mg = 1
max_newton = 80
tol_abs = 1e-9
tol_rel = 1e-6
gravity = 9.8
epsilon = 0.1   # trailing comment
output_dir = out
";
        let c = RawConfig::parse(text).unwrap();
        assert_eq!(c.case.as_deref(), Some("smooth-subcritical"));
        assert_eq!(c.cells, Some(Cells::OneD(96)));
        assert_eq!(c.jacobian, Some(JacobianChoice::Full));
        assert_eq!((c.nu_pre, c.nu_post, c.n_mg, c.max_newton), (Some(3), Some(4), Some(1), Some(80)));
        assert_eq!(c.epsilon, Some(0.1));
        assert_eq!(c.output_dir, Some(PathBuf::from("out")));
        let run = c.validate().unwrap();
        assert_eq!(run.options.overrides.jacobian, Some(JacobianVariant::J5));
        assert_eq!(run.options.gravity, 9.8);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RawConfig::parse("colour = red").is_err());
        assert!(RawConfig::parse("alpha = lots").is_err());
        assert!(RawConfig::parse("just text").is_err());
    }

    #[test]
    fn later_values_win() {
        let file = RawConfig::parse("case = wedge\ntau = 0.3").unwrap();
        let flags = RawConfig {
            tau: Some(0.9),
            ..RawConfig::default()
        };
        let m = file.merged(flags);
        assert_eq!((m.case.as_deref(), m.tau), (Some("wedge"), Some(0.9)));
    }

    #[test]
    fn cells_and_dimension_must_agree() {
        let c = RawConfig::parse("case = wedge\ncells = 64").unwrap();
        assert!(c.validate().is_err());
        let c = RawConfig::parse("case = wedge\ncells = 16x8\njacobian = simplified").unwrap();
        let run = c.validate().unwrap();
        assert_eq!(run.cells, Cells::TwoD(16, 8));
        assert_eq!(run.options.overrides.jacobian, Some(JacobianVariant::J9));
        assert!(RawConfig::parse("case = wedge\njacobian = J3").unwrap().validate().is_err());
    }

    #[test]
    fn cell_syntax() {
        assert_eq!("64x32".parse::<Cells>().unwrap(), Cells::TwoD(64, 32));
        assert_eq!(" 80 ".parse::<Cells>().unwrap(), Cells::OneD(80));
        assert!("x".parse::<Cells>().is_err());
    }
}
