//! `key = value` run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use twisted_haar::geometry::{FactorSpec, Profile};
use twisted_haar::{NilShape, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

impl std::str::FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "float" => Ok(Mode::Float),
            _ => bail!("mode must be `exact` or `float`, got `{s}`"),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Euclidean torus used by the Haar and martingale checks.
    pub grid: String,
    pub systems: Vec<u8>,
    pub mode: Mode,
    pub seed: u64,
    pub kappa: i32,
    pub profile: String,
    pub strict: bool,
    pub sigma_max: i32,
    pub out: PathBuf,
    pub frame_signals: usize,
    pub mart_signals: usize,
    pub lp_trials: usize,
    pub lp_exponents: Vec<f64>,
    pub nil_dims: [usize; 3],
    pub nil_levels: u32,
    pub nil_kappa: i32,
    pub nil_signals: usize,
    /// Negative-control hook: partition checks use a lattice stretched by 3/2.
    pub inject_broken_lattice: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: "0,4;0,4".into(),
            systems: vec![1, 2, 3],
            mode: Mode::Exact,
            seed: 2024,
            kappa: 0,
            profile: "staircase:7".into(),
            strict: false,
            sigma_max: 10,
            out: PathBuf::from("out"),
            frame_signals: 50,
            mart_signals: 10,
            lp_trials: 100,
            lp_exponents: vec![1.5, 2.0, 3.0, 4.0],
            nil_dims: [1, 1, 1],
            nil_levels: 2,
            nil_kappa: 0,
            nil_signals: 20,
            inject_broken_lattice: false,
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| anyhow!("bad list item `{x}`")))
        .collect()
}

pub fn parse_triple<T: std::str::FromStr + Copy>(s: &str) -> Result<[T; 3]> {
    let v = parse_list::<T>(s)?;
    <[T; 3]>::try_from(v).map_err(|_| anyhow!("expected three comma-separated values, got `{s}`"))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("expected a boolean, got `{s}`"),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            self.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| v.parse::<i64>().map_err(|_| anyhow!("`{key}` needs an integer, got `{v}`"));
        match key {
            "grid" => self.grid = value.to_string(),
            "systems" => self.systems = parse_list(value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| anyhow!("bad seed `{value}`"))?,
            "kappa" => self.kappa = int(value)? as i32,
            "profile" => self.profile = value.to_string(),
            "strict" => self.strict = parse_bool(value)?,
            "sigma_max" => self.sigma_max = int(value)? as i32,
            "out" => self.out = PathBuf::from(value),
            "frame_signals" => self.frame_signals = int(value)? as usize,
            "mart_signals" => self.mart_signals = int(value)? as usize,
            "lp_trials" => self.lp_trials = int(value)? as usize,
            "lp_exponents" => self.lp_exponents = parse_list(value)?,
            "nil_dims" => self.nil_dims = parse_triple(value)?,
            "nil_levels" => self.nil_levels = int(value)? as u32,
            "nil_kappa" => self.nil_kappa = int(value)? as i32,
            "nil_signals" => self.nil_signals = int(value)? as usize,
            "inject_broken_lattice" => self.inject_broken_lattice = parse_bool(value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Checks every field against the preconditions of the code that will consume it.
    pub fn validate(&self) -> Result<()> {
        let grid = self.euclid_grid()?;
        if grid.dim() % 2 != 0 || grid.axes().windows(2).any(|w| w[0] != w[1]) {
            bail!("grid `{}` must have an even number of identical axes", self.grid);
        }
        if self.systems.is_empty() || self.systems.iter().any(|s| !(1..=3).contains(s)) {
            bail!("systems must be drawn from 1, 2, 3");
        }
        if let Some(p) = self.lp_exponents.iter().find(|&&p| !(p > 1.0) || !p.is_finite()) {
            bail!("L^p exponent {p} must be finite and greater than 1");
        }
        if self.sigma_max < 1 {
            bail!("sigma_max must be at least 1");
        }
        if self.kappa < 0 || self.nil_kappa < 0 {
            bail!("κ must be non-negative");
        }
        if self.nil_levels == 0 {
            bail!("nil_levels must be at least 1");
        }
        self.nil_shape().grid()?;
        for spec in self.factor_specs()? {
            spec.check(self.strict)?;
        }
        Ok(())
    }

    pub fn euclid_grid(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::parse_spec(&self.grid)?)
    }

    pub fn nil_shape(&self) -> NilShape {
        NilShape::new(self.nil_dims, self.nil_levels, 0, self.nil_kappa)
    }

    /// Factor specifications for the shard geometry; factor 3 never carries a profile.
    pub fn factor_specs(&self) -> Result<[FactorSpec; 3]> {
        self.factor_specs_with(&self.profile)
    }

    pub fn factor_specs_with(&self, profile: &str) -> Result<[FactorSpec; 3]> {
        let spec = |mu: u8, offset: u64| -> Result<FactorSpec> {
            let p = match profile.strip_prefix("staircase:") {
                Some(seed) => {
                    let seed: u64 = seed.parse().map_err(|_| anyhow!("bad staircase seed in `{profile}`"))?;
                    Profile::staircase(1, 2, seed + offset)
                }
                None => Profile::parse(profile, 1)?,
            };
            Ok(FactorSpec::new(mu, 1, p, self.kappa))
        };
        Ok([spec(1, 0)?, spec(2, 1)?, FactorSpec::zero(3, self.kappa)])
    }

    /// `key = value` listing of every field, echoed into reports.
    pub fn render(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let lines = [
            ("grid", self.grid.clone()),
            ("systems", join(&self.systems.iter().map(u8::to_string).collect::<Vec<_>>())),
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("kappa", self.kappa.to_string()),
            ("profile", self.profile.clone()),
            ("strict", self.strict.to_string()),
            ("sigma_max", self.sigma_max.to_string()),
            ("frame_signals", self.frame_signals.to_string()),
            ("mart_signals", self.mart_signals.to_string()),
            ("lp_trials", self.lp_trials.to_string()),
            ("lp_exponents", join(&self.lp_exponents.iter().map(f64::to_string).collect::<Vec<_>>())),
            ("nil_dims", join(&self.nil_dims.iter().map(usize::to_string).collect::<Vec<_>>())),
            ("nil_levels", self.nil_levels.to_string()),
            ("nil_kappa", self.nil_kappa.to_string()),
            ("nil_signals", self.nil_signals.to_string()),
            ("inject_broken_lattice", self.inject_broken_lattice.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("seed = 9 # comment\nmode=float\nnil_dims = 1,2,1\n\ninject_broken_lattice = yes").unwrap();
        assert_eq!((cfg.seed, cfg.mode, cfg.nil_dims, cfg.inject_broken_lattice), (9, Mode::Float, [1, 2, 1], true));
        let mut again = RunConfig::default();
        again.apply_text(&cfg.render()).unwrap();
        assert_eq!(again, RunConfig { out: again.out.clone(), ..cfg });
        assert!(RunConfig::default().apply_text("colour = red").is_err());
        assert!(RunConfig::default().apply_text("seed").is_err());
        RunConfig::default().validate().unwrap();
        let bad = RunConfig { lp_exponents: vec![1.0], ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { grid: "0,4;0,3".into(), ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let strict = RunConfig { strict: true, ..RunConfig::default() };
        assert!(strict.validate().is_err());
    }
}
