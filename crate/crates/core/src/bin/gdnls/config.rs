use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use gdnls::critical::critical_speed;
use gdnls::evolve::{step_limit, Scheme};
use gdnls::numerics::Grid;
use gdnls::soliton::{sample, SolitonParams};
use gdnls::{Error, Result};

/// A number or one of the literals "critical" / "auto".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Word(String),
}

impl std::str::FromStr for Value {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(s.parse::<f64>().map(Value::Num).unwrap_or_else(|_| Value::Word(s.to_string())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flat configuration, as read from a JSON object or from flags.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// JSON file with any of the keys below; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// speed, or "critical" for 2 z0 sqrt(omega)
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<Value>,
    /// half-length of the box [-L, L), or "auto"
    #[arg(long = "L")]
    #[serde(rename = "L", alias = "l")]
    pub big_l: Option<Value>,
    #[arg(long = "N")]
    #[serde(rename = "N", alias = "n")]
    pub big_n: Option<usize>,
    /// time step, or "auto"
    #[arg(long)]
    pub dt: Option<Value>,
    #[arg(long = "T")]
    #[serde(rename = "T", alias = "t")]
    pub big_t: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    /// comma-separated amplitudes for the sweep
    #[arg(long, value_delimiter = ',')]
    pub delta1_list: Option<Vec<f64>>,
    /// cutoff radius, or "auto" for 10/(b2 delta1) capped at 0.45 L
    #[arg(long = "R")]
    #[serde(rename = "R", alias = "r")]
    pub big_r: Option<Value>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Etdrk4,
    Ifrk4,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Etdrk4 => Scheme::Etdrk4,
            SchemeArg::Ifrk4 => Scheme::Ifrk4,
        }
    }
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RawConfig {
    pub fn load(flags: &RawConfig) -> Result<RawConfig> {
        let mut cfg = match &flags.config {
            Some(path) => read_file(path)?,
            None => RawConfig::default(),
        };
        overlay!(cfg, flags, sigma, omega, c, big_l, big_n, dt, big_t, delta1, delta1_list, big_r, record_every, seed, output_dir, format, scheme);
        Ok(cfg)
    }
}

fn read_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Configuration with every "auto" and "critical" replaced by a number.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub sigma: f64,
    pub omega: f64,
    pub c: f64,
    pub c_is_critical: bool,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub delta1: f64,
    pub delta1_list: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub record_every: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: Format,
    pub scheme: SchemeArg,
}

fn number(v: &Option<Value>, key: &str, auto: Option<&str>) -> Result<Option<f64>> {
    match v {
        None => Ok(None),
        Some(Value::Num(x)) => Ok(Some(*x)),
        Some(Value::Word(w)) if Some(w.as_str()) == auto => Ok(None),
        Some(Value::Word(w)) => Err(Error::Config(format!("{key} = {w:?}: expected a number{}", auto.map(|a| format!(" or \"{a}\"")).unwrap_or_default()))),
    }
}

impl Resolved {
    /// σ and ω only; for commands that must handle σ outside (1, 2) themselves.
    pub fn sigma_omega(raw: &RawConfig) -> (f64, f64) {
        (raw.sigma.unwrap_or(1.5), raw.omega.unwrap_or(1.0))
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Resolved> {
        let (sigma, omega) = Self::sigma_omega(raw);
        let (c, c_is_critical) = match &raw.c {
            Some(Value::Word(w)) if w == "critical" => (critical_speed(sigma, omega)?, true),
            other => (number(other, "c", Some("critical"))?.unwrap_or(0.5), false),
        };
        let params = SolitonParams::new(sigma, omega, c)?;
        let n = raw.big_n.unwrap_or(2048);
        let l = number(&raw.big_l, "L", Some("auto"))?.unwrap_or_else(|| params.auto_half_length());
        let grid = Grid::new(l, n)?;
        let dt = match number(&raw.dt, "dt", Some("auto"))? {
            Some(dt) => dt,
            None => {
                let amp = sample(&params, &grid).max_abs();
                // headroom for amplitude growth of perturbed runs
                1e-3f64.min(0.5 * step_limit(&grid, sigma, 1.5 * amp, 1.0))
            }
        };
        let t = raw.big_t.unwrap_or(10.0);
        let delta1 = raw.delta1.unwrap_or(1e-3);
        let record_every = raw.record_every.unwrap_or(10);
        if !(dt > 0.0 && dt.is_finite()) || !(t > 0.0 && t.is_finite()) || record_every == 0 {
            return Err(Error::Config(format!("need dt > 0, T > 0 and record_every >= 1 (got {dt}, {t}, {record_every})")));
        }
        Ok(Resolved {
            sigma,
            omega,
            c,
            c_is_critical,
            l,
            n,
            dt,
            t,
            delta1,
            delta1_list: raw.delta1_list.clone().unwrap_or_default(),
            r: number(&raw.big_r, "R", Some("auto"))?,
            record_every,
            seed: raw.seed.unwrap_or(0),
            output_dir: raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("gdnls-out")),
            format: raw.format.unwrap_or(Format::Csv),
            scheme: raw.scheme.unwrap_or(SchemeArg::Etdrk4),
        })
    }

    pub fn params(&self) -> SolitonParams {
        SolitonParams { sigma: self.sigma, omega: self.omega, c: self.c }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.l, self.n)
    }
}
