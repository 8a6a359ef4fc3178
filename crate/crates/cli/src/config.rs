use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use fracbvp::grid::Grading;
use fracbvp::kernel::Order;
use fracbvp::operator::{NonlinearityFamily, WeightFamily};
use fracbvp::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Eig,
    Bounds,
    Sweep,
    SolveSub,
    SolveSuper,
    Nonexist,
    HenonShoot,
    HenonContinue,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Bounds => "bounds",
            Command::Sweep => "sweep",
            Command::SolveSub => "solve-sub",
            Command::SolveSuper => "solve-super",
            Command::Nonexist => "nonexist",
            Command::HenonShoot => "henon-shoot",
            Command::HenonContinue => "henon-continue",
        }
    }
}

/// Every tunable of every command. Fields left unset fall back to the
/// command's default; command-line flags override the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fractional order, 1 < alpha <= 2.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Alpha list "a,b,c" or range "start:stop:step" (sweep, bounds).
    #[arg(long)]
    pub alphas: Option<String>,
    /// Weight h: constant:C | power_offset:L:T0 | polynomial:C0,C1,...
    #[arg(long)]
    pub weight: Option<String>,
    /// Nonlinearity f: power:C:P | affine_power:LAMBDA:Q | saturating:A
    #[arg(long)]
    pub nonlinearity: Option<String>,
    /// Number of mesh elements.
    #[arg(long)]
    pub mesh_n: Option<usize>,
    /// uniform | graded:Q | auto
    #[arg(long)]
    pub grading: Option<String>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub maxit: Option<usize>,
    /// Number of starts for nonexist.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Henon weight exponent.
    #[arg(long)]
    pub l: Option<f64>,
    /// Henon power.
    #[arg(long)]
    pub p: Option<f64>,
    /// Right end of the Henon interval (-1, zeta).
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub scan_points: Option<usize>,
    /// Write one trajectory CSV per crossing (henon-shoot).
    #[arg(long)]
    pub dump_trajectories: Option<bool>,
    /// Final order of henon-continue.
    #[arg(long)]
    pub target_alpha: Option<f64>,
    #[arg(long)]
    pub alpha_step: Option<f64>,
    #[arg(long)]
    pub min_step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<(Option<Command>, RunConfig), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        #[derive(Deserialize)]
        struct File {
            command: Option<Command>,
            #[serde(flatten)]
            rest: serde_json::Map<String, serde_json::Value>,
        }
        let file: File = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_value(serde_json::Value::Object(file.rest))
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Ok((file.command, cfg))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(mut self, flags: &RunConfig) -> RunConfig {
        overlay!(
            self, flags, alpha, alphas, weight, nonlinearity, mesh_n, grading, tol, maxit, trials, l, p, zeta,
            beta_min, beta_max, scan_points, dump_trajectories, target_alpha, alpha_step, min_step, out
        );
        self
    }

    pub fn order(&self, default: f64) -> Result<Order, Error> {
        Order::new(self.alpha.unwrap_or(default))
    }

    pub fn weight(&self) -> Result<WeightFamily, Error> {
        let w: WeightFamily = self.weight.as_deref().unwrap_or("constant:1").parse()?;
        w.validate()?;
        Ok(w)
    }

    pub fn nonlinearity(&self, default: &str) -> Result<NonlinearityFamily, Error> {
        let f: NonlinearityFamily = self.nonlinearity.as_deref().unwrap_or(default).parse()?;
        f.validate()?;
        Ok(f)
    }

    pub fn grading(&self) -> Result<Option<Grading>, Error> {
        match self.grading.as_deref().unwrap_or("auto") {
            "auto" => Ok(None),
            "uniform" => Ok(Some(Grading::Uniform)),
            g => {
                let q = g
                    .strip_prefix("graded:")
                    .and_then(|q| q.parse::<f64>().ok())
                    .filter(|q| *q >= 1.0 && q.is_finite())
                    .ok_or_else(|| Error::Config(format!("grading must be auto, uniform or graded:Q with Q >= 1, got {g}")))?;
                Ok(Some(Grading::Graded(q)))
            }
        }
    }

    pub fn alphas(&self, default: &str) -> Result<Vec<Order>, Error> {
        let spec = self.alphas.as_deref().unwrap_or(default);
        let bad = || Error::Config(format!("alphas must be a,b,c or start:stop:step, got {spec}"));
        let values: Vec<f64> = if spec.contains(':') {
            let parts: Vec<f64> = spec
                .split(':')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            let [a, b, step] = parts[..] else { return Err(bad()) };
            if !(step > 0.0 && b >= a) {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // from the start value, not by accumulation, so grids are exact-repeatable
            (0..=n).map(|k| a + step * k as f64).map(|x| (x * 1e12).round() / 1e12).collect()
        } else {
            spec.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        if values.is_empty() {
            return Err(bad());
        }
        values.into_iter().map(Order::new).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Invalid(String),
}
