//! Experiment configuration: presets, `key=value` files and overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lle_toolkit::lle_core::CRule;
use lle_toolkit::neighbors::NeighborScheme;
use lle_toolkit::samplers::Manifold;
use serde::Serialize;

/// Built-in test functions for the convergence runner, defined on ambient
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FTest {
    Constant,
    /// `x_1`.
    Coordinate,
    /// `|x|^2`.
    SquaredRadius,
    /// `sum_i sin(pi x_i)`.
    Trig,
}

impl FTest {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "constant" => FTest::Constant,
            "coordinate" => FTest::Coordinate,
            "squared-radius" | "squared_radius" => FTest::SquaredRadius,
            "trig" => FTest::Trig,
            _ => bail!("unknown test function '{s}'"),
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FTest::Constant => 1.0,
            FTest::Coordinate => x[0],
            FTest::SquaredRadius => x.iter().map(|v| v * v).sum(),
            FTest::Trig => x.iter().map(|v| (std::f64::consts::PI * v).sin()).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        match self {
            FTest::Constant => vec![0.0; x.len()],
            FTest::Coordinate => {
                let mut g = vec![0.0; x.len()];
                g[0] = 1.0;
                g
            }
            FTest::SquaredRadius => x.iter().map(|v| 2.0 * v).collect(),
            FTest::Trig => x.iter().map(|v| pi * (pi * v).cos()).collect(),
        }
    }

    /// Diagonal of the Hessian; every built-in function is separable.
    pub fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        match self {
            FTest::Constant | FTest::Coordinate => vec![0.0; x.len()],
            FTest::SquaredRadius => vec![2.0; x.len()],
            FTest::Trig => x.iter().map(|v| -pi * pi * (pi * v).sin()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub manifold: Manifold,
    /// Sample count; raw draws for the rejection samplers.
    pub n: usize,
    /// Ambient dimension of the Gaussian cloud.
    pub p: usize,
    pub eps: Option<f64>,
    pub knn: Option<usize>,
    #[serde(serialize_with = "ser_c_rule")]
    pub c_rule: CRule,
    pub seed: u64,
    pub eigen_count: usize,
    pub output_dir: PathBuf,
    pub f_test: FTest,
    pub alpha: Option<f64>,
    /// Clip depth as a multiple of `eps`; defaults to `t*(d) / eps`.
    pub tstar_clip: Option<f64>,
    pub clip: bool,
    pub threshold: Option<f64>,
    pub scale: usize,
}

fn ser_c_rule<S: serde::Serializer>(r: &CRule, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        CRule::Fixed(c) => s.serialize_str(&format!("fixed:{c}")),
        CRule::Paper { .. } => s.serialize_str("n*eps^(d+3)"),
    }
}

impl ExperimentConfig {
    /// Figure-scale defaults for each manifold.
    pub fn preset(manifold: Manifold) -> Self {
        let (n, eps) = match manifold {
            Manifold::Interval => (8000, 0.01),
            Manifold::Disk => (20000, 0.1),
            Manifold::Curve => (8000, 0.01),
            Manifold::Surface => (20000, 0.1),
            Manifold::Torus => (25000, 0.3),
            Manifold::Gaussian | Manifold::Custom => (400, 0.0),
        };
        let gaussian = manifold == Manifold::Gaussian;
        Self {
            manifold,
            n,
            p: 200,
            eps: (!gaussian).then_some(eps),
            knn: gaussian.then_some(50),
            c_rule: if gaussian {
                CRule::Fixed(1e-3)
            } else {
                CRule::Paper { eps: None }
            },
            seed: 0,
            eigen_count: 6,
            output_dir: PathBuf::from("out"),
            f_test: FTest::SquaredRadius,
            alpha: None,
            tstar_clip: None,
            clip: false,
            threshold: None,
            scale: 1,
        }
    }

    /// Preset for the manifold named last among `layers`, then every
    /// `key=value` of each layer in order. Later layers win.
    pub fn resolve(layers: &[Vec<(String, String)>]) -> Result<Self> {
        let manifold = layers
            .iter()
            .flatten().rfind(|(k, _)| k == "manifold")
            .map(|(_, v)| v.parse::<Manifold>())
            .transpose()?
            .unwrap_or(Manifold::Interval);
        let mut cfg = Self::preset(manifold);
        for (k, v) in layers.iter().flatten() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| anyhow!("{key} = '{value}': {e}");
        match key.replace('-', "_").as_str() {
            "manifold" => self.manifold = value.parse().map_err(|e| bad(&e))?,
            "n" => self.n = value.parse().map_err(|e| bad(&e))?,
            "p" => self.p = value.parse().map_err(|e| bad(&e))?,
            "eps" => {
                self.eps = Some(value.parse().map_err(|e| bad(&e))?);
                self.knn = None;
            }
            "knn" => {
                self.knn = Some(value.parse().map_err(|e| bad(&e))?);
                self.eps = None;
            }
            "c" => self.c_rule = CRule::Fixed(value.parse().map_err(|e| bad(&e))?),
            "c_rule" => match value {
                "paper" => self.c_rule = CRule::Paper { eps: None },
                "fixed" => {
                    if !matches!(self.c_rule, CRule::Fixed(_)) {
                        self.c_rule = CRule::Fixed(1e-3);
                    }
                }
                _ => bail!("c_rule must be 'paper' or 'fixed', got '{value}'"),
            },
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "k_eigs" => self.eigen_count = value.parse().map_err(|e| bad(&e))?,
            "alpha" => self.alpha = Some(value.parse().map_err(|e| bad(&e))?),
            "out" => self.output_dir = PathBuf::from(value),
            "tstar_clip" => self.tstar_clip = Some(value.parse().map_err(|e| bad(&e))?),
            "clip" => self.clip = value.parse().map_err(|e| bad(&e))?,
            "threshold" => self.threshold = Some(value.parse().map_err(|e| bad(&e))?),
            "f_test" => self.f_test = FTest::parse(value)?,
            "scale" => self.scale = value.parse().map_err(|e| bad(&e))?,
            _ => bail!("unknown configuration key '{key}'"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            bail!("scale must be at least 1");
        }
        if self.n / self.scale == 0 {
            bail!("n = {} is empty after dividing by scale {}", self.n, self.scale);
        }
        match (self.eps, self.knn) {
            (Some(e), _) if !(e > 0.0) => bail!("eps must be positive"),
            (_, Some(0)) => bail!("knn must be positive"),
            (None, None) => bail!("either eps or knn is required"),
            _ => {}
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                bail!("alpha must lie in [0, 1]");
            }
        }
        if let Some(r) = self.tstar_clip {
            if !(0.0..=1.0).contains(&r) {
                bail!("tstar_clip is a fraction of eps and must lie in [0, 1]");
            }
        }
        if let CRule::Fixed(c) = self.c_rule {
            if !(c > 0.0) {
                bail!("c must be positive");
            }
        }
        if self.eigen_count == 0 {
            bail!("k_eigs must be positive");
        }
        Ok(())
    }

    /// Sample count after applying the scale divisor.
    pub fn scaled_n(&self) -> usize {
        self.n / self.scale
    }

    pub fn scheme(&self) -> NeighborScheme {
        match (self.eps, self.knn) {
            (Some(e), _) => NeighborScheme::EpsilonBall(e),
            (None, Some(k)) => NeighborScheme::Knn(k),
            (None, None) => unreachable!("validated"),
        }
    }

    /// Bandwidth for the analytic coefficients and region partition.
    pub fn bandwidth(&self) -> Result<f64> {
        self.eps
            .ok_or_else(|| anyhow!("this experiment needs an epsilon-ball graph"))
    }
}

/// Reads `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
