//! Experiment and sweep descriptions, with validation and resolution into
//! core objects.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ringwalk::coin::basis_coin_state;
use ringwalk::percolation::MAX_ENUMERATED_EDGES;
use ringwalk::{build_coin2, build_coin3, coin_eigenbasis, CoinOperator, RingConfig, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    TwoState,
    Lazy,
    Percolated,
}

impl WalkKind {
    pub fn coin_dim(self) -> usize {
        match self {
            WalkKind::TwoState => 2,
            _ => 3,
        }
    }

    pub fn default_rho(self) -> f64 {
        match self {
            WalkKind::TwoState => FRAC_1_SQRT_2,
            _ => 1.0 / 3f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Initial coin state: a named preset or explicit amplitudes.
///
/// Presets `sigma+`, `sigma1-`, `sigma2-` resolve through the lazy-coin
/// eigenbasis at the experiment's `(ρ, α)`. `L`, `S`, `R` are the standard basis.
/// Explicit amplitudes are written `re,im;re,im[;re,im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CoinState {
    SigmaPlus,
    Sigma1Minus,
    Sigma2Minus,
    Left,
    Stay,
    Right,
    Amplitudes(Vec<C64>),
}

impl FromStr for CoinState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim() {
            "sigma+" | "sigma-plus" => CoinState::SigmaPlus,
            "sigma1-" | "sigma1-minus" => CoinState::Sigma1Minus,
            "sigma2-" | "sigma2-minus" => CoinState::Sigma2Minus,
            "L" => CoinState::Left,
            "S" => CoinState::Stay,
            "R" => CoinState::Right,
            other => {
                let amps = other
                    .split(';')
                    .map(|pair| {
                        let (re, im) = pair
                            .split_once(',')
                            .ok_or_else(|| format!("expected re,im in {pair:?}"))?;
                        let re: f64 = re.trim().parse().map_err(|e| format!("{re:?}: {e}"))?;
                        let im: f64 = im.trim().parse().map_err(|e| format!("{im:?}: {e}"))?;
                        Ok(C64::new(re, im))
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                CoinState::Amplitudes(amps)
            }
        })
    }
}

impl fmt::Display for CoinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoinState::SigmaPlus => f.write_str("sigma+"),
            CoinState::Sigma1Minus => f.write_str("sigma1-"),
            CoinState::Sigma2Minus => f.write_str("sigma2-"),
            CoinState::Left => f.write_str("L"),
            CoinState::Stay => f.write_str("S"),
            CoinState::Right => f.write_str("R"),
            CoinState::Amplitudes(a) => {
                let parts: Vec<String> = a.iter().map(|z| format!("{:?},{:?}", z.re, z.im)).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl TryFrom<String> for CoinState {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<CoinState> for String {
    fn from(c: CoinState) -> String {
        c.to_string()
    }
}

/// Parses a real number, optionally as a multiple of π: `1.5`, `pi`, `0.94pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = match t.strip_suffix("pi") {
        Some("") => PI,
        Some(k) => k.trim_end_matches('*').parse::<f64>().map_err(|e| format!("{s:?}: {e}"))? * PI,
        None => t.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?,
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub walk: WalkKind,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub p: f64,
    pub coin_state: CoinState,
    pub steps: usize,
    pub realizations: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl ExperimentSpec {
    pub fn new(walk: WalkKind) -> Self {
        Self {
            walk,
            n: 5,
            rho: walk.default_rho(),
            alpha: 0.0,
            p: 0.5,
            coin_state: match walk {
                WalkKind::TwoState => CoinState::Left,
                _ => CoinState::SigmaPlus,
            },
            steps: 1000,
            realizations: 1000,
            seed: 0,
            out: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::invalid("--n must be at least 1"));
        }
        if self.steps == 0 {
            return Err(CliError::invalid("--steps must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CliError::invalid(format!("--p must lie in [0, 1], got {}", self.p)));
        }
        if self.walk == WalkKind::Percolated && self.realizations == 0 {
            return Err(CliError::invalid("--realizations must be at least 1"));
        }
        self.coin()?;
        self.coin_vector()?;
        Ok(())
    }

    pub fn ring(&self) -> CliResult<RingConfig> {
        RingConfig::new(self.n).map_err(CliError::from_core_invalid)
    }

    pub fn coin(&self) -> CliResult<CoinOperator> {
        match self.walk {
            WalkKind::TwoState => build_coin2(self.rho),
            _ => build_coin3(self.rho, self.alpha),
        }
        .map_err(CliError::from_core_invalid)
    }

    /// Normalized coin vector for this walk.
    pub fn coin_vector(&self) -> CliResult<Vec<C64>> {
        let d = self.walk.coin_dim();
        let v = match &self.coin_state {
            CoinState::Left => basis_coin_state(d, 0),
            CoinState::Right => basis_coin_state(d, d - 1),
            CoinState::Stay if d == 3 => basis_coin_state(3, 1),
            CoinState::Amplitudes(a) => a.clone(),
            preset if d == 2 => {
                return Err(CliError::invalid(format!(
                    "coin state {preset} needs a three-state walk"
                )))
            }
            preset => {
                let b = coin_eigenbasis(&self.coin()?).map_err(CliError::from_core_invalid)?;
                match preset {
                    CoinState::SigmaPlus => b.sigma_plus.to_vec(),
                    CoinState::Sigma1Minus => b.sigma1_minus.to_vec(),
                    _ => b.sigma2_minus.to_vec(),
                }
            }
        };
        if v.len() != d {
            return Err(CliError::invalid(format!(
                "coin state has {} amplitudes, walk needs {d}",
                v.len()
            )));
        }
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-10 {
            return Err(CliError::invalid(format!("coin state is not normalized (norm² = {n2})")));
        }
        Ok(v)
    }

    /// The exact channel is only built when all `2^{2N}` configurations fit.
    pub fn channel_feasible(&self) -> bool {
        2 * self.n <= MAX_ENUMERATED_EDGES
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Alpha,
    Rho,
    P,
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepQuantity {
    GammaFit,
    GammaPredicted,
    Eta,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub quantity: SweepQuantity,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.grid.len() < 2 {
            return Err(CliError::invalid("sweep grid needs at least two points"));
        }
        if self.grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(CliError::invalid("sweep grid must be strictly increasing"));
        }
        if self.axis == SweepAxis::N && self.grid.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(CliError::invalid("N grid values must be positive integers"));
        }
        if self.axis == SweepAxis::Alpha && self.base.walk == WalkKind::TwoState {
            return Err(CliError::invalid("the two-state coin has no alpha parameter"));
        }
        if self.axis == SweepAxis::P && self.base.walk != WalkKind::Percolated {
            return Err(CliError::invalid("sweeping p needs --walk percolated"));
        }
        Ok(())
    }

    /// Base spec with the swept parameter set to `value`.
    pub fn point(&self, value: f64) -> ExperimentSpec {
        let mut spec = self.base.clone();
        match self.axis {
            SweepAxis::Alpha => spec.alpha = value,
            SweepAxis::Rho => spec.rho = value,
            SweepAxis::P => spec.p = value,
            SweepAxis::N => spec.n = value as usize,
        }
        spec
    }
}

/// `from, from+step, …` up to `to` inclusive (with a half-step guard against rounding).
pub fn linear_grid(from: f64, to: f64, step: f64) -> CliResult<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || to.is_nan() || from.is_nan() || to <= from {
        return Err(CliError::invalid("grid needs step > 0 and to > from"));
    }
    let count = ((to - from) / step + 0.5).floor() as usize;
    Ok((0..=count).map(|k| from + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_state_text_round_trip() {
        for s in ["sigma+", "sigma1-", "sigma2-", "L", "S", "R", "0.6,0;0,0.8"] {
            let c: CoinState = s.parse().unwrap();
            let again: CoinState = c.to_string().parse().unwrap();
            assert_eq!(c, again);
        }
        assert!("0.6;0.8".parse::<CoinState>().is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert!((parse_angle("0.94pi").unwrap() - 0.94 * PI).abs() < 1e-15);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!(parse_angle("x").is_err());
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = linear_grid(0.05, 1.95, 0.05).unwrap();
        assert_eq!(g.len(), 39);
        assert!((g[38] - 1.95).abs() < 1e-12);
    }

    #[test]
    fn presets_need_lazy_walk() {
        let mut spec = ExperimentSpec::new(WalkKind::TwoState);
        spec.coin_state = CoinState::SigmaPlus;
        assert!(spec.validate().is_err());
        spec.coin_state = "0.6,0;0,0.8".parse().unwrap();
        assert!(spec.validate().is_ok());
        spec.steps = 0;
        assert!(spec.validate().is_err());
    }
}
