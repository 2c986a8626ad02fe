//! Run configuration as read from the `--config` JSON file.

use std::path::PathBuf;

use num_complex::Complex64;
use qplab_core::arith::{self, FrequencyProfile};
use qplab_core::bloch::{ConjugationOptions, DiophantineWindow};
use qplab_core::center::CenterOptions;
use qplab_core::schrodinger::LyapunovOptions;
use qplab_core::{AnalyticPotential, Error, Potential, TrigPotential};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TASKS: [&str; 17] = [
    "freq",
    "lyap",
    "accel",
    "classify",
    "ids",
    "holder",
    "localize",
    "dual-spectrum",
    "jensen",
    "haro-puig",
    "dominated",
    "center",
    "rotation",
    "duality-check",
    "truncation-study",
    "bloch",
    "sweep",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// 2 lambda cos(2 pi theta)
    Amo { lambda: f64 },
    StockD2Even,
    StockD2NonEven,
    /// Sum of a cos(2 pi k theta) + b sin(2 pi k theta) over (k, a, b).
    CosSin { terms: Vec<(i64, f64, f64)> },
    /// Fourier modes (k, re v_k, im v_k); conjugate partners are implied.
    Modes { modes: Vec<(i64, f64, f64)> },
    /// v_k = lambda ratio^|k|
    Geometric { lambda: f64, ratio: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential, CliError> {
        let trig = |v: TrigPotential| Ok(Potential::Trig(v));
        match self {
            PotentialSpec::Amo { lambda } => trig(TrigPotential::amo(*lambda)),
            PotentialSpec::StockD2Even => trig(TrigPotential::stock_d2_even()),
            PotentialSpec::StockD2NonEven => trig(TrigPotential::stock_d2_non_even()),
            PotentialSpec::CosSin { terms } => {
                let mut v = TrigPotential::zero();
                for &(k, a, b) in terms {
                    if k < 0 {
                        return Err(CliError::Config(format!("potential.terms: negative mode {k}")));
                    }
                    v = v.add(&if k == 0 { TrigPotential::constant(a) } else { TrigPotential::cos_sin(k, a, b) });
                }
                trig(v)
            }
            PotentialSpec::Modes { modes } => {
                let m: Vec<(i64, Complex64)> = modes.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect();
                TrigPotential::from_modes(&m)
                    .map(Potential::Trig)
                    .map_err(|e| CliError::Config(format!("potential.modes: {e}")))
            }
            PotentialSpec::Geometric { lambda, ratio } => AnalyticPotential::geometric(*lambda, *ratio)
                .map(Potential::Analytic)
                .map_err(|e| CliError::Config(format!("potential.ratio: {e}"))),
        }
    }
}

/// Energy axis: explicit values, a uniform grid, or the energies where the
/// IDS takes given values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyGrid {
    Values(Vec<f64>),
    Linspace { lo: f64, hi: f64, n: usize },
    Ids(Vec<f64>),
}

/// Parameters shared by the tasks; each task reads the fields it needs and
/// falls back to its own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<EnergyGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eps: Option<usize>,
    /// Continued-fraction depth K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Truncation size for IDS tables and eigenvector probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<CenterOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<DiophantineWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugation: Option<ConjugationOptions>,
    /// Exterior index for `dominated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Truncation degrees for `truncation-study`, or the degree used to
    /// turn an analytic potential into a polynomial for dual tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<usize>>,
    /// Half-widths for `holder`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Energy step of the IDS sweep for `holder`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    /// Half-width of the energy window for `localize`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_width: Option<f64>,
    /// Also compare N(E) with 1 - 2 rho(E) in `ids`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_check: Option<bool>,
    /// Site count of the direct diagonalization in `bloch`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_size: Option<usize>,
    /// Task mapped over the energy axis by `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_task: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub potential: PotentialSpec,
    /// `golden`, `silver`, `liouville:<c>` or a decimal in (0,1).
    #[serde(default = "default_alpha")]
    pub alpha: String,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_alpha() -> String {
    "golden".into()
}

pub const DEFAULT_DEPTH: usize = 24;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !TASKS.contains(&self.task.as_str()) {
            return Err(CliError::Config(format!("task: unknown task '{}'", self.task)));
        }
        if self.task == "sweep" {
            match self.params.sweep_task.as_deref() {
                None => return Err(CliError::Config("params.sweep_task: required for sweep".into())),
                Some("sweep") => return Err(CliError::Config("params.sweep_task: sweeps do not nest".into())),
                Some(t) if !TASKS.contains(&t) => {
                    return Err(CliError::Config(format!("params.sweep_task: unknown task '{t}'")))
                }
                _ => {}
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs: must be positive".into()));
        }
        self.potential.build()?;
        self.frequency()?;
        Ok(())
    }

    /// Continued fraction of alpha. Liouville-type expansions that overflow
    /// are cut at the deepest representable depth.
    pub fn frequency(&self) -> Result<FrequencyProfile, CliError> {
        let mut k = self.params.depth.unwrap_or(DEFAULT_DEPTH);
        loop {
            match arith::parse_alpha(&self.alpha, k) {
                Ok(p) => return Ok(p),
                Err(Error::Overflow { depth }) if depth > 1 && depth <= k => k = depth - 1,
                Err(e) => return Err(CliError::Config(format!("alpha: {e}"))),
            }
        }
    }

    /// The part of the config that determines the result.
    pub fn content(&self) -> serde_json::Value {
        serde_json::json!({
            "task": self.task,
            "potential": self.potential,
            "alpha": self.alpha,
            "params": self.params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = r#"{"task":"jensen","potential":{"kind":"amo","lambda":2.0},
            "params":{"energies":{"ids":[0.5]},"eps_max":0.25,"lyapunov":{"horizon":1000,"segments":4,"tol":0.001,"cap":4000}}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.alpha, "golden");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_json(r#"{"task":"lyap","potential":{"kind":"amo","lamda":2.0}}"#).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
        let err = RunConfig::from_json(r#"{"task":"lyap","potential":{"kind":"amo","lambda":2.0},"params":{"sise":3}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("sise"), "{err}");
    }

    #[test]
    fn liouville_depth_is_cut() {
        let cfg = RunConfig::from_json(r#"{"task":"freq","potential":{"kind":"amo","lambda":1.05},"alpha":"liouville:0.5"}"#)
            .unwrap();
        let p = cfg.frequency().unwrap();
        assert_eq!(p.partial_quotients[..3], [2, 3, 33]);
    }
}
