//! TOML run configuration. Every section is optional and falls back to the
//! desk defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use robustbf::balancing::{BisectionConfig, UpperBound};
use robustbf::experiments::{BenchSpec, LayoutConfig, Method, Scenario, SweepSpec, SweptParameter};
use robustbf::robust_socp::{SocpOptions, StackedMode};
use robustbf::uncertainty::NormKind;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: String,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub layout: LayoutSection,
    #[serde(default)]
    pub uncertainty: UncertaintySection,
    #[serde(default)]
    pub bisection: BisectionSection,
    #[serde(default)]
    pub socp: SocpSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub pe: PeSection,
    #[serde(default)]
    pub bench: BenchSection,
}

fn default_method() -> String {
    "socp".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub power_db: f64,
    pub noise_var: f64,
    pub weights: Option<Vec<f64>>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            num_cells: 2,
            users_per_cell: 2,
            antennas: 8,
            power_db: 5.0,
            noise_var: 1.0,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutSection {
    pub cell_diameter: f64,
    pub min_distance: f64,
    pub pathloss_exponent: f64,
    pub shadow_std_db: f64,
    pub use_large_scale: bool,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let d = LayoutConfig::default();
        Self {
            cell_diameter: d.cell_diameter,
            min_distance: d.min_distance,
            pathloss_exponent: d.pathloss_exponent,
            shadow_std_db: d.shadow_std_db,
            use_large_scale: d.use_large_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintySection {
    pub norm: String,
    pub rho: f64,
    pub design_divisor: f64,
}

impl Default for UncertaintySection {
    fn default() -> Self {
        Self {
            norm: "l2".into(),
            rho: 0.4,
            design_divisor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UpperBoundValue {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BisectionSection {
    pub t_lo: f64,
    pub t_hi: UpperBoundValue,
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for BisectionSection {
    fn default() -> Self {
        let d = BisectionConfig::default();
        Self {
            t_lo: d.t_lo,
            t_hi: UpperBoundValue::Keyword("auto".into()),
            eps: d.eps,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocpSection {
    pub stacked: String,
}

impl Default for SocpSection {
    fn default() -> Self {
        Self { stacked: "auto".into() }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// Channel draw index.
    pub trial: usize,
    pub pe_samples: usize,
    pub timings: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    pub methods: Vec<String>,
    pub trials: usize,
    pub pe_samples: usize,
    pub timings: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: "rho".into(),
            values: vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            methods: vec!["nonrobust".into(), "socp".into(), "sdp".into()],
            trials: 200,
            pe_samples: 10_000,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeSection {
    pub methods: Vec<String>,
    pub trials: usize,
    pub samples: usize,
}

impl Default for PeSection {
    fn default() -> Self {
        Self {
            methods: vec!["nonrobust".into(), "socp".into()],
            trials: 20,
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub methods: Vec<String>,
    pub antennas: Vec<usize>,
    pub trials: usize,
    pub time_budget_s: Option<f64>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            methods: vec!["socp".into(), "sdp".into()],
            antennas: vec![4, 8, 16],
            trials: 3,
            time_budget_s: None,
        }
    }
}

/// Configuration problem, reported with exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cli: invalid config: {}", self.0)
    }
}

impl From<robustbf::Error> for ConfigError {
    fn from(e: robustbf::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(e.message().to_string() + &span_hint(&e, text)))
}

fn span_hint(e: &toml::de::Error, text: &str) -> String {
    match e.span() {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

fn methods(names: &[String], key: &str) -> Result<Vec<Method>, ConfigError> {
    if names.is_empty() {
        return Err(ConfigError(format!("{key} must not be empty")));
    }
    names
        .iter()
        .map(|s| s.parse::<Method>().map_err(|e| ConfigError(format!("{key}: {e}"))))
        .collect()
}

impl RunConfig {
    pub fn method(&self) -> Result<Method, ConfigError> {
        self.method.parse().map_err(|e: robustbf::Error| ConfigError(format!("method: {e}")))
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let n = &self.network;
        let l = &self.layout;
        let norm: NormKind = self
            .uncertainty
            .norm
            .parse()
            .map_err(|e: robustbf::Error| ConfigError(format!("uncertainty.norm: {e}")))?;
        let t_hi = match &self.bisection.t_hi {
            UpperBoundValue::Value(v) => UpperBound::Value(*v),
            UpperBoundValue::Keyword(k) if k == "auto" => UpperBound::Auto,
            UpperBoundValue::Keyword(k) => {
                return Err(ConfigError(format!("bisection.t_hi: expected a number or \"auto\", got \"{k}\"")))
            }
        };
        let stacked = match self.socp.stacked.as_str() {
            "auto" => StackedMode::Auto,
            "never" => StackedMode::Never,
            other => return Err(ConfigError(format!("socp.stacked: expected \"auto\" or \"never\", got \"{other}\""))),
        };
        let s = Scenario {
            num_cells: n.num_cells,
            users_per_cell: n.users_per_cell,
            antennas: n.antennas,
            power_db: n.power_db,
            noise_var: n.noise_var,
            weights: n.weights.clone(),
            layout: LayoutConfig {
                cell_diameter: l.cell_diameter,
                min_distance: l.min_distance,
                pathloss_exponent: l.pathloss_exponent,
                shadow_std_db: l.shadow_std_db,
                use_large_scale: l.use_large_scale,
            },
            norm,
            rho: self.uncertainty.rho,
            design_divisor: self.uncertainty.design_divisor,
            bisection: BisectionConfig {
                t_lo: self.bisection.t_lo,
                t_hi,
                eps: self.bisection.eps,
                max_iters: self.bisection.max_iters,
            },
            socp: SocpOptions { stacked },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let sw = &self.sweep;
        let parameter: SweptParameter = sw
            .parameter
            .parse()
            .map_err(|e: robustbf::Error| ConfigError(format!("sweep.parameter: {e}")))?;
        if sw.values.is_empty() {
            return Err(ConfigError("sweep.values must not be empty".into()));
        }
        let mut spec = SweepSpec::new(parameter, sw.values.clone(), methods(&sw.methods, "sweep.methods")?);
        spec.trials = sw.trials;
        spec.pe_samples = sw.pe_samples;
        spec.seed = self.seed;
        spec.timings = sw.timings;
        spec.validate()?;
        Ok(spec)
    }

    /// PE runs are a one-value sweep at the configured radius.
    pub fn pe_spec(&self) -> Result<SweepSpec, ConfigError> {
        if self.pe.samples == 0 {
            return Err(ConfigError("pe.samples must be positive".into()));
        }
        let mut spec = SweepSpec::new(
            SweptParameter::Rho,
            vec![self.uncertainty.rho],
            methods(&self.pe.methods, "pe.methods")?,
        );
        spec.trials = self.pe.trials;
        spec.pe_samples = self.pe.samples;
        spec.seed = self.seed;
        spec.validate()?;
        Ok(spec)
    }

    pub fn bench_spec(&self) -> Result<BenchSpec, ConfigError> {
        let b = &self.bench;
        let mut spec = BenchSpec::new(methods(&b.methods, "bench.methods")?, b.antennas.clone());
        spec.trials = b.trials;
        spec.seed = self.seed;
        spec.time_budget = match b.time_budget_s {
            Some(s) if !(s > 0.0) || !s.is_finite() => {
                return Err(ConfigError("bench.time_budget_s must be positive".into()))
            }
            Some(s) => Some(Duration::from_secs_f64(s)),
            None => None,
        };
        spec.validate()?;
        Ok(spec)
    }
}
