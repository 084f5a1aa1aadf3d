//! Declarative experiment configs and the run/validate entry points used by
//! the `spinflop` binary.
//!
//! One JSON file describes one experiment. Parsing fills every default, and
//! the fully resolved config is written next to the outputs, so a run
//! directory is self-describing: `<output>/<experiment>-<seed>/` holds
//! `config.resolved.json`, `data.csv`, `summary.json` and `meta.json`
//! (timestamps live only in `meta.json`; everything else is byte-stable for
//! a fixed config and seed).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::constraint::{effective_field, verify_cancellation, VisibleSpec};
use crate::couplings::{catalan_field, catalan_partial_sum, CouplingModel, Family, TWO_CATALAN};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::groundstate::{ground_pair, DescentOptions, GroundStateResult};
use crate::lattice::build_box;
use crate::probes::{discontinuity_gap, spectral_gap_contrast, spinflop_histogram, GapProbe};
use crate::sampler::{sample_observable, DressingKind, McParams, Observable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FieldMap,
    CatalanCheck,
    GroundState,
    Sample,
    Histogram,
    GapProbe,
    SpectralGap,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::FieldMap => "field-map",
            ExperimentKind::CatalanCheck => "catalan-check",
            ExperimentKind::GroundState => "ground-state",
            ExperimentKind::Sample => "sample",
            ExperimentKind::Histogram => "histogram",
            ExperimentKind::GapProbe => "gap-probe",
            ExperimentKind::SpectralGap => "spectral-gap",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct ModelConfig {
    pub family: Family,
    pub j: f64,
    pub truncation_radius: i64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: Family::NearestNeighbor,
            j: 1.0,
            truncation_radius: 64,
        }
    }
}

impl ModelConfig {
    pub fn coupling(&self) -> Result<CouplingModel> {
        CouplingModel::new(self.family, self.j, self.truncation_radius)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct GeometryConfig {
    pub dimension: usize,
    pub half_extent: i64,
    pub annulus_radii: Vec<i64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            dimension: 2,
            half_extent: 8,
            annulus_radii: vec![8, 12, 16],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct SampleConfig {
    pub dressing: DressingKind,
    pub observable: Observable,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            dressing: DressingKind::Free,
            observable: Observable::MewDensity,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct HistogramConfig {
    pub bins: usize,
    pub chains: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig { bins: 41, chains: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct GapConfig {
    pub betas: Vec<f64>,
    pub delta: f64,
    pub margin: i64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            betas: vec![5.0, 0.1],
            delta: 0.2,
            margin: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct CatalanConfig {
    pub tolerance: f64,
    pub radius: i64,
}

impl Default for CatalanConfig {
    fn default() -> Self {
        CatalanConfig {
            tolerance: 1e-9,
            radius: 1_000_000,
        }
    }
}

/// One experiment, fully described. Unknown fields are rejected and every
/// omitted field takes its default, so a parsed config is already resolved.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub mc: McParams,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub histogram: HistogramConfig,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub catalan: CatalanConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    /// All violated preconditions, empty when runnable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.model.j.is_nan() || self.model.j < 0.0 {
            v.push(format!("model.j must be nonnegative, got {}", self.model.j));
        }
        if self.model.truncation_radius < 1 {
            v.push(format!(
                "model.truncationRadius must be positive, got {}",
                self.model.truncation_radius
            ));
        }
        if self.geometry.dimension != 1 && self.geometry.dimension != 2 {
            v.push(format!(
                "geometry.dimension must be 1 or 2, got {}",
                self.geometry.dimension
            ));
        }
        if self.geometry.half_extent < 4 || self.geometry.half_extent % 4 != 0 {
            v.push(format!(
                "geometry.halfExtent must be a positive multiple of 4, got {}",
                self.geometry.half_extent
            ));
        }
        if let Ok(coupling) = self.model.coupling() {
            if coupling.check_dimension(self.geometry.dimension).is_err() {
                v.push(format!(
                    "model.family {} does not apply in dimension {}",
                    self.model.family, self.geometry.dimension
                ));
            }
        }
        if let Err(e) = self.mc.validate() {
            v.push(e.to_string());
        }
        match self.experiment {
            ExperimentKind::GapProbe => {
                let radii = &self.geometry.annulus_radii;
                if radii.is_empty()
                    || !radii.windows(2).all(|w| w[0] < w[1])
                    || !radii.iter().all(|&r| r >= 4 && r % 4 == 0)
                {
                    v.push(format!(
                        "geometry.annulusRadii must be increasing multiples of 4, got {radii:?}"
                    ));
                }
                if self.gap.delta.is_nan() || self.gap.delta <= 0.0 {
                    v.push(format!("gap.delta must be positive, got {}", self.gap.delta));
                }
                if self.gap.margin < 4 || self.gap.margin % 4 != 0 {
                    v.push(format!(
                        "gap.margin must be a positive multiple of 4, got {}",
                        self.gap.margin
                    ));
                }
                if self.gap.betas.is_empty() || self.gap.betas.iter().any(|b| b.is_nan() || *b < 0.0) {
                    v.push("gap.betas must be nonnegative and nonempty".into());
                }
            }
            ExperimentKind::Histogram => {
                if self.histogram.bins < 3 {
                    v.push(format!("histogram.bins must be >= 3, got {}", self.histogram.bins));
                }
                if self.histogram.chains == 0 {
                    v.push("histogram.chains must be positive".into());
                }
            }
            ExperimentKind::CatalanCheck => {
                if self.catalan.tolerance.is_nan() || self.catalan.tolerance <= 0.0 {
                    v.push(format!(
                        "catalan.tolerance must be positive, got {}",
                        self.catalan.tolerance
                    ));
                }
                if self.catalan.radius < 4 {
                    v.push(format!(
                        "catalan.radius must be >= 4, got {}",
                        self.catalan.radius
                    ));
                }
            }
            _ => {}
        }
        v
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub outdir: Option<PathBuf>,
    /// Expected experiment kind (the chosen subcommand).
    pub expect: Option<ExperimentKind>,
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: serde_json::Value,
}

/// Validate a config file; Ok(violations) even when nonempty.
pub fn validate(path: &Path) -> Result<Vec<String>> {
    Ok(ExperimentConfig::load(path)?.violations())
}

/// Load, validate and execute a config, writing all outputs atomically.
/// `SPINFLOP_SEED` overrides the config seed when set.
pub fn run(path: &Path, overrides: &Overrides) -> Result<RunOutput> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(kind) = overrides.expect {
        if kind != config.experiment {
            return Err(Error::Config(format!(
                "config declares experiment '{}' but the '{}' subcommand was invoked",
                config.experiment, kind
            )));
        }
    }
    if let Ok(seed) = std::env::var("SPINFLOP_SEED") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Config(format!("SPINFLOP_SEED is not a u64: {seed}")))?;
        config.mc.seed = seed;
    }
    if let Some(outdir) = &overrides.outdir {
        config.output = outdir.clone();
    }
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    run_resolved(&config)
}

pub fn run_resolved(config: &ExperimentConfig) -> Result<RunOutput> {
    let dir = config
        .output
        .join(format!("{}-{}", config.experiment, config.mc.seed));
    fs::create_dir_all(&dir)?;

    let (csv, mut summary) = execute(config)?;
    summary["experiment"] = json!(config.experiment);
    summary["version"] = json!(VERSION);
    summary["seed"] = json!(config.mc.seed);

    write_atomic(&dir.join("config.resolved.json"), &pretty(config)?)?;
    write_atomic(&dir.join("data.csv"), &csv)?;
    write_atomic(&dir.join("summary.json"), &pretty(&summary)?)?;
    let meta = json!({
        "version": VERSION,
        "timestampSecs": SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs(),
    });
    write_atomic(&dir.join("meta.json"), &pretty(&meta)?)?;
    Ok(RunOutput { dir, summary })
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn execute(config: &ExperimentConfig) -> Result<(String, serde_json::Value)> {
    let coupling = config.model.coupling()?;
    match config.experiment {
        ExperimentKind::FieldMap => {
            let lattice = build_box(config.geometry.dimension, config.geometry.half_extent)?;
            let map = effective_field(lattice, &coupling, VisibleSpec::DoublyAlternating)?;
            let mut csv = Vec::new();
            map.write_csv(&mut csv)?;
            let report = verify_cancellation(&map);
            let summary = json!({
                "sites": lattice.site_count(),
                "frozenSites": lattice.frozen_count(),
                "cancellation": {
                    "checked": report.checked,
                    "violations": report.violations.len(),
                    "pass": report.pass(),
                },
            });
            Ok((String::from_utf8(csv).unwrap(), summary))
        }
        ExperimentKind::CatalanCheck => {
            let value = catalan_field(config.catalan.tolerance);
            let lattice_sum = catalan_partial_sum(config.catalan.radius);
            let tail = CouplingModel::long_range_1d(config.model.j, config.catalan.radius)?
                .tail_bound(config.catalan.radius)?;
            let mut csv = String::from("radius,partialSum,error\n");
            let mut r = 4;
            while r <= config.catalan.radius {
                let p = catalan_partial_sum(r);
                csv.push_str(&format!("{r},{p},{}\n", p - TWO_CATALAN));
                r *= 4;
            }
            let summary = json!({
                "value": value,
                "reference": TWO_CATALAN,
                "diff": value - TWO_CATALAN,
                "tolerance": config.catalan.tolerance,
                "latticeSum": lattice_sum,
                "latticeSumDiff": lattice_sum - TWO_CATALAN,
                "latticeSumRadius": config.catalan.radius,
                "tailBound": tail,
            });
            Ok((csv, summary))
        }
        ExperimentKind::GroundState => {
            let lattice = build_box(config.geometry.dimension, config.geometry.half_extent)?;
            let model = EnergyModel::constrained(lattice, coupling, VisibleSpec::DoublyAlternating)?;
            let pair = ground_pair(&model, &DescentOptions::default())?;
            let mut csv = Vec::new();
            pair.me.config.write_csv(&mut csv)?;
            let scalars = |r: &GroundStateResult| {
                json!({
                    "energy": r.energy,
                    "gradientNorm": r.gradient_norm,
                    "mEW": r.m_ew,
                    "sweeps": r.sweeps,
                    "converged": r.converged,
                    "degenerateSites": r.degenerate_sites,
                })
            };
            let summary = json!({
                "me": scalars(&pair.me),
                "mw": scalars(&pair.mw),
                "energyRelGap": pair.energy_rel_gap,
                "mewSum": pair.mew_sum,
                "flipDistance": pair.flip_distance,
                "symmetric": pair.symmetric,
                "diagnostics": pair.diagnostics,
            });
            Ok((String::from_utf8(csv).unwrap(), summary))
        }
        ExperimentKind::Sample => {
            let lattice = build_box(config.geometry.dimension, config.geometry.half_extent)?;
            let run = sample_observable(
                lattice,
                coupling,
                config.sample.dressing,
                &config.mc,
                config.sample.observable,
            )?;
            let mut csv = String::from("sweep,observable,value\n");
            for (i, v) in run.stream.iter().enumerate() {
                csv.push_str(&format!("{},{},{v}\n", i + 1, run.observable.name()));
            }
            let summary = json!({
                "observable": run.observable.name(),
                "dressing": config.sample.dressing.label(),
                "stats": run.stats,
                "acceptanceRate": run.acceptance_rate,
                "finalProposalWidth": run.final_proposal_width,
                "mc": run.params,
            });
            Ok((csv, summary))
        }
        ExperimentKind::Histogram => {
            let lattice = build_box(config.geometry.dimension, config.geometry.half_extent)?;
            let report = spinflop_histogram(
                lattice,
                coupling,
                &config.mc,
                config.histogram.chains,
                config.histogram.bins,
            )?;
            let mut csv = String::from("binLow,binHigh,count\n");
            for k in 0..report.bins {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    report.edges[k],
                    report.edges[k + 1],
                    report.counts[k]
                ));
            }
            let summary = serde_json::to_value(&report)?;
            Ok((csv, summary))
        }
        ExperimentKind::GapProbe => {
            let probe = GapProbe {
                dimension: config.geometry.dimension,
                coupling,
                betas: config.gap.betas.clone(),
                radii: config.geometry.annulus_radii.clone(),
                delta: config.gap.delta,
                margin: config.gap.margin,
                mc: config.mc,
            };
            let results = discontinuity_gap(&probe)?;
            let mut csv =
                String::from("beta,radius,dressing,mean,stderr,autocorrTime,nEffective,seed,acceptanceRate\n");
            for r in &results {
                for c in &r.cells {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        c.beta,
                        c.radius,
                        c.dressing,
                        c.stats.mean,
                        c.stats.stderr,
                        c.stats.autocorr_time,
                        c.stats.n_effective,
                        c.seed,
                        c.acceptance_rate
                    ));
                }
            }
            let summary = json!({
                "results": results,
                "mc": config.mc,
                "delta": config.gap.delta,
                "margin": config.gap.margin,
            });
            Ok((csv, summary))
        }
        ExperimentKind::SpectralGap => {
            let report = spectral_gap_contrast(config.model.j, config.geometry.half_extent)?;
            let csv = format!(
                "quantity,value\nlambdaMinConstrained,{}\nlambdaMinUnconstrained,{}\nzeroModeVariance,{}\n",
                report.lambda_min_constrained,
                report.lambda_min_unconstrained,
                report.zero_mode_variance
            );
            let summary = serde_json::to_value(&report)?;
            Ok((csv, summary))
        }
    }
}

/// Reference config for a given experiment, used by `--emit-config` style
/// tooling and tests.
pub fn example_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        experiment: kind,
        model: ModelConfig::default(),
        geometry: GeometryConfig::default(),
        mc: McParams::default(),
        sample: SampleConfig::default(),
        histogram: HistogramConfig::default(),
        gap: GapConfig::default(),
        catalan: CatalanConfig::default(),
        output: default_output(),
    };
    if kind == ExperimentKind::GapProbe {
        config.geometry.half_extent = 16;
        config.mc.sweeps = 100_000;
        config.mc.burnin = 5_000;
        config.mc.beta = 5.0;
    }
    config
}

/// Helper shared by tests: a small field-map config written to disk.
pub fn write_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    write_atomic(path, &pretty(config)?)
}
