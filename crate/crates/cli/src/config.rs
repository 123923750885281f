//! The pipeline config file (TOML). Relative paths resolve against the
//! directory containing the config file.

use std::path::{Path, PathBuf};

use orchard_sim::basetree::SynthParams;
use orchard_sim::panel::{PanelParams, SamplingMode};
use orchard_sim::treegen::GenParams;
use orchard_sim::vls::ScannerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Every random stream is derived from this; there is no default.
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Required by `voxelize`.
    pub voxel_size: Option<f64>,
    #[serde(default)]
    pub library: LibraryConfig,
    #[serde(default)]
    pub trees: TreesConfig,
    #[serde(default)]
    pub panels: PanelsConfig,
    /// The resolution ladder: one scanned dataset per entry.
    #[serde(default)]
    pub scanner: Vec<ScannerConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    /// Use an existing library file instead of the one `gen-base` writes.
    pub path: Option<PathBuf>,
    pub n_trunks: usize,
    pub n_branches: usize,
    pub synth: SynthParams,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig { path: None, n_trunks: 5, n_branches: 40, synth: SynthParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreesConfig {
    pub count: usize,
    pub params: GenParams,
}

impl Default for TreesConfig {
    fn default() -> Self {
        TreesConfig { count: 100, params: GenParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelsConfig {
    pub count: usize,
    pub sampling: SamplingMode,
    pub params: PanelParams,
    /// Points per m² for the surface-sampled panel clouds.
    pub surface_density: f64,
    /// Sides per tube ring when meshing panels for scanning.
    pub tube_sides: usize,
}

impl Default for PanelsConfig {
    fn default() -> Self {
        PanelsConfig {
            count: 10,
            sampling: SamplingMode::WithoutReplacement,
            params: PanelParams::default(),
            surface_density: 2000.0,
            tube_sides: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// `surface` or `scan_<resolution>`.
    pub dataset: String,
    /// Holds `panel_NNNN.pred` files.
    pub predictions_dir: PathBuf,
    pub min_instance_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { dataset: "surface".into(), predictions_dir: PathBuf::from("predictions"), min_instance_points: 0 }
    }
}

/// A parsed config together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
    /// Where outputs go (already resolved).
    pub output_dir: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// sha256 of the canonical JSON form of the recipe. The output location
    /// is not part of the recipe, so it is left out.
    pub fn config_hash(&self) -> String {
        let mut c = self.config.clone();
        c.output_dir = PathBuf::new();
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Name of the dataset a scanner entry produces.
pub fn scan_dataset_name(cfg: &ScannerConfig) -> String {
    format!("scan_{}", cfg.resolution_deg)
}

pub fn load(path: &Path, seed: Option<u64>, output_dir: Option<&Path>) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut config: PipelineConfig =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    validate(&config)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base_dir = if base_dir.as_os_str().is_empty() { PathBuf::from(".") } else { base_dir };
    let output_dir = match output_dir {
        Some(o) => o.to_path_buf(),
        None => {
            if config.output_dir.is_absolute() {
                config.output_dir.clone()
            } else {
                base_dir.join(&config.output_dir)
            }
        }
    };
    Ok(Loaded { config, base_dir, output_dir })
}

fn validate(c: &PipelineConfig) -> Result<(), CliError> {
    c.library.synth.validate().map_err(|e| CliError::config(e.to_string()))?;
    if c.library.n_trunks == 0 || c.library.n_branches == 0 {
        return Err(CliError::config("library.n_trunks and library.n_branches must be >= 1"));
    }
    c.trees.params.validate().map_err(|e| CliError::config(e.to_string()))?;
    c.panels.params.validate().map_err(|e| CliError::config(e.to_string()))?;
    if !(c.panels.surface_density > 0.0 && c.panels.surface_density.is_finite()) {
        return Err(CliError::config("panels.surface_density must be > 0"));
    }
    if c.panels.tube_sides < 6 {
        return Err(CliError::config("panels.tube_sides must be >= 6"));
    }
    if let Some(v) = c.voxel_size {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(format!("invalid voxel size {v}")));
        }
    }
    let mut names = std::collections::BTreeSet::new();
    for (i, s) in c.scanner.iter().enumerate() {
        s.validate().map_err(|e| CliError::config(format!("scanner[{i}]: {e}")))?;
        if !names.insert(scan_dataset_name(s)) {
            return Err(CliError::config(format!("scanner[{i}]: duplicate resolution {}", s.resolution_deg)));
        }
    }
    Ok(())
}
