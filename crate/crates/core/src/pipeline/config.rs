use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patchwork::{DEFAULT_PATCHES, DEFAULT_SIGMA};
use crate::photometrics::CONDITION_NAMES;
use crate::poissonstitch::DEFAULT_LAMBDA;

/// Which photometric normals drive the mesh refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalSource {
    Diffuse,
    Specular,
}

impl FromStr for NormalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffuse" => Ok(NormalSource::Diffuse),
            "specular" => Ok(NormalSource::Specular),
            other => Err(Error::Argument(format!("unknown normal source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageParams {
    pub patches: usize,
    pub sigma: f64,
    pub lambda: f64,
    /// Defaults to a fraction of the mean cotangent Laplacian row norm.
    pub lambda_screen: Option<f64>,
    /// Cotangent-weight re-linearizations of the refinement.
    pub refine_rounds: usize,
    /// Defaults to 15 px at 1024 px width, scaled.
    pub sigma_low: Option<f64>,
    pub align_iterations: usize,
    pub normal_source: NormalSource,
    pub seed: usize,
    pub fresnel_threshold_deg: f64,
    pub preview: bool,
}

impl Default for StageParams {
    fn default() -> Self {
        StageParams {
            patches: DEFAULT_PATCHES,
            sigma: DEFAULT_SIGMA,
            lambda: DEFAULT_LAMBDA,
            lambda_screen: None,
            refine_rounds: crate::poissonstitch::DEFAULT_REFINE_ROUNDS,
            sigma_low: None,
            align_iterations: 1,
            normal_source: NormalSource::Specular,
            seed: 0,
            fresnel_threshold_deg: crate::poissonstitch::DEFAULT_FRESNEL_THRESHOLD_DEG,
            preview: true,
        }
    }
}

/// Pipeline configuration. Relative paths resolve against the config file's
/// directory. Each view directory holds `camera.txt` and the 14 images
/// `{cross,parallel}_{X,Y,Z,C,Xc,Yc,Zc}.pfm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub base_mesh: PathBuf,
    pub views: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub params: StageParams,
}

pub const CAMERA_FILE: &str = "camera.txt";
pub const POLARIZATION_PREFIXES: [&str; 2] = ["cross", "parallel"];

/// Files a view directory must provide.
pub fn view_input_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![dir.join(CAMERA_FILE)];
    for p in POLARIZATION_PREFIXES {
        for c in CONDITION_NAMES {
            files.push(dir.join(format!("{p}_{c}.pfm")));
        }
    }
    files
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.base_mesh);
        fix(&mut self.output);
        self.views.iter_mut().for_each(fix);
    }

    /// Checks parameter ranges and that every input file exists.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.patches < 1 {
            return Err(Error::Config("patches must be at least 1".into()));
        }
        if !(p.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be non-negative, got {}", p.sigma)));
        }
        if !(p.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", p.lambda)));
        }
        if let Some(l) = p.lambda_screen {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda_screen must be positive, got {l}")));
            }
        }
        if p.refine_rounds < 1 {
            return Err(Error::Config("refine_rounds must be at least 1".into()));
        }
        if let Some(s) = p.sigma_low {
            if !(s > 0.0) {
                return Err(Error::Config(format!("sigma_low must be positive, got {s}")));
            }
        }
        if !(p.fresnel_threshold_deg > 0.0 && p.fresnel_threshold_deg <= 90.0) {
            return Err(Error::Config("fresnel_threshold_deg must be in (0, 90]".into()));
        }
        if self.views.is_empty() {
            return Err(Error::Config("at least one view is required".into()));
        }
        if !self.base_mesh.is_file() {
            return Err(Error::Config(format!("base mesh {} does not exist", self.base_mesh.display())));
        }
        for v in &self.views {
            for f in view_input_files(v) {
                if !f.is_file() {
                    return Err(Error::Config(format!("missing input {}", f.display())));
                }
            }
        }
        let mut names: Vec<String> = self.views.iter().map(|v| view_name(v)).collect();
        names.sort();
        names.dedup();
        if names.len() != self.views.len() {
            return Err(Error::Config("view directories must have distinct names".into()));
        }
        Ok(())
    }
}

pub fn view_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "view".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_params() {
        let cfg = PipelineConfig::from_toml(
            "base_mesh = \"m.ply\"\nviews = [\"v/a\"]\noutput = \"out\"\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(cfg.params, StageParams::default());
        assert_eq!(cfg.base_mesh, Path::new("/data/m.ply"));
        assert_eq!(cfg.views[0], Path::new("/data/v/a"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = PipelineConfig::from_toml(
            "base_mesh = \"m\"\nviews = []\noutput = \"o\"\n[params]\npatchez = 3\n",
            Path::new("."),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig {
            base_mesh: "/a/b.ply".into(),
            views: vec!["/a/v1".into(), "/a/v2".into()],
            output: "/a/out".into(),
            params: StageParams {
                lambda_screen: Some(0.5),
                normal_source: NormalSource::Diffuse,
                ..StageParams::default()
            },
        };
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("/")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn ranges_are_validated_before_paths() {
        let mut cfg = PipelineConfig {
            base_mesh: "/nonexistent.ply".into(),
            views: vec!["/nonexistent".into()],
            output: "/tmp/o".into(),
            params: StageParams::default(),
        };
        cfg.params.lambda = 0.0;
        let e = cfg.validate().unwrap_err();
        assert!(e.to_string().contains("lambda"));
        cfg.params.lambda = 1e-6;
        let e = cfg.validate().unwrap_err();
        assert!(e.to_string().contains("base mesh"));
        assert_eq!(e.exit_code(), 2);
    }
}
