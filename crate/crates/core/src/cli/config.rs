//! Run configuration, parsed from JSON with path-aware error messages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::DumbbellSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h_bulk: f64,
    pub neck_layers: usize,
    /// Uniform refinement levels; one level enables extrapolation in `h`.
    pub refinements: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            h_bulk: 0.05,
            neck_layers: 4,
            refinements: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub k_eigs: usize,
    pub tol: f64,
    pub max_krylov: Option<usize>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k_eigs: 12,
            tol: 1e-6,
            max_krylov: None,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlConfig {
    /// Grid intervals on the neck interval.
    pub nodes: usize,
    pub guard: f64,
}

impl Default for SlConfig {
    fn default() -> Self {
        Self {
            nodes: crate::sturm::DEFAULT_INTERVALS,
            guard: crate::sturm::RESONANCE_GUARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.08, 0.04, 0.02, 0.01],
        }
    }
}

/// Bulk mode `(j, n)` of the rectangle, or its eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub mode: Option<(usize, usize)>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_svg: bool,
    pub emit_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_svg: true,
            emit_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: DumbbellSpec,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sl: SlConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at {pointer}: {message}")]
pub struct ConfigError {
    /// JSON pointer to the offending field (empty for the document root).
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(pointer: &str, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.to_string(),
            message: message.into(),
        }
    }
}

/// Converts a serde path such as `mesh.h_bulk` or `sweep.epsilons[2]` into
/// a JSON pointer.
fn to_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let (name, rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !name.is_empty() {
            out.push('/');
            out.push_str(&name.replace('~', "~0").replace('/', "~1"));
        }
        for idx in rest.split(['[', ']']).filter(|s| !s.is_empty()) {
            out.push('/');
            out.push_str(idx);
        }
    }
    out
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = to_pointer(&e.path().to_string());
            ConfigError::new(&pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.geometry.validate();
        if let Some(first) = problems.first() {
            return Err(ConfigError::new("/geometry", first.clone()));
        }
        let positive = |v: f64, p: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(p, format!("must be positive, got {v}")))
            }
        };
        positive(self.mesh.h_bulk, "/mesh/h_bulk")?;
        if self.mesh.neck_layers < 2 {
            return Err(ConfigError::new("/mesh/neck_layers", "must be at least 2"));
        }
        if self.mesh.refinements > 1 {
            return Err(ConfigError::new("/mesh/refinements", "only 0 or 1 is supported"));
        }
        if self.solver.k_eigs == 0 {
            return Err(ConfigError::new("/solver/k_eigs", "must be positive"));
        }
        positive(self.solver.tol, "/solver/tol")?;
        if self.solver.max_krylov == Some(0) {
            return Err(ConfigError::new("/solver/max_krylov", "must be positive"));
        }
        if self.sl.nodes < 16 || self.sl.nodes % 2 != 0 {
            return Err(ConfigError::new("/sl/nodes", "must be an even number of at least 16"));
        }
        positive(self.sl.guard, "/sl/guard")?;
        if self.sweep.epsilons.is_empty() {
            return Err(ConfigError::new("/sweep/epsilons", "must not be empty"));
        }
        for (i, &e) in self.sweep.epsilons.iter().enumerate() {
            positive(e, &format!("/sweep/epsilons/{i}"))?;
            if i > 0 && !(e < self.sweep.epsilons[i - 1]) {
                return Err(ConfigError::new(
                    &format!("/sweep/epsilons/{i}"),
                    "epsilons must be strictly decreasing",
                ));
            }
            let problems = self.geometry.with_epsilon(e).validate();
            if let Some(first) = problems.first() {
                return Err(ConfigError::new(&format!("/sweep/epsilons/{i}"), first.clone()));
            }
        }
        match (&self.target.mode, self.target.mu) {
            (Some(_), Some(_)) => return Err(ConfigError::new("/target", "give either mode or mu, not both")),
            (None, Some(mu)) if !(mu >= 0.0 && mu.is_finite()) => {
                return Err(ConfigError::new("/target/mu", "must be a finite nonnegative number"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Subset of the configuration that determines the artifact of `command`.
    pub fn cache_subset(&self, command: &str) -> serde_json::Value {
        let mut v = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "geometry": self.geometry,
            "mesh": self.mesh,
        });
        let obj = v.as_object_mut().expect("object literal");
        if matches!(command, "solve" | "sweep" | "verify" | "nodal") {
            obj.insert("solver".into(), serde_json::to_value(&self.solver).expect("serializes"));
        }
        if matches!(command, "sweep" | "verify") {
            obj.insert("sl".into(), serde_json::to_value(&self.sl).expect("serializes"));
            obj.insert("sweep".into(), serde_json::to_value(&self.sweep).expect("serializes"));
            obj.insert("target".into(), serde_json::to_value(&self.target).expect("serializes"));
        }
        if command == "nodal" {
            obj.insert("emit_svg".into(), self.output.emit_svg.into());
        }
        if matches!(command, "sweep" | "verify") {
            obj.insert("emit_csv".into(), self.output.emit_csv.into());
        }
        v
    }
}

/// Configuration of the dumbbell used by both worked examples: rectangles
/// `28^{1/3} × 1` joined at mid-height by a flat neck of length 2.
pub fn example_config() -> RunConfig {
    use crate::geometry::{BulkDomain, NeckProfile};
    RunConfig {
        geometry: DumbbellSpec::new(
            BulkDomain::rectangle_mid(crate::analytic::example_width(), 1.0, 0.25),
            NeckProfile::constant(1.0, 2.0),
            0.05,
        ),
        mesh: MeshConfig::default(),
        solver: SolverConfig::default(),
        sl: SlConfig::default(),
        sweep: SweepConfig::default(),
        target: TargetConfig {
            mode: Some((2, 0)),
            mu: None,
        },
        output: OutputConfig::default(),
    }
}
