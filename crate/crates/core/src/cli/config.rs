use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    /// Leaves per foliation for tractor checks.
    pub leaves: usize,
    /// Points for gluing and real-structure checks.
    pub gluing: usize,
    /// Solved real lines.
    pub lines: usize,
    /// Lines on which `J_D` is evaluated.
    pub jfield: usize,
    /// Lines for the circle-action check (two angles each).
    pub s1: usize,
    /// Random one-forms for the bracket-closure check.
    pub gammas: usize,
    /// Points for holonomy classification.
    pub holonomy: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples {
            leaves: 4,
            gluing: 20,
            lines: 4,
            jfield: 3,
            s1: 2,
            gammas: 20,
            holonomy: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub instance: Option<PathBuf>,
    pub rep: Option<PathBuf>,
    /// Chart for the holonomy command; a built-in hyperkähler chart otherwise.
    pub chart: Option<PathBuf>,
    pub line_tol: f64,
    pub quaternion_tol: f64,
    /// RK4 steps per leaf segment; derived from the domain radius if unset.
    pub ode_steps: Option<usize>,
    /// Radius of the random line targets (base and fiber coordinates).
    pub target_radius: [f64; 2],
    pub nijenhuis_step: f64,
    pub loop_side: f64,
    pub samples: Samples,
    pub seed: u64,
    pub out: PathBuf,
    pub workspace: PathBuf,
    pub jobs: usize,
    /// Record tolerances replacing the defaults, by record name.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            instance: None,
            rep: None,
            chart: None,
            line_tol: 1e-9,
            quaternion_tol: 1e-6,
            ode_steps: None,
            target_radius: [0.2, 0.1],
            nijenhuis_step: 1e-3,
            loop_side: 1e-2,
            samples: Samples::default(),
            seed: 1,
            out: PathBuf::from("out"),
            workspace: PathBuf::from(".cproj-workspace"),
            jobs: 1,
            tolerances: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("line_tol", self.line_tol),
            ("quaternion_tol", self.quaternion_tol),
            ("nijenhuis_step", self.nijenhuis_step),
            ("loop_side", self.loop_side),
            ("target_radius", self.target_radius[0].min(self.target_radius[1])),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some((name, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::InvalidInput(format!("tolerance {name} must be positive, got {v}")));
        }
        if self.ode_steps == Some(0) {
            return Err(Error::InvalidInput("ode_steps must be positive".into()));
        }
        Ok(())
    }

    /// Applies `name=value` tolerance overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (name, value) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected name=value, got \"{o}\"")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad tolerance value in \"{o}\"")))?;
            self.tolerances.insert(name.trim().to_string(), v);
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}
