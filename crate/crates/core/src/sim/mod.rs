//! Window-by-window execution of converted networks.
//!
//! Two backends share one neuron model (`V(t) = Σ w_j·(t − t_j)⁺`): an exact
//! event solver that finds threshold crossings in closed form, and a
//! discrete integrator sampling `V` on a grid of `steps_per_window` points
//! per window.

mod neuron;
mod run;

pub use neuron::{solve_spike_exact, trace_neuron, MembraneSegment, MembraneTrace};
pub use run::{
    readout_membrane, run_network, simulate_discrete, simulate_layer, write_spike_trace, LayerRun,
    NetworkRun, Readout,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Discrete,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Threshold is infinite before the layer's window, one inside it, and a
    /// spike is forced when the window closes.
    #[default]
    Dynamic,
    /// Threshold one at all times `t >= 0`; neurons may fire early or never.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub steps_per_window: usize,
    pub backend: Backend,
    pub threshold: ThresholdMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps_per_window: 50,
            backend: Backend::Discrete,
            threshold: ThresholdMode::Dynamic,
        }
    }
}

impl SimConfig {
    pub fn exact() -> Self {
        Self {
            backend: Backend::Exact,
            ..Self::default()
        }
    }

    pub fn discrete(steps_per_window: usize) -> Self {
        Self {
            steps_per_window,
            ..Self::default()
        }
    }

    pub fn with_threshold(mut self, mode: ThresholdMode) -> Self {
        self.threshold = mode;
        self
    }

    /// Grid spacing in window units.
    pub fn dt(&self) -> f64 {
        crate::convert::WINDOW / self.steps_per_window as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_window == 0 {
            return Err(Error::Config("steps_per_window must be at least 1".into()));
        }
        Ok(())
    }

    /// Time of global grid point `k`. Window boundaries land exactly on
    /// integers.
    #[inline]
    pub(crate) fn grid_time(&self, k: usize) -> f64 {
        k as f64 / self.steps_per_window as f64 * crate::convert::WINDOW
    }
}
