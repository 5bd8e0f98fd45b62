//! Spiking activity, perturbation distances, FLOP and energy models, and
//! evaluation reports.

mod activity;
mod checklist;
mod distance;
mod energy;
mod evaluate;

pub use activity::{profile, spiking_activity, ActivityReport, LayerActivityRecord};
pub use checklist::{obfuscation_checklist, ChecklistConfig, ChecklistRow};
pub use distance::{perturbation_distance, spike_pd};
pub use energy::{energy, energy_of, flops, layer_report, EnergyConstants, EnergyScheme, LayerFlops, LayerReport, Precision};
pub use evaluate::{delta, evaluate, EvalReport, PdStats};
