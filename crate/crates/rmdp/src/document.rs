//! On-disk document formats: instances, policies, reports and CSV tables.
//!
//! Everything is JSON-shaped, diff-able and byte-deterministic: struct
//! field order is fixed and floats render via the shortest round-trip
//! form. The instance document is the unit every CLI subcommand consumes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamic::DynamicSolution;
use crate::error::{Result, RmdpError};
use crate::generators::InfiniteHorizonInstance;
use crate::instance::{AmbiguitySet, FiniteHorizonMdp, Kernel, PolicyMd, PolicyMr, RobustInstance, StageShape};
use crate::solvers::TraceRow;

/// JSON schema of a finite-horizon robust instance.
///
/// `costs[t][s][a]` and `kernels[k][t][s][a]` (a probability vector over
/// stage-`t+1` states) with `kernels[k]` covering stages `0..horizon-1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub horizon: usize,
    pub stages: Vec<StageShape>,
    pub costs: Vec<Vec<Vec<f64>>>,
    pub kernels: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    pub initial_state: usize,
}

impl InstanceDoc {
    pub fn from_instance(instance: &RobustInstance) -> Self {
        InstanceDoc {
            horizon: instance.horizon(),
            stages: instance.mdp.stages.clone(),
            costs: instance.mdp.cost.clone(),
            kernels: instance
                .ambiguity
                .kernels
                .iter()
                .map(|k| k.trans.clone())
                .collect(),
            initial_state: instance.initial_state,
        }
    }

    pub fn into_instance(self) -> Result<RobustInstance> {
        if self.horizon != self.stages.len() {
            return Err(RmdpError::InvalidArgument(format!(
                "document horizon {} disagrees with {} stage entries",
                self.horizon,
                self.stages.len()
            )));
        }
        Ok(RobustInstance {
            mdp: FiniteHorizonMdp {
                stages: self.stages,
                cost: self.costs,
            },
            ambiguity: AmbiguitySet {
                kernels: self.kernels.into_iter().map(|trans| Kernel { trans }).collect(),
            },
            initial_state: self.initial_state,
        })
    }
}

/// JSON schema of a discounted stationary instance (the sink embedding).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfiniteInstanceDoc {
    pub gamma: f64,
    pub num_states: usize,
    pub num_actions: Vec<usize>,
    pub costs: Vec<Vec<f64>>,
    pub kernels: Vec<Vec<Vec<Vec<f64>>>>,
    pub stage_offsets: Vec<usize>,
    pub sink_state: usize,
    pub initial_state: usize,
}

impl InfiniteInstanceDoc {
    pub fn from_instance(inst: &InfiniteHorizonInstance) -> Self {
        InfiniteInstanceDoc {
            gamma: inst.gamma,
            num_states: inst.num_states(),
            num_actions: inst.num_actions.clone(),
            costs: inst.cost.clone(),
            kernels: inst.kernels.clone(),
            stage_offsets: inst.stage_offsets.clone(),
            sink_state: inst.sink,
            initial_state: inst.initial_state,
        }
    }

    pub fn into_instance(self) -> Result<InfiniteHorizonInstance> {
        if self.num_states != self.num_actions.len() {
            return Err(RmdpError::InvalidArgument(format!(
                "document num_states {} disagrees with {} action entries",
                self.num_states,
                self.num_actions.len()
            )));
        }
        Ok(InfiniteHorizonInstance {
            num_actions: self.num_actions,
            cost: self.costs,
            kernels: self.kernels,
            gamma: self.gamma,
            stage_offsets: self.stage_offsets,
            sink: self.sink_state,
            initial_state: self.initial_state,
        })
    }
}

/// Either kind of instance document, detected from the field shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyInstanceDoc {
    Finite(InstanceDoc),
    Infinite(InfiniteInstanceDoc),
}

/// A policy document: deterministic, randomized, or stationary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PolicyDoc {
    #[serde(rename = "md")]
    Md { act: Vec<Vec<usize>> },
    #[serde(rename = "mr")]
    Mr { dist: Vec<Vec<Vec<f64>>> },
    #[serde(rename = "stationary")]
    Stationary { dist: Vec<Vec<f64>> },
}

impl PolicyDoc {
    pub fn from_md(policy: &PolicyMd) -> Self {
        PolicyDoc::Md { act: policy.act.clone() }
    }

    pub fn from_mr(policy: &PolicyMr) -> Self {
        PolicyDoc::Mr { dist: policy.dist.clone() }
    }
}

fn parse_error(e: serde_json::Error) -> RmdpError {
    RmdpError::InvalidArgument(format!("document parse failure: {e}"))
}

/// Render any serializable document as pretty JSON with a trailing newline.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serialization cannot fail");
    s.push('\n');
    s
}

/// Parse a finite-horizon instance document.
pub fn parse_instance(text: &str) -> Result<RobustInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(parse_error)?;
    doc.into_instance()
}

/// Parse either instance flavor.
pub fn parse_any_instance(text: &str) -> Result<AnyInstanceDoc> {
    serde_json::from_str(text).map_err(parse_error)
}

/// Parse a policy document.
pub fn parse_policy(text: &str) -> Result<PolicyDoc> {
    serde_json::from_str(text).map_err(parse_error)
}

pub fn render_instance(instance: &RobustInstance) -> String {
    render_json(&InstanceDoc::from_instance(instance))
}

pub fn render_infinite_instance(inst: &InfiniteHorizonInstance) -> String {
    render_json(&InfiniteInstanceDoc::from_instance(inst))
}

/// Hex SHA-256 of a document's bytes, used as the manifest input digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Subgradient trace as CSV: `iteration,robust_value,worst_kernel_index`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,robust_value,worst_kernel_index\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{}\n",
            row.iteration, row.robust_value, row.worst_kernel_index
        ));
    }
    out
}

/// Per-stage value tables as CSV: `stage,state,value`.
pub fn values_csv(solution: &DynamicSolution) -> String {
    let mut out = String::from("stage,state,value\n");
    for (t, stage) in solution.values.iter().enumerate() {
        for (s, v) in stage.iter().enumerate() {
            out.push_str(&format!("{t},{s},{v}\n"));
        }
    }
    out
}
