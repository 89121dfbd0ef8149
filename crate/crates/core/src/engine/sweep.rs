//! Parameter sweeps with and without the safety controller.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, EngineError};
use crate::scenario::{set_param, ParamError, ScenarioDoc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub violation_time: f64,
    pub nadir: f64,
    pub collapsed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub dac_on: RunSummary,
    pub dac_off: RunSummary,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("run with {param} = {value} failed: {source}")]
    Run {
        param: String,
        value: f64,
        #[source]
        source: EngineError,
    },
}

/// One run per `(value, controller on/off)`. Runs execute in parallel; rows
/// come back in the order of `values`.
pub fn size_sweep(doc: &ScenarioDoc, param: &str, values: &[f64]) -> Result<Vec<SweepRow>, SweepError> {
    let jobs: Vec<(f64, bool, ScenarioDoc)> = values
        .iter()
        .flat_map(|&v| [(v, true), (v, false)])
        .map(|(v, on)| {
            let mut d = set_param(doc, param, v)?;
            d.dac.enabled = on;
            Ok((v, on, d))
        })
        .collect::<Result<_, ParamError>>()?;

    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|(v, _, d)| {
            let out = run_scenario(d).map_err(|source| SweepError::Run {
                param: param.to_string(),
                value: *v,
                source,
            })?;
            Ok(RunSummary {
                violation_time: out.metrics.violation_time,
                nadir: out.metrics.nadir,
                collapsed: out.metrics.collapsed,
            })
        })
        .collect::<Result<_, SweepError>>()?;

    Ok(values
        .iter()
        .zip(results.chunks_exact(2))
        .map(|(&value, pair)| SweepRow {
            value,
            dac_on: pair[0],
            dac_off: pair[1],
        })
        .collect())
}

/// Sweep table as CSV with a fixed column order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "value,dac_on_violation_time,dac_off_violation_time,dac_on_collapsed,dac_off_collapsed\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.value,
            r.dac_on.violation_time,
            r.dac_off.violation_time,
            u8::from(r.dac_on.collapsed),
            u8::from(r.dac_off.collapsed)
        ));
    }
    out
}
