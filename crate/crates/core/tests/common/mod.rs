#![allow(dead_code)]

use dacgrid::scenario::{parse_and_validate, ScenarioDoc};
use serde_json::{json, Value};

/// One grid-forming inverter feeding a single load over one line.
///
/// The inverter rating equals the network base, so `load` is also the
/// inverter's per-unit output.
pub fn single_gfm(load: f64, p_set: f64, omega_init: f64, gfm: Value, dac: Value, t_end: f64) -> ScenarioDoc {
    let mut dev = json!({
        "kind": "gfm", "id": "gfm1", "bus": 1, "s_inv": 100.0,
        "m_p": 1.0, "tau": 0.05, "p_set": p_set, "omega_init": omega_init
    });
    for (k, v) in gfm.as_object().into_iter().flatten() {
        dev[k] = v.clone();
    }
    let doc = json!({
        "name": "single_gfm",
        "sim": { "t_end": t_end, "dt": 1e-3, "output_stride": 1 },
        "network": {
            "base_kva": 100.0,
            "buses": [1, 2],
            "lines": [{ "id": "l12", "from": 1, "to": 2, "b": 10.0 }],
            "loads": [{ "bus": 2, "p": load }]
        },
        "devices": [dev],
        "dac": dac,
        "metrics": { "monitor_bus": 1 }
    });
    parse_and_validate(&doc.to_string())
        .unwrap_or_else(|e| panic!("test scenario rejected: {e}"))
        .doc
}

/// Classic fourth-order Runge-Kutta on a scalar ODE.
pub fn rk4_scalar(f: impl Fn(f64) -> f64, x0: f64, h: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(x);
    }
    out
}
