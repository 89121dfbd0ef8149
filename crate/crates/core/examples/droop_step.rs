//! Droop response of a single grid-forming inverter to a load it was not
//! dispatched for, against the first-order closed form.
//!
//! cargo run --example droop_step

use dacgrid::engine::run_scenario;
use dacgrid::scenario::parse_and_validate;
use serde_json::json;

fn main() {
    let (tau, m_p, p_set, load) = (0.05, 1.0, 0.2, 0.5);
    let doc = json!({
        "name": "droop_step",
        "sim": { "t_end": 0.3, "dt": 1e-3, "output_stride": 25 },
        "network": {
            "base_kva": 100.0,
            "buses": [1, 2],
            "lines": [{ "id": "l12", "from": 1, "to": 2, "b": 10.0 }],
            "loads": [{ "bus": 2, "p": load }]
        },
        "devices": [{
            "kind": "gfm", "id": "gfm1", "bus": 1, "s_inv": 100.0,
            "m_p": m_p, "tau": tau, "p_set": p_set, "omega_init": 60.0
        }],
        "dac": { "enabled": false }
    });
    let doc = parse_and_validate(&doc.to_string()).expect("valid scenario").doc;
    let out = run_scenario(&doc).expect("run");

    let f_ss = 60.0 + m_p * (p_set - load);
    println!("steady state {f_ss} Hz, time constant {tau} s\n");
    println!("{:>6} {:>12} {:>12} {:>10}", "t (s)", "simulated", "closed form", "error");
    for (t, s) in out.trace.device_series("gfm1").unwrap() {
        let exact = f_ss + (60.0 - f_ss) * (-t / tau).exp();
        println!("{t:>6.3} {:>12.8} {exact:>12.8} {:>10.2e}", s.omega, (s.omega - exact).abs());
    }
}
