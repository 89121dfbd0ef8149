//! Set-point the safety controller hands to the droop loop as frequency
//! moves across and out of the safe band.
//!
//! cargo run --example dac_kernel

use dacgrid::dac::{barrier_eval, dac_compute, DacInputs};
use dacgrid::model::{DacConfig, InverterParams};

fn main() {
    let inv = InverterParams {
        s_inv: 100.0,
        m_p: 3.0,
        tau: 0.05,
        p_min: 0.0,
        p_max: 1.0,
        omega0: 60.0,
        storage: false,
        tau_filter: None,
    };
    let cfg = DacConfig {
        alpha: 50.0,
        ..DacConfig::default()
    };
    let (p_inv, q_inv, p_star) = (0.5, 0.3, 0.4);

    println!("band [{}, {}] Hz, alpha {}, q {}", cfg.omega_min, cfg.omega_max, cfg.alpha, cfg.q);
    println!("p_inv {p_inv}, q_inv {q_inv}, dispatched {p_star}\n");
    println!("{:>8} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}", "f (Hz)", "B_min", "B_max", "p_low", "p_up", "p_set", "mode");
    for i in 0..=16 {
        let omega = 59.6 + 0.05 * i as f64;
        let d = dac_compute(&DacInputs { omega, p_inv, q_inv, p_set_star: p_star }, &inv, &cfg)
            .expect("feasible operating point");
        let (b_min, b_max) = barrier_eval(omega, &cfg);
        println!(
            "{omega:>8.3} {b_min:>9.3} {b_max:>9.3} {:>9.4} {:>9.4} {:>8.4} {:>8}{}",
            d.p_set_low,
            d.p_set_up,
            d.p_set,
            d.active.as_str(),
            if d.clamped { " (capacity)" } else { "" }
        );
    }
}
