//! Violation time and survival versus grid-forming inverter size.
//!
//! cargo run --release --example size_sweep [START:STOP:STEP]

use dacgrid::cli::parse_values;
use dacgrid::engine::sweep::size_sweep;
use dacgrid::scenario::load_bundled;

fn main() {
    let spec = std::env::args().nth(1).unwrap_or_else(|| "40:100:5".into());
    let sizes = parse_values(&spec).expect("size list");
    let doc = load_bundled("large_disturbance").unwrap();
    let rows = size_sweep(&doc, "gfm1.s_inv", &sizes).expect("sweep");

    println!("{:>8} {:>12} {:>12} {:>10} {:>10}", "kVA", "viol. on", "viol. off", "on", "off");
    let state = |c: bool| if c { "collapse" } else { "ok" };
    for r in &rows {
        println!(
            "{:>8} {:>12.2} {:>12.2} {:>10} {:>10}",
            r.value,
            r.dac_on.violation_time,
            r.dac_off.violation_time,
            state(r.dac_on.collapsed),
            state(r.dac_off.collapsed)
        );
    }
}
