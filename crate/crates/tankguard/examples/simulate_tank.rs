//! Closed-loop water tank simulation: four-threshold on/off control
//! over the gravity-drained tank, printed as a level trace summary.
//!
//! ```text
//! cargo run -p tankguard --example simulate_tank
//! ```

use tankguard::plant::{self, PlantParams, PlantState, SafetyStatus, Thresholds};

fn main() {
    let params = PlantParams::default();
    let thresholds = Thresholds::default();
    params.validate_against(&thresholds).expect("defaults are consistent");

    let mut state = PlantState::initial();
    let mut min_level = f64::MAX;
    let mut max_level = f64::MIN;
    let mut pump_switches = 0u32;
    let steps = 5_000;

    println!("step   time(s)  level(m)  inflow     outflow    pump valve");
    for step in 1..=steps {
        let pump_before = state.pump;
        state = plant::closed_loop_step(&state, &params, &thresholds);
        if state.pump != pump_before {
            pump_switches += 1;
        }
        min_level = min_level.min(state.level);
        max_level = max_level.max(state.level);
        if step % 500 == 0 {
            println!(
                "{:>5} {:>8.1} {:>9.3}  {:<9.4}  {:<9.4}  {:>4} {:>5}",
                step,
                state.time,
                state.level,
                state.inflow,
                state.outflow,
                u8::from(state.pump),
                u8::from(state.valve),
            );
        }
        assert_eq!(plant::safety_check(state.level, &thresholds), SafetyStatus::Ok);
    }

    println!();
    println!("after {steps} steps:");
    println!("  level range        [{min_level:.3}, {max_level:.3}] m");
    println!(
        "  control band       [{}, {}] m (alarms at {} / {})",
        thresholds.l, thresholds.h, thresholds.ll, thresholds.hh
    );
    println!("  fill/drain cycles  {}", pump_switches / 2);
}
