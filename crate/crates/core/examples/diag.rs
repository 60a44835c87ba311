use cvm_changepoint::power::*;
fn main() {
    // Paper Table 2 cross-checks: Gamma shape drift, alpha=0.05.
    for (b, u, label) in [(5.0, 0.5, "b=5 mid (~65.35)"), (3.0, 0.5, "b=3 mid (~29.25)"), (2.0, 0.5, "b=2 mid (~15.70)"), (5.0, 0.3, "b=5 at 0.3 (~53.07)"), (3.0, 0.3, "b=3 at 0.3 (~22.98)")] {
        let alt = ContiguousAlternative::gamma_shape_drift(b, u).unwrap();
        let p = asymptotic_power(&alt, 0.05, &PowerOptions::default()).unwrap();
        println!("gamma {label}: {:.2}%", 100.0 * p);
    }
    // Table 3: normal sigma drift.
    for (b, u, label) in [(5.0, 0.5, "b=5 mid (~13.33)"), (3.0, 0.5, "b=3 mid (~7.23)"), (2.0, 0.5, "b=2 mid (~5.83)"), (5.0, 0.3, "b=5 at 0.3 (~10.98)")] {
        let alt = ContiguousAlternative::normal_shift_scale(0.0, b, u).unwrap();
        let p = asymptotic_power(&alt, 0.05, &PowerOptions::default()).unwrap();
        println!("normal {label}: {:.2}%", 100.0 * p);
    }
}
