use encounter::encounter::{meet_probability, IntervalSpec, PairState};
use encounter::mc::{estimate, EstimateOptions, SimConfig};

fn main() {
    let iv = IntervalSpec::unit();
    for &(x1, x2) in &[(0.45, 0.55), (0.3, 0.6)] {
        let s = PairState::new(x1, x2, &iv).unwrap();
        let p = meet_probability(&s, &iv);
        for &dt in &[2e-3, 1e-3] {
            for &bridge in &[false, true] {
                let mut cfg = SimConfig::for_interval(&iv, 1.0, 10_000, 4242).with_dt(&iv, dt);
                cfg.bridge_corrections = bridge;
                let r = estimate(&s, &iv, &cfg, &EstimateOptions::default()).unwrap();
                println!(
                    "({x1},{x2}) dt={dt:.0e} bridge={bridge}: p_hat={:.4} P={p:.4} dev_sigma={:+.2}",
                    r.p_hat,
                    (r.p_hat - p) / r.std_error
                );
            }
        }
    }
}
