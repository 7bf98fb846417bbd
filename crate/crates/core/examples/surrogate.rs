//! Runs the standard comparison protocol on the synthetic corpus and prints a
//! held-out table.
//!
//! cargo run --release -p prodclass-core --example surrogate [KIND] [CLASSIFIER]
//!
//! The optional arguments are comma-separated substring filters.

use std::time::Instant;

use prodclass::surrogate::Protocol;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let keep = |i: usize, name: &str| args.get(i).is_none_or(|f| f.split(',').any(|f| name.contains(f)));
    let mut protocol = Protocol::default();
    protocol.kinds.retain(|k| keep(0, k.name()));
    protocol.entries.retain(|e| keep(1, &e.base().label()));
    let t0 = Instant::now();
    let prepared = protocol.prepare().unwrap();
    println!("artifacts fitted in {:.1}s", t0.elapsed().as_secs_f64());
    protocol
        .run(&prepared, |r, _, _| {
            let chosen: Vec<String> = r
                .selection
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(p, _)| p.iter().map(|(k, v)| format!("{k}={v}")).collect())
                .unwrap_or_default();
            println!(
                "{:<14} {:<16} acc {:.4}  f1 {:.4}  wf1 {:.4}  {:>6.1}s {} {}",
                r.kind.name(),
                r.label,
                r.report.accuracy,
                r.report.macro_f1(),
                r.report.weighted_f1(),
                r.seconds,
                r.warnings.len(),
                chosen.join(" ")
            );
            Ok(())
        })
        .unwrap();
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
