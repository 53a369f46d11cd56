//! Two inputs, one excitatory and one inhibitory, whose analog dot product
//! is exactly zero. With a fixed threshold the neuron fires before the
//! inhibitory spike arrives; the dynamic threshold holds it back until its
//! own window opens.
//!
//! cargo run --example premature_spike

use ttfs::convert::{encode_input, TimeWindow};
use ttfs::sim::{solve_spike_exact, trace_neuron, SimConfig, ThresholdMode};

fn main() -> ttfs::Result<()> {
    let activations = [0.8, 0.4];
    let weights = [5.0, -10.0];
    let input = encode_input(&activations)?;
    let times: Vec<f64> = input.spikes().collect();
    let z: f64 = activations.iter().zip(&weights).map(|(a, w)| a * w).sum();
    println!("input spike times {times:?}, analog pre-activation {z}");

    let window = TimeWindow::for_layer(1);
    let fixed = solve_spike_exact(&times, &weights, 1.0, (window.start, window.end), ThresholdMode::Fixed)?;
    let dynamic = solve_spike_exact(&times, &weights, 1.0, (window.start, window.end), ThresholdMode::Dynamic)?;
    println!("fixed threshold:   spike at {fixed:?} (exact solver on encoded times)");
    let on_grid = solve_spike_exact(&[0.2, 0.6], &weights, 1.0, (window.start, window.end), ThresholdMode::Fixed)?;
    println!("                   spike at {on_grid:?} (exact solver on t = 0.2, 0.6)");
    println!(
        "dynamic threshold: spike at {:?} -> activation {}",
        dynamic,
        dynamic.map_or(0.0, |t| window.end - t)
    );

    println!("\n   t      V(t)");
    let trace = trace_neuron(&times, &weights, (0.0, 2.0), &SimConfig::discrete(10))?;
    for k in 0..=20 {
        let t = k as f64 / 10.0;
        println!("{t:5.2}  {:8.3}", trace.at(t).unwrap_or(f64::NAN));
    }
    Ok(())
}
