use serde::{Deserialize, Serialize};

use super::{Backend, SimConfig, ThresholdMode};
use crate::error::{Error, Result};

/// Input events `(time, weight)` sorted by time.
pub(crate) type Events = [(f64, f64)];

pub(crate) fn sort_events(events: &mut [(f64, f64)]) {
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
}

/// First `t` in `[lo, hi)` with `s·t − b >= thr` on a linear segment.
#[inline]
fn crossing(s: f64, b: f64, thr: f64, lo: f64, hi: f64) -> Option<f64> {
    if s * lo - b >= thr {
        return Some(lo);
    }
    if s > 0.0 {
        let t = (thr + b) / s;
        if t < hi {
            return Some(t.max(lo));
        }
    }
    None
}

pub(crate) struct ExactOutcome {
    pub spike: Option<f64>,
    /// Distinct input event times consumed before the decision.
    pub events: u64,
}

/// Closed-form threshold crossing over sorted events. Simultaneous inputs are
/// merged into one event with their summed weight. Searches `[lo, hi)`; no
/// crossing yields `None`.
pub(crate) fn exact_sorted(events: &Events, thr: f64, lo: f64, hi: f64) -> ExactOutcome {
    let (mut s, mut b) = (0.0, 0.0);
    let mut seg_start = f64::NEG_INFINITY;
    let mut i = 0;
    let mut consumed = 0;
    loop {
        let next = events.get(i).map_or(f64::INFINITY, |e| e.0);
        let (a, z) = (seg_start.max(lo), next.min(hi));
        if a < z {
            if let Some(t) = crossing(s, b, thr, a, z) {
                return ExactOutcome {
                    spike: Some(t),
                    events: consumed,
                };
            }
        }
        if next >= hi {
            break;
        }
        while i < events.len() && events[i].0 == next {
            s += events[i].1;
            b += events[i].1 * next;
            i += 1;
        }
        consumed += 1;
        seg_start = next;
    }
    ExactOutcome {
        spike: None,
        events: consumed,
    }
}

/// Samples `V` at grid points `k_start..k_end` and returns the first one at
/// or above threshold.
pub(crate) fn discrete_sorted(events: &Events, thr: f64, cfg: &SimConfig, k_start: usize, k_end: usize) -> Option<f64> {
    let (mut s, mut b) = (0.0, 0.0);
    let mut p = 0;
    for k in k_start..k_end {
        let t = cfg.grid_time(k);
        while p < events.len() && events[p].0 <= t {
            s += events[p].1;
            b += events[p].1 * events[p].0;
            p += 1;
        }
        if s * t - b >= thr {
            return Some(t);
        }
    }
    None
}

/// Potential at `t` from every input that has arrived by then.
pub(crate) fn potential_at(events: &Events, t: f64) -> (f64, f64) {
    let (mut s, mut b) = (0.0, 0.0);
    for &(tj, w) in events.iter().take_while(|e| e.0 <= t) {
        s += w;
        b += w * tj;
    }
    (s * t - b, s)
}

fn check_inputs(times: &[f64], weights: &[f64], threshold: f64) -> Result<()> {
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
    }
    if times.len() != weights.len() {
        return Err(Error::shape(format!(
            "{} input times but {} weights",
            times.len(),
            weights.len()
        )));
    }
    if let Some(t) = times.iter().chain(weights).find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite input {t}")));
    }
    Ok(())
}

/// Spike time of one neuron with inputs `times`/`weights` and window
/// `[window.0, window.1)`.
///
/// Dynamic mode returns the first crossing inside the window, or a forced
/// spike at `window.1`. Fixed mode searches every `t >= 0` before `window.1`
/// and returns `None` when the potential never reaches the threshold.
pub fn solve_spike_exact(
    times: &[f64],
    weights: &[f64],
    threshold: f64,
    window: (f64, f64),
    mode: ThresholdMode,
) -> Result<Option<f64>> {
    check_inputs(times, weights, threshold)?;
    let (ta, tb) = window;
    if !(ta < tb) {
        return Err(Error::Domain(format!("empty window [{ta}, {tb})")));
    }
    let mut events: Vec<(f64, f64)> = times.iter().copied().zip(weights.iter().copied()).collect();
    sort_events(&mut events);
    Ok(match mode {
        ThresholdMode::Dynamic => {
            if let Some(&(t, _)) = events.iter().find(|e| e.0 >= tb) {
                return Err(Error::Domain(format!("input at {t} does not precede window close {tb}")));
            }
            Some(exact_sorted(&events, threshold, ta, tb).spike.unwrap_or(tb))
        }
        ThresholdMode::Fixed => exact_sorted(&events, threshold, 0.0, tb).spike,
    })
}

/// Linear piece of the membrane potential: `V(t) = v_start + slope·(t − start)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembraneSegment {
    pub start: f64,
    pub end: f64,
    pub v_start: f64,
    pub slope: f64,
}

impl MembraneSegment {
    pub fn at(&self, t: f64) -> f64 {
        self.v_start + self.slope * (t - self.start)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MembraneTrace {
    Sampled { times: Vec<f64>, potentials: Vec<f64> },
    Segments(Vec<MembraneSegment>),
}

impl MembraneTrace {
    /// Potential at `t`, interpolating between samples when needed.
    pub fn at(&self, t: f64) -> Option<f64> {
        match self {
            MembraneTrace::Segments(segs) => segs.iter().find(|s| t >= s.start && t <= s.end).map(|s| s.at(t)),
            MembraneTrace::Sampled { times, potentials } => {
                let i = times.partition_point(|&x| x < t);
                if i < times.len() && times[i] == t {
                    Some(potentials[i])
                } else if i == 0 || i == times.len() {
                    None
                } else {
                    let f = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    Some(potentials[i - 1] + f * (potentials[i] - potentials[i - 1]))
                }
            }
        }
    }
}

/// Membrane potential of one neuron over `[span.0, span.1]`.
pub fn trace_neuron(times: &[f64], weights: &[f64], span: (f64, f64), cfg: &SimConfig) -> Result<MembraneTrace> {
    check_inputs(times, weights, 1.0)?;
    cfg.validate()?;
    let mut events: Vec<(f64, f64)> = times.iter().copied().zip(weights.iter().copied()).collect();
    sort_events(&mut events);
    Ok(match cfg.backend {
        Backend::Discrete => {
            let n = cfg.steps_per_window as f64;
            let k0 = (span.0 * n).ceil() as usize;
            let k1 = (span.1 * n).floor() as usize;
            let times: Vec<f64> = (k0..=k1).map(|k| cfg.grid_time(k)).collect();
            let potentials = times.iter().map(|&t| potential_at(&events, t).0).collect();
            MembraneTrace::Sampled { times, potentials }
        }
        Backend::Exact => {
            let mut cuts = vec![span.0];
            cuts.extend(events.iter().map(|e| e.0).filter(|&t| t > span.0 && t < span.1));
            cuts.push(span.1);
            cuts.dedup();
            let segs = cuts
                .windows(2)
                .map(|c| {
                    let (v, slope) = potential_at(&events, c[0]);
                    MembraneSegment {
                        start: c[0],
                        end: c[1],
                        v_start: v,
                        slope,
                    }
                })
                .collect();
            MembraneTrace::Segments(segs)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_T: [f64; 2] = [0.2, 0.6];
    const FIG_W: [f64; 2] = [5.0, -10.0];

    #[test]
    fn premature_spike_in_fixed_mode() {
        let t = solve_spike_exact(&FIG_T, &FIG_W, 1.0, (1.0, 2.0), ThresholdMode::Fixed).unwrap();
        assert_eq!(t, Some(0.4));
    }

    #[test]
    fn dynamic_mode_forces_boundary_spike() {
        let t = solve_spike_exact(&FIG_T, &FIG_W, 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap();
        assert_eq!(t, Some(2.0));
    }

    #[test]
    fn hand_solved_crossings() {
        let t = solve_spike_exact(&FIG_T, &[0.6, 0.4], 1.0, (1.0, 2.0), ThresholdMode::Dynamic)
            .unwrap()
            .unwrap();
        assert!((t - 1.36).abs() < 1e-15);
        let t = solve_spike_exact(&[0.2], &[1.0], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap();
        assert_eq!(t, Some(1.2));
    }

    #[test]
    fn saturates_at_window_open() {
        let t = solve_spike_exact(&[0.0], &[2.0], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap();
        assert_eq!(t, Some(1.0));
    }

    #[test]
    fn empty_and_invalid_inputs() {
        assert_eq!(
            solve_spike_exact(&[], &[], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap(),
            Some(2.0)
        );
        assert_eq!(solve_spike_exact(&[], &[], 1.0, (1.0, 2.0), ThresholdMode::Fixed).unwrap(), None);
        assert!(matches!(
            solve_spike_exact(&[0.2], &[1.0], 0.0, (1.0, 2.0), ThresholdMode::Dynamic),
            Err(Error::Config(_))
        ));
        assert!(solve_spike_exact(&[2.5], &[1.0], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).is_err());
    }

    #[test]
    fn simultaneous_inputs_merge() {
        let a = solve_spike_exact(&[0.5, 0.5], &[0.3, 0.7], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap();
        let b = solve_spike_exact(&[0.5], &[1.0], 1.0, (1.0, 2.0), ThresholdMode::Dynamic).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn discrete_fig2_is_on_grid() {
        let ev = [(0.2, 5.0), (0.6, -10.0)];
        let cfg = SimConfig::default();
        assert_eq!(discrete_sorted(&ev, 1.0, &cfg, 0, 100), Some(0.4));
    }

    #[test]
    fn traces_are_piecewise_linear() {
        let exact = trace_neuron(&FIG_T, &FIG_W, (0.0, 1.0), &SimConfig::exact()).unwrap();
        match &exact {
            MembraneTrace::Segments(s) => {
                assert_eq!(s.len(), 3);
                assert_eq!(s[1].slope, 5.0);
                assert_eq!(s[2].slope, -5.0);
            }
            _ => unreachable!(),
        }
        assert!((exact.at(0.4).unwrap() - 1.0).abs() < 1e-12);
        let sampled = trace_neuron(&FIG_T, &FIG_W, (0.0, 1.0), &SimConfig::default()).unwrap();
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            assert!((sampled.at(t).unwrap() - exact.at(t).unwrap()).abs() < 1e-12);
        }
    }
}
