use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::convert::{SpikeFrame, TimeWindow};

/// Spike-time counts of one population on the global time axis
/// `[0, windows·T]`, split into `bins_per_window` bins per window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeHistogram {
    pub layer: usize,
    pub bins_per_window: usize,
    pub counts: Vec<u64>,
    /// Spikes outside the population's own window.
    pub out_of_window: u64,
    /// Neurons that never fired.
    pub silent: u64,
}

impl SpikeHistogram {
    pub fn new(layer: usize, bins_per_window: usize, windows: usize) -> Self {
        Self {
            layer,
            bins_per_window: bins_per_window.max(1),
            counts: vec![0; bins_per_window.max(1) * windows],
            out_of_window: 0,
            silent: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn out_of_window_fraction(&self) -> f64 {
        let total = self.total() + self.silent;
        if total == 0 {
            0.0
        } else {
            self.out_of_window as f64 / total as f64
        }
    }

    /// `[start, end)` of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bins_per_window as f64;
        (i as f64 / w, (i + 1) as f64 / w)
    }

    /// Bins are left-closed; a spike exactly at its own window's end goes to
    /// the last bin of that window.
    pub fn record(&mut self, frame: &SpikeFrame) {
        let own = TimeWindow::for_layer(self.layer);
        let last = self.counts.len() - 1;
        for t in &frame.times {
            let Some(t) = *t else {
                self.silent += 1;
                continue;
            };
            if !own.contains(t) {
                self.out_of_window += 1;
            }
            let mut idx = (t.max(0.0) * self.bins_per_window as f64).floor() as usize;
            if t == own.end && idx > 0 {
                idx -= 1;
            }
            self.counts[idx.min(last)] += 1;
        }
    }

    pub fn merge(&mut self, other: &SpikeHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.out_of_window += other.out_of_window;
        self.silent += other.silent;
    }
}

/// One histogram per frame. `windows` sets the global time axis length.
pub fn spike_histogram(frames: &[SpikeFrame], bins_per_window: usize, windows: usize) -> Vec<SpikeHistogram> {
    frames
        .iter()
        .map(|f| {
            let mut h = SpikeHistogram::new(f.layer, bins_per_window, windows.max(f.layer + 1));
            h.record(f);
            h
        })
        .collect()
}

/// One `layer,bin,start,end,count` row per bin.
pub fn write_histogram_csv<W: Write>(mut out: W, hists: &[SpikeHistogram]) -> std::io::Result<()> {
    writeln!(out, "layer,bin,start,end,count")?;
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let (a, b) = h.bin_edges(i);
            writeln!(out, "{},{},{},{},{}", h.layer, i, a, b, c)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_spikes_fill_final_bin() {
        let f = SpikeFrame {
            layer: 1,
            times: vec![Some(2.0); 7],
        };
        let h = &spike_histogram(&[f], 10, 3)[0];
        assert_eq!(h.counts[19], 7);
        assert_eq!(h.total(), 7);
        assert_eq!(h.out_of_window, 0);
    }

    #[test]
    fn out_of_window_and_silent() {
        let f = SpikeFrame {
            layer: 1,
            times: vec![Some(0.4), Some(1.5), None, Some(2.5)],
        };
        let h = &spike_histogram(&[f], 4, 3)[0];
        assert_eq!(h.out_of_window, 2);
        assert_eq!(h.silent, 1);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[6], 1);
        assert_eq!(h.counts[10], 1);
        assert!((h.out_of_window_fraction() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_rows() {
        let f = SpikeFrame {
            layer: 0,
            times: vec![Some(0.0)],
        };
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &spike_histogram(&[f], 2, 1)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "layer,bin,start,end,count\n0,0,0,0.5,1\n0,1,0.5,1,0\n");
    }
}
