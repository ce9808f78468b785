use std::io::{self, Write};

use crate::model::SitState;

/// Names of the recorded Lyapunov traces, in output order.
pub const MONITOR_NAMES: [&str; 4] = ["V", "W", "H", "ePe"];

/// Recorded scenario output; every sequence is aligned with `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SitState>,
    pub estimates: Option<Vec<SitState>>,
    pub controls: Option<Vec<f64>>,
    /// (name, values) pairs drawn from `MONITOR_NAMES`, in that order.
    pub monitors: Vec<(&'static str, Vec<f64>)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|(n, _)| *n == name).map(|(_, v)| v.as_slice())
    }

    pub(crate) fn push_monitor(&mut self, name: &'static str, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.times.len());
        self.monitors.push((name, values));
        self.monitors.sort_by_key(|(n, _)| MONITOR_NAMES.iter().position(|m| m == n));
    }

    pub fn final_state(&self) -> SitState {
        *self.states.last().expect("trajectories hold the initial state")
    }

    /// Observer error x_hat - x at each record, when estimates exist.
    pub fn errors(&self) -> Option<Vec<[f64; 6]>> {
        let est = self.estimates.as_ref()?;
        Some(
            self.states
                .iter()
                .zip(est)
                .map(|(x, xh)| {
                    let (a, b) = (x.to_array(), xh.to_array());
                    std::array::from_fn(|i| b[i] - a[i])
                })
                .collect(),
        )
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<String> = vec!["t".into()];
        cols.extend(SitState::LABELS.iter().map(|s| s.to_string()));
        if self.estimates.is_some() {
            cols.extend(SitState::LABELS.iter().map(|s| format!("{s}hat")));
        }
        if self.controls.is_some() {
            cols.push("u".into());
        }
        cols.extend(self.monitors.iter().map(|(n, _)| n.to_string()));
        cols.join(",")
    }

    /// CSV with 10 significant digits and LF line endings, keeping every `every`-th row
    /// plus the last one.
    pub fn write_csv(&self, mut w: impl Write, every: usize) -> io::Result<()> {
        let every = every.max(1);
        writeln!(w, "{}", self.header())?;
        let n = self.len();
        let mut row = Vec::new();
        for i in (0..n).filter(|i| i % every == 0 || *i + 1 == n) {
            row.clear();
            row.push(self.times[i]);
            row.extend(self.states[i].to_array());
            if let Some(e) = &self.estimates {
                row.extend(e[i].to_array());
            }
            if let Some(u) = &self.controls {
                row.push(u[i]);
            }
            row.extend(self.monitors.iter().map(|(_, v)| v[i]));
            let line: Vec<String> = row.iter().map(|v| format_sig(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, every: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, every).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Decimal rendering rounded to 10 significant digits.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.9e}").parse().expect("round trip of formatted float");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}
