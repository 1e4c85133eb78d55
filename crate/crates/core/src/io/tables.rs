//! CSV emission and reading of traces, fields and controls. Floats use 17
//! significant digits in scientific notation.

use std::path::Path;

use crate::control::{ControlSet, NodeControl};
use crate::network::{End, NetworkSpec};
use crate::solver::{SimResult, State, TraceRecord};
use crate::Vec3;

use super::scenario::read_csv_columns;
use super::IoError;

pub const TRACE_HEADER: [&str; 12] = ["string", "x", "t", "r1", "r2", "r3", "rt1", "rt2", "rt3", "rx1", "rx2", "rx3"];
pub const CONTROL_HEADER: [&str; 11] = ["node", "t", "U1", "U2", "U3", "Ut1", "Ut2", "Ut3", "Utt1", "Utt2", "Utt3"];

pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // collapses -0.0 so identical states give identical bytes
        "0.0000000000000000e0".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn push_vec(row: &mut Vec<String>, v: &Vec3) {
    row.extend(v.iter().map(|c| fmt_f64(*c)));
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("ascii output")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn at(v: &[Vec3], k: usize) -> Vec3 {
    v.get(k).copied().unwrap_or_else(Vec3::zeros)
}

/// Boundary traces of all strings, time-major. Channels not recorded are zero.
pub fn traces_csv(spec: &NetworkSpec, traces: &[&TraceRecord]) -> String {
    let mut w = writer();
    w.write_record(TRACE_HEADER).unwrap();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    for k in 0..len {
        for tr in traces.iter().filter(|t| k < t.len()) {
            let x = match tr.end {
                End::Start => 0.0,
                End::Finish => spec.strings.iter().find(|s| s.id == tr.string).map_or(0.0, |s| s.length),
            };
            let mut row = vec![tr.string.to_string(), fmt_f64(x), fmt_f64(tr.time(k))];
            push_vec(&mut row, &at(&tr.r, k));
            push_vec(&mut row, &at(&tr.rt, k));
            push_vec(&mut row, &at(&tr.rx, k));
            w.write_record(&row).unwrap();
        }
    }
    finish(w)
}

/// Both end traces of every string of a simulation.
pub fn sim_traces_csv(spec: &NetworkSpec, res: &SimResult) -> String {
    let all: Vec<&TraceRecord> = res.traces.iter().flat_map(|p| p.iter()).collect();
    traces_csv(spec, &all)
}

/// Field snapshots on the solver grid, same schema as traces.
pub fn snapshots_csv(spec: &NetworkSpec, snapshots: &[State]) -> String {
    let mut w = writer();
    w.write_record(TRACE_HEADER).unwrap();
    for s in snapshots {
        for (i, st) in s.strings.iter().enumerate() {
            let n = st.r.len() - 1;
            let l = spec.strings[i].length;
            for j in 0..=n {
                let x = if j == n { l } else { l * j as f64 / n as f64 };
                let mut row = vec![spec.strings[i].id.to_string(), fmt_f64(x), fmt_f64(s.t)];
                push_vec(&mut row, &st.r[j]);
                push_vec(&mut row, &st.q[j]);
                push_vec(&mut row, &st.p[j]);
                w.write_record(&row).unwrap();
            }
        }
    }
    finish(w)
}

pub fn energy_csv(energy: &[(f64, f64)]) -> String {
    let mut w = writer();
    w.write_record(["t", "energy"]).unwrap();
    for &(t, e) in energy {
        w.write_record([fmt_f64(t), fmt_f64(e)]).unwrap();
    }
    finish(w)
}

/// Controls, time-major with nodes in ascending order.
pub fn controls_csv(set: &ControlSet) -> String {
    let mut w = writer();
    w.write_record(CONTROL_HEADER).unwrap();
    for k in 0..set.len() {
        for n in &set.nodes {
            let mut row = vec![n.node.to_string(), fmt_f64(set.time(k))];
            push_vec(&mut row, &n.u[k]);
            push_vec(&mut row, &n.ut[k]);
            push_vec(&mut row, &n.utt[k]);
            w.write_record(&row).unwrap();
        }
    }
    finish(w)
}

/// Reads a control CSV; each node is matched to the string it terminates.
pub fn read_controls(path: &Path, spec: &NetworkSpec) -> Result<ControlSet, IoError> {
    let rows = read_csv_columns(path, &CONTROL_HEADER)?;
    let bad = |m: String| IoError::Parse { what: path.display().to_string(), message: m };
    let mut nodes: Vec<NodeControl> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for r in &rows {
        let node = r[0] as usize;
        let k = match nodes.iter().position(|n| n.node == node) {
            Some(k) => k,
            None => {
                let s = spec
                    .strings
                    .iter()
                    .find(|s| s.node_at_0 == node || s.node_at_l == node)
                    .ok_or_else(|| bad(format!("node {node} is not in the network")))?;
                nodes.push(NodeControl { node, string: s.id, u: Vec::new(), ut: Vec::new(), utt: Vec::new() });
                nodes.len() - 1
            }
        };
        if k == 0 {
            times.push(r[1]);
        }
        let v = |o: usize| Vec3::new(r[o], r[o + 1], r[o + 2]);
        nodes[k].u.push(v(2));
        nodes[k].ut.push(v(5));
        nodes[k].utt.push(v(8));
    }
    if times.len() < 2 || nodes.iter().any(|n| n.u.len() != times.len()) {
        return Err(bad("controls need at least two samples per node on a common time grid".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(bad("control samples are not uniform in time".into()));
    }
    nodes.sort_by_key(|n| n.node);
    Ok(ControlSet { t0: times[0], dt, nodes, t_bar: 0.0, t_star: 0.0, cells: 0 })
}
