//! File formats.
//!
//! Partition JSON:
//! `{"initial": {"center", "width"}, "epsilon", "cells": [{"center", "width", "weight"}]}`
//!
//! Reconstruction JSON:
//! `{"state", "partition", "delta", "mode", "sampling", "total_shots", "cells": [{"i", "j", "x", "xp", "re", "im", "shots"}]}`
//!
//! Reconstruction CSV, one row per cell:
//! `x_center,xp_center,width_x,width_xp,re,im`

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::mesh::{Interval, Mode, Partition, PartitionCell, SamplingPlan};
use crate::tomography::{FidelityReport, ReconstructedState};

#[derive(Serialize, Deserialize)]
struct CellRepr {
    center: f64,
    width: f64,
    weight: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    flagged: bool,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    initial: Interval,
    epsilon: f64,
    cells: Vec<CellRepr>,
}

impl From<&Partition> for PartitionRepr {
    fn from(p: &Partition) -> Self {
        Self {
            initial: p.initial(),
            epsilon: p.epsilon(),
            cells: p
                .cells()
                .iter()
                .map(|c| CellRepr {
                    center: c.interval.center(),
                    width: c.interval.width(),
                    weight: c.weight,
                    flagged: c.flagged,
                })
                .collect(),
        }
    }
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(repr: PartitionRepr) -> Result<Self> {
        let initial = repr.initial;
        let mut cells = Vec::with_capacity(repr.cells.len());
        let mut lo = initial.lo();
        let count = repr.cells.len();
        for (k, c) in repr.cells.into_iter().enumerate() {
            let stated = Interval::from_center_width(c.center, c.width)?;
            // consecutive cells share an edge; snap printed round-off onto it
            let slack = 1e-9 * c.width;
            if (stated.lo() - lo).abs() > slack {
                return Err(invalid(format!("cell {k} starts at {} but the previous cell ends at {lo}", stated.lo())));
            }
            let hi = if k + 1 == count { initial.hi() } else { stated.hi() };
            if (hi - stated.hi()).abs() > slack {
                return Err(invalid("last cell does not end at the initial interval's edge"));
            }
            let interval = Interval::new(lo, hi)?;
            let depth = (initial.width() / interval.width()).log2().round();
            if !(0.0..=62.0).contains(&depth) {
                return Err(invalid(format!("cell {k} width {} is not a dyadic fraction", c.width)));
            }
            cells.push(PartitionCell {
                interval,
                depth: depth as u32,
                weight: c.weight,
                flagged: c.flagged,
            });
            lo = hi;
        }
        Partition::from_cells(initial, repr.epsilon, cells)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PartitionRepr::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PartitionRepr::deserialize(deserializer)?;
        Partition::try_from(repr).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct ReconCellRepr {
    i: usize,
    j: usize,
    x: f64,
    xp: f64,
    re: f64,
    im: f64,
    shots: u64,
}

#[derive(Serialize, Deserialize)]
struct ReconRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    partition: Partition,
    delta: f64,
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sampling: Option<SamplingPlan>,
    total_shots: u64,
    cells: Vec<ReconCellRepr>,
}

impl From<&ReconstructedState> for ReconRepr {
    fn from(r: &ReconstructedState) -> Self {
        let n = r.size();
        let p = r.partition();
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = r.cell(i, j);
                cells.push(ReconCellRepr {
                    i,
                    j,
                    x: p.interval(i).center(),
                    xp: p.interval(j).center(),
                    re: v.re,
                    im: v.im,
                    shots: r.cell_shots(i, j),
                });
            }
        }
        let sampling = match r.mode() {
            Mode::Exact => None,
            Mode::Sampled(plan) => Some(plan),
        };
        Self {
            state: r.state().map(str::to_string),
            partition: p.clone(),
            delta: r.delta(),
            mode: r.mode().name().to_string(),
            sampling,
            total_shots: r.total_shots(),
            cells,
        }
    }
}

impl TryFrom<ReconRepr> for ReconstructedState {
    type Error = Error;

    fn try_from(repr: ReconRepr) -> Result<Self> {
        let n = repr.partition.len();
        let mode = match (repr.mode.as_str(), repr.sampling) {
            ("exact", _) => Mode::Exact,
            ("sampled", Some(plan)) => Mode::Sampled(plan),
            ("sampled", None) => return Err(invalid("sampled reconstruction without sampling settings")),
            (other, _) => return Err(invalid(format!("unknown mode {other:?}"))),
        };
        let mut values = vec![None; n * n];
        let mut shots = vec![0u64; n * n];
        for c in repr.cells {
            if c.i >= n || c.j >= n {
                return Err(invalid(format!("cell ({}, {}) outside a {n}x{n} grid", c.i, c.j)));
            }
            let idx = c.i * n + c.j;
            if values[idx].replace(C64::new(c.re, c.im)).is_some() {
                return Err(invalid(format!("cell ({}, {}) listed twice", c.i, c.j)));
            }
            shots[idx] = c.shots;
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(idx, v)| v.ok_or_else(|| invalid(format!("cell ({}, {}) missing", idx / n, idx % n))))
            .collect::<Result<Vec<_>>>()?;
        ReconstructedState::from_parts(repr.partition, repr.delta, mode, repr.state, values, shots)
    }
}

impl Serialize for ReconstructedState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReconRepr::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReconstructedState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ReconRepr::deserialize(deserializer)?;
        ReconstructedState::try_from(repr).map_err(serde::de::Error::custom)
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_reconstruction<R: Read>(input: R) -> Result<ReconstructedState> {
    Ok(serde_json::from_reader(input)?)
}

pub fn read_partition<R: Read>(input: R) -> Result<Partition> {
    Ok(serde_json::from_reader(input)?)
}

#[derive(Serialize, Deserialize)]
struct CsvCell {
    x_center: f64,
    xp_center: f64,
    width_x: f64,
    width_xp: f64,
    re: f64,
    im: f64,
}

/// One row per cell, row-major: centers, widths, real and imaginary parts.
pub fn write_cells_csv<W: Write>(recon: &ReconstructedState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = recon.partition();
    for i in 0..recon.size() {
        for j in 0..recon.size() {
            let (a, b) = (p.interval(i), p.interval(j));
            let v = recon.cell(i, j);
            w.serialize(CsvCell {
                x_center: a.center(),
                xp_center: b.center(),
                width_x: a.width(),
                width_xp: b.width(),
                re: v.re,
                im: v.im,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A cell row read back from the CSV layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellRow {
    pub x_center: f64,
    pub xp_center: f64,
    pub width_x: f64,
    pub width_xp: f64,
    pub value: C64,
}

pub fn read_cells_csv<R: Read>(input: R) -> Result<Vec<CellRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<CsvCell>()
        .map(|row| {
            let c = row?;
            Ok(CellRow {
                x_center: c.x_center,
                xp_center: c.xp_center,
                width_x: c.width_x,
                width_xp: c.width_xp,
                value: C64::new(c.re, c.im),
            })
        })
        .collect()
}

/// Mesh lines of the partition, one edge per row, for drawing the cell grid.
pub fn write_mesh_csv<W: Write>(partition: &Partition, out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Edge {
        index: usize,
        edge: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for (index, edge) in partition.edges().into_iter().enumerate() {
        w.serialize(Edge { index, edge })?;
    }
    w.flush()?;
    Ok(())
}

/// Fidelity summary without the per-cell breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub state: String,
    pub epsilon: f64,
    pub delta: f64,
    pub fidelity: f64,
    pub imaginary_residue: f64,
}

impl From<&FidelityReport> for FidelitySummary {
    fn from(r: &FidelityReport) -> Self {
        Self {
            state: r.state.clone(),
            epsilon: r.epsilon_weight,
            delta: r.delta,
            fidelity: r.fidelity,
            imaginary_residue: r.imaginary_residue,
        }
    }
}
