//! Measurement campaigns: where to stand, what the receiver reads there, and
//! the CSV layout measurements are stored in.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::env_sim::{RfMap, RoomGeometry};
use crate::error::{Error, Result};
use crate::interpolation::SparseGrid;
use crate::seed;

pub const CSV_HEADER: &str = "point_id,x_m,y_m,ap_id,rss_dbm";

/// Draws per location before falling back to a uniform pick among free cells.
const MAX_CELL_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPoint {
    pub point_id: u64,
    pub position: (f64, f64),
    pub cell: (usize, usize),
    /// One list of raw readings per access point, in `MeasurementSet::ap_ids` order.
    pub readings: Vec<Vec<f64>>,
}

impl MeasurementPoint {
    pub fn mean_reading(&self, ap_index: usize) -> f64 {
        let r = &self.readings[ap_index];
        r.iter().sum::<f64>() / r.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub room: RoomGeometry,
    pub ap_ids: Vec<String>,
    pub points: Vec<MeasurementPoint>,
    pub seed: u64,
}

/// Homogeneous Poisson point process over the room.
pub fn sample_locations_ppp(room: &RoomGeometry, intensity_per_m2: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(intensity_per_m2 > 0.0 && intensity_per_m2.is_finite()) {
        return Err(Error::domain(format!("PPP intensity must be positive, got {intensity_per_m2}")));
    }
    let mut rng = seed::rng(seed);
    let mean = intensity_per_m2 * room.area();
    let count = Poisson::new(mean)
        .map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;
    Ok((0..count).map(|_| uniform_point(room, &mut rng)).collect())
}

/// Exactly `n` uniform locations, no two sharing a grid cell.
pub fn sample_locations_fixed(room: &RoomGeometry, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::domain("need at least one location"));
    }
    if n > room.cell_count() {
        return Err(Error::Infeasible(format!(
            "{n} distinct cells requested but the grid has {}",
            room.cell_count()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut taken = vec![false; room.cell_count()];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut placed = None;
        for _ in 0..MAX_CELL_RETRIES {
            let p = uniform_point(room, &mut rng);
            let (r, c) = quantize_to_grid(p, room)?;
            if !taken[r * room.grid_cols + c] {
                placed = Some((p, r * room.grid_cols + c));
                break;
            }
        }
        let (p, idx) = match placed {
            Some(hit) => hit,
            None => {
                let free: Vec<usize> = (0..taken.len()).filter(|&i| !taken[i]).collect();
                let idx = free[rng.random_range(0..free.len())];
                (uniform_in_cell(room, idx / room.grid_cols, idx % room.grid_cols, &mut rng), idx)
            }
        };
        taken[idx] = true;
        out.push(p);
    }
    Ok(out)
}

fn uniform_point(room: &RoomGeometry, rng: &mut seed::Rng) -> (f64, f64) {
    (rng.random_range(0.0..room.width_m), rng.random_range(0.0..room.length_m))
}

fn uniform_in_cell(room: &RoomGeometry, row: usize, col: usize, rng: &mut seed::Rng) -> (f64, f64) {
    let (h, w) = room.cell_size();
    let x = (col as f64 + rng.random::<f64>()) * w;
    let y = (row as f64 + rng.random::<f64>()) * h;
    // Rounding can push the far edge of a cell into its neighbour.
    let q = quantize_to_grid((x, y), room).unwrap_or((row, col));
    if q == (row, col) {
        (x, y)
    } else {
        room.cell_center(row, col)
    }
}

/// Maps a position to its `(row, col)`; the far room edges belong to the last cells.
pub fn quantize_to_grid(position: (f64, f64), room: &RoomGeometry) -> Result<(usize, usize)> {
    if !room.contains(position) {
        return Err(Error::domain(format!(
            "position ({}, {}) lies outside the {} x {} m room",
            position.0, position.1, room.width_m, room.length_m
        )));
    }
    let (h, w) = room.cell_size();
    let row = ((position.1 / h).floor() as usize).min(room.grid_rows - 1);
    let col = ((position.0 / w).floor() as usize).min(room.grid_cols - 1);
    Ok((row, col))
}

/// Simulates `readings_per_point` noisy reads of every access point at each
/// location. The reading is the truth of the location's cell plus Gaussian noise.
pub fn collect_measurements(
    truth: &RfMap,
    locations: &[(f64, f64)],
    readings_per_point: usize,
    reading_noise_sigma_db: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if locations.is_empty() {
        return Err(Error::domain("no measurement locations"));
    }
    if readings_per_point == 0 {
        return Err(Error::domain("readings_per_point must be at least 1"));
    }
    let noise = Normal::new(0.0, reading_noise_sigma_db)
        .map_err(|_| Error::domain(format!("invalid reading noise sigma {reading_noise_sigma_db}")))?;
    let mut rng = seed::rng(seed);
    let room = truth.geometry;
    let mut points = Vec::with_capacity(locations.len());
    for (i, &pos) in locations.iter().enumerate() {
        let cell = quantize_to_grid(pos, &room)?;
        let readings = truth
            .layers
            .iter()
            .map(|layer| {
                let v = layer[cell];
                (0..readings_per_point).map(|_| v + noise.sample(&mut rng)).collect()
            })
            .collect();
        points.push(MeasurementPoint { point_id: i as u64, position: pos, cell, readings });
    }
    Ok(MeasurementSet { room, ap_ids: truth.ap_ids.clone(), points, seed })
}

/// Grids one access point's readings. Each point contributes its reading
/// mean; cells visited by several points carry the mean of those means.
pub fn to_sparse_grid(ms: &MeasurementSet, ap_index: usize) -> Result<SparseGrid> {
    if ap_index >= ms.ap_ids.len() {
        return Err(Error::domain(format!("AP index {ap_index} out of range ({} APs)", ms.ap_ids.len())));
    }
    let room = &ms.room;
    let mut sum = DMatrix::<f64>::zeros(room.grid_rows, room.grid_cols);
    let mut count = DMatrix::<usize>::zeros(room.grid_rows, room.grid_cols);
    for p in &ms.points {
        sum[p.cell] += p.mean_reading(ap_index);
        count[p.cell] += 1;
    }
    let mask = count.map(|n| n > 0);
    let values = sum.zip_map(&count, |s, n| if n > 0 { s / n as f64 } else { 0.0 });
    let (cell_h, cell_w) = room.cell_size();
    SparseGrid::new(values, mask, (cell_h, cell_w))
}

/// Writes one row per `(point, AP, reading)`.
pub fn save_csv(ms: &MeasurementSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(ms)).map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(ms: &MeasurementSet) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in &ms.points {
        for (ap, readings) in ms.ap_ids.iter().zip(&p.readings) {
            for r in readings {
                let _ = writeln!(out, "{},{},{},{},{}", p.point_id, p.position.0, p.position.1, ap, r);
            }
        }
    }
    out
}

/// Reads a measurement CSV. The room and the AP roster are not part of the
/// file, so the caller supplies them; `seed` is recorded as provenance.
pub fn load_csv(path: impl AsRef<Path>, room: &RoomGeometry, ap_ids: &[String], seed: u64) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, room, ap_ids, seed)
}

pub fn parse_csv(text: &str, room: &RoomGeometry, ap_ids: &[String], seed: u64) -> Result<MeasurementSet> {
    if ap_ids.is_empty() {
        return Err(Error::domain("AP roster is empty"));
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == CSV_HEADER => {}
        Some((_, h)) => return Err(Error::parse(1, format!("expected header `{CSV_HEADER}`, got `{h}`"))),
        None => return Err(Error::parse(1, "missing header")),
    }
    let ap_index: HashMap<&str, usize> = ap_ids.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let mut order: Vec<u64> = Vec::new();
    // point_id -> (first line, position, readings)
    let mut by_id: HashMap<u64, (usize, (f64, f64), Vec<Vec<f64>>)> = HashMap::new();

    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let point_id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid point_id `{}`", fields[0])))?;
        let num = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("invalid {name} `{s}`")))
        };
        let x = num(fields[1], "x_m")?;
        let y = num(fields[2], "y_m")?;
        let rss = num(fields[4], "rss_dbm")?;
        if !room.contains((x, y)) {
            return Err(Error::parse(line_no, format!("position ({x}, {y}) lies outside the room")));
        }
        let &ap = ap_index
            .get(fields[3])
            .ok_or_else(|| Error::parse(line_no, format!("unknown ap_id `{}`", fields[3])))?;
        let entry = by_id.entry(point_id).or_insert_with(|| {
            order.push(point_id);
            (line_no, (x, y), vec![Vec::new(); ap_ids.len()])
        });
        if entry.1 != (x, y) {
            return Err(Error::parse(line_no, format!("point {point_id} changes position")));
        }
        entry.2[ap].push(rss);
    }

    let mut points = Vec::with_capacity(order.len());
    for id in order {
        let (line, position, readings) = by_id.remove(&id).expect("recorded id");
        if let Some(missing) = readings.iter().position(Vec::is_empty) {
            return Err(Error::parse(line, format!("point {id} has no readings for AP `{}`", ap_ids[missing])));
        }
        let cell = quantize_to_grid(position, room)?;
        points.push(MeasurementPoint { point_id: id, position, cell, readings });
    }
    Ok(MeasurementSet { room: *room, ap_ids: ap_ids.to_vec(), points, seed })
}
