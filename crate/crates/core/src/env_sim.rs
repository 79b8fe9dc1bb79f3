//! Synthetic ground truth: log-distance path loss anchored at the free-space
//! loss of a reference distance, with optional per-cell log-normal shadowing.
//!
//! Coordinates: `x` runs along the room width, `y` along its length. Grid
//! rows stack along `y`, columns along `x`, and every cell is evaluated at
//! its center.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomGeometry {
    pub width_m: f64,
    pub length_m: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl RoomGeometry {
    pub fn new(width_m: f64, length_m: f64, grid_rows: usize, grid_cols: usize) -> Result<Self> {
        let room = RoomGeometry { width_m, length_m, grid_rows, grid_cols };
        room.validate()?;
        Ok(room)
    }

    /// The lecture hall used for the original measurement campaign:
    /// 10.75 m x 17.4 m split into 30 x 10 cells.
    pub fn lecture_hall() -> Self {
        RoomGeometry { width_m: 10.75, length_m: 17.4, grid_rows: 30, grid_cols: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_m.is_finite() && self.width_m > 0.0) {
            return Err(Error::Config(format!("room width must be positive, got {}", self.width_m)));
        }
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(Error::Config(format!("room length must be positive, got {}", self.length_m)));
        }
        if self.grid_rows < 2 || self.grid_cols < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {}x{}",
                self.grid_rows, self.grid_cols
            )));
        }
        Ok(())
    }

    /// Cell extent as `(height along y, width along x)`.
    pub fn cell_size(&self) -> (f64, f64) {
        (self.length_m / self.grid_rows as f64, self.width_m / self.grid_cols as f64)
    }

    pub fn cell_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Center of cell `(row, col)` as `(x, y)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let (h, w) = self.cell_size();
        ((col as f64 + 0.5) * w, (row as f64 + 0.5) * h)
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        (0.0..=self.width_m).contains(&x) && (0.0..=self.length_m).contains(&y)
    }

    pub fn area(&self) -> f64 {
        self.width_m * self.length_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoint {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub tx_power_dbm: f64,
    pub frequency_hz: f64,
}

impl AccessPoint {
    pub fn position(&self) -> (f64, f64) {
        (self.x_m, self.y_m)
    }

    pub fn validate(&self, room: &RoomGeometry) -> Result<()> {
        if !room.contains(self.position()) {
            return Err(Error::Config(format!(
                "access point {} at ({}, {}) lies outside the room",
                self.id, self.x_m, self.y_m
            )));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::Config(format!("access point {} has invalid frequency", self.id)));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::Config(format!("access point {} has invalid tx power", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationParams {
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    pub shadowing_sigma_db: f64,
    pub min_distance_m: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            path_loss_exponent: 2.5,
            reference_distance_m: 1.0,
            shadowing_sigma_db: 4.0,
            min_distance_m: 0.1,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent >= 1.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::Config("path_loss_exponent must be >= 1".into()));
        }
        if !(self.reference_distance_m > 0.0 && self.reference_distance_m.is_finite()) {
            return Err(Error::Config("reference_distance_m must be positive".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(Error::Config("shadowing_sigma_db must be >= 0".into()));
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m.is_finite()) {
            return Err(Error::Config("min_distance_m must be positive".into()));
        }
        Ok(())
    }
}

/// Dense RSS map, one `grid_rows x grid_cols` layer (dBm) per access point.
#[derive(Debug, Clone, PartialEq)]
pub struct RfMap {
    pub geometry: RoomGeometry,
    pub ap_ids: Vec<String>,
    pub layers: Vec<DMatrix<f64>>,
}

impl RfMap {
    pub fn layer(&self, ap_index: usize) -> &DMatrix<f64> {
        &self.layers[ap_index]
    }

    /// RSS fingerprint of one cell across all access points.
    pub fn fingerprint(&self, row: usize, col: usize) -> Vec<f64> {
        self.layers.iter().map(|l| l[(row, col)]).collect()
    }

    /// One row per `(AP, cell)`, APs outermost, cells row-major.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRUTH_CSV_HEADER);
        out.push('\n');
        for (id, layer) in self.ap_ids.iter().zip(&self.layers) {
            for r in 0..self.geometry.grid_rows {
                for c in 0..self.geometry.grid_cols {
                    let (x, y) = self.geometry.cell_center(r, c);
                    let _ = writeln!(out, "{id},{r},{c},{x},{y},{}", layer[(r, c)]);
                }
            }
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parses [`RfMap::to_csv_string`] output. Every AP in `ap_ids` must
    /// cover every cell exactly once; the position columns are ignored.
    pub fn parse_csv(text: &str, room: &RoomGeometry, ap_ids: &[String]) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == TRUTH_CSV_HEADER => {}
            _ => return Err(Error::parse(1, format!("expected header `{TRUTH_CSV_HEADER}`"))),
        }
        let index: HashMap<&str, usize> = ap_ids.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut layers = vec![DMatrix::from_element(room.grid_rows, room.grid_cols, f64::NAN); ap_ids.len()];
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(line_no, format!("expected 6 fields, got {}", f.len())));
            }
            let a = *index.get(f[0]).ok_or_else(|| Error::parse(line_no, format!("unknown ap_id `{}`", f[0])))?;
            let (r, c) = match (f[1].parse::<usize>(), f[2].parse::<usize>()) {
                (Ok(r), Ok(c)) if r < room.grid_rows && c < room.grid_cols => (r, c),
                _ => return Err(Error::parse(line_no, format!("cell ({}, {}) outside the grid", f[1], f[2]))),
            };
            let v: f64 = f[5]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("invalid rss_dbm `{}`", f[5])))?;
            if !layers[a][(r, c)].is_nan() {
                return Err(Error::parse(line_no, format!("duplicate cell ({r}, {c}) for {}", f[0])));
            }
            layers[a][(r, c)] = v;
        }
        for (id, layer) in ap_ids.iter().zip(&layers) {
            if layer.iter().any(|v| v.is_nan()) {
                return Err(Error::domain(format!("truth map is missing cells for {id}")));
            }
        }
        Ok(RfMap { geometry: *room, ap_ids: ap_ids.to_vec(), layers })
    }

    pub fn load_csv(path: impl AsRef<Path>, room: &RoomGeometry, ap_ids: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, room, ap_ids)
    }
}

pub const TRUTH_CSV_HEADER: &str = "ap_id,row,col,x_m,y_m,rss_dbm";

/// Friis free-space path loss in dB.
pub fn free_space_path_loss(distance_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::domain(format!("distance must be positive, got {distance_m}")));
    }
    if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
        return Err(Error::domain(format!("frequency must be positive, got {frequency_hz}")));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance_m * frequency_hz / SPEED_OF_LIGHT).log10())
}

/// Received power at `point` from `ap`; `shadowing_sample` is a standard-normal
/// draw scaled by the shadowing sigma (pass 0 for the deterministic mean).
pub fn rss_at_point(
    ap: &AccessPoint,
    point: (f64, f64),
    params: &PropagationParams,
    room: &RoomGeometry,
    shadowing_sample: f64,
) -> Result<f64> {
    if !room.contains(point) {
        return Err(Error::domain(format!("point ({}, {}) lies outside the room", point.0, point.1)));
    }
    let d = (point.0 - ap.x_m).hypot(point.1 - ap.y_m).max(params.min_distance_m);
    let d0 = params.reference_distance_m;
    let anchor = free_space_path_loss(d0, ap.frequency_hz)?;
    Ok(ap.tx_power_dbm - anchor - 10.0 * params.path_loss_exponent * (d / d0).log10()
        + params.shadowing_sigma_db * shadowing_sample)
}

/// Evaluates every access point at every cell center. Shadowing is drawn
/// per AP, per cell in row-major order from a stream seeded by `seed`.
pub fn generate_ground_truth(
    room: &RoomGeometry,
    aps: &[AccessPoint],
    params: &PropagationParams,
    seed: u64,
) -> Result<RfMap> {
    room.validate()?;
    params.validate()?;
    if aps.is_empty() {
        return Err(Error::Config("at least one access point is required".into()));
    }
    for ap in aps {
        ap.validate(room)?;
    }
    let mut rng = seed::rng(seed);
    let mut layers = Vec::with_capacity(aps.len());
    for ap in aps {
        let mut layer = DMatrix::zeros(room.grid_rows, room.grid_cols);
        for r in 0..room.grid_rows {
            for c in 0..room.grid_cols {
                let z: f64 = StandardNormal.sample(&mut rng);
                layer[(r, c)] = rss_at_point(ap, room.cell_center(r, c), params, room, z)?;
            }
        }
        layers.push(layer);
    }
    Ok(RfMap { geometry: *room, ap_ids: aps.iter().map(|a| a.id.clone()).collect(), layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ap_at(x: f64, y: f64) -> AccessPoint {
        AccessPoint { id: "ap".into(), x_m: x, y_m: y, tx_power_dbm: 21.0, frequency_hz: 2.4e9 }
    }

    #[test]
    fn fspl_reference_value() {
        // 20*log10(4*pi*2.4e9/c) evaluated independently: 40.0468...
        let expected = 20.0 * (4.0 * std::f64::consts::PI * 2.4e9 / 299_792_458.0_f64).log10();
        let got = free_space_path_loss(1.0, 2.4e9).unwrap();
        assert!((got - 40.05).abs() < 0.01, "{got}");
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn fspl_doubling() {
        let step = 20.0 * 2f64.log10();
        let a = free_space_path_loss(3.0, 2.4e9).unwrap();
        assert!((free_space_path_loss(6.0, 2.4e9).unwrap() - a - step).abs() < 1e-12);
        assert!((free_space_path_loss(3.0, 4.8e9).unwrap() - a - step).abs() < 1e-12);
    }

    #[test]
    fn fspl_rejects_bad_input() {
        assert!(matches!(free_space_path_loss(0.0, 1e9), Err(Error::Domain(_))));
        assert!(matches!(free_space_path_loss(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rss_examples() {
        let room = RoomGeometry::new(20.0, 20.0, 2, 2).unwrap();
        let ap = ap_at(0.0, 0.0);
        let params = PropagationParams {
            path_loss_exponent: 2.0,
            reference_distance_m: 1.0,
            shadowing_sigma_db: 0.0,
            min_distance_m: 0.1,
        };
        let rss = rss_at_point(&ap, (10.0, 0.0), &params, &room, 0.0).unwrap();
        assert!((rss - (-39.05)).abs() < 0.01, "{rss}");

        let at_ref = rss_at_point(&ap, (0.6, 0.8), &params, &room, 0.0).unwrap();
        assert!((at_ref - (21.0 - free_space_path_loss(1.0, 2.4e9).unwrap())).abs() < 1e-12);

        let shadowed = PropagationParams { shadowing_sigma_db: 6.0, ..params };
        let base = rss_at_point(&ap, (5.0, 5.0), &params, &room, 0.0).unwrap();
        let plus = rss_at_point(&ap, (5.0, 5.0), &shadowed, &room, 1.0).unwrap();
        assert!((plus - base - 6.0).abs() < 1e-12);

        assert!(rss_at_point(&ap, (21.0, 0.0), &params, &room, 0.0).is_err());
    }

    #[test]
    fn clamp_prevents_singularity() {
        let room = RoomGeometry::lecture_hall();
        let ap = ap_at(2.0, 2.0);
        let rss = rss_at_point(&ap, (2.0, 2.0), &PropagationParams::default(), &room, 0.0).unwrap();
        assert!(rss.is_finite());
    }

    #[test]
    fn lecture_hall_cells() {
        let (h, w) = RoomGeometry::lecture_hall().cell_size();
        assert!((h - 0.58).abs() < 1e-12);
        assert!((w - 1.075).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_is_deterministic() {
        let room = RoomGeometry::lecture_hall();
        let aps = vec![ap_at(2.0, 3.0), ap_at(8.0, 14.0)];
        let p = PropagationParams::default();
        let a = generate_ground_truth(&room, &aps, &p, 7).unwrap();
        let b = generate_ground_truth(&room, &aps, &p, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_ground_truth(&room, &aps, &p, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.layers.len(), 2);
        assert!(a.layers.iter().all(|l| l.shape() == (30, 10) && l.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn ground_truth_symmetric_about_centered_ap() {
        let room = RoomGeometry::new(10.0, 12.0, 6, 5).unwrap();
        let aps = vec![ap_at(5.0, 6.0)];
        let p = PropagationParams { shadowing_sigma_db: 0.0, ..Default::default() };
        let map = generate_ground_truth(&room, &aps, &p, 1).unwrap();
        let l = map.layer(0);
        for r in 0..6 {
            for c in 0..5 {
                assert!((l[(r, c)] - l[(5 - r, c)]).abs() < 1e-9);
                assert!((l[(r, c)] - l[(r, 4 - c)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_ap_list_rejected() {
        let r = generate_ground_truth(&RoomGeometry::lecture_hall(), &[], &Default::default(), 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn truth_csv_round_trip() {
        let room = RoomGeometry::new(3.0, 4.0, 4, 3).unwrap();
        let aps = vec![AccessPoint { id: "a".into(), ..ap_at(1.0, 1.0) }, AccessPoint { id: "b".into(), ..ap_at(2.0, 3.5) }];
        let map = generate_ground_truth(&room, &aps, &PropagationParams::default(), 3).unwrap();
        let text = map.to_csv_string();
        assert_eq!(text.lines().count(), 1 + 2 * 12);
        assert!(text.starts_with("ap_id,row,col,x_m,y_m,rss_dbm\na,0,0,0.5,0.5,"));
        let ids = vec!["a".to_string(), "b".to_string()];
        assert_eq!(RfMap::parse_csv(&text, &room, &ids).unwrap(), map);
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(RfMap::parse_csv(&truncated, &room, &ids).is_err());
        let dup = format!("{text}a,0,0,0.5,0.5,-40\n");
        assert!(matches!(RfMap::parse_csv(&dup, &room, &ids), Err(Error::Parse { line: 26, .. })));
    }

    proptest! {
        #[test]
        fn fspl_monotone(d in 1e-3f64..1e4, f in 1e6f64..1e11, k in 1.001f64..10.0) {
            let base = free_space_path_loss(d, f).unwrap();
            prop_assert!(free_space_path_loss(d * k, f).unwrap() > base);
            prop_assert!(free_space_path_loss(d, f * k).unwrap() > base);
        }

        #[test]
        fn rss_decreases_along_ray(angle in 0.0f64..std::f64::consts::TAU, t0 in 0.1f64..5.0, dt in 0.01f64..5.0) {
            let room = RoomGeometry::new(40.0, 40.0, 2, 2).unwrap();
            let ap = ap_at(20.0, 20.0);
            let p = PropagationParams { shadowing_sigma_db: 0.0, ..Default::default() };
            let at = |t: f64| (20.0 + t * angle.cos(), 20.0 + t * angle.sin());
            let near = rss_at_point(&ap, at(t0), &p, &room, 0.0).unwrap();
            let far = rss_at_point(&ap, at(t0 + dt), &p, &room, 0.0).unwrap();
            prop_assert!(far < near);
        }
    }
}
