//! Synthetic dataset pipeline: sweep the equilibrium oracle over a
//! pressure/payload grid, read endpoint poses off the marker stations, run
//! the G1 recovery, and persist the labeled records as JSON lines.
//!
//! Generation is deterministic for a given seed: each grid cell draws its
//! marker noise from its own counter-derived RNG stream, so results do not
//! depend on execution order and cells may run in parallel.

use crate::beam::{
    simulate_equilibrium, BeamParams, FixedPointOptions, LoadCase, STANDARD_GRAVITY,
};
use crate::error::{Error, Result};
use crate::hermite::{solve_g1, BoundaryData, SolverOptions};
use crate::quadrature::QuadratureConfig;
use crate::spiral::Pose;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Schema tag of the JSONL dataset format.
pub const DATASET_SCHEMA: &str = "clothoid-arm/1";

/// Nominal payload span (g) used to normalize load errors.
pub const PAYLOAD_RANGE_G: f64 = 25.44;

/// Cup-and-hook tare mass (g); beads are added on top of it.
pub const CUP_MASS_G: f64 = 3.61;

/// Mass of one loading bead (g).
pub const BEAD_MASS_G: f64 = 0.254;

/// Number of beads in the full sweep.
pub const BEAD_COUNT: usize = 100;

/// Sweep configuration. The default grid is 9 pressure levels x 101 payload
/// levels (cup plus 0..=100 beads), 909 cells in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub pressures_kpa: Vec<f64>,
    pub payloads_g: Vec<f64>,
    /// Curvature order of the recovered representation.
    pub order: usize,
    pub seed: u64,
    /// Std of Gaussian noise added to marker positions (m); 0 disables it.
    pub noise_std: f64,
    /// Marker stations as fractions of the arc length; must start at 0 and
    /// end at 1 (base and tip anchor the recovery).
    pub marker_fractions: Vec<f64>,
    /// Weighted-residual bound for admitting a record at orders >= 2. Lower
    /// orders cannot meet it on shapes outside their model class, so for
    /// them admission only requires the solve to reach its stationary point.
    pub admission_tolerance: f64,
}

impl GridConfig {
    pub fn paper_pressures() -> Vec<f64> {
        (0..9).map(|i| 20.0 + 10.0 * i as f64).collect()
    }

    pub fn paper_payloads() -> Vec<f64> {
        (0..=BEAD_COUNT)
            .map(|beads| CUP_MASS_G + BEAD_MASS_G * beads as f64)
            .collect()
    }

    pub fn cells(&self) -> usize {
        self.pressures_kpa.len() * self.payloads_g.len()
    }

    fn validate(&self) -> Result<()> {
        if self.pressures_kpa.is_empty() || self.payloads_g.is_empty() {
            return Err(Error::invalid_config("grid must be non-empty"));
        }
        if self.order > crate::spiral::MAX_CURVATURE_ORDER {
            return Err(Error::invalid_config(format!(
                "grid order {} exceeds the maximum {}",
                self.order,
                crate::spiral::MAX_CURVATURE_ORDER
            )));
        }
        if self.marker_fractions.len() < 2
            || self.marker_fractions.first() != Some(&0.0)
            || self.marker_fractions.last() != Some(&1.0)
            || self.marker_fractions.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid_config(
                "marker fractions must increase from 0 to 1",
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid_config("noise std must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            pressures_kpa: Self::paper_pressures(),
            payloads_g: Self::paper_payloads(),
            order: 2,
            seed: 42,
            noise_std: 0.0,
            // Includes the thirds used as evaluation reference points.
            marker_fractions: vec![0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0],
            admission_tolerance: 1e-6,
        }
    }
}

/// One labeled sample, as serialized per JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    #[serde(rename = "P_kPa")]
    pub pressure_kpa: f64,
    #[serde(rename = "W_g")]
    pub payload_g: f64,
    pub theta0: f64,
    pub kappa: Vec<f64>,
    pub markers: Vec<Pose>,
    pub residual: f64,
}

/// Dataset-wide metadata carried by the JSONL header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema: String,
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(rename = "L_m")]
    pub length: f64,
    /// Marker stations in meters.
    pub stations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<DataRecord>,
}

/// A grid cell that failed generation, with the reason.
#[derive(Debug, Clone)]
pub struct QuarantinedCell {
    pub pressure_kpa: f64,
    pub payload_g: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub dataset: Dataset,
    pub quarantine: Vec<QuarantinedCell>,
}

enum CellOutcome {
    Record(DataRecord),
    Quarantined(QuarantinedCell),
}

/// Generate the full grid. Cells run in parallel; records come out in
/// canonical order (pressure-major, payload-minor). Per-cell failures land
/// in the quarantine list rather than aborting the sweep.
pub fn generate_grid(
    params: &BeamParams,
    grid: &GridConfig,
    quad: &QuadratureConfig,
) -> Result<GridOutcome> {
    params.validate()?;
    grid.validate()?;
    let stations: Vec<f64> = grid
        .marker_fractions
        .iter()
        .map(|f| f * params.length)
        .collect();
    let fp_opts = FixedPointOptions::default();
    let solver = SolverOptions {
        quadrature: quad.clone(),
        ..SolverOptions::default()
    };

    let mut cells = Vec::with_capacity(grid.cells());
    for &pressure in &grid.pressures_kpa {
        for &payload in &grid.payloads_g {
            cells.push((cells.len() as u64, pressure, payload));
        }
    }

    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(index, pressure, payload)| {
            match generate_cell(
                params, grid, &stations, &fp_opts, &solver, index, pressure, payload,
            ) {
                Ok(record) => CellOutcome::Record(record),
                Err(err) => CellOutcome::Quarantined(QuarantinedCell {
                    pressure_kpa: pressure,
                    payload_g: payload,
                    reason: err.to_string(),
                }),
            }
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut quarantine = Vec::new();
    for outcome in outcomes {
        match outcome {
            CellOutcome::Record(r) => records.push(r),
            CellOutcome::Quarantined(q) => quarantine.push(q),
        }
    }
    log::info!(
        "grid sweep: {} cells -> {} records, {} quarantined",
        cells.len(),
        records.len(),
        quarantine.len()
    );
    Ok(GridOutcome {
        dataset: Dataset {
            meta: DatasetMeta {
                schema: DATASET_SCHEMA.to_string(),
                order: grid.order,
                length: params.length,
                stations,
            },
            records,
        },
        quarantine,
    })
}

#[allow(clippy::too_many_arguments)]
fn generate_cell(
    params: &BeamParams,
    grid: &GridConfig,
    stations: &[f64],
    fp_opts: &FixedPointOptions,
    solver: &SolverOptions,
    index: u64,
    pressure_kpa: f64,
    payload_g: f64,
) -> Result<DataRecord> {
    let load = LoadCase::payload(payload_g * 1e-3 * STANDARD_GRAVITY)?;
    let eq = simulate_equilibrium(params, pressure_kpa, &load, fp_opts)?;

    let mut markers = Vec::with_capacity(stations.len());
    for &s in stations {
        markers.push(eq.pose_at(s)?);
    }
    if grid.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
        rng.set_stream(index);
        let normal = Normal::new(0.0, grid.noise_std)
            .map_err(|e| Error::invalid_config(format!("noise distribution: {e}")))?;
        for marker in &mut markers {
            marker.x += normal.sample(&mut rng);
            marker.y += normal.sample(&mut rng);
        }
    }

    let base = markers[0];
    let tip = *markers.last().expect("at least two markers");
    let boundary = BoundaryData::new(base, tip, params.length)?;
    let report = solve_g1(&boundary, grid.order, solver)?;

    let norm = report.residual_norm();
    // Endpoint noise propagates into the weighted residual at roughly
    // 2 sigma / L per position component.
    let tolerance = grid.admission_tolerance + 3.0 * grid.noise_std * 2.0 / params.length;
    if grid.order >= 2 && norm > tolerance {
        return Err(Error::Data(format!(
            "solve residual {norm:e} above admission tolerance {tolerance:e}"
        )));
    }

    Ok(DataRecord {
        pressure_kpa,
        payload_g,
        theta0: base.theta,
        kappa: report.kappa.coeffs().to_vec(),
        markers,
        residual: norm,
    })
}

/// Seeded validation split: `n_val` records drawn uniformly without
/// replacement, the remainder training. Both halves keep the original
/// record order; the partition is disjoint and exhaustive.
pub fn split(
    records: &[DataRecord],
    n_val: usize,
    seed: u64,
) -> Result<(Vec<DataRecord>, Vec<DataRecord>)> {
    if n_val == 0 {
        return Ok((records.to_vec(), Vec::new()));
    }
    if n_val >= records.len() {
        return Err(Error::invalid_config(format!(
            "cannot hold out {n_val} of {} records",
            records.len()
        )));
    }
    let mut indices: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut is_val = vec![false; records.len()];
    for &i in &indices[..n_val] {
        is_val[i] = true;
    }
    let mut train = Vec::with_capacity(records.len() - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (i, record) in records.iter().enumerate() {
        if is_val[i] {
            val.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    Ok((train, val))
}

impl Dataset {
    /// Write the header line followed by one record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        self.write(&mut out)
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", serde_json::to_string(&self.meta)?)?;
        for record in &self.records {
            writeln!(out, "{}", serde_json::to_string(record)?)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Self::read(BufReader::new(file))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("dataset file is empty (missing header)".into()))??;
        let meta: DatasetMeta =
            serde_json::from_str(&header).map_err(|e| Error::MalformedRecord {
                line: 1,
                message: e.to_string(),
            })?;
        if meta.schema != DATASET_SCHEMA {
            return Err(Error::SchemaVersionMismatch {
                expected: DATASET_SCHEMA.to_string(),
                found: meta.schema,
            });
        }
        let mut records = Vec::new();
        for (offset, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DataRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    line: offset + 2,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(Self { meta, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spiral::{CurvaturePolynomial, ShapeRep};
    use approx::assert_abs_diff_eq;

    fn tiny_grid() -> GridConfig {
        GridConfig {
            pressures_kpa: vec![60.0],
            payloads_g: vec![CUP_MASS_G],
            ..GridConfig::default()
        }
    }

    #[test]
    fn default_grid_has_909_cells() {
        let grid = GridConfig::default();
        assert_eq!(grid.pressures_kpa.len(), 9);
        assert_eq!(grid.payloads_g.len(), 101);
        assert_eq!(grid.cells(), 909);
        assert_abs_diff_eq!(grid.payloads_g[0], 3.61);
        assert_abs_diff_eq!(*grid.payloads_g.last().unwrap(), 29.01, epsilon = 1e-12);
    }

    #[test]
    fn single_cell_record_replays_through_the_spiral() {
        let params = BeamParams::default();
        let quad = QuadratureConfig::default();
        let outcome = generate_grid(&params, &tiny_grid(), &quad).unwrap();
        assert!(outcome.quarantine.is_empty());
        assert_eq!(outcome.dataset.records.len(), 1);
        let record = &outcome.dataset.records[0];
        assert!(record.residual < 1e-6);

        let shape = ShapeRep::new(
            CurvaturePolynomial::new(record.kappa.clone()).unwrap(),
            record.theta0,
            params.length,
        )
        .unwrap();
        let tip = shape.eval_pose(params.length, &quad).unwrap();
        let truth = record.markers.last().unwrap();
        let err = (tip.x - truth.x).hypot(tip.y - truth.y);
        assert!(err < 1e-6 * params.length, "tip replay error {err}");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let params = BeamParams::default();
        let quad = QuadratureConfig::default();
        let grid = GridConfig {
            pressures_kpa: vec![40.0, 80.0],
            payloads_g: vec![5.0, 10.0],
            noise_std: 1e-4,
            ..GridConfig::default()
        };
        let a = generate_grid(&params, &grid, &quad).unwrap();
        let b = generate_grid(&params, &grid, &quad).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.dataset.write(&mut buf_a).unwrap();
        b.dataset.write(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b, "same seed must give byte-identical output");

        let other = generate_grid(
            &params,
            &GridConfig {
                seed: 7,
                ..grid.clone()
            },
            &quad,
        )
        .unwrap();
        let mut buf_c = Vec::new();
        other.dataset.write(&mut buf_c).unwrap();
        assert_ne!(buf_a, buf_c, "different seed must perturb noisy markers");
    }

    #[test]
    fn records_cover_the_grid_exactly_once() {
        let params = BeamParams::default();
        let quad = QuadratureConfig::default();
        let grid = GridConfig {
            pressures_kpa: vec![20.0, 60.0, 100.0],
            payloads_g: vec![3.61, 16.31, 29.01],
            ..GridConfig::default()
        };
        let outcome = generate_grid(&params, &grid, &quad).unwrap();
        let total = outcome.dataset.records.len() + outcome.quarantine.len();
        assert_eq!(total, grid.cells());
        let mut seen: Vec<(u64, u64)> = outcome
            .dataset
            .records
            .iter()
            .map(|r| (r.pressure_kpa.to_bits(), r.payload_g.to_bits()))
            .chain(
                outcome
                    .quarantine
                    .iter()
                    .map(|q| (q.pressure_kpa.to_bits(), q.payload_g.to_bits())),
            )
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), grid.cells());
    }

    #[test]
    fn split_partitions_disjointly() {
        let records: Vec<DataRecord> = (0..50)
            .map(|i| DataRecord {
                pressure_kpa: i as f64,
                payload_g: 0.0,
                theta0: 0.0,
                kappa: vec![0.0],
                markers: vec![],
                residual: 0.0,
            })
            .collect();
        let (train, val) = split(&records, 10, 3).unwrap();
        assert_eq!(train.len(), 40);
        assert_eq!(val.len(), 10);
        let mut all: Vec<u64> = train
            .iter()
            .chain(&val)
            .map(|r| r.pressure_kpa.to_bits())
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 50);

        let (train2, val2) = split(&records, 10, 3).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);

        let (all_train, empty) = split(&records, 0, 3).unwrap();
        assert_eq!(all_train.len(), 50);
        assert!(empty.is_empty());
        assert!(split(&records, 50, 3).is_err());
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let params = BeamParams::default();
        let quad = QuadratureConfig::default();
        let outcome = generate_grid(&params, &tiny_grid(), &quad).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        outcome.dataset.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(loaded, outcome.dataset);
    }

    #[test]
    fn empty_dataset_round_trips_as_header_only() {
        let ds = Dataset {
            meta: DatasetMeta {
                schema: DATASET_SCHEMA.to_string(),
                order: 2,
                length: 0.15,
                stations: vec![0.0, 0.15],
            },
            records: vec![],
        };
        let mut buf = Vec::new();
        ds.write(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        let loaded = Dataset::read(std::io::Cursor::new(buf)).unwrap();
        assert!(loaded.records.is_empty());
    }

    #[test]
    fn corrupted_line_reports_its_number() {
        let text = format!(
            "{}\n{{\"P_kPa\":20.0,\"W_g\":3.61,\"theta0\":0.0,\"kappa\":[1.0],\"markers\":[],\"residual\":0.0}}\nnot json\n",
            serde_json::to_string(&DatasetMeta {
                schema: DATASET_SCHEMA.to_string(),
                order: 0,
                length: 0.15,
                stations: vec![0.0, 0.15],
            })
            .unwrap()
        );
        let err = Dataset::read(std::io::Cursor::new(text)).unwrap_err();
        match err {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let text =
            "{\"schema\":\"clothoid-arm/99\",\"N\":2,\"L_m\":0.15,\"stations\":[0.0,0.15]}\n";
        let err = Dataset::read(std::io::Cursor::new(text)).unwrap_err();
        assert!(matches!(err, Error::SchemaVersionMismatch { .. }));
    }

    #[test]
    fn record_json_schema_matches_contract() {
        let record = DataRecord {
            pressure_kpa: 20.0,
            payload_g: 3.61,
            theta0: 0.1,
            kappa: vec![1.0, 2.0, 3.0],
            markers: vec![Pose::new(0.0, 0.0, 0.1), Pose::new(0.1, 0.05, 0.9)],
            residual: 1e-9,
        };
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.starts_with("{\"P_kPa\":20.0,\"W_g\":3.61,\"theta0\":0.1,\"kappa\":[1.0,2.0,3.0],\"markers\":[[0.0,0.0,0.1],[0.1,0.05,0.9]]"));
    }
}
