//! Learned forward and inverse actuator models, plus evaluation metrics.
//!
//! The forward model maps `[P, W]` to the shape representation
//! `[c_0..c_N, theta0]`; the inverse model maps `[c_0..c_N, theta0, P]` to
//! the payload. Both are small MLPs with fixed architectures (64/32/16 and
//! 16/8 hidden units) trained on records produced by the dataset sweep.

mod mlp;

pub use mlp::{
    load_model, mae_loss_and_gradient, save_model, train, FeatureScale, Hyperparams, MlpModel,
    ModelRole, MODEL_SCHEMA,
};

use crate::dataset::DataRecord;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::spiral::{CurvaturePolynomial, Pose, ShapeRep};
use std::io::Write;

/// Hidden widths of the forward model.
pub const FORWARD_HIDDEN: [usize; 3] = [64, 32, 16];

/// Hidden widths of the inverse model.
pub const INVERSE_HIDDEN: [usize; 2] = [16, 8];

/// Convolve with a normalized Gaussian kernel (`sigma = window/5`), the
/// kernel re-normalized over its valid support near the edges. Window must
/// be odd; a window of 1 is the identity.
pub fn gaussian_smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid_config(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    if window == 1 || series.is_empty() {
        return Ok(series.to_vec());
    }
    let half = (window / 2) as isize;
    let sigma = window as f64 / 5.0;
    let kernel: Vec<f64> = (-half..=half)
        .map(|j| (-0.5 * (j as f64 / sigma).powi(2)).exp())
        .collect();
    let n = series.len() as isize;
    let mut out = Vec::with_capacity(series.len());
    for i in 0..n {
        let mut acc = 0.0;
        let mut weight = 0.0;
        for (k, &g) in kernel.iter().enumerate() {
            let j = i + k as isize - half;
            if j >= 0 && j < n {
                acc += g * series[j as usize];
                weight += g;
            }
        }
        out.push(acc / weight);
    }
    Ok(out)
}

/// The three evaluation stations along the arc: one third, two thirds, tip.
pub const REFERENCE_FRACTIONS: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];

/// Euclidean position errors of a predicted shape against truth poses at the
/// three reference stations, as percentages of the arc length.
pub fn position_errors(
    pred: &ShapeRep,
    truth: &[Pose; 3],
    quad: &QuadratureConfig,
) -> Result<[f64; 3]> {
    let length = pred.length();
    let mut out = [0.0; 3];
    for (i, (fraction, truth_pose)) in REFERENCE_FRACTIONS.iter().zip(truth).enumerate() {
        let pose = pred.eval_pose(fraction * length, quad)?;
        out[i] = 100.0 * pose.position_distance(truth_pose) / length;
    }
    Ok(out)
}

/// Payload estimate error as a percentage of the payload range.
pub fn load_error(predicted_g: f64, actual_g: f64, range_g: f64) -> Result<f64> {
    if !(range_g > 0.0 && range_g.is_finite()) {
        return Err(Error::invalid_params(format!(
            "payload range must be positive, got {range_g}"
        )));
    }
    Ok(100.0 * (predicted_g - actual_g).abs() / range_g)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd {
            mean: 0.0,
            std: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Per-station position errors (mean +- std, % of L) and, when an inverse
/// model was evaluated, the load error (% of the payload range).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pos_err_third: MeanStd,
    pub pos_err_twothirds: MeanStd,
    pub pos_err_tip: MeanStd,
    pub load_err: Option<MeanStd>,
}

type FeatureRows = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn record_kappa(record: &DataRecord, order: usize) -> Result<&[f64]> {
    if record.kappa.len() != order + 1 {
        return Err(Error::Data(format!(
            "record carries order {} coefficients, expected order {order}",
            record.kappa.len().saturating_sub(1)
        )));
    }
    Ok(&record.kappa)
}

fn forward_rows(records: &[DataRecord], order: usize) -> Result<FeatureRows> {
    let mut inputs = Vec::with_capacity(records.len());
    let mut targets = Vec::with_capacity(records.len());
    for record in records {
        let kappa = record_kappa(record, order)?;
        inputs.push(vec![record.pressure_kpa, record.payload_g]);
        let mut q = kappa.to_vec();
        q.push(record.theta0);
        targets.push(q);
    }
    Ok((inputs, targets))
}

fn inverse_rows(records: &[DataRecord], order: usize) -> Result<FeatureRows> {
    let mut inputs = Vec::with_capacity(records.len());
    let mut targets = Vec::with_capacity(records.len());
    for record in records {
        let kappa = record_kappa(record, order)?;
        let mut q = kappa.to_vec();
        q.push(record.theta0);
        q.push(record.pressure_kpa);
        inputs.push(q);
        targets.push(vec![record.payload_g]);
    }
    Ok((inputs, targets))
}

/// Train the forward model `[P, W] -> [c_0..c_N, theta0]` on the given
/// (training-split) records.
pub fn train_forward(
    records: &[DataRecord],
    order: usize,
    shape_length: f64,
    hyper: &Hyperparams,
) -> Result<(MlpModel, Vec<f64>)> {
    let (inputs, targets) = forward_rows(records, order)?;
    let mut sizes = vec![2];
    sizes.extend_from_slice(&FORWARD_HIDDEN);
    sizes.push(order + 2);
    let mut model = MlpModel::init(&sizes, hyper.seed)?;
    let history = train(&mut model, &inputs, &targets, hyper)?;
    model.set_role(ModelRole::Forward, order, Some(shape_length));
    Ok((model, history))
}

/// Train the inverse model `[c_0..c_N, theta0, P] -> W` on the given
/// (training-split) records.
pub fn train_inverse(
    records: &[DataRecord],
    order: usize,
    hyper: &Hyperparams,
) -> Result<(MlpModel, Vec<f64>)> {
    let (inputs, targets) = inverse_rows(records, order)?;
    let mut sizes = vec![order + 3];
    sizes.extend_from_slice(&INVERSE_HIDDEN);
    sizes.push(1);
    let mut model = MlpModel::init(&sizes, hyper.seed)?;
    let history = train(&mut model, &inputs, &targets, hyper)?;
    model.set_role(ModelRole::Inverse, order, None);
    Ok((model, history))
}

/// Predict the shape under (pressure, payload). Queries outside the training
/// envelope are served with a warning.
pub fn forward_predict(model: &MlpModel, pressure_kpa: f64, payload_g: f64) -> Result<ShapeRep> {
    if model.role() != Some(ModelRole::Forward) {
        return Err(Error::RoleMismatch(
            "forward prediction needs a forward-role model".into(),
        ));
    }
    let length = model
        .shape_length()
        .ok_or_else(|| Error::RoleMismatch("forward model is missing its shape length".into()))?;
    if model.output_width() != model.order() + 2 {
        return Err(Error::RoleMismatch(format!(
            "output width {} disagrees with order {}",
            model.output_width(),
            model.order()
        )));
    }
    let input = [pressure_kpa, payload_g];
    if !model.within_envelope(&input) {
        log::warn!(
            "forward query (P={pressure_kpa} kPa, W={payload_g} g) lies outside the training envelope"
        );
    }
    let q = model.predict(&input)?;
    let (coeffs, theta0) = q.split_at(q.len() - 1);
    ShapeRep::new(
        CurvaturePolynomial::new(coeffs.to_vec())?,
        theta0[0],
        length,
    )
}

/// Estimate the payload (g) that produced `shape` at the given pressure.
/// The estimate is clamped to the physical range `[0, training max]`.
pub fn inverse_predict(model: &MlpModel, shape: &ShapeRep, pressure_kpa: f64) -> Result<f64> {
    if model.role() != Some(ModelRole::Inverse) {
        return Err(Error::RoleMismatch(
            "inverse prediction needs an inverse-role model".into(),
        ));
    }
    if shape.kappa().order() != model.order() {
        return Err(Error::RoleMismatch(format!(
            "shape order {} disagrees with model order {}",
            shape.kappa().order(),
            model.order()
        )));
    }
    let mut input = shape.kappa().coeffs().to_vec();
    input.push(shape.theta0());
    input.push(pressure_kpa);
    let out = model.predict(&input)?;
    let norm = model.output_norm()[0];
    let max_payload = norm.offset + norm.scale;
    Ok(out[0].clamp(0.0, max_payload))
}

/// Position errors (%) of the forward model over a validation set, one
/// vector per reference station.
#[derive(Debug, Clone, Default)]
pub struct ForwardErrors {
    pub third: Vec<f64>,
    pub twothirds: Vec<f64>,
    pub tip: Vec<f64>,
}

impl ForwardErrors {
    pub fn report(&self) -> EvalReport {
        EvalReport {
            pos_err_third: mean_std(&self.third),
            pos_err_twothirds: mean_std(&self.twothirds),
            pos_err_tip: mean_std(&self.tip),
            load_err: None,
        }
    }
}

/// Indices of the reference stations (L/3, 2L/3, L) within the dataset's
/// marker stations.
pub fn reference_marker_indices(stations: &[f64], length: f64) -> Result<[usize; 3]> {
    let mut out = [0usize; 3];
    for (slot, fraction) in out.iter_mut().zip(REFERENCE_FRACTIONS) {
        let target = fraction * length;
        let found = stations
            .iter()
            .position(|&s| (s - target).abs() <= 1e-9 * length)
            .ok_or_else(|| {
                Error::invalid_config(format!(
                    "dataset markers lack the reference station at {target} m"
                ))
            })?;
        *slot = found;
    }
    Ok(out)
}

/// Evaluate the forward model against the truth markers of the given
/// (validation-split) records.
pub fn evaluate_forward(
    model: &MlpModel,
    records: &[DataRecord],
    stations: &[f64],
    quad: &QuadratureConfig,
) -> Result<ForwardErrors> {
    let length = model
        .shape_length()
        .ok_or_else(|| Error::RoleMismatch("forward model is missing its shape length".into()))?;
    let idx = reference_marker_indices(stations, length)?;
    let mut errors = ForwardErrors::default();
    for record in records {
        if record.markers.len() != stations.len() {
            return Err(Error::Data(format!(
                "record has {} markers but the dataset declares {} stations",
                record.markers.len(),
                stations.len()
            )));
        }
        let shape = forward_predict(model, record.pressure_kpa, record.payload_g)?;
        let truth = [
            record.markers[idx[0]],
            record.markers[idx[1]],
            record.markers[idx[2]],
        ];
        let errs = position_errors(&shape, &truth, quad)?;
        errors.third.push(errs[0]);
        errors.twothirds.push(errs[1]);
        errors.tip.push(errs[2]);
    }
    Ok(errors)
}

/// Evaluate the inverse model over validation records: load errors as % of
/// `range_g`.
pub fn evaluate_inverse(
    model: &MlpModel,
    records: &[DataRecord],
    shape_length: f64,
    range_g: f64,
) -> Result<Vec<f64>> {
    let mut errors = Vec::with_capacity(records.len());
    for record in records {
        let shape = ShapeRep::new(
            CurvaturePolynomial::new(record.kappa.clone())?,
            record.theta0,
            shape_length,
        )?;
        let predicted = inverse_predict(model, &shape, record.pressure_kpa)?;
        errors.push(load_error(predicted, record.payload_g, range_g)?);
    }
    Ok(errors)
}

/// CSV rows `order,err_third_mean,err_third_std,err_twothirds_mean,
/// err_twothirds_std,err_tip_mean,err_tip_std,load_err_mean,load_err_std`
/// (load columns empty without an inverse evaluation).
pub fn write_eval_csv<W: Write>(out: &mut W, rows: &[(usize, EvalReport)]) -> Result<()> {
    writeln!(
        out,
        "order,err_third_mean,err_third_std,err_twothirds_mean,err_twothirds_std,err_tip_mean,err_tip_std,load_err_mean,load_err_std"
    )?;
    for (order, report) in rows {
        let load = report
            .load_err
            .map(|m| {
                format!(
                    "{},{}",
                    crate::spiral::fmt_full(m.mean),
                    crate::spiral::fmt_full(m.std)
                )
            })
            .unwrap_or_else(|| ",".to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            order,
            crate::spiral::fmt_full(report.pos_err_third.mean),
            crate::spiral::fmt_full(report.pos_err_third.std),
            crate::spiral::fmt_full(report.pos_err_twothirds.mean),
            crate::spiral::fmt_full(report.pos_err_twothirds.std),
            crate::spiral::fmt_full(report.pos_err_tip.mean),
            crate::spiral::fmt_full(report.pos_err_tip.std),
            load
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_curvature_records(n: usize) -> Vec<DataRecord> {
        // Labels with c_1 = c_2 = 0: curvature responds linearly to pressure
        // and payload only through the constant term.
        (0..n)
            .map(|i| {
                let p = 20.0 + 80.0 * (i % 9) as f64 / 8.0;
                let w = 3.61 + 25.4 * (i / 9) as f64 / ((n / 9) as f64);
                let kappa0 = 0.1 * p - 0.05 * w;
                DataRecord {
                    pressure_kpa: p,
                    payload_g: w,
                    theta0: 0.0,
                    kappa: vec![kappa0, 0.0, 0.0],
                    markers: vec![],
                    residual: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn smoothing_preserves_constants() {
        let series = vec![2.5; 12];
        let out = gaussian_smooth(&series, 5).unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_window_one_is_identity() {
        let series = vec![1.0, -2.0, 3.5, 0.0];
        assert_eq!(gaussian_smooth(&series, 1).unwrap(), series);
    }

    #[test]
    fn smoothing_impulse_reproduces_kernel() {
        let mut series = vec![0.0; 11];
        series[5] = 1.0;
        let out = gaussian_smooth(&series, 5).unwrap();
        let sigma = 5.0 / 5.0;
        let raw: Vec<f64> = (-2..=2)
            .map(|j| (-0.5 * (j as f64 / sigma).powi(2)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        for (k, &g) in raw.iter().enumerate() {
            assert_abs_diff_eq!(out[3 + k], g / total, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(out.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_rejects_even_window() {
        assert!(gaussian_smooth(&[1.0, 2.0], 4).is_err());
        assert!(gaussian_smooth(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn position_errors_vanish_on_truth() {
        let quad = QuadratureConfig::default();
        let shape = ShapeRep::new(CurvaturePolynomial::constant(8.0), 0.0, 0.15).unwrap();
        let truth = [
            shape.eval_pose(0.05, &quad).unwrap(),
            shape.eval_pose(0.10, &quad).unwrap(),
            shape.eval_pose(0.15, &quad).unwrap(),
        ];
        let errs = position_errors(&shape, &truth, &quad).unwrap();
        for e in errs {
            assert!(e < 1e-10);
        }
    }

    #[test]
    fn tip_offset_of_three_mm_is_two_percent() {
        let quad = QuadratureConfig::default();
        let shape = ShapeRep::new(CurvaturePolynomial::constant(0.0), 0.0, 0.15).unwrap();
        let mut truth = [
            shape.eval_pose(0.05, &quad).unwrap(),
            shape.eval_pose(0.10, &quad).unwrap(),
            shape.eval_pose(0.15, &quad).unwrap(),
        ];
        truth[2].y += 0.003;
        let errs = position_errors(&shape, &truth, &quad).unwrap();
        assert_abs_diff_eq!(errs[2], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn load_error_arithmetic() {
        assert_eq!(load_error(10.0, 10.0, 25.44).unwrap(), 0.0);
        assert_abs_diff_eq!(
            load_error(10.2544, 10.0, 25.44).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        assert!(load_error(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn reference_indices_found_in_default_stations() {
        let length = 0.15;
        let stations = [0.0, length / 3.0, length / 2.0, 2.0 * length / 3.0, length];
        let idx = reference_marker_indices(&stations, length).unwrap();
        assert_eq!(idx, [1, 3, 4]);
        let bad = [0.0, length / 4.0, length];
        assert!(reference_marker_indices(&bad, length).is_err());
    }

    #[test]
    fn forward_trained_on_constant_curvature_keeps_higher_terms_small() {
        let records = constant_curvature_records(90);
        let hyper = Hyperparams::default();
        let (model, history) = train_forward(&records, 2, 0.15, &hyper).unwrap();
        assert!(history.last().unwrap() < &0.05);
        let shape = forward_predict(&model, 60.0, 16.0).unwrap();
        let c = shape.kappa().coeffs();
        let scale = 1.0 / 0.15;
        assert!(
            c[1].abs() * 0.15 < 0.05 * c[0].abs().max(scale),
            "c1 {} too large vs c0 {}",
            c[1],
            c[0]
        );
        assert!(
            c[2].abs() * 0.15 * 0.15 < 0.05 * c[0].abs().max(scale),
            "c2 {} too large vs c0 {}",
            c[2],
            c[0]
        );
    }

    #[test]
    fn forward_memorizes_training_points_at_small_scale() {
        let quad = QuadratureConfig::default();
        let records = constant_curvature_records(90);
        let (model, _) = train_forward(&records, 2, 0.15, &Hyperparams::default()).unwrap();
        // Query an actual training point: the predicted tip must land within
        // a few training-error equivalents of the label's tip.
        let record = &records[40];
        let label = ShapeRep::new(
            CurvaturePolynomial::new(record.kappa.clone()).unwrap(),
            record.theta0,
            0.15,
        )
        .unwrap();
        let predicted = forward_predict(&model, record.pressure_kpa, record.payload_g).unwrap();
        let tip_label = label.eval_pose(0.15, &quad).unwrap();
        let tip_pred = predicted.eval_pose(0.15, &quad).unwrap();
        let err = tip_pred.position_distance(&tip_label);
        assert!(err < 0.02 * 0.15, "training-point tip error {err} m");
    }

    #[test]
    fn role_mismatch_is_rejected() {
        let records = constant_curvature_records(45);
        let hyper = Hyperparams {
            epochs: 2,
            ..Hyperparams::default()
        };
        let (forward, _) = train_forward(&records, 2, 0.15, &hyper).unwrap();
        let (inverse, _) = train_inverse(&records, 2, &hyper).unwrap();
        let shape = ShapeRep::new(CurvaturePolynomial::constant(5.0), 0.0, 0.15).unwrap();
        assert!(matches!(
            inverse_predict(&forward, &shape, 40.0),
            Err(Error::RoleMismatch(_))
        ));
        assert!(matches!(
            forward_predict(&inverse, 40.0, 10.0),
            Err(Error::RoleMismatch(_))
        ));
        // Wrong curvature order against the inverse model.
        assert!(matches!(
            inverse_predict(&inverse, &shape, 40.0),
            Err(Error::RoleMismatch(_))
        ));
    }

    #[test]
    fn inverse_estimates_are_clamped_to_physical_range() {
        let records = constant_curvature_records(45);
        let hyper = Hyperparams {
            epochs: 3,
            ..Hyperparams::default()
        };
        let (inverse, _) = train_inverse(&records, 2, &hyper).unwrap();
        // A wildly out-of-envelope shape cannot produce a negative payload.
        let shape = ShapeRep::new(
            CurvaturePolynomial::new(vec![900.0, 0.0, 0.0]).unwrap(),
            0.0,
            0.15,
        )
        .unwrap();
        let w = inverse_predict(&inverse, &shape, 20.0).unwrap();
        assert!(w >= 0.0);
        let max = records
            .iter()
            .map(|r| r.payload_g)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(w <= max + 1e-9);
    }

    #[test]
    fn inverse_prediction_is_pure() {
        let records = constant_curvature_records(45);
        let hyper = Hyperparams {
            epochs: 3,
            ..Hyperparams::default()
        };
        let (inverse, _) = train_inverse(&records, 2, &hyper).unwrap();
        let shape = ShapeRep::new(
            CurvaturePolynomial::new(vec![4.0, 0.0, 0.0]).unwrap(),
            0.0,
            0.15,
        )
        .unwrap();
        let a = inverse_predict(&inverse, &shape, 40.0).unwrap();
        let b = inverse_predict(&inverse, &shape, 40.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_csv_has_contracted_columns() {
        let report = EvalReport {
            pos_err_third: MeanStd {
                mean: 1.0,
                std: 0.1,
            },
            pos_err_twothirds: MeanStd {
                mean: 2.0,
                std: 0.2,
            },
            pos_err_tip: MeanStd {
                mean: 3.0,
                std: 0.3,
            },
            load_err: Some(MeanStd {
                mean: 0.5,
                std: 0.05,
            }),
        };
        let mut buf = Vec::new();
        write_eval_csv(&mut buf, &[(2, report)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("order,err_third_mean,err_third_std,err_twothirds_mean,err_twothirds_std,err_tip_mean,err_tip_std,load_err_mean,load_err_std")
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("2,"));
        assert_eq!(row.split(',').count(), 9);
    }
}
