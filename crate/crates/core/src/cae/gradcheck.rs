use super::loss::rmse_loss;
use super::tensor::Tensor4;
use super::CaeModel;
use crate::Result;

/// Outcome of comparing analytic gradients against central differences.
/// Every parameter in the model is visited.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params_total: usize,
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub worst_layer: usize,
    pub worst_param: usize,
    pub passed: bool,
}

fn objective(model: &CaeModel, x: &Tensor4) -> Result<f64> {
    Ok(rmse_loss(&model.reconstruct(x)?, x)?.0)
}

// (dweights, dbias) per layer of d rmse(model(x), x) / d params.
fn analytic_gradients(model: &CaeModel, x: &Tensor4) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let acts = model.forward_trace(x)?;
    let (_, mut grad) = rmse_loss(acts.last().expect("non-empty trace"), x)?;
    let mut out = vec![(Vec::new(), Vec::new()); model.layers().len()];
    for (i, layer) in model.layers().iter().enumerate().rev() {
        let (dx, dw, db) = layer.backward(&acts[i], &acts[i + 1], &grad);
        out[i] = (dw, db);
        grad = dx;
    }
    Ok(out)
}

/// Checks the reverse pass of `rmse(model(x), x)` against central finite
/// differences over every weight and bias. The step is scaled to the
/// parameter (1e-5 * max(1, |value|)); relative errors use the larger of
/// the two gradients as denominator, floored to dodge noise around zero.
pub fn grad_check(model: &CaeModel, x: &Tensor4, tolerance: f64) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(model, x)?;
    let mut work = model.clone();
    let mut report = GradCheckReport {
        params_total: model.param_count(),
        params_checked: 0,
        max_rel_error: 0.0,
        worst_layer: 0,
        worst_param: 0,
        passed: true,
    };
    for li in 0..model.layers().len() {
        let (ref dw, ref db) = analytic[li];
        let slot_count = dw.len() + db.len();
        for pi in 0..slot_count {
            let (is_weight, idx) = if pi < dw.len() { (true, pi) } else { (false, pi - dw.len()) };
            let orig = if is_weight { work.layers[li].weights[idx] } else { work.layers[li].bias[idx] };
            let h = 1e-5 * orig.abs().max(1.0);
            let set = |m: &mut CaeModel, v: f64| {
                if is_weight {
                    m.layers[li].weights[idx] = v;
                } else {
                    m.layers[li].bias[idx] = v;
                }
            };
            set(&mut work, orig + h);
            let plus = objective(&work, x)?;
            set(&mut work, orig - h);
            let minus = objective(&work, x)?;
            set(&mut work, orig);
            let numeric = (plus - minus) / (2.0 * h);
            let a = if is_weight { dw[idx] } else { db[idx] };
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.params_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_layer = li;
                report.worst_param = pi;
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::{CaeArch, Layer, LayerSpec};
    use super::*;
    use crate::numerics::SeededRng;

    // Flatten/dense encoder and dense/sigmoid decoder on 8x8 frames: the
    // smallest stack exercising both parameterized layer kinds.
    fn tiny_model() -> CaeModel {
        let layers = vec![
            Layer::new(LayerSpec::Flatten),
            Layer::new(LayerSpec::Dense { in_dim: 64, out_dim: 6 }),
            Layer::new(LayerSpec::Dense { in_dim: 6, out_dim: 64 }),
            Layer::new(LayerSpec::Sigmoid),
            Layer::new(LayerSpec::Reshape { c: 1, h: 8, w: 8 }),
        ];
        CaeModel { height: 8, width: 8, latent: 6, layers, encoder_len: 2 }
    }

    fn randomize(model: &mut CaeModel, seed: u64) {
        let mut rng = SeededRng::new(seed);
        for layer in &mut model.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = rng.next_f64() - 0.5;
            }
        }
    }

    fn random_frame(res: usize, seed: u64) -> Tensor4 {
        let mut rng = SeededRng::new(seed);
        let vals: Vec<f64> = (0..res * res).map(|_| rng.next_f64()).collect();
        Tensor4::new(1, 1, res, res, vals).unwrap()
    }

    #[test]
    fn tiny_model_gradients_agree() {
        let mut model = tiny_model();
        randomize(&mut model, 0x6C01);
        let x = random_frame(8, 0x6C02);
        let report = grad_check(&model, &x, 1e-4).unwrap();
        assert!(report.passed, "max relative error {}", report.max_rel_error);
        assert!(report.max_rel_error < 1e-4);
    }

    #[test]
    fn coverage_is_complete() {
        let mut model = tiny_model();
        randomize(&mut model, 0x6C03);
        let x = random_frame(8, 0x6C04);
        let report = grad_check(&model, &x, 1e-4).unwrap();
        assert_eq!(report.params_total, model.param_count());
        assert_eq!(report.params_checked, report.params_total);
        assert_eq!(report.params_total, 64 * 6 + 6 + 6 * 64 + 64);
    }

    #[test]
    fn zero_model_on_zero_input_is_consistent() {
        let model = tiny_model();
        let x = Tensor4::zeros(1, 1, 8, 8);
        let report = grad_check(&model, &x, 1e-4).unwrap();
        assert!(report.passed, "max relative error {}", report.max_rel_error);
    }

    #[test]
    fn full_convolutional_stack_passes() {
        let arch = CaeArch::new(16, 2).unwrap();
        let mut rng = SeededRng::new(0x6C05);
        let model = CaeModel::new(&arch, &mut rng).unwrap();
        let x = random_frame(16, 0x6C06);
        let report = grad_check(&model, &x, 1e-4).unwrap();
        assert!(report.passed, "max relative error {}", report.max_rel_error);
    }
}
