use skinn::inference::{infer_phi, raw_hessian};
use skinn::nn::{Activation, MlpConfig};
use skinn::skr::{ReprId, Representation};
use skinn::synth::{bsm_panel, PanelSpec};
use skinn::trainer::{train_on, FittedModel, TrainConfig, TrainingData};

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 1000,
        lr: 3e-3,
        n_colloc: 256,
        mlp: MlpConfig::new(3, 2, 8).with_activation(Activation::Silu),
        ..TrainConfig::new(ReprId::Bsm).with_seed(7)
    }
}

fn fit(days: usize, seed: u64) -> (FittedModel, TrainingData) {
    let cfg = config();
    let panel = bsm_panel(
        &PanelSpec {
            days,
            contracts: 100,
            noise: 0.05,
            seed,
            ..PanelSpec::default()
        },
        0.2,
    )
    .unwrap();
    let data = TrainingData::build(&cfg, &panel).unwrap();
    let model = train_on(&cfg, &Representation::Bsm, &data, |_, _| {}).unwrap();
    (model, data)
}

#[test]
fn hessian_is_symmetric_with_positive_curvature_in_sigma() {
    let (model, data) = fit(10, 1);
    let repr = Representation::Bsm;
    let obj = data.objective(&model.config, &repr).unwrap();
    let h = raw_hessian(&obj, &model.vector()).unwrap();
    let p = obj.nn_len();
    assert!(h[(p, p)] > 0.0, "curvature {}", h[(p, p)]);
    let asym = (&h - h.transpose()).abs().max();
    assert!(asym < 1e-4 * h.abs().max(), "asymmetry {asym}");
}

#[test]
fn interval_width_shrinks_like_root_n() {
    let repr = Representation::Bsm;
    let (small, small_data) = fit(20, 2);
    let (large, large_data) = fit(40, 2);
    let a = infer_phi(&small, &repr, &small_data, 0.05).unwrap();
    let b = infer_phi(&large, &repr, &large_data, 0.05).unwrap();
    let ratio = (a.params[0].hi - a.params[0].lo) / (b.params[0].hi - b.params[0].lo);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "width ratio {ratio}");
}
