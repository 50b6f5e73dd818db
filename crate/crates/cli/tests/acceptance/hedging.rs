use skinn::eval::{hedge_error, hedge_error_with, StructuralModel};
use skinn::nn::{Activation, MlpConfig};
use skinn::skr::{ReprId, Representation};
use skinn::synth::{bsm_panel, PanelSpec};
use skinn::trainer::{train_skinn, TrainConfig};

use crate::common::{BoxError, Outcome};

pub fn hedge_ratios() -> Result<Outcome, BoxError> {
    let panel = bsm_panel(
        &PanelSpec {
            seed: 12,
            ..PanelSpec::default()
        },
        0.2,
    )?;
    let unhedged = hedge_error_with(&panel, |q| Ok(vec![0.0; q.len()]))?;
    let bsm = hedge_error(
        &StructuralModel {
            repr: Representation::Bsm,
            phi: vec![0.2],
        },
        &panel,
    )?;
    let cfg = TrainConfig {
        epochs: 2000,
        lr: 3e-3,
        mlp: MlpConfig::new(3, 3, 32).with_activation(Activation::Silu),
        ..TrainConfig::new(ReprId::Bsm).with_seed(12)
    };
    let model = train_skinn(&cfg, &Representation::Bsm, &panel)?;
    let nn = hedge_error(&model, &panel)?;
    Ok(Outcome::all(vec![
        Outcome::new(
            bsm.he <= 0.2 * unhedged.he,
            format!("BSM-Delta HE {:.4} vs unhedged {:.4} ({} days)", bsm.he, unhedged.he, bsm.days_used),
        ),
        Outcome::new(nn.he <= 2.0 * bsm.he, format!("NN-Delta HE {:.4} = {:.2}x BSM", nn.he, nn.he / bsm.he)),
    ]))
}
