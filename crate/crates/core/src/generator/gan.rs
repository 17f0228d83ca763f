use super::losses::{adjusted_corr, corr_loss, mean_loss, CorrTerms};
use super::{column_means, GeneratorError, LossReport, OutputLayout, TrainConfig};
use crate::nn::{log_sigmoid, sigmoid, Activation, Adam, AdamConfig, Mlp};
use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondGan {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub layout: OutputLayout,
    pub known_width: usize,
    pub noise_dim: usize,
    pub temperature: Option<f64>,
    #[serde(default)]
    pub gumbel_tau: Option<f64>,
}

fn noise<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |_| rng.sample(StandardNormal))
}

/// `(logit + g) / tau` with standard Gumbel `g` on every softmax group.
fn perturb<R: Rng + ?Sized>(layout: &OutputLayout, raw: &mut Array2<f64>, tau: Option<f64>, rng: &mut R) {
    let Some(tau) = tau else { return };
    for r in &layout.softmax {
        for v in raw.slice_mut(s![.., r.clone()]).iter_mut() {
            let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
            *v = (*v - (-u.ln()).ln()) / tau;
        }
    }
}

/// One-hot of the argmax of every softmax group (straight-through forward).
fn harden(layout: &OutputLayout, soft: &Array2<f64>) -> Array2<f64> {
    let mut hard = soft.clone();
    for r in &layout.softmax {
        for mut row in hard.slice_mut(s![.., r.clone()]).rows_mut() {
            let k = crate::encoding::gmm::argmax(&row.to_vec());
            row.fill(0.0);
            row[k] = 1.0;
        }
    }
    hard
}

fn unperturb_grad(layout: &OutputLayout, grad: &mut Array2<f64>, tau: Option<f64>) {
    let Some(tau) = tau else { return };
    for r in &layout.softmax {
        grad.slice_mut(s![.., r.clone()]).mapv_inplace(|g| g / tau);
    }
}

impl CondGan {
    /// Head outputs (simplex groups, tanh scalars) before discretisation.
    fn soft<R: Rng + ?Sized>(&self, known: ArrayView2<f64>, rng: &mut R) -> Array2<f64> {
        let input = concatenate![Axis(1), known, noise(known.nrows(), self.noise_dim, rng)];
        let mut out = self.generator.forward(input.view());
        perturb(&self.layout, &mut out, self.gumbel_tau, rng);
        self.layout.apply(&mut out);
        out
    }

    pub fn generate(&self, known: ArrayView2<f64>, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.soft(known, &mut rng);
        self.layout.discretize(&mut out, self.temperature, &mut rng);
        out
    }

    /// Discriminator probability for full rows `known ∥ unknown`.
    pub fn discriminate(&self, known: ArrayView2<f64>, unknown: ArrayView2<f64>) -> Vec<f64> {
        let input = concatenate![Axis(1), known, unknown];
        self.discriminator.forward(input.view()).column(0).mapv(sigmoid).to_vec()
    }
}

pub(super) fn fit_gan(
    known: ArrayView2<f64>,
    unknown: ArrayView2<f64>,
    layout: &OutputLayout,
    cfg: &TrainConfig,
) -> Result<(CondGan, Vec<LossReport>), GeneratorError> {
    let n = known.nrows();
    let (kw, uw) = (known.ncols(), unknown.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gsizes = vec![kw + cfg.noise_dim];
    gsizes.extend(&cfg.hidden);
    gsizes.push(uw);
    let mut dsizes = vec![kw + uw];
    dsizes.extend(&cfg.hidden);
    dsizes.push(1);
    let mut model = CondGan {
        generator: Mlp::new(&gsizes, Activation::Relu, Activation::Identity, &mut rng),
        discriminator: Mlp::new(&dsizes, Activation::Relu, Activation::Identity, &mut rng),
        layout: layout.clone(),
        known_width: kw,
        noise_dim: cfg.noise_dim,
        temperature: cfg.temperature,
        gumbel_tau: cfg.gumbel_tau,
    };
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut g_opt = Adam::new(&model.generator, adam);
    let mut d_opt = Adam::new(&model.discriminator, adam);

    let full = concatenate![Axis(1), known, unknown];
    let global_mean = column_means(unknown);
    let global_corr = adjusted_corr(full.view());
    let mut column: Vec<usize> = (0..kw).map(|k| usize::MAX - k).collect();
    column.extend(&layout.column);
    let terms = CorrTerms {
        known_width: kw,
        column,
        alpha: cfg.alpha,
        threshold: cfg.corr_threshold,
    };
    let batch = cfg.batch_for(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut report = LossReport {
            epoch,
            ..Default::default()
        };
        let mut steps = 0.0;
        for chunk in order.chunks(batch) {
            let xk = known.select(Axis(0), chunk);
            let xu = unknown.select(Axis(0), chunk);
            let b = chunk.len() as f64;
            let z = noise(chunk.len(), cfg.noise_dim, &mut rng);
            let g_in = concatenate![Axis(1), xk, z];

            // discriminator step
            let fake = {
                let mut out = model.generator.forward(g_in.view());
                perturb(layout, &mut out, cfg.gumbel_tau, &mut rng);
                layout.apply(&mut out);
                if cfg.gumbel_tau.is_some() {
                    harden(layout, &out)
                } else {
                    out
                }
            };
            let real_in = concatenate![Axis(1), xk, xu];
            let fake_in = concatenate![Axis(1), xk, fake];
            let rc = model.discriminator.forward_cached(real_in.view());
            let fc = model.discriminator.forward_cached(fake_in.view());
            let d_loss = rc.output().column(0).iter().map(|&l| -log_sigmoid(l)).sum::<f64>() / b
                + fc.output().column(0).iter().map(|&l| -log_sigmoid(-l)).sum::<f64>() / b;
            let (mut dg, _) = model.discriminator.backward(&rc, &rc.output().mapv(|l| (sigmoid(l) - 1.0) / b));
            let (dg_fake, _) = model.discriminator.backward(&fc, &fc.output().mapv(|l| sigmoid(l) / b));
            for (a, f) in dg.w.iter_mut().zip(&dg_fake.w) {
                *a += f;
            }
            for (a, f) in dg.b.iter_mut().zip(&dg_fake.b) {
                *a += f;
            }
            d_opt.step(&mut model.discriminator, &dg);

            // generator step: the adversarial term sees the Gumbel head, the
            // supervised terms see the plain softmax so its probabilities stay
            // calibrated
            let gc = model.generator.forward_cached(g_in.view());
            let mut noisy = gc.output().clone();
            perturb(layout, &mut noisy, cfg.gumbel_tau, &mut rng);
            layout.apply(&mut noisy);
            let mut fake = gc.output().clone();
            layout.apply(&mut fake);
            // straight-through: the discriminator sees a hard sample, the
            // gradient flows through the relaxed one
            let shown = if cfg.gumbel_tau.is_some() {
                harden(layout, &noisy)
            } else {
                noisy.clone()
            };
            let noisy_in = concatenate![Axis(1), xk, shown];
            let fc = model.discriminator.forward_cached(noisy_in.view());
            let adv = fc.output().column(0).iter().map(|&l| -log_sigmoid(l)).sum::<f64>() / b;
            let (_, d_input) = model.discriminator.backward(&fc, &fc.output().mapv(|l| (sigmoid(l) - 1.0) / b));
            let mut raw_grad = layout.backprop(&noisy, &d_input.slice(s![.., kw..]).to_owned());
            unperturb_grad(layout, &mut raw_grad, cfg.gumbel_tau);

            let diff = &fake - &xu;
            let mse = diff.mapv(|v| v * v).sum() / (b * uw as f64);
            let mut grad = diff.mapv(|v| v * cfg.mse_weight * 2.0 / (b * uw as f64));

            let (mean, mean_grad) = mean_loss(fake.view(), xu.view(), global_mean.view(), cfg.alpha)?;
            grad.scaled_add(cfg.mean_weight, &mean_grad);

            let fake_in = concatenate![Axis(1), xk, fake];
            let (corr, corr_grad) = if cfg.corr_weight > 0.0 {
                corr_loss(fake_in.view(), real_in.view(), &global_corr, &terms)
            } else {
                (0.0, Array2::zeros(fake_in.raw_dim()))
            };
            grad.scaled_add(cfg.corr_weight, &corr_grad.slice(s![.., kw..]));

            raw_grad += &layout.backprop(&fake, &grad);
            let (gg, _) = model.generator.backward(&gc, &raw_grad);
            g_opt.step(&mut model.generator, &gg);

            report.discriminator += d_loss;
            report.adversarial += adv;
            report.prediction += mse;
            report.mean += mean;
            report.correlation += corr;
            steps += 1.0;
        }
        report.discriminator /= steps;
        report.adversarial /= steps;
        report.prediction /= steps;
        report.mean /= steps;
        report.correlation /= steps;
        for (v, what) in [
            (report.discriminator, "discriminator"),
            (report.adversarial, "adversarial"),
            (report.prediction, "prediction"),
            (report.mean, "mean"),
            (report.correlation, "correlation"),
        ] {
            if !v.is_finite() {
                return Err(GeneratorError::NonFinite { epoch, what });
            }
        }
        history.push(report);
    }
    Ok((model, history))
}
