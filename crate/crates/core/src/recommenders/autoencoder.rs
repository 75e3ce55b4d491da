//! Undercomplete and adversarial autoencoders over binary item rows.
//!
//! Both share the same encoder/decoder pair:
//!
//! ```text
//! h = enc(x)                 items -> MLP-2 -> linear code
//! r = dec([h; s])            code (+ title embedding) -> MLP-2 -> sigmoid items
//! ```
//!
//! The adversarial variant adds a discriminator on the code. Each minibatch
//! runs three updates in order: encoder and decoder on the reconstruction
//! loss, the discriminator on prior samples `z ~ N(0, I)` against codes, and
//! the encoder alone on fooling the discriminator. The discriminator never
//! sees title features.

use serde::{Deserialize, Serialize};

use super::{
    check_items, dense_rows, minibatches, rng_stream, streams, ModelKind, PredictInput, Recommender,
    ScoreMatrix, TrainConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseBinaryMatrix};
use crate::neural::{bce, sample_gaussian, Activation, AdamState, Mlp2, Mlp2Grads, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    pub encoder: Mlp2,
    pub decoder: Mlp2,
    pub code_dim: usize,
    /// Width of the title embedding appended to the code; 0 when items only.
    pub title_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaeModel {
    pub autoencoder: AeModel,
    pub discriminator: Mlp2,
}

/// Mean losses per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub reconstruction: Vec<f64>,
    pub discriminator: Vec<f64>,
    pub generator: Vec<f64>,
}

/// Called after every epoch with the current parameters.
pub trait EpochObserver {
    fn on_epoch(&mut self, epoch: usize, autoencoder: &AeModel, discriminator: Option<&Mlp2>);
}

impl<F> EpochObserver for F
where
    F: FnMut(usize, &AeModel, Option<&Mlp2>),
{
    fn on_epoch(&mut self, epoch: usize, autoencoder: &AeModel, discriminator: Option<&Mlp2>) {
        self(epoch, autoencoder, discriminator)
    }
}

impl AeModel {
    fn init(n_items: usize, title_dim: usize, cfg: &TrainConfig) -> Self {
        let mut rng = rng_stream(cfg.seed, streams::INIT);
        let encoder = Mlp2::new(
            [n_items, cfg.hidden, cfg.hidden, cfg.code_dim],
            Activation::Linear,
            cfg.dropout,
            &mut rng,
        );
        let decoder = Mlp2::new(
            [cfg.code_dim + title_dim, cfg.hidden, cfg.hidden, n_items],
            Activation::Sigmoid,
            cfg.dropout,
            &mut rng,
        );
        Self {
            encoder,
            decoder,
            code_dim: cfg.code_dim,
            title_dim,
        }
    }

    pub fn n_items(&self) -> usize {
        self.encoder.in_dim()
    }

    fn decoder_input(&self, code: &DenseMatrix, titles: Option<&DenseMatrix>) -> Result<DenseMatrix> {
        match titles {
            Some(t) => code.hconcat(t),
            None => Ok(code.clone()),
        }
    }

    /// Eval-mode codes of binary rows.
    pub fn encode(&self, x: &SparseBinaryMatrix) -> Result<DenseMatrix> {
        check_items("encode", self.n_items(), x)?;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        self.encoder.predict(&dense_rows(x, &rows))
    }

    fn titles_for<'a>(&self, input: &PredictInput<'a>) -> Result<Option<&'a DenseMatrix>> {
        match (self.title_dim, input.titles_test) {
            (0, None) => Ok(None),
            (0, Some(_)) => Err(Error::ModelMismatch(
                "items-only autoencoder was given title features".into(),
            )),
            (_, None) => Err(Error::ModelMismatch(
                "multi-modal autoencoder needs test title features".into(),
            )),
            (d, Some(t)) if t.embedded.n_cols() != d => Err(Error::ModelMismatch(format!(
                "title dimension {} differs from fitted {d}",
                t.embedded.n_cols()
            ))),
            (_, Some(t)) if t.embedded.n_rows() != input.x_corrupted.n_rows() => Err(Error::Shape {
                op: "autoencoder predict titles",
                left: input.x_corrupted.shape(),
                right: t.embedded.shape(),
            }),
            (_, Some(t)) => Ok(Some(&t.embedded)),
        }
    }

    /// One encoding and one decoding step in eval mode.
    fn reconstruct(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        check_items("autoencoder predict", self.n_items(), input.x_corrupted)?;
        let titles = self.titles_for(input)?;
        let code = self.encode(input.x_corrupted)?;
        self.decoder.predict(&self.decoder_input(&code, titles)?)
    }
}

impl Recommender for AeModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Ae
    }

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        self.reconstruct(input)
    }
}

impl Recommender for AaeModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Aae
    }

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        self.autoencoder.reconstruct(input)
    }
}

fn validate(x: &SparseBinaryMatrix, titles: Option<&DenseMatrix>, cfg: &TrainConfig) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::InvalidArgument("autoencoder needs a non-empty training matrix".into()));
    }
    if cfg.code_dim == 0 || cfg.code_dim >= cfg.hidden {
        return Err(Error::InvalidArgument(format!(
            "code size {} must be positive and smaller than the hidden size {}",
            cfg.code_dim, cfg.hidden
        )));
    }
    if let Some(t) = titles {
        if t.n_rows() != x.n_rows() {
            return Err(Error::Shape {
                op: "autoencoder fit titles",
                left: x.shape(),
                right: t.shape(),
            });
        }
    }
    Ok(())
}

fn concat_grads(a: &Mlp2Grads, b: &Mlp2Grads) -> Vec<Vec<f64>> {
    a.slices()
        .into_iter()
        .chain(b.slices())
        .map(<[f64]>::to_vec)
        .collect()
}

fn finite(phase: &'static str, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Divergence { phase, what: "loss" })
    }
}

fn with_phase(phase: &'static str, e: Error) -> Error {
    match e {
        Error::Divergence { what, .. } => Error::Divergence { phase, what },
        other => other,
    }
}

fn train(
    x: &SparseBinaryMatrix,
    titles: Option<&DenseMatrix>,
    cfg: &TrainConfig,
    discriminator: Option<(Mlp2, bool)>,
    observer: &mut dyn EpochObserver,
) -> Result<(AeModel, Option<Mlp2>, TrainLog)> {
    validate(x, titles, cfg)?;
    let title_dim = titles.map_or(0, DenseMatrix::n_cols);
    let mut ae = AeModel::init(x.n_cols(), title_dim, cfg);
    let (mut disc, adversarial) = match discriminator {
        Some((d, on)) => (Some(d), on),
        None => (None, false),
    };

    let mut rng = rng_stream(cfg.seed, streams::TRAIN);
    let mut adv_rng = rng_stream(cfg.seed, streams::ADVERSARIAL);
    let mut ae_sizes = ae.encoder.param_sizes();
    ae_sizes.extend(ae.decoder.param_sizes());
    let mut ae_opt = AdamState::new(&ae_sizes, cfg.adam);
    let mut gen_opt = AdamState::new(&ae.encoder.param_sizes(), cfg.adam);
    let mut disc_opt = disc.as_ref().map(|d| AdamState::new(&d.param_sizes(), cfg.adam));

    let code = cfg.code_dim;
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let (mut rec_sum, mut disc_sum, mut gen_sum, mut n_batches) = (0.0, 0.0, 0.0, 0usize);
        for batch in minibatches(x.n_rows(), cfg.batch_size, &mut rng) {
            let xb = dense_rows(x, &batch);
            let sb = titles.map(|t| t.select_rows(&batch));
            n_batches += 1;

            // reconstruction: encoder + decoder on BCE(x, r)
            let (h, enc_cache) = ae.encoder.forward(&xb, Mode::Train, &mut rng)?;
            let dec_in = ae.decoder_input(&h, sb.as_ref())?;
            let (r, dec_cache) = ae.decoder.forward(&dec_in, Mode::Train, &mut rng)?;
            let (loss, g) = bce(&r, &xb)?;
            rec_sum += finite("reconstruction", loss)?;
            let (dec_grads, g_in) = ae.decoder.backward(&dec_cache.expect("train mode"), &g)?;
            let g_code = g_in.slice_cols(0..code);
            let (enc_grads, _) = ae.encoder.backward(&enc_cache.expect("train mode"), &g_code)?;
            let grads = concat_grads(&enc_grads, &dec_grads);
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            let mut params = ae.encoder.params_mut();
            params.extend(ae.decoder.params_mut());
            ae_opt
                .step(&mut params, &grad_refs)
                .map_err(|e| with_phase("reconstruction", e))?;

            if !adversarial {
                continue;
            }
            let d = disc.as_mut().expect("adversarial training has a discriminator");
            let d_opt = disc_opt.as_mut().expect("discriminator optimizer");

            // discriminator: minimize -[ln D(z) + ln(1 - D(h))]
            let (h, _) = ae.encoder.forward(&xb, Mode::Train, &mut adv_rng)?;
            let z = sample_gaussian(h.n_rows(), code, &mut adv_rng);
            let (d_real, c_real) = d.forward(&z, Mode::Train, &mut adv_rng)?;
            let (d_fake, c_fake) = d.forward(&h, Mode::Train, &mut adv_rng)?;
            let ones = DenseMatrix::from_vec(h.n_rows(), 1, vec![1.0; h.n_rows()])?;
            let zeros = DenseMatrix::zeros(h.n_rows(), 1);
            let (l_real, g_real) = bce(&d_real, &ones)?;
            let (l_fake, g_fake) = bce(&d_fake, &zeros)?;
            disc_sum += finite("discriminator", l_real + l_fake)?;
            let (gr, _) = d.backward(&c_real.expect("train mode"), &g_real)?;
            let (gf, _) = d.backward(&c_fake.expect("train mode"), &g_fake)?;
            let summed: Vec<Vec<f64>> = gr
                .slices()
                .iter()
                .zip(gf.slices())
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect();
            let summed_refs: Vec<&[f64]> = summed.iter().map(Vec::as_slice).collect();
            d_opt
                .step(&mut d.params_mut(), &summed_refs)
                .map_err(|e| with_phase("discriminator", e))?;

            // generator: encoder only, minimize -ln D(h)
            let (h, enc_cache) = ae.encoder.forward(&xb, Mode::Train, &mut adv_rng)?;
            let (d_fake, c_fake) = d.forward(&h, Mode::Train, &mut adv_rng)?;
            let (l_gen, g) = bce(&d_fake, &ones)?;
            gen_sum += finite("generator", l_gen)?;
            let (_, g_h) = d.backward(&c_fake.expect("train mode"), &g)?;
            let (enc_grads, _) = ae.encoder.backward(&enc_cache.expect("train mode"), &g_h)?;
            gen_opt
                .step(&mut ae.encoder.params_mut(), &enc_grads.slices())
                .map_err(|e| with_phase("generator", e))?;
        }
        let n = n_batches.max(1) as f64;
        log.reconstruction.push(rec_sum / n);
        if adversarial {
            log.discriminator.push(disc_sum / n);
            log.generator.push(gen_sum / n);
        }
        observer.on_epoch(epoch, &ae, disc.as_ref());
    }
    Ok((ae, disc, log))
}

/// Undercomplete autoencoder, titles (if any) appended to the code.
pub fn ae_fit(x_train: &SparseBinaryMatrix, titles_train: Option<&DenseMatrix>, cfg: &TrainConfig) -> Result<AeModel> {
    ae_fit_with(x_train, titles_train, cfg, &mut |_: usize, _: &AeModel, _: Option<&Mlp2>| {}).map(|(m, _)| m)
}

pub fn ae_fit_with(
    x_train: &SparseBinaryMatrix,
    titles_train: Option<&DenseMatrix>,
    cfg: &TrainConfig,
    observer: &mut dyn EpochObserver,
) -> Result<(AeModel, TrainLog)> {
    let (ae, _, log) = train(x_train, titles_train, cfg, None, observer)?;
    Ok((ae, log))
}

/// Adversarial autoencoder with a Gaussian prior on the code.
pub fn aae_fit(x_train: &SparseBinaryMatrix, titles_train: Option<&DenseMatrix>, cfg: &TrainConfig) -> Result<AaeModel> {
    aae_fit_with(x_train, titles_train, cfg, true, &mut |_: usize, _: &AeModel, _: Option<&Mlp2>| {})
        .map(|(m, _)| m)
}

/// Like [`aae_fit`]; with `adversarial == false` only the reconstruction
/// phase runs, which reproduces [`ae_fit`] exactly for the same seed.
pub fn aae_fit_with(
    x_train: &SparseBinaryMatrix,
    titles_train: Option<&DenseMatrix>,
    cfg: &TrainConfig,
    adversarial: bool,
    observer: &mut dyn EpochObserver,
) -> Result<(AaeModel, TrainLog)> {
    let mut rng = rng_stream(cfg.seed, streams::DISC_INIT);
    let disc = Mlp2::new([cfg.code_dim, cfg.hidden, cfg.hidden, 1], Activation::Sigmoid, cfg.dropout, &mut rng);
    let (autoencoder, disc, log) = train(x_train, titles_train, cfg, Some((disc, adversarial)), observer)?;
    Ok((
        AaeModel {
            autoencoder,
            discriminator: disc.expect("discriminator kept"),
        },
        log,
    ))
}
