use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::TrainRecord;
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::optim::{
    sgd_step, CommPeriod, Hyperparams, Model, ParamVector, DEFAULT_LOSS_CUT_FACTOR,
};

/// Exchange when the cumulated loss strictly exceeds the threshold.
pub fn should_exchange(cumulated_loss: f64, loss_cut: f64) -> bool {
    cumulated_loss > loss_cut
}

/// Sequential sweep over a shard, reshuffled with a seeded RNG at the start
/// of every epoch. The last batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    epoch: u64,
}

impl BatchSampler {
    pub fn new(n_samples: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 || batch_size == 0 {
            return Err(invalid("sampler needs samples and a positive batch size"));
        }
        Ok(Self {
            order: (0..n_samples).collect(),
            pos: n_samples,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: 0,
        })
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
            self.epoch += 1;
        }
        let start = self.pos;
        self.pos = (start + self.batch_size).min(self.order.len());
        &self.order[start..self.pos]
    }

    /// Number of epochs started so far.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// Decides, iteration by iteration, when to exchange.
#[derive(Debug, Clone)]
pub struct PeriodTracker {
    period: CommPeriod,
    loss_cut: Option<f64>,
    cumulated: f64,
    since_exchange: u64,
}

/// Outcome of feeding one iteration's loss to a [`PeriodTracker`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStep {
    /// Some(period length) when this iteration triggers an exchange.
    pub exchange: Option<u64>,
    /// Cumulated loss to report; zero when the exchange reset it.
    pub cumulated_loss: f64,
}

impl PeriodTracker {
    pub fn new(period: CommPeriod) -> Self {
        let loss_cut = match period {
            CommPeriod::Adaptive { loss_cut } => loss_cut,
            CommPeriod::Fixed { .. } => None,
        };
        Self {
            period,
            loss_cut,
            cumulated: 0.0,
            since_exchange: 0,
        }
    }

    /// Threshold in effect, once resolved.
    pub fn loss_cut(&self) -> Option<f64> {
        self.loss_cut
    }

    pub fn record(&mut self, iter: u64, batch_loss: f64) -> PeriodStep {
        self.cumulated += batch_loss;
        self.since_exchange += 1;
        let fire = match self.period {
            CommPeriod::Fixed { tau } => iter % tau == 0,
            CommPeriod::Adaptive { .. } => {
                let cut = *self.loss_cut.get_or_insert_with(|| {
                    let cut = DEFAULT_LOSS_CUT_FACTOR * batch_loss;
                    info!("adaptive period: loss_cut = {DEFAULT_LOSS_CUT_FACTOR} x first batch loss = {cut}");
                    cut
                });
                should_exchange(self.cumulated, cut)
            }
        };
        if fire {
            let period = self.since_exchange;
            self.cumulated = 0.0;
            self.since_exchange = 0;
            PeriodStep {
                exchange: Some(period),
                cumulated_loss: 0.0,
            }
        } else {
            PeriodStep {
                exchange: None,
                cumulated_loss: self.cumulated,
            }
        }
    }
}

/// Local SGD over one shard. The caller performs the exchange whenever a
/// step asks for one and hands back the updated parameters.
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    model: Model,
    shard: Dataset,
    hyper: Hyperparams,
    params: ParamVector,
    sampler: BatchSampler,
    tracker: PeriodTracker,
    iter: u64,
}

impl LocalTrainer {
    pub fn new(
        model: Model,
        shard: Dataset,
        hyper: Hyperparams,
        init: ParamVector,
        seed: u64,
    ) -> Result<Self> {
        hyper.validate()?;
        init.ensure_dim(model.param_dim())?;
        if shard.n_features() != model.n_features() || shard.n_classes() > model.n_classes() {
            return Err(invalid(format!(
                "shard with {} features / {} classes does not fit model {model}",
                shard.n_features(),
                shard.n_classes()
            )));
        }
        let sampler = BatchSampler::new(shard.len(), hyper.batch_size, seed)?;
        let tracker = PeriodTracker::new(hyper.period);
        Ok(Self {
            model,
            shard,
            hyper,
            params: init,
            sampler,
            tracker,
            iter: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        params.ensure_dim(self.model.param_dim())?;
        self.params = params;
        Ok(())
    }

    pub fn iter(&self) -> u64 {
        self.iter
    }

    pub fn is_done(&self) -> bool {
        self.iter >= self.hyper.i_max
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn loss_cut(&self) -> Option<f64> {
        self.tracker.loss_cut()
    }

    /// One iteration: the loss and gradient are taken once at the current
    /// parameters, the same loss feeds the accumulator. `wall_ms` is left
    /// at zero for the caller to fill.
    pub fn step(&mut self) -> Result<TrainRecord> {
        self.iter += 1;
        let batch = self.shard.minibatch(self.sampler.next_batch())?;
        let (loss, mut grad) = self.model.loss_and_grad(&self.params, &batch)?;
        if self.hyper.weight_decay > 0.0 {
            let wd = self.hyper.weight_decay as f32;
            let decayed: Vec<f32> = grad
                .as_slice()
                .iter()
                .zip(self.params.as_slice())
                .map(|(g, x)| g + wd * x)
                .collect();
            grad = ParamVector::new(decayed)?;
        }
        self.params = sgd_step(&self.params, &grad, self.hyper.eta)?;
        let period = self.tracker.record(self.iter, loss);
        Ok(TrainRecord {
            iter: self.iter,
            wall_ms: 0,
            batch_loss: loss,
            cumulated_loss: period.cumulated_loss,
            exchanged: period.exchange.is_some(),
            period_len: period.exchange.unwrap_or(0),
        })
    }
}
