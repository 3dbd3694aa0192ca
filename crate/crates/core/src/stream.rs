//! Epoch planning and batch generation.
//!
//! Every instance's generator is seeded from `(seed, epoch, batch_index,
//! ordinal)` through [`rng::instance_rng`], so a batch's content is a pure
//! function of the inputs and its coordinates. In dynamic mode the ordinal is
//! the position inside the batch; in static mode the coordinates are
//! `(0, 0, corpus_ordinal)` for every epoch, which pins each instance to a
//! single augmentation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::{AugmentError, AugmentationConfig, AugmentedInstance, Augmenter, Mode};
use crate::corpus::Corpus;
use crate::dictionary::DictionaryPack;
use crate::rng;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("unknown instance id {0:?}")]
    UnknownId(String),
    #[error("batch {batch_index} is outside the {batches} batches of an epoch")]
    BatchOutOfRange { batch_index: u64, batches: u64 },
    #[error("worker count must be at least 1")]
    Workers,
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub epoch: u64,
    pub batch_index: u64,
    pub instance_ids: Vec<String>,
}

/// Corpus ordinals in the order they are visited during `epoch`.
pub fn epoch_order(corpus_len: usize, config: &AugmentationConfig, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..corpus_len).collect();
    if config.shuffle {
        rng::shuffle_rng(config.seed, epoch).shuffle(&mut order);
    }
    order
}

pub fn batches_per_epoch(corpus_len: usize, batch_size: usize) -> Result<u64, StreamError> {
    if batch_size == 0 {
        return Err(StreamError::BatchSize);
    }
    Ok(corpus_len.div_ceil(batch_size) as u64)
}

pub fn plan_epoch(
    corpus: &Corpus,
    batch_size: usize,
    epoch: u64,
    config: &AugmentationConfig,
) -> Result<Vec<BatchSpec>, StreamError> {
    if batch_size == 0 {
        return Err(StreamError::BatchSize);
    }
    let instances = corpus.instances();
    Ok(epoch_order(corpus.len(), config, epoch)
        .chunks(batch_size)
        .enumerate()
        .map(|(b, chunk)| BatchSpec {
            epoch,
            batch_index: b as u64,
            instance_ids: chunk
                .iter()
                .map(|&i| instances[i].id().to_owned())
                .collect(),
        })
        .collect())
}

fn generate_with(
    augmenter: &Augmenter<'_>,
    spec: &BatchSpec,
    corpus: &Corpus,
) -> Result<Vec<AugmentedInstance>, StreamError> {
    let config = augmenter.config();
    spec.instance_ids
        .iter()
        .enumerate()
        .map(|(pos, id)| {
            let ordinal = corpus
                .ordinal_of(id)
                .ok_or_else(|| StreamError::UnknownId(id.clone()))?;
            let mut rng = match config.mode {
                Mode::Dynamic => {
                    rng::instance_rng(config.seed, spec.epoch, spec.batch_index, pos as u64)
                }
                Mode::Static => rng::instance_rng(config.seed, 0, 0, ordinal as u64),
            };
            Ok(augmenter.augment(&corpus.instances()[ordinal], &mut rng))
        })
        .collect()
}

pub fn generate_batch(
    spec: &BatchSpec,
    corpus: &Corpus,
    pack: &DictionaryPack,
    config: &AugmentationConfig,
) -> Result<Vec<AugmentedInstance>, StreamError> {
    generate_with(&Augmenter::new(pack, config)?, spec, corpus)
}

/// All batches of one epoch, in plan order, produced on `workers` threads.
pub fn epoch_stream(
    corpus: &Corpus,
    pack: &DictionaryPack,
    config: &AugmentationConfig,
    batch_size: usize,
    epoch: u64,
    workers: usize,
) -> Result<Vec<Vec<AugmentedInstance>>, StreamError> {
    if workers == 0 {
        return Err(StreamError::Workers);
    }
    let augmenter = Augmenter::new(pack, config)?;
    let plan = plan_epoch(corpus, batch_size, epoch, config)?;
    if workers == 1 {
        return plan
            .iter()
            .map(|s| generate_with(&augmenter, s, corpus))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| StreamError::Pool(e.to_string()))?;
    pool.install(|| {
        plan.par_iter()
            .map(|s| generate_with(&augmenter, s, corpus))
            .collect()
    })
}

/// Owned corpus, pack, config and batch size: everything needed to serve
/// batches by coordinate.
#[derive(Debug, Clone)]
pub struct Engine {
    corpus: Corpus,
    pack: DictionaryPack,
    config: AugmentationConfig,
    batch_size: usize,
}

impl Engine {
    pub fn new(
        corpus: Corpus,
        pack: DictionaryPack,
        config: AugmentationConfig,
        batch_size: usize,
    ) -> Result<Self, StreamError> {
        if batch_size == 0 {
            return Err(StreamError::BatchSize);
        }
        config.validate(&pack)?;
        Ok(Self {
            corpus,
            pack,
            config,
            batch_size,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn pack(&self) -> &DictionaryPack {
        &self.pack
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.config
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.corpus.len().div_ceil(self.batch_size) as u64
    }

    pub fn batch_spec(&self, epoch: u64, batch_index: u64) -> Result<BatchSpec, StreamError> {
        let batches = self.batches_per_epoch();
        if batch_index >= batches {
            return Err(StreamError::BatchOutOfRange {
                batch_index,
                batches,
            });
        }
        let order = epoch_order(self.corpus.len(), &self.config, epoch);
        let start = batch_index as usize * self.batch_size;
        let end = (start + self.batch_size).min(order.len());
        Ok(BatchSpec {
            epoch,
            batch_index,
            instance_ids: order[start..end]
                .iter()
                .map(|&i| self.corpus.instances()[i].id().to_owned())
                .collect(),
        })
    }

    /// One batch, optionally under a different config (e.g. per-request overrides).
    pub fn batch_with(
        &self,
        config: &AugmentationConfig,
        epoch: u64,
        batch_index: u64,
    ) -> Result<Vec<AugmentedInstance>, StreamError> {
        let batches = self.batches_per_epoch();
        if batch_index >= batches {
            return Err(StreamError::BatchOutOfRange {
                batch_index,
                batches,
            });
        }
        let spec = plan_epoch(&self.corpus, self.batch_size, epoch, config)?
            .swap_remove(batch_index as usize);
        generate_batch(&spec, &self.corpus, &self.pack, config)
    }

    pub fn batch(
        &self,
        epoch: u64,
        batch_index: u64,
    ) -> Result<Vec<AugmentedInstance>, StreamError> {
        let spec = self.batch_spec(epoch, batch_index)?;
        generate_batch(&spec, &self.corpus, &self.pack, &self.config)
    }

    pub fn epoch(
        &self,
        epoch: u64,
        workers: usize,
    ) -> Result<Vec<Vec<AugmentedInstance>>, StreamError> {
        epoch_stream(
            &self.corpus,
            &self.pack,
            &self.config,
            self.batch_size,
            epoch,
            workers,
        )
    }

    /// Iterator over batches starting at `(epoch, 0)`, rolling into the next
    /// epoch after the last batch.
    pub fn cursor(&self, epoch: u64) -> BatchCursor<'_> {
        BatchCursor {
            engine: self,
            epoch,
            batch_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub epoch: u64,
    pub batch_index: u64,
    pub instances: Vec<AugmentedInstance>,
}

#[derive(Debug, Clone)]
pub struct BatchCursor<'a> {
    engine: &'a Engine,
    epoch: u64,
    batch_index: u64,
}

impl BatchCursor<'_> {
    pub fn position(&self) -> (u64, u64) {
        (self.epoch, self.batch_index)
    }

    pub fn next_batch(&mut self) -> Result<Batch, StreamError> {
        let instances = self.engine.batch(self.epoch, self.batch_index)?;
        let batch = Batch {
            epoch: self.epoch,
            batch_index: self.batch_index,
            instances,
        };
        self.batch_index += 1;
        if self.batch_index >= self.engine.batches_per_epoch() {
            self.batch_index = 0;
            self.epoch += 1;
        }
        Ok(batch)
    }
}

impl Iterator for BatchCursor<'_> {
    type Item = Result<Batch, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_batch())
    }
}
