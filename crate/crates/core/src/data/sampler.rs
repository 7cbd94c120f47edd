use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::derived_rng;
use crate::error::{Error, Result};

/// How mini-batches are drawn from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balancing {
    /// Seeded shuffle of all indices each epoch.
    #[default]
    None,
    /// Each draw picks a class uniformly, then an instance of it
    /// uniformly, with replacement.
    Uniform,
    /// Every batch holds `batch / classes` instances of each class; the
    /// remainder goes to distinct randomly chosen classes.
    Stratified,
}

#[derive(Debug, Clone)]
pub struct Sampler {
    strategy: Balancing,
    batch_size: usize,
    seed: u64,
    len: usize,
    by_class: Vec<Vec<usize>>,
}

/// Builds a sampler over `labels`. The class count is `max(label) + 1`.
pub fn make_sampler(labels: &[usize], strategy: Balancing, batch_size: usize, seed: u64) -> Result<Sampler> {
    if labels.is_empty() {
        return Err(Error::Data("cannot sample from an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Param("batch size must be >= 1".into()));
    }
    let classes = labels.iter().max().expect("non-empty") + 1;
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if strategy != Balancing::None {
        if let Some(c) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::Data(format!(
                "class {c} has no instances; {strategy:?} sampling needs every class"
            )));
        }
    }
    Ok(Sampler {
        strategy,
        batch_size,
        seed,
        len: labels.len(),
        by_class,
    })
}

/// Endless shuffled walk over one class's indices.
struct Cycle<'a> {
    items: &'a [usize],
    order: Vec<usize>,
    pos: usize,
}

impl<'a> Cycle<'a> {
    fn new(items: &'a [usize]) -> Self {
        Self {
            items,
            order: Vec::new(),
            pos: 0,
        }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.pos == self.order.len() {
            self.order = self.items.to_vec();
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

impl Sampler {
    pub fn classes(&self) -> usize {
        self.by_class.len()
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.len.div_ceil(self.batch_size)
    }

    /// Index batches for one epoch. Depends only on the seed and `epoch`.
    /// The unbalanced strategy's last batch may be short; the balanced
    /// strategies always fill every batch.
    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut rng = derived_rng(self.seed ^ 0x5A4D_504C, epoch);
        let b = self.batch_size;
        let k = self.classes();
        match self.strategy {
            Balancing::None => {
                let mut idx: Vec<usize> = (0..self.len).collect();
                idx.shuffle(&mut rng);
                idx.chunks(b).map(<[usize]>::to_vec).collect()
            }
            Balancing::Uniform => (0..self.batches_per_epoch())
                .map(|_| {
                    (0..b)
                        .map(|_| {
                            let class = &self.by_class[rng.random_range(0..k)];
                            class[rng.random_range(0..class.len())]
                        })
                        .collect()
                })
                .collect(),
            Balancing::Stratified => {
                let mut cycles: Vec<Cycle> = self.by_class.iter().map(|c| Cycle::new(c)).collect();
                let mut classes: Vec<usize> = (0..k).collect();
                (0..self.batches_per_epoch())
                    .map(|_| {
                        let mut batch = Vec::with_capacity(b);
                        for cycle in cycles.iter_mut() {
                            for _ in 0..b / k {
                                batch.push(cycle.next(&mut rng));
                            }
                        }
                        classes.shuffle(&mut rng);
                        for &c in &classes[..b % k] {
                            batch.push(cycles[c].next(&mut rng));
                        }
                        batch.shuffle(&mut rng);
                        batch
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(batch: &[usize], labels: &[usize], k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for &i in batch {
            c[labels[i]] += 1;
        }
        c
    }

    #[test]
    fn stratified_balanced_batches() {
        let labels: Vec<usize> = (0..200).map(|i| i % 10).collect();
        let s = make_sampler(&labels, Balancing::Stratified, 20, 1).unwrap();
        for batch in s.epoch(0) {
            assert_eq!(counts(&batch, &labels, 10), vec![2; 10]);
        }
    }

    #[test]
    fn stratified_remainder_spreads() {
        let labels: Vec<usize> = (0..300).map(|i| if i < 270 { 0 } else { 1 + i % 4 }).collect();
        let s = make_sampler(&labels, Balancing::Stratified, 13, 3).unwrap();
        for batch in s.epoch(2) {
            let c = counts(&batch, &labels, 5);
            assert_eq!(c.iter().sum::<usize>(), 13);
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1, "{c:?}");
        }
    }

    #[test]
    fn none_is_a_permutation() {
        let labels = vec![0usize; 37];
        let s = make_sampler(&labels, Balancing::None, 8, 5).unwrap();
        let mut all: Vec<usize> = s.epoch(0).concat();
        assert_ne!(all, (0..37).collect::<Vec<_>>());
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert_ne!(s.epoch(0), s.epoch(1));
        assert_eq!(s.epoch(4), s.epoch(4));
    }

    #[test]
    fn uniform_rebalances() {
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i >= 900)).collect();
        let s = make_sampler(&labels, Balancing::Uniform, 100, 11).unwrap();
        let draws: Vec<usize> = (0..10).flat_map(|e| s.epoch(e).concat()).collect();
        assert_eq!(draws.len(), 10_000);
        let zeros = draws.iter().filter(|&&i| labels[i] == 0).count() as f64 / 1e4;
        assert!((zeros - 0.5).abs() < 0.02, "{zeros}");
    }

    #[test]
    fn missing_class_is_named() {
        let err = make_sampler(&[0, 2, 2], Balancing::Stratified, 2, 0).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
        assert!(make_sampler(&[0, 2, 2], Balancing::None, 2, 0).is_ok());
        assert!(make_sampler(&[], Balancing::None, 2, 0).is_err());
    }
}
