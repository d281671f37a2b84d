use rand::Rng;

/// Draws indices with probability proportional to their weight, by binary
/// search over cumulative weights.
#[derive(Clone, Debug)]
pub(crate) struct CumulativeSampler {
    cumulative: Vec<f64>,
}

impl CumulativeSampler {
    /// `None` when no weight is positive.
    pub(crate) fn new(weights: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut total = 0.0;
        let cumulative: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                total += w.max(0.0);
                total
            })
            .collect();
        (total > 0.0).then_some(Self { cumulative })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1)
    }
}
