use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::{stream_seed, streams};

/// Splits a dataset in two, the first part receiving `floor(N * fraction)`
/// samples.
///
/// When labels are present and every class has at least two members the split
/// is stratified: per-class quotas are `count * fraction` rounded by largest
/// remainder, so the overall first-part size is exact while class ratios stay
/// as close as integer counts allow. A class with fewer than two members
/// cannot be stratified; the split falls back to unstratified with a warning.
/// Row order within each part follows the original dataset, so splitting is
/// deterministic given (data, fraction, seed).
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid_input(format!(
            "split fraction must be strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = ds.n();
    let target = (n as f64 * fraction).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, streams::SPLIT, 0));
    let stratifiable = ds.labels.as_ref().is_some_and(|labels| {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0usize; k];
        for &l in labels {
            counts[l] += 1;
        }
        counts.iter().all(|&c| c >= 2)
    });

    let mut first: Vec<usize> = if stratifiable {
        let labels = ds.labels.as_ref().expect("checked above");
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        for class in &mut by_class {
            class.shuffle(&mut rng);
        }
        // Largest-remainder allocation: floors first, then hand out the
        // remaining slots by descending fractional part (ties to the lower
        // class index) so the quotas sum exactly to `target`.
        let quotas: Vec<f64> = by_class.iter().map(|c| c.len() as f64 * fraction).collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut leftover = target as i64 - take.iter().sum::<usize>() as i64;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.partial_cmp(&ra).expect("finite remainders").then(a.cmp(&b))
        });
        let mut cursor = 0;
        while leftover > 0 {
            let c = order[cursor % k];
            if take[c] < by_class[c].len() {
                take[c] += 1;
                leftover -= 1;
            }
            cursor += 1;
        }
        while leftover < 0 {
            let c = order[k - 1 - (cursor % k)];
            if take[c] > 0 {
                take[c] -= 1;
                leftover += 1;
            }
            cursor += 1;
        }
        by_class
            .iter()
            .zip(&take)
            .flat_map(|(class, &t)| class[..t].iter().copied())
            .collect()
    } else {
        if ds.labels.is_some() {
            log::warn!("split: a class has fewer than 2 members; falling back to unstratified");
        }
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(target);
        all
    };

    first.sort_unstable();
    let mut in_first = vec![false; n];
    for &i in &first {
        in_first[i] = true;
    }
    let second: Vec<usize> = (0..n).filter(|&i| !in_first[i]).collect();

    Ok((ds.subset(&first, "/split-a")?, ds.subset(&second, "/split-b")?))
}
