use rand::seq::SliceRandom;

use crate::datastore::{Sample, SampleView};
use crate::numerics::Rng;
use crate::textpipe::PAD_ID;

pub const DEFAULT_BATCH_SIZE: usize = 32;

/// A padded group of samples. Rows are trimmed back to their true length
/// by [`Batch::view`], which is how padding positions stay out of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the member samples in the source collection.
    pub indices: Vec<usize>,
    pub src: Vec<u32>,
    pub src_width: usize,
    pub src_lens: Vec<usize>,
    pub trg: Vec<u32>,
    pub trg_width: usize,
    pub trg_lens: Vec<usize>,
    pub global: Option<Vec<f32>>,
    pub global_dim: usize,
    pub spatial: Option<Vec<f32>>,
    pub spatial_len: usize,
}

impl Batch {
    pub fn from_samples(samples: &[Sample], indices: Vec<usize>) -> Batch {
        let members: Vec<&Sample> = indices.iter().map(|&i| &samples[i]).collect();
        let src_width = members.iter().map(|s| s.src_ids.len()).max().unwrap_or(0);
        let trg_width = members.iter().map(|s| s.trg_ids.len()).max().unwrap_or(0);
        let pad =
            |seq: &[u32], w: usize| seq.iter().copied().chain(std::iter::repeat(PAD_ID)).take(w).collect::<Vec<_>>();
        let stack = |f: &dyn Fn(&Sample) -> Option<&Vec<f32>>| -> (Option<Vec<f32>>, usize) {
            let rows: Option<Vec<&Vec<f32>>> = members.iter().map(|s| f(s)).collect();
            match rows {
                Some(rows) if !rows.is_empty() => {
                    let w = rows[0].len();
                    (Some(rows.into_iter().flatten().copied().collect()), w)
                }
                _ => (None, 0),
            }
        };
        let (global, global_dim) = stack(&|s| s.global_feat.as_ref());
        let (spatial, spatial_len) = stack(&|s| s.spatial_feat.as_ref());
        Batch {
            src: members.iter().flat_map(|s| pad(&s.src_ids, src_width)).collect(),
            src_lens: members.iter().map(|s| s.src_ids.len()).collect(),
            trg: members.iter().flat_map(|s| pad(&s.trg_ids, trg_width)).collect(),
            trg_lens: members.iter().map(|s| s.trg_ids.len()).collect(),
            indices,
            src_width,
            trg_width,
            global,
            global_dim,
            spatial,
            spatial_len,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Row `i` with padding removed.
    pub fn view(&self, i: usize) -> SampleView<'_> {
        let s0 = i * self.src_width;
        let t0 = i * self.trg_width;
        SampleView {
            src_ids: &self.src[s0..s0 + self.src_lens[i]],
            trg_ids: &self.trg[t0..t0 + self.trg_lens[i]],
            global_feat: self.global.as_ref().map(|g| &g[i * self.global_dim..(i + 1) * self.global_dim]),
            spatial_feat: self.spatial.as_ref().map(|g| &g[i * self.spatial_len..(i + 1) * self.spatial_len]),
        }
    }
}

/// Groups samples into batches of at most `batch_size`, optionally after a
/// seeded shuffle. Every sample lands in exactly one batch.
pub fn make_batches(samples: &[Sample], batch_size: usize, rng: &mut Rng, shuffle: bool) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if shuffle {
        order.shuffle(rng);
    }
    order.chunks(batch_size).map(|c| Batch::from_samples(samples, c.to_vec())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_stream;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n).map(|i| Sample::from_ids(&vec![4; 1 + i % 5], &vec![5; 1 + i % 3])).collect()
    }

    #[test]
    fn sizes_and_order() {
        let s = samples(70);
        let b = make_batches(&s, 32, &mut rng_stream(0, 0), false);
        assert_eq!(b.iter().map(Batch::len).collect::<Vec<_>>(), vec![32, 32, 6]);
        let flat: Vec<usize> = b.iter().flat_map(|b| b.indices.clone()).collect();
        assert_eq!(flat, (0..70).collect::<Vec<_>>());
    }

    #[test]
    fn shuffle_is_seeded_and_covers_every_sample() {
        let s = samples(70);
        let a = make_batches(&s, 32, &mut rng_stream(4, 1), true);
        let b = make_batches(&s, 32, &mut rng_stream(4, 1), true);
        assert_eq!(a, b);
        let mut flat: Vec<usize> = a.iter().flat_map(|b| b.indices.clone()).collect();
        assert_ne!(flat, (0..70).collect::<Vec<_>>());
        flat.sort_unstable();
        assert_eq!(flat, (0..70).collect::<Vec<_>>());
    }

    #[test]
    fn padding_and_views() {
        let mut s = samples(3);
        for (i, x) in s.iter_mut().enumerate() {
            x.global_feat = Some(vec![i as f32; 2]);
        }
        let b = Batch::from_samples(&s, vec![0, 2]);
        assert_eq!(b.src_width, 4);
        assert_eq!(&b.src[..4], &[4, 2, PAD_ID, PAD_ID]);
        assert_eq!(b.view(1).src_ids, s[2].src_ids.as_slice());
        assert_eq!(b.view(1).trg_ids, s[2].trg_ids.as_slice());
        assert_eq!(b.view(1).global_feat, Some(&[2.0, 2.0][..]));
        assert!(b.view(0).spatial_feat.is_none());
    }
}
