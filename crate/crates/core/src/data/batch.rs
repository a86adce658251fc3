//! Length-sorted batching with padding masks.

use super::{EncodedInstance, PAD_ID};
use rand::seq::SliceRandom;
use rand::Rng;

/// A group of instances padded to the batch's max document and question
/// lengths. `instance_indices` point back into the encoded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub instance_indices: Vec<usize>,
    /// Per instance, document ids padded with the padding id.
    pub document_ids: Vec<Vec<u32>>,
    /// True at real token positions, false at padding.
    pub document_mask: Vec<Vec<bool>>,
    pub question_ids: Vec<Vec<u32>>,
    pub question_mask: Vec<Vec<bool>>,
}

/// Sort instances by document length ascending (stable) and group them into
/// batches of at most `batch_size`. Batch order within an epoch is applied
/// separately via [`shuffle_batches`].
pub fn batch_instances(instances: &[EncodedInstance], batch_size: usize) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by_key(|&i| instances[i].document_len());

    order
        .chunks(batch_size)
        .map(|chunk| {
            let max_doc = chunk
                .iter()
                .map(|&i| instances[i].document_len())
                .max()
                .unwrap_or(0);
            let max_q = chunk
                .iter()
                .map(|&i| instances[i].question_ids.len())
                .max()
                .unwrap_or(0);
            let mut batch = Batch {
                instance_indices: chunk.to_vec(),
                document_ids: Vec::with_capacity(chunk.len()),
                document_mask: Vec::with_capacity(chunk.len()),
                question_ids: Vec::with_capacity(chunk.len()),
                question_mask: Vec::with_capacity(chunk.len()),
            };
            for &i in chunk {
                let inst = &instances[i];
                let (doc, doc_mask) = pad(&inst.document_ids, max_doc);
                let (q, q_mask) = pad(&inst.question_ids, max_q);
                batch.document_ids.push(doc);
                batch.document_mask.push(doc_mask);
                batch.question_ids.push(q);
                batch.question_mask.push(q_mask);
            }
            batch
        })
        .collect()
}

fn pad(ids: &[u32], to: usize) -> (Vec<u32>, Vec<bool>) {
    let mut padded = ids.to_vec();
    let mut mask = vec![true; ids.len()];
    padded.resize(to, PAD_ID);
    mask.resize(to, false);
    (padded, mask)
}

/// Shuffle batch order for one epoch using the given seeded source.
pub fn shuffle_batches<R: Rng>(batches: &mut [Batch], rng: &mut R) {
    batches.shuffle(rng);
}
