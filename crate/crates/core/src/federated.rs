//! One-server, many-client federated rounds: partitioning, local SGD,
//! upload processing, FedAvg, and the three objectives of a candidate.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{
    clip_and_noise, comm_overhead, privacy_budget, quantize_dequantize, sparsify, CompressionParams,
    PrivacyAccountant, QBits,
};
use crate::error::{Error, Result};
use crate::evolution::{decode, Solution};
use crate::metrics::ObjectiveVector;
use crate::nn::{backward, evaluate, Dataset, ModelWeights};
use crate::rng::{SeedTree, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    #[default]
    Iid,
    /// Sort by label, cut into `2K` shards, deal two shards per client.
    LabelShard,
}

/// Which model the global-error objective scores on each client's data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// The FedAvg of all processed uploads.
    #[default]
    Aggregated,
    /// Each client's own processed upload.
    PerClient,
}

/// Splits a dataset into `k` disjoint parts whose union is the dataset.
pub fn partition_dataset<R: Rng + ?Sized>(
    dataset: &Dataset,
    k: usize,
    scheme: PartitionScheme,
    rng: &mut R,
) -> Result<Vec<Dataset>> {
    let n = dataset.len();
    if k == 0 {
        return Err(Error::Input("client count must be >= 1".into()));
    }
    if k > n {
        return Err(Error::Input(format!(
            "cannot split {n} samples across {k} clients"
        )));
    }
    match scheme {
        PartitionScheme::Iid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            Ok((0..k)
                .map(|c| dataset.subset(&order[c * n / k..(c + 1) * n / k]))
                .collect())
        }
        PartitionScheme::LabelShard => {
            let shards = 2 * k;
            if shards > n {
                return Err(Error::Input(format!(
                    "label sharding needs at least {shards} samples, got {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (dataset.label(i), i));
            let mut shard_ids: Vec<usize> = (0..shards).collect();
            shard_ids.shuffle(rng);
            Ok((0..k)
                .map(|c| {
                    let mut idx = Vec::new();
                    for &s in &shard_ids[2 * c..2 * c + 2] {
                        idx.extend_from_slice(&order[s * n / shards..(s + 1) * n / shards]);
                    }
                    dataset.subset(&idx)
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

/// `epochs` passes of shuffled mini-batch SGD starting from `global`.
pub fn run_local_training<R: Rng + ?Sized>(
    global: &ModelWeights,
    partition: &Dataset,
    training: &LocalTraining,
    rng: &mut R,
) -> Result<ModelWeights> {
    if partition.is_empty() {
        return Err(Error::Input("local training on an empty partition".into()));
    }
    if training.batch_size == 0 {
        return Err(Error::Input("batch size must be >= 1".into()));
    }
    let mut model = global.clone();
    let mut order: Vec<usize> = (0..partition.len()).collect();
    for _ in 0..training.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(training.batch_size) {
            let batch = partition.subset(chunk);
            let grads = backward(&model, &batch)?;
            model.apply_gradients(&grads, training.lr)?;
        }
    }
    Ok(model)
}

/// A client upload after the solution's operators ran.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedModel {
    /// After pruning; its non-zeros are the transmitted payload.
    pub pruned: ModelWeights,
    /// What the server receives: pruned, quantized, clipped and noised.
    pub upload: ModelWeights,
    pub q_bits: QBits,
}

/// Prune, quantize, then clip and noise each local model with its own
/// stream. With `sigma == 0` the clip-and-noise stage is skipped.
pub fn apply_solution(
    local_models: &[ModelWeights],
    params: &CompressionParams,
    streams: &mut [Stream],
) -> Result<Vec<ProcessedModel>> {
    if streams.len() != local_models.len() {
        return Err(Error::Internal(format!(
            "{} streams for {} clients",
            streams.len(),
            local_models.len()
        )));
    }
    params.validate()?;
    local_models
        .iter()
        .zip(streams.iter_mut())
        .map(|(model, rng)| {
            let pruned = sparsify(model, params.xi)?;
            let quantized = quantize_dequantize(&pruned, params.q_bits);
            let upload = if params.sigma > 0.0 {
                clip_and_noise(&quantized, params.clip_z, params.sigma, rng)?
            } else {
                quantized
            };
            Ok(ProcessedModel {
                pruned,
                upload,
                q_bits: params.q_bits,
            })
        })
        .collect()
}

/// Parameter-wise mean.
pub fn aggregate(models: &[&ModelWeights]) -> Result<ModelWeights> {
    let first = models
        .first()
        .ok_or_else(|| Error::Internal("aggregating zero models".into()))?;
    if models.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::Internal("aggregating models of different shapes".into()));
    }
    let mut sums = vec![0.0; first.num_params()];
    for m in models {
        for (s, v) in sums.iter_mut().zip(m.params()) {
            *s += v;
        }
    }
    let scale = 1.0 / models.len() as f64;
    let mut out = (*first).clone();
    for (v, s) in out.params_mut().zip(sums) {
        *v = s * scale;
    }
    Ok(out)
}

/// Knobs fixed for a whole federation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub participation: f64,
    pub training: LocalTraining,
    pub mode: ObjectiveMode,
}

#[derive(Debug, Clone)]
pub struct FederatedState {
    pub global_model: ModelWeights,
    pub partitions: Vec<Dataset>,
    /// Completed rounds.
    pub round: usize,
    pub seeds: SeedTree,
    pub holdout: Dataset,
    pub config: FederationConfig,
}

/// Everything a round produced before any candidate is scored.
#[derive(Debug, Clone)]
pub struct RoundContext {
    pub round: usize,
    pub selected_clients: Vec<usize>,
    pub local_models: Vec<ModelWeights>,
    /// Uncompressed payload size of each local model, in bits.
    pub originals_size_bits: Vec<f64>,
}

impl FederatedState {
    pub fn num_clients(&self) -> usize {
        self.partitions.len()
    }

    /// `round(v K)` clients, at least one.
    pub fn clients_per_round(&self) -> usize {
        let k = self.num_clients();
        ((self.config.participation * k as f64).round() as usize).clamp(1, k)
    }

    /// Samples this round's clients and trains each from the global model.
    /// Training fans out over the ambient rayon pool.
    pub fn begin_round(&self) -> Result<RoundContext> {
        let round = self.round;
        let mut sampler = self.seeds.stream(&format!("round.{round}.sample"));
        let mut selected: Vec<usize> = (0..self.num_clients()).collect();
        selected.shuffle(&mut sampler);
        selected.truncate(self.clients_per_round());
        selected.sort_unstable();

        let local_models = selected
            .par_iter()
            .map(|&k| {
                let mut rng = self.seeds.client_stream(round, k);
                run_local_training(&self.global_model, &self.partitions[k], &self.config.training, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let originals_size_bits = local_models
            .iter()
            .map(|m| m.num_params() as f64 * 32.0)
            .collect();
        Ok(RoundContext {
            round,
            selected_clients: selected,
            local_models,
            originals_size_bits,
        })
    }

    fn solution_streams(&self, ctx: &RoundContext, solution_id: u64) -> Vec<Stream> {
        ctx.selected_clients
            .iter()
            .map(|&k| self.seeds.solution_client_stream(ctx.round, solution_id, k))
            .collect()
    }

    /// Applies a solution to this round's local models. Same solution id,
    /// same round: same noise.
    pub fn process(&self, ctx: &RoundContext, solution: &Solution, clip_z: f64) -> Result<Vec<ProcessedModel>> {
        let params = decode(solution, clip_z);
        let mut streams = self.solution_streams(ctx, solution.id);
        apply_solution(&ctx.local_models, &params, &mut streams)
    }

    /// Global error, communication overhead and privacy budget of one
    /// candidate against this round's local models. Neither `ctx` nor the
    /// state is modified.
    ///
    /// The privacy budget counts the rounds completed so far plus the one
    /// in progress.
    pub fn evaluate_objectives(
        &self,
        solution: &Solution,
        ctx: &RoundContext,
        accountant: &PrivacyAccountant,
        clip_z: f64,
    ) -> Result<ObjectiveVector> {
        let processed = self.process(ctx, solution, clip_z)?;
        let f_ge = match self.config.mode {
            ObjectiveMode::Aggregated => {
                let uploads: Vec<&ModelWeights> = processed.iter().map(|p| &p.upload).collect();
                let global = aggregate(&uploads)?;
                mean_client_loss(ctx.selected_clients.iter().map(|&k| (&global, &self.partitions[k])))?
            }
            ObjectiveMode::PerClient => mean_client_loss(
                processed
                    .iter()
                    .zip(&ctx.selected_clients)
                    .map(|(p, &k)| (&p.upload, &self.partitions[k])),
            )?,
        };
        let pruned: Vec<(&ModelWeights, QBits)> = processed.iter().map(|p| (&p.pruned, p.q_bits)).collect();
        let originals: Vec<&ModelWeights> = ctx.local_models.iter().collect();
        let f_co = comm_overhead(&pruned, &originals)?;
        let f_pb = privacy_budget(&accountant.with_rounds(self.round + 1), decode(solution, clip_z).sigma);
        let objectives = ObjectiveVector::new(f_ge, f_co, f_pb);
        if !objectives.is_finite() {
            return Err(Error::Internal(format!(
                "solution {} produced non-finite objectives {objectives:?}",
                solution.id
            )));
        }
        Ok(objectives)
    }

    /// Replaces the global model by the FedAvg of the chosen solution's
    /// processed uploads and counts the round.
    pub fn advance_round(&mut self, ctx: &RoundContext, chosen: &Solution, clip_z: f64) -> Result<()> {
        if ctx.round != self.round {
            return Err(Error::Internal(format!(
                "round context {} does not match state round {}",
                ctx.round, self.round
            )));
        }
        let processed = self.process(ctx, chosen, clip_z)?;
        let uploads: Vec<&ModelWeights> = processed.iter().map(|p| &p.upload).collect();
        self.global_model = aggregate(&uploads)?;
        self.round += 1;
        Ok(())
    }
}

fn mean_client_loss<'a>(pairs: impl Iterator<Item = (&'a ModelWeights, &'a Dataset)>) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (model, data) in pairs {
        total += evaluate(model, data)?.mean_loss;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Internal("no clients to evaluate".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, LayerRole};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn labelled(n: usize, classes: usize) -> Dataset {
        let inputs = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        Dataset::new(1, classes, inputs, labels).unwrap()
    }

    fn ids(d: &Dataset) -> Vec<u64> {
        d.inputs().iter().map(|v| *v as u64).collect()
    }

    #[test]
    fn single_client_gets_everything() {
        let d = labelled(37, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let parts = partition_dataset(&d, 1, PartitionScheme::Iid, &mut rng).unwrap();
        let mut got = ids(&parts[0]);
        got.sort();
        assert_eq!(got, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn iid_split_is_equal_and_disjoint() {
        let d = labelled(100, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parts = partition_dataset(&d, 10, PartitionScheme::Iid, &mut rng).unwrap();
        let mut seen = HashSet::new();
        for p in &parts {
            assert_eq!(p.len(), 10);
            for i in ids(p) {
                assert!(seen.insert(i));
            }
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn label_shards_limit_label_diversity() {
        let d = labelled(1000, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let parts = partition_dataset(&d, 10, PartitionScheme::LabelShard, &mut rng).unwrap();
        let mut seen = HashSet::new();
        for p in &parts {
            let labels: HashSet<usize> = p.labels().iter().copied().collect();
            assert!(labels.len() <= 2);
            for i in ids(p) {
                assert!(seen.insert(i));
            }
        }
        assert_eq!(seen.len(), 1000);
    }

    #[test]
    fn too_many_clients() {
        let d = labelled(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            partition_dataset(&d, 6, PartitionScheme::Iid, &mut rng),
            Err(Error::Input(_))
        ));
    }

    fn tiny_model() -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        ModelWeights::glorot(&[2, 4, 2], &mut rng).unwrap()
    }

    fn tiny_data() -> Dataset {
        Dataset::new(2, 2, vec![1.0, 0.5, -1.0, -0.3, 0.8, 0.1], vec![0, 1, 0]).unwrap()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let training = LocalTraining { epochs: 0, batch_size: 2, lr: 0.1 };
        let m = tiny_model();
        let out = run_local_training(&m, &tiny_data(), &training, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn local_training_is_seeded() {
        let training = LocalTraining { epochs: 3, batch_size: 2, lr: 0.1 };
        let m = tiny_model();
        let a = run_local_training(&m, &tiny_data(), &training, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = run_local_training(&m, &tiny_data(), &training, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_epoch_on_one_sample_descends() {
        let training = LocalTraining { epochs: 1, batch_size: 4, lr: 0.01 };
        let m = tiny_model();
        let one = Dataset::new(2, 2, vec![0.7, -0.2], vec![1]).unwrap();
        let before = evaluate(&m, &one).unwrap().mean_loss;
        let out = run_local_training(&m, &one, &training, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(evaluate(&out, &one).unwrap().mean_loss < before);
    }

    fn streams(n: usize, seed: u64) -> Vec<Stream> {
        (0..n).map(|k| SeedTree::new(seed).client_stream(0, k)).collect()
    }

    #[test]
    fn identity_solution_roundtrips() {
        let models = vec![tiny_model(), tiny_model()];
        let out = apply_solution(&models, &CompressionParams::identity(1.0), &mut streams(2, 0)).unwrap();
        for (p, m) in out.iter().zip(&models) {
            for (a, b) in p.upload.params().zip(m.params()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn huge_threshold_zeroes_everything() {
        let models = vec![tiny_model()];
        let params = CompressionParams::new(100.0, QBits::B8, 0.0, 1.0).unwrap();
        let out = apply_solution(&models, &params, &mut streams(1, 0)).unwrap();
        assert!(out[0].upload.params().all(|v| *v == 0.0));
    }

    #[test]
    fn noisy_uploads_are_seeded() {
        let models = vec![tiny_model(), tiny_model()];
        let params = CompressionParams::new(0.1, QBits::B16, 2.0, 1.0).unwrap();
        let a = apply_solution(&models, &params, &mut streams(2, 5)).unwrap();
        let b = apply_solution(&models, &params, &mut streams(2, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].upload, a[1].upload);
        assert!(apply_solution(&models, &params, &mut streams(1, 5)).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let m = tiny_model();
        assert_eq!(aggregate(&[&m]).unwrap(), m);
        let mut neg = m.clone();
        neg.params_mut().for_each(|v| *v = -*v);
        assert!(aggregate(&[&m, &neg]).unwrap().params().all(|v| *v == 0.0));
        let other = ModelWeights::zeros(&[3, 2]).unwrap();
        assert!(matches!(aggregate(&[&m, &other]), Err(Error::Internal(_))));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let models: Vec<ModelWeights> = (0..3)
            .map(|_| ModelWeights::glorot(&[3, 5, 2], &mut rng).unwrap())
            .collect();
        let refs: Vec<&ModelWeights> = models.iter().collect();
        let got: Vec<f64> = aggregate(&refs).unwrap().params().cloned().collect();
        let flat: Vec<Vec<f64>> = models.iter().map(|m| m.params().cloned().collect()).collect();
        for i in 0..got.len() {
            let mut s = 0.0;
            for f in &flat {
                s += f[i];
            }
            assert_eq!(got[i], s * (1.0 / 3.0));
        }
    }

    /// Two clients, a 1-layer model with hand-set weights.
    fn two_client_fixture(mode: ObjectiveMode) -> (FederatedState, RoundContext) {
        let l1 = Layer::new(2, 2, vec![0.5, -0.25, 0.1, 0.9], vec![0.05, -0.05], LayerRole::FullyConnected).unwrap();
        let l2 = Layer::new(2, 2, vec![-0.4, 0.3, 0.75, 0.2], vec![0.0, 0.1], LayerRole::FullyConnected).unwrap();
        let m1 = ModelWeights::from_layers(vec![l1]).unwrap();
        let m2 = ModelWeights::from_layers(vec![l2]).unwrap();
        let d1 = Dataset::new(2, 2, vec![1.0, 2.0, -1.0, 0.5], vec![0, 1]).unwrap();
        let d2 = Dataset::new(2, 2, vec![0.3, -0.7], vec![1]).unwrap();
        let state = FederatedState {
            global_model: ModelWeights::zeros(&[2, 2]).unwrap(),
            partitions: vec![d1.clone(), d2],
            round: 2,
            seeds: SeedTree::new(0),
            holdout: d1,
            config: FederationConfig {
                participation: 1.0,
                training: LocalTraining { epochs: 1, batch_size: 1, lr: 0.1 },
                mode,
            },
        };
        let ctx = RoundContext {
            round: 2,
            selected_clients: vec![0, 1],
            local_models: vec![m1, m2],
            originals_size_bits: vec![6.0 * 32.0; 2],
        };
        (state, ctx)
    }

    fn scalar_ce(w: &[f64], b: &[f64], x: &[f64], y: usize) -> f64 {
        let z0 = b[0] + w[0] * x[0] + w[1] * x[1];
        let z1 = b[1] + w[2] * x[0] + w[3] * x[1];
        let zy = if y == 0 { z0 } else { z1 };
        (z0.exp() + z1.exp()).ln() - zy
    }

    #[test]
    fn objectives_match_scalar_oracle_without_noise() {
        for mode in [ObjectiveMode::Aggregated, ObjectiveMode::PerClient] {
            let (state, ctx) = two_client_fixture(mode);
            let acc = PrivacyAccountant::new(1, 1.0, 1e-5, 10.0).unwrap();
            let sol = Solution::new(3, [0.2, 0.0, 0.0]);
            let obj = state.evaluate_objectives(&sol, &ctx, &acc, 1.0).unwrap();

            // Pruned at 0.2, then 32-bit quantized over each layer's range.
            let q32 = |vals: [f64; 6]| {
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let steps = 4294967295.0;
                vals.map(|v| {
                    let code = ((v - lo) / (hi - lo) * steps + 0.5).floor();
                    if code == steps { hi } else { lo + code / steps * (hi - lo) }
                })
            };
            let p1 = q32([0.5, -0.25, 0.0, 0.9, 0.0, 0.0]);
            let p2 = q32([-0.4, 0.3, 0.75, 0.2, 0.0, 0.0]);
            let (w1, b1) = (&p1[..4], &p1[4..]);
            let (w2, b2) = (&p2[..4], &p2[4..]);
            let d1 = [([1.0, 2.0], 0usize), ([-1.0, 0.5], 1usize)];
            let d2 = [([0.3, -0.7], 1usize)];
            let loss = |w: &[f64], b: &[f64], data: &[([f64; 2], usize)]| {
                data.iter().map(|(x, y)| scalar_ce(w, b, x, *y)).sum::<f64>() / data.len() as f64
            };
            let expected = match mode {
                ObjectiveMode::Aggregated => {
                    let w: Vec<f64> = (0..4).map(|i| (w1[i] + w2[i]) / 2.0).collect();
                    let b: Vec<f64> = (0..2).map(|i| (b1[i] + b2[i]) / 2.0).collect();
                    (loss(&w, &b, &d1) + loss(&w, &b, &d2)) / 2.0
                }
                ObjectiveMode::PerClient => (loss(w1, b1, &d1) + loss(w2, b2, &d2)) / 2.0,
            };
            assert!((obj.f_ge - expected).abs() < 1e-10, "{mode:?}: {} vs {expected}", obj.f_ge);
            assert_eq!(obj.f_co, 7.0 / 12.0);
            assert_eq!(obj.f_pb, 10.0);
        }
    }

    #[test]
    fn identity_solution_pays_for_every_nonzero_and_larger_sigma_less_budget() {
        let (state, ctx) = two_client_fixture(ObjectiveMode::Aggregated);
        let acc = PrivacyAccountant::new(1, 0.4, 1e-5, 10.0).unwrap();
        let ident = Solution::new(0, [0.0, 0.0, 0.0]);
        // Full precision and no pruning: only exact zeros already present save bits.
        let nnz: usize = ctx.local_models.iter().map(ModelWeights::nonzero_count).sum();
        let total: usize = ctx.local_models.iter().map(ModelWeights::num_params).sum();
        let f_co = state.evaluate_objectives(&ident, &ctx, &acc, 1.0).unwrap().f_co;
        assert_eq!(f_co, nnz as f64 / total as f64);
        let a = state.evaluate_objectives(&Solution::new(1, [0.1, 0.5, 2.0]), &ctx, &acc, 1.0).unwrap();
        let b = state.evaluate_objectives(&Solution::new(2, [0.1, 0.5, 4.0]), &ctx, &acc, 1.0).unwrap();
        assert!(b.f_pb < a.f_pb);
    }

    #[test]
    fn advance_round_counts_and_averages() {
        let (mut state, ctx) = two_client_fixture(ObjectiveMode::Aggregated);
        let ident = Solution::new(0, [0.0, 0.0, 0.0]);
        let refs: Vec<&ModelWeights> = ctx.local_models.iter().collect();
        let plain = aggregate(&refs).unwrap();
        state.advance_round(&ctx, &ident, 1.0).unwrap();
        assert_eq!(state.round, 3);
        for (a, b) in state.global_model.params().zip(plain.params()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(state.advance_round(&ctx, &ident, 1.0).is_err());
    }
}
