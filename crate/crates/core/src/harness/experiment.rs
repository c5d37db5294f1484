//! The generation loop, run records, and paired comparisons.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, DatasetSpec, ExperimentConfig};
use super::data::{gen_synthetic, load_mnist_idx, split_holdout};
use crate::compression::PrivacyAccountant;
use crate::error::{Error, Result};
use crate::evolution::{
    assign_fitness, decode, environmental_selection, generate_offspring, init_population, kmeans_cosine,
    nsga2_select, rank_and_crowding, tournament_offspring, IdSource, Population, Solution,
};
use crate::federated::{
    aggregate, partition_dataset, FederatedState, FederationConfig, LocalTraining, RoundContext,
};
use crate::metrics::{dominates, hypervolume, NormalizationBounds, ObjectiveVector};
use crate::nn::{evaluate, Dataset, ModelWeights};
use crate::rng::SeedTree;

/// Reference point for hypervolume in normalized objective space.
pub const HV_REFERENCE: [f64; 3] = [1.0, 1.0, 1.0];

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub id: u64,
    pub xi: f64,
    pub q_gene: f64,
    pub q_bits: u32,
    pub sigma: f64,
    pub objectives: ObjectiveVector,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedRecord {
    pub id: u64,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// 0 is the initial population.
    pub generation: usize,
    /// Federated round whose local models scored this generation.
    /// Generations 0 and 1 share round 0.
    pub round: usize,
    /// Survivors, with fitness normalized over everything scored this
    /// generation.
    pub population: Vec<MemberRecord>,
    /// Every candidate scored this generation (parents and offspring).
    pub evaluated: Vec<EvaluatedRecord>,
    /// Solution whose uploads became the next global model.
    pub chosen_id: u64,
    /// Hypervolume of `population` under the run-wide bounds.
    pub hv: f64,
    pub holdout: Option<HoldoutScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutScore {
    pub accuracy: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub id: u64,
    pub objectives: ObjectiveVector,
    /// FedAvg of this member's uploads in the last round, scored on the
    /// holdout split.
    pub holdout: Option<HoldoutScore>,
}

/// Everything needed to audit or replay a run. Serialization is
/// deterministic: same config and seed, same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: u32,
    pub config: ExperimentConfig,
    /// Ideal and nadir over every objective vector evaluated in the run.
    pub bounds: NormalizationBounds,
    pub generations: Vec<GenerationRecord>,
    pub final_front: Vec<FrontMember>,
}

impl RunRecord {
    pub fn evaluated_points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.generations
            .iter()
            .flat_map(|g| g.evaluated.iter().map(|e| e.objectives.to_array()))
    }

    /// Hypervolume of each generation's population under `bounds`.
    pub fn hv_trajectory(&self, bounds: &NormalizationBounds) -> Vec<f64> {
        self.generations
            .iter()
            .map(|g| population_hv(g.population.iter().map(|m| m.objectives.to_array()), bounds))
            .collect()
    }

    /// Recomputes the logged hypervolumes from the stored objectives.
    pub fn recompute_hv(&self) -> Vec<f64> {
        self.hv_trajectory(&self.bounds)
    }

    pub fn final_hv(&self) -> f64 {
        self.generations.last().map_or(0.0, |g| g.hv)
    }
}

/// Wall-clock figures, kept apart from the record so the record stays
/// reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub generation_seconds: Vec<f64>,
}

pub fn population_hv(points: impl Iterator<Item = [f64; 3]>, bounds: &NormalizationBounds) -> f64 {
    let normalized: Vec<[f64; 3]> = points.map(|p| bounds.apply(&p)).collect();
    hypervolume(&normalized, HV_REFERENCE)
}

/// Loads or generates the configured dataset.
pub fn load_dataset(config: &ExperimentConfig, seeds: &SeedTree) -> Result<Dataset> {
    match &config.dataset {
        DatasetSpec::Synthetic {
            samples,
            classes,
            dim,
            separation,
        } => {
            let seed = rand::Rng::random::<u64>(&mut seeds.stream("dataset"));
            gen_synthetic(*samples, *classes, *dim, *separation, seed)
        }
        DatasetSpec::Mnist {
            images,
            labels,
            limit,
        } => load_mnist_idx(images, labels, *limit),
    }
}

/// Builds the federation for `config`: dataset, holdout split, client
/// partitions and the initial global model.
pub fn prepare_federation(config: &ExperimentConfig) -> Result<FederatedState> {
    config.validate()?;
    let seeds = SeedTree::new(config.seed);
    let data = load_dataset(config, &seeds)?;
    let (train, holdout) = split_holdout(&data, config.holdout_fraction, &mut seeds.stream("holdout"))?;
    let partitions = partition_dataset(&train, config.clients, config.partition, &mut seeds.stream("partition"))?;
    let architecture = config.architecture(data.dim(), data.num_classes());
    let global_model = ModelWeights::glorot(&architecture, &mut seeds.stream("model.init"))?;
    Ok(FederatedState {
        global_model,
        partitions,
        round: 0,
        seeds,
        holdout,
        config: FederationConfig {
            participation: config.participation,
            training: LocalTraining {
                epochs: config.local_epochs,
                batch_size: config.batch_size,
                lr: config.learning_rate,
            },
            mode: config.objective_mode,
        },
    })
}

fn holdout_score(model: &ModelWeights, holdout: &Dataset) -> Result<Option<HoldoutScore>> {
    if holdout.is_empty() {
        return Ok(None);
    }
    let e = evaluate(model, holdout)?;
    Ok(Some(HoldoutScore {
        accuracy: e.accuracy,
        mean_loss: e.mean_loss,
    }))
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    state: FederatedState,
    accountant: PrivacyAccountant,
    ids: IdSource,
}

impl Runner<'_> {
    fn score_all(&self, candidates: &mut [Solution], ctx: &RoundContext) -> Result<()> {
        let objectives = candidates
            .par_iter()
            .map(|s| {
                self.state
                    .evaluate_objectives(s, ctx, &self.accountant, self.config.clip_z)
            })
            .collect::<Result<Vec<_>>>()?;
        for (s, o) in candidates.iter_mut().zip(objectives) {
            s.objectives = Some(o);
        }
        Ok(())
    }

    fn offspring(&mut self, population: &Population, generation: usize) -> Result<Vec<Solution>> {
        let seeds = &self.state.seeds;
        let mut rng = seeds.stream(&format!("generation.{generation}.variation"));
        let params = &self.config.evolution;
        match self.config.algorithm {
            Algorithm::Fedmoeac => {
                let objs: Vec<[f64; 3]> = population
                    .members
                    .iter()
                    .map(Solution::objective_array)
                    .collect::<Result<_>>()?;
                let bounds = NormalizationBounds::from_points(&objs)
                    .ok_or_else(|| Error::Internal("empty population".into()))?;
                let normalized: Vec<[f64; 3]> = objs.iter().map(|o| bounds.apply(o)).collect();
                let mut krng = seeds.stream(&format!("generation.{generation}.kmeans"));
                let clusters = kmeans_cosine(&normalized, self.config.mating_clusters, &mut krng)?;
                generate_offspring(population, &clusters, params, &mut rng, &mut self.ids)
            }
            Algorithm::Nsga2 => {
                let objs: Vec<[f64; 3]> = population
                    .members
                    .iter()
                    .map(Solution::objective_array)
                    .collect::<Result<_>>()?;
                let (rank, crowd) = rank_and_crowding(&objs);
                tournament_offspring(population, &rank, &crowd, params, &mut rng, &mut self.ids)
            }
        }
    }

    fn select(&self, union: &[Solution]) -> Result<Vec<Solution>> {
        let n = self.config.population;
        let w = &self.config.fitness_weights;
        match self.config.algorithm {
            Algorithm::Fedmoeac => environmental_selection(union, n, self.config.linkage, w),
            Algorithm::Nsga2 => nsga2_select(union, n, w),
        }
    }

    /// Scores `candidates` on this round's local models, keeps survivors,
    /// and advances the federation with the lowest-fitness survivor.
    fn step(&mut self, generation: usize, mut candidates: Vec<Solution>, ctx: &RoundContext) -> Result<(Population, GenerationRecord)> {
        self.score_all(&mut candidates, ctx)?;
        let survivors = self.select(&candidates)?;
        let chosen = lowest_fitness(&survivors)?;
        self.state.advance_round(ctx, &chosen, self.config.clip_z)?;
        let record = self.record(generation, ctx.round, &survivors, &candidates, chosen.id)?;
        let population = Population {
            members: survivors,
            generation,
        };
        Ok((population, record))
    }

    /// Scores the initial population on round 0's local models. The
    /// federation is not advanced: generation 1 reuses the same round.
    fn initial(&mut self, mut members: Vec<Solution>, ctx: &RoundContext) -> Result<(Population, GenerationRecord)> {
        self.score_all(&mut members, ctx)?;
        assign_fitness(&mut members, &self.config.fitness_weights)?;
        let chosen = lowest_fitness(&members)?;
        let record = self.record(0, ctx.round, &members, &members, chosen.id)?;
        Ok((
            Population {
                members,
                generation: 0,
            },
            record,
        ))
    }

    fn record(
        &self,
        generation: usize,
        round: usize,
        survivors: &[Solution],
        candidates: &[Solution],
        chosen_id: u64,
    ) -> Result<GenerationRecord> {
        let clip_z = self.config.clip_z;
        let population = survivors
            .iter()
            .map(|s| {
                Ok(MemberRecord {
                    id: s.id,
                    xi: s.genes[0],
                    q_gene: s.genes[1],
                    q_bits: decode(s, clip_z).q_bits.bits(),
                    sigma: s.genes[2],
                    objectives: ObjectiveVector::from_array(s.objective_array()?),
                    fitness: s.fitness.unwrap_or(f64::NAN),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let evaluated = candidates
            .iter()
            .map(|s| {
                Ok(EvaluatedRecord {
                    id: s.id,
                    objectives: ObjectiveVector::from_array(s.objective_array()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GenerationRecord {
            generation,
            round,
            population,
            evaluated,
            chosen_id,
            hv: 0.0,
            holdout: holdout_score(&self.state.global_model, &self.state.holdout)?,
        })
    }

    fn final_front(&self, population: &Population, ctx: &RoundContext) -> Result<Vec<FrontMember>> {
        let objs: Vec<[f64; 3]> = population
            .members
            .iter()
            .map(Solution::objective_array)
            .collect::<Result<_>>()?;
        let front: Vec<usize> = (0..objs.len())
            .filter(|&i| !objs.iter().any(|o| dominates(o, &objs[i])))
            .collect();
        front
            .par_iter()
            .map(|&i| {
                let s = &population.members[i];
                let processed = self.state.process(ctx, s, self.config.clip_z)?;
                let uploads: Vec<&ModelWeights> = processed.iter().map(|p| &p.upload).collect();
                let model = aggregate(&uploads)?;
                Ok(FrontMember {
                    id: s.id,
                    objectives: ObjectiveVector::from_array(objs[i]),
                    holdout: holdout_score(&model, &self.state.holdout)?,
                })
            })
            .collect()
    }
}

fn lowest_fitness(members: &[Solution]) -> Result<Solution> {
    members
        .iter()
        .min_by(|a, b| {
            let fa = a.fitness.unwrap_or(f64::INFINITY);
            let fb = b.fitness.unwrap_or(f64::INFINITY);
            fa.total_cmp(&fb).then(a.id.cmp(&b.id))
        })
        .cloned()
        .ok_or_else(|| Error::Internal("selection returned no survivors".into()))
}

fn at_generation(generation: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Generation { .. } => e,
        other => Error::Generation {
            generation,
            source: Box::new(other),
        },
    }
}

/// Runs one experiment and returns its record and timings. Work fans out
/// over a pool of `config.workers` threads; results do not depend on the
/// pool size.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(RunRecord, Timing)> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<(RunRecord, Timing)> {
    let started = Instant::now();
    let state = prepare_federation(config)?;
    let accountant = PrivacyAccountant::new(1, config.participation, config.delta, config.budget_ceiling)?;
    let mut runner = Runner {
        config,
        state,
        accountant,
        ids: IdSource::new(),
    };
    log::info!(
        "{} seed {}: {} clients, {} per round, model {:?}",
        config.algorithm,
        config.seed,
        runner.state.num_clients(),
        runner.state.clients_per_round(),
        runner.state.global_model.architecture()
    );

    let mut generation_seconds = Vec::with_capacity(config.generations + 1);
    let mut records = Vec::with_capacity(config.generations + 1);
    let t = Instant::now();
    let initial = init_population(
        config.population,
        &config.evolution,
        &mut runner.state.seeds.stream("population.init"),
        &mut runner.ids,
    )
    .map_err(at_generation(0))?;
    let mut ctx = runner.state.begin_round().map_err(at_generation(0))?;
    let (mut population, record) = runner.initial(initial.members, &ctx).map_err(at_generation(0))?;
    log_generation(&record);
    records.push(record);
    generation_seconds.push(t.elapsed().as_secs_f64());

    for generation in 1..=config.generations {
        let t = Instant::now();
        let offspring = runner
            .offspring(&population, generation)
            .map_err(at_generation(generation))?;
        let mut union = population.members.clone();
        union.extend(offspring);
        if generation > 1 {
            ctx = runner.state.begin_round().map_err(at_generation(generation))?;
        }
        let (next, record) = runner
            .step(generation, union, &ctx)
            .map_err(at_generation(generation))?;
        log_generation(&record);
        records.push(record);
        population = next;
        generation_seconds.push(t.elapsed().as_secs_f64());
    }

    let final_front = runner
        .final_front(&population, &ctx)
        .map_err(at_generation(config.generations))?;
    let mut record = RunRecord {
        version: RECORD_VERSION,
        config: config.clone(),
        bounds: NormalizationBounds {
            ideal: [0.0; 3],
            nadir: [0.0; 3],
        },
        generations: records,
        final_front,
    };
    let points: Vec<[f64; 3]> = record.evaluated_points().collect();
    record.bounds = NormalizationBounds::from_points(&points)
        .ok_or_else(|| Error::Internal("run evaluated no candidates".into()))?;
    let hv = record.recompute_hv();
    for (g, h) in record.generations.iter_mut().zip(hv) {
        g.hv = h;
    }
    log::info!("final hypervolume {:.6}", record.final_hv());
    Ok((
        record,
        Timing {
            total_seconds: started.elapsed().as_secs_f64(),
            generation_seconds,
        },
    ))
}

fn log_generation(g: &GenerationRecord) {
    let best = g
        .population
        .iter()
        .map(|m| m.objectives.f_ge)
        .fold(f64::INFINITY, f64::min);
    match g.holdout {
        Some(h) => log::info!(
            "generation {}: best f_ge {best:.4}, chosen {}, holdout accuracy {:.4}",
            g.generation,
            g.chosen_id,
            h.accuracy
        ),
        None => log::info!("generation {}: best f_ge {best:.4}, chosen {}", g.generation, g.chosen_id),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `run.json`, `fronts.csv`, `hv.csv` and `timing.json` into `dir`.
pub fn write_run(record: &RunRecord, timing: Option<&Timing>, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut json = serde_json::to_vec_pretty(record)?;
    json.push(b'\n');
    write_file(&dir.join("run.json"), &json)?;

    let mut fronts = csv::Writer::from_writer(Vec::new());
    fronts.write_record([
        "generation", "solution_id", "xi", "q_bits", "sigma", "f_ge", "f_co", "f_pb", "fitness",
    ])?;
    for g in &record.generations {
        for m in &g.population {
            fronts.write_record(&[
                g.generation.to_string(),
                m.id.to_string(),
                m.xi.to_string(),
                m.q_bits.to_string(),
                m.sigma.to_string(),
                m.objectives.f_ge.to_string(),
                m.objectives.f_co.to_string(),
                m.objectives.f_pb.to_string(),
                m.fitness.to_string(),
            ])?;
        }
    }
    write_file(&dir.join("fronts.csv"), &csv_bytes(fronts)?)?;

    let mut hv = csv::Writer::from_writer(Vec::new());
    hv.write_record(["generation", "hv"])?;
    for g in &record.generations {
        hv.write_record(&[g.generation.to_string(), g.hv.to_string()])?;
    }
    write_file(&dir.join("hv.csv"), &csv_bytes(hv)?)?;

    if let Some(t) = timing {
        write_file(&dir.join("timing.json"), &serde_json::to_vec_pretty(t)?)?;
    }
    Ok(())
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))
}

/// Hypervolume trajectories of one run under bounds shared with its pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedRun {
    pub label: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub hv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub runs: Vec<ComparedRun>,
    /// Median final hypervolume of configs a and b.
    pub median_final_hv: [f64; 2],
    /// Seeds on which a's final hypervolume exceeds b's.
    pub a_wins: usize,
}

/// Keys that may differ between the two sides of a comparison.
const COMPARABLE_DIFFERENCES: &[&str] = &[
    "algorithm",
    "seed",
    "output.dir",
    "workers",
    "evolution.mating_clusters",
    "evolution.linkage",
];

/// Rejects pairs that do not share data, federation and budget settings.
pub fn check_comparable(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<()> {
    let (ta, tb) = (a.to_text(), b.to_text());
    let differing: Vec<String> = ta
        .lines()
        .zip(tb.lines())
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.split(" = ").next().unwrap_or(x).to_string())
        .filter(|k| !COMPARABLE_DIFFERENCES.contains(&k.as_str()))
        .collect();
    if !differing.is_empty() || ta.lines().count() != tb.lines().count() {
        return Err(Error::Config(format!(
            "configs are not comparable; they differ in: {}",
            if differing.is_empty() {
                "dataset settings".to_string()
            } else {
                differing.join(", ")
            }
        )));
    }
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Runs both configs on every seed. Each seed pair is normalized with
/// bounds taken over everything either side evaluated, so their
/// hypervolumes are comparable. Run records land in
/// `out/{a,b}/seed_<s>/` when `out` is given.
pub fn compare_runs(
    a: &ExperimentConfig,
    b: &ExperimentConfig,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<Comparison> {
    check_comparable(a, b)?;
    if seeds.is_empty() {
        return Err(Error::Config("comparison needs at least one seed".into()));
    }
    let mut runs = Vec::new();
    let mut finals = [Vec::new(), Vec::new()];
    let mut a_wins = 0;
    for &seed in seeds {
        let (ra, ta) = run_experiment(&a.with_seed(seed))?;
        let (rb, tb) = run_experiment(&b.with_seed(seed))?;
        if let Some(dir) = out {
            write_run(&ra, Some(&ta), &dir.join("a").join(format!("seed_{seed}")))?;
            write_run(&rb, Some(&tb), &dir.join("b").join(format!("seed_{seed}")))?;
        }
        let points: Vec<[f64; 3]> = ra.evaluated_points().chain(rb.evaluated_points()).collect();
        let bounds = NormalizationBounds::from_points(&points)
            .ok_or_else(|| Error::Internal("comparison evaluated no candidates".into()))?;
        let (ha, hb) = (ra.hv_trajectory(&bounds), rb.hv_trajectory(&bounds));
        let (fa, fb) = (*ha.last().unwrap_or(&0.0), *hb.last().unwrap_or(&0.0));
        log::info!("seed {seed}: final hv a {fa:.6}, b {fb:.6}");
        if fa > fb {
            a_wins += 1;
        }
        finals[0].push(fa);
        finals[1].push(fb);
        runs.push(ComparedRun {
            label: "a".into(),
            algorithm: a.algorithm,
            seed,
            hv: ha,
        });
        runs.push(ComparedRun {
            label: "b".into(),
            algorithm: b.algorithm,
            seed,
            hv: hb,
        });
    }
    let comparison = Comparison {
        seeds: seeds.to_vec(),
        runs,
        median_final_hv: [median(&finals[0]), median(&finals[1])],
        a_wins,
    };
    if let Some(dir) = out {
        write_comparison(&comparison, dir)?;
    }
    Ok(comparison)
}

/// Writes `compare.json` and `compare.csv` (one row per run, one column
/// per generation).
pub fn write_comparison(c: &Comparison, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut json = serde_json::to_vec_pretty(c)?;
    json.push(b'\n');
    write_file(&dir.join("compare.json"), &json)?;
    let generations = c.runs.first().map_or(0, |r| r.hv.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "algorithm".into(), "seed".into()];
    header.extend((0..generations).map(|g| format!("hv_{g}")));
    w.write_record(&header)?;
    for r in &c.runs {
        let mut row = vec![r.label.clone(), r.algorithm.to_string(), r.seed.to_string()];
        row.extend(r.hv.iter().map(|h| h.to_string()));
        w.write_record(&row)?;
    }
    write_file(&dir.join("compare.csv"), &csv_bytes(w)?)
}

/// Parses a hypervolume input CSV: one point per row, three numeric
/// columns, optional header.
pub fn read_points_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points_csv(&text, path)
}

pub fn parse_points_csv(text: &str, path: &Path) -> Result<Vec<[f64; 3]>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => points.push([v[0], v[1], v[2]]),
            Err(_) if row == 0 => continue,
            _ => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    offset: rec.position().map_or(0, |p| p.byte()),
                    message: format!("row {} is not three finite numbers", row + 1),
                })
            }
        }
    }
    Ok(points)
}

/// Parses `x,y,z` into a reference point.
pub fn parse_reference(text: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("reference point {text:?} is not three numbers")))?;
    v.try_into()
        .map_err(|_| Error::Config(format!("reference point {text:?} needs exactly three values")))
}
