//! Library side of the `bayesvis` command: model fitting, response tables on disk,
//! agent simulation and the random-agent baseline.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use bayesvis_core::analysis::agents::simulate_participants;
use bayesvis_core::analysis::{simulate_random_agent, Agent, ResponseRow, ResponseTable};
use bayesvis_core::cafe::hmc::HmcConfig;
use bayesvis_core::cafe::{
    default_cafe_names, hmc_sample, posterior_predictive, simulate_dataset, GlobalParams, RunManifest,
};
use bayesvis_core::samples::JointSamples;
use bayesvis_core::task::TaskSpec;
use bayesvis_study::{expand_for_user, BlobStore, StudyTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dataset seed of the shipped cafe study.
pub const DEFAULT_DATA_SEED: u64 = 6;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_cafes: usize,
    pub n_visits: usize,
    pub data_seed: u64,
    pub hmc: HmcConfig,
    pub predictive_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_cafes: 16,
            n_visits: 5,
            data_seed: DEFAULT_DATA_SEED,
            hmc: HmcConfig::default(),
            predictive_seed: 1,
        }
    }
}

/// Simulates the synthetic cafe dataset, fits it with HMC and draws the joint
/// posterior predictive.
pub fn fit_cafe(opts: &FitOptions) -> Result<(JointSamples, RunManifest)> {
    let truth = GlobalParams::synthetic_ground_truth();
    let (data, effects) = simulate_dataset(&truth, opts.n_cafes, opts.n_visits, opts.data_seed)?;
    let chain = hmc_sample(&data, &opts.hmc)?;
    let names = default_cafe_names(opts.n_cafes);
    let js = posterior_predictive(&chain, &names, opts.predictive_seed)?;
    let manifest = RunManifest {
        ground_truth: truth,
        cafe_effects: effects,
        cafe_names: names,
        n_cafes: opts.n_cafes,
        n_visits: opts.n_visits,
        data_seed: opts.data_seed,
        hmc: opts.hmc.clone(),
        predictive_seed: opts.predictive_seed,
        acceptance_rate: chain.acceptance_rate,
        divergences: chain.divergences,
        tuned_step_size: chain.step_size,
        posterior_means: chain.global_means(),
    };
    Ok((js, manifest))
}

/// Stores the blob and writes `{id}.manifest.json` next to it.
pub fn write_model(blobs: &BlobStore, id: &str, js: &JointSamples, manifest: &RunManifest) -> Result<()> {
    blobs.put(id, js)?;
    let path = blobs.dir().join(format!("{id}.manifest.json"));
    std::fs::write(&path, serde_json::to_vec_pretty(manifest)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_table(table: &ResponseTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(input: impl Read) -> Result<ResponseTable> {
    let rows = csv::Reader::from_reader(input)
        .deserialize::<ResponseRow>()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResponseTable::new(rows)?)
}

fn models(template: &StudyTemplate, blobs: &BlobStore) -> Result<HashMap<String, JointSamples>> {
    template
        .model_refs()
        .into_iter()
        .map(|id| {
            let blob = blobs.get(&id)?;
            Ok((id, blob.samples.clone()))
        })
        .collect()
}

/// One representative task per query id, in template order.
pub fn query_representatives(template: &StudyTemplate) -> Vec<&TaskSpec> {
    let mut seen = std::collections::HashSet::new();
    template
        .tasks()
        .into_iter()
        .filter(|t| seen.insert(t.query_key().to_owned()))
        .collect()
}

/// `n` random-agent rewards per query id. Query `i` uses stream `i` of the seed.
pub fn random_baseline(template: &StudyTemplate, blobs: &BlobStore, n: usize, seed: u64) -> Result<BTreeMap<String, Vec<f64>>> {
    let models = models(template, blobs)?;
    let mut out = BTreeMap::new();
    for (i, task) in query_representatives(template).into_iter().enumerate() {
        let js = &models[&task.model_ref];
        let mut stream = ChaCha8Rng::seed_from_u64(seed);
        stream.set_stream(i as u64);
        let rewards = simulate_random_agent(task, js, n, stream.random())?;
        out.insert(task.query_key().to_owned(), rewards);
    }
    Ok(out)
}

/// `participants` simulated participants, each with their own expansion of the
/// template, answering with `agent`.
pub fn simulate(template: &StudyTemplate, blobs: &BlobStore, agent: Agent, participants: usize, seed: u64) -> Result<ResponseTable> {
    if participants == 0 {
        bail!("need at least one participant");
    }
    let models = models(template, blobs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences: Vec<(String, Vec<TaskSpec>)> = (0..participants)
        .map(|i| (format!("agent{i:03}"), expand_for_user(template, rng.random())))
        .collect();
    Ok(simulate_participants(agent, &sequences, &models, rng.random())?)
}
