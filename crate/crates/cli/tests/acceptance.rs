//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line with
//! the measured values and the tolerance it was held to; the binary exits non-zero
//! if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bayesvis_cli::{fit_cafe, random_baseline, simulate, write_model, FitOptions};
use bayesvis_core::analysis::agents::near_optimal_response;
use bayesvis_core::analysis::interval::{central_interval, paired_differences};
use bayesvis_core::analysis::{calibration_report, mann_whitney_u, paired_central_interval, Agent, Factor, Measure, Pooling};
use bayesvis_core::cafe::hmc::HmcConfig;
use bayesvis_core::cafe::{grad_log_joint, log_joint, simulate_dataset, GlobalParams, UnconstrainedParams, N_GLOBAL};
use bayesvis_core::samples::{IntervalCondition, Provenance, Schema};
use bayesvis_core::scoring::multibet::MultiBetError;
use bayesvis_core::scoring::{absolute_bias, kl_divergence, multibet_click, symmetric_kl, MultiBetState, ResponsePayload};
use bayesvis_core::task::{Subset, TaskSpec};
use bayesvis_core::{CategoricalDistribution, JointSamples, Observability, VariableSpec};
use bayesvis_study::service::{ApiEnvelope, SubmitBody, SubmitRequest, SubscribeBody, TaskBody};
use bayesvis_study::{expand_for_user, load_template, ActionLogEntry, AppState, BlobStore, StudyStore, StudyTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn template_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("studies/cafe.json")
}

fn within_time(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(format!("{detail}; {:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
    } else {
        Err(format!("{detail}; took {:.2}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn dist(p: &[f64]) -> CategoricalDistribution {
    CategoricalDistribution::new((0..p.len()).map(|i| format!("o{i}")).collect(), p.to_vec()).unwrap()
}

fn scoring_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let p = random_simplex(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let (dp, dq) = (dist(&p), dist(&q));
        let mut kl_pq = 0.0;
        let mut kl_qp = 0.0;
        let mut l1 = 0.0;
        for i in 0..n {
            kl_pq += p[i] * (p[i].ln() - q[i].ln());
            kl_qp += q[i] * (q[i].ln() - p[i].ln());
            l1 += (p[i] - q[i]).abs();
        }
        let errs = [
            (kl_divergence(&dp, &dq).unwrap() - kl_pq).abs(),
            (symmetric_kl(&dp, &dq).unwrap() - (kl_pq + kl_qp)).abs(),
            (absolute_bias(&dp, &dq).unwrap() - l1 / 2.0).abs(),
        ];
        worst = errs.into_iter().fold(worst, f64::max);
        for d in [&dp, &dq] {
            if kl_divergence(d, d).unwrap() != 0.0 || symmetric_kl(d, d).unwrap() != 0.0 {
                return Err(format!("D(p||p) != 0 for {:?}", d.probs()));
            }
        }
    }
    if worst >= 1e-9 {
        return Err(format!("max deviation {worst:.3e} >= 1e-9"));
    }
    within_time(
        start.elapsed(),
        Duration::from_secs(1),
        format!("1000 pairs, max deviation {worst:.2e} < 1e-9, D(p||p) = 0 exactly"),
    )
}

/// Button grid read off the display rule: bottom `s_i` selected, the next
/// `M - sum(s)` deselected, the rest disabled.
fn reference_click(s: &[u32], m: u32, column: usize, row: u32) -> Option<Vec<u32>> {
    let free = m - s.iter().sum::<u32>();
    let mut grid = vec!['d'; m as usize];
    for (r, cell) in grid.iter_mut().enumerate() {
        let level = r as u32 + 1;
        if level <= s[column] {
            *cell = 's';
        } else if level <= s[column] + free {
            *cell = 'f';
        }
    }
    let mut next = s.to_vec();
    match grid[row as usize - 1] {
        's' => next[column] = row - 1,
        'f' => next[column] = row,
        _ => return None,
    }
    Some(next)
}

fn multibet_machine() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut accepted, mut rejected_disabled) = (0u64, 0u64);
    for _ in 0..100_000 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=20);
        let mut state = MultiBetState::new(n, m);
        for _ in 0..rng.random_range(1..=30) {
            let column = rng.random_range(0..n);
            let row = rng.random_range(1..=m);
            let expected = reference_click(state.chips(), m, column, row);
            let was_selected = row <= state.chips()[column];
            let before = state.clone();
            match multibet_click(&state, column, row, was_selected) {
                Ok(next) => {
                    if expected.as_deref() != Some(next.chips()) {
                        return Err(format!("{:?} click ({column},{row}) gave {:?}, expected {expected:?}", before.chips(), next.chips()));
                    }
                    if next.chips().iter().sum::<u32>() > m {
                        return Err(format!("budget exceeded: {:?} with M = {m}", next.chips()));
                    }
                    accepted += 1;
                    state = next;
                }
                Err(MultiBetError::Disabled { .. }) if expected.is_none() => rejected_disabled += 1,
                Err(e) => return Err(format!("{:?} click ({column},{row}) rejected with {e}, expected {expected:?}", before.chips())),
            }
            if state.chips().iter().sum::<u32>() > m {
                return Err("budget exceeded after rejection".into());
            }
        }
    }
    // Every state of N = 4, M = 3 against every click.
    let (n, m) = (4usize, 3u32);
    let mut states = Vec::new();
    for a in 0..=m {
        for b in 0..=m - a {
            for c in 0..=m - a - b {
                for d in 0..=m - a - b - c {
                    states.push(vec![a, b, c, d]);
                }
            }
        }
    }
    let mut table = 0;
    for s in &states {
        let state = MultiBetState::from_chips(s.clone(), m).unwrap();
        for column in 0..n {
            for row in 1..=m {
                let got = state.click(column, row).ok().map(|x| x.chips().to_vec());
                if got != reference_click(s, m, column, row) {
                    return Err(format!("table mismatch at {s:?} ({column},{row}): {got:?}"));
                }
                table += 1;
            }
        }
    }
    within_time(
        start.elapsed(),
        Duration::from_secs(10),
        format!(
            "1e5 sequences, {accepted} accepted clicks, {rejected_disabled} disabled clicks rejected; {} states x 12 clicks = {table} table entries match",
            states.len()
        ),
    )
}

fn gaussian_store(rows: usize, seed: u64) -> JointSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(rows * 3);
    for _ in 0..rows {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        values.extend([5.0 + z0, 3.0 + 0.8 * z0 + 0.6 * z1, 10.0 + 2.0 * z2]);
    }
    let schema = Schema::new(
        ["x0", "x1", "x2"]
            .iter()
            .enumerate()
            .map(|(i, n)| VariableSpec::new(*n, Observability::Observable, i, "min"))
            .collect(),
    )
    .unwrap();
    JointSamples::new(schema, rows, values, Provenance::Posterior, seed).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn conditioning_fidelity() -> Outcome {
    let start = Instant::now();
    let js = gaussian_store(20_000, 3);
    let conds = [IntervalCondition::new("x0", 5.5, 6.5)];
    let mut brute: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in js.iter_rows() {
        if (5.5..=6.5).contains(&row[0]) {
            brute.entry("x1").or_default().push(row[1]);
            brute.entry("x2").or_default().push(row[2]);
        }
    }
    let mut report = Vec::new();
    for (var, xs) in &brute {
        let (m_ref, v_ref) = mean_var(xs);
        let mut worst_mean: f64 = 0.0;
        let (mut sum_m, mut sum_v) = (0.0, 0.0);
        for trial in 0..50 {
            let c = js.condition(&conds, 1000, trial).unwrap();
            let (m, v) = mean_var(&c.column(var).unwrap());
            worst_mean = worst_mean.max(((m - m_ref) / m_ref).abs());
            sum_m += m;
            sum_v += v;
        }
        let err_m = ((sum_m / 50.0 - m_ref) / m_ref).abs();
        let err_v = ((sum_v / 50.0 - v_ref) / v_ref).abs();
        if worst_mean >= 0.02 || err_m >= 0.02 || err_v >= 0.02 {
            return Err(format!(
                "{var}: worst per-trial mean error {worst_mean:.4}, trial-averaged mean error {err_m:.4}, variance error {err_v:.4}"
            ));
        }
        report.push(format!("{var}: mean err {err_m:.4} (worst trial {worst_mean:.4}), var err {err_v:.4}"));
    }
    within_time(
        start.elapsed(),
        Duration::from_secs(5),
        format!("{} supporting rows, limit 0.02; {}", brute["x1"].len(), report.join(", ")),
    )
}

fn model_inference() -> Outcome {
    let start = Instant::now();
    let truth = GlobalParams::synthetic_ground_truth();
    let (data, _) = simulate_dataset(&truth, 16, 5, FitOptions::default().data_seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base = UnconstrainedParams::initial_guess(&data).into_inner();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let point: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, &v)| v + if i < N_GLOBAL { 0.3 } else { 0.7 } * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u = UnconstrainedParams::new(point.clone()).unwrap();
        let grad = grad_log_joint(&u, &data);
        for (i, &g) in grad.iter().enumerate() {
            let h = 1e-5 * point[i].abs().max(1.0);
            let mut plus = point.clone();
            let mut minus = point.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (log_joint(&UnconstrainedParams::new(plus).unwrap(), &data)
                - log_joint(&UnconstrainedParams::new(minus).unwrap(), &data))
                / (2.0 * h);
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1.0));
        }
    }
    if worst >= 1e-5 {
        return Err(format!("gradient relative error {worst:.3e} >= 1e-5"));
    }
    let opts = FitOptions {
        hmc: HmcConfig {
            n_samples: 2000,
            ..HmcConfig::default()
        },
        ..FitOptions::default()
    };
    let (_, manifest) = fit_cafe(&opts).map_err(|e| e.to_string())?;
    let post = manifest.posterior_means;
    let acc = manifest.acceptance_rate;
    let detail = format!(
        "grad rel err {worst:.2e} < 1e-5; data seed {}, 2000 draws: rho {:.3} in [-0.9, -0.4], mu_g ({:.3}, {:.3}) vs (6.5, -1.75) +-0.5, acceptance {acc:.3} in [0.5, 0.95]",
        opts.data_seed, post.rho, post.mu_g[0], post.mu_g[1]
    );
    let ok = (-0.9..=-0.4).contains(&post.rho)
        && (post.mu_g[0] - truth.mu_g[0]).abs() <= 0.5
        && (post.mu_g[1] - truth.mu_g[1]).abs() <= 0.5
        && (0.5..=0.95).contains(&acc);
    if !ok {
        return Err(detail);
    }
    within_time(start.elapsed(), Duration::from_secs(300), detail)
}

/// Share of all splits of `a ++ b` whose pairwise-count U is at least as far
/// from `n_a n_b / 2` as the observed one.
fn permutation_p(a: &[f64], b: &[f64]) -> f64 {
    fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                u += if x > y {
                    1.0
                } else if x == y {
                    0.5
                } else {
                    0.0
                };
            }
        }
        u
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let mean = (a.len() * b.len()) as f64 / 2.0;
    let observed = (pairwise_u(a, b) - mean).abs();
    let (mut hits, mut total) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let picked = |inside: bool| -> Vec<f64> {
            pooled
                .iter()
                .enumerate()
                .filter(|(i, _)| (mask & (1 << i) != 0) == inside)
                .map(|(_, &v)| v)
                .collect()
        };
        let (xa, xb) = (picked(true), picked(false));
        total += 1;
        if (pairwise_u(&xa, &xb) - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    f64::from(hits) / f64::from(total)
}

struct Fixture {
    _dir: tempfile::TempDir,
    blobs: Arc<BlobStore>,
    template: StudyTemplate,
}

fn fixture() -> Result<Fixture, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let blobs = BlobStore::open(dir.path().join("blobs")).map_err(|e| e.to_string())?;
    let (js, manifest) = fit_cafe(&FitOptions::default()).map_err(|e| e.to_string())?;
    write_model(&blobs, "cafe-posterior", &js, &manifest).map_err(|e| e.to_string())?;
    let template = load_template(&template_path(), &blobs).map_err(|e| e.to_string())?;
    Ok(Fixture {
        _dir: dir,
        blobs: Arc::new(blobs),
        template,
    })
}

fn analysis_pipeline(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let table = simulate(&fx.template, &fx.blobs, Agent::NearOptimal, 22, 5).map_err(|e| e.to_string())?;
    if table.len() != 22 * 48 {
        return Err(format!("{} simulated responses, expected {}", table.len(), 22 * 48));
    }
    let random = random_baseline(&fx.template, &fx.blobs, 1000, 5).map_err(|e| e.to_string())?;
    let report = calibration_report(&table, &random, 0.05).map_err(|e| e.to_string())?;
    let not_rejected: Vec<&str> = report.iter().filter(|r| !r.test.rejected).map(|r| r.query_id.as_str()).collect();
    let max_p = report.iter().map(|r| r.test.p_value).fold(0.0, f64::max);
    if report.len() != 24 || !not_rejected.is_empty() {
        return Err(format!("{} task types, not rejected: {not_rejected:?}, max p {max_p:.3e}", report.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n_a in 1..=5 {
        for n_b in 1..=5 {
            for _ in 0..40 {
                let draw = |rng: &mut ChaCha8Rng, k: usize, shift: f64| -> Vec<f64> {
                    (0..k).map(|_| f64::from(rng.random_range(0..6u8)) + shift).collect()
                };
                let shift = f64::from(rng.random_range(0..3u8));
                let a = draw(&mut rng, n_a, 0.0);
                let b = draw(&mut rng, n_b, shift);
                let p = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?.p_value;
                worst = worst.max((p - permutation_p(&a, &b)).abs());
                cases += 1;
            }
        }
    }
    if worst > 0.02 {
        return Err(format!("Mann-Whitney p differs from permutation oracle by {worst:.4} > 0.02"));
    }
    within_time(
        start.elapsed(),
        Duration::from_secs(120),
        format!(
            "22 x 48 near-optimal vs 1000 random: all 24 rejected at p <= 0.05/24 (max p {max_p:.2e}); {cases} small-sample cases, max |p - p_perm| {worst:.2e} <= 0.02"
        ),
    )
}

fn interval_fixtures(fx: &Fixture) -> Outcome {
    let zeros = central_interval(&[0.0; 30], 0.5).map_err(|e| e.to_string())?;
    let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
    let span = central_interval(&hundred, 0.5).map_err(|e| e.to_string())?;
    if zeros != (0.0, 0.0) || (span.0 - 25.75).abs() > 1e-12 || (span.1 - 75.25).abs() > 1e-12 {
        return Err(format!("fixtures gave {zeros:?} and {span:?}"));
    }
    let table = simulate(&fx.template, &fx.blobs, Agent::NearOptimal, 22, 7).map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for factor in [Factor::Animation, Factor::Interactivity] {
        for measure in [Measure::Reward, Measure::ResponseTime] {
            for subset in [Subset::Rationality, Subset::Comprehension] {
                let fwd = paired_central_interval(&table, factor, measure, subset, 0.5, Pooling::default())
                    .map_err(|e| e.to_string())?;
                let swapped = paired_differences(&table, factor, measure, subset, Pooling::default(), true);
                let (lo, hi) = central_interval(&swapped, 0.5).map_err(|e| e.to_string())?;
                if (lo + fwd.hi).abs() > 1e-12 || (hi + fwd.lo).abs() > 1e-12 {
                    return Err(format!(
                        "{factor:?}/{measure:?}/{subset:?}: ({}, {}) vs swapped ({lo}, {hi})",
                        fwd.lo, fwd.hi
                    ));
                }
                checked.push(fwd.n_pairs);
            }
        }
    }
    Ok(format!(
        "all-zero -> (0, 0), 1..100 at 0.5 -> ({}, {}); swap antisymmetry holds on {} factor/measure/subset cells",
        span.0,
        span.1,
        checked.len()
    ))
}

fn scripted_participant(fx: &Fixture, runtime: &tokio::runtime::Runtime) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let db = dir.path().join("study.sqlite");
    let store = Arc::new(StudyStore::open(&db).map_err(|e| e.to_string())?);
    let study = store.register_study(&fx.template).map_err(|e| e.to_string())?;
    let state = AppState {
        store: store.clone(),
        blobs: fx.blobs.clone(),
    };
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        tokio::spawn(bayesvis_study::serve_listener(state, listener));
        let client = reqwest::Client::new();
        let resp = client
            .post(format!("{base}/studies/{study}/participants"))
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if resp.status() != 201 {
            return Err(format!("subscribe returned {}", resp.status()));
        }
        let ApiEnvelope::Ok { body: sub } = resp.json::<ApiEnvelope<SubscribeBody>>().await.map_err(|e| e.to_string())? else {
            return Err("subscribe returned an error envelope".into());
        };
        let task_url = format!("{base}/studies/{study}/participants/{}/task", sub.user_id);
        let mut models: HashMap<String, JointSamples> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rewards = Vec::new();
        loop {
            let next: ApiEnvelope<TaskBody> = client
                .get(&task_url)
                .send()
                .await
                .map_err(|e| e.to_string())?
                .json()
                .await
                .map_err(|e| e.to_string())?;
            let task = match next {
                ApiEnvelope::Ok {
                    body: TaskBody::Task { task, blob_url, schema, .. },
                } => {
                    if !models.contains_key(&task.model_ref) {
                        let bytes = client
                            .get(format!("{base}{blob_url}"))
                            .send()
                            .await
                            .map_err(|e| e.to_string())?
                            .bytes()
                            .await
                            .map_err(|e| e.to_string())?;
                        let js = JointSamples::load(&bytes, &schema).map_err(|e| e.to_string())?;
                        models.insert(task.model_ref.clone(), js);
                    }
                    task
                }
                ApiEnvelope::Ok {
                    body: TaskBody::Complete { answered, .. },
                } => {
                    if answered != 48 {
                        return Err(format!("completed after {answered} answers"));
                    }
                    break;
                }
                ApiEnvelope::Error { error_message, .. } => return Err(error_message),
            };
            let payload: ResponsePayload =
                near_optimal_response(&task, &models[&task.model_ref], &mut rng).map_err(|e| e.to_string())?;
            let request = SubmitRequest {
                task_id: task.id.clone(),
                payload,
                action_log: vec![
                    ActionLogEntry {
                        action: "load".into(),
                        digest: String::new(),
                        timestamp_ms: 0,
                    },
                    ActionLogEntry {
                        action: "acknowledge".into(),
                        digest: String::new(),
                        timestamp_ms: rng.random_range(2000..30_000),
                    },
                ],
            };
            let resp = client.post(&task_url).json(&request).send().await.map_err(|e| e.to_string())?;
            if resp.status() != 200 {
                return Err(format!("submit returned {}: {}", resp.status(), resp.text().await.unwrap_or_default()));
            }
            let ApiEnvelope::Ok { body } = resp.json::<ApiEnvelope<SubmitBody>>().await.map_err(|e| e.to_string())? else {
                return Err("submit returned an error envelope".into());
            };
            rewards.push(body.reward);
        }
        Ok::<_, String>((sub.user_id, rewards))
    })
    .and_then(|(user, rewards)| {
        drop(store);
        let reopened = StudyStore::open(&db).map_err(|e| e.to_string())?;
        let records = reopened.responses(&study, &user).map_err(|e| e.to_string())?;
        let participant = reopened.participant(&study, &user).map_err(|e| e.to_string())?;
        let monotone = records.windows(2).all(|w| w[0].submitted_at <= w[1].submitted_at);
        let positions: Vec<usize> = records.iter().map(|r| r.position).collect();
        let sum: f64 = records.iter().map(|r| r.score.reward).sum();
        let served: f64 = rewards.iter().sum();
        if records.len() != 48
            || !monotone
            || positions != (0..48).collect::<Vec<_>>()
            || participant.cursor != 48
            || (participant.cumulative_reward - sum).abs() > 1e-9
            || (served - sum).abs() > 1e-9
        {
            return Err(format!(
                "{} records, monotone {monotone}, cursor {}, cumulative {} vs sum {sum} vs served {served}",
                records.len(),
                participant.cursor,
                participant.cumulative_reward
            ));
        }
        Ok(format!(
            "48 records after reopen, monotone timestamps, cursor 48, cumulative reward {:.1} = sum",
            participant.cumulative_reward
        ))
    })
}

fn expansion_constraints(template: &StudyTemplate) -> Outcome {
    let mut orders = BTreeSet::new();
    for seed in 0..1000u64 {
        let tasks: Vec<TaskSpec> = expand_for_user(template, seed);
        if tasks.len() != 48 {
            return Err(format!("seed {seed}: {} tasks", tasks.len()));
        }
        let mut per_query: BTreeMap<&str, BTreeSet<_>> = BTreeMap::new();
        for t in &tasks {
            per_query.entry(t.query_key()).or_default().insert(t.visualisation);
        }
        if per_query.len() != 24 || per_query.values().any(|v| v.len() != 2) {
            return Err(format!("seed {seed}: queries not covered twice with distinct visualisations"));
        }
        let mut blocks: Vec<bool> = Vec::new();
        for (i, t) in tasks.iter().enumerate() {
            let opens = i == 0 || tasks[i - 1].interactive != t.interactive;
            if opens {
                if blocks.contains(&t.interactive) {
                    return Err(format!("seed {seed}: blocks interleave at position {i}"));
                }
                blocks.push(t.interactive);
            }
            if opens != t.notice.is_some() {
                return Err(format!("seed {seed}: notice misplaced at position {i}"));
            }
        }
        orders.insert(blocks);
    }
    let permitted = BTreeSet::from([vec![true, false], vec![false, true]]);
    if orders != permitted {
        return Err(format!("observed block orders {orders:?}"));
    }
    Ok("1000 seeds: 48 tasks each, contiguous blocks, notices open blocks, both block orders observed".into())
}

fn end_to_end(fx: &Fixture, runtime: &tokio::runtime::Runtime) -> Outcome {
    let start = Instant::now();
    let rest = scripted_participant(fx, runtime)?;
    let expansion = expansion_constraints(&fx.template)?;
    within_time(start.elapsed(), Duration::from_secs(60), format!("{rest}; {expansion}"))
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "scoring oracle equivalence", scoring_oracles()),
        (2, "multibet state machine", multibet_machine()),
        (3, "conditioning fidelity", conditioning_fidelity()),
        (4, "model inference", model_inference()),
    ];
    match fixture() {
        Ok(fx) => {
            results.push((5, "analysis pipeline", analysis_pipeline(&fx)));
            results.push((6, "paired central intervals", interval_fixtures(&fx)));
            results.push((7, "end-to-end protocol", end_to_end(&fx, &runtime)));
        }
        Err(e) => {
            for (n, name) in [(5, "analysis pipeline"), (6, "paired central intervals"), (7, "end-to-end protocol")] {
                results.push((n, name, Err(format!("fixture failed: {e}"))));
            }
        }
    }
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} [{name}]: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} [{name}]: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
