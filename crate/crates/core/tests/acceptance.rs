//! Acceptance suite: every release criterion as one test, each printing a
//! PASS line with its measured numbers (visible with `--nocapture`).
//!
//! The heavyweight artifacts (seeded corpus, replayed features,
//! cross-validated estimation) are built once and shared across criteria.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{Matrix4, Vector3};

use sigkin::estimator::{
    CrossValOutcome, INPUT_DIM, MLPModel, N_HEADS, PairedCorpus, TARGET_DIM, TrainingConfig,
    cross_validate, evaluate_scaled, fit_scalers, load_model, loss_gradients, mlp_forward,
    save_model, train,
};
use sigkin::evaluation::{DtwBackend, ProtocolConfig, aggregate_runs, compute_eer, run_protocol};
use sigkin::replay::{FeatureSet, WorkspacePlacement, replay};
use sigkin::rng::Rng;
use sigkin::robot::{
    IkSettings, KinematicChain, N_JOINTS, current_from_torque, default_chain, dh_transform,
    forward_kinematics, inverse_dynamics, link_transforms, pose_error, solve_ik,
    torque_from_current,
};
use sigkin::signature::Corpus;
use sigkin::synth::{SynthesisConfig, generate_corpus};
use sigkin::verifier::{
    FeatureGroup, FeatureMatrix, RefStats, build_feature_matrix, dtw_distance_banded,
    score_questioned,
};

const MID_POSTURE: [f64; N_JOINTS] = [0.0, -1.2, 1.6, -1.9, -1.4, 0.3];

struct Pipeline {
    #[allow(dead_code)]
    corpus: Corpus,
    simulated: FeatureSet,
    cv: CrossValOutcome,
    replay_secs: f64,
    cv_secs: f64,
    synth_secs: f64,
}

fn pipeline() -> &'static Pipeline {
    static PIPELINE: OnceLock<Pipeline> = OnceLock::new();
    PIPELINE.get_or_init(|| {
        let t0 = Instant::now();
        let cfg = SynthesisConfig {
            seed: 7,
            n_users: 20,
            genuine_per_user: 10,
            forgeries_per_user: 5,
            ..Default::default()
        };
        let corpus = generate_corpus(&cfg).expect("corpus");
        let synth_secs = t0.elapsed().as_secs_f64();

        let chain = default_chain();
        let placement = WorkspacePlacement::default();
        let t1 = Instant::now();
        let mut simulated = FeatureSet::default();
        for (user, set) in &corpus.users {
            let mut features = sigkin::replay::UserFeatures::default();
            for sig in &set.genuine {
                features
                    .genuine
                    .push(replay(&chain, sig, &placement).expect("replay"));
            }
            for sig in &set.forgeries {
                features
                    .forgeries
                    .push(replay(&chain, sig, &placement).expect("replay"));
            }
            simulated.users.insert(user.clone(), features);
        }
        let replay_secs = t1.elapsed().as_secs_f64();

        let mut paired: PairedCorpus = BTreeMap::new();
        for (user, set) in &corpus.users {
            let features = &simulated.users[user];
            paired.insert(
                user.clone(),
                (
                    set.genuine
                        .iter()
                        .cloned()
                        .zip(features.genuine.iter().cloned())
                        .collect(),
                    set.forgeries
                        .iter()
                        .cloned()
                        .zip(features.forgeries.iter().cloned())
                        .collect(),
                ),
            );
        }
        let t2 = Instant::now();
        let cv = cross_validate(
            &paired,
            &TrainingConfig {
                seed: 7,
                ..Default::default()
            },
            4,
        )
        .expect("cross validation");
        let cv_secs = t2.elapsed().as_secs_f64();

        Pipeline {
            corpus,
            simulated,
            cv,
            replay_secs,
            cv_secs,
            synth_secs,
        }
    })
}

fn matrices_for(
    set: &FeatureSet,
    group: FeatureGroup,
) -> BTreeMap<String, sigkin::evaluation::UserMatrices> {
    set.users
        .iter()
        .map(|(user, features)| {
            (
                user.clone(),
                sigkin::evaluation::UserMatrices {
                    genuine: features
                        .genuine
                        .iter()
                        .map(|s| build_feature_matrix(s, group).expect("matrix"))
                        .collect(),
                    forgeries: features
                        .forgeries
                        .iter()
                        .map(|s| build_feature_matrix(s, group).expect("matrix"))
                        .collect(),
                },
            )
        })
        .collect()
}

fn random_theta(rng: &mut Rng, center: &[f64; N_JOINTS], span: f64) -> [f64; N_JOINTS] {
    std::array::from_fn(|i| center[i] + rng.uniform(-span, span))
}

fn potential_energy(chain: &KinematicChain, theta: &[f64; N_JOINTS]) -> f64 {
    let frames = link_transforms(chain, theta);
    (0..N_JOINTS)
        .map(|i| {
            let r = frames[i + 1].fixed_view::<3, 3>(0, 0);
            let p = frames[i + 1].fixed_view::<3, 1>(0, 3);
            let com = p + r * chain.coms()[i];
            chain.masses()[i] * chain.gravity() * com[2]
        })
        .sum()
}

#[test]
fn criterion_1_kinematics() {
    let start = Instant::now();
    let chain = default_chain();
    let mut rng = Rng::new(101);

    // FK is definitionally the fold of the per-link transforms.
    for _ in 0..100 {
        let theta = random_theta(&mut rng, &[0.0; N_JOINTS], 3.1);
        let mut product = Matrix4::identity();
        for (i, link) in chain.links().iter().enumerate() {
            product *= dh_transform(link, theta[i] + link.theta_offset).matrix();
        }
        let fk = forward_kinematics(&chain, &theta);
        assert!(
            (fk.matrix() - product).norm() < 1e-12,
            "FK != chained product"
        );
    }

    let reach = chain.max_horizontal_reach();
    assert!(
        (reach - 0.850).abs() / 0.850 <= 0.02,
        "reach {reach:.4} m outside 0.850 +/- 2%"
    );

    // IK round-trip on 1000 random reachable poses.
    let settings = IkSettings::default();
    let mut worst_pos = 0.0f64;
    let mut worst_rot = 0.0f64;
    for _ in 0..1000 {
        let theta = random_theta(&mut rng, &MID_POSTURE, 1.0);
        let target = forward_kinematics(&chain, &theta);
        let solved = solve_ik(&chain, &target, &MID_POSTURE, &settings).expect("IK");
        let reached = forward_kinematics(&chain, &solved);
        let err = pose_error(&target, &reached);
        worst_pos = worst_pos.max(err.fixed_rows::<3>(0).norm());
        worst_rot = worst_rot.max(err.fixed_rows::<3>(3).norm());
    }
    assert!(worst_pos <= 1e-4, "worst IK position error {worst_pos:.3e}");
    assert!(worst_rot <= 1e-4, "worst IK rotation error {worst_rot:.3e}");

    let secs = start.elapsed().as_secs_f64();
    assert!(
        secs < 5.0,
        "kinematics criterion took {secs:.2} s (budget 5 s)"
    );
    println!(
        "criterion 1 kinematics: PASS (reach {reach:.4} m, worst IK {worst_pos:.2e} m / {worst_rot:.2e} rad, {secs:.2} s)"
    );
}

#[test]
fn criterion_2_torque_model() {
    let chain = default_chain();
    let mut current = [0.0; N_JOINTS];
    current[0] = 1.0;
    let tau = torque_from_current(&chain, &current);
    assert!((tau[0] - 11.0494).abs() < 1e-12, "tau1 {}", tau[0]);

    let mut rng = Rng::new(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let tau: [f64; N_JOINTS] = std::array::from_fn(|_| rng.uniform(-80.0, 80.0));
        let back = torque_from_current(&chain, &current_from_torque(&chain, &tau).unwrap());
        for j in 0..N_JOINTS {
            worst = worst.max((back[j] - tau[j]).abs() / tau[j].abs().max(1.0));
        }
    }
    assert!(worst <= 1e-12, "round-trip relative error {worst:.3e}");
    println!(
        "criterion 2 torque model: PASS (tau1 = {:.4} N m, round-trip <= {worst:.1e})",
        tau[0]
    );
}

#[test]
fn criterion_3_dynamics() {
    let chain = default_chain();
    let mut rng = Rng::new(303);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta = random_theta(&mut rng, &[0.0; N_JOINTS], 2.5);
        let tau = inverse_dynamics(&chain, &theta, &[0.0; N_JOINTS], &[0.0; N_JOINTS]);
        let mut grad = [0.0; N_JOINTS];
        for i in 0..N_JOINTS {
            let mut plus = theta;
            let mut minus = theta;
            plus[i] += h;
            minus[i] -= h;
            grad[i] =
                (potential_energy(&chain, &plus) - potential_energy(&chain, &minus)) / (2.0 * h);
        }
        let err: f64 = (0..N_JOINTS)
            .map(|i| (tau[i] - grad[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-9);
        worst = worst.max(err / scale);
    }
    assert!(worst <= 1e-4, "gravity gradient relative error {worst:.3e}");

    // Energy balance along a smooth trajectory: work integral of the
    // torques equals the change in kinetic plus potential energy. Kinetic
    // energy comes from FK finite differences only.
    let base = MID_POSTURE;
    let amp: [f64; 6] = [0.4, 0.3, 0.35, 0.25, 0.3, 0.2];
    let freq: [f64; 6] = [1.0, 1.3, 0.7, 1.7, 1.1, 0.9];
    let theta_t =
        |t: f64| -> [f64; 6] { std::array::from_fn(|i| base[i] + amp[i] * (freq[i] * t).sin()) };
    let omega_t =
        |t: f64| -> [f64; 6] { std::array::from_fn(|i| amp[i] * freq[i] * (freq[i] * t).cos()) };
    let accel_t = |t: f64| -> [f64; 6] {
        std::array::from_fn(|i| -amp[i] * freq[i] * freq[i] * (freq[i] * t).sin())
    };
    let kinetic = |t: f64| -> f64 {
        let fd = 1e-6;
        let fp = link_transforms(&chain, &theta_t(t + fd));
        let fm = link_transforms(&chain, &theta_t(t - fd));
        let mut ke = 0.0;
        for i in 0..N_JOINTS {
            let rp = fp[i + 1].fixed_view::<3, 3>(0, 0).into_owned();
            let rm = fm[i + 1].fixed_view::<3, 3>(0, 0).into_owned();
            let pp = fp[i + 1].fixed_view::<3, 1>(0, 3).into_owned();
            let pm = fm[i + 1].fixed_view::<3, 1>(0, 3).into_owned();
            let v = ((pp + rp * chain.coms()[i]) - (pm + rm * chain.coms()[i])) / (2.0 * fd);
            let rdot = (rp - rm) / (2.0 * fd);
            let r_mid = (rp + rm) * 0.5;
            let w_skew = rdot * r_mid.transpose();
            let w_world = Vector3::new(w_skew[(2, 1)], w_skew[(0, 2)], w_skew[(1, 0)]);
            let w_link = r_mid.transpose() * w_world;
            ke += 0.5 * chain.masses()[i] * v.dot(&v)
                + 0.5 * w_link.dot(&(chain.inertias()[i] * w_link));
        }
        ke
    };
    let dt = 1e-3;
    let t_end = 2.0;
    let steps = (t_end / dt) as usize;
    let mut work = 0.0;
    let power = |t: f64| -> f64 {
        let tau = inverse_dynamics(&chain, &theta_t(t), &omega_t(t), &accel_t(t));
        tau.iter().zip(omega_t(t).iter()).map(|(a, b)| a * b).sum()
    };
    let mut prev = power(0.0);
    for k in 1..=steps {
        let p = power(k as f64 * dt);
        work += 0.5 * (prev + p) * dt;
        prev = p;
    }
    let delta = (kinetic(t_end) + potential_energy(&chain, &theta_t(t_end)))
        - (kinetic(0.0) + potential_energy(&chain, &theta_t(0.0)));
    let rel = (work - delta).abs() / delta.abs().max(1.0);
    assert!(rel <= 0.01, "energy balance off by {:.3}%", rel * 100.0);
    println!(
        "criterion 3 dynamics: PASS (gravity gradient <= {worst:.2e} rel, energy balance {:.3}% of {delta:.2} J)",
        rel * 100.0
    );
}

#[test]
fn criterion_4_estimator_math() {
    // Gradient check on a seeded random model and batch.
    let mut rng = Rng::new(404);
    let scalers = fit_scalers(&{
        let cfg = SynthesisConfig {
            n_users: 2,
            genuine_per_user: 2,
            forgeries_per_user: 1,
            ..Default::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        let chain = default_chain();
        let placement = WorkspacePlacement::default();
        let mut items = Vec::new();
        for set in corpus.users.values() {
            for sig in &set.genuine {
                items.push((sig.clone(), replay(&chain, sig, &placement).unwrap()));
            }
        }
        items
    })
    .unwrap();
    let mut model = MLPModel::zeroed(scalers);
    for w in model.w_hidden.iter_mut().chain(&mut model.b_hidden) {
        *w = rng.uniform(-0.4, 0.4);
    }
    for head in 0..N_HEADS {
        for w in model.w_heads[head]
            .iter_mut()
            .chain(&mut model.b_heads[head])
        {
            *w = rng.uniform(-0.4, 0.4);
        }
    }
    let windows: Vec<[f64; INPUT_DIM]> = (0..16)
        .map(|_| std::array::from_fn(|_| rng.uniform(0.0, 1.0)))
        .collect();
    let targets: Vec<[f64; TARGET_DIM]> = (0..16)
        .map(|_| std::array::from_fn(|_| rng.uniform(0.0, 1.0)))
        .collect();
    let grads = loss_gradients(&model, &windows, &targets);
    let loss_of = |m: &MLPModel| -> f64 {
        let preds: Vec<[f64; TARGET_DIM]> =
            windows.iter().map(|w| mlp_forward(m, w, None)).collect();
        sigkin::estimator::composite_loss(&preds, &targets).total
    };
    let h = 1e-6;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for idx in (0..model.w_hidden.len()).step_by(11) {
        let orig = model.w_hidden[idx];
        model.w_hidden[idx] = orig + h;
        let up = loss_of(&model);
        model.w_hidden[idx] = orig - h;
        let down = loss_of(&model);
        model.w_hidden[idx] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grads.w_hidden[idx]).abs() / fd.abs().max(1e-6));
        checked += 1;
    }
    for head in 0..N_HEADS {
        for idx in (0..model.w_heads[head].len()).step_by(7) {
            let orig = model.w_heads[head][idx];
            model.w_heads[head][idx] = orig + h;
            let up = loss_of(&model);
            model.w_heads[head][idx] = orig - h;
            let down = loss_of(&model);
            model.w_heads[head][idx] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grads.w_heads[head][idx]).abs() / fd.abs().max(1e-6));
            checked += 1;
        }
    }
    assert!(checked > 40);
    assert!(worst <= 1e-4, "gradient mismatch {worst:.3e}");

    // Zero weights -> sigmoid(0) on every head dimension.
    let zero = MLPModel::zeroed(model.scalers.clone());
    let out = mlp_forward(&zero, &windows[0], None);
    assert!(
        out.iter().all(|v| *v == 0.5),
        "zero-weight output must be exactly 0.5"
    );

    // Save/load reproduces forward outputs bit for bit.
    let bytes = save_model(&model).unwrap();
    let back = load_model(&bytes).unwrap();
    for w in &windows {
        assert_eq!(mlp_forward(&model, w, None), mlp_forward(&back, w, None));
    }
    println!(
        "criterion 4 estimator math: PASS (gradients <= {worst:.2e} rel over {checked} params, zero-weight = 0.5, save/load bit-identical)"
    );
}

#[test]
fn criterion_5_estimator_learning() {
    let pipe = pipeline();
    let m = &pipe.cv.mean_metrics;
    for (h, name) in ["theta", "omega", "tau"].iter().enumerate() {
        assert!(
            m.mae[h] <= 0.10,
            "{name} held-out scaled MAE {:.4} exceeds 0.10",
            m.mae[h]
        );
    }

    // Memorization capacity: one signer, dropout off, trained long.
    let start = Instant::now();
    let cfg = SynthesisConfig {
        seed: 11,
        n_users: 1,
        genuine_per_user: 50,
        forgeries_per_user: 1,
        ..Default::default()
    };
    let corpus = generate_corpus(&cfg).unwrap();
    let chain = default_chain();
    let placement = WorkspacePlacement::default();
    let items: Vec<_> = corpus.users["u001"]
        .genuine
        .iter()
        .map(|sig| (sig.clone(), replay(&chain, sig, &placement).unwrap()))
        .collect();
    let train_cfg = TrainingConfig {
        dropout_rate: 0.0,
        max_epochs: 300,
        patience: 25,
        seed: 11,
        ..Default::default()
    };
    let outcome = train(&items, &train_cfg).unwrap();
    let overfit = evaluate_scaled(&outcome.model, &items).unwrap();
    for (h, name) in ["theta", "omega", "tau"].iter().enumerate() {
        assert!(
            overfit.mae[h] <= 0.05,
            "overfit {name} MAE {:.4} exceeds 0.05",
            overfit.mae[h]
        );
    }
    let train_secs = pipe.cv_secs + start.elapsed().as_secs_f64();
    assert!(
        train_secs < 180.0,
        "training took {train_secs:.1} s (budget 180 s)"
    );
    println!(
        "criterion 5 estimator learning: PASS (CV MAE theta {:.4} omega {:.4} tau {:.4}; overfit {:.4}/{:.4}/{:.4}; {train_secs:.1} s)",
        m.mae[0], m.mae[1], m.mae[2], overfit.mae[0], overfit.mae[1], overfit.mae[2]
    );
}

#[test]
fn criterion_6_dtw() {
    // Independent full DP, written here against the implementation.
    fn reference_dp(a: &FeatureMatrix, b: &FeatureMatrix) -> (f64, usize) {
        let (ma, mb) = (a.rows(), b.rows());
        let mut cost = vec![vec![f64::INFINITY; mb]; ma];
        let mut from = vec![vec![0u8; mb]; ma];
        for i in 0..ma {
            for j in 0..mb {
                let d = a
                    .row(i)
                    .iter()
                    .zip(b.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if i == 0 && j == 0 {
                    cost[0][0] = d;
                    continue;
                }
                let diag = if i > 0 && j > 0 {
                    cost[i - 1][j - 1]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { cost[i - 1][j] } else { f64::INFINITY };
                let left = if j > 0 { cost[i][j - 1] } else { f64::INFINITY };
                let (best, step) = if diag <= up && diag <= left {
                    (diag, 1)
                } else if up <= left {
                    (up, 2)
                } else {
                    (left, 3)
                };
                cost[i][j] = best + d;
                from[i][j] = step;
            }
        }
        let (mut i, mut j) = (ma - 1, mb - 1);
        let mut len = 1usize;
        while !(i == 0 && j == 0) {
            match from[i][j] {
                1 => {
                    i -= 1;
                    j -= 1;
                }
                2 => i -= 1,
                _ => j -= 1,
            }
            len += 1;
        }
        (cost[ma - 1][mb - 1], len)
    }

    let mut rng = Rng::new(606);
    let mut pairs = 0usize;
    while pairs < 500 {
        let ma = rng.range_usize(1, 30);
        let mb = rng.range_usize(1, 30);
        let cols = rng.range_usize(1, 6);
        let mk = |rng: &mut Rng, rows: usize| -> FeatureMatrix {
            FeatureMatrix::from_rows(
                (0..rows)
                    .map(|_| (0..cols).map(|_| rng.uniform(-2.0, 2.0)).collect())
                    .collect(),
                FeatureGroup::Theta,
            )
            .unwrap()
        };
        let a = mk(&mut rng, ma);
        let b = mk(&mut rng, mb);
        let (d, p) = dtw_distance_banded(&a, &b, ma.max(mb)).unwrap();
        let (d_ref, p_ref) = reference_dp(&a, &b);
        assert_eq!(d, d_ref, "banded(full) != reference at {ma}x{mb}");
        assert_eq!(p, p_ref, "path length mismatch at {ma}x{mb}");
        pairs += 1;
    }

    // Scale invariance of the stage-2 score.
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let cols = 4;
        let mk = |rng: &mut Rng| -> FeatureMatrix {
            let rows = rng.range_usize(15, 25);
            FeatureMatrix::from_rows(
                (0..rows)
                    .map(|_| (0..cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .collect(),
                FeatureGroup::Theta,
            )
            .unwrap()
        };
        let q = mk(&mut rng);
        let refs: Vec<FeatureMatrix> = (0..4).map(|_| mk(&mut rng)).collect();
        let c = rng.uniform(0.05, 20.0);
        let stats = RefStats::compute(&refs).unwrap();
        let s = score_questioned(&q, &refs, &stats).unwrap();
        let refs_scaled: Vec<FeatureMatrix> = refs.iter().map(|r| r.scale(c)).collect();
        let stats_scaled = RefStats::compute(&refs_scaled).unwrap();
        let s2 = score_questioned(&q.scale(c), &refs_scaled, &stats_scaled).unwrap();
        worst = worst.max((s2.s_hat_2 - s.s_hat_2).abs() / s.s_hat_2.abs().max(1e-12));
    }
    assert!(worst <= 1e-9, "stage-2 scale drift {worst:.3e}");
    println!(
        "criterion 6 DTW: PASS ({pairs} full-band pairs exactly equal reference DP, stage-2 scale drift <= {worst:.1e})"
    );
}

#[test]
fn criterion_7_eer() {
    assert_eq!(
        compute_eer(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap(),
        0.0
    );
    let same = vec![1.0, 2.0, 3.0, 4.0];
    assert!((compute_eer(&same, &same).unwrap() - 0.5).abs() < 1e-12);
    let hand = compute_eer(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5]).unwrap();
    assert!((hand - 1.0 / 3.0).abs() < 1e-12, "hand case {hand}");

    // Exhaustive threshold-enumeration oracle on short lists.
    let mut rng = Rng::new(707);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let ng = rng.range_usize(1, 20);
        let ni = rng.range_usize(1, 20);
        let genuine: Vec<f64> = (0..ng).map(|_| rng.uniform(0.0, 10.0)).collect();
        let impostor: Vec<f64> = (0..ni).map(|_| rng.uniform(1.0, 11.0)).collect();
        let got = compute_eer(&genuine, &impostor).unwrap();

        // Oracle: scan adjacent threshold pairs for the sign change of
        // FAR - FRR and interpolate.
        let mut ts: Vec<f64> = genuine.iter().chain(&impostor).cloned().collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts.insert(0, ts[0] - 1.0);
        let far = |t: f64| impostor.iter().filter(|&&s| s <= t).count() as f64 / ni as f64;
        let frr = |t: f64| genuine.iter().filter(|&&s| s > t).count() as f64 / ng as f64;
        let mut want = None;
        for w in ts.windows(2) {
            let (f0, r0, f1, r1) = (far(w[0]), frr(w[0]), far(w[1]), frr(w[1]));
            if (f0 - r0) == 0.0 {
                want = Some(f0);
                break;
            }
            if (f0 - r0) < 0.0 && (f1 - r1) >= 0.0 {
                let a = -(f0 - r0) / ((f1 - r1) - (f0 - r0));
                want = Some(f0 + a * (f1 - f0));
                break;
            }
        }
        let want = want.unwrap_or(far(*ts.last().unwrap()));
        worst = worst.max((got - want).abs());
    }
    assert!(worst <= 1e-9, "EER oracle disagreement {worst:.3e}");
    println!("criterion 7 EER/DET: PASS (hand cases exact, oracle agreement <= {worst:.1e})");
}

#[test]
fn criterion_8_end_to_end_discrimination() {
    let pipe = pipeline();
    let start = Instant::now();

    let protocol = ProtocolConfig {
        seed: 7,
        ..Default::default()
    };
    let sim_users = matrices_for(&pipe.simulated, FeatureGroup::Omega);
    let est_users = matrices_for(&pipe.cv.estimated, FeatureGroup::Omega);

    let sim_runs = run_protocol(&sim_users, &DtwBackend, &protocol).unwrap();
    let sim_eer = aggregate_runs(&sim_runs).unwrap().eer_mean;
    let est_runs = run_protocol(&est_users, &DtwBackend, &protocol).unwrap();
    let est_agg = aggregate_runs(&est_runs).unwrap();
    let (est_eer, est_std) = (est_agg.eer_mean, est_agg.eer_std);

    assert!(
        est_eer < 0.25,
        "estimated-omega EER {est_eer:.4} not below 25%"
    );
    assert!(
        est_eer <= sim_eer + 0.05,
        "estimated EER {est_eer:.4} worse than simulated {sim_eer:.4} + 5pp"
    );

    let eval_secs = start.elapsed().as_secs_f64();
    let total = pipe.synth_secs + pipe.replay_secs + pipe.cv_secs + eval_secs;
    assert!(total < 600.0, "pipeline took {total:.1} s (budget 600 s)");
    println!(
        "criterion 8 end-to-end: PASS (10-run mean EER estimated {est_eer:.4} +/- {est_std:.4} vs simulated {sim_eer:.4}; pipeline {total:.1} s)"
    );
}

#[test]
fn criterion_9_determinism() {
    // Two full CLI pipeline executions with the same root seed must produce
    // byte-identical artifact trees.
    fn run(args: &[&str]) {
        let code = sigkin::cli::run_command(std::iter::once("sigkin").chain(args.iter().copied()));
        assert_eq!(code, 0, "command failed: {args:?}");
    }
    fn tree(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            let mut entries: Vec<_> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            entries.sort();
            for p in entries {
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((
                        p.strip_prefix(root).unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&p).unwrap(),
                    ));
                }
            }
        }
        out.sort();
        out
    }

    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
        run(&[
            "synth",
            "--seed",
            "7",
            "--users",
            "6",
            "--genuine",
            "8",
            "--forgeries",
            "3",
            "--out",
            &path("corpus"),
        ]);
        run(&[
            "replay",
            "--corpus",
            &path("corpus"),
            "--out",
            &path("feat_sim"),
        ]);
        run(&[
            "estimate",
            "--seed",
            "7",
            "--corpus",
            &path("corpus"),
            "--truth",
            &path("feat_sim"),
            "--cv",
            "3",
            "--out",
            &path("feat_est"),
        ]);
        run(&[
            "evaluate",
            "--seed",
            "7",
            "--features",
            &path("feat_sim"),
            "--mode",
            "random",
            "--group",
            "omega",
            "--refs",
            "4",
            "--report",
            &path("rep_sim.json"),
            "--det",
            &path("det_sim.csv"),
            "--dump-scores",
            &path("scores_sim.csv"),
        ]);
        run(&[
            "evaluate",
            "--seed",
            "7",
            "--features",
            &path("feat_est"),
            "--mode",
            "skilled",
            "--group",
            "tau",
            "--refs",
            "4",
            "--report",
            &path("rep_est.json"),
            "--det",
            &path("det_est.csv"),
        ]);
        run(&[
            "plot",
            "--det",
            &path("det_sim.csv"),
            &path("det_est.csv"),
            "--labels",
            "sim,est",
            "--out",
            &path("det.svg"),
        ]);
        trees.push(tree(dir.path()));
    }
    assert_eq!(trees[0].len(), trees[1].len());
    for (a, b) in trees[0].iter().zip(&trees[1]) {
        assert_eq!(a.0, b.0, "tree layout differs");
        assert_eq!(a.1, b.1, "{} differs between runs", a.0);
    }
    let n = trees[0].len();
    println!(
        "criterion 9 determinism: PASS ({n} artifact files byte-identical across two pipeline runs)"
    );
}
