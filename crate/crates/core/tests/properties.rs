use proptest::prelude::*;
use stosign::nonconvex::{run_exponential, run_uniform, NonconvexOptions, Scaling, ScheduleParams};
use stosign::problems::NoiseModel;
use stosign::{
    fig1_objective, toy_nonconvex, BoxDomain, DenseVector, FixedNoise, Hyper, Objective, OnlineState, OptimizerKind,
    PracticalState, RngStream, StepSchedule, StochasticOracle,
};

fn grads(d: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), len)
}

fn kind() -> impl Strategy<Value = OptimizerKind> {
    prop::sample::select(OptimizerKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn online_iterates_stay_feasible_and_g_is_running_max(gs in grads(3, 40), seed in any::<u64>(), fixed in any::<bool>()) {
        let domain = BoxDomain::new([-1.0, 0.0, -0.5].into(), [1.0, 0.3, 2.0].into()).unwrap();
        let schedule = if fixed { StepSchedule::Fixed { horizon: gs.len() } } else { StepSchedule::Anytime };
        let mut st = OnlineState::new(domain.clone(), None, schedule).unwrap();
        let mut noise = RngStream::new(seed, 1);
        let mut running = [0.0f64; 3];
        for g in &gs {
            st.step(&DenseVector::from_vec(g.clone()), &mut noise).unwrap();
            for i in 0..3 {
                running[i] = running[i].max(g[i].abs());
                prop_assert_eq!(st.g_max()[i], running[i]);
            }
            prop_assert!(domain.contains(st.x()));
        }
    }

    #[test]
    fn noiseless_learner_is_signsgd(gs in grads(2, 60)) {
        let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut a = OnlineState::new(domain.clone(), None, StepSchedule::Anytime).unwrap();
        let mut b = OnlineState::new(domain, None, StepSchedule::Anytime).unwrap();
        for g in &gs {
            let g = DenseVector::from_vec(g.clone());
            a.step(&g, &mut FixedNoise::zero()).unwrap();
            b.step_signsgd(&g).unwrap();
            prop_assert!(a.x().iter().zip(b.x().iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn max_buffer_dominates_momentum(k in prop::sample::select(vec![OptimizerKind::StoSignSgd, OptimizerKind::StoSignSgdV2, OptimizerKind::IeStoSignSgd]), gs in grads(4, 30), seed in any::<u64>()) {
        let mut st = PracticalState::with_defaults(k, DenseVector::filled(4, 0.1)).unwrap();
        let mut noise = RngStream::new(seed, 1);
        for g in &gs {
            let info = st.step(&DenseVector::from_vec(g.clone()), 0.01, &mut noise).unwrap();
            for i in 0..4 {
                prop_assert!(st.precond[i] >= st.m[i].abs());
                prop_assert!(info.direction[i].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn ie_direction_rms_at_most_one(gs in grads(6, 30)) {
        let mut st = PracticalState::with_defaults(OptimizerKind::IeStoSignSgd, DenseVector::zeros(6)).unwrap();
        for g in &gs {
            let info = st.step(&DenseVector::from_vec(g.clone()), 0.01, &mut FixedNoise::zero()).unwrap();
            let rms = (info.direction.iter().map(|v| v * v).sum::<f64>() / 6.0).sqrt();
            prop_assert!(rms <= 1.0);
        }
    }

    #[test]
    fn sign_updates_move_exactly_eta(k in kind(), gs in grads(3, 10), lr in 1e-4..0.5f64, seed in any::<u64>()) {
        prop_assume!(k.is_sign_converted() || k == OptimizerKind::SignSgd);
        let h = Hyper { weight_decay: 0.0, ..k.default_hyper() };
        let mut st = PracticalState::new(k, DenseVector::filled(3, 0.25), h).unwrap();
        let mut noise = RngStream::new(seed, 1);
        for g in &gs {
            let before = st.x.clone();
            let info = st.step(&DenseVector::from_vec(g.clone()), lr, &mut noise).unwrap();
            for i in 0..3 {
                prop_assert!(matches!(info.direction[i], -1.0 | 0.0 | 1.0));
                prop_assert_eq!(st.x[i], before[i] - lr * info.direction[i]);
            }
        }
    }

    #[test]
    fn zero_gradient_isolates_decay(k in kind(), lr in 1e-4..0.2f64, wd in 0.0..1.0f64, steps in 1usize..20) {
        let h = Hyper { weight_decay: wd, eps: 0.0, ..k.default_hyper() };
        let mut st = PracticalState::new(k, DenseVector::from_vec(vec![1.0, -2.0]), h).unwrap();
        let mut noise = RngStream::new(3, 1);
        let mut expect = [1.0f64, -2.0];
        for _ in 0..steps {
            st.step(&DenseVector::zeros(2), lr, &mut noise).unwrap();
            for (e, x) in expect.iter_mut().zip(st.x.iter()) {
                *e -= lr * wd * *e;
                prop_assert!((x - *e).abs() <= 1e-15 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn nonconvex_blocks_are_exact_means(seed in any::<u64>(), k in 1u64..5, n in 1u64..8, uniform in any::<bool>()) {
        let scaling = if uniform { Scaling::Uniform } else { Scaling::Exponential };
        let params = ScheduleParams::relaxed(scaling, k, n, 0.05, 0.5).unwrap();
        let noise = NoiseModel::BoundedUniform(DenseVector::filled(2, 0.2));
        let mut oracle = StochasticOracle::new(toy_nonconvex(2).unwrap(), noise, RngStream::new(seed, 2)).unwrap();
        let opts = NonconvexOptions { trace: true, ..NonconvexOptions::default() };
        let x0 = DenseVector::from_vec(vec![1.0, -1.5]);
        let mut rng = RngStream::new(seed, 1);
        let run = if uniform {
            run_uniform(&mut oracle, &x0, &params, &opts, &mut rng)
        } else {
            run_exponential(&mut oracle, &x0, &params, &opts, &mut rng)
        }.unwrap();
        prop_assert_eq!(run.trace.len() as u64, k * n);
        prop_assert_eq!(run.averages.means.len() as u64, k);
        let mut running = [0.0f64; 2];
        for step in &run.trace {
            prop_assert!(step.delta.iter().all(|v| v.abs() <= params.d_inf));
            for i in 0..2 {
                running[i] = running[i].max(step.g[i].abs());
                prop_assert_eq!(step.g_max[i], running[i]);
            }
        }
        for (b, block) in run.trace.chunks(n as usize).enumerate() {
            for i in 0..2 {
                let mean = block.iter().map(|s| s.query[i]).sum::<f64>() / n as f64;
                prop_assert!((run.averages.means[b][i] - mean).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fig1_signsgd_step_conserves_sum(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, eta in 1e-6..1e-2f64) {
        prop_assume!((x1 - x2).abs() > 1e-3 && (x1 + x2).abs() > 1e-3);
        let f = fig1_objective();
        let x = DenseVector::from_vec(vec![x1, x2]);
        let g = f.subgradient(&x);
        let dir = [g[0].signum(), g[1].signum()];
        prop_assert_eq!(dir[0], -dir[1]);
        let sum_before = x1 + x2;
        let sum_after = (x1 - eta * dir[0]) + (x2 - eta * dir[1]);
        prop_assert!((sum_after - sum_before).abs() <= 4.0 * f64::EPSILON * (x1.abs() + x2.abs() + eta));
    }
}
