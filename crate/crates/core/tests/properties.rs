//! Structural invariants of the reduction machinery beyond the acceptance
//! criteria: case-selector consistency, action-side behaviour, oracle
//! agreement of the two derivative solvers, and randomized algebra laws.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hdp_core::bundle::pair_base;
use hdp_core::reduction::residuals;
use hdp_core::scenarios::closed_gnc_form;
use hdp_core::verify::{
    sample_full_state, sample_reduced_state, sample_rotation, sample_unit, sample_vec,
};
use hdp_core::*;

fn sample_tangent(rng: &mut ChaCha8Rng, e: &Vec3) -> BaseTangent {
    BaseTangent::new(
        sample_vec(rng, 1.0),
        project_sphere_tangent(e, &sample_vec(rng, 1.0)),
    )
}

fn sample_derivative(rng: &mut ChaCha8Rng, e: &Vec3) -> ReducedDerivative {
    ReducedDerivative {
        x_dot: sample_tangent(rng, e),
        y_dot: YMomentum::new(sample_vec(rng, 1.0), sample_vec(rng, 1.0)),
        mu_dot: sample_vec(rng, 1.0),
    }
}

/// Assembling with a generic-case selector and an explicitly trivial
/// connection must agree termwise with the trivial-connection fast path.
#[test]
fn case_general_with_trivial_connection_matches_case_two() {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let sc = ball_hocs(&p, &lyap).unwrap();
    let general = HdpProblem::new(
        sc.problem.h.clone(),
        ConnectionForm::trivial(),
        sc.problem.conn_gnc.clone(),
        sc.problem.dist.clone(),
        sc.problem.metric.clone(),
        Vec::new(),
        ActionSide::Right,
        CaseSelector::General,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = sample_reduced_state(&mut rng);
        let d = sample_derivative(&mut rng, &s.x.e);
        let r1 = residuals(&general, &s, &d, &s).unwrap();
        let r2 = residuals(&sc.problem, &s, &d, &s).unwrap();
        for (a, b) in r1.horizontal.iter().zip(r2.horizontal.iter()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in r1.vertical.iter().zip(r2.vertical.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "case mismatch {worst:.3e}");
}

/// With A = A• the two-connection assembly must coincide with the
/// one-connection equations: ⟨Dy/Dt + ∂ᶜh/∂x, δx⟩ + ⟨μ, B̃(∂h/∂y, δx) +
/// ad_{𝒜δx}∂h/∂μ⟩ horizontally and ⟨Dμ̄/Dt − s·ad*μ, η⟩ vertically.
#[test]
fn two_connection_assembly_reduces_to_one_connection_form() {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let sc = ball_hocs(&p, &lyap).unwrap();
    let gnc = closed_gnc_form(&p);
    let problem = HdpProblem::new(
        sc.problem.h.clone(),
        gnc.clone(),
        gnc.clone(),
        sc.problem.dist.clone(),
        sc.problem.metric.clone(),
        Vec::new(),
        ActionSide::Right,
        CaseSelector::General,
    )
    .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = sample_reduced_state(&mut rng);
        let d = sample_derivative(&mut rng, &s.x.e);
        let (decomp, _) = build_gnc(&problem.dist, &problem.metric, &s).unwrap();
        let (hor, ver) = decompose_reduced_variations(&decomp);

        let got_h = horizontal_residuals(&problem, &s, &d, &s).unwrap();
        let got_v = vertical_residuals(&problem, &s, &d, &s).unwrap();

        // one-connection form written out directly
        let dy = covariant_dy(&d.y_dot, &s.x);
        let dhc = problem.h.base_dx(&s);
        let dh_dy = problem.h.fiber_y(&s);
        let dh_dmu = problem.h.fiber_mu(&s);
        let dmu = covariant_dmu(&s.mu, &d.mu_dot, &gnc, &s.x, &d.x_dot, Some(&s)).unwrap();
        let core = dmu + ad_star(&dh_dmu, &s.mu); // right action
        for (i, dx) in hor.iter().enumerate() {
            let b = reduced_curvature(&gnc, &s.x, &dh_dy, dx).unwrap();
            let a_dx = gnc.value(&s.x, dx, Some(&s)).unwrap();
            let want = pair_base(&dy, dx)
                + pair_base(&dhc, dx)
                + s.mu.dot(&b)
                + dh_dmu.dot(&ad_star(&a_dx, &s.mu));
            worst = worst.max((got_h[i] - want).abs());
        }
        for (i, eta) in ver.iter().enumerate() {
            worst = worst.max((got_v[i] - core.dot(eta)).abs());
        }
    }
    assert!(worst <= 1e-12, "one/two-connection mismatch {worst:.3e}");
}

/// Flipping the action side flips exactly the ad* term of the vertical
/// residual and its φ-coupled horizontal image.
#[test]
fn action_side_flips_only_the_ad_star_term() {
    // synthetic Hamiltonian with ∂h/∂μ not parallel to μ
    let skewed = Mat3::new(1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5);
    let h = ReducedHamiltonian::new(
        move |s: &ReducedState| 0.5 * (s.mu.transpose() * skewed * s.mu)[(0, 0)],
        |_| BaseTangent::zero(),
        move |s: &ReducedState| skewed * s.mu,
        |_| YMomentum::default(),
    );
    let p = BallParams::default();
    let metric = Metric::from_block_weights(p.i1, p.m2, p.i2);
    let dist = hdp_core::scenarios::hocs_distribution(&p);
    let make = |side: ActionSide| {
        HdpProblem::new(
            h.clone(),
            ConnectionForm::trivial(),
            gnc_connection(dist.clone(), metric.clone()),
            dist.clone(),
            metric.clone(),
            Vec::new(),
            side,
            CaseSelector::TrivialConnection,
        )
        .unwrap()
    };
    let left = make(ActionSide::Left);
    let right = make(ActionSide::Right);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let s = sample_reduced_state(&mut rng);
        let d = sample_derivative(&mut rng, &s.x.e);
        let (decomp, _) = build_gnc(&dist, &metric, &s).unwrap();
        let (hor, ver) = decompose_reduced_variations(&decomp);
        let ad = ad_star(&h.fiber_mu(&s), &s.mu);

        let vl = vertical_residuals(&left, &s, &d, &s).unwrap();
        let vr = vertical_residuals(&right, &s, &d, &s).unwrap();
        for (i, eta) in ver.iter().enumerate() {
            assert!((vl[i] - (d.mu_dot - ad).dot(eta)).abs() < 1e-13);
            assert!((vr[i] - (d.mu_dot + ad).dot(eta)).abs() < 1e-13);
        }

        let hl = horizontal_residuals(&left, &s, &d, &s).unwrap();
        let hr = horizontal_residuals(&right, &s, &d, &s).unwrap();
        for (i, dx) in hor.iter().enumerate() {
            let phi = phi_map(&left.conn_a, &left.conn_gnc, &s.x, dx, Some(&s)).unwrap();
            let predicted = 2.0 * ad.dot(&phi);
            assert!((hl[i] - hr[i] + predicted).abs() < 1e-12);
        }
    }
}

/// The reduced derivative solve must agree with the projected full-space
/// derivative: the central equivalence, checked pointwise.
#[test]
fn reduced_solve_matches_projected_full_oracle() {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    for sc in [ball_hocs(&p, &lyap).unwrap(), ball_gnhs_dalembert(&p).unwrap()] {
        let s0 = default_initial(&p);
        let (fd, fdiag) = full_vector_field(&sc.dynamics, &s0).unwrap();
        let red = reduce_trivial(&s0);
        let (rd, rdiag) = solve_reduced_step(&sc.problem, &red, &red).unwrap();
        assert!(fdiag.residual < 1e-10 && rdiag.residual < 1e-10);
        assert!((fd.pi_dot - rd.y_dot.pi).amax() < 1e-6, "{}", sc.id);
        assert!((fd.sigma_dot - rd.y_dot.sigma).amax() < 1e-6, "{}", sc.id);
        assert!((fd.gamma_dot - rd.mu_dot).amax() < 1e-6, "{}", sc.id);
        assert!((fd.eta - rd.x_dot.eta).amax() < 1e-12);
        assert!((fd.de - rd.x_dot.de).amax() < 1e-12);
        // vertical invariant of the solved reduced field
        assert!(rd.mu_dot.dot(&red.x.e).abs() < 1e-12);
    }
}

/// A Lyapunov rate that no admissible force can realize must surface as an
/// inconsistency, not a silent least-squares fit.
#[test]
fn impossible_lyapunov_rate_reports_inconsistent() {
    let p = BallParams::default();
    let lyap = LyapunovSpec::new(
        |_| hdp_core::connection::Mat9::identity(),
        |_| 0.0,
        |_| (Vec3::zeros(), Vec3::zeros()),
        |_| 1.0, // demands strictly negative dV/dt at a critical point of V
    );
    let sc = ball_hocs(&p, &lyap).unwrap();
    let s0 = hdp_core::scenarios::initial_at_top(&p);
    match full_vector_field(&sc.dynamics, &s0) {
        Err(SolveError::Inconsistent { .. }) => {}
        other => panic!("expected inconsistency, got {other:?}"),
    }
    let red = reduce_trivial(&s0);
    match solve_reduced_step(&sc.problem, &red, &red) {
        Err(SolveError::Inconsistent { .. }) => {}
        other => panic!("expected inconsistency, got {:?}", other.map(|(d, _)| d)),
    }
}

#[test]
fn off_manifold_states_are_rejected_before_solving() {
    let p = BallParams::default();
    let sc = ball_gnhs_dalembert(&p).unwrap();
    let mut s0 = default_initial(&p);
    s0.sigma += project_sphere_tangent(&s0.e, &Vec3::new(0.1, 0.0, 0.0));
    match full_vector_field(&sc.dynamics, &s0) {
        Err(SolveError::Precondition { .. }) => {}
        other => panic!("expected precondition failure, got {other:?}"),
    }
}

#[test]
fn atiyah_projection_failure_on_invalid_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut s = sample_full_state(&mut rng);
    s.sigma += s.e * 1e-3; // break tangency beyond the repair band
    match atiyah_cotangent(&s, &ConnectionForm::trivial()) {
        Err(BundleError::ProjectionFailure { .. }) => {}
        other => panic!("expected projection failure, got {other:?}"),
    }
}

/// Free dynamics: spatial momenta are conserved exactly by the field, so a
/// long run keeps |γ| at machine precision.
#[test]
fn free_motion_conserves_momenta() {
    let p = BallParams {
        g: 0.0,
        ..BallParams::default()
    };
    let sc = free_motion(&p).unwrap();
    let mut s0 = default_initial(&p);
    s0.sigma = Vec3::zeros();
    let cfg = IntegratorConfig::new(1e-2, 10.0).unwrap();
    let traj = integrate(
        hdp_core::scenarios::full_field(&sc),
        &s0,
        &cfg,
        &Hooks::default(),
    )
    .into_result()
    .unwrap();
    for s in &traj.states {
        assert!((s.gamma.norm() - s0.gamma.norm()).abs() < 1e-12);
        assert!((s.pi - s0.pi).amax() < 1e-12);
        assert!((s.sigma).amax() < 1e-12);
    }
}

/// Momentum map equivariance under the lifted right action:
/// J(s·B) = Bᵀ J(s).
#[test]
fn momentum_map_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..50 {
        let s = sample_full_state(&mut rng);
        let b = sample_rotation(&mut rng);
        let moved = hdp_core::bundle::lifted_action(&s, &b);
        let want = b.transpose() * momentum_map(&s);
        assert!((momentum_map(&moved) - want).amax() < 1e-13);
    }
}

/// The variational split of the d'Alembert system decomposes C_V into its
/// horizontal and vertical intersections at random states.
#[test]
fn variational_split_is_exhaustive_at_random_states() {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for sc in [ball_hocs(&p, &lyap).unwrap(), ball_gnhs_dalembert(&p).unwrap()] {
        for _ in 0..100 {
            let zeta = sample_reduced_state(&mut rng);
            let (decomp, _) = build_gnc(&sc.problem.dist, &sc.problem.metric, &zeta).unwrap();
            assert!(decomp.check(&sc.problem.metric) < 1e-9);
            let (hor, ver) = decompose_reduced_variations(&decomp);
            assert_eq!(hor.len() + ver.len(), decomp.cv_dim());
            // every reduced variation splits as η̄ = φ(δx) + η̄• with the
            // vertical part inside the vertical variations
            for g in sc.problem.dist.generators(&zeta) {
                let dx = g.base();
                let eta_bar = g.xi; // trivial-connection algebra slot
                let phi = phi_map(
                    &sc.problem.conn_a,
                    &sc.problem.conn_gnc,
                    &zeta.x,
                    &dx,
                    Some(&zeta),
                )
                .unwrap();
                let eta_bullet = eta_bar - phi;
                // residual after projecting onto span(ver)
                let mut res = eta_bullet;
                for v in &ver {
                    res -= v * res.dot(v);
                }
                assert!(res.norm() <= 1e-10, "split residual {:.3e}", res.norm());
            }
        }
    }
}

/// Fundamental vectors are reproduced by the variational connection:
/// A•(ζ, η_Q(q)) = η.
#[test]
fn gnc_reproduces_fundamental_vectors() {
    let p = BallParams::default();
    let dist = hdp_core::scenarios::hocs_distribution(&p);
    let metric = Metric::from_block_weights(p.i1, p.m2, p.i2);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..20 {
        let zeta = sample_reduced_state(&mut rng);
        let (decomp, _) = build_gnc(&dist, &metric, &zeta).unwrap();
        let eta = sample_vec(&mut rng, 1.0);
        let lift = TangentQ::new(Vec3::zeros(), Vec3::zeros(), eta).to_vec9();
        let got = decomp.vertical_part(&lift).unwrap();
        assert!((got - eta).amax() < 1e-10);
    }
}

proptest! {
    #[test]
    fn hat_vee_round_trip(x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0) {
        let v = Vec3::new(x, y, z);
        let back = vee(&hat(&v)).unwrap();
        prop_assert!((back - v).amax() < 1e-14);
    }

    #[test]
    fn exponential_always_lands_on_the_group(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
        let r = exp_so3(&Vec3::new(x, y, z));
        prop_assert!(r.ortho_defect() < 1e-12);
    }

    #[test]
    fn sphere_projection_idempotent_and_self_adjoint(
        seed in 0u64..1000,
        vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
        wx in -2.0f64..2.0, wy in -2.0f64..2.0, wz in -2.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = sample_unit(&mut rng);
        let v = Vec3::new(vx, vy, vz);
        let w = Vec3::new(wx, wy, wz);
        let pv = project_sphere_tangent(&e, &v);
        prop_assert!((project_sphere_tangent(&e, &pv) - pv).amax() < 1e-14);
        // self-adjoint: ⟨Pv, w⟩ = ⟨v, Pw⟩
        let lhs = pv.dot(&w);
        let rhs = v.dot(&project_sphere_tangent(&e, &w));
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }
}
