use cournot_core::best_reply::{best_reply_operator, iterate_best_reply, BestReplyOptions};
use cournot_core::game::{
    eval_interaction, CongestionSpec, CostModel, ExternalityModel, InteractionKernel, KernelExpr, QuadraticBase,
};
use cournot_core::measures::{nodes, pushforward_map_1d, pushforward_particles, DiscreteMeasure, GridMeasure1D};
use cournot_core::ode1d::{algo1_step, algo2_step, Algo1State, Algo2State};
use cournot_core::scenario::{
    compare_records, emit_scenario, parse_scenario, preset, solve_scenario, Formats, MuSpec, ScenarioConfig,
    SolverKind, StartSpec,
};
use cournot_core::transport::{
    assignment, discrete_ot_oracle, monotone_map, monotone_plan, wasserstein1, wasserstein1_atoms, TransportMap1D,
};
use cournot_core::verification::{complementarity_report, exploitability, Distribution, PlanMap};
use cournot_core::Error;
use proptest::prelude::*;

fn abs_power(a: f64, b: f64, c: f64, d: f64, q: f64) -> KernelExpr {
    KernelExpr::AbsPower { a, b, c, d: [d, 0.0], q }
}

fn twisted_cost() -> impl Strategy<Value = CostModel> {
    prop_oneof![
        Just(CostModel::Quadratic),
        (1.2f64..5.0).prop_map(|p| CostModel::Power { p }),
        (0.2f64..3.0).prop_map(|c| CostModel::Bilinear { coef: -c }),
    ]
}

fn kernel_expr() -> impl Strategy<Value = KernelExpr> {
    (0.0f64..3.0, 0.5f64..3.0, 0.0f64..2.0, 0.0f64..0.5, prop::sample::select(vec![1.2, 2.0, 4.0]))
        .prop_map(|(a, b, c, d, q)| abs_power(a, b, c, d, q))
}

fn positive_density(cells: usize) -> impl Strategy<Value = GridMeasure1D> {
    prop::collection::vec(0.2f64..3.0, 8).prop_map(move |t| {
        let k = t.len();
        GridMeasure1D::normalized((0..cells).map(|i| t[i * k / cells]).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn monotone_coupling_is_optimal_for_twisted_costs(
        xs in prop::collection::vec(0.0f64..1.0, 1..=8),
        ys_seed in prop::collection::vec(0.0f64..1.0, 8),
        cost in twisted_cost(),
    ) {
        let n = xs.len();
        let a = DiscreteMeasure::equal_weights(1, xs.iter().map(|x| [*x, 0.0]).collect()).unwrap();
        let b = DiscreteMeasure::equal_weights(1, ys_seed[..n].iter().map(|y| [*y, 0.0]).collect()).unwrap();
        let (_, best) = discrete_ot_oracle(&a, &b, &cost).unwrap();
        let mono = monotone_plan(&a, &b).unwrap().cost(&cost);
        prop_assert!(mono <= best + 1e-8, "{} > {}", mono, best);
    }

    #[test]
    fn log_scheme_keeps_an_increasing_map_with_fixed_ends(
        p in 1.5f64..4.0,
        expr in kernel_expr(),
        mu in positive_density(64),
    ) {
        let cost = CostModel::Power { p };
        let k = InteractionKernel::new(expr, 1.0).unwrap();
        let model = ExternalityModel::one_dim(Some(CongestionSpec::Log), Some(k), None);
        let mut state = Algo1State::new(TransportMap1D::identity(64));
        for _ in 0..5 {
            // strong kernels can concentrate S_k beyond f64 resolution; the
            // step must then refuse rather than hand back a flat map
            state = match algo1_step(&state, &cost, &model, &mu) {
                Ok(s) => s,
                Err(Error::Numeric(_)) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let t = state.t.values();
            prop_assert_eq!(t[0], 0.0);
            prop_assert_eq!(t[64], 1.0);
            prop_assert!(t.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn power_scheme_keeps_a_probability_density(
        alpha in 1.0f64..3.0,
        p in 1.5f64..4.0,
        expr in kernel_expr(),
        mu in positive_density(64),
    ) {
        let cost = CostModel::Power { p };
        let k = InteractionKernel::new(expr, 1.0).unwrap();
        let model = ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha }), Some(k), None);
        let mut state = Algo2State {
            nu: GridMeasure1D::uniform(64),
            lambda: f64::NAN,
            s: TransportMap1D::identity(64),
            phi_c: vec![0.0; 64],
            k: 0,
            step_history: Vec::new(),
        };
        for _ in 0..5 {
            let next = algo2_step(&state, &cost, &model, &mu).unwrap();
            prop_assert!((next.nu.mass() - 1.0).abs() < 1e-10);
            prop_assert!(next.nu.density().iter().all(|d| *d >= 0.0));
            // the mass of (λ − g)₊^{1/α} increases strictly through λ
            let g: Vec<f64> = state
                .nu
                .midpoints()
                .iter()
                .zip(&next.phi_c)
                .map(|(y, pc)| pc + eval_interaction(&k, &state.nu, *y))
                .collect();
            let mass = |l: f64| g.iter().map(|v| (l - v).max(0.0).powf(1.0 / alpha)).sum::<f64>() / 64.0;
            let d = 1e-6;
            prop_assert!(mass(next.lambda - d) < 1.0 && 1.0 < mass(next.lambda + d));
            state = next;
        }
    }

    #[test]
    fn best_reply_preserves_mass_and_the_box(
        eps in 0.0f64..0.3,
        a in 0.3f64..2.0,
        cx in 0.0f64..1.0,
        cy in 0.0f64..1.0,
        q in prop::sample::select(vec![2.0, 4.0]),
    ) {
        let model = ExternalityModel {
            dim: 2,
            congestion: None,
            kernel: Some(InteractionKernel::new(abs_power(1.0, 1.0, 1.0, 0.0, q), eps).unwrap()),
            base: Some(QuadraticBase { a: [a, a], center: [cx, cy] }),
        };
        let mu = DiscreteMeasure::uniform_lattice_2d(10);
        let mut nu = mu.clone();
        for _ in 0..3 {
            nu = best_reply_operator(&model, &mu, &nu).unwrap();
            prop_assert!((nu.total_weight() - 1.0).abs() < 1e-12);
            prop_assert!(nu.atoms().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn config_text_round_trips(
        dim2 in any::<bool>(),
        solver in 0usize..3,
        table in prop::collection::vec(0.01f64..5.0, 1..6),
        kernel in prop::option::of(kernel_expr()),
        eps in 0.0f64..2.0,
        alpha in 1.0f64..4.0,
        n_cells in 2usize..2048,
        tol in prop::option::of(1e-14f64..1e-3),
        damping in prop::option::of(0.01f64..1.0),
        seed in any::<u64>(),
        k in prop::option::of(0.1f64..4.0),
        v0 in prop::option::of((0.0f64..3.0, 0.0f64..3.0, 0.0f64..1.0, 0.0f64..1.0)),
    ) {
        let mut c = preset("fig2").unwrap();
        c.name = format!("r{seed}");
        c.solver = [SolverKind::Algo1, SolverKind::Algo2, SolverKind::BestReply][solver];
        c.congestion = match c.solver {
            SolverKind::Algo1 => Some(CongestionSpec::Log),
            SolverKind::Algo2 => Some(CongestionSpec::Power { alpha }),
            SolverKind::BestReply => None,
        };
        if c.solver == SolverKind::BestReply {
            c.cost = CostModel::Quadratic;
            c.dimension = if dim2 { 2 } else { 1 };
        }
        c.mu = if c.dimension == 1 { MuSpec::Table(table) } else { MuSpec::Uniform };
        c.kernel = kernel;
        c.eps = eps;
        c.n_cells = n_cells;
        c.tol = tol;
        c.damping = damping;
        c.seed = seed;
        c.start = k.map_or(StartSpec::Default, StartSpec::Power);
        c.v0 = v0.map(|(a0, a1, c0, c1)| QuadraticBase { a: [a0, a1], center: [c0, c1] });
        c.formats = Formats { json: true, csv: dim2 };
        let back: ScenarioConfig = parse_scenario(&emit_scenario(&c)).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn map_and_particle_pushforwards_agree(k in 0.3f64..3.0) {
        let n = 256;
        let u = GridMeasure1D::uniform(n);
        let t = TransportMap1D::from_fn(n, |x| x.powf(k)).unwrap();
        let grid = pushforward_map_1d(&t, &u).unwrap();
        let particles = GridMeasure1D::uniform(1).quantize(20_000);
        let pushed = pushforward_particles(|p| [p[0].powf(k), 0.0], &particles).unwrap();
        let binned = pushed.to_grid(n).unwrap();
        let l1: f64 = grid.density().iter().zip(binned.density()).map(|(a, b)| (a - b).abs() / n as f64).sum();
        prop_assert!(l1 < 4.0 / n as f64, "{}", l1);
    }
}

#[test]
fn envelope_potential_matches_its_double_transform() {
    for name in ["fig2", "fig3", "fig3_nonsym"] {
        let c = preset(name).unwrap();
        let r = solve_scenario(&c).unwrap().result;
        let pair = r.potentials.as_ref().unwrap();
        let n = c.n_cells;
        let ys = cournot_core::measures::midpoints(n);
        let worst = nodes(n)
            .iter()
            .zip(&pair.phi)
            .map(|(x, phi)| {
                let m = ys
                    .iter()
                    .zip(&pair.phi_c)
                    .map(|(y, pc)| c.cost.c1(*x, *y) - pc)
                    .fold(f64::INFINITY, f64::min);
                (m - phi).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{name}: {worst}");
    }
}

#[test]
fn power_scheme_refines_consistently() {
    for name in ["fig3", "fig3_nonsym"] {
        let mut c = preset(name).unwrap();
        let a = solve_scenario(&c).unwrap().result;
        c.n_cells = 1024;
        let b = solve_scenario(&c).unwrap().result;
        let w = wasserstein1(a.grid_nu().unwrap(), b.grid_nu().unwrap());
        assert!(w < 4.0 / 512.0, "{name}: {w}");
    }
}

#[test]
fn two_starts_of_fig2_agree() {
    let mut c = preset("fig2").unwrap();
    let a = solve_scenario(&c).unwrap();
    c.start = StartSpec::Power(2.0);
    let b = solve_scenario(&c).unwrap();
    assert!(a.result.converged && b.result.converged);
    let rep = compare_records(&[("identity".into(), a), ("square".into(), b)]).unwrap();
    assert!(rep.max_w1 < 1e-5, "{}", rep.max_w1);
}

#[test]
fn complementarity_and_exploitability_agree() {
    let tol = 1e-6;
    for name in ["trivial_power", "fig3", "fig3_nonsym", "uniqueness"] {
        let c = preset(name).unwrap();
        let model = c.model().unwrap();
        let r = solve_scenario(&c).unwrap().result;
        let alpha = match c.congestion {
            Some(CongestionSpec::Power { alpha }) => alpha,
            _ => unreachable!(),
        };
        let comp = complementarity_report(&r, &model, alpha).unwrap();
        let e = exploitability(&r, &model, &c.cost).unwrap();
        assert!(comp.passed && e < tol, "{name}");
        // move a tenth of the mass toward density 2y without re-solving
        let mut bad = r.clone();
        let nu = r.grid_nu().unwrap();
        let mixed = GridMeasure1D::normalized(
            nu.density().iter().zip(nu.midpoints()).map(|(d, y)| 0.9 * d + 0.2 * y).collect(),
        )
        .unwrap();
        bad.map = PlanMap::Grid(monotone_map(r.grid_mu().unwrap(), &mixed));
        bad.nu = Distribution::Grid(mixed);
        let comp = complementarity_report(&bad, &model, alpha).unwrap();
        let e = exploitability(&bad, &model, &c.cost).unwrap();
        assert!(!comp.passed && e > 10.0 * tol, "{name}: {e}");
    }
}

#[test]
fn best_reply_returns_a_fixed_point() {
    let opts = BestReplyOptions::default();
    // 1D, exact W₁
    let k = InteractionKernel::new(abs_power(1.0, 1.0, 1.0, 0.0, 4.0), 0.2).unwrap();
    let one = ExternalityModel { dim: 1, congestion: None, kernel: Some(k), base: Some(QuadraticBase { a: [1.0, 0.0], center: [0.3, 0.0] }) };
    let mu = GridMeasure1D::uniform(1).quantize(2000);
    let r = iterate_best_reply(&one, &mu, &mu, &opts).unwrap();
    let Distribution::Particles(nu) = &r.nu else { unreachable!() };
    let again = best_reply_operator(&one, &mu, nu).unwrap();
    assert!(r.converged);
    assert!(wasserstein1_atoms(nu, &again).unwrap() < opts.tol);
    // 2D, exact W₁ by assignment
    let c = preset("fig1").unwrap();
    let model = c.model().unwrap();
    let mu = DiscreteMeasure::uniform_lattice_2d(15);
    let r = iterate_best_reply(&model, &mu, &mu, &opts).unwrap();
    let Distribution::Particles(nu) = &r.nu else { unreachable!() };
    let again = best_reply_operator(&model, &mu, nu).unwrap();
    let cost: Vec<Vec<f64>> = nu
        .atoms()
        .iter()
        .map(|p| again.atoms().iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect())
        .collect();
    let w = assignment(&cost).1 / nu.len() as f64;
    assert!(r.converged);
    assert!(w < opts.tol, "{w}");
}
