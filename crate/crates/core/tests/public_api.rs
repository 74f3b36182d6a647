use penproj::experiments::{run_mc_study, InitialCondition, NoiseSpec, StudyConfig};
use penproj::noise::NoiseModel;
use penproj::schemes::{
    resume_trajectory, run_trajectory, NoiseInput, Observer, PenaltyState, Scheme, SchemeParams,
    SolverOpts, StepView,
};
use penproj::snapshot::{load_field, save_field, Checkpoint, FieldSnapshot};
use penproj::spectral::Grid;

struct Keep(usize, Option<PenaltyState>);

impl Observer for Keep {
    fn observe(&mut self, view: &StepView<'_>) {
        if view.state.step == self.0 {
            self.1 = Some(view.state.clone());
        }
    }
}

#[test]
fn restart_from_a_checkpoint_file_is_bit_exact() {
    let grid = Grid::new(std::f64::consts::TAU, 16, Grid::DEFAULT_PAD).unwrap();
    let model = NoiseModel::new(
        grid,
        NoiseModel::default_cutoff(16),
        NoiseModel::DEFAULT_GAMMA,
    )
    .unwrap();
    let params = SchemeParams::coupled(1.0, 0.5 / 12.0, 12, 0.4, 2.0).unwrap();
    let incs = model.sample_increments(12, params.k(), 11, 2).unwrap();
    let noise = || {
        Some(NoiseInput {
            model: &model,
            increments: &incs,
        })
    };
    let u0 = InitialCondition::Random {
        seed: 3,
        decay: 2.0,
        l2_norm: 1.0,
    }
    .build(grid);
    let opts = SolverOpts::default();

    let mut keep = Keep(5, None);
    let full = run_trajectory(
        Scheme::Penalty,
        &params,
        &u0,
        noise(),
        &opts,
        &mut [&mut keep],
    )
    .unwrap();

    let dir = std::env::temp_dir().join(format!("penproj-restart-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("step5.bin");
    Checkpoint {
        state: keep.1.unwrap(),
        ladder: full.ladder,
    }
    .save(&path)
    .unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.ladder.as_ref(), Some(incs.meta()));
    let rest =
        resume_trajectory(Scheme::Penalty, &params, ck.state, noise(), &opts, &mut []).unwrap();
    assert_eq!(rest.final_state, full.final_state);
    assert_eq!(rest.diagnostics[..], full.diagnostics[5..]);

    let field = dir.join("u.bin");
    save_field(&field, &FieldSnapshot::from(full.final_state.u.clone())).unwrap();
    assert_eq!(
        load_field(&field).unwrap().into_vector().unwrap(),
        full.final_state.u
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn studies_do_not_depend_on_scheduling() {
    let cfg = StudyConfig {
        grid: Grid::new(std::f64::consts::TAU, 16, Grid::DEFAULT_PAD).unwrap(),
        levels: vec![4, 8, 16],
        reference_steps: 32,
        paths: 5,
        noise: Some(NoiseSpec {
            cutoff: 4,
            gamma: NoiseModel::DEFAULT_GAMMA,
        }),
        ..StudyConfig::default()
    };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let wide = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let a = serial.install(|| run_mc_study(&cfg)).unwrap();
    let b = wide.install(|| run_mc_study(&cfg)).unwrap();
    for (ra, rb) in a.reports.iter().zip(&b.reports) {
        for (pa, pb) in ra.paths.iter().zip(&rb.paths) {
            assert_eq!(pa.path, pb.path);
            assert_eq!(pa.em().map(f64::to_bits), pb.em().map(f64::to_bits));
            assert_eq!(pa.tem().map(f64::to_bits), pb.tem().map(f64::to_bits));
        }
    }
}
