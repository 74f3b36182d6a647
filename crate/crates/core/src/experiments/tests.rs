use super::*;
use crate::error::Error;
use crate::noise::{NoiseModel, WienerIncrements};
use crate::schemes::{Advection, SolverOpts};
use crate::spectral::Grid;

fn small(paths: usize) -> StudyConfig {
    StudyConfig {
        grid: Grid::periodic_2pi(16).unwrap(),
        levels: vec![4, 8, 16],
        reference_steps: 32,
        paths,
        noise: Some(NoiseSpec {
            cutoff: 3,
            gamma: 3.0,
        }),
        initial: InitialCondition::Random {
            seed: 3,
            decay: 2.0,
            l2_norm: 1.0,
        },
        ..StudyConfig::default()
    }
}

#[test]
fn study_is_deterministic() {
    let cfg = small(3);
    let a = run_mc_study(&cfg).unwrap();
    let b = run_mc_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.reports.len(), 3);
    for (l, r) in a.reports.iter().enumerate() {
        assert_eq!(r.level.level, l);
        assert_eq!(r.level.steps, cfg.levels[l]);
        assert_eq!(r.level.eps, r.level.k.powf(0.4));
        assert_eq!(
            r.paths.iter().map(|p| p.path).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        for p in &r.paths {
            let t = p.terms.unwrap();
            assert!(t.max_term >= 0.0 && t.grad_term >= 0.0 && t.pressure_term >= 0.0);
            assert!(t.em() > 0.0);
        }
    }
    let mut other = cfg.clone();
    other.base_seed += 1;
    assert_ne!(run_mc_study(&other).unwrap().reports, a.reports);
}

#[test]
fn penalty_gap_at_reference_resolution_shrinks_with_eps() {
    let mut last = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3] {
        let cfg = StudyConfig {
            levels: vec![32],
            epsilon: Some(eps),
            advection: Advection::Implicit,
            ..small(1)
        };
        let em = run_mc_study(&cfg).unwrap().reports[0].paths[0]
            .em()
            .unwrap();
        assert!(em > 0.0 && em < last, "eps {eps}: {em} vs {last}");
        last = em;
    }
}

#[test]
fn deterministic_taylor_green_eps_sweep() {
    let mut last = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3] {
        let cfg = StudyConfig {
            levels: vec![8],
            epsilon: Some(eps),
            noise: None,
            initial: InitialCondition::TaylorGreen { amplitude: 1.0 },
            ..small(1)
        };
        let em = run_mc_study(&cfg).unwrap().reports[0].paths[0]
            .em()
            .unwrap();
        assert!(em < last, "eps {eps}: {em} vs {last}");
        last = em;
    }
}

#[test]
fn stokes_study_collects_sample_sets() {
    let cfg = StudyConfig {
        nonlinear: false,
        sample_sets: true,
        ..small(4)
    };
    let res = run_mc_study(&cfg).unwrap();
    assert_eq!(res.z_reports.as_ref().unwrap(), &res.reports);
    let sets = res.sample_sets.unwrap();
    assert_eq!(sets.len(), 3);
    for (l, level) in sets.iter().enumerate() {
        assert_eq!(level.len(), 4);
        let stats = sample_set_membership(
            level,
            ThresholdRule::Quantile(1.0)
                .resolve(level, res.reports[l].level.k, cfg.eta)
                .unwrap(),
        )
        .unwrap();
        assert_eq!(stats.complement, [0.0; 3]);
        for (q, p) in level.iter().zip(&res.reports[l].paths) {
            let q = q.unwrap();
            assert_eq!(q.z_error, p.em().unwrap());
            assert!(q.solution_bound > 0.0 && q.increment_ratio > 0.0);
        }
    }
}

#[test]
fn navier_stokes_study_runs_auxiliary_scheme() {
    let cfg = StudyConfig {
        sample_sets: true,
        ..small(2)
    };
    let res = run_mc_study(&cfg).unwrap();
    let z = res.z_reports.unwrap();
    assert_ne!(z, res.reports);
    assert!(z.iter().all(|r| r.finite().count() == 2));
}

#[test]
fn numerical_failures_are_recorded_per_path() {
    let cfg = StudyConfig {
        opts: SolverOpts {
            picard_max_iter: 1,
            ..SolverOpts::default()
        },
        ..small(2)
    };
    let res = run_mc_study(&cfg).unwrap();
    for r in &res.reports {
        assert_eq!(r.blown_up(), 2);
        assert!(r.mean_em().is_nan());
        assert!(r
            .paths
            .iter()
            .all(|p| p.failure.as_deref().unwrap().contains("reference")));
        assert_eq!(estimate_exceedance(r, 1e300, 0.2).fraction, 1.0);
    }
}

#[test]
fn invalid_studies_are_rejected() {
    let bad = |f: fn(&mut StudyConfig)| {
        let mut c = small(1);
        f(&mut c);
        run_mc_study(&c).unwrap_err()
    };
    assert!(matches!(
        bad(|c| c.levels = vec![3, 8]),
        Error::InvalidParameter {
            name: "study.levels",
            ..
        }
    ));
    assert!(matches!(
        bad(|c| c.levels = vec![8, 4]),
        Error::InvalidParameter {
            name: "study.levels",
            ..
        }
    ));
    assert!(matches!(
        bad(|c| c.paths = 0),
        Error::InvalidParameter {
            name: "study.paths",
            ..
        }
    ));
    assert!(matches!(
        bad(|c| c.alpha = 1.0),
        Error::InvalidParameter {
            name: "scheme.alpha",
            ..
        }
    ));
}

#[test]
fn telescoping_check_catches_tampering() {
    let g = Grid::periodic_2pi(16).unwrap();
    let model = NoiseModel::new(g, 2, 3.0).unwrap();
    let w = model.sample_increments(8, 0.1, 1, 0).unwrap();
    let c = w.coarsen(4).unwrap();
    check_telescoping(&w, &c).unwrap();
    let mut ticks = c.ticks().to_vec();
    ticks[0] += 1;
    let forged = WienerIncrements::from_parts(*c.meta(), 4, c.channels(), ticks).unwrap();
    assert!(matches!(
        check_telescoping(&w, &forged),
        Err(Error::CouplingMismatch(_))
    ));
    let other = model
        .sample_increments(8, 0.1, 1, 1)
        .unwrap()
        .coarsen(4)
        .unwrap();
    assert!(check_telescoping(&w, &other).is_err());
}

#[test]
fn stability_sweep_means() {
    let cfg = small(3);
    let levels = run_stability_sweep(&cfg).unwrap();
    assert_eq!(levels.len(), 3);
    for l in &levels {
        assert_eq!(l.finite_paths, 3);
        assert!(l.mean.max_energy > 0.0 && l.mean.grad_sum > 0.0 && l.mean.pressure_sum > 0.0);
    }
    assert_eq!(run_stability_sweep(&cfg).unwrap(), levels);
}
