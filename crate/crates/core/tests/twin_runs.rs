use condexp::filters::{assimilate_sequence, DriverOptions, FilterKind, ScheduleEntry};
use condexp::models::{make_twin_experiment, Lorenz84, Lorenz84Params, Model};
use condexp::rv::{EnsembleRV, PceRV, Rv};
use condexp::seed::{Seeder, PRIOR_INIT};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn lorenz() -> Lorenz84 {
    Lorenz84::new(Lorenz84Params::default(), Vec::new(), [0.06, 0.09, 0.09]).unwrap()
}

fn ensemble_prior(seeder: &Seeder, n: usize, mean: &[f64], sd: f64) -> Rv {
    let samples = DMatrix::from_fn(n, mean.len(), |i, j| {
        let z: f64 = StandardNormal.sample(&mut seeder.stream(PRIOR_INIT, &[i as u64, j as u64]));
        mean[j] + sd * z
    });
    Rv::Ensemble(EnsembleRV::uniform(samples).unwrap())
}

fn schedule(times: &[f64], observations: &[DVector<f64>]) -> Vec<ScheduleEntry> {
    times
        .iter()
        .zip(observations)
        .map(|(&time, y)| ScheduleEntry {
            time,
            observation: Some(y.clone()),
        })
        .collect()
}

#[test]
fn lorenz_enkf_tracks_truth_and_shrinks_spread() {
    let model = lorenz();
    let seeder = Seeder::new(12);
    let init = DVector::from_row_slice(&[0.6026, -0.0457, 0.9068]);
    let times: Vec<f64> = (1..=20).map(f64::from).collect();
    let twin = make_twin_experiment(&model, &init, &seeder, 0.0, &times).unwrap();
    let prior = ensemble_prior(&seeder, 200, &[0.6, 0.0, 0.5], 0.7);
    let out = assimilate_sequence(
        &model,
        &schedule(&times, &twin.observations),
        prior,
        FilterKind::Enkf,
        &seeder,
        &DriverOptions::default(),
    )
    .unwrap();
    for s in &out {
        let (tf, ta) = (
            s.forecast.total_variance().unwrap(),
            s.analysis.total_variance().unwrap(),
        );
        assert!(ta <= tf, "step {}: analysis {ta} above forecast {tf}", s.step);
    }
    let last = out.last().unwrap();
    let err = (last.analysis.mean() - twin.truth.last().unwrap()).norm();
    assert!(err < 0.2, "final error {err}");
}

#[test]
fn reruns_are_identical() {
    let model = lorenz();
    let run = || {
        let seeder = Seeder::new(3);
        let init = DVector::from_row_slice(&[1.0, 0.2, -0.3]);
        let times = [1.0, 2.0, 3.0];
        let twin = make_twin_experiment(&model, &init, &seeder, 0.0, &times).unwrap();
        let prior = ensemble_prior(&seeder, 50, &[1.0, 0.0, 0.0], 0.5);
        let kind = FilterKind::CovarianceMatched { degree: 2 };
        assimilate_sequence(
            &model,
            &schedule(&times, &twin.observations),
            prior,
            kind,
            &seeder,
            &DriverOptions::default(),
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn pce_and_large_ensemble_agree_on_a_short_window() {
    let model = lorenz();
    let seeder = Seeder::new(5);
    let mean = DVector::from_row_slice(&[0.6, -0.05, 0.9]);
    let factor = DMatrix::from_diagonal_element(3, 3, 0.05);
    let pce = Rv::Pce(PceRV::gaussian(&mean, &factor, 3).unwrap());
    let ens = ensemble_prior(&seeder, 20_000, mean.as_slice(), 0.05);
    let entry = [ScheduleEntry {
        time: 0.5,
        observation: None,
    }];
    let options = DriverOptions {
        pce_degree: 3,
        grid_level: 4,
        ..DriverOptions::default()
    };
    let a = assimilate_sequence(&model, &entry, pce, FilterKind::Gmkf, &seeder, &options).unwrap();
    let b = assimilate_sequence(&model, &entry, ens, FilterKind::Gmkf, &seeder, &options).unwrap();
    let (ma, mb) = (a[0].forecast.mean(), b[0].forecast.mean());
    let sd = b[0].forecast.covariance().unwrap().diagonal().map(f64::sqrt);
    for j in 0..3 {
        let se = sd[j] / (20_000f64).sqrt();
        assert!(
            (ma[j] - mb[j]).abs() < 5.0 * se,
            "component {j}: {} vs {}",
            ma[j],
            mb[j]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn observation_free_runs_match_the_model(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let model = lorenz();
        let seeder = Seeder::new(seed);
        let prior = ensemble_prior(&seeder, 4, &[x, y, 0.3], 0.1);
        let entry = [ScheduleEntry { time: 1.0, observation: None }];
        let out = assimilate_sequence(&model, &entry, prior.clone(), FilterKind::Gmkf, &seeder, &DriverOptions::default())
            .unwrap();
        prop_assert!(out[0].report.is_none());
        let members = prior.as_ensemble().unwrap();
        let moved = out[0].analysis.as_ensemble().unwrap();
        for i in 0..members.len() {
            let direct = model.forecast(&members.sample(i), &DVector::zeros(3), 0.0, 1.0).unwrap();
            prop_assert_eq!(moved.sample(i), direct);
        }
    }
}
