use cluster_gas::cluster::{check_partition, detect_overlaps};
use cluster_gas::ensemble::{run_ensemble, EnsembleSpec};
use cluster_gas::experiments::{cluster_paths, cluster_sizes_at, Scale, CRITERIA};
use cluster_gas::limits::{coagulation_run, dsmc_run, CoagulationOptions, DsmcOptions};
use cluster_gas::{oracles, InitialModel, Profile};

#[test]
fn ensemble_partitions_every_run() {
    let spec = EnsembleSpec::new(2, 0.02, 0.2, InitialModel::uniform(1.0), 5, 20);
    let res = run_ensemble::<2, _, _>(&spec, Some(2), |_, rec| {
        let paths = cluster_paths(&rec);
        check_partition(rec.n(), &rec.log, &paths).map_err(cluster_gas::Error::InvalidParameter)?;
        let og = detect_overlaps(&paths, spec.eps, (0.0, spec.horizon));
        Ok((og.edges.len(), paths.iter().map(|p| p.size()).sum::<usize>() == rec.n()))
    })
    .unwrap();
    assert!(res.iter().all(|&(overlaps, exhaustive)| overlaps == 0 && exhaustive));
}

#[test]
fn cluster_sizes_sum_to_particle_number() {
    let spec = EnsembleSpec::new(3, 0.1, 0.5, InitialModel::uniform(1.0), 9, 4);
    for r in 0..spec.runs {
        let rec = spec.run::<3>(r).unwrap();
        for t in [0.0, 0.25, 0.5] {
            assert_eq!(cluster_sizes_at(&rec, t).iter().sum::<usize>(), rec.n());
        }
    }
}

#[test]
fn collisionless_dsmc_follows_free_transport() {
    let model = InitialModel::new(1.0, Profile::Cosine(0.5)).unwrap();
    let opts = DsmcOptions {
        particles: 50_000,
        cell_size: 0.1,
        dt: 0.05,
        horizon: 0.2,
        output_times: vec![0.0, 0.1, 0.2],
        collisionless: true,
        n_modes: 1,
        record_cells: false,
    };
    let run = dsmc_run::<2>(&model, &opts, 3).unwrap();
    assert_eq!(run.collisions, 0);
    for s in &run.snapshots {
        let exact = oracles::free_transport_mode(0.5, 1.0, 1, s.t);
        assert!((s.modes[0] - exact).abs() <= 4.0 * s.mode_stderrs[0], "t {}: {} vs {}", s.t, s.modes[0], exact);
    }
}

#[test]
fn coagulation_conserves_mass_and_energy() {
    let opts = CoagulationOptions {
        particles: 5000,
        cell_size: 0.1,
        dt: 0.01,
        horizon: 0.5,
        output_times: vec![0.0, 0.25, 0.5],
        kernel_scale: 1.0,
        record_clusters: true,
    };
    let run = coagulation_run::<2>(&InitialModel::uniform(1.0), &opts, 4).unwrap();
    assert!(run.merges > 0);
    let clusters = run.clusters.as_ref().unwrap();
    assert_eq!(clusters.iter().map(|c| c.size()).sum::<usize>(), 5000);
    let e: f64 = run.final_clusters.iter().map(|c| c.2).sum();
    let e_from_clusters: f64 = clusters.iter().map(|c| c.energy()).sum();
    assert!((e - e_from_clusters).abs() <= 1e-9 * e);
    for c in clusters {
        assert!(c.coincidence_defect() <= 1e-9, "defect {}", c.coincidence_defect());
    }
    let mut merges = 0;
    for s in &run.snapshots {
        assert!(s.merges >= merges);
        merges = s.merges;
    }
}

#[test]
fn criteria_run_at_quick_scale() {
    // cheap criteria only; the acceptance target runs all of them
    for id in [2, 4, 5, 6] {
        let rep = CRITERIA[id - 1](1, Scale::Quick).unwrap();
        assert_eq!(rep.id, id);
        assert!(rep.passed, "{}", rep.line());
        assert!(rep.line().starts_with("PASS"));
    }
}
