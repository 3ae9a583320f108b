use std::f64::consts::PI;

use proptest::prelude::*;
use qavg_core::circuits::{QpeSettings, Variant};
use qavg_core::fci::{density_matrix, excitation_table, ground_state, natural_orbitals, FciReport};
use qavg_core::fit::{optimize, CostFunction, Discrepancy, OptimizerConfig, TrialParams};
use qavg_core::histogram::Histogram;
use qavg_core::model::{DimerParams, Sector};
use qavg_core::pipeline::{RunConfig, Workflow};
use qavg_core::simulator::{run_shot_observed, shot_rng, Circuit, Gate, NoiseModel};
use qavg_core::spectra::{reconstruct_gf, EnergyGrid};
use qavg_core::steane::{build_encoder, expand_logical, GENERATOR_SUPPORTS};

fn dimer() -> impl Strategy<Value = DimerParams> {
    (-1.0..2.0f64, -1.0..2.0f64, -0.6..0.6f64, 0.5..3.0f64, 0.5..3.0f64, 0.0..3.0f64).prop_map(
        |(eps_p, eps_d, t_pd, u_p, u_d, delta_mu)| DimerParams { eps_p, eps_d, t_pd, u_p, u_d, delta_mu },
    )
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    (0u8..12, 0..n, 1..n, -PI..PI).prop_map(move |(k, a, off, t)| {
        let b = (a + off) % n;
        match k {
            0 => Gate::H(a),
            1 => Gate::S(a),
            2 => Gate::Sdg(a),
            3 => Gate::X(a),
            4 => Gate::Y(a),
            5 => Gate::Z(a),
            6 => Gate::Ry(a, t),
            7 => Gate::Rz(a, t),
            8 => Gate::Phase(a, t),
            9 => Gate::Cnot(a, b),
            10 => Gate::Rzz(a, b, t),
            _ => Gate::CPhase(a, b, t),
        }
    })
}

/// Random circuit with interleaved measurements, resets and feed-forward.
fn circuit() -> impl Strategy<Value = Circuit> {
    let n = 4;
    prop::collection::vec((gate(n), 0u8..6, 0..n), 1..40).prop_map(move |ops| {
        let mut c = Circuit::new(n, ops.len());
        for (i, (g, kind, q)) in ops.into_iter().enumerate() {
            match kind {
                0 => {
                    c.measure(q, i);
                }
                1 => {
                    c.reset(q);
                }
                2 if i > 0 => {
                    c.conditional(qavg_core::simulator::Condition { bit: i - 1, value: true }, g);
                }
                _ => {
                    c.gate(g);
                }
            }
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn excitation_sum_rules(d in dimer()) {
        let gs = ground_state(&d);
        prop_assume!(gs.in_two_electron_sector());
        let g = density_matrix(&gs);
        prop_assert!((g.trace() - 1.0).abs() < 1e-12);
        let no = natural_orbitals(&g);
        prop_assert!(no.occupancies.iter().all(|&n| (-1e-12..=1.0 + 1e-12).contains(&n)));
        for sector in Sector::ALL {
            let t = excitation_table(&gs, &d, sector);
            for k in 0..2 {
                for kp in 0..2 {
                    let bb: f64 = (0..2).map(|l| t.amplitudes[k][l] * t.amplitudes[kp][l]).sum();
                    let want = match sector {
                        Sector::Electron => (k == kp) as u8 as f64 - g.gamma[kp][k],
                        Sector::Hole => g.gamma[k][kp],
                    };
                    prop_assert!((bb - want).abs() < 1e-12, "{sector:?} {k}{kp}: {bb} vs {want}");
                }
            }
        }
    }

    #[test]
    fn noiseless_norm_is_preserved(c in circuit(), seed in 0u64..1000) {
        let mut worst: f64 = 0.0;
        run_shot_observed(&c, &NoiseModel::NOISELESS, &mut shot_rng(seed, 0), |_, s| {
            worst = worst.max((s.norm_sqr() - 1.0).abs());
        }).unwrap();
        prop_assert!(worst < 1e-10, "norm drift {worst}");
    }

    #[test]
    fn logical_gates_preserve_code_space(gates in prop::collection::vec(gate(2), 1..6)) {
        let mut last = None;
        run_shot_observed(&build_encoder(), &NoiseModel::NOISELESS, &mut shot_rng(0, 0), |_, s| last = Some(s.clone())).unwrap();
        let mut st = last.unwrap();
        for g in gates.iter().filter(|g| g.qubits() == [0] && !matches!(g, Gate::Y(_))) {
            for p in expand_logical(g, &[0]).unwrap() {
                st.apply(&p);
            }
        }
        for s in GENERATOR_SUPPORTS {
            prop_assert!((st.expect_z(&s) - 1.0).abs() < 1e-10);
            let mut h = st.clone();
            (0..7).for_each(|q| h.apply(&Gate::H(q)));
            prop_assert!((h.expect_z(&s) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dos_is_non_negative(t in -4.0..4.0f64, a in -2.0..1.0f64, b in -2.0..1.0f64, c in -2.0..1.0f64, d in -2.0..1.0f64) {
        let r = FciReport::new(&DimerParams::reference(1.5));
        let grid = EnergyGrid { start: -3.0, stop: 3.0, step: 0.05 };
        let s = reconstruct_gf(
            &TrialParams::new(t, a, b, Sector::Electron),
            &TrialParams::new(-t, c, d, Sector::Hole),
            &r.natural_orbitals, r.ground_state.energy, &grid, 0.05,
        ).unwrap();
        prop_assert!(s.rho_total.iter().all(|&x| x >= 0.0));
        prop_assert!((s.total_weight() - 4.0).abs() < 1e-10);
    }
}

fn noiseless_histograms() -> (Workflow, Vec<Histogram>) {
    let w = Workflow::new(RunConfig { shots: 200, seed: 11, ..Default::default() }).unwrap();
    let (hs, _) = w.sample_all().unwrap();
    (w, hs)
}

#[test]
fn optimize_is_deterministic() {
    let (w, hs) = noiseless_histograms();
    let cost = CostFunction::new(&hs, w.report.table(Sector::Electron), Discrepancy::L1).unwrap();
    let cfg = OptimizerConfig { restarts: 20, ..Default::default() };
    let a = optimize(&cost, &cfg, 5).unwrap();
    let b = optimize(&cost, &cfg, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let (_, a) = noiseless_histograms();
    let (_, b) = noiseless_histograms();
    assert_eq!(a, b);
    let other = Workflow::new(RunConfig { shots: 200, seed: 12, ..Default::default() }).unwrap().sample_all().unwrap().0;
    assert_ne!(a, other);
}

#[test]
fn histogram_files_round_trip_byte_identically() {
    let (_, hs) = noiseless_histograms();
    let dir = std::env::temp_dir().join(format!("qavg-props-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for h in &hs {
        h.write(dir.join(h.file_name())).unwrap();
    }
    let back = qavg_core::histogram::load_histograms(&dir).unwrap();
    assert_eq!(back.len(), 16);
    for h in &back {
        let path = dir.join(h.file_name());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), h.to_json().unwrap());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn logical_noiseless_run_accepts_every_shot() {
    let w = Workflow::new(RunConfig {
        variant: Variant::Log1a,
        shots: 4,
        shifts: vec![0],
        qpe: QpeSettings::default(),
        ..Default::default()
    })
    .unwrap();
    let (hs, survival) = w.sample_all().unwrap();
    assert!(hs.iter().all(|h| h.accepted == h.shots));
    let record = survival.unwrap();
    assert!(record.rows.iter().all(|r| r.local_discard == 0 && r.corrections == 0));
}
