use tsselect::criteria::Classification;
use tsselect::io::{from_json, to_json};
use tsselect::model::ModelSpec;
use tsselect::montecarlo::{run_experiment, Candidates, ExperimentConfig, ExperimentReport, Mu4Rule, PenaltyRule};
use tsselect::simulate::NoiseKind;

fn dgp1(n: Vec<usize>, reps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("I", NoiseKind::Gaussian, n, reps, 500).unwrap();
    cfg.candidates = Candidates::Bounds { max_p: 3, max_q: 2, max_p_garch: 1, max_q_garch: 1 };
    cfg
}

#[test]
fn report_is_identical_across_worker_counts() {
    let mut cfg = dgp1(vec![150], 8);
    cfg.keep_log = true;
    cfg.penalties.push(PenaltyRule::Jump { multiplier: 2.0 });
    let one = run_experiment(&ExperimentConfig { workers: 1, ..cfg.clone() }).unwrap();
    let three = run_experiment(&ExperimentConfig { workers: 3, ..cfg }).unwrap();
    assert_eq!(one.cells, three.cells);
    assert_eq!(one.log, three.log);
    let back: ExperimentReport = from_json(&to_json("experiment", &one).unwrap()).unwrap().result;
    assert_eq!(back, one);
}

#[test]
fn dgp1_consistency_trend_and_jump_tabulation() {
    let mut cfg = dgp1(vec![100, 2000], 16);
    cfg.penalties = vec![PenaltyRule::CMin { multiplier: 1.0 }, PenaltyRule::Jump { multiplier: 2.0 }];
    let rep = run_experiment(&cfg).unwrap();
    let c_min = PenaltyRule::CMin { multiplier: 1.0 };
    let small = rep.cell(100, &c_min).unwrap().true_;
    let large = rep.cell(2000, &c_min).unwrap().true_;
    assert!(large >= small, "{small} at n=100, {large} at n=2000");
    let jump = rep.cell(2000, &PenaltyRule::Jump { multiplier: 2.0 }).unwrap();
    assert_eq!(jump.replications, 16);
    for c in &rep.cells {
        assert_eq!(c.wrong + c.true_ + c.overfitted, c.replications);
        assert_eq!(c.failures, 0);
    }
}

#[test]
fn student_noise_estimates_c_min_from_the_largest_garch() {
    let mut cfg = ExperimentConfig::preset("II", NoiseKind::Student { dof: 7 }, vec![1500], 3, 77).unwrap();
    cfg.candidates = Candidates::Bounds { max_p: 1, max_q: 0, max_p_garch: 1, max_q_garch: 2 };
    cfg.keep_log = true;
    assert_eq!(cfg.mu4, Mu4Rule::Estimated);
    let rep = run_experiment(&cfg).unwrap();
    for rec in rep.log.unwrap() {
        let mu4 = rec.mu4_hat.unwrap();
        // standardized t7 has fourth moment 5
        assert!(mu4 > 3.0 && mu4 < 9.0, "{mu4}");
        assert_eq!(rec.c_min.unwrap(), (mu4 - 1.0) / 4.0);
        assert_eq!(rec.classes.len(), 3);
    }
}

#[test]
fn dgp3_orders_classify_in_bands() {
    let mut cfg = ExperimentConfig::preset("III", NoiseKind::Gaussian, vec![400], 4, 5).unwrap();
    cfg.keep_log = true;
    let rep = run_experiment(&cfg).unwrap();
    for rec in rep.log.unwrap() {
        for (m, class) in rec.selected.iter().zip(&rec.classes) {
            let ModelSpec::Arma { ar, ma: 0 } = m.unwrap() else { panic!("unexpected {m:?}") };
            let expected = match ar {
                p if p < 6 => Classification::Wrong,
                6 => Classification::True,
                _ => Classification::Overfitted,
            };
            assert_eq!(*class, expected);
        }
    }
}
