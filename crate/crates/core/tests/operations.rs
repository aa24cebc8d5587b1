use proptest::prelude::*;

use refsim::config::SimConfig;
use refsim::cpu::INTENSIVE_MPKI;
use refsim::experiment::{gen_workload_mixes, mixes_of_category, Experiment, Scheme};
use refsim::refresh::PolicyKind;
use refsim::sim::{check_run, run_single};

fn short(density: u32, cycles: u64) -> SimConfig {
    let mut c = SimConfig::default();
    c.org.density_gbit = density;
    c.sim_cycles = cycles;
    c
}

#[test]
fn empty_config_is_the_default_system() {
    let c = SimConfig::parse("", "empty", None).unwrap();
    assert_eq!(c.cores, 8);
    assert_eq!(c.org.channels, 2);
    assert_eq!(c.org.ranks_per_channel, 2);
    assert_eq!(c.org.banks_per_rank, 8);
    assert_eq!(c.org.subarrays_per_bank, 8);
    assert_eq!(c.retention_ms, 32);
    let d = SimConfig::parse("[controller]\npolicy = dsarp\n", "p", None).unwrap();
    assert_eq!(d.policy, PolicyKind::Dsarp);
    let e = SimConfig::parse("[dram]\ndensity_gbit = 12\n", "d", None).unwrap_err();
    assert!(e.to_string().contains("12"), "{e}");
}

#[test]
fn config_text_round_trips() {
    let mut c = short(16, 12345);
    c.policy = PolicyKind::SarpAb;
    c.t_faw = Some(25);
    c.t_rrd = Some(5);
    let back = SimConfig::parse(&c.to_text(), "rt", None).unwrap();
    assert_eq!(back, c);
}

#[test]
fn no_refresh_beats_refab_on_intensive_mix() {
    let mixes = mixes_of_category(11, 1, 4, 100).unwrap();
    let exp = Experiment::new(true);
    let m = exp
        .run_matrix(&short(32, 300_000), &mixes, &[Scheme::NoRefresh, Scheme::Policy(PolicyKind::RefAb)])
        .unwrap();
    assert!(m.rows[0].ws > m.rows[1].ws, "{:?}", m.rows);
}

#[test]
fn higher_density_refab_is_slower() {
    let mixes = mixes_of_category(11, 1, 4, 100).unwrap();
    let exp = Experiment::new(true);
    let ws = |d| {
        let m = exp.run_matrix(&short(d, 300_000), &mixes, &[Scheme::Policy(PolicyKind::RefAb)]).unwrap();
        m.rows[0].ws
    };
    assert!(ws(32) < ws(8));
}

#[test]
fn refab_against_itself_is_zero() {
    let mixes = mixes_of_category(2, 1, 2, 50).unwrap();
    let refab = Scheme::Policy(PolicyKind::RefAb);
    let m = Experiment::new(false).run_matrix(&short(8, 50_000), &mixes, &[refab]).unwrap();
    assert_eq!(m.improvement(refab, refab), Some(0.0));
    assert_eq!(m.gmean_ratio(refab, refab), Some(1.0));
}

#[test]
fn mix_categories_follow_intensity() {
    let mixes = gen_workload_mixes(9, 3, 8).unwrap();
    for m in mixes.iter().filter(|m| m.intensive_pct == 100) {
        assert!(m.members.iter().all(|e| e.spec.mpki >= INTENSIVE_MPKI));
    }
    for m in mixes.iter().filter(|m| m.intensive_pct == 0) {
        assert!(m.members.iter().all(|e| e.spec.mpki < INTENSIVE_MPKI));
    }
    assert_eq!(mixes, gen_workload_mixes(9, 3, 8).unwrap());
}

#[test]
fn single_subarray_sarp_matches_refpb_exactly() {
    let mut c = short(32, 150_000);
    c.org.subarrays_per_bank = 1;
    c.cores = 4;
    c.workload.truncate(4);
    c.policy = PolicyKind::RefPb;
    let a = run_single(&c).unwrap();
    c.policy = PolicyKind::SarpPb;
    let b = run_single(&c).unwrap();
    assert_eq!(a.commands, b.commands);
    assert_eq!(a.stats.ipcs(), b.stats.ipcs());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn any_policy_density_seed_is_legal(
        p in 0usize..9,
        d in prop::sample::select(vec![8u32, 16, 32]),
        seed in 0u64..1000,
        cat in 0usize..5,
    ) {
        let mut c = short(d, 60_000);
        c.policy = PolicyKind::ALL[p];
        c.seed = seed;
        let mix = &gen_workload_mixes(seed, 1, 4).unwrap()[cat];
        mix.apply(&mut c);
        let out = run_single(&c).unwrap();
        prop_assert!(check_run(&c, &out).is_ok());
        prop_assert!(out.stats.debt_range.0 >= -8 && out.stats.debt_range.1 <= 8);
    }
}
