use flowloc_core::fixtures;
use flowloc_core::gnn::{check_gradients, init_model_in, ConvType, SearchSpace};

#[test]
fn finite_differences_match_on_random_small_graphs() {
    let space = SearchSpace::unrestricted();
    let mut seen_gat = false;
    let mut seen_gcn = false;
    for seed in 0..20 {
        let (ig, h, kind) = fixtures::gradient_case(seed);
        seen_gat |= h.conv_type == ConvType::Gat;
        seen_gcn |= h.conv_type == ConvType::Gcn;
        let m = init_model_in(&h, &ig.schema(), seed, &space).unwrap();
        let rep = check_gradients(&m, &ig, h.weight_decay, kind, 1e-5, 1e-6).unwrap();
        assert!(rep.worst_relative_error < 1e-4, "seed {seed}: {rep:?}");
        assert!(rep.skipped * 100 <= rep.checked + rep.skipped, "seed {seed}: {} of {} coordinates straddle a kink", rep.skipped, rep.checked);
    }
    assert!(seen_gat && seen_gcn);
}
