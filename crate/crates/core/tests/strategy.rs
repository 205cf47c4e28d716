use conehedge::fixtures::{one_period_digital, outperformance};
use conehedge::shp::shp_backward;
use conehedge::strategy::*;
use conehedge::Error;

#[test]
fn frontier_is_a_tradeoff() {
    let (tree, claim) = outperformance().unwrap();
    let shp = shp_backward(&tree, &claim).unwrap();
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let x0 = shp.root(&tree).points()[0].clone();
    let state = StrategyState::new(ctx, &x0).unwrap();
    let y = vec![1.0, 0.0, 0.0];
    let f = bicriteria_frontier(ctx, &state, &y, &default_gamma(&tree, 0)).unwrap();
    assert!(!f.points.is_empty());
    for w in f.points.windows(2) {
        assert!(w[0].alpha > w[1].alpha);
        assert!(w[0].trade_cost >= w[1].trade_cost - 1e-9);
    }
    let cash = max_withdrawal(ctx, &state, &y).unwrap();
    assert!((cash.alpha - f.points[0].alpha).abs() < 1e-7);
}

#[test]
fn every_step_keeps_the_successors_hedged() {
    let (tree, claim) = outperformance().unwrap();
    let shp = shp_backward(&tree, &claim).unwrap();
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let y = vec![1.0, 0.0, 0.0];
    for x0 in shp.root(&tree).points() {
        let mut state = StrategyState::new(ctx, x0).unwrap();
        while !state.finished {
            let node = tree.node(state.node);
            let f = bicriteria_frontier(ctx, &state, &y, &default_gamma(&tree, state.node)).unwrap();
            let k = pick(&f, Choice::MinTrade).unwrap();
            let next = node.succ.first().copied();
            state = advance(ctx, &state, &f, k, &y, next).unwrap();
            if let Some(c) = next {
                for s in &node.succ {
                    assert!(shp.set(*s).contains_tol(&state.v, 1e-7));
                }
                assert_eq!(state.node, c);
            }
        }
        assert!(state.total_alpha() >= -1e-9);
        assert_eq!(state.version as usize, tree.horizon + 1);
    }
}

#[test]
fn stale_and_out_of_range_choices_are_refused() {
    let (tree, claim) = one_period_digital().unwrap();
    let shp = shp_backward(&tree, &claim).unwrap();
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let y = vec![1.0, 0.0];
    let state = StrategyState::new(ctx, &[0.0, 1.0]).unwrap();
    let f = bicriteria_frontier(ctx, &state, &y, &default_gamma(&tree, 0)).unwrap();
    assert!(matches!(advance(ctx, &state, &f, f.points.len(), &y, Some(1)), Err(Error::InvalidInput(_))));
    assert!(matches!(advance(ctx, &state, &f, 0, &y, Some(0)), Err(Error::InvalidInput(_))));
    let moved = advance(ctx, &state, &f, 0, &y, Some(1)).unwrap();
    assert!(matches!(advance(ctx, &moved, &f, 0, &y, None), Err(Error::StaleFrontier(_))));
    assert!(StrategyState::new(ctx, &[10.0, 0.0]).is_err());
}

#[test]
fn custom_points_are_checked() {
    let (tree, claim) = one_period_digital().unwrap();
    let shp = shp_backward(&tree, &claim).unwrap();
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let y = vec![1.0, 0.0];
    let gamma = default_gamma(&tree, 0);
    let state = StrategyState::new(ctx, &[-80.0, 5.0]).unwrap();
    let p = custom_point(ctx, &state, &y, &gamma, 0.0, &vec![0.0; tree.node(0).cone.generators.len()]).unwrap();
    assert_eq!(p.v, vec![-80.0, 5.0]);
    assert!(custom_point(ctx, &state, &y, &gamma, 100.0, &vec![0.0; tree.node(0).cone.generators.len()]).is_err());
}

#[test]
fn replay_matches_manual_steps() {
    let (tree, claim) = one_period_digital().unwrap();
    let shp = shp_backward(&tree, &claim).unwrap();
    let ctx = StepContext { tree: &tree, claim: &claim, shp: &shp };
    let y = vec![1.0, 0.0];
    let x0 = [-80.0, 5.0];
    let a = replay(ctx, &x0, &[0, 2], &y, &[Choice::MaxCash, Choice::MaxCash]).unwrap();
    let mut s = StrategyState::new(ctx, &x0).unwrap();
    for next in [Some(2), None] {
        let f = bicriteria_frontier(ctx, &s, &y, &default_gamma(&tree, s.node)).unwrap();
        s = advance(ctx, &s, &f, 0, &y, next).unwrap();
    }
    assert!((a.total_alpha() - s.total_alpha()).abs() < 1e-12);
    assert!(a.finished && s.finished);
}
