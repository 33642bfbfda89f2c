//! Acceptance suite. Runs as a plain binary so every criterion prints its own
//! PASS/FAIL line; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use folded_attention::attention::{
    compute_all_sub_affinities, folded_attention, folded_attention_instrumented, oracle_aggregate,
    rank_one_affinity, self_attention, LinearMapParams,
};
use folded_attention::autodiff::{
    finite_diff_check, FoldedAttentionGraph, SumOfSquares, DEFAULT_RTOL, DEFAULT_STEP,
};
use folded_attention::cost::{
    cost, cost_fa, cost_naive_spatial_channel, cost_sa, loglog_slope, reduction_percent,
    CostConfig, ShapeSpec, Variant,
};
use folded_attention::init::{random_instance, random_tensor, trial_rng};
use folded_attention::tensor::{fold, unfold, Permutation};
use rand::seq::SliceRandom;
use rand::Rng;

const EQUIV_ATOL: f64 = 1e-10;
const RANK_ONE_RTOL: f64 = 1e-10;
const MASS_ATOL: f64 = 1e-10;
const SA_ATOL: f64 = 1e-10;
const MEAN_ATOL: f64 = 1e-12;
const GRAD_RTOL: f64 = 1e-4;
const SLOPE_TOL: f64 = 0.1;
const MIN_REDUCTION: f64 = 99.99;
const ORDER_ATOL: f64 = 1e-10;
const HULL_SLACK: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (shape, trials) in [([2, 3, 2, 3], 100), ([3, 4, 2, 5], 20)] {
        for trial in 0..trials {
            let inst = random_instance(&shape, 1, trial).unwrap();
            let fa = folded_attention(&inst.x, &inst.params).unwrap();
            let oracle = oracle_aggregate(&inst.x, &inst.params).unwrap();
            worst = worst.max(fa.max_abs_diff(&oracle).unwrap());
            count += 1;
        }
    }
    outcome(
        worst <= EQUIV_ATOL,
        format!("{count} instances, max abs diff {worst:.3e} (tol {EQUIV_ATOL:e})"),
    )
}

fn rank_one() -> Outcome {
    let mut rng = trial_rng(2, 0);
    let (mut worst_ratio, mut worst_mass) = (0.0f64, 0.0f64);
    for trial in 0..50 {
        let inst = random_instance(&[2, 3, 2, 3], 2, trial + 1).unwrap();
        let subs = compute_all_sub_affinities(&inst.x, &inst.params).unwrap();
        let v: Vec<usize> = inst
            .x
            .shape()
            .iter()
            .map(|&n| rng.random_range(0..n))
            .collect();
        let av = rank_one_affinity(&subs, &v).unwrap();
        for r in av.mode_singular_ratios().unwrap() {
            worst_ratio = worst_ratio.max(r);
        }
        worst_mass = worst_mass.max((av.sum() - 1.0).abs());
    }
    outcome(
        worst_ratio <= RANK_ONE_RTOL && worst_mass <= MASS_ATOL,
        format!(
            "50 pairs, max sigma2/sigma1 {worst_ratio:.3e} (tol {RANK_ONE_RTOL:e}), \
             max |sum - 1| {worst_mass:.3e} (tol {MASS_ATOL:e})"
        ),
    )
}

fn sa_fidelity() -> Outcome {
    let inst = random_instance(&[1, 2, 3, 4], 3, 0).unwrap();
    let z = self_attention(&inst.x, &inst.params).unwrap();
    let loops = common::sa_nested_loops(&inst.x, &inst.params);
    let diff = common::max_abs_diff(z.data(), &loops);

    let mut params = inst.params.clone();
    params.theta = LinearMapParams::zeros(4, 4);
    params.phi = LinearMapParams::zeros(4, 4);
    let z0 = self_attention(&inst.x, &params).unwrap();
    let g = common::channel_map(&inst.x, &params.g.weight);
    let n = 6;
    let mut mean_err = 0.0f64;
    for ch in 0..4 {
        let mean = (0..n).map(|p| g[p * 4 + ch]).sum::<f64>() / n as f64;
        for p in 0..n {
            mean_err = mean_err.max((z0.data()[p * 4 + ch] - mean).abs());
        }
    }
    outcome(
        diff <= SA_ATOL && mean_err <= MEAN_ATOL,
        format!(
            "nested-loop diff {diff:.3e} (tol {SA_ATOL:e}), zero-embedding mean diff \
             {mean_err:.3e} (tol {MEAN_ATOL:e})"
        ),
    )
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    let mut entries = 0;
    for seed in 0..20 {
        let inst = random_instance(&[2, 3, 2, 3], seed, 0).unwrap();
        let graph = SumOfSquares(FoldedAttentionGraph::new(&inst.params, inst.x.shape()).unwrap());
        let inputs = FoldedAttentionGraph::inputs(&inst.x, &inst.params);
        let report = finite_diff_check(&graph, &inputs, DEFAULT_STEP, DEFAULT_RTOL).unwrap();
        entries += report.entries_checked;
        if report.max_rel_err > worst {
            worst = report.max_rel_err;
            if let Some(o) = report.worst {
                where_ = format!("seed {seed} {}{:?}", o.input, o.index);
            }
        }
    }
    outcome(
        worst <= GRAD_RTOL,
        format!(
            "20 seeds, {entries} entries, max rel err {worst:.3e} at {where_} (tol {GRAD_RTOL:e})"
        ),
    )
}

fn complexity() -> Outcome {
    let cfg = CostConfig::default();
    let sizes = [4u64, 8, 16, 32];
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let slope = |v: Variant| {
        let ys: Vec<f64> = sizes
            .iter()
            .map(|&s| cost(v, &ShapeSpec::cube(s).unwrap(), &cfg).unwrap().flops as f64)
            .collect();
        loglog_slope(&xs, &ys)
    };
    let (fa, sa) = (slope(Variant::Fa), slope(Variant::Sa));

    let mut mismatches = 0;
    let shapes: [[usize; 4]; 5] = [
        [2, 3, 2, 3],
        [3, 4, 2, 5],
        [4, 4, 4, 4],
        [1, 6, 2, 7],
        [8, 8, 8, 16],
    ];
    for shape in shapes {
        let inst = random_instance(&shape, 5, 0).unwrap();
        let (_, counts) = folded_attention_instrumented(&inst.x, &inst.params).unwrap();
        let [h, w, d, c] = shape.map(|v| v as u64);
        let model = cost_fa(&ShapeSpec::new(h, w, d, c).unwrap(), &cfg).unwrap();
        if 2 * counts.aggregate_macs as u128 != model.aggregation_flops()
            || 2 * counts.affinity_macs as u128 != model.affinity_build_flops()
            || 2 * counts.embed_macs as u128 != model.embed_flops
        {
            mismatches += 1;
        }
    }
    outcome(
        (fa - 5.0).abs() <= SLOPE_TOL && (sa - 7.0).abs() <= SLOPE_TOL && mismatches == 0,
        format!(
            "slopes fa {fa:.4} sa {sa:.4} (targets 5, 7 +/- {SLOPE_TOL}), counter mismatches \
             {mismatches}/{}",
            shapes.len()
        ),
    )
}

fn storage_reduction() -> Outcome {
    let s = ShapeSpec::reference();
    let cfg = CostConfig::default();
    let fa = cost_fa(&s, &cfg).unwrap().affinity_elements;
    let sa = cost_sa(&s, &cfg).unwrap().affinity_elements;
    let reduction = reduction_percent(fa, sa);
    let naive = cost_naive_spatial_channel(&s, &cfg).unwrap();
    // feasibility is monotone in the budget, so checking the largest covers the rest
    let at_64gb = cost_naive_spatial_channel(
        &s,
        &CostConfig {
            byte_budget: 64 << 30,
            ..cfg
        },
    )
    .unwrap();
    let passed = fa == 7168
        && sa == 1_073_741_824
        && reduction >= MIN_REDUCTION
        && naive.affinity_elements == 4_398_046_511_104
        && !at_64gb.feasible;
    outcome(
        passed,
        format!(
            "fa {fa} vs sa {sa} entries, reduction {reduction:.4}% (min {MIN_REDUCTION}%), naive \
             {:.3e} entries infeasible at 64 GiB: {}",
            naive.affinity_elements as f64, !at_64gb.feasible
        ),
    )
}

fn structural() -> Outcome {
    let mut failures = vec![];

    // fold/unfold round trip, ranks 2 to 5
    let mut rng = trial_rng(7, 0);
    let mut trips = 0;
    for rank in 2..=5 {
        for _ in 0..50 {
            let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=4)).collect();
            let mut order: Vec<usize> = (0..rank).collect();
            order.shuffle(&mut rng);
            let p = Permutation::new(order).unwrap();
            let x = random_tensor(shape, &mut rng).unwrap();
            let back = fold(&unfold(&x, &p).unwrap(), &p, x.shape()).unwrap();
            if back.data() != x.data() {
                failures.push("round trip");
            }
            trips += 1;
        }
    }

    // row-stochastic sub-affinities and convex hull with identity g
    let mut hull_worst = 0.0f64;
    for trial in 0..30 {
        let inst = random_instance(&[2, 3, 2, 3], 8, trial).unwrap();
        for a in compute_all_sub_affinities(&inst.x, &inst.params).unwrap() {
            for i in 0..a.side() {
                let row = a.row(i);
                if row.iter().any(|&v| v < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    failures.push("row stochastic");
                }
            }
        }
        let mut params = inst.params.clone();
        params.g = LinearMapParams::identity(3);
        let z = folded_attention(&inst.x, &params).unwrap();
        let (lo, hi) = (inst.x.min(), inst.x.max());
        for &v in z.data() {
            hull_worst = hull_worst.max(lo - v).max(v - hi);
        }
    }
    if hull_worst > HULL_SLACK {
        failures.push("convex hull");
    }

    // a length-1 axis is an identity stage
    let inst = random_instance(&[2, 1, 3, 2], 9, 0).unwrap();
    let full = folded_attention(&inst.x, &inst.params).unwrap();
    let squeezed = folded_attention(
        &inst.x.clone().reshape(vec![2, 3, 2]).unwrap(),
        &inst.params,
    )
    .unwrap();
    let degenerate = common::max_abs_diff(full.data(), squeezed.data());
    if degenerate > ORDER_ATOL {
        failures.push("length-1 axis");
    }

    // every order of the four modes agrees
    let inst = random_instance(&[2, 3, 2, 3], 10, 0).unwrap();
    let base = folded_attention(&inst.x, &inst.params).unwrap();
    let mut order_worst = 0.0f64;
    let mut modes = vec![0usize, 1, 2, 3];
    for _ in 0..24 {
        let perms = modes
            .iter()
            .map(|&m| Permutation::mode_first(4, m).unwrap())
            .collect();
        let z = folded_attention(&inst.x, &inst.params.clone().with_mode_order(perms)).unwrap();
        order_worst = order_worst.max(base.max_abs_diff(&z).unwrap());
        next_permutation(&mut modes);
    }
    if order_worst > ORDER_ATOL {
        failures.push("mode order");
    }

    failures.dedup();
    outcome(
        failures.is_empty(),
        format!(
            "{trips} round trips, hull excess {hull_worst:.1e}, length-1 diff {degenerate:.1e}, \
             24 mode orders max diff {order_worst:.1e}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failed: {}", failures.join(", "))
            }
        ),
    )
}

/// Lexicographic successor; wraps round to the first permutation.
fn next_permutation(v: &mut [usize]) {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        v.reverse();
        return;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("rank-one affinity", rank_one),
        ("self-attention baseline", sa_fidelity),
        ("gradient check", gradients),
        ("complexity slopes", complexity),
        ("affinity storage", storage_reduction),
        ("structural invariants", structural),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        all &= out.passed;
        println!(
            "{} criterion {}: {name}: {} [{:.2}s]",
            if out.passed { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
