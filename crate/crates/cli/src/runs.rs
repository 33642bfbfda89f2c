use std::time::Instant;

use folded_attention::attention::{
    compute_all_sub_affinities, folded_attention, folded_attention_instrumented, oracle_aggregate,
    rank_one_affinity, reference, sa_affinity_bytes, self_attention_with_budget, FAOptions,
    FAParams, ORACLE_MAX_ELEMENTS,
};
use folded_attention::autodiff::{
    finite_diff_check, FoldedAttentionGraph, SumOfSquares, DEFAULT_STEP,
};
use folded_attention::cost::{
    cost, cost_fa, cost_naive_spatial_channel, cost_sa, loglog_slope, reduction_percent,
    scaling_table, CostConfig, ShapeSpec, TableRecord, Variant,
};
use folded_attention::init::{random_instance, trial_rng, Instance};
use folded_attention::tensor::Permutation;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, Shape4};
use crate::report::{median, CheckResult, SuiteReport, TimingEntry};
use crate::HarnessError;

/// Largest input the gradient check accepts; every entry costs two forwards.
pub const GRADCHECK_MAX_ELEMENTS: u128 = 1_000;
/// Row sums of a sub-affinity may drift this far from one.
pub const STOCHASTIC_ATOL: f64 = 1e-12;
/// Positions per trial for the rank-one check.
const RANK_ONE_POSITIONS: usize = 4;
/// Equal-dims sizes swept by the cost table.
pub const SWEEP_SIDES: [u64; 4] = [4, 8, 16, 32];

fn instance(cfg: &RunConfig, trial: u64) -> Result<Instance, HarnessError> {
    let mut inst =
        random_instance(cfg.shape.dims(), cfg.seed, trial).map_err(HarnessError::compute)?;
    inst.params = inst.params.with_options(FAOptions {
        reapply_g: cfg.reapply_g,
        residual: false,
    });
    Ok(inst)
}

/// Runs `f` once per trial in parallel and times the whole pass. Results
/// come back in trial order, so any later reduction is order-independent.
fn per_trial<F>(cfg: &RunConfig, f: F) -> Result<(Vec<f64>, f64), HarnessError>
where
    F: Fn(u64) -> Result<f64, HarnessError> + Sync + Send,
{
    let start = Instant::now();
    let samples = (0..cfg.trials)
        .into_par_iter()
        .map(f)
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, start.elapsed().as_secs_f64()))
}

pub fn run_equivalence(cfg: &RunConfig) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    let n = cfg.shape.elements();
    if n > ORACLE_MAX_ELEMENTS as u128 {
        return Err(HarnessError::Guard(format!(
            "shape {} has {n} elements; the enumeration oracle is limited to {ORACLE_MAX_ELEMENTS}",
            cfg.shape
        )));
    }
    if cfg.reapply_g {
        return Err(HarnessError::Config(
            "the enumeration oracle covers the apply-g-once cascade only; drop --reapply-g".into(),
        ));
    }
    let sa_bytes = sa_affinity_bytes(cfg.shape.dims());
    if sa_bytes > cfg.mem_budget_bytes as u128 {
        return Err(HarnessError::Guard(format!(
            "self-attention affinity needs {sa_bytes} bytes, budget is {}",
            cfg.mem_budget_bytes
        )));
    }

    let mut checks = vec![];

    let (s, t) = per_trial(cfg, |trial| {
        let inst = instance(cfg, trial)?;
        let fa = folded_attention(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        let oracle = oracle_aggregate(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        fa.max_abs_diff(&oracle).map_err(HarnessError::compute)
    })?;
    checks.push(CheckResult::from_samples(
        "fa_vs_oracle",
        "max_abs_diff",
        s,
        cfg.atol,
        t,
    ));

    let (s, t) = per_trial(cfg, |trial| {
        let inst = instance(cfg, trial)?;
        let sa = self_attention_with_budget(&inst.x, &inst.params, cfg.mem_budget_bytes)
            .map_err(HarnessError::compute)?;
        let explicit = reference::explicit_self_attention(&inst.x, &inst.params)
            .map_err(HarnessError::compute)?;
        sa.max_abs_diff(&explicit).map_err(HarnessError::compute)
    })?;
    checks.push(CheckResult::from_samples(
        "sa_vs_explicit",
        "max_abs_diff",
        s,
        cfg.atol,
        t,
    ));

    let rank_one = |trial: u64| -> Result<(f64, f64), HarnessError> {
        let inst = instance(cfg, trial)?;
        let subs =
            compute_all_sub_affinities(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        // separate stream from the one that drew the instance
        let mut rng = trial_rng(cfg.seed, u64::MAX - trial);
        let (mut ratio, mut mass) = (0.0f64, 0.0f64);
        for _ in 0..RANK_ONE_POSITIONS {
            let v: Vec<usize> = cfg
                .shape
                .0
                .iter()
                .map(|&d| rng.random_range(0..d))
                .collect();
            let av = rank_one_affinity(&subs, &v).map_err(HarnessError::compute)?;
            for r in av.mode_singular_ratios().map_err(HarnessError::compute)? {
                ratio = ratio.max(r);
            }
            mass = mass.max((av.sum() - 1.0).abs());
        }
        Ok((ratio, mass))
    };
    let start = Instant::now();
    let pairs = (0..cfg.trials)
        .into_par_iter()
        .map(rank_one)
        .collect::<Result<Vec<_>, _>>()?;
    let t = start.elapsed().as_secs_f64();
    let (ratios, masses): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    checks.push(CheckResult::from_samples(
        "rank_one",
        "max_sigma2_over_sigma1",
        ratios,
        cfg.atol,
        t,
    ));
    checks.push(CheckResult::from_samples(
        "affinity_mass",
        "max_abs_sum_minus_one",
        masses,
        cfg.atol,
        t,
    ));

    let (s, t) = per_trial(cfg, |trial| {
        let inst = instance(cfg, trial)?;
        let subs =
            compute_all_sub_affinities(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        let mut worst = 0.0f64;
        for a in &subs {
            for i in 0..a.side() {
                let row = a.row(i);
                let negative = row.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
                worst = worst
                    .max((row.iter().sum::<f64>() - 1.0).abs())
                    .max(negative);
            }
        }
        Ok(worst)
    })?;
    checks.push(CheckResult::from_samples(
        "row_stochastic",
        "max_row_error",
        s,
        STOCHASTIC_ATOL,
        t,
    ));

    let (s, t) = per_trial(cfg, |trial| {
        let inst = instance(cfg, trial)?;
        let base = folded_attention(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        let mut worst = 0.0f64;
        for modes in [[3, 2, 1, 0], [2, 0, 3, 1]] {
            let z = folded_attention(&inst.x, &reordered(&inst.params, &modes)?)
                .map_err(HarnessError::compute)?;
            worst = worst.max(base.max_abs_diff(&z).map_err(HarnessError::compute)?);
        }
        Ok(worst)
    })?;
    checks.push(CheckResult::from_samples(
        "mode_order",
        "max_abs_diff",
        s,
        cfg.atol,
        t,
    ));

    Ok(SuiteReport::new(cfg, checks, vec![]))
}

fn reordered(params: &FAParams, modes: &[usize]) -> Result<FAParams, HarnessError> {
    let perms = modes
        .iter()
        .map(|&m| Permutation::mode_first(4, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::compute)?;
    Ok(params.clone().with_mode_order(perms))
}

pub fn run_gradcheck(cfg: &RunConfig) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    let n = cfg.shape.elements();
    if n > GRADCHECK_MAX_ELEMENTS {
        return Err(HarnessError::Guard(format!(
            "shape {} has {n} elements; the gradient check is limited to {GRADCHECK_MAX_ELEMENTS}",
            cfg.shape
        )));
    }
    let start = Instant::now();
    let reports = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let inst = instance(cfg, trial)?;
            let graph = FoldedAttentionGraph::new(&inst.params, inst.x.shape())
                .map_err(HarnessError::compute)?;
            let inputs = FoldedAttentionGraph::inputs(&inst.x, &inst.params);
            finite_diff_check(&SumOfSquares(graph), &inputs, DEFAULT_STEP, cfg.rtol)
                .map_err(HarnessError::compute)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let t = start.elapsed().as_secs_f64();

    let samples: Vec<f64> = reports.iter().map(|r| r.max_rel_err).collect();
    let mut check = CheckResult::from_samples("fa_gradients", "max_rel_err", samples, cfg.rtol, t);
    let worst = reports
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.max_rel_err.total_cmp(&b.1.max_rel_err));
    if let Some((trial, r)) = worst {
        if let Some(o) = &r.worst {
            check = check.with_detail(format!(
                "trial {trial} {}{:?} analytic {:e} numeric {:e}",
                o.input, o.index, o.analytic, o.numeric
            ));
        }
    }
    Ok(SuiteReport::new(cfg, vec![check], vec![]))
}

/// Scaling table plus the storage comparison at the reference shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    pub records: Vec<TableRecord>,
    pub reference_fa_elements: u128,
    pub reference_sa_elements: u128,
    pub fa_vs_sa_percent: f64,
    pub fa_vs_naive_percent: f64,
    pub naive_feasible: bool,
    pub fa_slope: f64,
    pub sa_slope: f64,
}

impl CostSummary {
    pub fn describe(&self) -> String {
        format!(
            "reference h=w=d=32, c=64: fa {} vs sa {} affinity entries, {:.4}% less than sa, \
             {:.6}% less than naive (naive feasible: {})\nflops slopes over sides {:?}: fa {:.4}, sa {:.4}\n",
            self.reference_fa_elements,
            self.reference_sa_elements,
            self.fa_vs_sa_percent,
            self.fa_vs_naive_percent,
            self.naive_feasible,
            SWEEP_SIDES,
            self.fa_slope,
            self.sa_slope
        )
    }

    /// The storage and scaling claims as pass/fail checks.
    pub fn checks(&self) -> Vec<CheckResult> {
        let one = |name: &str, metric: &str, v: f64, tol: f64| {
            CheckResult::from_samples(name, metric, vec![v], tol, 0.0)
        };
        vec![
            one(
                "reference_fa_entries",
                "abs_diff_from_7168",
                (self.reference_fa_elements as f64 - 7168.0).abs(),
                0.0,
            ),
            one(
                "storage_reduction",
                "percent_short_of_99.99",
                (99.99 - self.fa_vs_sa_percent).max(0.0),
                0.0,
            ),
            one(
                "naive_infeasible",
                "feasible_flag",
                if self.naive_feasible { 1.0 } else { 0.0 },
                0.0,
            ),
            one(
                "fa_flops_slope",
                "abs_diff_from_5",
                (self.fa_slope - 5.0).abs(),
                0.1,
            ),
            one(
                "sa_flops_slope",
                "abs_diff_from_7",
                (self.sa_slope - 7.0).abs(),
                0.1,
            ),
        ]
    }
}

pub fn run_cost(cfg: &RunConfig) -> Result<CostSummary, HarnessError> {
    cfg.validate()?;
    let cc = CostConfig::default();
    let spec = |s: &Shape4| {
        let [h, w, d, c] = s.0.map(|v| v as u64);
        ShapeSpec::new(h, w, d, c).map_err(|e| HarnessError::Config(e.to_string()))
    };
    let mut sizes = SWEEP_SIDES
        .iter()
        .map(|&s| ShapeSpec::cube(s).map_err(HarnessError::compute))
        .collect::<Result<Vec<_>, _>>()?;
    let own = spec(&cfg.shape)?;
    if !sizes.contains(&own) {
        sizes.push(own);
    }
    let records = scaling_table(&sizes, &cc)
        .map_err(HarnessError::compute)?
        .iter()
        .map(TableRecord::from)
        .collect();

    let r = ShapeSpec::reference();
    let fa = cost_fa(&r, &cc).map_err(HarnessError::compute)?;
    let sa = cost_sa(&r, &cc).map_err(HarnessError::compute)?;
    let naive = cost_naive_spatial_channel(&r, &cc).map_err(HarnessError::compute)?;

    let xs: Vec<f64> = SWEEP_SIDES.iter().map(|&s| s as f64).collect();
    let slope = |v: Variant| -> Result<f64, HarnessError> {
        let ys = SWEEP_SIDES
            .iter()
            .map(|&s| {
                let shape = ShapeSpec::cube(s).map_err(HarnessError::compute)?;
                Ok(cost(v, &shape, &cc).map_err(HarnessError::compute)?.flops as f64)
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(loglog_slope(&xs, &ys))
    };

    Ok(CostSummary {
        records,
        reference_fa_elements: fa.affinity_elements,
        reference_sa_elements: sa.affinity_elements,
        fa_vs_sa_percent: reduction_percent(fa.affinity_elements, sa.affinity_elements),
        fa_vs_naive_percent: reduction_percent(fa.affinity_elements, naive.affinity_elements),
        naive_feasible: naive.feasible,
        fa_slope: slope(Variant::Fa)?,
        sa_slope: slope(Variant::Sa)?,
    })
}

/// Forward timings. Trials run one after another so they do not compete
/// for cores.
pub fn run_bench(cfg: &RunConfig) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    let inst = instance(cfg, 0)?;
    let (_, counts) =
        folded_attention_instrumented(&inst.x, &inst.params).map_err(HarnessError::compute)?;
    let fa_macs = counts.embed_macs + counts.affinity_macs + counts.aggregate_macs;

    let mut fa_samples = vec![];
    for _ in 0..cfg.trials {
        let start = Instant::now();
        folded_attention(&inst.x, &inst.params).map_err(HarnessError::compute)?;
        fa_samples.push(start.elapsed().as_secs_f64());
    }
    let mut timings = vec![TimingEntry {
        variant: "fa".into(),
        shape: cfg.shape,
        median_seconds: median(&fa_samples),
        samples_seconds: fa_samples,
        macs: Some(fa_macs),
        skipped: None,
    }];

    let required = sa_affinity_bytes(cfg.shape.dims());
    if cfg.reapply_g {
        // the baseline has no reapplied-g form
    } else if required > cfg.mem_budget_bytes as u128 {
        timings.push(TimingEntry {
            variant: "sa".into(),
            shape: cfg.shape,
            samples_seconds: vec![],
            median_seconds: None,
            macs: None,
            skipped: Some(format!(
                "affinity needs {required} bytes, budget {}",
                cfg.mem_budget_bytes
            )),
        });
    } else {
        let mut sa_samples = vec![];
        for _ in 0..cfg.trials {
            let start = Instant::now();
            self_attention_with_budget(&inst.x, &inst.params, cfg.mem_budget_bytes)
                .map_err(HarnessError::compute)?;
            sa_samples.push(start.elapsed().as_secs_f64());
        }
        timings.push(TimingEntry {
            variant: "sa".into(),
            shape: cfg.shape,
            median_seconds: median(&sa_samples),
            samples_seconds: sa_samples,
            macs: None,
            skipped: None,
        });
    }
    Ok(SuiteReport::new(cfg, vec![], timings))
}

/// Equivalence, gradients, cost claims and timings in one report.
pub fn run_all(cfg: &RunConfig) -> Result<SuiteReport, HarnessError> {
    let equivalence = run_equivalence(cfg)?;
    let gradients = run_gradcheck(cfg)?;
    let cost = SuiteReport::new(cfg, run_cost(cfg)?.checks(), vec![]);
    let bench = run_bench(cfg)?;
    Ok(SuiteReport::merge(
        cfg,
        vec![equivalence, gradients, cost, bench],
    ))
}
