//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if
//! any criterion fails. Runs without any browser client.

#[path = "../../core/tests/support/mod.rs"]
mod support;

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use castcost::report::breakdown_report;
use castcost::{
    amortize_series, apply_scrap_chain, benchmark_compare, budget_overrun_indicator,
    compute_part_cost, format_expr, parse_expr, parse_model, print_model, target_indicator,
    CostBreakdown, RateTable, Scenario, SeriesSpec,
};
use rand::Rng;
use support::{check_conservation, check_serialized_conservation, rel_close, RandomModel};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const RANDOM_MODELS: usize = 1000;
const SCRAP_LEVERS: [&str; 5] = [
    "core_scrap_rate",
    "mold_scrap_rate",
    "remoulage_scrap_rate",
    "casting_scrap_rate",
    "finishing_scrap_rate",
];

fn oracle_reference() -> Outcome {
    let bundle = castcost::build_reference_model();
    let total = compute_part_cost(&bundle.model, &bundle.part, None)
        .map_err(|e| e.to_string())?
        .total();
    ensure(rel_close(total, bundle.oracle_total, 1e-9), || {
        format!("engine {total:.12} vs oracle {:.12}", bundle.oracle_total)
    })?;
    let mut times: Vec<Duration> = (0..51)
        .map(|_| {
            let t = Instant::now();
            let b = compute_part_cost(&bundle.model, &bundle.part, None);
            let elapsed = t.elapsed();
            std::hint::black_box(b).ok();
            elapsed
        })
        .collect();
    times.sort();
    let median = times[times.len() / 2];
    ensure(median < Duration::from_millis(10), || {
        format!("median runtime {median:?} >= 10 ms")
    })?;
    Ok(format!("total {total:.9}, median {median:?}"))
}

fn oracle_random() -> Outcome {
    let start = Instant::now();
    let mut rng = support::rng(1001);
    let mut worst: f64 = 0.0;
    for i in 0..RANDOM_MODELS {
        let rm = RandomModel::generate(&mut rng);
        let b = compute_part_cost(&rm.model(), &rm.part(), None)
            .map_err(|e| format!("model {i}: {e}"))?;
        let expected = rm.oracle_total();
        let rel = if b.total() == expected {
            0.0
        } else {
            ((b.total() - expected) / expected).abs()
        };
        worst = worst.max(rel);
        ensure(rel_close(b.total(), expected, 1e-12), || {
            format!("model {i}: engine {} vs oracle {expected}", b.total())
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{RANDOM_MODELS} models, worst relative error {worst:.1e}, {elapsed:?}"
    ))
}

fn conserved(b: &CostBreakdown, what: &str) -> Result<(), String> {
    check_conservation(b).map_err(|e| format!("{what}: {e}"))?;
    let json = serde_json::to_value(breakdown_report(b)).map_err(|e| e.to_string())?;
    check_serialized_conservation(&json).map_err(|e| format!("{what} serialized: {e}"))?;
    Ok(())
}

fn conservation() -> Outcome {
    let mut count = 0;
    let bundle = castcost::build_reference_model();
    let mut scenarios = vec![None];
    for ppm in 1..=8 {
        scenarios.push(Some(
            Scenario::new("ppm").with_override("parts_per_mold", f64::from(ppm)),
        ));
    }
    scenarios.push(Some(Scenario {
        material: Some("stainless_cf8m".into()),
        ..Scenario::new("inox")
    }));
    for s in &scenarios {
        let b = compute_part_cost(&bundle.model, &bundle.part, s.as_ref())
            .map_err(|e| e.to_string())?;
        conserved(&b, "reference")?;
        count += 1;
    }
    let mut rng = support::rng(1001);
    for i in 0..RANDOM_MODELS {
        let rm = RandomModel::generate(&mut rng);
        for lambda in [1.0, 0.5, 3.0, 10.0] {
            let m = rm.scaled(lambda);
            let b = compute_part_cost(&m.model(), &m.part(), None).map_err(|e| e.to_string())?;
            conserved(&b, &format!("model {i} scaled {lambda}"))?;
            count += 1;
        }
    }
    Ok(format!("{count} breakdowns, raw and serialized"))
}

fn homogeneity() -> Outcome {
    let mut rng = support::rng(2002);
    let mut checks = 0;
    for i in 0..RANDOM_MODELS {
        let rm = RandomModel::generate(&mut rng);
        let base = compute_part_cost(&rm.model(), &rm.part(), None).map_err(|e| e.to_string())?;
        for lambda in [0.5, 3.0, 10.0] {
            let m = rm.scaled(lambda);
            let b = compute_part_cost(&m.model(), &m.part(), None).map_err(|e| e.to_string())?;
            ensure(rel_close(b.total(), lambda * base.total(), 1e-12), || {
                format!(
                    "model {i}, lambda {lambda}: {} vs {}",
                    b.total(),
                    lambda * base.total()
                )
            })?;
            checks += 1;
        }
    }
    Ok(format!("{checks} scaled totals"))
}

fn scrap_chain() -> Outcome {
    let chain = apply_scrap_chain(&[(10.0, 0.0), (5.0, 0.5)], 0.0).map_err(|e| e.to_string())?;
    ensure(chain == (30.0, 2.0), || {
        format!("[(10,0),(5,0.5)] gave {chain:?}")
    })?;

    let bundle = castcost::build_reference_model();
    let mut zero = Scenario::new("no scrap");
    for lever in SCRAP_LEVERS {
        zero.overrides.insert(lever.into(), 0.0);
    }
    let b =
        compute_part_cost(&bundle.model, &bundle.part, Some(&zero)).map_err(|e| e.to_string())?;
    let plain: f64 = b
        .leaves()
        .iter()
        .filter(|(_, i)| i.kind != castcost::LineKind::Scrap)
        .map(|(_, i)| i.amount)
        .sum();
    ensure(rel_close(b.total(), plain, 1e-12), || {
        format!("zero scrap {} vs plain {plain}", b.total())
    })?;
    let mut rng = support::rng(3003);
    for _ in 0..1000 {
        let stages: Vec<(f64, f64)> = (0..rng.gen_range(0..6))
            .map(|_| (rng.gen_range(0.0..100.0), 0.0))
            .collect();
        let upstream = rng.gen_range(0.0..100.0);
        let sum = stages.iter().fold(upstream, |acc, (c, _)| acc + c);
        let got = apply_scrap_chain(&stages, upstream).map_err(|e| e.to_string())?;
        ensure(got == (sum, 1.0), || {
            format!("{stages:?}: {got:?} vs {sum}")
        })?;
    }

    let grid: Vec<f64> = (0..100).map(|k| f64::from(k) * 0.009).collect();
    for lever in SCRAP_LEVERS {
        let rows = castcost::sweep(&bundle.model, &bundle.part, lever, &grid, None)
            .map_err(|e| e.to_string())?;
        for w in rows.windows(2) {
            ensure(w[1].total >= w[0].total, || {
                format!(
                    "{lever}: {} at {} after {} at {}",
                    w[1].total, w[1].value, w[0].total, w[0].value
                )
            })?;
        }
    }
    Ok("exact chain, zero-scrap sums, 5 levers x 100 points".into())
}

fn indicators() -> Outcome {
    let t = target_indicator(120.0, 100.0).map_err(|e| e.to_string())?;
    let b = budget_overrun_indicator(130.0, 100.0).map_err(|e| e.to_string())?;
    let a = amortize_series(
        10.0,
        &SeriesSpec {
            quantity: 1000,
            tooling_cost: 10000.0,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(t == 1.2 && b == 0.3 && a == 20.0, || {
        format!("target {t}, overrun {b}, amortized {a}")
    })?;
    Ok("1.2, 0.3, 20".into())
}

fn quiet<T>(f: impl FnOnce() -> T) -> std::thread::Result<T> {
    catch_unwind(AssertUnwindSafe(f))
}

fn parser() -> Outcome {
    let mut rng = support::rng(4004);
    for i in 0..10_000 {
        let depth = rng.gen_range(0..7);
        let e = support::random_expr(&mut rng, depth);
        let text = format_expr(&e);
        let back = parse_expr(&text).map_err(|err| format!("expression {i} `{text}`: {err}"))?;
        ensure(back == e && format_expr(&back) == text, || {
            format!("expression {i} `{text}` changed")
        })?;
    }
    for i in 0..100 {
        let model = RandomModel::generate(&mut rng).model();
        let printed = print_model(&model);
        let doc = parse_model(&printed).map_err(|e| format!("model {i}: {e}"))?;
        ensure(
            doc.model == model && print_model(&doc.model) == printed,
            || format!("model {i} changed"),
        )?;
    }
    let mut panics = 0;
    for _ in 0..10_000 {
        let bytes = if rng.gen_bool(0.5) {
            support::fuzz_bytes(&mut rng)
        } else {
            (0..rng.gen_range(0..96)).map(|_| rng.gen()).collect()
        };
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if quiet(|| {
            let _ = parse_expr(&text);
            let _ = parse_model(&text);
        })
        .is_err()
        {
            panics += 1;
        }
    }
    ensure(panics == 0, || format!("{panics} fuzz inputs panicked"))?;
    Ok("10000 expressions, 100 models, 10000 fuzz inputs".into())
}

fn precedence() -> Outcome {
    for mask in 1u8..64 {
        let (expected, got) = support::precedence_case(mask);
        ensure(got == Ok(expected), || {
            format!("mask {mask:06b}: {got:?}, expected {expected}")
        })?;
    }
    Ok("63 scope subsets".into())
}

fn bench_rank_invariance() -> Outcome {
    let mut rng = support::rng(5005);
    for i in 0..100 {
        let rm = RandomModel::generate(&mut rng).money_through_names();
        let (model, part) = (rm.model(), rm.part());
        let tables: Vec<RateTable> = (0..rng.gen_range(2..6))
            .map(|p| RateTable {
                plant_id: format!("plant_{p}"),
                overrides: rm
                    .money_names()
                    .into_iter()
                    .map(|n| (n, rng.gen_range(1.0..150.0)))
                    .collect(),
            })
            .collect();
        let lambda = rng.gen_range(0.1..10.0);
        let scaled: Vec<RateTable> = tables
            .iter()
            .map(|t| RateTable {
                plant_id: t.plant_id.clone(),
                overrides: t
                    .overrides
                    .iter()
                    .map(|(k, v)| (k.clone(), v * lambda))
                    .collect(),
            })
            .collect();
        let order = |ts: &[RateTable]| {
            benchmark_compare(&model, &part, ts)
                .map(|r| {
                    r.rows
                        .into_iter()
                        .map(|x| (x.plant_id, x.rank))
                        .collect::<Vec<_>>()
                })
                .map_err(|e| e.to_string())
        };
        let (a, b) = (order(&tables)?, order(&scaled)?);
        ensure(a == b, || {
            format!("instance {i}, lambda {lambda}: {a:?} vs {b:?}")
        })?;
    }
    Ok("100 instances".into())
}

fn api_cli_parity() -> Outcome {
    let models = common::models_dir();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = common::parity_cases(work.path());
    let server = common::ServerProcess::start(models.path(), &[]);
    for case in &cases {
        let args: Vec<&str> = case.args.iter().map(String::as_str).collect();
        let out = common::run(&args);
        ensure(out.status.success(), || {
            format!(
                "{}: cli failed: {}",
                case.name,
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
        let (status, body) = server.post(
            &format!("/api/models/{}/compute", case.model),
            case.body.to_string().as_bytes(),
        );
        ensure(status == 200, || {
            format!(
                "{}: http {status}: {}",
                case.name,
                String::from_utf8_lossy(&body)
            )
        })?;
        ensure(out.stdout == body, || {
            format!("{}: cli and http outputs differ", case.name)
        })?;
    }
    Ok(format!("{} fixtures byte-identical", cases.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence, reference bundle", oracle_reference),
        ("oracle equivalence, random models", oracle_random),
        ("conservation", conservation),
        ("homogeneity", homogeneity),
        ("scrap chain", scrap_chain),
        ("indicators", indicators),
        ("parser", parser),
        ("precedence", precedence),
        ("benchmark rank invariance", bench_rank_invariance),
        ("api/cli parity", api_cli_parity),
    ];
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = quiet(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    std::panic::set_hook(default_hook);
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
