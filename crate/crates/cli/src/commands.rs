use haltlab::density::{density_report, window_exponent};
use haltlab::exact::{fmt_ratio, pow2, rat_int};
use haltlab::halting_prob::{below_one, prob_curve};
use haltlab::runtime::{decompose_halting, RuntimeDistribution, Weights, OPAQUE_PRECISION_CAP};
use haltlab::sweep::{check_space_bounds, conditional_probs, prob_by, prob_exact, sweep};
use haltlab::{BitString, Budget, Interval, LabError, Machine, MachineSpec, Result};
use serde_json::{json, Map, Value};

use crate::{BudgetArg, DistArg, Format, MachineArg, Outcome};

fn load(arg: &MachineArg) -> Result<(MachineSpec, Machine)> {
    let spec = MachineSpec::resolve(&arg.machine)?;
    let machine = Machine::from_spec(&spec)?;
    Ok((spec, machine))
}

fn config(
    command: &str,
    arg: &MachineArg,
    spec: &MachineSpec,
    machine: &Machine,
) -> Map<String, Value> {
    let mut c = Map::new();
    c.insert("command".into(), json!(command));
    c.insert("machine".into(), json!(arg.machine));
    c.insert(
        "spec".into(),
        serde_json::to_value(spec).expect("specs serialize"),
    );
    c.insert(
        "class".into(),
        json!(if machine.is_transparent() {
            "transparent"
        } else {
            "opaque"
        }),
    );
    c
}

fn budget_for(machine: &Machine, arg: &BudgetArg) -> Result<Option<Budget>> {
    match (machine.is_transparent(), arg.budget) {
        (true, Some(_)) => Err(LabError::Precondition(
            "--budget is not accepted for transparent machines (their halting is decided exactly)"
                .into(),
        )),
        (true, None) => Ok(None),
        (false, Some(b)) => Ok(Some(Budget::new(b)?)),
        (false, None) => Err(LabError::Precondition(
            "--budget is required for opaque machines".into(),
        )),
    }
}

fn distribution(
    machine: &Machine,
    arg: &DistArg,
    c: &mut Map<String, Value>,
) -> Result<RuntimeDistribution> {
    if !machine.is_transparent()
        && arg.precision > OPAQUE_PRECISION_CAP
        && !arg.allow_high_precision
    {
        return Err(LabError::ResourceLimit(format!(
            "precision {} exceeds {OPAQUE_PRECISION_CAP} on an opaque machine (pass --allow-high-precision)",
            arg.precision
        )));
    }
    let weights = match &arg.distribution {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("cannot read distribution {path}: {e}")))?;
            Weights::from_json(&text)?
        }
        None => Weights::UpsilonInduced,
    };
    c.insert("precision".into(), json!(arg.precision));
    c.insert("distribution".into(), weights.to_json());
    RuntimeDistribution::new(machine, weights, arg.precision)
}

fn interval(x: &Interval) -> Value {
    json!({ "lo": fmt_ratio(&x.lo), "hi": fmt_ratio(&x.hi) })
}

fn report(config: Map<String, Value>, result: Value) -> String {
    let mut text = serde_json::to_string_pretty(&json!({ "config": config, "result": result }))
        .expect("reports serialize");
    text.push('\n');
    text
}

fn csv(config: Map<String, Value>, body: String) -> String {
    format!("# {}\n{body}", Value::Object(config))
}

fn ok(text: String) -> Result<Outcome> {
    Ok(Outcome {
        text,
        violation: None,
    })
}

pub fn history(
    arg: &MachineArg,
    length: u32,
    max_time: u64,
    t0: Option<u64>,
    t1: Option<u64>,
    format: Format,
) -> Result<Outcome> {
    let (spec, machine) = load(arg)?;
    let t0 = t0.unwrap_or(max_time.min(5));
    let t1 = t1.unwrap_or(max_time.min(8));
    let mut c = config("history", arg, &spec, &machine);
    c.insert("length".into(), json!(length));
    c.insert("max_time".into(), json!(max_time));
    c.insert("t0".into(), json!(t0));
    c.insert("t1".into(), json!(t1));
    let h = sweep(&machine, length, max_time)?;
    let violation = check_space_bounds(&h).err().map(|e| e.to_string());
    if format == Format::Csv {
        c.insert("format".into(), json!("csv"));
        return Ok(Outcome {
            text: csv(c, h.to_csv()),
            violation,
        });
    }
    let (conditional, note) = match conditional_probs(&h, t0, t1) {
        Ok(p) => (serde_json::to_value(p).expect("serialize"), Value::Null),
        Err(e @ LabError::UndefinedConditional(_)) => (Value::Null, json!(e.to_string())),
        Err(e) => return Err(e),
    };
    let result = json!({
        "programs": h.programs(),
        "halting": h.halting_count(),
        "rows": h.matrix().rows,
        "prob_halt_at_1": fmt_ratio(&h.prob_halt_at(1)),
        "prob_halt_by_t1": fmt_ratio(&h.prob_halt_by(t1)),
        "prob_eventual": fmt_ratio(&h.prob_eventual()),
        "conditional": conditional,
        "conditional_note": note,
        "space": {
            "prob_exact": fmt_ratio(&prob_exact(&h)),
            "prob_by": fmt_ratio(&prob_by(&h)),
            "one_over_t": fmt_ratio(&(rat_int(1) / rat_int(max_time))),
            "bounds_hold": violation.is_none(),
        },
    });
    Ok(Outcome {
        text: report(c, result),
        violation,
    })
}

pub fn upsilon(arg: &MachineArg, dist: &DistArg) -> Result<Outcome> {
    let (spec, machine) = load(arg)?;
    let mut c = config("upsilon", arg, &spec, &machine);
    let d = distribution(&machine, dist, &mut c)?;
    let u = d.upsilon();
    let result = json!({
        "upsilon": interval(u),
        "width": fmt_ratio(&u.width()),
        "terms": d.truncation(),
        "term_budget": d.budget().steps(),
    });
    ok(report(c, result))
}

fn tail_check(d: &RuntimeDistribution, k: u32) -> (u64, Interval, bool) {
    let t = d.threshold_time(k);
    let tail = d.conditional_halt_tail(t);
    let holds = tail.hi < pow2(-(k as i64));
    (t, tail, holds)
}

pub fn threshold(arg: &MachineArg, dist: &DistArg, k: u32) -> Result<Outcome> {
    if k < 1 {
        return Err(LabError::Precondition("k must be at least 1".into()));
    }
    let (spec, machine) = load(arg)?;
    let mut c = config("threshold", arg, &spec, &machine);
    c.insert("k".into(), json!(k));
    let d = distribution(&machine, dist, &mut c)?;
    let (t, tail, holds) = tail_check(&d, k);
    let result = json!({
        "upsilon": interval(d.upsilon()),
        "threshold": t,
        "tail_modulus": d.tail_modulus(k),
        "tail": interval(&tail),
        "bound": fmt_ratio(&pow2(-(k as i64))),
        "holds": holds,
    });
    let violation = (!holds).then(|| format!("tail from T({k}) = {t} is {tail}, not below 2^-{k}"));
    Ok(Outcome {
        text: report(c, result),
        violation,
    })
}

pub fn decide(arg: &MachineArg, dist: &DistArg, program: &str, k: u32) -> Result<Outcome> {
    if k < 1 {
        return Err(LabError::Precondition("k must be at least 1".into()));
    }
    let p: BitString = program.parse()?;
    let (spec, machine) = load(arg)?;
    let mut c = config("decide", arg, &spec, &machine);
    c.insert("program".into(), json!(p.to_string()));
    c.insert("k".into(), json!(k));
    let d = distribution(&machine, dist, &mut c)?;
    let (t, tail, holds) = tail_check(&d, k);
    let bound = pow2(-(k as i64));
    let (halted, verdict) = match machine.run(&p, Budget::new(t)?) {
        outcome if outcome.is_halted() => {
            let steps = outcome.stop_time().expect("halted");
            (Some(steps), format!("HALTED at {steps}"))
        }
        _ => (
            None,
            format!(
                "probably non-halting, residual halting probability < 2^-{k} = {}",
                fmt_ratio(&bound)
            ),
        ),
    };
    let result = json!({
        "threshold": t,
        "halted_at": halted,
        "verdict": verdict,
        "tail": interval(&tail),
        "bound": fmt_ratio(&bound),
    });
    let violation = (!holds).then(|| format!("tail from T({k}) = {t} is {tail}, not below 2^-{k}"));
    Ok(Outcome {
        text: report(c, result),
        violation,
    })
}

pub fn density(
    arg: &MachineArg,
    budget: &BudgetArg,
    length: u32,
    horizon: Option<u64>,
) -> Result<Outcome> {
    let (spec, machine) = load(arg)?;
    let b = budget_for(&machine, budget)?;
    let m = window_exponent(length, machine.wrapper_constant());
    let horizon = match horizon {
        Some(h) => h,
        None => 1u64
            .checked_shl(m + 1)
            .filter(|&h| h > 0 && m + 1 < 64)
            .ok_or_else(|| {
                LabError::ResourceLimit(format!("default horizon 2^{} overflows", m + 1))
            })?,
    };
    let mut c = config("density", arg, &spec, &machine);
    c.insert("length".into(), json!(length));
    c.insert("horizon".into(), json!(horizon));
    c.insert("budget".into(), json!(budget.budget));
    let r = density_report(&machine, length, horizon, b)?;
    let violation = if r.observed_random_stop_times > 0 {
        Some(format!(
            "{} stop times in the window are certified random",
            r.observed_random_stop_times
        ))
    } else if machine.is_transparent() && !r.envelope_holds {
        Some(format!(
            "random fraction {} is not above 1 - {}",
            fmt_ratio(&r.random_time_fraction),
            fmt_ratio(&r.lemma_bound)
        ))
    } else {
        None
    };
    let result = serde_json::to_value(&r).expect("serialize");
    Ok(Outcome {
        text: report(c, result),
        violation,
    })
}

fn parse_lengths(s: &str) -> Result<(u32, u32)> {
    let bad =
        || LabError::Precondition(format!("--lengths wants `a..b` with 1 ≤ a ≤ b, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b
        .trim_start_matches('=')
        .trim()
        .parse()
        .map_err(|_| bad())?;
    if a < 1 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn probcurve(
    arg: &MachineArg,
    budget: &BudgetArg,
    lengths: &str,
    tail_from: u32,
    format: Format,
) -> Result<Outcome> {
    let (from, to) = parse_lengths(lengths)?;
    let (spec, machine) = load(arg)?;
    let b = budget_for(&machine, budget)?;
    let mut c = config("probcurve", arg, &spec, &machine);
    c.insert("lengths".into(), json!([from, to]));
    c.insert("tail_from".into(), json!(tail_from));
    c.insert("budget".into(), json!(budget.budget));
    let mut curve = prob_curve(&machine, to, b)?;
    curve.points.retain(|p| p.length >= from);
    if format == Format::Csv {
        c.insert("format".into(), json!("csv"));
        return ok(csv(c, curve.to_csv()));
    }
    let omega = curve.omega();
    let tail_start = tail_from.max(from);
    let result = json!({
        "points": curve.points,
        "floor": curve.floor(from, to).map(|f| fmt_ratio(&f)),
        "omega": interval(&omega),
        "omega_below_one": below_one(&omega.lo),
        "tail_window": [tail_start, to],
        "tail_non_increasing": curve.non_increasing(tail_start, to),
    });
    ok(report(c, result))
}

pub fn decompose(
    arg: &MachineArg,
    budget: &BudgetArg,
    dist: &DistArg,
    k: u32,
    max_length: u32,
) -> Result<Outcome> {
    let (spec, machine) = load(arg)?;
    let b = budget_for(&machine, budget)?;
    let mut c = config("decompose", arg, &spec, &machine);
    c.insert("k".into(), json!(k));
    c.insert("max_length".into(), json!(max_length));
    c.insert("budget".into(), json!(budget.budget));
    let d = distribution(&machine, dist, &mut c)?;
    let r = decompose_halting(&machine, &d, k, max_length, b)?;
    let violation = (!r.holds).then(|| {
        format!(
            "residual measure {} is not below {}",
            r.residual_measure,
            fmt_ratio(&r.bound)
        )
    });
    let result = serde_json::to_value(&r).expect("serialize");
    Ok(Outcome {
        text: report(c, result),
        violation,
    })
}
