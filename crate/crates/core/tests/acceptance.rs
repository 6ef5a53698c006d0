//! Acceptance run: one line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use mpqhd::report::{execute, Check, Operation, RunConfig, RunOutcome};
use mpqhd::scenarios::{list_scenarios, scenario};
use serde_json::Value;

struct Runs(BTreeMap<String, RunOutcome>);

impl Runs {
    fn checks(&self, name: &str, op: Operation) -> Vec<&Check> {
        self.0[name]
            .summary
            .operations
            .iter()
            .filter(|o| o.operation == op)
            .flat_map(|o| o.checks.iter())
            .collect()
    }

    fn matching(&self, name: &str, op: Operation, pred: impl Fn(&str) -> bool) -> Vec<&Check> {
        self.checks(name, op).into_iter().filter(|c| pred(&c.name)).collect()
    }

    fn json(&self, name: &str, file: &str) -> Value {
        serde_json::from_str(&self.0[name].files[file]).expect("valid artifact json")
    }
}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Verdict {
    Verdict { ok, detail }
}

/// Largest value over the checks, and whether every one is at most `limit`.
fn all_at_most(checks: &[&Check], limit: f64) -> (bool, f64) {
    let worst = checks.iter().map(|c| c.value).fold(0.0f64, f64::max);
    (!checks.is_empty() && checks.iter().all(|c| c.value <= limit), worst)
}

fn all_at_least(checks: &[&Check], limit: f64) -> (bool, f64) {
    let least = checks.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    (!checks.is_empty() && checks.iter().all(|c| c.value >= limit), least)
}

fn single_particle() -> Vec<String> {
    list_scenarios("").into_iter().map(|(n, _)| n).filter(|n| scenario(n).unwrap().is_single_particle()).collect()
}

fn all_names() -> Vec<String> {
    list_scenarios("").into_iter().map(|(n, _)| n).collect()
}

fn c1(r: &Runs) -> Verdict {
    let get = |n: &str| r.matching("gaussian1d", Operation::Fields, |c| c == n)[0].value;
    let (w, d, p) = (get("gaussian_w_rel_error"), get("gaussian_d_rel_error"), get("gaussian_momentum_error"));
    verdict(w <= 1e-6 && d <= 1e-6 && p <= 1e-8, format!("w rel {w:.1e}, d rel {d:.1e}, <p> error {p:.1e}"))
}

fn c2(r: &Runs) -> Verdict {
    let names = single_particle();
    let checks: Vec<&Check> = names
        .iter()
        .flat_map(|n| r.matching(n, Operation::Tensors, |c| c.starts_with("one_particle_classical")))
        .collect();
    let (ok, worst) = all_at_most(&checks, 1e-10);
    verdict(ok && checks.len() == names.len(), format!("max |p_cl|/max|p| {worst:.1e} over {}", names.join(", ")))
}

fn over_all(r: &Runs, prefix: &str, limit: f64) -> (bool, f64, usize) {
    let checks: Vec<&Check> =
        all_names().iter().flat_map(|n| r.matching(n, Operation::Tensors, |c| c.starts_with(prefix))).collect();
    let (ok, worst) = all_at_most(&checks, limit);
    (ok, worst, checks.len())
}

fn c3(r: &Runs) -> Verdict {
    let (ok, worst, n) = over_all(r, "bridge_", 1e-10);
    verdict(ok, format!("worst {worst:.1e} relative over {n} scope/version pairs"))
}

fn c4(r: &Runs) -> Verdict {
    let (ok, worst, n) = over_all(r, "quantum_equality_", 1e-12);
    verdict(ok, format!("worst {worst:.1e} relative over {n} scope/version pairs"))
}

fn c5(r: &Runs) -> Verdict {
    let gap = r.matching("corr2d", Operation::Tensors, |c| c.starts_with("gauge_elementwise_gap"));
    let (gap_ok, gap_min) = all_at_least(&gap, 1e-4);
    let levels = r.json("corr2d", "residuals.json");
    let mut l2 = Vec::new();
    for level in levels.as_array().unwrap() {
        for rep in level["reports"].as_array().unwrap() {
            if rep["law"] == "gauge_divergence" {
                l2.push(rep["l2"].as_f64().unwrap());
            }
        }
    }
    let ratios: Vec<f64> = l2.windows(2).map(|w| w[0] / w[1]).collect();
    let shrinks = ratios.len() >= 2 && ratios.iter().all(|&q| q >= 8.0);
    let seq: Vec<String> = l2.iter().map(|v| format!("{v:.1e}")).collect();
    let mut detail = format!(
        "elementwise gap {gap_min:.1e}; divergence gap L2 {} (ratios {})",
        seq.join(" -> "),
        ratios.iter().map(|q| format!("{q:.2}")).collect::<Vec<_>>().join(", ")
    );
    if !shrinks && l2.iter().all(|&v| v < 1e-12) {
        detail.push_str("; the gap is rounding from composed stencils and cannot shrink");
    }
    verdict(gap_ok && shrinks, detail)
}

fn c6(r: &Runs) -> Verdict {
    let mut least = f64::INFINITY;
    let mut ok = true;
    for n in ["gaussian1d", "twoboson_harmonic"] {
        for law in ["mpce", "mpeem", "mpqce"] {
            let orders = r.matching(n, Operation::Check, |c| c.contains(&format!("_{law}_")) && c.ends_with("_order"));
            let (o, l) = all_at_least(&orders, 3.0);
            ok &= o && orders.len() >= 2;
            least = least.min(l);
        }
    }
    let stat = r.matching("trap1d", Operation::Check, |c| c.starts_with("L0_") && c.ends_with("_linf_rel"));
    let (sok, sworst) = all_at_most(&stat, 1e-8);
    verdict(ok && sok, format!("least order {least:.2}, stationary residual {sworst:.1e} relative"))
}

fn c7(r: &Runs) -> Verdict {
    let checks: Vec<&Check> =
        all_names().iter().flat_map(|n| r.matching(n, Operation::Check, |c| c.contains("version_gap"))).collect();
    let (ok, worst) = all_at_most(&checks, 1e-10);
    verdict(ok, format!("worst K/W residual gap {worst:.1e} relative over {} comparisons", checks.len()))
}

fn c8(r: &Runs) -> Verdict {
    let get = |n: &str| r.matching("twosort_counter", Operation::Tensors, |c| c == n)[0].value;
    let (rho, pi_k, pi_w) = (get("additivity_rho"), get("additivity_pi_K"), get("additivity_pi_W"));
    let (p_k, p_w) = (get("additivity_p_K"), get("additivity_p_W"));
    verdict(
        rho <= 1e-12 && pi_k.max(pi_w) <= 1e-12 && p_k.min(p_w) >= 1e-3,
        format!("rho {rho:.1e}, Pi {:.1e}, p gap {:.1e}", pi_k.max(pi_w), p_k.min(p_w)),
    )
}

fn c9(r: &Runs) -> Verdict {
    let cyl = |p: &str| r.matching("ring3d", Operation::Cyl, |c| c.ends_with(p));
    let (a, sym) = all_at_most(&cyl("_symmetry"), 1e-8);
    let ephi: Vec<&Check> = cyl("_e_phi_k").into_iter().chain(cyl("_e_phi_w")).collect();
    let (b, e) = all_at_most(&ephi, 1e-8);
    let orders: Vec<&Check> = cyl("_cart_order_k").into_iter().chain(cyl("_cart_order_w")).collect();
    let (c, o) = all_at_least(&orders, 2.0);
    let (d, off) = all_at_most(&cyl("_off_diagonal_phi"), 0.0);
    verdict(
        a && b && c && d,
        format!("symmetry {sym:.1e}, e_phi {e:.1e}, least Cartesian order {o:.2}, off-diagonal {off:e}"),
    )
}

fn c10(r: &Runs) -> Verdict {
    let mut ok = true;
    let mut worst = 0.0f64;
    for n in ["corr2d", "ring3d"] {
        let growth = r.matching(n, Operation::Check, |c| c.contains("curl_") && c.ends_with("_growth"));
        ok &= growth.len() == 4 && growth.iter().all(|c| c.passed);
        worst = growth.iter().map(|c| c.value).fold(worst, f64::max);
    }
    verdict(ok, format!("largest C_l/C_0 {worst:.2} on corr2d and ring3d (limit 2)"))
}

fn c11(r: &Runs) -> Verdict {
    let (ok, worst, n) = over_all(r, "gauge_shift_divergence", 1e-12);
    verdict(ok && n >= 2, format!("divergence change {worst:.1e} relative over {n} multi-dimensional scopes"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut runs = BTreeMap::new();
    for name in all_names() {
        let mut cfg = RunConfig::for_scenario(scenario(&name).unwrap(), Operation::ALL.to_vec());
        if cfg.scenario.spec.spatial_dim != 3 {
            cfg.operations.retain(|op| *op != Operation::Cyl);
        }
        match execute(&cfg) {
            Ok(o) => {
                runs.insert(name, o);
            }
            Err(e) => {
                println!("FAIL  scenario {name} did not run: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    let runs = Runs(runs);
    let criteria: [(&str, fn(&Runs) -> Verdict); 11] = [
        ("Gaussian reference", c1),
        ("one-particle classical pressure", c2),
        ("bridge identity", c3),
        ("quantum-part equality", c4),
        ("gauge freedom", c5),
        ("balance residuals", c6),
        ("version independence", c7),
        ("sort additivity and its failure", c8),
        ("cylindrical consistency", c9),
        ("curl freedom", c10),
        ("divergence-free gauge shift", c11),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let v = f(&runs);
        failed += usize::from(!v.ok);
        println!("{} {:>2} {title}: {}", if v.ok { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of 11 criteria passed in {:.0} s", 11 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
