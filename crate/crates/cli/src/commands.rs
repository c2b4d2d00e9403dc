use anyhow::{bail, Context, Result};
use bsr_core::analysis::{pair_spectra, refinement_csv, richardson, RefinementRow, Resonance};
use bsr_core::config::RunConfig;
use bsr_core::eigensolve::{eig_sym_tridiag_window, BlockTridiag2};
use bsr_core::model::Channel;
use bsr_core::scan::{scan_on, snap_to_gap, LevelScan, PAIR_CAP};
use bsr_core::setup::{Level, Problem};
use bsr_core::verify;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::run::RunDir;

/// Levels are followed through refinements on a grid whose spacing halves each time;
/// the three-point stencil makes the discretization error second order in the spacing.
const STENCIL_ORDER: f64 = 2.0;
const SNAP_REACH: f64 = 40.0;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub problem: &'a Problem,
    pub dir: RunDir,
}

fn progress(msg: &str) {
    eprintln!("[bsr] {msg}");
}

fn tag(h: f64) -> String {
    format!("h{h}")
}

fn real_csv(values: &[f64]) -> String {
    let mut s = String::from("index,re,im,residual\n");
    for (k, v) in values.iter().enumerate() {
        s.push_str(&format!("{k},{v:e},0e0,nan\n"));
    }
    s
}

fn resonance_csv(res: &[Resonance]) -> String {
    let mut s = String::from("index,re,im,residual\n");
    for (k, r) in res.iter().enumerate() {
        let resid = r.residual.map_or("nan".to_string(), |x| format!("{x:e}"));
        s.push_str(&format!("{k},{:e},{:e},{resid}\n", r.re, r.im));
    }
    s
}

fn refinement_factors(refine: usize) -> Result<Vec<usize>> {
    if !(1..=3).contains(&refine) {
        bail!("--refine must be 1, 2 or 3 (grids n, 2n, 4n)");
    }
    Ok((0..refine).map(|k| 1 << k).collect())
}

pub fn potential(ctx: &mut Ctx<'_>, samples: usize) -> Result<i32> {
    if samples < 2 {
        bail!("--samples must be at least 2");
    }
    let p = ctx.problem;
    let r_max = p.layout.r_max;
    let mut csv = String::from("R,W1,W2,W1_filled,W2_filled\n");
    for i in 1..=samples {
        let r = r_max * i as f64 / samples as f64;
        let row = [
            p.model.eval(Channel::One, r),
            p.model.eval(Channel::Two, r),
            p.filled.eval(Channel::One, r),
            p.filled.eval(Channel::Two, r),
        ];
        let mut line = format!("{r:e}");
        for v in row {
            line.push_str(&format!(",{:e}", v.with_context(|| format!("potential at R = {r}"))?));
        }
        csv.push_str(&line);
        csv.push('\n');
    }
    ctx.dir.csv("potential.csv", &csv)?;
    ctx.dir.json(
        "potential.json",
        json!({
            "valid_hyp3": p.layout.critical.valid_hyp3,
            "critical": p.layout.critical,
            "layout": p.layout,
        }),
    )?;
    println!(
        "m1 = {:.6}  m2 = {:.6}  M1 = {:.6}  r1M = {:.6}  valid = {}",
        p.layout.critical.m1, p.layout.critical.m2, p.layout.critical.big_m1, p.layout.critical.r1_max,
        p.layout.critical.valid_hyp3
    );
    Ok(0)
}

/// Window eigenvalues of the Dirichlet comparison operator on each refinement, keyed
/// by their global index on the coarsest grid.
fn dirichlet_refinement(lv: &Level<'_>, lo: f64, hi: f64, factors: &[usize]) -> Result<Vec<RefinementRow>> {
    let reach = SNAP_REACH * lv.h;
    let mut per_grid: Vec<(Vec<f64>, usize)> = Vec::new();
    for &f in factors {
        let l = lv.refined(f)?;
        let bt = BlockTridiag2::from_operator(&l.two_channel(false, true)?)?;
        let (vals, (c_lo, _)) = bt.eigenvalues_in(lo - reach, hi + reach);
        per_grid.push((vals, c_lo));
    }
    let base = BlockTridiag2::from_operator(&lv.two_channel(false, true)?)?;
    let (_, (k_lo, k_hi)) = base.eigenvalues_in(lo, hi);
    let mut rows = Vec::new();
    for k in k_lo..k_hi {
        let vals: Option<Vec<C64>> = per_grid
            .iter()
            .map(|(v, c)| k.checked_sub(*c).and_then(|i| v.get(i)).map(|&x| C64::new(x, 0.0)))
            .collect();
        if let Some(vals) = vals {
            rows.push(if vals.len() >= 2 {
                richardson(k, &vals, STENCIL_ORDER)?
            } else {
                RefinementRow { index: k, extrapolated: vals[0], values: vals, error_estimate: f64::NAN, observed_order: None }
            });
        }
    }
    Ok(rows)
}

fn max_error(rows: &[RefinementRow]) -> Option<f64> {
    let m = rows.iter().map(|r| r.error_estimate).fold(f64::NAN, f64::max);
    m.is_finite().then_some(m)
}

pub fn eigs(ctx: &mut Ctx<'_>, hs: &[f64], refine: usize) -> Result<i32> {
    let factors = refinement_factors(refine)?;
    let p = ctx.problem;
    let cp = &p.layout.critical;
    let results: Vec<_> = hs
        .par_iter()
        .map(|&h| -> Result<_> {
            progress(&format!("eigs {}", tag(h)));
            let lv = p.level(h)?;
            let bt = BlockTridiag2::from_operator(&lv.two_channel(false, true)?)?;
            let top = snap_to_gap(&bt, lv.window.hi, SNAP_REACH * h)?;
            let (sharp, _) = bt.eigenvalues_in(lv.window.lo, top);
            let p1 = eig_sym_tridiag_window(&lv.channel(Channel::One, false, true)?, cp.m1, top, true)?;
            let p2 = eig_sym_tridiag_window(&lv.channel(Channel::Two, false, true)?, cp.m1, top, true)?;
            let rows = dirichlet_refinement(&lv, lv.window.lo, top, &factors)?;
            Ok((h, lv.grid.n, top, sharp, p1, p2, rows))
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (h, n, top, sharp, p1, p2, rows) in results {
        let t = tag(h);
        ctx.dir.csv(&format!("spectra/p1-dirichlet-{t}.csv"), &p1.to_csv())?;
        ctx.dir.csv(&format!("spectra/p2-dirichlet-{t}.csv"), &p2.to_csv())?;
        ctx.dir.csv(&format!("spectra/psharp-dirichlet-{t}.csv"), &real_csv(&sharp))?;
        ctx.dir.csv(&format!("refinement/psharp-dirichlet-{t}.csv"), &refinement_csv(&rows))?;
        println!("{t}: {} levels of the Dirichlet operator in [{:.6}, {top:.6})", sharp.len(), cp.m1);
        summary.push(json!({
            "h": h,
            "n": n,
            "window": [cp.m1, top],
            "levels": sharp.len(),
            "p1_levels": p1.values.len(),
            "p2_levels": p2.values.len(),
            "max_residual": p1.max_residual().max(p2.max_residual()),
            "refinement_grids": factors.iter().map(|f| (n + 1) * f - 1).collect::<Vec<_>>(),
            "max_error_estimate": max_error(&rows),
        }));
    }
    ctx.dir.json("eigs-report.json", json!({ "levels": summary }))?;
    Ok(0)
}

fn write_scan_artifacts(dir: &mut RunDir, s: &LevelScan, with_distorted: bool) -> Result<()> {
    let t = tag(s.h);
    dir.csv(&format!("spectra/psharp-dirichlet-{t}.csv"), &real_csv(&s.dirichlet))?;
    dir.csv(&format!("spectra/filled-{t}.csv"), &real_csv(&s.filled))?;
    dir.csv(&format!("pairings/filled-vs-dirichlet-{t}.csv"), &s.filled_vs_dirichlet.to_csv())?;
    if let Some(res) = &s.resonances {
        dir.csv(&format!("spectra/resonances-{t}.csv"), &resonance_csv(res))?;
    }
    if let Some(pr) = &s.resonance_vs_dirichlet {
        dir.csv(&format!("pairings/resonances-vs-dirichlet-{t}.csv"), &pr.to_csv())?;
    }
    if with_distorted {
        if let Some([a, b]) = &s.spectra {
            dir.csv(&format!("spectra/distorted-{t}-mu0.csv"), &a.to_csv())?;
            dir.csv(&format!("spectra/distorted-{t}-mu1.csv"), &b.to_csv())?;
        }
    }
    Ok(())
}

fn scan_summary(s: &LevelScan) -> Value {
    let widest = s.resonances.iter().flatten().map(|r| r.im.abs()).fold(0.0, f64::max);
    json!({
        "h": s.h,
        "n": s.n,
        "mu": s.mu,
        "window": s.window,
        "dirichlet_levels": s.dirichlet.len(),
        "filled_levels": s.filled.len(),
        "filled_vs_dirichlet_max": s.filled_vs_dirichlet.max_distance(),
        "filled_vs_dirichlet_bijection": s.filled_vs_dirichlet.is_bijection(),
        "resonances": s.resonances.as_ref().map(|r| r.len()),
        "max_abs_im": widest,
        "max_residual": s.max_resonance_residual(),
        "resonance_vs_dirichlet_max": s.resonance_vs_dirichlet.as_ref().map(|p| p.max_distance()),
        "resonance_vs_dirichlet_bijection": s.resonance_vs_dirichlet.as_ref().map(|p| p.is_bijection()),
    })
}

/// Follows each coarse-grid resonance through the refined grids by optimal pairing.
fn resonance_refinement(base: &LevelScan, refined: &[LevelScan]) -> Result<Vec<RefinementRow>> {
    let cap = PAIR_CAP * base.h;
    let coarse: Vec<Resonance> = base.resonances.clone().unwrap_or_default();
    let mut tracks: Vec<Option<Vec<C64>>> = coarse.iter().map(|r| Some(vec![r.value()])).collect();
    for s in refined {
        let fine: Vec<Resonance> = s.resonances.clone().unwrap_or_default();
        let re_c: Vec<f64> = coarse.iter().map(|r| r.re).collect();
        let re_f: Vec<f64> = fine.iter().map(|r| r.re).collect();
        let pairing = pair_spectra(&re_c, &re_f, cap)?;
        let mut matched = vec![None; coarse.len()];
        for p in &pairing.pairs {
            matched[p.left] = Some(fine[p.right].value());
        }
        for (t, m) in tracks.iter_mut().zip(matched) {
            match (t.as_mut(), m) {
                (Some(v), Some(z)) => v.push(z),
                _ => *t = None,
            }
        }
    }
    tracks
        .into_iter()
        .enumerate()
        .filter_map(|(k, t)| t.map(|v| (k, v)))
        .map(|(k, v)| {
            if v.len() >= 2 {
                richardson(k, &v, STENCIL_ORDER).map_err(Into::into)
            } else {
                Ok(RefinementRow { index: k, extrapolated: v[0], values: v, error_estimate: f64::NAN, observed_order: None })
            }
        })
        .collect()
}

pub fn resonances(ctx: &mut Ctx<'_>, hs: &[f64], refine: usize) -> Result<i32> {
    let factors = refinement_factors(refine)?;
    let mut summary = Vec::new();
    for &h in hs {
        progress(&format!("resonances {}", tag(h)));
        let lv = ctx.problem.level(h)?;
        let base = scan_on(&lv, true)?;
        write_scan_artifacts(&mut ctx.dir, &base, true)?;
        let mut refined = Vec::new();
        for &f in &factors[1..] {
            progress(&format!("resonances {} on {f}n", tag(h)));
            refined.push(scan_on(&lv.refined(f)?, true)?);
        }
        let rows = resonance_refinement(&base, &refined)?;
        ctx.dir.csv(&format!("refinement/resonances-{}.csv", tag(h)), &refinement_csv(&rows))?;
        let res = base.resonances.as_deref().unwrap_or_default();
        println!(
            "{}: {} resonances, {} Dirichlet levels, max |Im| = {:.3e}",
            tag(h),
            res.len(),
            base.dirichlet.len(),
            res.iter().map(|r| r.im.abs()).fold(0.0, f64::max)
        );
        let mut s = scan_summary(&base);
        s["refinement_tracked"] = json!(rows.len());
        s["max_error_estimate"] = json!(max_error(&rows));
        summary.push(s);
    }
    ctx.dir.json("resonances-report.json", json!({ "levels": summary }))?;
    Ok(0)
}

pub fn twochannel(ctx: &mut Ctx<'_>, hs: &[f64]) -> Result<i32> {
    let p = ctx.problem;
    let scans: Vec<LevelScan> = hs
        .par_iter()
        .map(|&h| {
            progress(&format!("twochannel {}", tag(h)));
            scan_on(&p.level(h)?, false)
        })
        .collect::<bsr_core::Result<_>>()?;
    let mut summary = Vec::new();
    for s in &scans {
        write_scan_artifacts(&mut ctx.dir, s, false)?;
        println!(
            "{}: {} filled, {} Dirichlet, max distance {:.3e}",
            tag(s.h),
            s.filled.len(),
            s.dirichlet.len(),
            s.filled_vs_dirichlet.max_distance()
        );
        summary.push(scan_summary(s));
    }
    ctx.dir.json("twochannel-report.json", json!({ "levels": summary }))?;
    Ok(0)
}

pub fn reduce(ctx: &mut Ctx<'_>) -> Result<i32> {
    let ladder = &ctx.cfg.scan.ladder;
    let red = verify::reductions(ctx.problem, ladder, &progress)?;
    let cross = verify::crossings(ctx.problem, ctx.cfg, &progress)?;
    println!("{}", red.summary_line());
    println!("{}", cross.summary_line());
    ctx.dir.json("reduce-report.json", json!({ "reductions": red, "crossings": cross }))?;
    Ok(0)
}

pub fn scan(ctx: &mut Ctx<'_>) -> Result<i32> {
    let ladder = ctx.cfg.scan.ladder.clone();
    let scans = verify::scans(ctx.problem, &ladder, &progress)?;
    for s in &scans {
        write_scan_artifacts(&mut ctx.dir, s, true)?;
    }
    let gaps = verify::gap_law_check(ctx.problem, &ladder)?;
    let fits = [
        gaps,
        verify::filled_vs_dirichlet(&scans),
        verify::resonances_vs_dirichlet(&scans),
        verify::widths(&scans),
    ];
    for f in &fits {
        println!("{}", f.summary_line());
    }
    ctx.dir.json(
        "scan-report.json",
        json!({
            "ladder": ladder,
            "levels": scans,
            "fits": fits,
        }),
    )?;
    Ok(0)
}

pub fn verify(ctx: &mut Ctx<'_>) -> Result<i32> {
    let report = verify::run_verify(ctx.cfg, &progress)?;
    ctx.dir.document("verify-report.json", &report.to_json())?;
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    println!("exit code {}", report.exit_code);
    Ok(report.exit_code)
}

/// Replays the console summary of a cached verify run.
pub fn print_cached_verify(dir: &RunDir) -> Result<()> {
    let text = std::fs::read_to_string(dir.root.join("verify-report.json"))?;
    let report: verify::VerifyReport = serde_json::from_str(&text)?;
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    println!("exit code {}", report.exit_code);
    Ok(())
}
