use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use exact_fpt::harness::{
    brownian_fpt_cdf, delta_compare, em_fpt_oracle, geometric_chi_square, histogram, ig_cdf,
    iteration_identity_check, ks_critical, ks_statistic, mean_and_stderr, sample_batch_from,
    two_sample_ks, write_histogram, SampleSet,
};
use exact_fpt::{DriftModel, SamplerConfig, Variant};

use crate::config::{build, effective_model, split_range};
use crate::{CliError, Common, ValidateArgs};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn hist_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("samples");
    out.with_file_name(format!("{stem}_hist.csv"))
}

fn batch(c: &Common, cfg: &SamplerConfig) -> Result<SampleSet, CliError> {
    Ok(sample_batch_from(cfg, c.n, c.seed, c.streams, c.workers)?)
}

fn mean_of(v: impl Iterator<Item = u64>) -> (f64, f64) {
    let v: Vec<f64> = v.map(|x| x as f64).collect();
    mean_and_stderr(&v)
}

fn print_summary(set: &SampleSet) {
    let (mv, sv) = mean_and_stderr(&set.values);
    let (mi, si) = mean_of(set.stats.iter().map(|s| s.iterations));
    let (mp, sp) = mean_of(set.stats.iter().map(|s| s.total_points));
    let (mr, sr) = mean_of(set.stats.iter().map(|s| s.variates));
    println!("{}", set.fingerprint);
    println!("draws:             {}", set.len());
    println!("mean value:        {mv:.6} +/- {sv:.6}");
    println!("mean iterations:   {mi:.4} +/- {si:.4}");
    println!("mean total_points: {mp:.4} +/- {sp:.4}");
    println!("mean variates:     {mr:.4} +/- {sr:.4}");
}

pub fn sample(c: &Common) -> Result<bool, CliError> {
    let cfg = build(c, None)?;
    let set = batch(c, &cfg)?;
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("samples.csv"));
    let mut w = create(&out)?;
    set.write_csv(&mut w)?;
    w.flush()?;
    if let Some(bins) = c.bins {
        let h = histogram(&set.values, bins)?;
        let path = hist_path(&out);
        let mut w = create(&path)?;
        write_histogram(&h, &mut w)?;
        w.flush()?;
        println!("histogram:         {}", path.display());
    }
    print_summary(&set);
    println!("samples:           {}", out.display());
    Ok(true)
}

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn record(&mut self, pass: bool, name: &str, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(pass);
    }
}

/// Reference CDF when the drift is constant.
fn closed_form(model: &DriftModel, gap: f64) -> Option<Box<dyn Fn(f64) -> f64>> {
    match model {
        DriftModel::Constant { mu } if *mu > 0.0 => {
            let mu = *mu;
            Some(Box::new(move |t| ig_cdf(t, gap, mu)))
        }
        DriftModel::Constant { mu } if *mu == 0.0 => {
            Some(Box::new(move |t| brownian_fpt_cdf(t, gap)))
        }
        _ => None,
    }
}

pub fn validate(v: &ValidateArgs) -> Result<bool, CliError> {
    let c = &v.common;
    let cfg = build(c, None)?;
    let set = batch(c, &cfg)?;
    let gap = cfg.gap();
    let mut verdicts = Verdicts(Vec::new());
    let a3_t0 = if matches!(cfg.variant, Variant::A3) {
        cfg.t0
    } else {
        None
    };
    let alpha = 0.01;
    println!("{}", set.fingerprint);

    let consistent = set.stats.iter().all(|s| s.is_consistent());
    verdicts.record(
        consistent,
        "bookkeeping",
        "total_points = iterations + sum(points)".into(),
    );

    let truncated = matches!(cfg.variant, Variant::Rho { .. });
    match (closed_form(&cfg.model, gap), truncated) {
        (Some(cdf), false) => {
            let d = match a3_t0 {
                Some(t0) => {
                    let mass = cdf(t0);
                    ks_statistic(&set.values, |t| cdf(t.min(t0)) / mass)?
                }
                None => ks_statistic(&set.values, &cdf)?,
            };
            // one-sample Kolmogorov critical value at 1%
            let crit = 1.628 / (set.len() as f64).sqrt();
            verdicts.record(
                d < crit,
                "closed-form KS",
                format!("D = {d:.5}, critical {crit:.5} at 1%"),
            );
        }
        _ => {
            let t_max = match a3_t0 {
                Some(t0) => t0,
                None => {
                    let mut s = set.values.clone();
                    s.sort_by(f64::total_cmp);
                    s[((s.len() as f64 * 0.999) as usize).min(s.len() - 1)]
                }
            };
            let em = em_fpt_oracle(
                &cfg.model,
                cfg.x,
                cfg.level,
                t_max,
                v.em_step,
                v.em_paths,
                c.seed ^ 0xe3,
                c.workers,
            )?;
            if em.crossed.is_empty() {
                verdicts.record(
                    false,
                    "EM oracle KS",
                    "no oracle path crossed before t_max".into(),
                );
            } else {
                let kept: Vec<f64> = set.values.iter().copied().filter(|&t| t <= t_max).collect();
                let d = two_sample_ks(&kept, &em.crossed)?;
                let crit = ks_critical(alpha, kept.len(), em.crossed.len());
                verdicts.record(
                    d < crit,
                    "EM oracle KS",
                    format!(
                        "D = {d:.5}, critical {crit:.5} at 1% (t_max = {t_max:.4}, oracle censored {:.4})",
                        em.censored_fraction()
                    ),
                );
            }
        }
    }

    if a3_t0.is_none() {
        let model = effective_model(&cfg)?;
        let gamma0 = if cfg.variant.is_shift() {
            cfg.cert.gamma0
        } else {
            0.0
        };
        let r = iteration_identity_check(
            &set,
            &model,
            cfg.x,
            cfg.level,
            gamma0,
            cfg.cert.kappa,
            cfg.split_k,
        )?;
        verdicts.record(r.pass, "iteration identity", r.to_string());
        if cfg.split_k == 1 {
            let iters = set.iterations();
            if iters.iter().all(|&i| i == 1) {
                verdicts.record(true, "geometric law", "every draw accepted at once".into());
            } else {
                let chi = geometric_chi_square(&iters)?;
                verdicts.record(
                    chi.passes(alpha),
                    "geometric law",
                    format!(
                        "chi2 = {:.3}, dof {}, p = {:.4}",
                        chi.statistic, chi.dof, chi.p_value
                    ),
                );
            }
        }
    }
    Ok(verdicts.0.iter().all(|&p| p))
}

pub fn bench(c: &Common) -> Result<bool, CliError> {
    let cfg = build(c, None)?;
    let unit = c.cost_unit()?;
    let start = Instant::now();
    let set = batch(c, &cfg)?;
    let elapsed = start.elapsed();
    print_summary(&set);
    if !matches!(cfg.variant, Variant::A3) {
        let model = effective_model(&cfg)?;
        let gamma0 = if cfg.variant.is_shift() {
            cfg.cert.gamma0
        } else {
            0.0
        };
        let r = iteration_identity_check(
            &set,
            &model,
            cfg.x,
            cfg.level,
            gamma0,
            cfg.cert.kappa,
            cfg.split_k,
        )?;
        println!("iteration check:   {r}");
    }
    let (m, s) = mean_of(set.stats.iter().map(|st| unit.of(st)));
    println!("cost ({unit}):  {m:.4} +/- {s:.4}");
    println!(
        "optimal k:         {}",
        exact_fpt::optimal_split_count(cfg.gap(), cfg.cert.kappa)
    );
    println!("wall time:         {:.3} s", elapsed.as_secs_f64());
    Ok(true)
}

pub fn split_scan(c: &Common) -> Result<bool, CliError> {
    let range = split_range(c.k.as_deref().unwrap_or("1..40"))?;
    let unit = c.cost_unit()?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("scan.csv"));
    let mut rows = Vec::new();
    for k in range {
        let cfg = build(c, Some(k))?;
        let set = batch(c, &cfg)?;
        let (m, s) = mean_of(set.stats.iter().map(|st| unit.of(st)));
        println!("k = {k:3}: mean {unit} {m:.3} +/- {s:.3}");
        rows.push((k, m, s));
    }
    let mut w = create(&out)?;
    writeln!(w, "k,mean_total_points,stderr")?;
    for (k, m, s) in &rows {
        writeln!(w, "{k},{m:.16e},{s:.16e}")?;
    }
    w.flush()?;
    if let Some((k, m, _)) = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        println!("minimum at k = {k} ({m:.3} {unit})");
    }
    println!("scan: {}", out.display());
    Ok(true)
}

pub fn compare(c: &Common) -> Result<bool, CliError> {
    if c.rho.is_some() || !matches!(c.k.as_deref(), None | Some("1")) {
        return Err(CliError::Usage(
            "compare runs a1 against a2 unsplit and untruncated".into(),
        ));
    }
    if c.variant != "a1" && c.variant != "a2" {
        return Err(CliError::Usage(
            "compare takes --variant a1 or a2 (both are run)".into(),
        ));
    }
    let cfg = build(c, Some(1))?;
    let unit = c.cost_unit()?;
    let report = delta_compare(&cfg, c.n, c.seed, c.workers, unit)?;
    println!("{report}");
    if let Some(out) = &c.out {
        let mut w = create(out)?;
        writeln!(w, "{}", exact_fpt::harness::DeltaReport::CSV_HEADER)?;
        writeln!(w, "{}", report.csv_row())?;
        w.flush()?;
    }
    Ok(true)
}
