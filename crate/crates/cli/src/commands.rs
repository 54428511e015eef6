use std::fs;
use std::io::Read;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use serde_json::json;
use sha2::{Digest, Sha256};

use biquad_core::bench::{
    projection_error, reproduce_table, theorem_suite, EnsembleKind, FunctionEnsemble, TableRow,
};
use biquad_core::rules::{
    load_rule, pushforward_h1, pushforward_l2, read_rule_unverified, save_rule, sigma_of_rule,
    weight_condition, BilinearRule, Projector, EXACTNESS_TOL,
};
use biquad_core::{build_rule, AffineMap, Coefficient, Domain, InnerProductSpec, OptConfig};

use crate::{
    BenchArgs, BuildArgs, Cli, Command, OptArgs, ProjectArgs, PushforwardArgs, SpaceArgs,
    TableArgs, TheoremArgs,
};

/// Tolerance on |σ_stored − σ_recomputed| for `validate`.
const SIGMA_TOL: f64 = 1e-10;

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        ensure!(t >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let threads = cli.threads;
    match cli.command {
        Command::Build(a) => build(a, threads),
        Command::Table(a) => table(a, threads),
        Command::Info(a) => info(&a.rule),
        Command::Project(a) => project(a),
        Command::Validate(a) => validate(&a.rule),
        Command::Pushforward(a) => pushforward(a),
        Command::Bench(a) => bench(a),
        Command::Theorems(a) => theorems(a, threads),
    }
}

fn header(seed: Option<u64>, hash: Option<&str>) {
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    eprintln!("# seed {seed} config {}", hash.unwrap_or("none"));
}

fn rule_header(rule: &BilinearRule) {
    header(rule.provenance.seed, rule.provenance.config_hash.as_deref());
}

fn opt_config(a: &OptArgs, threads: Option<usize>) -> Result<OptConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => OptConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.starts {
        cfg.n_starts = n;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("{what}: not a number: {t:?}"))
        })
        .collect()
}

fn space(a: &SpaceArgs) -> Result<(Domain, InnerProductSpec)> {
    let mut domain: Domain = a.domain.parse()?;
    if let Some(b) = &a.bounds {
        ensure!(
            matches!(domain, Domain::Interval { .. }),
            "--bounds applies to the interval domain only"
        );
        let v = parse_list(b, "--bounds")?;
        ensure!(v.len() == 2, "--bounds takes two numbers, got {}", v.len());
        domain = Domain::interval(v[0], v[1])?;
    }
    let ip = match a.ip.to_ascii_lowercase().as_str() {
        "l2" => InnerProductSpec::l2(domain),
        "h1" => InnerProductSpec::h1(domain, a.h1_weight.parse::<Coefficient>()?)?,
        other => bail!("unknown inner product {other:?} (expected l2 or h1)"),
    };
    Ok((domain, ip))
}

fn row_of(n: usize, rule: &BilinearRule) -> TableRow {
    TableRow {
        n,
        k: rule.k,
        sigma: Some(rule.sigma),
        kappa_inf: rule.kappa_inf,
        error: None,
    }
}

fn print_row(row: &TableRow, as_json: bool) -> Result<()> {
    if as_json {
        println!("{}", serde_json::to_string(row)?);
    } else {
        println!("{row}");
    }
    Ok(())
}

fn build(a: BuildArgs, threads: Option<usize>) -> Result<ExitCode> {
    let (domain, ip) = space(&a.space)?;
    let cfg = opt_config(&a.opt, threads)?;
    header(Some(cfg.seed), Some(&cfg.config_hash()));
    let rule = build_rule(domain, a.degree, &ip, &cfg)?;
    save_rule(&rule, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    print_row(&row_of(a.degree, &rule), a.json)?;
    Ok(ExitCode::SUCCESS)
}

fn table(a: TableArgs, threads: Option<usize>) -> Result<ExitCode> {
    ensure!(
        a.min_degree <= a.max_degree,
        "--min-degree exceeds --max-degree"
    );
    let (domain, ip) = space(&a.space)?;
    let cfg = opt_config(&a.opt, threads)?;
    header(Some(cfg.seed), Some(&cfg.config_hash()));
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
    }
    if !a.json {
        println!("n k sigma kappa_inf");
    }
    let mut failed = false;
    for (row, rule) in reproduce_table(domain, &ip, a.min_degree, a.max_degree, &cfg) {
        print_row(&row, a.json)?;
        failed |= row.error.is_some();
        if let (Some(dir), Some(rule)) = (&a.out_dir, rule) {
            save_rule(&rule, dir.join(format!("{}-{}.rule", domain.name(), row.n)))?;
        }
    }
    if failed {
        bail!("one or more rows failed to build");
    }
    Ok(ExitCode::SUCCESS)
}

fn info(path: &Path) -> Result<ExitCode> {
    let rule = load_rule(path).with_context(|| format!("loading {}", path.display()))?;
    rule_header(&rule);
    println!("domain      {}", rule.domain);
    println!("inner       {}", rule.ip);
    println!("space       {:?}", rule.space);
    if let Some(f) = &rule.frame {
        println!("frame       det {:.6e}", f.det());
    }
    println!("points      {} (dim {})", rule.len(), rule.points_x.dim());
    println!("k           {}", rule.k);
    println!("sigma       {:.16e}", rule.sigma);
    match rule.kappa_inf {
        Some(k) => println!("kappa_inf   {k:.16e}"),
        None => println!("kappa_inf   n/a"),
    }
    if let Ok(c) = weight_condition(&rule) {
        println!("cond_inf(W) {c:.16e}");
    }
    println!(
        "h1 split    {}",
        if rule.w_split.is_some() { "yes" } else { "no" }
    );
    println!("version     {}", rule.provenance.crate_version);
    if let Some(r) = rule.provenance.pushforward_residual {
        println!("pushforward residual {r:.3e}");
    }
    println!("points_x");
    for p in rule.points_x.iter() {
        println!("  {}", fmt_point(p));
    }
    if rule.points_y != rule.points_x {
        println!("points_y");
        for p in rule.points_y.iter() {
            println!("  {}", fmt_point(p));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_point(p: &[f64]) -> String {
    p.iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    parse_list(&text, "values")
}

fn project(a: ProjectArgs) -> Result<ExitCode> {
    let rule = load_rule(&a.rule).with_context(|| format!("loading {}", a.rule.display()))?;
    rule_header(&rule);
    let values = read_values(&a.values)?;
    ensure!(
        values.len() == rule.points_y.len(),
        "expected {} values, got {}",
        rule.points_y.len(),
        values.len()
    );
    for c in Projector::new(&rule)?.project(&values)? {
        println!("{c:.16e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(path: &Path) -> Result<ExitCode> {
    let (rule, integrity) =
        read_rule_unverified(path).with_context(|| format!("reading {}", path.display()))?;
    rule_header(&rule);
    let bases = rule.bases()?;
    let sigma = sigma_of_rule(&rule, &bases.g1)?;
    let exact_ok = integrity.exact();
    let sigma_dev = (sigma - rule.sigma).abs();
    let sigma_ok = sigma_dev <= SIGMA_TOL;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!(
        "exactness residual {:.3e} (tolerance {EXACTNESS_TOL:e}) {}",
        integrity.exactness_residual,
        mark(exact_ok)
    );
    println!(
        "sigma stored {:.16e} recomputed {sigma:.16e} difference {sigma_dev:.3e} {}",
        rule.sigma,
        mark(sigma_ok)
    );
    if integrity.checksum_ok() {
        println!("checksum ok");
    } else {
        println!(
            "checksum mismatch (stored {}, computed {})",
            integrity.stored_checksum, integrity.computed_checksum
        );
    }
    if exact_ok && sigma_ok {
        println!("valid");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("invalid");
        Ok(ExitCode::from(1))
    }
}

fn pushforward(a: PushforwardArgs) -> Result<ExitCode> {
    let rule = load_rule(&a.rule).with_context(|| format!("loading {}", a.rule.display()))?;
    rule_header(&rule);
    let map = match (&a.vertices, &a.linear, &a.translation) {
        (Some(v), _, _) => {
            ensure!(
                rule.domain == Domain::Triangle,
                "--vertices needs a triangle rule"
            );
            let v = parse_list(v, "--vertices")?;
            ensure!(
                v.len() == 6,
                "--vertices takes six numbers, got {}",
                v.len()
            );
            AffineMap::reference_triangle_to([v[0], v[1]], [v[2], v[3]], [v[4], v[5]])?
        }
        (None, Some(l), Some(t)) => {
            let d = rule.points_x.dim();
            let l = parse_list(l, "--linear")?;
            ensure!(
                l.len() == d * d,
                "--linear takes {} numbers, got {}",
                d * d,
                l.len()
            );
            AffineMap::new(
                DMatrix::from_row_slice(d, d, &l),
                parse_list(t, "--translation")?,
            )?
        }
        _ => bail!("give either --vertices or --linear with --translation"),
    };
    let image = if rule.ip.is_h1() {
        pushforward_h1(&rule, &map)?
    } else {
        pushforward_l2(&rule, &map)?
    };
    save_rule(&image, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(r) = image.provenance.pushforward_residual {
        eprintln!("# pushforward residual {r:.3e}");
    }
    let n = match image.space {
        biquad_core::objective::Space::Polynomial { degree } => degree,
        biquad_core::objective::Space::Trigonometric { frequency } => frequency,
    };
    print_row(&row_of(n, &image), false)?;
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let rule = load_rule(&a.rule).with_context(|| format!("loading {}", a.rule.display()))?;
    let kind: EnsembleKind = a.ensemble.parse()?;
    let params = json!({
        "rule": biquad_core::rules::to_text(&rule),
        "ensemble": kind,
        "count": a.count,
        "ref_degree": a.ref_degree,
        "seed": a.seed,
    });
    let hash = hex::encode(Sha256::digest(params.to_string().as_bytes()));
    header(Some(a.seed), Some(&hash));
    let ensemble = FunctionEnsemble::for_rule(kind, &rule, a.seed);
    let report = projection_error(&rule, &ensemble, a.count, a.ref_degree)?;
    if a.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        println!("rule {}", report.rule);
        println!(
            "{} samples {} ref_degree {} mean {:.3e} max {:.3e}",
            report.ensemble,
            report.count,
            report.ref_degree,
            report.mean_relative_error,
            report.max_relative_error
        );
    }
    if let Some(out) = &a.output {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn theorems(a: TheoremArgs, threads: Option<usize>) -> Result<ExitCode> {
    let cfg = opt_config(&a.opt, threads)?;
    header(Some(cfg.seed), Some(&cfg.config_hash()));
    let report = theorem_suite(&cfg);
    for c in &report.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if let Some(out) = &a.output {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
