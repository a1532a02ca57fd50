use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _, Result};
use clap::ValueEnum;
use posauc::auction::{run_auction, PaymentRule};
use posauc::bayes::{
    check_auxiliary_lemma, check_lemma1, check_lemma2, check_monotone_allocation, check_ode, diagonal_alloc_probs,
    expected_bid_payment, myerson_expected_payment, simulate_revenue, simulate_revenue_rounds, AuxLemma, BayesSetting,
    EquilibriumBidTable, MeanEstimate,
};
use posauc::complete_info::{assignment_welfare, is_efficient, truthful_vcg, verify_nash_with, DeviationGrid};
use posauc::Execution;

use crate::config::LoadedConfig;
use crate::record::{num, opt, unix_now, ResultRecord, Table, Timestamps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Nash,
    Lemma1,
    Lemma2,
    Ode,
    Aux,
    Monotone,
    PaymentIdentity,
}

/// Command-line overrides shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub timestamps: bool,
}

pub struct Context<'a> {
    pub loaded: &'a LoadedConfig,
    pub overrides: Overrides,
    started: f64,
}

impl<'a> Context<'a> {
    pub fn new(loaded: &'a LoadedConfig, overrides: Overrides) -> Self {
        Self { loaded, overrides, started: unix_now() }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.overrides.out.clone().unwrap_or_else(|| self.loaded.config.output.dir.clone());
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn seed(&self) -> Option<u64> {
        self.overrides.seed.or(self.loaded.config.seed)
    }

    fn record(&self, command: &str) -> ResultRecord {
        ResultRecord::new(command, &self.loaded.digest, self.seed())
    }

    fn finish(&self, mut record: ResultRecord, dir: &Path) -> Result<ResultRecord> {
        if self.overrides.timestamps {
            record.timestamps = Some(Timestamps { started_unix: self.started, finished_unix: unix_now() });
        }
        record.write(dir)?;
        Ok(record)
    }

    fn setting(&self) -> Result<BayesSetting> {
        self.loaded.config.setting(&self.loaded.base)
    }

    fn table_points(&self) -> usize {
        self.overrides.grid.unwrap_or(self.loaded.config.grids.table)
    }
}

/// `count` equally spaced points strictly inside `(0, top)`.
fn interior(top: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| top * i as f64 / (count + 1) as f64).collect()
}

pub fn run(ctx: &Context) -> Result<ResultRecord> {
    let cfg = &ctx.loaded.config;
    let values = cfg.values()?;
    let curve = cfg.curve()?;
    let spec = cfg.mechanism()?;
    let (bids, hint) = cfg.bids(&values, &curve, &spec)?;
    let outcome = run_auction(&spec, &bids, &curve, &values, hint.as_ref())?;
    let vcg = truthful_vcg(&values, &curve);

    let dir = ctx.out_dir()?;
    let mut record = ctx.record("run");
    let mut table = Table::new("outcome.csv", &["agent", "value", "position", "payment", "utility"])?;
    for (i, &v) in values.values().iter().enumerate() {
        let pos = outcome.assignment.position_of(i);
        table.row([i.to_string(), num(v), opt(pos), num(outcome.payments[i]), num(outcome.utilities[i])])?;
    }
    table.finish(&dir, &mut record)?;
    record
        .scalar("revenue", outcome.revenue())
        .scalar("welfare", assignment_welfare(&outcome, &values, &curve))
        .scalar("vcg_revenue", vcg.revenue())
        .note("mechanism", spec.to_string())
        .note("efficient", is_efficient(&outcome, &values, &curve).to_string());
    println!("{spec}: revenue {} (truthful VCG {})", outcome.revenue(), vcg.revenue());
    ctx.finish(record, &dir)
}

pub fn tabulate(ctx: &Context) -> Result<ResultRecord> {
    let setting = ctx.setting()?;
    let points = ctx.table_points();
    let table = EquilibriumBidTable::build(&setting, points, Execution::default())?;
    let dir = ctx.out_dir()?;
    table.write(dir.join("bid_table.txt"))?;
    let mut record = ctx.record("tabulate");
    record.tables.push("bid_table.txt".into());
    record
        .scalar("points", points as f64)
        .scalar("n", setting.num_agents() as f64)
        .scalar("k", setting.num_positions() as f64)
        .note("distribution", setting.dist().to_string());
    println!("wrote {} rows to {}", points, dir.join("bid_table.txt").display());
    ctx.finish(record, &dir)
}

pub fn verify(ctx: &Context, suite: Suite) -> Result<(ResultRecord, bool)> {
    let cfg = &ctx.loaded.config;
    let tol = &cfg.tolerances;
    let grids = &cfg.grids;
    let dir = ctx.out_dir()?;
    let mut record = ctx.record("verify");
    let name = suite.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    record.note("suite", name.clone());

    let passed = if suite == Suite::Nash {
        let values = cfg.values()?;
        let curve = cfg.curve()?;
        let spec = cfg.mechanism()?;
        let (bids, hint) = cfg.bids(&values, &curve, &spec)?;
        let grid = match grids.deviation_step {
            Some(step) => DeviationGrid::new(step, vec![step, 1e-3 * step])?,
            None => DeviationGrid::for_scale(values.max()),
        };
        let report =
            verify_nash_with(&bids, hint.as_ref(), &values, &spec, &curve, &grid, tol.nash, Execution::default())?;
        let mut table = Table::new(
            "nash.csv",
            &["max_gain", "tolerance", "efficient", "payment_floor_ok", "violating_agent", "deviation"],
        )?;
        let (agent, deviation) = match &report.worst_violation {
            Some(v) => (v.agent.to_string(), v.deviation.iter().map(|&b| num(b)).collect::<Vec<_>>().join(" ")),
            None => (String::new(), String::new()),
        };
        table.row([
            num(report.max_gain),
            num(tol.nash),
            report.efficiency_flag.to_string(),
            report.payment_floor_ok.to_string(),
            agent,
            deviation,
        ])?;
        table.finish(&dir, &mut record)?;
        record.scalar("max_gain", report.max_gain).scalar("tolerance", tol.nash);
        if spec.payment_rule != PaymentRule::FirstPrice {
            record.note("payment_floor", "only meaningful for first-price payments");
        }
        report.is_equilibrium
    } else {
        let s = ctx.setting()?;
        let top = s.upper();
        let vs = interior(top, ctx.overrides.grid.unwrap_or(grids.values));
        let h = grids.step * top;
        let k = s.num_positions();
        match suite {
            Suite::Lemma1 | Suite::Ode => {
                let (file, limit) =
                    if suite == Suite::Lemma1 { ("lemma1.csv", tol.lemma1) } else { ("ode.csv", tol.ode) };
                let mut table = Table::new(file, &["position", "v", "residual"])?;
                let mut worst = 0.0f64;
                for j in 0..k {
                    for &v in &vs {
                        let r = if suite == Suite::Lemma1 { check_lemma1(j, v, &s, h)? } else { check_ode(j, v, &s)? };
                        worst = worst.max(r);
                        table.row([j.to_string(), num(v), num(r)])?;
                    }
                }
                table.finish(&dir, &mut record)?;
                record.scalar("max_residual", worst).scalar("tolerance", limit);
                worst <= limit
            }
            Suite::Lemma2 => {
                let xs = interior(top, grids.reports);
                let mut table = Table::new("lemma2.csv", &["position", "min", "v_at", "x_at", "evaluated", "skipped"])?;
                let mut worst = f64::INFINITY;
                for j in 0..k {
                    let r = check_lemma2(j, &vs, &xs, &s, h)?;
                    worst = worst.min(r.min);
                    table.row([
                        j.to_string(),
                        num(r.min),
                        opt(r.at.map(|a| a.0)),
                        opt(r.at.map(|a| a.1)),
                        r.evaluated.to_string(),
                        r.skipped.to_string(),
                    ])?;
                }
                table.finish(&dir, &mut record)?;
                record.scalar("min_cross_difference", worst).scalar("tolerance", tol.lemma2);
                worst >= -tol.lemma2
            }
            Suite::Aux => {
                let step = grids.aux_step * top;
                let mut table = Table::new("aux.csv", &["lemma", "position", "l", "m", "v", "residual"])?;
                let mut worst = 0.0f64;
                for &v in &vs {
                    for m in 1..=grids.max_opponents {
                        let mut cases = Vec::new();
                        for j in 0..m.saturating_sub(1) {
                            cases.push((AuxLemma::PairSum, j));
                            for ell in j + 2..m {
                                cases.push((AuxLemma::Deep { ell }, j));
                            }
                        }
                        for (lemma, j) in cases {
                            let x: Vec<f64> = (0..=m).map(|t| if t < j { 0.5 * (v + top) } else { v }).collect();
                            let r = check_auxiliary_lemma(lemma, j, m, &x, v, s.dist(), step)?;
                            worst = worst.max(r);
                            let (label, ell) = match lemma {
                                AuxLemma::PairSum => ("pair-sum", String::new()),
                                AuxLemma::Deep { ell } => ("deep", ell.to_string()),
                            };
                            table.row([label.to_owned(), j.to_string(), ell, m.to_string(), num(v), num(r)])?;
                        }
                    }
                }
                table.finish(&dir, &mut record)?;
                record.scalar("max_residual", worst).scalar("tolerance", tol.aux);
                worst <= tol.aux
            }
            Suite::Monotone => {
                let mut grid = vec![0.0];
                grid.extend(&vs);
                grid.push(top);
                let mut table = Table::new("monotone.csv", &["v", "weighted_allocation"])?;
                for &v in &grid {
                    let w: f64 =
                        diagonal_alloc_probs(v, &s).iter().enumerate().map(|(j, p)| s.curve().beta(j) * p).sum();
                    table.row([num(v), num(w)])?;
                }
                table.finish(&dir, &mut record)?;
                check_monotone_allocation(&s, &grid)?
            }
            Suite::PaymentIdentity => {
                let mut table =
                    Table::new("payment_identity.csv", &["v", "bid_payment", "myerson_payment", "residual"])?;
                let mut worst = 0.0f64;
                for &v in &vs {
                    let a = expected_bid_payment(v, &s)?;
                    let b = myerson_expected_payment(v, &s)?;
                    worst = worst.max((a - b).abs());
                    table.row([num(v), num(a), num(b), num((a - b).abs())])?;
                }
                table.finish(&dir, &mut record)?;
                record.scalar("max_residual", worst).scalar("tolerance", tol.payment_identity);
                worst <= tol.payment_identity
            }
            Suite::Nash => unreachable!(),
        }
    };
    record.passed = Some(passed);
    println!("verify {name}: {}", if passed { "pass" } else { "FAIL" });
    Ok((ctx.finish(record, &dir)?, passed))
}

pub fn simulate(ctx: &Context) -> Result<ResultRecord> {
    let cfg = &ctx.loaded.config;
    let Some(seed) = ctx.seed() else {
        bail!("simulate needs a seed (--seed or `seed` in the config)");
    };
    let Some(samples) = ctx.overrides.samples.or(cfg.samples) else {
        bail!("simulate needs a sample count (--samples or `samples` in the config)");
    };
    ensure!(samples >= 1, "simulate needs at least one sample");
    let setting = ctx.setting()?;
    let table = match &cfg.bids.table {
        Some(path) => {
            let path = ctx.loaded.base.join(path);
            let t = EquilibriumBidTable::read(&path).with_context(|| format!("reading {}", path.display()))?;
            ensure!(
                t.num_agents() == setting.num_agents() && t.curve() == setting.curve() && t.dist() == setting.dist(),
                "bid table {} was built for a different setting",
                path.display()
            );
            t
        }
        None => EquilibriumBidTable::build(&setting, ctx.table_points(), Execution::default())?,
    };
    let est = simulate_revenue(&setting, &table, samples, seed, Execution::default())?;

    let dir = ctx.out_dir()?;
    let mut record = ctx.record("simulate");
    let mut out = Table::new("revenue.csv", &["metric", "mean", "std_error"])?;
    for (label, e) in [("gfp", est.gfp), ("vcg", est.vcg), ("difference", est.difference)] {
        out.row([label.to_owned(), num(e.mean), opt(e.std_error.map(num))])?;
        record.scalar(&format!("{label}_mean"), e.mean).scalar(&format!("{label}_se"), e.std_error);
    }
    out.finish(&dir, &mut record)?;
    if cfg.output.rounds {
        let rounds = simulate_revenue_rounds(&setting, &table, samples, seed, Execution::default())?;
        let mut t = Table::new("rounds.csv", &["round", "gfp", "vcg"])?;
        for (i, (g, v)) in rounds.gfp.iter().zip(&rounds.vcg).enumerate() {
            t.row([i.to_string(), num(*g), num(*v)])?;
        }
        t.finish(&dir, &mut record)?;
    }
    record.scalar("samples", samples as f64);
    let z = standard_score(&est.difference);
    record.scalar("difference_z", z);
    println!(
        "GFP {} vs VCG {} over {samples} rounds; difference {} (z = {})",
        est.gfp.mean,
        est.vcg.mean,
        est.difference.mean,
        opt(z)
    );
    ctx.finish(record, &dir)
}

fn standard_score(e: &MeanEstimate) -> Option<f64> {
    e.std_error.filter(|&se| se > 0.0).map(|se| e.mean / se)
}
