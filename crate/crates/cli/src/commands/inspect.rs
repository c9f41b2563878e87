use std::path::PathBuf;

use clap::Args;
use mmtl_core::model::{count_params as total_params, param_breakdown, toy_grad_check, Variant};
use mmtl_core::numerics::GradCheckOptions;

use crate::{CliError, CliResult, ConfigArgs, ExperimentConfig};

#[derive(Debug, Args)]
pub struct CountParamsArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Overrides the config's variant; `all` lists every variant.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Variant to check; all of them when omitted.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Writes the per-tensor reports as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn count_params(a: CountParamsArgs) -> CliResult {
    let cfg = ExperimentConfig::resolve(a.config.config.as_deref(), a.config.preset.as_deref(), "ende")?;
    let variants: Vec<Variant> = match a.variant.as_deref() {
        None => vec![cfg.model.variant],
        Some("all") => Variant::ALL.to_vec(),
        Some(v) => vec![v.parse()?],
    };
    let mut rows = Vec::new();
    for v in variants {
        let m = cfg.model.with_variant(v);
        m.validate()?;
        let total = total_params(&m);
        let groups = param_breakdown(&m);
        if !a.json {
            println!("{v}: {total} parameters ({:.2}M)", total as f64 / 1e6);
            for g in &groups {
                println!("  {:<28} {:>10}  {}", g.group, g.count, g.formula);
            }
        }
        rows.push(serde_json::json!({ "variant": v, "total": total, "breakdown": groups }));
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("counts serialize"));
    }
    Ok(())
}

pub fn grad_check(a: GradCheckArgs) -> CliResult {
    let variants = a.variant.map_or(Variant::ALL.to_vec(), |v| vec![v]);
    let opts = GradCheckOptions { eps: a.eps, tol: a.tol, ..Default::default() };
    let mut failed = Vec::new();
    let mut reports = Vec::new();
    for v in variants {
        let r = toy_grad_check(v, a.seed, opts)?;
        println!("{v:<22} max rel error {:.2e}  {}", r.max_rel_error(), if r.passed() { "ok" } else { "FAILED" });
        if !r.passed() {
            failed.push(format!("{v} ({})", r.failed_tensors().join(", ")));
        }
        reports.push(serde_json::json!({ "variant": v, "report": r }));
    }
    if let Some(out) = &a.out {
        super::create_dir(out)?;
        super::write_file(
            &out.join("grad_check.json"),
            serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("gradient check failed for {}", failed.join("; "))))
    }
}
