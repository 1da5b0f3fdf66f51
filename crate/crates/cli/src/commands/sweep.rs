//! `sweep`: evaluate across variation levels and an optional hyperparameter
//! grid, one report per grid point plus a flat CSV over everything.

use std::fmt::Write as _;
use std::path::Path;

use rdiffbr_core::eval::{rho_sweep, EvalReport, Variant, VariantModel};
use rdiffbr_core::{Error, Result};

use crate::config::RunConfig;
use crate::pipeline::{
    experiment_seeds, inference_settings, obtain_role, prepare_dataset, resolve_run_dir,
    write_snapshot, write_text, Role,
};

/// One grid axis: which knob to vary and the values to try.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GridKey {
    Lambda,
    Delta,
    StepDim,
}

impl GridKey {
    fn parse(name: &str) -> Result<GridKey> {
        match name {
            "lambda" => Ok(GridKey::Lambda),
            "delta" => Ok(GridKey::Delta),
            "d" => Ok(GridKey::StepDim),
            other => Err(Error::invalid(
                "grid",
                format!("unknown key {other:?}; expected lambda, delta or d"),
            )),
        }
    }

    fn apply(self, cfg: &mut RunConfig, raw: &str) -> Result<()> {
        match self {
            GridKey::Lambda => {
                let v: f64 = parse_num(raw, "grid lambda")?;
                if !(v > 0.0 && v < 5.0) {
                    return Err(Error::invalid("training.lambda", "must lie in (0, 5)"));
                }
                cfg.training.lambda = v;
            }
            GridKey::Delta => {
                let v: f64 = parse_num(raw, "grid delta")?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::invalid("approximator.delta", "must lie in (0, 1]"));
                }
                cfg.approximator.delta = v;
            }
            GridKey::StepDim => {
                let v: usize = parse_num(raw, "grid d")?;
                if v == 0 {
                    return Err(Error::invalid("approximator.step_dim", "must be positive"));
                }
                cfg.approximator.step_dim = v;
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::invalid(what, format!("cannot parse {raw:?}")))
}

/// Parse `--grid key=v1,v2,...` occurrences into axes.
fn parse_grid(specs: &[String]) -> Result<Vec<(GridKey, Vec<String>)>> {
    let mut axes = Vec::with_capacity(specs.len());
    for spec in specs {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid("grid", format!("expected key=values, got {spec:?}")))?;
        let key = GridKey::parse(name)?;
        let values: Vec<String> = values
            .split(',')
            .filter(|v| !v.is_empty())
            .map(str::to_string)
            .collect();
        if values.is_empty() {
            return Err(Error::invalid("grid", format!("no values for key {name:?}")));
        }
        axes.push((key, values));
    }
    Ok(axes)
}

/// Parse `--rhos` as either a comma list (`-3,0,3`) or an inclusive range
/// (`-4..5`).
pub fn parse_rhos(raw: &str) -> Result<Vec<i32>> {
    if let Some((lo, hi)) = raw.split_once("..") {
        let lo: i32 = parse_num(lo, "rhos")?;
        let hi: i32 = parse_num(hi, "rhos")?;
        if lo > hi {
            return Err(Error::invalid("rhos", format!("empty range {raw:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    let values: Result<Vec<i32>> = raw
        .split(',')
        .filter(|v| !v.is_empty())
        .map(|v| parse_num(v, "rhos"))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err(Error::invalid("rhos", "need at least one variation level"));
    }
    Ok(values)
}

pub fn run(
    cfg: &RunConfig,
    run_dir: Option<&Path>,
    rhos_flag: Option<&str>,
    grid_specs: &[String],
    train_first: bool,
) -> Result<()> {
    let axes = parse_grid(grid_specs)?;
    let rhos = match rhos_flag {
        Some(raw) => parse_rhos(raw)?,
        None => cfg.eval.rhos.clone(),
    };

    let base_hash = cfg.hash8();
    let dir = resolve_run_dir("sweep", cfg, &base_hash, run_dir)?;
    write_snapshot(&dir, cfg, &base_hash)?;

    // Cartesian product over the axes, last axis fastest.
    let mut points: Vec<Vec<(GridKey, String)>> = vec![Vec::new()];
    for (key, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut point = prefix.clone();
                    point.push((*key, v.clone()));
                    point
                })
            })
            .collect();
    }

    let seeds = experiment_seeds(cfg);
    let mut csv = String::from("lambda,delta,d,rho,K,variant,seed,recall,ndcg\n");
    for point in &points {
        let mut point_cfg = cfg.clone();
        for (key, raw) in point {
            key.apply(&mut point_cfg, raw)?;
        }
        let point_hash = point_cfg.hash8();

        let mut reports = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let (bb_only, _) =
                obtain_role(&dir, &point_cfg, &point_hash, seed, Role::BackboneOnly, train_first)?;
            let (joint_bb, joint_approx) =
                obtain_role(&dir, &point_cfg, &point_hash, seed, Role::Joint, train_first)?;
            let approx = joint_approx.as_ref().expect("joint role has an approximator");
            let models = [
                VariantModel {
                    variant: Variant::Backbone,
                    backbone: &bb_only,
                    approx: None,
                },
                VariantModel {
                    variant: Variant::RDiffBr,
                    backbone: &joint_bb,
                    approx: Some(approx),
                },
            ];
            let (data, partition) = prepare_dataset(&point_cfg, seed)?;
            reports.push(rho_sweep(
                &models,
                &data,
                &partition,
                &crate::pipeline::build_schedule(&point_cfg)?,
                &inference_settings(&point_cfg, seed),
                &rhos,
                &point_cfg.eval.ks,
                seed,
            )?);
        }
        let report = EvalReport::merged(reports)?;

        for row in report.rows() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                point_cfg.training.lambda,
                point_cfg.approximator.delta,
                point_cfg.approximator.step_dim,
                row.rho,
                row.k,
                row.variant,
                row.seed,
                row.recall,
                row.ndcg
            )
            .expect("string write");
        }

        let metadata = serde_json::json!({
            "command": "sweep",
            "base_config_hash": base_hash,
            "config_hash": point_hash,
            "lambda": point_cfg.training.lambda,
            "delta": point_cfg.approximator.delta,
            "d": point_cfg.approximator.step_dim,
            "rhos": rhos,
            "ks": point_cfg.eval.ks,
            "seeds": seeds,
        });
        report.write_json(&dir.join(format!("report-{point_hash}.json")), &metadata)?;
    }

    let csv_path = dir.join(format!("sweep-{base_hash}.csv"));
    write_text(&csv_path, &csv)?;
    println!(
        "swept {} grid point(s) x {} level(s) x {} seed(s); reports at {}",
        points.len(),
        rhos.len(),
        seeds.len(),
        dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_ranges_are_inclusive_on_both_ends() {
        assert_eq!(parse_rhos("-4..5").unwrap(), (-4..=5).collect::<Vec<_>>());
        assert_eq!(parse_rhos("-3,0,3").unwrap(), vec![-3, 0, 3]);
        assert_eq!(parse_rhos("2").unwrap(), vec![2]);
        assert!(parse_rhos("5..1").is_err());
        assert!(parse_rhos("").is_err());
    }

    #[test]
    fn grid_axes_reject_unknown_keys_and_empty_values() {
        assert!(parse_grid(&["lambda=0.5,1".into()]).is_ok());
        assert!(parse_grid(&["gamma=1".into()]).is_err());
        assert!(parse_grid(&["lambda=".into()]).is_err());
        assert!(parse_grid(&["lambda".into()]).is_err());
    }
}
