use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hoiset_core::assignment::{build_cost_matrix, match_predictions};
use hoiset_core::eval::{binned_ap_analysis, eval_hico as hico, eval_vcoco_scenario, BinMode, Scenario};
use hoiset_core::inference::{decode, top_k_select};
use hoiset_core::io::dataset::{resolve_dataset_path, DatasetFile};
use hoiset_core::io::predictions::{
    DetectionRecord, PredictionFile, PredictionHeader, QueryFile, QueryHeader, QueryRecord,
};
use hoiset_core::io::synth::generate_synthetic;
use hoiset_core::losses::{total_loss, LossBreakdown};
use hoiset_core::model::gradcheck::{gradcheck as check, random_instance, GradcheckOptions};
use hoiset_core::model::{train, HoiModel, ModelConfig, ParamStore, TrainSample};
use hoiset_core::ExecMode;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::{Common, EvalArgs, Failure, ModeArg, ScenarioArg};

fn exec(c: &Common) -> ExecMode {
    if c.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| Failure::Validation(format!("--out is required ({what})")))
}

/// Write `text` to `path`, or to stdout without one.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Prefix failures with the file they came from.
fn at<T>(path: &Path, r: hoiset_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.is_numeric() {
            Failure::Numeric(msg)
        } else {
            Failure::Validation(msg)
        }
    })
}

fn dataset_dir(path: &Path) -> PathBuf {
    resolve_dataset_path(path)
        .parent()
        .map(Path::to_owned)
        .unwrap_or_default()
}

pub fn gen_synth(c: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let out = required(&c.out, "dataset directory")?;
    let (ds, images) = generate_synthetic(&cfg.synth)?;
    fs::create_dir_all(out.join("images"))?;
    for (rec, img) in ds.images.iter().zip(&images) {
        let rel = rec.image.as_ref().expect("generator sets raster paths");
        img.write_to(BufWriter::new(File::create(out.join(rel))?))?;
    }
    ds.save(&out.join(hoiset_core::io::dataset::DATASET_FILE_NAME))?;
    let n_inst: usize = ds.images.iter().map(|r| r.instances.len()).sum();
    let summary = json!({ "images": ds.images.len(), "instances": n_inst, "hoi_classes": ds.header.hoi_classes });
    if let Some(r) = &c.report {
        emit(Some(r), &pretty(&summary)?)?;
    }
    Ok(())
}

fn samples(ds: &DatasetFile, base: &Path) -> Result<Vec<TrainSample>, Failure> {
    (0..ds.images.len())
        .map(|i| {
            Ok(TrainSample {
                image: ds.load_image(base, i)?,
                gts: ds.images[i].instances.clone(),
            })
        })
        .collect()
}

fn model_for(cfg: &RunConfig, ds: &DatasetFile) -> Result<ModelConfig, Failure> {
    let mut m = cfg.model.clone();
    m.n_obj_classes = ds.header.n_obj;
    m.n_act_classes = ds.header.n_act;
    m.validate()?;
    Ok(m)
}

pub fn train_toy(c: &Common, cfg: &RunConfig, data: &Path) -> Result<(), Failure> {
    let out = required(&c.out, "checkpoint path")?;
    let ds = at(data, DatasetFile::load(data))?;
    let samples = samples(&ds, &dataset_dir(data))?;
    let mut model = HoiModel::new(model_for(cfg, &ds)?)?;
    let report = train(&mut model, &samples, &cfg.costs, &cfg.loss, &cfg.train, exec(c))?;
    let meta = json!({
        "model": model.config,
        "costs": cfg.costs,
        "loss": cfg.loss,
        "train": cfg.train,
    });
    model
        .params
        .write_checkpoint(BufWriter::new(File::create(out)?), &meta)?;
    if let Some(r) = &c.report {
        let mut w = BufWriter::new(File::create(r)?);
        for s in &report.log {
            serde_json::to_writer(&mut w, s)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<HoiModel, Failure> {
    let (params, meta): (ParamStore, _) = at(
        path,
        File::open(path)
            .map_err(Into::into)
            .and_then(|f| ParamStore::read_checkpoint(BufReader::new(f))),
    )?;
    let config: ModelConfig = serde_json::from_value(meta.get("model").cloned().unwrap_or_default())
        .map_err(|e| Failure::Validation(format!("checkpoint model config: {e}")))?;
    Ok(HoiModel::new(config)?.with_params(params)?)
}

pub fn predict(
    c: &Common,
    cfg: &RunConfig,
    data: &Path,
    checkpoint: &Path,
    queries: Option<&Path>,
) -> Result<(), Failure> {
    let out = required(&c.out, "detections path")?;
    let ds = at(data, DatasetFile::load(data))?;
    let model = load_model(checkpoint)?;
    if (model.config.n_obj_classes, model.config.n_act_classes) != (ds.header.n_obj, ds.header.n_act) {
        return Err(Failure::Validation("checkpoint and dataset class counts differ".into()));
    }
    let base = dataset_dir(data);
    let per_image = exec(c).map_range(ds.images.len(), |i| -> hoiset_core::Result<_> {
        model.predict(&ds.load_image(&base, i)?)
    });
    let per_image = per_image.into_iter().collect::<hoiset_core::Result<Vec<_>>>()?;
    let header = PredictionHeader {
        n_obj: ds.header.n_obj,
        n_act: ds.header.n_act,
    };
    let det_file = PredictionFile {
        header,
        images: ds
            .images
            .iter()
            .zip(&per_image)
            .map(|(rec, preds)| DetectionRecord {
                id: rec.id.clone(),
                detections: top_k_select(decode(preds, cfg.eval.presence_threshold), cfg.eval.top_k),
            })
            .collect(),
    };
    det_file.save(out)?;
    if let Some(q) = queries {
        QueryFile {
            header: QueryHeader {
                n_obj: header.n_obj,
                n_act: header.n_act,
                n_queries: model.config.n_queries,
            },
            images: ds
                .images
                .iter()
                .zip(per_image)
                .map(|(rec, predictions)| QueryRecord {
                    id: rec.id.clone(),
                    predictions,
                })
                .collect(),
        }
        .save(q)?;
    }
    Ok(())
}

fn gt_and_queries(
    gt: &Path,
    queries: &Path,
) -> Result<(DatasetFile, Vec<Vec<hoiset_core::assignment::Prediction>>), Failure> {
    let ds = at(gt, DatasetFile::load(gt))?;
    let q = at(queries, QueryFile::load(queries))?;
    if (q.header.n_obj, q.header.n_act) != (ds.header.n_obj, ds.header.n_act) {
        return Err(Failure::Validation("query and dataset class counts differ".into()));
    }
    let preds = q.aligned(&ds)?;
    Ok((ds, preds))
}

pub fn match_cmd(c: &Common, cfg: &RunConfig, gt: &Path, queries: &Path) -> Result<(), Failure> {
    let (ds, preds) = gt_and_queries(gt, queries)?;
    let mut rows = Vec::with_capacity(ds.images.len());
    for (rec, p) in ds.images.iter().zip(&preds) {
        let cost = build_cost_matrix(&rec.instances, p, &cfg.costs)?;
        let a = match_predictions(&rec.instances, p, &cfg.costs)?;
        let matrix: Vec<Vec<f64>> = cost.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.push(json!({
            "id": rec.id,
            "cost_matrix": matrix,
            "permutation": a.permutation,
            "n_real": a.n_real,
        }));
    }
    emit(c.out.as_deref(), &pretty(&rows)?)
}

pub fn loss(c: &Common, cfg: &RunConfig, gt: &Path, queries: &Path) -> Result<(), Failure> {
    let (ds, preds) = gt_and_queries(gt, queries)?;
    let mut per_image = Vec::with_capacity(ds.images.len());
    let mut mean = LossBreakdown::default();
    for (rec, p) in ds.images.iter().zip(&preds) {
        let a = match_predictions(&rec.instances, p, &cfg.costs)?;
        let b = total_loss(&rec.instances, p, &a, &cfg.loss);
        if let Some(name) = b.non_finite() {
            return Err(Failure::Numeric(format!(
                "image {:?}: {name} loss is not finite",
                rec.id
            )));
        }
        per_image.push(json!({ "id": rec.id, "loss": b }));
        for (acc, v) in [
            (&mut mean.box_l1, b.box_l1),
            (&mut mean.giou, b.giou),
            (&mut mean.obj_class, b.obj_class),
            (&mut mean.action, b.action),
            (&mut mean.total, b.total),
        ] {
            *acc += v / ds.images.len().max(1) as f64;
        }
    }
    emit(
        c.out.as_deref(),
        &pretty(&json!({ "mean": mean, "images": per_image }))?,
    )
}

fn eval_inputs(e: &EvalArgs) -> Result<(DatasetFile, Vec<Vec<hoiset_core::inference::HoiDetection>>), Failure> {
    let ds = at(&e.gt, DatasetFile::load(&e.gt))?;
    let dets = at(&e.pred, PredictionFile::load(&e.pred))?.aligned(&ds)?;
    Ok((ds, dets))
}

pub fn eval_hico(c: &Common, cfg: &RunConfig, e: &EvalArgs, counts: Option<&Path>) -> Result<(), Failure> {
    let (ds, dets) = eval_inputs(e)?;
    let classes = match counts {
        Some(p) => at(p, DatasetFile::load(p))?.header.hoi_classes,
        None => ds.header.hoi_classes.clone(),
    };
    let r = hico(&dets, &ds.ground_truths(), &classes, &cfg.eval, exec(c))?;
    emit(c.report.as_deref(), &r.to_text())?;
    if let Some(o) = &c.out {
        emit(Some(o), &pretty(&r)?)?;
    }
    Ok(())
}

pub fn eval_vcoco(c: &Common, cfg: &RunConfig, e: &EvalArgs, scenario: Option<ScenarioArg>) -> Result<(), Failure> {
    let (ds, dets) = eval_inputs(e)?;
    let scenarios = match scenario {
        Some(ScenarioArg::One) => vec![Scenario::One],
        Some(ScenarioArg::Two) => vec![Scenario::Two],
        Some(ScenarioArg::Both) => vec![Scenario::One, Scenario::Two],
        None => cfg
            .eval
            .vcoco_scenario
            .map_or(vec![Scenario::One, Scenario::Two], |s| vec![s]),
    };
    let gts = ds.ground_truths();
    let reports = scenarios
        .iter()
        .map(|&s| eval_vcoco_scenario(&dets, &gts, ds.header.n_act, &cfg.eval, s, exec(c)))
        .collect::<hoiset_core::Result<Vec<_>>>()?;
    let text: String = reports.iter().map(|r| r.to_text()).collect();
    emit(c.report.as_deref(), &text)?;
    if let Some(o) = &c.out {
        emit(Some(o), &pretty(&reports)?)?;
    }
    Ok(())
}

pub fn bin_analysis(c: &Common, cfg: &RunConfig, e: &EvalArgs, mode: ModeArg, bin_width: f64) -> Result<(), Failure> {
    let (ds, dets) = eval_inputs(e)?;
    let mode = match mode {
        ModeArg::Distance => BinMode::Distance,
        ModeArg::Area => BinMode::Area,
    };
    let r = binned_ap_analysis(&dets, &ds.ground_truths(), mode, bin_width, &cfg.eval, exec(c))?;
    emit(c.out.as_deref(), &r.to_csv())?;
    if let Some(rep) = &c.report {
        emit(Some(rep), &pretty(&r)?)?;
    }
    Ok(())
}

pub fn gradcheck(c: &Common, cfg: &RunConfig, tol: f64, step: f64, instances: usize) -> Result<(), Failure> {
    let opts = GradcheckOptions {
        step,
        rel_tol: tol,
        ..GradcheckOptions::default()
    };
    let base = HoiModel::new(cfg.model.clone())?;
    let seed = c.seed.unwrap_or(0);
    let mut summaries = Vec::with_capacity(instances);
    let mut failed = 0usize;
    for k in 0..instances as u64 {
        let (m, img, gts) = random_instance(&base, seed + k);
        let r = check(&m, &img, &gts, &cfg.costs, &cfg.loss, &opts, exec(c))?;
        failed += r.failures.len();
        summaries.push(json!({
            "instance": k,
            "checked": r.n_checked,
            "max_abs_error": r.max_abs_error,
            "max_rel_error": r.max_rel_error,
            "failures": r.failures.iter().take(20).collect::<Vec<_>>(),
        }));
    }
    emit(c.report.as_deref().or(c.out.as_deref()), &pretty(&summaries)?)?;
    if failed > 0 {
        return Err(Failure::Numeric(format!(
            "{failed} gradient entries disagree with finite differences"
        )));
    }
    Ok(())
}
