use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use dfgp::data::{
    format_timestamp, load_long_csv, parse_timestamp, split_train_eval, synth_generate,
    write_ground_truth_csv, TimeSeriesDataset,
};
use dfgp::metrics::{evaluate, quantile_key, EvalReport};
use dfgp::model::{forecast, train, ForecastRequest, ForecastResult, TrainHistory, TrainingData};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Train-tail length written to plot data.
const PLOT_HISTORY: usize = 72;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    dfgp::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}

pub fn load_dataset(path: &Path, config: &RunConfig) -> CliResult<TimeSeriesDataset> {
    let mut ds = load_long_csv(path, &config.columns)?;
    ds.features = config.features.clone();
    Ok(ds)
}

pub struct SynthSummary {
    pub data: PathBuf,
    pub truth: PathBuf,
    pub rows: usize,
}

/// Write `data.csv`, `truth.csv` and `config.echo` into `out`.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> CliResult<SynthSummary> {
    create_dir(out)?;
    let generated = synth_generate(&config.synth)?;
    let data = out.join("data.csv");
    let truth = out.join("truth.csv");
    generated.dataset.write_long_csv(&data)?;
    write_ground_truth_csv(&generated, &truth)?;
    write_file(&out.join("config.echo"), &config.echo())?;
    Ok(SynthSummary {
        data,
        truth,
        rows: generated.dataset.num_series() * generated.dataset.len(),
    })
}

pub fn write_history(history: &TrainHistory, path: &Path) -> CliResult<()> {
    let mut text = String::from("epoch,nll,grad_norm,seconds\n");
    for e in &history.epochs {
        text.push_str(&format!("{},{},{},{}\n", e.epoch, e.nll, e.grad_norm, e.seconds));
    }
    write_file(path, &text)
}

pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: TrainHistory,
}

/// Fit on the training window that precedes the last `horizon` points, so a
/// default `forecast` backtests on data the model never saw.
pub fn cmd_train(config: &RunConfig, data: &Path, out: &Path) -> CliResult<TrainSummary> {
    let ds = load_dataset(data, config)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{} holds no series", data.display())));
    }
    let split = split_train_eval(&ds, config.model.train_window, config.model.horizon)?;
    let training = TrainingData::from_split(&split)?;
    let (params, history) = train(&training, &config.model)?;
    if history.skipped_steps > 0 {
        log::warn!("{} optimizer steps were skipped", history.skipped_steps);
    }

    create_dir(out)?;
    let checkpoint = out.join("model.ckpt");
    Checkpoint::new(config, params).save(&checkpoint)?;
    write_history(&history, &out.join("history.csv"))?;
    let mut echo = config.clone();
    echo.data_path = Some(data.to_path_buf());
    echo.out_dir = Some(out.to_path_buf());
    write_file(&out.join("config.echo"), &echo.echo())?;
    Ok(TrainSummary {
        checkpoint,
        history,
    })
}

#[derive(Clone, Debug)]
pub struct ForecastOptions {
    pub horizon: Option<usize>,
    /// Forecast past the last observation instead of backtesting the final span.
    pub from_end: bool,
    pub plot_data: Option<PathBuf>,
}

fn sorted_levels(levels: &[f64]) -> Vec<f64> {
    let mut q = levels.to_vec();
    q.sort_by(|a, b| a.total_cmp(b));
    q.dedup();
    q
}

pub fn write_forecast_csv(results: &[ForecastResult], levels: &[f64], path: &Path) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["series_id".to_string(), "timestamp".into(), "mean".into(), "variance".into()];
    header.extend(levels.iter().map(|q| quantile_key(*q)));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in results {
        for t in 0..r.timestamps.len() {
            let mut row = vec![
                r.series_id.clone(),
                format_timestamp(&r.timestamps[t]),
                r.mean[t].to_string(),
                r.variance[t].to_string(),
            ];
            for q in levels {
                let values = r.quantile(*q).unwrap_or(&[]);
                row.push(values[t].to_string());
            }
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_plot_data(
    request: &ForecastRequest,
    history_times: &[chrono::DateTime<chrono::Utc>],
    actuals: Option<&[Vec<f64>]>,
    results: &[ForecastResult],
    levels: &[f64],
    path: &Path,
) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let header = ["series_id", "timestamp", "segment", "observed", "mean", "lower", "upper"];
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    let (lo, hi) = (levels[0], levels[levels.len() - 1]);
    for (b, r) in results.iter().enumerate() {
        let ctx = &request.context[b];
        let start = ctx.len().saturating_sub(PLOT_HISTORY);
        for t in start..ctx.len() {
            let row = [
                r.series_id.clone(),
                format_timestamp(&history_times[t]),
                "history".into(),
                ctx[t].to_string(),
                String::new(),
                String::new(),
                String::new(),
            ];
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        for t in 0..r.timestamps.len() {
            let observed = actuals.map(|a| a[b][t].to_string()).unwrap_or_default();
            let row = [
                r.series_id.clone(),
                format_timestamp(&r.timestamps[t]),
                "forecast".into(),
                observed,
                r.mean[t].to_string(),
                r.quantile(lo).map(|v| v[t].to_string()).unwrap_or_default(),
                r.quantile(hi).map(|v| v[t].to_string()).unwrap_or_default(),
            ];
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn cmd_forecast(
    ckpt: &Path,
    data: &Path,
    out: &Path,
    options: &ForecastOptions,
) -> CliResult<Vec<ForecastResult>> {
    let checkpoint = Checkpoint::load(ckpt)?;
    let config = &checkpoint.config;
    let ds = load_dataset(data, config)?;
    if let Some(unknown) = ds
        .series
        .iter()
        .find(|s| checkpoint.params.series_index(&s.id).is_err())
    {
        return Err(dfgp::Error::UnknownSeries(unknown.id.clone()).into());
    }
    let horizon = options.horizon.unwrap_or(config.model.horizon);
    let window = config.model.train_window;
    let levels = sorted_levels(&config.model.quantiles);

    let (request, history_times, actuals) = if options.from_end {
        let req = ForecastRequest::beyond_end(&ds, window, horizon)?;
        let times = ds.timestamps()[ds.len() - window..].to_vec();
        (req, times, None)
    } else {
        let split = split_train_eval(&ds, window, horizon)?;
        let req = ForecastRequest::from_split(&split);
        (req, split.train_timestamps.clone(), Some(split.eval_values))
    };
    let results = forecast(&checkpoint.params, &request, &levels, config.model.softmax_loadings)?;
    write_forecast_csv(&results, &levels, out)?;
    if let Some(plot) = &options.plot_data {
        write_plot_data(&request, &history_times, actuals.as_deref(), &results, &levels, plot)?;
    }
    Ok(results)
}

/// Parsed `series_id,timestamp,mean,variance,p..` rows.
struct ForecastTable {
    keys: Vec<(String, String)>,
    means: Vec<f64>,
    quantiles: Vec<(f64, Vec<f64>)>,
}

fn parse_float(path: &Path, line: u64, raw: &str) -> CliResult<f64> {
    raw.trim().parse().map_err(|_| {
        dfgp::Error::Parse {
            path: path.to_path_buf(),
            line,
            detail: format!("bad number '{raw}'"),
        }
        .into()
    })
}

fn normalize_time(path: &Path, line: u64, raw: &str) -> CliResult<String> {
    parse_timestamp(raw).map(|t| format_timestamp(&t)).ok_or_else(|| {
        dfgp::Error::Parse {
            path: path.to_path_buf(),
            line,
            detail: format!("bad timestamp '{raw}'"),
        }
        .into()
    })
}

fn open_csv(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn column(headers: &csv::StringRecord, path: &Path, name: &str) -> CliResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        dfgp::Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            detail: format!("missing column '{name}'"),
        }
        .into()
    })
}

fn read_forecast_table(path: &Path) -> CliResult<ForecastTable> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let id = column(&headers, path, "series_id")?;
    let ts = column(&headers, path, "timestamp")?;
    let mean = column(&headers, path, "mean")?;
    let quantile_cols: Vec<(usize, f64)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let pct: f64 = h.strip_prefix('p')?.parse().ok()?;
            (pct > 0.0 && pct < 100.0).then_some((i, pct / 100.0))
        })
        .collect();
    let mut table = ForecastTable {
        keys: Vec::new(),
        means: Vec::new(),
        quantiles: quantile_cols.iter().map(|(_, q)| (*q, Vec::new())).collect(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        table
            .keys
            .push((field(id).to_string(), normalize_time(path, line, field(ts))?));
        table.means.push(parse_float(path, line, field(mean))?);
        for ((col, _), (_, values)) in quantile_cols.iter().zip(table.quantiles.iter_mut()) {
            values.push(parse_float(path, line, field(*col))?);
        }
    }
    Ok(table)
}

fn read_actuals(path: &Path) -> CliResult<HashMap<(String, String), f64>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let id = column(&headers, path, "series_id")?;
    let ts = column(&headers, path, "timestamp")?;
    let value = column(&headers, path, "value")?;
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let key = (field(id).to_string(), normalize_time(path, line, field(ts))?);
        out.insert(key, parse_float(path, line, field(value))?);
    }
    Ok(out)
}

/// Flat `key=value` pairs of a report, in a stable order.
pub fn report_entries(report: &EvalReport) -> Vec<(String, String)> {
    let mut entries = Vec::new();
    for (q, v) in &report.quantile_losses {
        entries.push((format!("{}ql", quantile_key(*q)), v.to_string()));
    }
    entries.push(("rmse".into(), report.rmse.to_string()));
    for (lo, hi, c) in &report.coverage {
        entries.push((
            format!("coverage_{}_{}", quantile_key(*lo), quantile_key(*hi)),
            c.to_string(),
        ));
    }
    entries.push(("n_points".into(), report.n_points.to_string()));
    entries.push(("horizon".into(), report.horizon.to_string()));
    entries
}

/// The JSON companion of a `--out` report path.
pub fn json_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut s = out.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    } else {
        out.with_extension("json")
    }
}

pub fn cmd_evaluate(forecast_path: &Path, actuals_path: &Path, out: &Path) -> CliResult<EvalReport> {
    let table = read_forecast_table(forecast_path)?;
    let actuals = read_actuals(actuals_path)?;
    let missing: Vec<String> = table
        .keys
        .iter()
        .filter(|k| !actuals.contains_key(*k))
        .map(|(id, ts)| format!("{id}@{ts}"))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::KeyMismatch {
            count: missing.len(),
            offenders: missing.into_iter().take(10).collect(),
        });
    }
    let targets: Vec<f64> = table.keys.iter().map(|k| actuals[k]).collect();
    let mut per_series: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, _) in &table.keys {
        *per_series.entry(id.as_str()).or_default() += 1;
    }
    let horizon = per_series.values().copied().max().unwrap_or(0);
    let report = evaluate(&targets, &table.means, &table.quantiles, horizon)?;

    let entries = report_entries(&report);
    let mut text = String::new();
    let mut json = serde_json::Map::new();
    for (k, v) in &entries {
        text.push_str(&format!("{k}={v}\n"));
        let value = match v.parse::<u64>() {
            Ok(n) => serde_json::Value::from(n),
            Err(_) => v
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| serde_json::Value::String(v.clone())),
        };
        json.insert(k.clone(), value);
    }
    write_file(out, &text)?;
    let rendered = serde_json::to_string_pretty(&serde_json::Value::Object(json))
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&json_path(out), &(rendered + "\n"))?;
    Ok(report)
}
