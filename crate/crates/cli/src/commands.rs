use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;
use serde_json::json;

use vprog::bench::{corpus_to_jsonl, generate_corpus, generate_skill, Skill, SkillPrompt, Vocab};
use vprog::dsl::{parse_program, print_program, validate_semantics, Severity};
use vprog::layout::{
    validate_layout, LayoutOptions, LayoutSpec, ObjectCount, Placement, QuantizedBox,
};
use vprog::modules::ModuleConfig;
use vprog::perception::{
    BBox, FixtureBackend, FixtureMode, PerceptionBackend, RemoteBackend, RemoteConfig,
};
use vprog::progen::{
    build_icl_request, coverage_stats, ExemplarSet, GenConfig, GenError, ProgramGenerator,
};
use vprog::report::{render_overlay, render_text_report, summarize, GroupBy};
use vprog::runner::{run_batch, BatchItem, ErrorPolicy, EvalReport, RunConfig};
use vprog::stats::{
    cohen_kappa, krippendorff_alpha, spearman_rho, AnnotationMatrix, Metric, StatsError,
};

use crate::{
    diag, parse_dims, read_input, read_json_map, write_output, AlphaScale, BenchGenerateArgs,
    CmdResult, CorrelateArgs, EvalRunArgs, Failure, GroupArg, LayoutCmd, MetricArg, PolicyArg,
    ProgramCmd, ProgramGenArgs, RenderFormat, ReportCmd, TableFormat,
};

pub fn bench_generate(a: BenchGenerateArgs) -> CmdResult {
    let vocab = match &a.vocab {
        Some(p) => {
            let text = read_input(Some(p))?;
            serde_json::from_str::<Vocab>(&text)
                .with_context(|| format!("invalid vocabulary {}", p.display()))?
        }
        None => Vocab::default(),
    };
    vocab.validate().map_err(|e| anyhow!(e))?;
    let prompts: Vec<SkillPrompt> = if a.skill == "all" {
        generate_corpus(&vocab, a.seed)
            .map_err(|e| anyhow!(e))?
            .into_values()
            .flatten()
            .collect()
    } else {
        let skill: Skill = a.skill.parse().map_err(|e| anyhow!("{e}"))?;
        generate_skill(&vocab, skill, a.seed).map_err(|e| anyhow!(e))?
    };
    write_output(a.out.as_deref(), &corpus_to_jsonl(&prompts))?;
    diag("info", "generated", &format!("{} prompts", prompts.len()));
    Ok(())
}

#[derive(Deserialize)]
struct CorpusLine {
    id: String,
    prompt: String,
    program: String,
    #[serde(default)]
    skill: Option<String>,
}

fn load_corpus(
    path: &Path,
    images: &std::collections::BTreeMap<String, String>,
    model: &Option<String>,
) -> anyhow::Result<Vec<BatchItem>> {
    let text = read_input(Some(path))?;
    let mut items = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), n + 1);
        let c: CorpusLine =
            serde_json::from_str(line).with_context(|| format!("{}: invalid corpus line", at()))?;
        let program = parse_program(&c.program).map_err(|e| anyhow!("{}: program: {e}", at()))?;
        let image = images
            .get(&c.id)
            .ok_or_else(|| anyhow!("{}: no image mapped for id {:?}", at(), c.id))?;
        items.push(BatchItem {
            image: image.clone(),
            program,
            prompt: c.prompt,
            id: Some(c.id),
            skill: c.skill,
            model: model.clone(),
        });
    }
    Ok(items)
}

pub fn eval_run(a: EvalRunArgs) -> CmdResult {
    let cfg = RunConfig {
        modules: ModuleConfig {
            box_threshold: a.box_threshold,
            scale_tau: a.tau,
        },
        error_policy: match a.error_policy {
            PolicyArg::CountAsZero => ErrorPolicy::CountAsZero,
            PolicyArg::Exclude => ErrorPolicy::Exclude,
        },
    };
    cfg.modules.validate().map_err(|e| anyhow!(e))?;
    if a.parallel == 0 {
        return Err(anyhow!("--parallel must be at least 1").into());
    }
    let images = read_json_map(&a.images)?;
    let items = load_corpus(&a.corpus, &images, &a.model)?;

    let backend: Box<dyn PerceptionBackend> = match (&a.fixture, &a.backend_url) {
        (Some(f), _) => {
            let mode = if a.strict_fixture {
                FixtureMode::Strict
            } else {
                FixtureMode::Lenient
            };
            Box::new(
                FixtureBackend::load(f)
                    .map_err(|e| anyhow!(e))?
                    .with_mode(mode),
            )
        }
        (None, url) => {
            let url = url
                .clone()
                .or_else(|| {
                    std::env::var("VPE_BACKEND_URL")
                        .ok()
                        .filter(|s| !s.is_empty())
                })
                .ok_or_else(|| {
                    anyhow!("select a backend with --fixture or --backend-url (or VPE_BACKEND_URL)")
                })?;
            let remote = RemoteBackend::new(
                url,
                RemoteConfig {
                    retries: a.retries,
                    ..Default::default()
                },
            );
            remote.health().map_err(|e| Failure::Backend(anyhow!(e)))?;
            Box::new(remote)
        }
    };

    let out = run_batch(backend.as_ref(), &items, a.parallel, &cfg).map_err(|e| anyhow!(e))?;
    write_output(a.out.as_deref(), &out.to_jsonl())?;
    let errored = out.summary.errored_statements;
    if errored > 0 {
        return Err(Failure::Findings(format!("{errored} errored statement(s)")));
    }
    Ok(())
}

fn parse_input(file: Option<&Path>) -> Result<vprog::dsl::EvalProgram, Failure> {
    let src = read_input(file)?;
    parse_program(&src).map_err(|e| Failure::Findings(format!("parse error at {e}")))
}

pub fn program(cmd: ProgramCmd) -> CmdResult {
    match cmd {
        ProgramCmd::Parse { input, ast_json } => {
            let p = parse_input(input.file.as_deref())?;
            let text = if ast_json {
                serde_json::to_string_pretty(&p).expect("AST serializes") + "\n"
            } else {
                print_program(&p) + "\n"
            };
            write_output(None, &text)?;
        }
        ProgramCmd::Fmt { input } => {
            let p = parse_input(input.file.as_deref())?;
            write_output(None, &(print_program(&p) + "\n"))?;
        }
        ProgramCmd::Validate { input } => {
            let p = parse_input(input.file.as_deref())?;
            let diags = validate_semantics(&p);
            let mut text = String::new();
            for d in &diags {
                text.push_str(&format!("{d}\n"));
            }
            write_output(None, &text)?;
            let errors = diags
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count();
            if errors > 0 {
                return Err(Failure::Findings(format!("{errors} semantic error(s)")));
            }
        }
        ProgramCmd::Gen(a) => program_gen(a)?,
    }
    Ok(())
}

fn program_gen(a: ProgramGenArgs) -> CmdResult {
    let exemplars = match &a.exemplars {
        Some(p) => ExemplarSet::load(p).map_err(|e| anyhow!(e))?,
        None => ExemplarSet::bundled(),
    };
    if exemplars.exemplars.is_empty() {
        diag(
            "warning",
            "empty-exemplars",
            "exemplar set is empty; the request has no examples",
        );
    }
    if a.print_request {
        write_output(None, &build_icl_request(&a.prompt, &exemplars))?;
        return Ok(());
    }
    let defaults = GenConfig::default();
    let cfg = GenConfig {
        endpoint: a
            .endpoint
            .clone()
            .or_else(|| std::env::var("VPE_LLM_URL").ok().filter(|s| !s.is_empty()))
            .unwrap_or(defaults.endpoint.clone()),
        api_key: std::env::var("VPE_LLM_KEY").ok().filter(|s| !s.is_empty()),
        model: a.model.clone(),
        temperature: a.temperature,
        max_retries: a.max_retries,
        offline_fixture: a.offline_fixture.clone(),
        reprompt_on_all_invalid: a.reprompt,
        ..defaults
    };
    let generator = ProgramGenerator::from_config(&cfg, exemplars).map_err(|e| anyhow!(e))?;
    let generated = match generator.generate(&a.prompt) {
        Ok(g) => g,
        Err(e @ GenError::Endpoint { .. }) => return Err(Failure::Backend(anyhow!(e))),
        Err(GenError::AllStatementsInvalid {
            dropped,
            diagnostics,
        }) => {
            for d in &diagnostics {
                diag(
                    "warning",
                    "dropped-statement",
                    &format!("{}: {}", d.text, d.message),
                );
            }
            return Err(Failure::Findings(format!(
                "no valid statement in completion ({dropped} dropped)"
            )));
        }
        Err(e) => return Err(anyhow!(e).into()),
    };
    for d in &generated.diagnostics {
        let code = serde_json::to_value(d.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        diag("warning", &code, &format!("{}: {}", d.text, d.message));
    }
    let program = print_program(&generated.program);
    let text = if a.json {
        let value = json!({
            "prompt": a.prompt,
            "program": program,
            "diagnostics": generated.diagnostics,
            "coverage": coverage_stats(&a.prompt, &generated.program),
        });
        value.to_string() + "\n"
    } else {
        program + "\n"
    };
    write_output(None, &text)?;
    Ok(())
}

#[derive(Deserialize)]
struct LayoutJson {
    objects: Vec<ObjectCount>,
    placements: Vec<PlacementJson>,
}

#[derive(Deserialize)]
struct PlacementJson {
    description: String,
    #[serde(rename = "box")]
    bbox: BBox,
}

pub fn layout(cmd: LayoutCmd) -> CmdResult {
    match cmd {
        LayoutCmd::Encode { file, max_count } => {
            let text = read_input(file.as_deref())?;
            let input: LayoutJson = serde_json::from_str(&text).context("invalid layout JSON")?;
            let placements = input
                .placements
                .into_iter()
                .map(|p| Placement {
                    description: p.description,
                    bbox: QuantizedBox::from_bbox(&p.bbox),
                })
                .collect();
            let spec = validate_layout(input.objects, placements).map_err(|e| anyhow!(e))?;
            let (objects, placements) = spec.print();
            let opts = LayoutOptions {
                max_count,
                strict: true,
            };
            LayoutSpec::parse(&objects, &placements, &opts).map_err(|e| anyhow!(e))?;
            write_output(None, &format!("{objects}\n{placements}\n"))?;
        }
        LayoutCmd::Decode {
            file,
            json,
            max_count,
            strict,
        } => {
            let text = read_input(file.as_deref())?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let objects = lines
                .next()
                .ok_or_else(|| anyhow!("missing object-count line"))?;
            let placements = lines.next().unwrap_or("");
            if lines.next().is_some() {
                return Err(anyhow!("expected two lines: object counts, then placements").into());
            }
            let parsed =
                LayoutSpec::parse(objects, placements, &LayoutOptions { max_count, strict })
                    .map_err(|e| Failure::Findings(format!("invalid layout: {e}")))?;
            for w in &parsed.warnings {
                diag("warning", "layout", w);
            }
            let spec = parsed.value;
            let out = if json {
                let placements: Vec<_> = spec
                    .placements
                    .iter()
                    .map(|p| json!({"description": p.description, "box": p.bbox, "normalized": p.bbox.to_bbox()}))
                    .collect();
                json!({"objects": spec.objects, "placements": placements}).to_string() + "\n"
            } else {
                let (o, p) = spec.print();
                format!("{o}\n{p}\n")
            };
            write_output(None, &out)?;
        }
    }
    Ok(())
}

fn column_indices(
    headers: &csv::StringRecord,
    wanted: &[String],
    default: usize,
) -> anyhow::Result<Vec<usize>> {
    if wanted.is_empty() {
        if headers.len() < default {
            bail!(
                "CSV needs at least {default} columns, has {}",
                headers.len()
            );
        }
        return Ok((0..if default == 0 { headers.len() } else { default }).collect());
    }
    wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h == w)
                .ok_or_else(|| anyhow!("no column {w:?} in CSV header"))
        })
        .collect()
}

pub fn correlate(a: CorrelateArgs) -> CmdResult {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&a.csv)
        .with_context(|| format!("cannot read {}", a.csv.display()))?;
    let headers = reader.headers().context("CSV header row required")?.clone();
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .with_context(|| format!("malformed CSV {}", a.csv.display()))?;
    let cell = |r: &csv::StringRecord, j: usize| r.get(j).unwrap_or("").to_string();

    let (name, result, n) = match a.metric {
        MetricArg::Spearman | MetricArg::Kappa => {
            let cols = column_indices(&headers, &a.columns, 2)?;
            if cols.len() != 2 {
                return Err(anyhow!(
                    "{} needs exactly two columns",
                    if matches!(a.metric, MetricArg::Kappa) {
                        "kappa"
                    } else {
                        "spearman"
                    }
                )
                .into());
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (i, r) in records.iter().enumerate() {
                let (x, y) = (cell(r, cols[0]), cell(r, cols[1]));
                if x.is_empty() || y.is_empty() {
                    return Err(anyhow!(
                        "row {}: missing cell (only alpha accepts missing values)",
                        i + 2
                    )
                    .into());
                }
                xs.push(x);
                ys.push(y);
            }
            if matches!(a.metric, MetricArg::Kappa) {
                ("kappa", cohen_kappa(&xs, &ys), xs.len())
            } else {
                let num = |v: &[String]| -> anyhow::Result<Vec<f64>> {
                    v.iter()
                        .map(|s| {
                            s.parse::<f64>()
                                .with_context(|| format!("{s:?} is not a number"))
                        })
                        .collect()
                };
                ("spearman", spearman_rho(&num(&xs)?, &num(&ys)?), xs.len())
            }
        }
        MetricArg::Alpha => {
            let cols = column_indices(&headers, &a.columns, 0)?;
            let cells: Vec<Vec<String>> = cols
                .iter()
                .map(|&j| records.iter().map(|r| cell(r, j)).collect())
                .collect();
            let numeric = cells
                .iter()
                .flatten()
                .filter(|s| !s.is_empty())
                .all(|s| s.parse::<f64>().is_ok());
            let metric = match a.alpha_metric {
                AlphaScale::Nominal => Metric::Nominal,
                AlphaScale::Interval => Metric::Interval,
            };
            if !numeric && metric == Metric::Interval {
                return Err(anyhow!("interval alpha needs numeric cells").into());
            }
            let mut labels: Vec<&String> =
                cells.iter().flatten().filter(|s| !s.is_empty()).collect();
            labels.sort();
            labels.dedup();
            let value = |s: &String| -> Option<f64> {
                if s.is_empty() {
                    None
                } else if numeric {
                    s.parse().ok()
                } else {
                    labels.binary_search(&s).ok().map(|i| i as f64)
                }
            };
            let rows: Vec<Vec<Option<f64>>> = cells
                .iter()
                .map(|c| c.iter().map(value).collect())
                .collect();
            let m = AnnotationMatrix::new(rows).map_err(|e| anyhow!(e))?;
            ("alpha", krippendorff_alpha(&m, metric), records.len())
        }
    };
    let text = match (&result, a.json) {
        (Ok(v), false) => format!("{name} = {v}\n"),
        (Err(StatsError::Undefined(why)), false) => format!("{name} = undefined ({why})\n"),
        (Ok(v), true) => json!({"metric": name, "value": v, "n": n}).to_string() + "\n",
        (Err(StatsError::Undefined(why)), true) => {
            json!({"metric": name, "value": null, "undefined": why, "n": n}).to_string() + "\n"
        }
        (Err(e), _) => return Err(anyhow!("{name}: {e}").into()),
    };
    write_output(None, &text)?;
    Ok(())
}

fn load_reports(path: &Path) -> anyhow::Result<Vec<EvalReport>> {
    let text = read_input(Some(path))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: invalid JSON", path.display(), n + 1))?;
        if value.get("summary").is_some() {
            continue;
        }
        out.push(
            serde_json::from_value(value)
                .with_context(|| format!("{}:{}: invalid report", path.display(), n + 1))?,
        );
    }
    Ok(out)
}

fn file_stem(r: &EvalReport, i: usize) -> String {
    match &r.id {
        Some(id) => id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect(),
        None => format!("report-{i}"),
    }
}

pub fn report(cmd: ReportCmd) -> CmdResult {
    match cmd {
        ReportCmd::Render {
            reports,
            format,
            overlay_dir,
            dims,
        } => {
            let dims = parse_dims(&dims)?;
            let reports = load_reports(&reports)?;
            if let Some(dir) = &overlay_dir {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
                for (i, r) in reports.iter().enumerate() {
                    let svg = render_overlay(r, dims).map_err(|e| anyhow!(e))?;
                    let path = dir.join(format!("{}.svg", file_stem(r, i)));
                    std::fs::write(&path, svg)
                        .with_context(|| format!("cannot write {}", path.display()))?;
                }
            }
            let text = match format {
                RenderFormat::Text => reports
                    .iter()
                    .map(|r| {
                        format!(
                            "# {}: {}\n{}",
                            r.id.as_deref().unwrap_or(&r.image),
                            r.prompt,
                            render_text_report(r)
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
                RenderFormat::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record([
                        "id",
                        "skill",
                        "model",
                        "image",
                        "prompt",
                        "score",
                        "statements",
                        "errored",
                    ])
                    .context("csv")?;
                    for r in &reports {
                        w.write_record([
                            r.id.clone().unwrap_or_default(),
                            r.skill.clone().unwrap_or_default(),
                            r.model.clone().unwrap_or_default(),
                            r.image.clone(),
                            r.prompt.clone(),
                            format!("{}", r.score),
                            r.results.len().to_string(),
                            r.errored_statements().to_string(),
                        ])
                        .context("csv")?;
                    }
                    String::from_utf8(w.into_inner().context("csv")?).context("csv")?
                }
                RenderFormat::Jsonl => reports
                    .iter()
                    .map(|r| serde_json::to_string(r).expect("reports serialize") + "\n")
                    .collect(),
            };
            write_output(None, &text)?;
        }
        ReportCmd::Summarize {
            reports,
            group_by,
            format,
        } => {
            let reports = load_reports(&reports)?;
            let by = match group_by {
                GroupArg::Skill => GroupBy::Skill,
                GroupArg::Model => GroupBy::Model,
            };
            let table = summarize(&reports, by).map_err(|e| anyhow!(e))?;
            let text = match format {
                TableFormat::Text => table.to_text(),
                TableFormat::Csv => table.to_csv(),
            };
            write_output(None, &text)?;
        }
    }
    Ok(())
}
