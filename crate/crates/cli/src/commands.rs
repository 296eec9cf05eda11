use std::path::{Path, PathBuf};

use log::info;
use pvmpi::config::Prepared;
use pvmpi::data_io::{synth_generate, write_days_csv};
use pvmpi::marginals::{fit_marginals, pit, write_curves_csv};
use pvmpi::mpi::{read_mpi_csv, summarize_mpis, write_mpi_csv};
use pvmpi::pipeline::{self, fit_copula, goodness_of_fit, mpis_for, PipelineOptions};
use pvmpi::scenarios::{export, generate_days, import};
use pvmpi::scoring::{read_reliability_csv, write_reliability_csv};
use pvmpi::{
    Copula, CopulaKind, Error, MarginalModel, MpiSet, RunConfig, ScenarioSet, ScoreReport,
};

use crate::plot;
use crate::{CliError, PlotArgs, PlotKind};

type CmdResult = Result<(), CliError>;

/// Configuration plus the output directory every artifact lives in.
pub struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn wrote(path: &Path) {
    info!("wrote {}", path.display());
}

impl Context {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Self {
        Context { cfg, out }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn kind_path(&self, stem: &str, kind: CopulaKind, ext: &str) -> PathBuf {
        self.path(&format!("{stem}_{kind}.{ext}"))
    }

    fn ensure_out(&self) -> Result<(), Error> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    /// An earlier step's output, or a message naming the step to run.
    fn input(&self, path: PathBuf, producer: &str) -> Result<PathBuf, CliError> {
        if path.is_file() {
            Ok(path)
        } else {
            Err(CliError::Failed(format!(
                "missing input {}; run `pvmpi {producer}` first",
                path.display()
            )))
        }
    }

    /// `data` from the config, else the dataset written by `synth`.
    fn data_path(&self) -> Result<PathBuf, CliError> {
        if let Some(p) = &self.cfg.data {
            return Ok(p.clone());
        }
        let synth = self.path("synth.csv");
        if synth.is_file() {
            Ok(synth)
        } else {
            Err(CliError::Failed(format!(
                "no input data: set \"data\" in the config or run `pvmpi synth` to create {}",
                synth.display()
            )))
        }
    }

    fn prepare(&self) -> Result<Prepared, CliError> {
        let path = self.data_path()?;
        let p = self.cfg.prepare(&path)?;
        info!(
            "{}: {} training and {} evaluation days ({} incomplete dropped)",
            path.display(),
            p.train.len(),
            p.eval.len(),
            p.dropped
        );
        Ok(p)
    }

    fn opts(&self) -> PipelineOptions {
        PipelineOptions::from_config(&self.cfg)
    }

    fn kinds(&self) -> Vec<CopulaKind> {
        self.cfg.copula.kinds()
    }

    fn marginals(&self) -> Result<MarginalModel, CliError> {
        let path = self.input(self.path("marginals.json"), "fit-marginals")?;
        let model = MarginalModel::load_json(&path)?;
        if model.dim() != self.cfg.dim() || model.levels != self.cfg.levels {
            return Err(CliError::Failed(format!(
                "{} does not match the configured hour window and levels; rerun `pvmpi fit-marginals`",
                path.display()
            )));
        }
        Ok(model)
    }

    fn copula(&self, kind: CopulaKind) -> Result<Copula, CliError> {
        let path = self.input(self.kind_path("copula", kind, "json"), "fit-copula")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Copula::from_json(kind, &text)
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
    }

    fn scenarios(&self, kind: CopulaKind) -> Result<Vec<ScenarioSet>, CliError> {
        let path = self.input(self.kind_path("scenarios", kind, "csv"), "sample")?;
        Ok(import(path)?)
    }

    fn mpis(&self, kind: CopulaKind) -> Result<Vec<MpiSet>, CliError> {
        let path = self.input(self.kind_path("mpi", kind, "csv"), "mpi")?;
        Ok(read_mpi_csv(path)?)
    }

    fn write_copula(&self, copula: &Copula) -> Result<(), Error> {
        let path = self.kind_path("copula", copula.kind(), "json");
        let mut text = copula.to_json()?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        wrote(&path);
        Ok(())
    }

    fn write_scenarios(&self, kind: CopulaKind, sets: &[ScenarioSet]) -> Result<(), Error> {
        let path = self.kind_path("scenarios", kind, "csv");
        export(sets, &path)?;
        wrote(&path);
        Ok(())
    }

    fn write_mpis(&self, kind: CopulaKind, sets: &[MpiSet]) -> Result<(), Error> {
        let path = self.kind_path("mpi", kind, "csv");
        write_mpi_csv(sets, &path)?;
        wrote(&path);
        write_json(
            &self.path(&format!("mpi_{kind}_summary.json")),
            &summarize_mpis(sets),
        )
    }

    fn write_scores(&self, kind: CopulaKind, report: &ScoreReport) -> Result<(), Error> {
        let path = self.kind_path("reliability", kind, "csv");
        write_reliability_csv(&report.alphas, &report.empirical_coverage, &path)?;
        wrote(&path);
        write_json(&self.kind_path("scores", kind, "json"), report)
    }

    pub fn synth(&self) -> CmdResult {
        let truth = self
            .cfg
            .truth()
            .map_err(|e| CliError::Usage(format!("invalid synth truth: {e}")))?;
        self.ensure_out()?;
        let ds = synth_generate(&truth, self.cfg.synth.n_days, self.cfg.seed)?;
        let path = self.path("synth.csv");
        write_days_csv(&path, &ds.days)?;
        wrote(&path);
        write_json(&self.path("truth.json"), &truth)?;
        Ok(())
    }

    pub fn fit_marginals(&self) -> CmdResult {
        let p = self.prepare()?;
        self.ensure_out()?;
        let model = fit_marginals(&p.train, &self.cfg.levels, &p.feature_names)?;
        let path = self.path("marginals.json");
        model.save_json(&path)?;
        wrote(&path);
        let path = self.path("curves_eval.csv");
        write_curves_csv(&path, &model.predict_days(&p.eval)?)?;
        wrote(&path);
        Ok(())
    }

    pub fn fit_copula(&self) -> CmdResult {
        let p = self.prepare()?;
        let model = self.marginals()?;
        let u = pit(&p.train, &model.predict_days(&p.train)?)?;
        for kind in self.kinds() {
            info!("fitting {kind} copula on {} training days", p.train.len());
            self.write_copula(&fit_copula(kind, &u)?)?;
        }
        Ok(())
    }

    pub fn sample(&self) -> CmdResult {
        let p = self.prepare()?;
        let curves = self.marginals()?.predict_days(&p.eval)?;
        for kind in self.kinds() {
            let copula = self.copula(kind)?;
            let sets = generate_days(&copula, &curves, self.cfg.scenarios, self.cfg.seed)?;
            self.write_scenarios(kind, &sets)?;
        }
        Ok(())
    }

    pub fn mpi(&self) -> CmdResult {
        let p = self.prepare()?;
        let curves = self.marginals()?.predict_days(&p.eval)?;
        for kind in self.kinds() {
            let sets = self.scenarios(kind)?;
            if let Some((s, d)) = sets.iter().zip(&p.eval).find(|(s, d)| s.day != d.date) {
                return Err(CliError::Failed(format!(
                    "scenarios_{kind}.csv has day {} where evaluation day {} was expected; rerun `pvmpi sample`",
                    s.day, d.date
                )));
            }
            let mpis = mpis_for(&sets, &curves, &self.cfg.alphas)?;
            self.write_mpis(kind, &mpis)?;
        }
        Ok(())
    }

    pub fn score(&self) -> CmdResult {
        let p = self.prepare()?;
        let opts = self.opts();
        for kind in self.kinds() {
            let gof = goodness_of_fit(&self.copula(kind)?, p.train.len());
            let sets = self.scenarios(kind)?;
            let mpis = self.mpis(kind)?;
            if mpis.iter().any(|m| {
                m.boxes
                    .iter()
                    .map(|b| b.alpha)
                    .ne(opts.alphas.iter().copied())
            }) {
                return Err(CliError::Failed(format!(
                    "mpi_{kind}.csv was built for other levels; rerun `pvmpi mpi`"
                )));
            }
            let scored = pipeline::score(kind, gof, &p.eval, &sets, &mpis, &opts)?;
            self.write_scores(kind, &scored.report)?;
        }
        Ok(())
    }

    pub fn report(&self) -> CmdResult {
        let p = self.prepare()?;
        self.ensure_out()?;
        let res = pipeline::run(&p.train, &p.eval, &p.feature_names, &self.opts())?;
        let path = self.path("marginals.json");
        res.marginals.save_json(&path)?;
        wrote(&path);
        let path = self.path("curves_eval.csv");
        write_curves_csv(&path, &res.eval_curves)?;
        wrote(&path);
        for run in &res.runs {
            let kind = run.copula.kind();
            self.write_copula(&run.copula)?;
            self.write_scenarios(kind, &run.scenarios)?;
            self.write_mpis(kind, &run.mpis)?;
            self.write_scores(kind, &run.report)?;
        }
        write_json(&self.path("report.json"), &res.report)?;
        for m in &res.report.models {
            println!(
                "{:<9} loglik {:>10.3}  kappa {:>3}  AIC {:>10.3}  BIC {:>10.3}  ES {:.4e}  VS {:.4e}  dev {:.2} pp  vol95 {:.3e}",
                m.model,
                m.loglik,
                m.kappa,
                m.aic,
                m.bic,
                m.energy_score,
                m.variogram_score,
                m.avg_deviation_pct,
                m.avg_volume_95
            );
        }
        println!(
            "{:<9} dev {:.2} pp",
            "upi", res.report.upi.avg_deviation_pct
        );
        Ok(())
    }

    pub fn plot(&self, args: &PlotArgs) -> CmdResult {
        let kinds: Vec<PlotKind> = if args.kinds.is_empty() {
            PlotKind::ALL.to_vec()
        } else {
            let mut k = args.kinds.clone();
            k.dedup();
            k
        };
        let p = self.prepare()?;
        let t = match args.day {
            Some(day) => p
                .eval
                .iter()
                .position(|d| d.date == day)
                .ok_or_else(|| CliError::Usage(format!("{day} is not an evaluation day")))?,
            None => 0,
        };
        let day = &p.eval[t];
        let dim = day.dim();
        // Default to the two hours around midday of the window.
        let (hi, hj) = match args.hours.as_deref() {
            Some([i, j]) if (1..=dim).contains(i) && (1..=dim).contains(j) && i != j => {
                (i - 1, j - 1)
            }
            Some(h) => {
                return Err(CliError::Usage(format!(
                    "--hours needs two different indices in 1..={dim}, got {h:?}"
                )))
            }
            None => (
                dim.saturating_sub(1) / 2,
                (dim.saturating_sub(1) / 2 + 1).min(dim - 1),
            ),
        };
        if kinds.contains(&PlotKind::Boxes) && hi == hj {
            return Err(CliError::Usage(
                "box figure needs at least two hours".into(),
            ));
        }
        let dir = self.path("plots");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let emit = |name: String, svg: String| -> Result<(), Error> {
            let path = dir.join(name);
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            wrote(&path);
            Ok(())
        };

        for kind in kinds {
            match kind {
                PlotKind::Fan => {
                    let curves = self.marginals()?.predict_day(day)?;
                    emit(
                        "fan_chart.svg".into(),
                        plot::fan_chart(day, &curves, &self.cfg.alphas),
                    )?;
                }
                PlotKind::Scenarios => {
                    for ck in self.kinds() {
                        let sets = self.scenarios(ck)?;
                        let set = find_day(&sets, |s| s.day, day.date, "scenarios", ck)?;
                        emit(format!("scenarios_{ck}.svg"), plot::spaghetti(day, set))?;
                    }
                }
                PlotKind::Mpi => {
                    for ck in self.kinds() {
                        let mpis = self.mpis(ck)?;
                        let set = find_day(&mpis, |s| s.day, day.date, "mpi", ck)?;
                        emit(format!("mpi_bands_{ck}.svg"), plot::mpi_bands(day, set))?;
                    }
                }
                PlotKind::Boxes => {
                    for ck in self.kinds() {
                        let mpis = self.mpis(ck)?;
                        let set = find_day(&mpis, |s| s.day, day.date, "mpi", ck)?;
                        let path = self.kind_path("scenarios", ck, "csv");
                        let scen = if path.is_file() {
                            import(&path)?
                        } else {
                            Vec::new()
                        };
                        let cloud = scen.iter().find(|s| s.day == day.date);
                        emit(
                            format!("mpi_boxes_{ck}.svg"),
                            plot::bivariate_boxes(day, set, cloud, hi, hj),
                        )?;
                    }
                }
                PlotKind::Reliability => {
                    let mut series = Vec::new();
                    for ck in self.kinds() {
                        let path = self.input(self.kind_path("reliability", ck, "csv"), "score")?;
                        let (a, e) = read_reliability_csv(path)?;
                        series.push((ck.name().to_string(), a, e));
                    }
                    emit("reliability.svg".into(), plot::reliability(&series))?;
                }
            }
        }
        Ok(())
    }
}

fn find_day<'a, T>(
    items: &'a [T],
    date: impl Fn(&T) -> chrono::NaiveDate,
    day: chrono::NaiveDate,
    what: &str,
    kind: CopulaKind,
) -> Result<&'a T, CliError> {
    items
        .iter()
        .find(|x| date(x) == day)
        .ok_or_else(|| CliError::Failed(format!("{what}_{kind}.csv has no entry for {day}")))
}
