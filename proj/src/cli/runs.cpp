#include "memiml/cli/runs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "memiml/nets/checkpoint.hpp"

namespace memiml::cli {

using metalearn::MetricsRow;
using metalearn::Phase;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

std::string eval_summary(const metalearn::EvalResult& r, bool labels) {
  std::ostringstream out;
  out << r.tasks.size() << " test tasks: " << (labels ? "accuracy " : "query mse ") << num(r.summary.metric)
      << ", pre-update loss " << num(r.summary.pre_update_loss) << ", post-update loss "
      << num(r.summary.post_update_loss) << ", gap " << num(r.summary.gap);
  return out.str();
}

void write_eval_files(const fs::path& dir, const ExperimentConfig& cfg, const metalearn::EvalResult& eval) {
  const std::string text = echo(cfg);
  auto summary = open_out(dir / "eval.csv");
  write_comment_block(summary, text);
  summary << kMetricsHeader << '\n' << metrics_csv_row(eval.summary, cfg.meta.seed);

  auto tasks = open_out(dir / "eval_tasks.csv");
  write_comment_block(tasks, text);
  tasks << "task_id,pre_update_loss,post_update_loss,gap,metric,seed\n";
  for (const auto& t : eval.tasks) {
    tasks << t.task_id << ',' << num(t.pre_update_loss) << ',' << num(t.post_update_loss) << ','
          << num(t.pre_update_loss - t.post_update_loss) << ',' << num(t.metric) << ',' << cfg.meta.seed << '\n';
  }
}

nlohmann::json checkpoint_meta(const ExperimentConfig& cfg) {
  return {{"experiment", echo_json(cfg)}, {"seed", cfg.meta.seed}};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_comment_block(std::ostream& out, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out << "# " << line << '\n';
}

std::string metrics_csv_row(const MetricsRow& row, std::uint64_t seed) {
  return std::to_string(row.step) + "," + std::string(metalearn::to_string(row.phase)) + "," +
         num(row.pre_update_loss) + "," + num(row.post_update_loss) + "," + num(row.gap) + "," + num(row.metric) +
         "," + std::to_string(seed) + "\n";
}

MetricsFile read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path.string() + "'");
  MetricsFile file;
  std::string line;
  std::size_t n = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++n;
    line = strip_cr(line);
    if (line.rfind('#', 0) == 0) {
      file.echo += line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1) + "\n";
      continue;
    }
    if (line.empty()) continue;
    header = split(line, ',');
    break;
  }
  if (header.empty()) throw CsvError(path.string() + ": no header row");
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw CsvError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_step = column("step"), c_phase = column("phase"), c_pre = column("pre_update_loss"),
                    c_post = column("post_update_loss"), c_gap = column("gap"), c_metric = column("metric"),
                    c_seed = column("seed");
  while (std::getline(in, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw CsvError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(header.size()) +
                     " columns");
    }
    try {
      MetricsRow row;
      row.step = std::stoull(cells[c_step]);
      if (cells[c_phase] == "train") {
        row.phase = Phase::train;
      } else if (cells[c_phase] == "test") {
        row.phase = Phase::test;
      } else {
        throw std::invalid_argument("unknown phase '" + cells[c_phase] + "'");
      }
      row.pre_update_loss = std::stod(cells[c_pre]);
      row.post_update_loss = std::stod(cells[c_post]);
      row.gap = std::stod(cells[c_gap]);
      row.metric = std::stod(cells[c_metric]);
      file.rows.push_back(row);
      file.seeds.push_back(std::stoull(cells[c_seed]));
    } catch (const std::exception& e) {
      throw CsvError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return file;
}

TrainOutcome run_train(const ExperimentConfig& cfg, std::ostream& log) {
  validate(cfg);
  auto resolved = resolve_source(cfg);
  for (const auto& w : resolved.warnings) log << "warning: " << w << '\n';
  TrainOutcome outcome;
  outcome.dir = run_dir(cfg);
  fs::create_directories(outcome.dir);
  const std::string text = echo(cfg);
  open_out(outcome.dir / "config.txt") << text;

  metalearn::MetaLearner learner(resolved.meta, resolved.source->format());
  auto csv = open_out(outcome.dir / "metrics.csv");
  write_comment_block(csv, text);
  csv << kMetricsHeader << '\n' << std::flush;

  const auto meta = checkpoint_meta(cfg);
  auto on_row = [&](const MetricsRow& row) {
    csv << metrics_csv_row(row, cfg.meta.seed) << std::flush;
    if (row.phase == Phase::test) {
      log << "step " << row.step << ": test metric " << num(row.metric) << ", gap " << num(row.gap) << '\n';
    } else if (cfg.checkpoint_every > 0 && row.step % cfg.checkpoint_every == 0) {
      learner.save(outcome.dir / ("checkpoint-" + std::to_string(row.step) + ".ckpt"), meta);
    }
  };
  outcome.metrics = metalearn::train(learner, *resolved.source, {cfg.steps, cfg.eval_every}, on_row);
  learner.save(outcome.dir / "checkpoint.ckpt", meta);

  const auto test = metalearn::test_episodes(*resolved.source);
  if (!test.empty()) {
    outcome.eval = learner.meta_test(test);
    log << eval_summary(outcome.eval, resolved.source->format().labels) << '\n';
  }
  if (cfg.dump_memory && resolved.meta.uses_memory()) {
    for (const auto& ep : test) {
      auto out = open_out(outcome.dir / "memory" / (file_safe(ep.task_id) + ".jsonl"));
      learner.build_memory(ep.support).dump_jsonl(out);
    }
  }
  return outcome;
}

ExperimentConfig config_from_checkpoint(const fs::path& checkpoint) {
  const auto ck = nets::load_checkpoint(checkpoint);
  ExperimentConfig cfg;
  if (!ck.meta.contains("experiment")) return cfg;
  for (const auto& [key, value] : ck.meta["experiment"].items()) set_key(cfg, key, value.get<std::string>());
  return cfg;
}

EvalOutcome run_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  validate(cfg);
  auto resolved = resolve_source(cfg);
  for (const auto& w : resolved.warnings) log << "warning: " << w << '\n';
  metalearn::MetaLearner learner(resolved.meta, resolved.source->format());
  learner.load(checkpoint);
  const auto test = metalearn::test_episodes(*resolved.source);
  if (test.empty()) throw std::invalid_argument("no test tasks to evaluate");

  EvalOutcome outcome;
  outcome.dir = run_dir(cfg);
  outcome.eval = learner.meta_test(test);
  write_eval_files(outcome.dir, cfg, outcome.eval);
  log << eval_summary(outcome.eval, resolved.source->format().labels) << '\n';
  return outcome;
}

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::store_ratio: return "store_ratio";
    case SweepAxis::n_neighbors: return "n_neighbors";
    case SweepAxis::beta: return "beta";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::store_ratio, SweepAxis::n_neighbors, SweepAxis::beta}) {
    if (text == to_string(a)) return a;
  }
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (store_ratio, n_neighbors, beta)");
}

std::vector<double> default_sweep_values(SweepAxis a) {
  switch (a) {
    case SweepAxis::store_ratio: return {1.0, 0.8, 0.5, 0.2};
    case SweepAxis::n_neighbors: return {5, 10, 20, 50};
    case SweepAxis::beta: return {1.0, 0.8, 0.5, 0.2, 0.0};
  }
  return {};
}

void set_axis(ExperimentConfig& cfg, SweepAxis a, double value) {
  switch (a) {
    case SweepAxis::store_ratio:
      cfg.meta.store_ratio = value;
      break;
    case SweepAxis::n_neighbors:
      if (!(value >= 1 && value == std::floor(value))) throw ConfigError("n_neighbors values must be positive integers");
      cfg.meta.n_neighbors = static_cast<std::size_t>(value);
      break;
    case SweepAxis::beta:
      cfg.meta.beta = value;
      break;
  }
}

SweepOutcome run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                       const std::vector<std::uint64_t>& seeds, std::ostream& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  // reject bad values before any training happens
  for (double v : values) {
    ExperimentConfig probe = cfg;
    set_axis(probe, axis, v);
    validate(probe);
  }
  const std::string axis_name(to_string(axis));
  SweepOutcome outcome;
  for (double v : values) {
    for (auto seed : seeds) {
      SweepCell cell;
      cell.value = v;
      cell.seed = seed;
      try {
        ExperimentConfig c = cfg;
        set_axis(c, axis, v);
        c.meta.seed = c.task.seed = seed;
        c.name = cfg.name + "/" + axis_name + "=" + num(v) + "/seed-" + std::to_string(seed);
        log << "[" << axis_name << " = " << num(v) << ", seed " << seed << "]\n";
        const auto trained = run_train(c, log);
        cell.test = run_eval(c, trained.dir / "checkpoint.ckpt", log).eval.summary;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
        outcome.all_ok = false;
        log << "cell failed: " << cell.error << '\n';
      }
      outcome.cells.push_back(cell);
    }
  }

  const fs::path dir = run_dir(cfg);
  const std::string text = echo(cfg);
  outcome.cells_table = dir / ("sweep_" + axis_name + "_cells.csv");
  auto cells = open_out(outcome.cells_table);
  write_comment_block(cells, text);
  cells << axis_name << ",seed,status,pre_update_loss,post_update_loss,gap,metric,error\n";
  for (const auto& c : outcome.cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    cells << num(c.value) << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
          << (c.ok ? num(c.test.pre_update_loss) : "") << ',' << (c.ok ? num(c.test.post_update_loss) : "") << ','
          << (c.ok ? num(c.test.gap) : "") << ',' << (c.ok ? num(c.test.metric) : "") << ',' << err << '\n';
  }

  outcome.table = dir / ("sweep_" + axis_name + ".csv");
  auto table = open_out(outcome.table);
  write_comment_block(table, text);
  table << axis_name << ",runs,failures,pre_update_loss,post_update_loss,gap,metric\n";
  for (double v : values) {
    std::vector<double> pre, post, gap, metric;
    std::size_t failures = 0;
    for (const auto& c : outcome.cells) {
      if (c.value != v) continue;
      if (!c.ok) {
        ++failures;
        continue;
      }
      pre.push_back(c.test.pre_update_loss);
      post.push_back(c.test.post_update_loss);
      gap.push_back(c.test.gap);
      metric.push_back(c.test.metric);
    }
    auto cell = [](const std::vector<double>& xs) { return xs.empty() ? std::string() : num(mean_of(xs)); };
    table << num(v) << ',' << metric.size() << ',' << failures << ',' << cell(pre) << ',' << cell(post) << ','
          << cell(gap) << ',' << cell(metric) << '\n';
  }
  return outcome;
}

GapCurve smooth_gaps(std::vector<std::uint64_t> steps, std::vector<double> gaps) {
  if (steps.size() != gaps.size()) throw std::invalid_argument("steps and gaps differ in length");
  GapCurve c;
  c.steps = std::move(steps);
  c.gaps = std::move(gaps);
  const std::size_t n = c.gaps.size();
  if (n == 0) {
    c.peak = c.terminal = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.window = std::max<std::size_t>(1, (n + 9) / 10);
  c.peak = -std::numeric_limits<double>::infinity();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += c.gaps[i];
    if (i >= c.window) sum -= c.gaps[i - c.window];
    const std::size_t len = std::min(i + 1, c.window);
    c.smoothed.push_back(sum / static_cast<double>(len));
    if (len == c.window) c.peak = std::max(c.peak, c.smoothed.back());
  }
  // the running sum drifts; recompute the final window directly
  c.terminal = std::accumulate(c.gaps.end() - static_cast<std::ptrdiff_t>(c.window), c.gaps.end(), 0.0) /
               static_cast<double>(c.window);
  c.smoothed.back() = c.terminal;
  return c;
}

RunGaps gaps_of(const MetricsFile& file, std::string label) {
  RunGaps r;
  r.label = std::move(label);
  r.echo = file.echo;
  std::vector<std::uint64_t> ts, vs;
  std::vector<double> tg, vg;
  for (const auto& row : file.rows) {
    if (row.phase == Phase::train) {
      ts.push_back(row.step);
      tg.push_back(row.gap);
    } else {
      vs.push_back(row.step);
      vg.push_back(row.gap);
    }
  }
  r.train = smooth_gaps(std::move(ts), std::move(tg));
  r.test = smooth_gaps(std::move(vs), std::move(vg));
  return r;
}

std::string gap_plot_svg(const std::vector<RunGaps>& runs) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  constexpr double W = 760, panel_h = 300, left = 70, right = 180, top = 40, bottom = 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << 2 * panel_h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<desc>";
  for (const auto& r : runs) svg << xml_escape("[" + r.label + "]\n" + r.echo);
  svg << "</desc>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int p = 0; p < 2; ++p) {
    const double y0 = p * panel_h;
    auto curve = [&](const RunGaps& r) -> const GapCurve& { return p == 0 ? r.train : r.test; };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = 0, ymax = 0;
    for (const auto& r : runs) {
      const auto& c = curve(r);
      for (std::size_t i = 0; i < c.steps.size(); ++i) {
        xmin = std::min(xmin, static_cast<double>(c.steps[i]));
        xmax = std::max(xmax, static_cast<double>(c.steps[i]));
        ymin = std::min(ymin, c.smoothed[i]);
        ymax = std::max(ymax, c.smoothed[i]);
      }
    }
    if (!(xmax > xmin)) {
      xmin = std::isfinite(xmin) ? xmin - 1 : 0;
      xmax = xmin + 2;
    }
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = W - left - right, ph = panel_h - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return y0 + top + (ymax - y) / (ymax - ymin) * ph; };

    svg << "<text x=\"" << left << "\" y=\"" << y0 + 24 << "\" font-size=\"14\">"
        << (p == 0 ? "meta-training" : "meta-testing") << ": smoothed pre - post query loss gap</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << y0 + top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << sy(0) << "\" y2=\"" << sy(0)
        << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    for (double v : {ymin, 0.0, ymax}) {
      svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">" << num(std::round(v * 1000) / 1000)
          << "</text>\n";
    }
    svg << "<text x=\"" << left << "\" y=\"" << y0 + panel_h - 18 << "\">" << num(xmin) << "</text>\n";
    svg << "<text x=\"" << left + pw << "\" y=\"" << y0 + panel_h - 18 << "\" text-anchor=\"end\">" << num(xmax)
        << "</text>\n";
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 + panel_h - 18 << "\" text-anchor=\"middle\">step</text>\n";

    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& c = curve(runs[k]);
      const char* color = colors[k % std::size(colors)];
      if (!c.empty()) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.steps.size(); ++i) {
          svg << sx(static_cast<double>(c.steps[i])) << ',' << sy(c.smoothed[i]) << ' ';
        }
        svg << "\"/>\n";
      }
      const double ly = y0 + top + 16 + 18 * static_cast<double>(k);
      svg << "<line x1=\"" << W - right + 12 << "\" x2=\"" << W - right + 32 << "\" y1=\"" << ly - 4 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << W - right + 38 << "\" y=\"" << ly << "\">" << xml_escape(runs[k].label) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

DiagnoseOutcome run_diagnose(const std::vector<fs::path>& csvs, std::vector<std::string> labels,
                             const fs::path& out_dir, std::ostream& log) {
  if (csvs.empty()) throw ConfigError("diagnose needs at least one metrics CSV");
  if (!labels.empty() && labels.size() != csvs.size()) throw ConfigError("give one label per metrics CSV");
  if (labels.empty()) {
    for (const auto& p : csvs) labels.push_back(p.has_parent_path() ? p.parent_path().string() : p.string());
  }
  DiagnoseOutcome outcome;
  for (std::size_t i = 0; i < csvs.size(); ++i) outcome.runs.push_back(gaps_of(read_metrics_csv(csvs[i]), labels[i]));

  outcome.summary = out_dir / "gap_summary.csv";
  outcome.curves = out_dir / "gap_curves.csv";
  outcome.plot = out_dir / "gaps.svg";
  auto summary = open_out(outcome.summary);
  auto curves = open_out(outcome.curves);
  for (const auto& r : outcome.runs) write_comment_block(summary, "[" + r.label + "]\n" + r.echo);
  summary << "run,phase,rows,window,peak_gap,terminal_gap,terminal_over_peak\n";
  curves << "run,phase,step,gap,smoothed_gap\n";
  for (const auto& r : outcome.runs) {
    for (int p = 0; p < 2; ++p) {
      const auto& c = p == 0 ? r.train : r.test;
      const char* phase = p == 0 ? "train" : "test";
      if (c.empty()) {
        summary << r.label << ',' << phase << ",0,0,,,\n";
        continue;
      }
      summary << r.label << ',' << phase << ',' << c.gaps.size() << ',' << c.window << ',' << num(c.peak) << ','
              << num(c.terminal) << ',' << (c.peak > 0 ? num(c.terminal / c.peak) : "") << '\n';
      for (std::size_t i = 0; i < c.gaps.size(); ++i) {
        curves << r.label << ',' << phase << ',' << c.steps[i] << ',' << num(c.gaps[i]) << ',' << num(c.smoothed[i])
               << '\n';
      }
      log << r.label << " [" << phase << "]: terminal gap " << num(c.terminal) << ", peak " << num(c.peak) << '\n';
    }
  }
  open_out(outcome.plot) << gap_plot_svg(outcome.runs);
  return outcome;
}

}  // namespace memiml::cli
