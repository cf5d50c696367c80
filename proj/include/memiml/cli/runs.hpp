#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "memiml/cli/experiment.hpp"
#include "memiml/metalearn/learner.hpp"

namespace memiml::cli {

// Metrics CSV: '#'-prefixed lines carrying the resolved config, then this
// header, then one row per train step or evaluation.
inline constexpr const char* kMetricsHeader = "step,phase,pre_update_loss,post_update_loss,gap,metric,seed";

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_comment_block(std::ostream& out, const std::string& text);
std::string metrics_csv_row(const metalearn::MetricsRow& row, std::uint64_t seed);

struct MetricsFile {
  std::vector<metalearn::MetricsRow> rows;
  std::vector<std::uint64_t> seeds;
  std::string echo;  // the comment block without its '#' prefixes
};
// Columns are found by name, so extra columns are tolerated; missing ones
// are an error naming the file.
MetricsFile read_metrics_csv(const std::filesystem::path& path);

// Train, then evaluate on the test tasks. Writes metrics.csv (streamed, so a
// failed run keeps its rows), config.txt, checkpoint.ckpt and, with
// run.dump_memory, one memory/<task>.jsonl per test task.
struct TrainOutcome {
  std::filesystem::path dir;
  metalearn::RunMetrics metrics;
  metalearn::EvalResult eval;
};
TrainOutcome run_train(const ExperimentConfig& cfg, std::ostream& log);

// The experiment settings stored in a checkpoint written by run_train.
ExperimentConfig config_from_checkpoint(const std::filesystem::path& checkpoint);

// meta_test of a checkpoint under `cfg` (which may change beta, the ablation
// or the neighbour count). Writes eval.csv (one test row in the metrics
// schema) and eval_tasks.csv; the checkpoint is only read.
struct EvalOutcome {
  std::filesystem::path dir;
  metalearn::EvalResult eval;
};
EvalOutcome run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

enum class SweepAxis { store_ratio, n_neighbors, beta };
std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view text);
std::vector<double> default_sweep_values(SweepAxis a);
void set_axis(ExperimentConfig& cfg, SweepAxis a, double value);

struct SweepCell {
  double value = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  metalearn::MetricsRow test;  // evaluation of the cell's checkpoint
};
struct SweepOutcome {
  std::filesystem::path table, cells_table;
  std::vector<SweepCell> cells;
  bool all_ok = true;
};
// One train + eval per (value, seed). A failing cell is recorded and the
// sweep moves on. The table has one row per value with means over seeds.
SweepOutcome run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                       const std::vector<std::uint64_t>& seeds, std::ostream& log);

// Trailing moving average with a window of 10% of the rows (at least one).
// terminal is the last smoothed value, i.e. the mean over the final 10%;
// peak is the largest smoothed value over full windows.
struct GapCurve {
  std::vector<std::uint64_t> steps;
  std::vector<double> gaps, smoothed;
  std::size_t window = 0;
  double peak = 0, terminal = 0;
  bool empty() const { return gaps.empty(); }
};
GapCurve smooth_gaps(std::vector<std::uint64_t> steps, std::vector<double> gaps);

struct RunGaps {
  std::string label;
  std::string echo;
  GapCurve train, test;
};
RunGaps gaps_of(const MetricsFile& file, std::string label);

// SVG with one panel per phase and one line per run.
std::string gap_plot_svg(const std::vector<RunGaps>& runs);

struct DiagnoseOutcome {
  std::vector<RunGaps> runs;
  std::filesystem::path summary, curves, plot;
};
// Reads each metrics CSV and writes gap_summary.csv, gap_curves.csv and
// gaps.svg into `out_dir`.
DiagnoseOutcome run_diagnose(const std::vector<std::filesystem::path>& csvs, std::vector<std::string> labels,
                             const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace memiml::cli
