#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnsadv/augsearch.hpp"
#include "gnsadv/config.hpp"
#include "gnsadv/gns.hpp"
#include "gnsadv/models.hpp"

namespace gnsadv {

// Every report keeps wall-clock measurements under this key and nowhere
// else; everything outside it is a deterministic function of the config.
inline constexpr const char* kWallClockKey = "wall_clock";

/// Copy of a report with the wall-clock section removed.
nlohmann::json without_wall_clock(nlohmann::json report);

struct TrainOutcome {
  nlohmann::json summary;
  std::filesystem::path summary_path;  // train_summary.json
  std::filesystem::path metrics_path;  // train_metrics.csv
};

/// Trains the MLP to the step budget, evaluating on the train and validation
/// splits after every epoch.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

struct GnsOutcome {
  nlohmann::json report;
  NoiseScaleEstimate estimate;
  std::size_t recommendation = 1;
  std::optional<TrueNoiseScale> analytic;  // quadratic model only
  std::filesystem::path report_path;      // gns_report.json
  std::filesystem::path curve_path;       // tradeoff_curve.csv
};

/// Runs `steps` paired-batch estimator iterations. For the MLP each
/// iteration also takes an optimizer step with the big-batch gradient; for
/// the quadratic the point stays fixed so the analytic value applies.
GnsOutcome cmd_estimate_gns(const RunConfig& config, std::ostream& log);

struct SweepRow {
  std::size_t batch = 0;
  double learning_rate = 0.0;
  bool converged = false;
  std::size_t steps = 0;
  double val_loss = 0.0;  // smoothed validation loss when the row stopped
  double wall_seconds = 0.0;
};

struct SweepOutcome {
  nlohmann::json report;
  std::vector<SweepRow> rows;
  std::optional<double> b_noise;
  std::vector<std::string> warnings;
  std::filesystem::path report_path;  // sweep_report.json
  std::filesystem::path csv_path;     // sweep.csv
};

/// Trains once per grid batch size until the 5-evaluation moving mean of
/// validation loss reaches target_loss or the step budget runs out.
SweepOutcome cmd_sweep(const RunConfig& config, std::ostream& log);

struct VerifyCheck {
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyOutcome {
  std::vector<VerifyCheck> checks;
  bool all_pass = false;
  nlohmann::json report;
  std::filesystem::path report_path;  // verify_report.json
};

/// Oracle comparisons on a quadratic spec: analytic noise scales against a
/// dense evaluation, paired-estimator unbiasedness, EMA consistency and the
/// location of the best step size.
VerifyOutcome cmd_verify_quadratic(const RunConfig& config, std::ostream& log);

struct GroupingOutcome {
  std::vector<TransformTuple> tuples;
  std::vector<double> distances;
  Grouping grouping;
  nlohmann::json report;
  std::filesystem::path report_path;  // grouping_report.json
};

GroupingOutcome cmd_group_transforms(const RunConfig& config, std::ostream& log);

}  // namespace gnsadv
