#include "gnsadv/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gnsadv/data.hpp"
#include "gnsadv/errors.hpp"
#include "gnsadv/optim.hpp"
#include "gnsadv/random.hpp"

namespace gnsadv {

namespace {

// Stream ids carved out of the run seed, one per purpose.
enum Stream : std::uint64_t { kSplitStream = 1, kBatchStream = 2, kGnsStream = 3, kSweepStream = 4,
                              kVerifyStream = 5, kAugStream = 6 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path prepare_output(const RunConfig& config, const std::string& file) {
  std::filesystem::create_directories(config.output_dir);
  return config.output_dir / file;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Splits {
  Dataset train;
  Dataset val;
};

Splits prepare_data(const RunConfig& config) {
  Dataset full = config.dataset.empty() ? make_blobs(config.blobs) : load_dataset(config.dataset, config.load);
  if (!full.labeled()) throw ConfigError("training commands need a labeled dataset");
  Rng rng(config.seed, kSplitStream);
  auto [train, val] = split_train_val(full, config.val_fraction, rng);
  return {std::move(train), std::move(val)};
}

MlpSpec mlp_spec_for(const RunConfig& config, const Dataset& data) {
  MlpSpec spec;
  spec.layer_widths.push_back(data.dim());
  spec.layer_widths.insert(spec.layer_widths.end(), config.hidden.begin(), config.hidden.end());
  spec.layer_widths.push_back(data.num_classes);
  spec.activation = config.activation;
  spec.seed = config.seed;
  spec.validate();
  return spec;
}

void require_finite_loss(double loss, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NumericError("loss became non-finite at step " + std::to_string(step) +
                       "; lower the learning rate");
  }
}

struct GnsRun {
  GnsAccumulator accumulator;
  ParameterVector theta;
};

// Paired-batch estimation while training the MLP on big-batch gradients.
GnsRun run_gns_mlp(const RunConfig& config, const Dataset& train, const MlpSpec& spec,
                   ParameterVector theta, std::size_t steps) {
  if (config.pair.b_big > train.size()) {
    throw ConfigError("gns_b_big " + std::to_string(config.pair.b_big) + " exceeds training set size " +
                      std::to_string(train.size()));
  }
  FullBatchStream stream(train.size(), config.pair.b_big, Rng(config.seed, kGnsStream));
  GnsAccumulator acc(config.gns_alpha);
  auto state = make_optimizer_state(config.optimizer, theta.total_len());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& idx = stream.next();
    const auto batch = gather(train, idx);
    const auto grads = mlp_loss_and_grads(spec, theta, batch.features, batch.labels, true);
    require_finite_loss(grads.mean_loss, t);
    acc = ema_update(acc, nested_paired_batch_stats(grads, config.pair));
    auto next = step(config.optimizer, std::move(state), std::move(theta), grads.batch_grad);
    theta = std::move(next.theta);
    state = std::move(next.state);
  }
  return {acc, std::move(theta)};
}

GnsAccumulator run_gns_quadratic(const RunConfig& config, const QuadraticProblem& problem,
                                 std::size_t steps) {
  const auto theta = problem.point();
  Rng rng(config.seed, kGnsStream);
  GnsAccumulator acc(config.gns_alpha);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto grads = quadratic_sample_grads(problem.spec, theta, config.pair.b_big, rng, true);
    acc = ema_update(acc, nested_paired_batch_stats(grads, config.pair));
  }
  return acc;
}

void require_warmup_budget(const RunConfig& config, std::size_t steps) {
  if (steps < config.gns_warmup || steps == 0) {
    throw ConfigError("step budget " + std::to_string(steps) + " is below the estimator warmup; use at least " +
                      std::to_string(std::max<std::size_t>(config.gns_warmup, 1)) + " steps");
  }
}

}  // namespace

nlohmann::json without_wall_clock(nlohmann::json report) {
  if (report.is_object()) report.erase(kWallClockKey);
  return report;
}

// ---------------------------------------------------------------------------

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  if (config.model != ModelKind::mlp) throw ConfigError("train supports model = mlp only");
  const auto start = Clock::now();
  const auto data = prepare_data(config);
  const auto spec = mlp_spec_for(config, data.train);
  const auto train_all = gather_all(data.train);
  const auto val_all = gather_all(data.val);
  if (config.batch_size > data.train.size()) {
    throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds training set size " +
                      std::to_string(data.train.size()));
  }

  auto theta = init_mlp(spec);
  auto state = make_optimizer_state(config.optimizer, theta.total_len());
  Rng batch_rng(config.seed, kBatchStream);

  std::ostringstream csv;
  csv << std::setprecision(17) << "epoch,step,complete,train_loss,train_acc,val_loss,val_acc\n";
  auto record = [&](std::size_t epoch, std::size_t step_no, bool complete) {
    const auto tr = mlp_evaluate(spec, theta, train_all.features, train_all.labels);
    const auto va = mlp_evaluate(spec, theta, val_all.features, val_all.labels);
    require_finite_loss(tr.loss, step_no);
    csv << epoch << ',' << step_no << ',' << (complete ? 1 : 0) << ',' << tr.loss << ',' << tr.accuracy << ','
        << va.loss << ',' << va.accuracy << '\n';
    return std::pair{tr, va};
  };

  const auto [init_train, init_val] = record(0, 0, true);
  log << "initial loss " << fmt(init_train.loss) << " (train), " << fmt(init_val.loss) << " (val)\n";

  std::size_t steps_done = 0;
  std::size_t epoch = 0;
  Evaluation last_train = init_train, last_val = init_val;
  while (steps_done < config.steps) {
    ++epoch;
    const auto perm = shuffle_epoch(data.train.size(), batch_rng);
    const auto batches = make_batches(data.train, config.batch_size, perm);
    bool complete = true;
    for (const auto& b : batches) {
      if (steps_done == config.steps) {
        complete = false;
        break;
      }
      const auto batch = gather(data.train, b.indices);
      const auto grads = mlp_loss_and_grads(spec, theta, batch.features, batch.labels, false);
      require_finite_loss(grads.mean_loss, steps_done);
      auto next = step(config.optimizer, std::move(state), std::move(theta), grads.batch_grad);
      theta = std::move(next.theta);
      state = std::move(next.state);
      ++steps_done;
    }
    std::tie(last_train, last_val) = record(epoch, steps_done, complete);
    log << "epoch " << epoch << (complete ? "" : " (partial)") << "  step " << steps_done << "  train_loss "
        << fmt(last_train.loss) << "  val_acc " << fmt(last_val.accuracy) << '\n';
  }

  TrainOutcome out;
  out.summary = {{"command", "train"},
                 {"seed", config.seed},
                 {"optimizer", to_string(config.optimizer.kind)},
                 {"learning_rate", config.optimizer.learning_rate},
                 {"batch_size", config.batch_size},
                 {"steps", steps_done},
                 {"epochs", epoch},
                 {"initial_loss", init_train.loss},
                 {"train_loss", last_train.loss},
                 {"train_acc", last_train.accuracy},
                 {"val_loss", last_val.loss},
                 {"val_acc", last_val.accuracy},
                 {kWallClockKey, {{"wall_seconds", seconds_since(start)}}}};
  out.metrics_path = prepare_output(config, "train_metrics.csv");
  out.summary_path = prepare_output(config, "train_summary.json");
  write_text(out.metrics_path, csv.str());
  write_json(out.summary_path, out.summary);
  log << "steps " << steps_done << "  train_acc " << fmt(last_train.accuracy) << "  val_acc "
      << fmt(last_val.accuracy) << '\n';
  return out;
}

// ---------------------------------------------------------------------------

GnsOutcome cmd_estimate_gns(const RunConfig& config, std::ostream& log) {
  require_warmup_budget(config, config.steps);
  const auto start = Clock::now();

  GnsOutcome out;
  GnsAccumulator acc(config.gns_alpha);
  nlohmann::json extra = nlohmann::json::object();
  double eps_max = config.effective_eps_max();
  std::string eps_max_source = config.eps_max ? "config" : "learning_rate";
  if (config.model == ModelKind::quadratic) {
    const auto problem = load_quadratic_problem(config.quadratic_spec);
    acc = run_gns_quadratic(config, problem, config.steps);
    out.analytic = quadratic_true_noise_scale(problem.spec, problem.point());
    const double oracle_eps_max = quadratic_eps_max(problem.spec, problem.point());
    extra["analytic"] = {{"b_simple", out.analytic->b_simple},
                         {"b_noise", out.analytic->b_noise},
                         {"eps_max", oracle_eps_max}};
    if (!config.eps_max) {
      eps_max = oracle_eps_max;
      eps_max_source = "quadratic_oracle";
    }
  } else {
    const auto data = prepare_data(config);
    const auto spec = mlp_spec_for(config, data.train);
    acc = run_gns_mlp(config, data.train, spec, init_mlp(spec), config.steps).accumulator;
  }

  out.estimate = noise_scale(acc, config.gns_warmup);
  out.recommendation = recommend_batch(out.estimate, config.gns_policy, config.hardware_cap);
  const auto grid = power_of_two_grid(config.hardware_cap);
  GnsReportInput in{acc, out.estimate, config.gns_policy, out.recommendation,
                    tradeoff_curve(out.estimate.b_noise_hat, grid, eps_max)};
  out.report = gns_report_json(in);
  out.report["command"] = "estimate-gns";
  out.report["model"] = config.model == ModelKind::mlp ? "mlp" : "quadratic";
  out.report["seed"] = config.seed;
  out.report["b_small"] = config.pair.b_small;
  out.report["b_big"] = config.pair.b_big;
  out.report["warmup"] = config.gns_warmup;
  out.report["eps_max"] = eps_max;
  out.report["eps_max_source"] = eps_max_source;
  out.report["recommended_learning_rate"] =
      eps_opt(eps_max, std::max(out.estimate.b_noise_hat, 0.0), out.recommendation);
  out.report.update(extra);
  out.report[kWallClockKey] = {{"wall_seconds", seconds_since(start)}};

  out.report_path = prepare_output(config, "gns_report.json");
  out.curve_path = prepare_output(config, "tradeoff_curve.csv");
  write_json(out.report_path, out.report);
  write_text(out.curve_path, tradeoff_csv(in.curve));

  log << "b_noise_hat " << fmt(out.estimate.b_noise_hat) << "  (|G|^2 ema " << fmt(acc.rho_sq_ema())
      << ", tr(Sigma) ema " << fmt(acc.s_ema()) << ", " << acc.steps_seen() << " updates)\n";
  if (out.analytic) {
    const double rel = std::abs(out.estimate.b_noise_hat - out.analytic->b_simple) / out.analytic->b_simple;
    log << "analytic b_simple " << fmt(out.analytic->b_simple) << "  b_noise " << fmt(out.analytic->b_noise)
        << "  relative error " << fmt(rel, 3) << '\n';
  }
  log << "recommended batch (" << to_string(config.gns_policy) << "): " << out.recommendation << '\n';
  return out;
}

// ---------------------------------------------------------------------------

SweepOutcome cmd_sweep(const RunConfig& config, std::ostream& log) {
  if (config.model != ModelKind::mlp) throw ConfigError("sweep supports model = mlp only");
  if (config.batch_grid.empty()) throw ConfigError("batch_grid is empty");
  if (!config.target_loss) throw ConfigError("sweep needs 'target_loss'");
  const auto sweep_start = Clock::now();
  const auto data = prepare_data(config);
  const auto spec = mlp_spec_for(config, data.train);
  const auto theta0 = init_mlp(spec);
  const auto val_all = gather_all(data.val);

  SweepOutcome out;
  const bool wants_recommended = std::any_of(config.batch_grid.begin(), config.batch_grid.end(),
                                             [](const GridEntry& e) { return !e.batch; });
  std::optional<std::size_t> recommended;
  nlohmann::json gns_json = nullptr;
  if (config.b_noise && !wants_recommended) {
    out.b_noise = config.b_noise;
  } else if (config.lr_rule == LrRule::eps_opt_scaled || wants_recommended) {
    NoiseScaleEstimate est;
    if (config.b_noise) {
      est.b_noise_hat = *config.b_noise;
    } else {
      require_warmup_budget(config, config.gns_steps);
      const auto run = run_gns_mlp(config, data.train, spec, theta0, config.gns_steps);
      est = noise_scale(run.accumulator, config.gns_warmup);
    }
    out.b_noise = est.b_noise_hat;
    recommended = std::min(recommend_batch(est, config.gns_policy, config.hardware_cap), data.train.size());
    gns_json = {{"b_noise_hat", est.b_noise_hat}, {"steps_used", est.steps_used},
                {"recommendation", *recommended}, {"policy", to_string(config.gns_policy)}};
    log << "noise scale " << fmt(est.b_noise_hat) << " -> recommended batch " << *recommended << '\n';
  }

  std::vector<std::size_t> grid;
  for (const auto& e : config.batch_grid) grid.push_back(e.batch ? *e.batch : *recommended);
  for (auto b : grid) {
    if (b > data.train.size()) {
      throw ConfigError("sweep batch " + std::to_string(b) + " exceeds training set size " +
                        std::to_string(data.train.size()));
    }
  }

  const double target = *config.target_loss;
  constexpr std::size_t kPatience = 5;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto row_start = Clock::now();
    const std::size_t b = grid[r];
    SweepRow row;
    row.batch = b;
    row.learning_rate = config.lr_rule == LrRule::fixed
                            ? config.optimizer.learning_rate
                            : eps_opt(config.effective_eps_max(), std::max(*out.b_noise, 0.0), b);
    OptimizerConfig opt = config.optimizer;
    opt.learning_rate = row.learning_rate;

    auto theta = theta0;
    auto state = make_optimizer_state(opt, theta.total_len());
    FullBatchStream stream(data.train.size(), b, Rng(config.seed, kSweepStream));
    std::deque<double> window;
    double window_sum = 0.0;
    std::size_t t = 0;
    while (t < config.steps) {
      const auto batch = gather(data.train, stream.next());
      const auto grads = mlp_loss_and_grads(spec, theta, batch.features, batch.labels, false);
      require_finite_loss(grads.mean_loss, t);
      auto next = step(opt, std::move(state), std::move(theta), grads.batch_grad);
      theta = std::move(next.theta);
      state = std::move(next.state);
      ++t;
      if (t % config.eval_every != 0) continue;
      const double vl = mlp_evaluate(spec, theta, val_all.features, val_all.labels).loss;
      require_finite_loss(vl, t);
      window.push_back(vl);
      window_sum += vl;
      if (window.size() > kPatience) {
        window_sum -= window.front();
        window.pop_front();
      }
      row.val_loss = window_sum / static_cast<double>(window.size());
      if (window.size() == kPatience && row.val_loss <= target) {
        row.converged = true;
        break;
      }
    }
    row.steps = t;
    row.wall_seconds = seconds_since(row_start);
    out.rows.push_back(row);
    log << "batch " << b << "  lr " << fmt(row.learning_rate) << "  "
        << (row.converged ? "reached target in " + std::to_string(row.steps) + " steps"
                          : "not converged within " + std::to_string(row.steps) + " steps")
        << '\n';
    if (config.lr_rule == LrRule::fixed && r > 0 && b >= 8 * grid.front()) {
      out.warnings.push_back("batch " + std::to_string(b) +
                             " uses the fixed learning rate; larger batches need a larger learning rate "
                             "to realize their speedup (use lr_rule = eps_opt_scaled)");
    }
  }

  std::ostringstream csv;
  csv << std::setprecision(17) << "batch,learning_rate,converged,steps,examples,val_loss,relative_steps\n";
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json wall_rows = nlohmann::json::array();
  const auto& base = out.rows.front();
  for (const auto& row : out.rows) {
    nlohmann::json rel = nullptr;
    if (out.rows.size() > 1 && row.converged && base.converged) {
      rel = static_cast<double>(row.steps) / static_cast<double>(base.steps);
    }
    csv << row.batch << ',' << row.learning_rate << ',' << (row.converged ? 1 : 0) << ',' << row.steps << ','
        << row.steps * row.batch << ',' << row.val_loss << ',' << (rel.is_null() ? std::string() : fmt(rel.get<double>(), 17))
        << '\n';
    rows.push_back({{"batch", row.batch},
                    {"learning_rate", row.learning_rate},
                    {"converged", row.converged},
                    {"steps", row.steps},
                    {"examples", row.steps * row.batch},
                    {"val_loss", row.val_loss},
                    {"relative_steps", rel}});
    wall_rows.push_back({{"batch", row.batch}, {"wall_seconds", row.wall_seconds}});
  }
  nlohmann::json comparison = nullptr;
  if (out.rows.size() > 1) {
    comparison = {{"baseline_batch", base.batch}, {"baseline_converged", base.converged}};
    for (const auto& w : out.warnings) log << "warning: " << w << '\n';
  }

  out.report = {{"command", "sweep"},
                {"efficiency_metric", "optimizer_steps"},
                {"note", "step counts to the target validation loss stand in for wall-clock time; "
                         "GPU parallelism across a batch is not modeled"},
                {"seed", config.seed},
                {"lr_rule", to_string(config.lr_rule)},
                {"eps_max", config.effective_eps_max()},
                {"target_loss", target},
                {"patience_evaluations", kPatience},
                {"eval_every", config.eval_every},
                {"b_noise", out.b_noise ? nlohmann::json(*out.b_noise) : nlohmann::json(nullptr)},
                {"gns", gns_json},
                {"rows", rows},
                {"comparison", comparison},
                {"warnings", out.warnings},
                {kWallClockKey, {{"total_seconds", seconds_since(sweep_start)}, {"rows", wall_rows}}}};
  out.report_path = prepare_output(config, "sweep_report.json");
  out.csv_path = prepare_output(config, "sweep.csv");
  write_json(out.report_path, out.report);
  write_text(out.csv_path, csv.str());
  return out;
}

// ---------------------------------------------------------------------------

VerifyOutcome cmd_verify_quadratic(const RunConfig& config, std::ostream& log) {
  if (config.quadratic_spec.empty()) throw ConfigError("verify-quadratic needs 'quadratic_spec'");
  const auto start = Clock::now();
  const auto problem = load_quadratic_problem(config.quadratic_spec);
  const auto& spec = problem.spec;
  const auto theta = problem.point();
  const std::size_t dim = spec.dim();
  VerifyOutcome out;

  // Dense evaluation with explicit index loops, independent of the library's
  // matrix helpers.
  std::vector<double> g(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) g[i] += spec.hessian()(i, j) * (theta[j] - spec.center()[j]);
  double g_sq = 0.0, ghg = 0.0, tr_sigma = 0.0, tr_hs = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    g_sq += g[i] * g[i];
    tr_sigma += spec.noise_cov()(i, i);
    for (std::size_t j = 0; j < dim; ++j) {
      ghg += g[i] * spec.hessian()(i, j) * g[j];
      tr_hs += spec.hessian()(i, j) * spec.noise_cov()(j, i);
    }
  }
  const auto truth = quadratic_true_noise_scale(spec, theta);
  auto add = [&](std::string name, double expected, double observed, double tol) {
    const bool pass = std::abs(observed - expected) <= tol;
    out.checks.push_back({std::move(name), expected, observed, tol, pass});
  };
  add("b_noise vs dense evaluation", tr_hs / ghg, truth.b_noise, 1e-10 * std::max(1.0, std::abs(tr_hs / ghg)));
  add("b_simple vs dense evaluation", tr_sigma / g_sq, truth.b_simple,
      1e-10 * std::max(1.0, std::abs(tr_sigma / g_sq)));

  // Unbiasedness of the paired statistics.
  constexpr std::size_t kDraws = 10000;
  Rng rng(config.seed, kVerifyStream);
  double rho_sum = 0.0, s_sum = 0.0, rho_sq_sum = 0.0, s_sq_sum = 0.0;
  for (std::size_t i = 0; i < kDraws; ++i) {
    const auto grads = quadratic_sample_grads(spec, theta, config.pair.b_big, rng, true);
    const auto st = nested_paired_batch_stats(grads, config.pair);
    rho_sum += st.rho_sq;
    s_sum += st.s;
    rho_sq_sum += st.rho_sq * st.rho_sq;
    s_sq_sum += st.s * st.s;
  }
  const double n = static_cast<double>(kDraws);
  const double rho_mean = rho_sum / n, s_mean = s_sum / n;
  const double rho_se = std::sqrt(std::max(rho_sq_sum / n - rho_mean * rho_mean, 0.0) / n);
  const double s_se = std::sqrt(std::max(s_sq_sum / n - s_mean * s_mean, 0.0) / n);
  add("mean rho_sq vs |G|^2", g_sq, rho_mean, std::max(0.02 * g_sq, 4.0 * rho_se));
  add("mean S vs tr(Sigma)", tr_sigma, s_mean, std::max(0.02 * tr_sigma, 4.0 * s_se));

  // EMA estimator against the analytic simple noise scale.
  const std::size_t ema_steps = std::max<std::size_t>(2000, config.gns_steps);
  const auto acc = run_gns_quadratic(config, problem, ema_steps);
  const auto est = noise_scale(acc, std::min(config.gns_warmup, ema_steps));
  add("EMA noise scale vs b_simple", truth.b_simple, est.b_noise_hat, 0.10 * truth.b_simple);

  // Step size maximizing the Monte-Carlo one-step loss decrease at B = b_small.
  const std::size_t b = config.pair.b_small;
  const double eps_max = quadratic_eps_max(spec, theta);
  const double predicted = eps_opt(eps_max, truth.b_noise, b);
  std::vector<double> eps_grid;
  for (int k = -40; k <= 40; ++k) eps_grid.push_back(predicted * std::pow(2.0, k / 10.0));
  std::vector<double> gain(eps_grid.size(), 0.0);
  const double base_loss = quadratic_loss(spec, theta);
  std::vector<double> moved(dim);
  for (std::size_t i = 0; i < kDraws; ++i) {
    const auto grads = quadratic_sample_grads(spec, theta, b, rng, false);
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
      for (std::size_t d = 0; d < dim; ++d) moved[d] = theta[d] - eps_grid[k] * grads.batch_grad[d];
      gain[k] += base_loss - quadratic_loss(spec, moved);
    }
  }
  const auto best = static_cast<std::size_t>(std::distance(gain.begin(), std::max_element(gain.begin(), gain.end())));
  const double ratio = eps_grid[best] / predicted;
  out.checks.push_back({"best step size / eps_opt (factor 1.5)", 1.0, ratio, 0.5,
                        ratio <= 1.5 && ratio >= 1.0 / 1.5});

  out.all_pass = std::all_of(out.checks.begin(), out.checks.end(), [](const VerifyCheck& c) { return c.pass; });
  nlohmann::json checks = nlohmann::json::array();
  log << std::left << std::setw(40) << "check" << std::setw(16) << "expected" << std::setw(16) << "observed"
      << "result\n";
  for (const auto& c : out.checks) {
    checks.push_back({{"name", c.name}, {"expected", c.expected}, {"observed", c.observed},
                      {"tolerance", c.tolerance}, {"pass", c.pass}});
    log << std::left << std::setw(40) << c.name << std::setw(16) << fmt(c.expected) << std::setw(16)
        << fmt(c.observed) << (c.pass ? "PASS" : "FAIL") << '\n';
  }
  out.report = {{"command", "verify-quadratic"},
                {"seed", config.seed},
                {"all_pass", out.all_pass},
                {"checks", checks},
                {kWallClockKey, {{"wall_seconds", seconds_since(start)}}}};
  out.report_path = prepare_output(config, "verify_report.json");
  write_json(out.report_path, out.report);
  return out;
}

// ---------------------------------------------------------------------------

GroupingOutcome cmd_group_transforms(const RunConfig& config, std::ostream& log) {
  const auto start = Clock::now();
  ImageSet images;
  if (config.synthetic_images > 0) {
    images = make_synthetic_images(config.synthetic_images, config.image_size, config.image_size, config.seed);
  } else {
    if (config.dataset.empty()) throw ConfigError("group-transforms needs 'dataset' or 'synthetic_images'");
    const auto ds = load_dataset(config.dataset, config.load);
    images = images_from_rows(ds.features, config.image_width);
  }
  if (images.size() <= config.embed_dim) {
    throw DataError("dataset has " + std::to_string(images.size()) + " images; fitting a " +
                    std::to_string(config.embed_dim) + "-dimensional covariance needs at least " +
                    std::to_string(config.embed_dim + 1));
  }
  if (config.transforms.empty() || config.magnitudes.empty()) {
    throw ConfigError("group-transforms needs at least one transform and one magnitude");
  }

  GroupingOutcome out;
  out.tuples = make_tuple_grid(config.transforms, config.magnitudes);
  const RandomFeatureEmbedder embedder(images.height * images.width, config.embed_dim, config.seed);
  out.distances = score_tuples(images, out.tuples, embedder, splitmix64(config.seed ^ kAugStream));
  out.grouping = group_tuples(out.tuples, out.distances, config.num_groups);
  out.report = grouping_report_json(out.tuples, out.distances, out.grouping, config.num_groups);
  out.report["command"] = "group-transforms";
  out.report["seed"] = config.seed;
  out.report["embed_dim"] = config.embed_dim;
  out.report["images"] = images.size();
  out.report[kWallClockKey] = {{"wall_seconds", seconds_since(start)}};
  out.report_path = prepare_output(config, "grouping_report.json");
  write_json(out.report_path, out.report);

  log << out.tuples.size() << " tuples -> " << out.grouping.groups.size() << " groups\n";
  if (out.grouping.fewer_groups_than_requested) {
    log << "warning: only " << out.grouping.groups.size() << " distinct distance bands (requested "
        << config.num_groups << ")\n";
  }
  log << std::left << std::setw(6) << "group" << std::setw(28) << "band" << std::setw(9) << "members"
      << "representative\n";
  for (const auto& g : out.grouping.groups) {
    const auto& rep = out.tuples[g.representative];
    log << std::left << std::setw(6) << g.group_id << std::setw(28)
        << ("[" + fmt(g.band_low, 4) + ", " + fmt(g.band_high, 4) + "]") << std::setw(9) << g.members.size()
        << to_string(rep.transform) << " @ " << rep.magnitude << '\n';
  }
  return out;
}

}  // namespace gnsadv
