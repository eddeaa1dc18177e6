// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gnsadv/augsearch.hpp"
#include "gnsadv/commands.hpp"
#include "gnsadv/config.hpp"
#include "gnsadv/data.hpp"
#include "gnsadv/gns.hpp"
#include "gnsadv/models.hpp"
#include "gnsadv/numcore.hpp"
#include "gnsadv/random.hpp"

using namespace gnsadv;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gnsadv_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Matrix random_psd(std::size_t d, std::size_t rank, Rng& rng) {
  Matrix f(d, rank);
  for (double& v : f.data()) v = rng.normal();
  return matmul(f, f.transpose());
}

// 1 -------------------------------------------------------------------------
Verdict gradient_correctness() {
  Rng rng(1001);
  double worst = 0.0;
  int cases = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t layers = 1 + rng.below(3);
    std::vector<std::size_t> widths{1 + rng.below(8)};
    for (std::size_t l = 1; l < layers; ++l) widths.push_back(1 + rng.below(64));
    widths.push_back(2 + rng.below(5));
    const MlpSpec spec{widths, trial % 2 ? Activation::relu : Activation::tanh, rng.next_u64()};
    const std::size_t n = 1 + rng.below(8);
    Matrix x(n, widths.front());
    for (double& v : x.data()) v = rng.uniform(-2, 2);
    std::vector<std::size_t> y(n);
    for (auto& l : y) l = rng.below(widths.back());
    const auto theta = init_mlp(spec);
    const auto g = mlp_loss_and_grads(spec, theta, x, y, false);
    const auto fd = finite_diff_gradient([&](const ParameterVector& p) { return mlp_loss(spec, p, x, y); },
                                         theta);
    worst = std::max(worst, relative_l2_error(g.batch_grad, fd));
    ++cases;
  }
  return {worst <= 1e-5, std::to_string(cases) + " random MLPs, worst relative L2 error " + num(worst) +
                             " (limit 1e-5)"};
}

// 2 -------------------------------------------------------------------------
QuadraticSpec wide_quadratic(std::vector<double>& theta) {
  const std::size_t d = 64;
  std::vector<double> sigma(d);
  theta.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    sigma[i] = 0.5 + static_cast<double>(i) / (d - 1);
    theta[i] = i % 2 == 0 ? 0.5 : -0.5;
  }
  return QuadraticSpec::create(Matrix::identity(d), Matrix::diagonal(sigma), std::vector<double>(d, 0.0), 7);
}

Verdict estimator_unbiasedness() {
  std::vector<double> theta;
  const auto spec = wide_quadratic(theta);
  const double g_sq = squared_norm(quadratic_true_gradient(spec, theta));
  const double tr = spec.noise_cov().trace();
  const PairedBatchConfig pair{2, 16};
  Rng rng(2002);
  const int draws = 10000;
  double rho = 0.0, s = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto st = nested_paired_batch_stats(quadratic_sample_grads(spec, theta, pair.b_big, rng), pair);
    rho += st.rho_sq;
    s += st.s;
  }
  const double rho_err = std::abs(rho / draws - g_sq) / g_sq;
  const double s_err = std::abs(s / draws - tr) / tr;
  return {rho_err <= 0.02 && s_err <= 0.02,
          "10^4 paired draws: rho_sq rel. error " + num(rho_err) + ", s rel. error " + num(s_err) +
              " (limit 0.02)"};
}

// 3 -------------------------------------------------------------------------
// Dense loops over explicit entries; shares nothing with the library's routine.
std::pair<double, double> dense_noise_scales(const Matrix& h, const Matrix& sigma, const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i] += h(i, j) * d[j];
  double tr_h_sigma = 0.0, tr_sigma = 0.0, g_h_g = 0.0, g_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tr_sigma += sigma(i, i);
    g_sq += g[i] * g[i];
    for (std::size_t j = 0; j < n; ++j) {
      tr_h_sigma += h(i, j) * sigma(j, i);
      g_h_g += g[i] * h(i, j) * g[j];
    }
  }
  return {tr_h_sigma / g_h_g, tr_sigma / g_sq};
}

Verdict oracle_equivalence() {
  Rng rng(3003);
  double iso_gap = 0.0, dense_err = 0.0, min_general_gap = 1e300;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + rng.below(6);
    const auto sigma = random_psd(d, d, rng);
    std::vector<double> center(d), theta(d), diff(d);
    for (std::size_t i = 0; i < d; ++i) {
      center[i] = rng.normal();
      theta[i] = rng.normal();
      diff[i] = theta[i] - center[i];
    }
    const double c = rng.uniform(0.1, 10.0);
    const auto iso = QuadraticSpec::create(c * Matrix::identity(d), sigma, center);
    const auto ns_iso = quadratic_true_noise_scale(iso, theta);
    iso_gap = std::max(iso_gap, std::abs(ns_iso.b_noise - ns_iso.b_simple) / ns_iso.b_simple);

    auto h = random_psd(d, d + 2, rng);
    for (std::size_t i = 0; i < d; ++i) h(i, i) += 0.1 * (1 + static_cast<double>(i));
    const auto general = QuadraticSpec::create(h, sigma, center);
    const auto ns = quadratic_true_noise_scale(general, theta);
    const auto [b_noise_ref, b_simple_ref] = dense_noise_scales(general.hessian(), general.noise_cov(), diff);
    dense_err = std::max({dense_err, std::abs(ns.b_noise - b_noise_ref) / b_noise_ref,
                          std::abs(ns.b_simple - b_simple_ref) / b_simple_ref});
    min_general_gap = std::min(min_general_gap, std::abs(ns.b_noise - ns.b_simple) / ns.b_simple);
  }
  const bool pass = iso_gap <= 1e-12 && dense_err <= 1e-10 && min_general_gap > 1e-6;
  return {pass, "H=cI: max |b_noise-b_simple|/b_simple " + num(iso_gap) + " (limit 1e-12); general H: dense "
                "mismatch " + num(dense_err) + " (limit 1e-10), smallest gap between the two " +
                    num(min_general_gap)};
}

// 4 -------------------------------------------------------------------------
Verdict estimator_consistency() {
  std::vector<double> theta;
  const auto spec = wide_quadratic(theta);
  const double b_simple = quadratic_true_noise_scale(spec, theta).b_simple;
  const PairedBatchConfig pair{2, 16};
  Rng rng(4004);
  GnsAccumulator acc(0.01);
  for (int t = 0; t < 2000; ++t)
    acc = ema_update(acc, nested_paired_batch_stats(quadratic_sample_grads(spec, theta, pair.b_big, rng), pair));
  const double est = noise_scale(acc, kDefaultWarmup).b_noise_hat;
  const double err = std::abs(est - b_simple) / b_simple;
  return {err <= 0.10, "2000 EMA steps at alpha 0.01: estimate " + num(est) + " vs b_simple " + num(b_simple) +
                           ", rel. error " + num(err) + " (limit 0.10)"};
}

// 5 -------------------------------------------------------------------------
Verdict eps_opt_validation() {
  const auto spec = QuadraticSpec::create(Matrix{{3.0, 0.4, 0.0, 0.1},
                                                 {0.4, 1.5, 0.2, 0.0},
                                                 {0.0, 0.2, 0.8, 0.3},
                                                 {0.1, 0.0, 0.3, 0.5}},
                                          Matrix{{4.0, 1.0, 0.0, 0.5},
                                                 {1.0, 3.0, 0.5, 0.0},
                                                 {0.0, 0.5, 2.0, 0.2},
                                                 {0.5, 0.0, 0.2, 1.0}},
                                          {0.0, 0.0, 0.0, 0.0});
  const std::vector<double> theta{0.6, -0.4, 0.5, 0.3};
  const std::size_t batch = 4;
  const double eps_max = quadratic_eps_max(spec, theta);
  const double b_noise = quadratic_true_noise_scale(spec, theta).b_noise;
  const double predicted = eps_opt(eps_max, b_noise, batch);

  std::vector<double> grid;
  for (int i = -40; i <= 40; ++i) grid.push_back(predicted * std::pow(4.0, i / 40.0));
  std::vector<double> gain(grid.size(), 0.0);
  const double base = quadratic_loss(spec, theta);
  Rng rng(5005);
  const int draws = 10000;
  std::vector<double> moved(theta.size());
  for (int n = 0; n < draws; ++n) {
    const auto g = quadratic_sample_grads(spec, theta, batch, rng, false).batch_grad;
    for (std::size_t e = 0; e < grid.size(); ++e) {
      for (std::size_t i = 0; i < theta.size(); ++i) moved[i] = theta[i] - grid[e] * g[i];
      gain[e] += (base - quadratic_loss(spec, moved)) / draws;
    }
  }
  const double best = grid[std::max_element(gain.begin(), gain.end()) - gain.begin()];
  const double ratio = best / predicted;

  // Integer noise scale so B = B_noise is representable: H = 2I, G = (2,0), tr(Σ) = 64.
  const auto exact = QuadraticSpec::create(2.0 * Matrix::identity(2), Matrix::diagonal(std::vector<double>{32, 32}),
                                           {0.0, 0.0});
  const std::vector<double> at{1.0, 0.0};
  const double em = quadratic_eps_max(exact, at);
  const double bn = quadratic_true_noise_scale(exact, at).b_noise;
  const bool half = bn == 16.0 && eps_opt(em, bn, 16) == em / 2.0;

  const bool pass = ratio >= 1.0 / 1.5 && ratio <= 1.5 && half;
  return {pass, "Monte-Carlo peak " + num(best) + " vs eps_opt " + num(predicted) + " (ratio " + num(ratio) +
                    ", limit factor 1.5); eps_opt(B = B_noise) = eps_max/2 " + (half ? "exactly" : "NOT exact")};
}

// 6 -------------------------------------------------------------------------
Verdict speedup_analog() {
  std::string detail;
  bool pass = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::ostringstream log;
    const auto dir = scratch("sweep_" + std::to_string(seed));
    const auto cfg = make_run_config({{"seed", std::to_string(seed)},
                                      {"output_dir", dir.string()},
                                      {"synthetic_samples", "4000"},
                                      {"synthetic_dim", "8"},
                                      {"synthetic_classes", "4"},
                                      {"synthetic_separation", "2.5"},
                                      {"eps_max", "0.5"},
                                      {"gns_steps", "300"},
                                      {"steps", "3000"},
                                      {"eval_every", "5"},
                                      {"batch_grid", "8,recommended"},
                                      {"lr_rule", "eps_opt_scaled"},
                                      {"target_loss", "0.36"}});
    const auto out = cmd_sweep(cfg, log);
    const auto& base = out.rows.at(0);
    const auto& rec = out.rows.at(1);
    const bool ok = base.converged && rec.converged &&
                    static_cast<double>(rec.steps) <= 0.6 * static_cast<double>(base.steps);
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += "seed " + std::to_string(seed) + ": B=" + std::to_string(rec.batch) + " " +
              std::to_string(rec.steps) + " steps vs B=8 " + std::to_string(base.steps) +
              (base.converged && rec.converged
                   ? " (" + num(static_cast<double>(rec.steps) / static_cast<double>(base.steps)) + ")"
                   : " (not converged)");
  }
  return {pass, detail + " (limit 0.6)"};
}

// 7 -------------------------------------------------------------------------
Verdict shuffle_quality() {
  Rng rng(7007);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[shuffle_epoch(4, rng)];
  const double expected = draws / 24.0;
  double chi2 = 0.0;
  for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  chi2 += static_cast<double>(24 - counts.size()) * expected;
  // Upper 0.001 quantile of chi-square with 23 degrees of freedom.
  const double critical = 49.7282324664315;

  bool coverage = true;
  for (int trial = 0; trial < 500 && coverage; ++trial) {
    const std::size_t n = 1 + rng.below(500), b = 1 + rng.below(n);
    std::vector<int> seen(n, 0);
    for (const auto& batch : make_batches(n, b, shuffle_epoch(n, rng)))
      for (auto i : batch.indices) ++seen[i];
    coverage = std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
  }
  return {counts.size() == 24 && chi2 < critical && coverage,
          "chi-square " + num(chi2) + " over " + std::to_string(counts.size()) + "/24 permutations (critical " +
              num(critical) + " at p=0.001); epoch coverage " + (coverage ? "exact" : "BROKEN")};
}

// 8 -------------------------------------------------------------------------
Verdict frechet() {
  const auto one_d = [](double m, double v) { return GaussianSummary{{m}, Matrix{{v}}, 2}; };
  const double d1 = frechet_distance(one_d(0, 1), one_d(1, 1));
  const double d2 = frechet_distance(one_d(0, 1), one_d(1, 4));
  const double closed = std::max(std::abs(d1 - 1.0), std::abs(d2 - 2.0));

  Rng rng(8008);
  double asym = 0.0, self = 0.0, recon = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(16);
    GaussianSummary a{std::vector<double>(k), random_psd(k, 1 + rng.below(k + 2), rng), k + 1};
    GaussianSummary b{std::vector<double>(k), random_psd(k, 1 + rng.below(k + 2), rng), k + 1};
    for (double& v : a.mean) v = rng.normal();
    for (double& v : b.mean) v = rng.normal();
    asym = std::max(asym, std::abs(frechet_distance(a, b) - frechet_distance(b, a)));
    self = std::max(self, std::abs(frechet_distance(a, a)));
    const auto r = sqrt_psd(a.cov);
    recon = std::max(recon, frobenius_norm(matmul(r, r) - a.cov) / frobenius_norm(a.cov));
  }
  const bool pass = closed <= 1e-9 && asym <= 1e-9 && self <= 1e-9 && recon <= 1e-8;
  return {pass, "1-D cases off by " + num(closed) + " (limit 1e-9); 100 random summaries: asymmetry " + num(asym) +
                    ", self-distance " + num(self) + " (limit 1e-9), sqrt reconstruction " + num(recon) +
                    " (limit 1e-8)"};
}

// 9 -------------------------------------------------------------------------
Verdict grouping() {
  std::ostringstream log;
  const auto cfg = make_run_config({{"seed", "9"},
                                    {"output_dir", scratch("grouping").string()},
                                    {"synthetic_images", "200"},
                                    {"image_size", "8"},
                                    {"num_groups", "5"}});
  const auto out = cmd_group_transforms(cfg, log);
  std::vector<int> seen(out.tuples.size(), 0);
  for (const auto& g : out.grouping.groups)
    for (auto i : g.member_indices) ++seen[i];
  const bool partition = std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });

  std::set<std::size_t> identity_groups;
  double identity_distance = 0.0;
  for (const auto& g : out.grouping.groups)
    for (auto i : g.member_indices)
      if (out.tuples[i].magnitude == 0.0) {
        identity_groups.insert(g.group_id);
        identity_distance = std::max(identity_distance, out.distances[i]);
      }
  const bool identity_ok = identity_groups.size() == 1 && *identity_groups.begin() == out.grouping.groups.front().group_id &&
                           identity_distance <= 1e-9;
  const bool pass = out.tuples.size() == 30 && out.grouping.groups.size() == 5 && partition && identity_ok;
  return {pass, std::to_string(out.tuples.size()) + " tuples into " + std::to_string(out.grouping.groups.size()) +
                    " groups (requested 5), partition " + (partition ? "exact" : "BROKEN") +
                    "; magnitude-0 tuples in " + std::to_string(identity_groups.size()) +
                    " group(s), distance " + num(identity_distance)};
}

// 10 ------------------------------------------------------------------------
Verdict determinism() {
  auto config = [](const fs::path& dir) {
    return make_run_config({{"seed", "10"},
                            {"output_dir", dir.string()},
                            {"synthetic_samples", "600"},
                            {"steps", "150"},
                            {"gns_warmup", "20"}});
  };
  std::ostringstream log;
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ta = cmd_train(config(a), log), tb = cmd_train(config(b), log);
  const auto ga = cmd_estimate_gns(config(a), log), gb = cmd_estimate_gns(config(b), log);
  const bool train_same = without_wall_clock(ta.summary).dump() == without_wall_clock(tb.summary).dump() &&
                          slurp(ta.metrics_path) == slurp(tb.metrics_path);
  const bool gns_same = without_wall_clock(ga.report).dump() == without_wall_clock(gb.report).dump() &&
                        slurp(ga.curve_path) == slurp(gb.curve_path);
  return {train_same && gns_same, std::string("train reports ") + (train_same ? "identical" : "DIFFER") +
                                      ", estimate-gns reports " + (gns_same ? "identical" : "DIFFER") +
                                      " (wall-clock section excluded)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime bound
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 10, gradient_correctness},
      {2, "estimator unbiasedness", 30, estimator_unbiasedness},
      {3, "oracle equivalence", 0, oracle_equivalence},
      {4, "estimator consistency", 60, estimator_consistency},
      {5, "eps_opt validation", 0, eps_opt_validation},
      {6, "speedup analog", 300, speedup_analog},
      {7, "shuffle quality", 0, shuffle_quality},
      {8, "frechet distance", 0, frechet},
      {9, "grouping", 0, grouping},
      {10, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = v.pass;
    std::string timing = num(secs) + " s";
    if (c.limit_seconds > 0) {
      timing += " (limit " + num(c.limit_seconds) + " s)";
      pass = pass && secs < c.limit_seconds;
    }
    if (!pass) ++failures;
    std::printf("[%s] %2d %s: %s; %s\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
