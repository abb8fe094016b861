// Copyright 2026 the loospec authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "loospec/bounds.hpp"
#include "loospec/cluster.hpp"
#include "loospec/errors.hpp"
#include "loospec/io.hpp"
#include "loospec/kmeans.hpp"
#include "loospec/mixture.hpp"

namespace loospec {

/// Monte Carlo experiment description. Grid keys are swept parameters; a cell
/// is one point of their cartesian product.
struct ExperimentConfig {
  std::string experiment;  // bounds | rate_gmm | rate_subg | adaptive | suboptimality | entrywise
  std::map<std::string, std::vector<std::string>> grid;
  std::size_t trials_per_cell = 1;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  std::string output_path;

  void validate() const {
    static const std::set<std::string> kinds{"bounds",   "rate_gmm",      "rate_subg",
                                             "adaptive", "suboptimality", "entrywise"};
    if (!kinds.count(experiment)) throw InvalidInput("unknown experiment: " + experiment);
    if (grid.empty()) throw InvalidInput("experiment grid is empty");
    if (trials_per_cell < 1) throw InvalidInput("trials_per_cell must be positive");
    if (workers < 1) throw InvalidInput("workers must be positive");
    if (output_path.empty()) throw InvalidInput("output_path missing");
  }
};

struct TrialRecord {
  std::string cell_id;
  std::size_t trial_index = 0;
  std::uint64_t seed_used = 0;
  std::string estimator;
  double loss = 0.0;
  double rho0 = kNaN, psi0 = kNaN, psi1 = kNaN, psi3 = kNaN;
  double r_hat = kNaN;
  double max_ratio = kNaN;  // max bound/actual over applicable bounds
  std::size_t violations = 0;
  std::string note;
};

/// "key=value;key=value" with keys sorted; doubles as the cell identity.
inline std::string make_cell_id(const std::map<std::string, std::string>& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

inline std::map<std::string, std::string> parse_cell_id(const std::string& id) {
  std::map<std::string, std::string> out;
  std::string token;
  std::istringstream is(id);
  while (std::getline(is, token, ';')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidInput("bad cell id: " + id);
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

/// Typed access to one cell's parameters.
struct CellView {
  const std::map<std::string, std::string>& kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string str(const std::string& key, const std::string& def = "") const {
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
  }
  double num(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw InvalidInput("missing experiment parameter: " + key);
    return parse_double(it->second);
  }
  double num(const std::string& key, double def) const {
    auto it = kv.find(key);
    return it == kv.end() ? def : parse_double(it->second);
  }
  std::size_t integer(const std::string& key) const {
    const double v = num(key);
    if (v < 0 || v != std::floor(v)) throw InvalidInput("parameter must be an integer: " + key);
    return static_cast<std::size_t>(v);
  }
  std::size_t integer(const std::string& key, std::size_t def) const {
    return has(key) ? integer(key) : def;
  }
};

/// Centers Delta/sqrt(2) * e_a, so every pairwise distance is exactly Delta.
inline Matrix axis_centers(std::size_t p, std::size_t k, double separation) {
  if (k > p) throw InvalidInput("axis_centers: k > p");
  Matrix c(p, k);
  for (std::size_t a = 0; a < k; ++a) c(a, a) = separation / std::sqrt(2.0);
  return c;
}

/// Three centers with a dominant direction (spread a), a near pair at
/// distance ~d along it, and a weak offset h on a second axis. Designed so
/// lambda_2 sits at the noise level while lambda_1 - lambda_2 stays large.
inline Matrix three_gap_centers(std::size_t p, double a, double d, double h) {
  if (p < 2) throw InvalidInput("three_gap_centers: p >= 2 required");
  Matrix c(p, 3);
  c(0, 0) = -a;
  c(0, 1) = a - d;
  c(1, 1) = h;
  c(0, 2) = a;
  return c;
}

namespace detail {

inline NoiseSpec noise_from_cell(const CellView& cell) {
  const std::string family = cell.str("noise.family", "isotropic_gaussian");
  if (cell.has("sigma_bar")) {
    const double sb = cell.num("sigma_bar");
    if (sb == 0.0) return NoiseSpec::noiseless();
    if (family == "gaussian") return NoiseSpec::gaussian(sb);
    if (family == "isotropic_gaussian") return NoiseSpec::isotropic_gaussian(sb);
    if (family == "laplace") return NoiseSpec::laplace(sb / std::sqrt(2.0));
    if (family == "rademacher") return NoiseSpec::rademacher(sb);
    if (family == "uniform") return NoiseSpec::uniform(sb * std::sqrt(3.0));
    throw InvalidInput("unknown noise family: " + family);
  }
  const double param = cell.has("noise.scale") ? cell.num("noise.scale") : cell.num("sigma");
  if (param == 0.0) return NoiseSpec::noiseless();  // an explicit zero in the config
  NoiseSpec spec;
  spec.family = noise_family_from_string(family);
  spec.param = param;
  return spec;
}

inline MixtureInstance mixture_from_cell(const CellView& cell, std::uint64_t seed) {
  MixtureSpec spec;
  spec.p = cell.integer("p");
  spec.n = cell.integer("n");
  spec.k = cell.integer("k", 2);
  spec.noise = noise_from_cell(cell);
  spec.seed = seed;
  const std::string geometry = cell.str("geometry", "axes");
  if (geometry == "axes") {
    spec.centers = axis_centers(spec.p, spec.k, cell.num("Delta"));
  } else if (geometry == "twocluster") {
    if (spec.k != 2) throw InvalidInput("twocluster geometry needs k=2");
    const double delta = cell.num("Delta") / (2.0 * std::sqrt(static_cast<double>(spec.p)));
    spec.centers = Matrix(spec.p, 2);
    for (std::size_t i = 0; i < spec.p; ++i) {
      spec.centers(i, 0) = delta;
      spec.centers(i, 1) = -delta;
    }
  } else if (geometry == "threegap") {
    if (spec.k != 3) throw InvalidInput("threegap geometry needs k=3");
    spec.centers = three_gap_centers(spec.p, cell.num("center_a"), cell.num("center_d"),
                                     cell.num("center_h"));
  } else {
    throw InvalidInput("unknown geometry: " + geometry);
  }
  return make_instance(spec);
}

inline void fill_diag(TrialRecord& rec, const DiagnosticQuantities& d) {
  rec.rho0 = d.rho0;
  rec.psi0 = d.psi0;
  rec.psi1 = d.psi1;
  rec.psi3 = d.psi3;
}

inline KMeansOptions kmeans_opts(std::uint64_t trial_seed) {
  KMeansOptions opts;
  opts.seed = substream_key(trial_seed, 7, 0);
  return opts;
}

inline std::vector<TrialRecord> run_trial(const std::string& experiment, const CellView& cell,
                                          const std::string& cell_id, std::size_t trial,
                                          std::uint64_t seed) {
  std::vector<TrialRecord> out;
  auto base = [&](const std::string& estimator) {
    TrialRecord r;
    r.cell_id = cell_id;
    r.trial_index = trial;
    r.seed_used = seed;
    r.estimator = estimator;
    return r;
  };

  if (experiment == "bounds") {
    MixtureInstance inst = mixture_from_cell(cell, seed);
    const DiagnosticQuantities diag = diagnostics(inst);
    const std::size_t r = cell.integer("r", diag.kappa);
    auto reports = bound_report(inst.x, r, &inst);
    TrialRecord rec = base("bounds");
    fill_diag(rec, diag);
    double max_ratio = kNaN;
    auto tally = [&](const BoundValue& b, double actual) {
      if (!b.applicable) return;
      if (b.value + 1e-9 < actual) rec.violations++;
      if (actual > 1e-12) {
        const double ratio = b.value / actual;
        if (std::isnan(max_ratio) || ratio > max_ratio) max_ratio = ratio;
      }
    };
    for (const auto& rep : reports) {
      tally(rep.wedin, rep.actual_distance);
      tally(rep.loo, rep.actual_distance);
      tally(rep.loo_relaxed, rep.actual_distance);
      // the kappa-rank bound controls the kappa-rank distance
      if (rep.mixture_kappa) {
        const double actual_kappa =
            diag.kappa == r ? rep.actual_distance
                            : actual_loo_distance(inst.x, rep.column_index, diag.kappa);
        tally(*rep.mixture_kappa, actual_kappa);
      }
      if (rep.mixture_r) tally(*rep.mixture_r, rep.actual_distance);
    }
    rec.max_ratio = max_ratio;
    out.push_back(std::move(rec));
    return out;
  }

  if (experiment == "rate_gmm" || experiment == "rate_subg") {
    MixtureInstance inst = mixture_from_cell(cell, seed);
    const DiagnosticQuantities diag = diagnostics(inst);
    const bool gmm = experiment == "rate_gmm";
    const std::size_t r = cell.integer("r", gmm ? inst.spec.k : diag.kappa);
    auto res = spectral_cluster(inst.x, inst.spec.k, r, kmeans_opts(seed));
    attach_loss(res, inst.z_star, inst.spec.k);
    TrialRecord rec = base(gmm ? "spectral" : "spectral_kappa");
    fill_diag(rec, diag);
    rec.loss = *res.loss;
    out.push_back(std::move(rec));
    return out;
  }

  if (experiment == "adaptive") {
    MixtureInstance inst = mixture_from_cell(cell, seed);
    const DiagnosticQuantities diag = diagnostics(inst);
    const double threshold =
        cell.has("T") ? cell.num("T") : cell.num("T_mult") * diag.e_opnorm;

    auto adaptive = adaptive_spectral_cluster(inst.x, inst.spec.k, threshold,
                                              kmeans_opts(seed));
    attach_loss(adaptive, inst.z_star, inst.spec.k);
    TrialRecord rec_a = base("adaptive");
    fill_diag(rec_a, diag);
    rec_a.loss = *adaptive.loss;
    rec_a.r_hat = static_cast<double>(adaptive.r_used);
    out.push_back(std::move(rec_a));

    auto fixed = spectral_cluster(inst.x, inst.spec.k, diag.kappa, kmeans_opts(seed));
    attach_loss(fixed, inst.z_star, inst.spec.k);
    TrialRecord rec_f = base("spectral_kappa");
    fill_diag(rec_f, diag);
    rec_f.loss = *fixed.loss;
    out.push_back(std::move(rec_f));
    return out;
  }

  if (experiment == "suboptimality") {
    const std::size_t p = cell.integer("p"), n = cell.integer("n");
    const double separation = cell.num("Delta");
    const double delta = separation / (2.0 * std::sqrt(static_cast<double>(p)));
    const NoiseSpec noise = noise_from_cell(cell);
    MixtureInstance inst = two_cluster_instance(delta, p, n, noise, seed);
    const DiagnosticQuantities diag = diagnostics(inst);

    auto rank_one = rank_one_cluster(inst.x);
    attach_loss(rank_one.clustering, inst.z_star, 2);
    TrialRecord rec_z = base("rankone");
    fill_diag(rec_z, diag);
    rec_z.loss = *rank_one.clustering.loss;
    out.push_back(std::move(rec_z));

    TrialRecord rec_s = base("sign");
    fill_diag(rec_s, diag);
    rec_s.loss = misclustering_loss(rank_one.sign_labels, inst.z_star, 2).loss;
    out.push_back(std::move(rec_s));

    TrialRecord rec_l = base("lrt");
    fill_diag(rec_l, diag);
    rec_l.loss = misclustering_loss(lrt_cluster(inst.x, delta, noise), inst.z_star, 2).loss;
    out.push_back(std::move(rec_l));
    return out;
  }

  // entrywise
  {
    MixtureInstance inst = mixture_from_cell(cell, seed);
    const DiagnosticQuantities diag = diagnostics(inst);
    const std::size_t r = cell.integer("r", diag.kappa);
    const SvdResult svd = thin_svd(inst.x, r);
    const Matrix reduced = matmul_at_b(svd.left, inst.x);

    const bool oracle_feasible = static_cast<double>(inst.spec.n) *
                                     std::log(static_cast<double>(inst.spec.k)) <=
                                 std::log(1e7);
    KMeansResult km = oracle_feasible ? exact_kmeans_oracle(reduced, inst.spec.k)
                                      : kmeans(reduced, inst.spec.k, kmeans_opts(seed));
    ClusteringResult res;
    res.labels = km.labels;
    res.centers_reduced = km.centers;
    res.centers_lifted = matmul(svd.left, km.centers);
    res.objective = km.objective;
    res.r_used = r;
    attach_loss(res, inst.z_star, inst.spec.k);

    TrialRecord rec = base(oracle_feasible ? "entrywise_oracle" : "entrywise_lloyd");
    fill_diag(rec, diag);
    rec.loss = *res.loss;
    for (const auto& e : entrywise_diagnostics(inst, res, r))
      if (e.misclustered && 2.0 * e.full_noise_norm < e.threshold_simple - 1e-12)
        rec.violations++;
    out.push_back(std::move(rec));
    return out;
  }
}

inline std::string sanitize_note(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == ';') c = ' ';
  return s;
}

}  // namespace detail

inline std::string records_csv_header() {
  return "cell_id,trial_index,seed_used,estimator,loss,rho0,psi0,psi1,psi3,r_hat,"
         "max_ratio,violations,note";
}

constexpr const char* kRecordsSchemaLine = "#schema loospec-records 1";

inline std::string records_to_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << kRecordsSchemaLine << "\n" << records_csv_header() << "\n";
  for (const auto& r : records) {
    os << r.cell_id << "," << r.trial_index << "," << r.seed_used << "," << r.estimator << ","
       << format_double(r.loss) << "," << format_double(r.rho0) << ","
       << format_double(r.psi0) << "," << format_double(r.psi1) << ","
       << format_double(r.psi3) << "," << format_double(r.r_hat) << ","
       << format_double(r.max_ratio) << "," << r.violations << "," << r.note << "\n";
  }
  return os.str();
}

inline std::vector<TrialRecord> records_from_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open records file: " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("#schema loospec-records", 0) != 0)
    throw InvalidInput("missing schema line in " + path);
  if (!std::getline(f, line) || line != records_csv_header())
    throw InvalidInput("unexpected records header in " + path);
  std::vector<TrialRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 13) throw InvalidInput("bad record row in " + path);
    TrialRecord r;
    r.cell_id = cells[0];
    r.trial_index = static_cast<std::size_t>(std::stoull(cells[1]));
    r.seed_used = std::stoull(cells[2]);
    r.estimator = cells[3];
    r.loss = parse_double(cells[4]);
    r.rho0 = parse_double(cells[5]);
    r.psi0 = parse_double(cells[6]);
    r.psi1 = parse_double(cells[7]);
    r.psi3 = parse_double(cells[8]);
    r.r_hat = parse_double(cells[9]);
    r.max_ratio = parse_double(cells[10]);
    r.violations = static_cast<std::size_t>(std::stoull(cells[11]));
    r.note = cells[12];
    out.push_back(std::move(r));
  }
  return out;
}

inline std::uint64_t trial_seed(std::uint64_t master_seed, const std::string& cell_id,
                                std::size_t trial_index) {
  std::uint64_t h = master_seed;
  for (unsigned char c : cell_id) h = mix64(h ^ (0x100000001B3ULL * (c + 1)));
  return substream_key(h, 11, trial_index);
}

namespace detail {

inline void sort_records(std::vector<TrialRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.cell_id != b.cell_id) return a.cell_id < b.cell_id;
    if (a.trial_index != b.trial_index) return a.trial_index < b.trial_index;
    return a.estimator < b.estimator;
  });
}

}  // namespace detail

/// Run every (cell, trial) pair of the config, workers in parallel. Output is
/// a pure function of (config, master_seed): per-trial seeds are derived by
/// hashing, results are sorted before writing, and writes go through an
/// atomic rename. Existing (cell, trial) groups in the output file are kept
/// and only missing pairs are computed, so an interrupted sweep resumes to
/// the same final file.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();

  // cells: cartesian product of the grid in sorted key order
  std::vector<std::map<std::string, std::string>> cells{{}};
  for (const auto& [key, values] : cfg.grid) {
    if (values.empty()) throw InvalidInput("empty grid axis: " + key);
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& partial : cells)
      for (const auto& v : values) {
        auto copy = partial;
        copy[key] = v;
        next.push_back(std::move(copy));
      }
    cells = std::move(next);
  }

  std::vector<TrialRecord> existing;
  std::set<std::pair<std::string, std::size_t>> done;
  if (std::filesystem::exists(cfg.output_path)) {
    // keep only records whose recorded seed matches this config's derivation;
    // anything else is stale (different master_seed) and is recomputed
    for (auto& r : records_from_csv_file(cfg.output_path)) {
      if (r.seed_used != trial_seed(cfg.master_seed, r.cell_id, r.trial_index)) continue;
      done.insert({r.cell_id, r.trial_index});
      existing.push_back(std::move(r));
    }
  }

  struct Task {
    std::map<std::string, std::string> params;
    std::string cell_id;
    std::size_t trial;
  };
  std::vector<Task> tasks;
  for (const auto& params : cells) {
    const std::string id = make_cell_id(params);
    for (std::size_t t = 0; t < cfg.trials_per_cell; ++t)
      if (!done.count({id, t})) tasks.push_back({params, id, t});
  }

  std::vector<std::vector<TrialRecord>> slots(tasks.size());
  const std::size_t stage_size = std::max<std::size_t>(1, (tasks.size() + 3) / 4);
  std::size_t stage_begin = 0;
  while (stage_begin < tasks.size()) {
    const std::size_t stage_end = std::min(tasks.size(), stage_begin + stage_size);
    std::atomic<std::size_t> cursor{stage_begin};
    auto work = [&]() {
      for (;;) {
        const std::size_t t = cursor.fetch_add(1);
        if (t >= stage_end) return;
        const Task& task = tasks[t];
        const std::uint64_t seed = trial_seed(cfg.master_seed, task.cell_id, task.trial);
        try {
          slots[t] = detail::run_trial(cfg.experiment, CellView{task.params}, task.cell_id,
                                       task.trial, seed);
        } catch (const std::exception& e) {
          TrialRecord r;
          r.cell_id = task.cell_id;
          r.trial_index = task.trial;
          r.seed_used = seed;
          r.estimator = "failed";
          r.note = detail::sanitize_note(e.what());
          slots[t] = {std::move(r)};
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < cfg.workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    // flush completed work so an interrupted sweep can resume
    std::vector<TrialRecord> snapshot = existing;
    for (std::size_t t = 0; t < stage_end; ++t)
      for (const auto& r : slots[t]) snapshot.push_back(r);
    detail::sort_records(snapshot);
    atomic_write_text(cfg.output_path, records_to_csv(snapshot));
    stage_begin = stage_end;
  }

  std::vector<TrialRecord> all = std::move(existing);
  for (auto& slot : slots)
    for (auto& r : slot) all.push_back(std::move(r));
  detail::sort_records(all);
  atomic_write_text(cfg.output_path, records_to_csv(all));
  return all;
}

/// Parse an experiment config from flat key=value text. Reserved keys:
/// experiment, trials, master_seed, workers, output; everything else is a
/// grid axis whose value is a comma-separated list.
inline ExperimentConfig experiment_config_from_kv(std::map<std::string, std::string> kv) {
  ExperimentConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  cfg.experiment = take("experiment").value_or("");
  if (auto v = take("trials")) cfg.trials_per_cell = static_cast<std::size_t>(std::stoull(*v));
  if (auto v = take("master_seed")) cfg.master_seed = std::stoull(*v);
  if (auto v = take("workers")) cfg.workers = static_cast<std::size_t>(std::stoull(*v));
  if (auto v = take("output")) cfg.output_path = *v;
  for (const auto& [key, value] : kv) {
    std::vector<std::string> items = split_csv_line(value);
    cfg.grid[key] = std::move(items);
  }
  return cfg;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::string> used_cells;
  std::vector<std::string> excluded_cells;  // zero empirical loss
};

/// OLS of log(mean loss) on exponent_fn(cell params). Cells with zero mean
/// loss are excluded (exact recovery carries no rate information) and
/// reported. Fewer than 3 usable cells is an error.
inline RateFit fit_rate_slope(
    const std::vector<TrialRecord>& records,
    const std::function<double(const std::map<std::string, std::string>&)>& exponent_fn) {
  std::map<std::string, std::pair<double, std::size_t>> byCell;
  for (const auto& r : records) {
    auto& [sum, count] = byCell[r.cell_id];
    sum += r.loss;
    count++;
  }
  RateFit fit;
  std::vector<double> xs, ys;
  for (const auto& [cell, agg] : byCell) {
    const double mean = agg.first / static_cast<double>(agg.second);
    if (mean <= 0.0) {
      fit.excluded_cells.push_back(cell);
      continue;
    }
    xs.push_back(exponent_fn(parse_cell_id(cell)));
    ys.push_back(std::log(mean));
    fit.used_cells.push_back(cell);
  }
  if (xs.size() < 3)
    throw InsufficientData("fit_rate_slope: fewer than 3 cells with positive loss");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InsufficientData("fit_rate_slope: degenerate design");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

struct CellSummary {
  std::string cell_id;
  std::string estimator;
  std::size_t trials = 0;
  double mean_loss = 0.0;
  double stderr_loss = 0.0;
  double ratio_q50 = kNaN, ratio_q90 = kNaN, ratio_max = kNaN;
  std::size_t violations = 0;
};

/// Per-(cell, estimator) means, standard errors and bound-ratio quantiles,
/// deterministically ordered.
inline std::vector<CellSummary> aggregate_report(const std::vector<TrialRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{r.cell_id, r.estimator}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : groups) {
    CellSummary s;
    s.cell_id = key.first;
    s.estimator = key.second;
    s.trials = rows.size();
    double sum = 0.0;
    std::vector<double> ratios;
    for (const auto* r : rows) {
      sum += r->loss;
      s.violations += r->violations;
      if (!std::isnan(r->max_ratio)) ratios.push_back(r->max_ratio);
    }
    s.mean_loss = sum / static_cast<double>(rows.size());
    double ss = 0.0;
    for (const auto* r : rows) {
      const double d = r->loss - s.mean_loss;
      ss += d * d;
    }
    if (rows.size() > 1)
      s.stderr_loss = std::sqrt(ss / static_cast<double>(rows.size() - 1)) /
                      std::sqrt(static_cast<double>(rows.size()));
    if (!ratios.empty()) {
      std::sort(ratios.begin(), ratios.end());
      auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(ratios.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, ratios.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return ratios[lo] * (1.0 - frac) + ratios[hi] * frac;
      };
      s.ratio_q50 = quantile(0.5);
      s.ratio_q90 = quantile(0.9);
      s.ratio_max = ratios.back();
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string summary_csv(const std::vector<CellSummary>& summary) {
  std::ostringstream os;
  os << "cell_id,estimator,trials,mean_loss,stderr_loss,ratio_q50,ratio_q90,ratio_max,"
        "violations\n";
  for (const auto& s : summary) {
    os << s.cell_id << "," << s.estimator << "," << s.trials << ","
       << format_double(s.mean_loss) << "," << format_double(s.stderr_loss) << ","
       << format_double(s.ratio_q50) << "," << format_double(s.ratio_q90) << ","
       << format_double(s.ratio_max) << "," << s.violations << "\n";
  }
  return os.str();
}

}  // namespace loospec
