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

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "loospec/bounds.hpp"
#include "loospec/cluster.hpp"
#include "loospec/experiments.hpp"
#include "loospec/io.hpp"
#include "loospec/mixture.hpp"

namespace loospec::cli {

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitNumericalFailure = 3;

namespace detail {

struct GenArgs {
  std::size_t p = 0, n = 0, k = 2;
  std::string noise = "isotropic_gaussian";
  double sigma = 1.0;
  double scale = 0.0;
  bool noiseless = false;
  double delta = 0.0;       // symmetric two-cluster coordinate value
  double separation = 0.0;  // axis-centers pairwise distance
  std::string centers_file;
  std::uint64_t seed = 0;
  std::string out;
};

inline NoiseSpec gen_noise(const GenArgs& a) {
  if (a.noiseless) return NoiseSpec::noiseless();
  NoiseSpec spec;
  spec.family = noise_family_from_string(a.noise);
  spec.param = (spec.family == NoiseFamily::Gaussian ||
                spec.family == NoiseFamily::IsotropicGaussian)
                   ? a.sigma
                   : a.scale;
  return spec;
}

inline void write_instance(const MixtureInstance& inst, const std::string& prefix) {
  write_matrix_file(prefix + ".X.mat", inst.x);
  write_matrix_file(prefix + ".P.mat", inst.p_signal);
  write_matrix_file(prefix + ".E.mat", inst.e_noise);
  write_assignment_file(prefix + ".z.txt", inst.z_star);
  write_kv_config(prefix + ".spec.cfg", spec_to_kv(inst.spec));
}

inline int do_gen(const GenArgs& a, std::ostream& out) {
  MixtureInstance inst;
  if (a.delta != 0.0) {
    inst = two_cluster_instance(a.delta, a.p, a.n, gen_noise(a), a.seed);
  } else {
    MixtureSpec spec;
    spec.p = a.p;
    spec.n = a.n;
    spec.k = a.k;
    spec.noise = gen_noise(a);
    spec.seed = a.seed;
    if (!a.centers_file.empty()) {
      spec.centers = read_matrix_file(a.centers_file);
    } else if (a.separation > 0.0) {
      spec.centers = axis_centers(a.p, a.k, a.separation);
    } else {
      throw InvalidInput("gen: provide --delta, --Delta, or --centers");
    }
    inst = make_instance(spec);
  }
  write_instance(inst, a.out);
  out << "wrote " << a.out << ".{X,P,E}.mat, " << a.out << ".z.txt, " << a.out
      << ".spec.cfg\n";
  return kExitOk;
}

/// Rebuild a MixtureInstance from the files `gen` writes. Centers come from
/// the signal matrix columns keyed by the assignment.
inline MixtureInstance load_instance(const std::string& prefix) {
  MixtureInstance inst;
  inst.x = read_matrix_file(prefix + ".X.mat");
  inst.p_signal = read_matrix_file(prefix + ".P.mat");
  inst.e_noise = read_matrix_file(prefix + ".E.mat");
  inst.z_star = read_assignment_file(prefix + ".z.txt");
  auto kv = read_kv_config(prefix + ".spec.cfg");

  MixtureSpec spec;
  spec.p = inst.x.rows();
  spec.n = inst.x.cols();
  spec.k = static_cast<std::size_t>(std::stoul(kv.at("k")));
  spec.seed = std::stoull(kv.at("seed"));
  const std::string family = kv.at("noise.family");
  if (kv.count("noise.sigma") && parse_double(kv.at("noise.sigma")) == 0.0) {
    spec.noise = NoiseSpec::noiseless();
  } else {
    spec.noise.family = noise_family_from_string(family);
    spec.noise.param = kv.count("noise.sigma") ? parse_double(kv.at("noise.sigma"))
                                               : parse_double(kv.at("noise.scale"));
  }
  if (inst.z_star.size() != spec.n) throw InvalidInput("assignment length does not match X");
  spec.centers = Matrix(spec.p, spec.k);
  std::vector<bool> seen(spec.k, false);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int z = inst.z_star[i];
    if (z < 0 || static_cast<std::size_t>(z) >= spec.k)
      throw InvalidInput("assignment label out of range");
    if (seen[static_cast<std::size_t>(z)]) continue;
    seen[static_cast<std::size_t>(z)] = true;
    for (std::size_t r = 0; r < spec.p; ++r)
      spec.centers(r, static_cast<std::size_t>(z)) = inst.p_signal(r, i);
  }
  for (bool s : seen)
    if (!s) throw InvalidInput("assignment does not cover every cluster");
  spec.labels = inst.z_star;
  inst.spec = std::move(spec);

  for (std::size_t c = 0; c < inst.x.cols(); ++c)
    for (std::size_t r = 0; r < inst.x.rows(); ++r)
      if (inst.x(r, c) != inst.p_signal(r, c) + inst.e_noise(r, c))
        throw InvalidInput("instance files are inconsistent: X != P + E");
  return inst;
}

}  // namespace detail

/// Dispatch one CLI invocation. Returns the process exit code.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"leave-one-out singular subspace bounds and spectral clustering"};
  app.require_subcommand(1);

  // gen
  detail::GenArgs gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a mixture instance and write it to files");
  cmd_gen->add_option("--p", gen.p, "ambient dimension")->required();
  cmd_gen->add_option("--n", gen.n, "number of observations")->required();
  cmd_gen->add_option("--k", gen.k, "number of clusters");
  cmd_gen->add_option("--noise", gen.noise,
                      "isotropic_gaussian|gaussian|laplace|rademacher|uniform");
  cmd_gen->add_option("--sigma", gen.sigma, "noise sigma for the Gaussian families");
  cmd_gen->add_option("--scale", gen.scale, "noise scale for laplace/rademacher/uniform");
  cmd_gen->add_flag("--noiseless", gen.noiseless, "zero noise");
  cmd_gen->add_option("--delta", gen.delta, "two-cluster symmetric coordinate value");
  cmd_gen->add_option("--Delta", gen.separation, "pairwise center separation (axis centers)");
  cmd_gen->add_option("--centers", gen.centers_file, "explicit p x k centers matrix file");
  cmd_gen->add_option("--seed", gen.seed, "instance seed");
  cmd_gen->add_option("--out", gen.out, "output file prefix")->required();

  // bounds
  std::string bounds_in, bounds_instance, bounds_out;
  std::size_t bounds_r = 1;
  auto* cmd_bounds = app.add_subcommand("bounds", "per-column perturbation bound table (CSV)");
  cmd_bounds->add_option("--in", bounds_in, "matrix file")->required();
  cmd_bounds->add_option("--r", bounds_r, "subspace rank")->required();
  cmd_bounds->add_option("--instance", bounds_instance,
                         "instance prefix (enables the mixture bounds)");
  cmd_bounds->add_option("--out", bounds_out, "output CSV path (default: stdout)");

  // cluster
  std::string cl_in, cl_algo = "spectral", cl_truth, cl_out, cl_noise = "gaussian";
  std::size_t cl_k = 2;
  std::optional<std::size_t> cl_r;
  double cl_threshold = 0.0, cl_delta = 0.0, cl_sigma = 1.0, cl_scale = 0.0;
  std::uint64_t cl_seed = 0;
  std::size_t cl_restarts = 20;
  auto* cmd_cluster = app.add_subcommand("cluster", "cluster the columns of a matrix file");
  cmd_cluster->add_option("--in", cl_in, "matrix file")->required();
  cmd_cluster->add_option("--algo", cl_algo, "spectral|adaptive|rankone|lrt");
  cmd_cluster->add_option("--k", cl_k, "number of clusters");
  cmd_cluster->add_option("--r", cl_r, "subspace rank (spectral; default k)");
  cmd_cluster->add_option("--threshold", cl_threshold, "singular value gap threshold (adaptive)");
  cmd_cluster->add_option("--delta", cl_delta, "true delta (lrt)");
  cmd_cluster->add_option("--noise", cl_noise, "noise family (lrt): gaussian|laplace");
  cmd_cluster->add_option("--sigma", cl_sigma, "noise sigma (lrt gaussian)");
  cmd_cluster->add_option("--scale", cl_scale, "noise scale (lrt laplace)");
  cmd_cluster->add_option("--truth", cl_truth, "assignment file; prints the loss");
  cmd_cluster->add_option("--seed", cl_seed, "k-means seed");
  cmd_cluster->add_option("--restarts", cl_restarts, "k-means restarts");
  cmd_cluster->add_option("--out", cl_out, "labels file (default: stdout)");

  // mc
  std::string mc_config;
  std::optional<std::uint64_t> mc_seed;
  std::optional<std::size_t> mc_workers;
  auto* cmd_mc = app.add_subcommand("mc", "run a Monte Carlo experiment from a config file");
  cmd_mc->add_option("--config", mc_config, "experiment config (key=value)")->required();
  cmd_mc->add_option("--seed", mc_seed, "override the config master_seed");
  cmd_mc->add_option("--workers", mc_workers, "override the worker count");

  // report
  std::string rep_in, rep_out;
  auto* cmd_report = app.add_subcommand("report", "aggregate a records CSV");
  cmd_report->add_option("--in", rep_in, "records CSV")->required();
  cmd_report->add_option("--out", rep_out, "output CSV path (default: stdout)");

  std::vector<const char*> argv;
  argv.push_back("loospec");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitInvalidInput;
  }

  try {
    if (cmd_gen->parsed()) return detail::do_gen(gen, out);

    if (cmd_bounds->parsed()) {
      const Matrix x = read_matrix_file(bounds_in);
      std::optional<MixtureInstance> inst;
      if (!bounds_instance.empty()) {
        inst = detail::load_instance(bounds_instance);
        if (!(inst->x == x)) throw InvalidInput("--instance X does not match --in");
      }
      const auto reports = bound_report(x, bounds_r, inst ? &*inst : nullptr);
      const std::string csv = bound_report_csv(reports);
      if (bounds_out.empty())
        out << csv;
      else
        atomic_write_text(bounds_out, csv);
      return kExitOk;
    }

    if (cmd_cluster->parsed()) {
      const Matrix x = read_matrix_file(cl_in);
      std::vector<int> labels;
      KMeansOptions opts;
      opts.seed = cl_seed;
      opts.restarts = cl_restarts;
      if (cl_algo == "spectral") {
        labels = spectral_cluster(x, cl_k, cl_r, opts).labels;
      } else if (cl_algo == "adaptive") {
        auto res = adaptive_spectral_cluster(x, cl_k, cl_threshold, opts);
        labels = res.labels;
        out << "r_hat=" << res.r_used << "\n";
      } else if (cl_algo == "rankone") {
        labels = rank_one_cluster(x).clustering.labels;
      } else if (cl_algo == "lrt") {
        if (cl_delta == 0.0) throw InvalidInput("lrt needs --delta");
        NoiseSpec noise;
        noise.family = noise_family_from_string(cl_noise);
        noise.param = noise.family == NoiseFamily::Laplace ? cl_scale : cl_sigma;
        labels = lrt_cluster(x, cl_delta, noise);
      } else {
        throw InvalidInput("unknown --algo: " + cl_algo);
      }
      if (cl_out.empty()) {
        for (std::size_t i = 0; i < labels.size(); ++i)
          out << (i ? "," : "") << labels[i] + 1;
        out << "\n";
      } else {
        write_assignment_file(cl_out, labels);
      }
      if (!cl_truth.empty()) {
        const auto truth = read_assignment_file(cl_truth);
        out << "loss=" << format_double(misclustering_loss(labels, truth, cl_k).loss) << "\n";
      }
      return kExitOk;
    }

    if (cmd_mc->parsed()) {
      auto cfg = experiment_config_from_kv(read_kv_config(mc_config));
      if (mc_seed) cfg.master_seed = *mc_seed;
      if (mc_workers) {
        cfg.workers = *mc_workers;
      } else if (const char* env = std::getenv("LOOSPEC_WORKERS")) {
        cfg.workers = static_cast<std::size_t>(std::stoul(env));
      }
      const auto records = run_experiment(cfg);
      out << "wrote " << records.size() << " records to " << cfg.output_path << "\n";
      return kExitOk;
    }

    if (cmd_report->parsed()) {
      const auto records = records_from_csv_file(rep_in);
      const std::string csv = summary_csv(aggregate_report(records));
      if (rep_out.empty())
        out << csv;
      else
        atomic_write_text(rep_out, csv);
      return kExitOk;
    }
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumericalFailure;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const NoGapFound& e) {
    err << "no gap found: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const InsufficientData& e) {
    err << "insufficient data: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitInvalidInput;
}

}  // namespace loospec::cli
