#pragma once

// Experiment runner: turns a JSON config into sweeps over the metrics
// module, writes deterministic CSV tables (and optional gnuplot scripts),
// and reports pass/fail of the declared rate targets.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cloak/errors.hpp"
#include "cloak/format.hpp"
#include "cloak/material.hpp"
#include "cloak/metrics.hpp"
#include "cloak/solver.hpp"

namespace cloak::experiments {

using json = nlohmann::json;
using material::CloakConfig;
using sobolev::ModalDensity;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "convergence", "delta-sweep", "theorem61",       "lemma42",
      "material-map", "absorption-check", "solve"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  CloakConfig base;
  std::string metric = "trace_gap";  // convergence: trace_gap|ntd_opnorm|conormal
  std::vector<double> sweep;         // rho, tau, or delta grid
  bool probe_default = true;
  ModalDensity probe;                // explicit probe (radius filled at use)
  std::optional<double> expected_slope;
  std::optional<double> slope_tolerance;
  double min_r_squared = 0.999;
  double residual_tolerance = 1e-8;  // absorption-check
  double decay_ratio = 1e-2;         // delta-sweep: final/initial bound
  double r0 = 1.0, r2 = 3.0;         // lemma42 observation radii
  double R1 = 0.0;                   // material-map inclusion radius (0 = R/2)
  int grid_points = 100;
  bool no_cloak = false;             // solve: background override
  // run controls (CLI may override)
  std::string out_prefix = "out";
  int jobs = 1;
  bool emit_plot = false;
};

namespace detail {

inline void reject_unknown(const json& j, std::vector<std::string> allowed,
                           const std::string& where) {
  if (!j.is_object())
    throw invalid_input_error(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw invalid_input_error("unknown key '" + it.key() + "' in " + where);
  }
}

inline double require_number(const json& j, const std::string& key) {
  if (!j.at(key).is_number())
    throw invalid_input_error("'" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo && count >= 2))
    throw invalid_input_error("sweep needs 0 < min < max and count >= 2");
  std::vector<double> v(count);
  double la = std::log10(lo), lb = std::log10(hi);
  for (int i = 0; i < count; ++i)
    v[i] = std::pow(10.0, la + (lb - la) * i / double(count - 1));
  return v;
}

inline std::vector<double> parse_sweep(const json& j) {
  if (j.contains("values")) {
    reject_unknown(j, {"values"}, "sweep");
    if (!j.at("values").is_array() || j.at("values").size() < 1)
      throw invalid_input_error("sweep values must be a nonempty array");
    std::vector<double> v;
    for (auto& e : j.at("values")) {
      if (!e.is_number())
        throw invalid_input_error("sweep values must be numbers");
      v.push_back(e.get<double>());
    }
    for (size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1]) && !(v[i] < v[i - 1]))
        throw invalid_input_error("sweep grid must be strictly monotone");
    bool inc = v.size() < 2 || v[1] > v[0];
    for (size_t i = 1; i < v.size(); ++i)
      if (inc ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1]))
        throw invalid_input_error("sweep grid must be strictly monotone");
    return v;
  }
  reject_unknown(j, {"min", "max", "count"}, "sweep");
  double lo = require_number(j, "min");
  double hi = require_number(j, "max");
  int count = j.at("count").get<int>();
  return log_spaced(lo, hi, count);
}

inline ModalDensity parse_probe_modes(const json& j, int dimension) {
  reject_unknown(j, {"modes"}, "probe");
  if (!j.contains("modes") || !j.at("modes").is_array())
    throw invalid_input_error("explicit probe needs a 'modes' array");
  ModalDensity d;
  d.dimension = dimension;
  d.radius = 1.0;  // placeholder; callers rescale to the data radius
  for (auto& e : j.at("modes")) {
    if (!e.is_array())
      throw invalid_input_error("each probe mode must be an array");
    if (dimension == 2) {
      if (e.size() != 3)
        throw invalid_input_error("2D probe modes are [n, re, im]");
      d.c2[e[0].get<int>()] =
          std::complex<double>(e[1].get<double>(), e[2].get<double>());
    } else {
      if (e.size() != 4)
        throw invalid_input_error("3D probe modes are [n, m, re, im]");
      d.c3[{e[0].get<int>(), e[1].get<int>()}] =
          std::complex<double>(e[2].get<double>(), e[3].get<double>());
    }
  }
  d.validate();
  return d;
}

inline ModalDensity probe_on_radius(const ExperimentConfig& cfg,
                                    double radius) {
  if (cfg.probe_default)
    return metrics::default_probe(cfg.base.dimension, radius);
  return sobolev::rescale_density(cfg.probe, radius);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j,
                                     const std::string& cli_experiment = "") {
  ExperimentConfig cfg;
  detail::reject_unknown(
      j,
      {"experiment", "dimension", "omega", "R", "rho", "delta", "alpha",
       "beta", "gamma", "sigma_a_prime", "q_a_prime", "paper_literal_3d",
       "metric", "sweep", "probe", "expected_slope", "slope_tolerance",
       "min_r_squared", "residual_tolerance", "decay_ratio", "r0", "r2", "R1",
       "grid_points", "no_cloak", "out_prefix"},
      "config");

  if (j.contains("experiment")) {
    if (!j.at("experiment").is_string())
      throw invalid_input_error("'experiment' must be a string");
    cfg.experiment = j.at("experiment").get<std::string>();
  }
  if (!cli_experiment.empty()) {
    if (!cfg.experiment.empty() && cfg.experiment != cli_experiment)
      throw invalid_input_error(
          "experiment in config ('" + cfg.experiment +
          "') contradicts the command line ('" + cli_experiment + "')");
    cfg.experiment = cli_experiment;
  }
  auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
    throw invalid_input_error("unknown experiment '" + cfg.experiment + "'");

  auto num = [&](const std::string& key, double dflt) {
    return j.contains(key) ? detail::require_number(j, key) : dflt;
  };
  if (j.contains("dimension")) cfg.base.dimension = j.at("dimension").get<int>();
  cfg.base.omega = num("omega", 1.0);
  cfg.base.R = num("R", 2.0);
  cfg.base.rho = num("rho", 0.05);
  cfg.base.delta = num("delta", 1.0);
  cfg.base.alpha = num("alpha", 1.0);
  cfg.base.beta = num("beta", 1.0);
  cfg.base.gamma = num("gamma", 1.0);
  cfg.base.sigma_a_prime = num("sigma_a_prime", 2.0);
  cfg.base.q_a_prime = num("q_a_prime", 3.0);
  if (j.contains("paper_literal_3d"))
    cfg.base.paper_literal_3d = j.at("paper_literal_3d").get<bool>();
  if (j.contains("no_cloak")) cfg.no_cloak = j.at("no_cloak").get<bool>();
  if (j.contains("metric")) {
    cfg.metric = j.at("metric").get<std::string>();
    if (cfg.metric != "trace_gap" && cfg.metric != "ntd_opnorm" &&
        cfg.metric != "conormal")
      throw invalid_input_error("unknown metric '" + cfg.metric + "'");
  }
  if (j.contains("expected_slope"))
    cfg.expected_slope = detail::require_number(j, "expected_slope");
  if (j.contains("slope_tolerance"))
    cfg.slope_tolerance = detail::require_number(j, "slope_tolerance");
  cfg.min_r_squared = num("min_r_squared", 0.999);
  cfg.residual_tolerance = num("residual_tolerance", 1e-8);
  cfg.decay_ratio = num("decay_ratio", 1e-2);
  cfg.r0 = num("r0", 1.0);
  cfg.r2 = num("r2", 3.0);
  cfg.R1 = num("R1", 0.0);
  cfg.grid_points = int(num("grid_points", 100));
  if (j.contains("out_prefix"))
    cfg.out_prefix = j.at("out_prefix").get<std::string>();

  if (j.contains("sweep")) {
    cfg.sweep = detail::parse_sweep(j.at("sweep"));
  } else if (cfg.experiment == "convergence" ||
             cfg.experiment == "theorem61") {
    cfg.sweep = detail::log_spaced(1e-3, std::pow(10.0, -1.5), 8);
  } else if (cfg.experiment == "lemma42") {
    cfg.sweep = detail::log_spaced(1e-3, 1e-1, 6);
  } else if (cfg.experiment == "delta-sweep") {
    cfg.sweep = {1.0, 2.0, 4.0, 8.0};
  } else if (cfg.experiment == "absorption-check") {
    cfg.sweep = {0.05, 0.1};
  }

  if (j.contains("probe")) {
    if (j.at("probe").is_string()) {
      if (j.at("probe").get<std::string>() != "default")
        throw invalid_input_error("probe must be \"default\" or an object");
    } else {
      cfg.probe = detail::parse_probe_modes(j.at("probe"), cfg.base.dimension);
      cfg.probe_default = false;
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::string& cli_experiment = "") {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw invalid_input_error(std::string("config is not valid JSON: ") +
                              e.what());
  }
  return parse_config(j, cli_experiment);
}

// ---------------------------------------------------------------------------
// Running.

struct SampleRow {
  double parameter = 0.0;
  double value = 0.0;
  int n_max = 0;
  std::string warnings;
};

struct ExperimentResult {
  int status = 0;  // 0 pass, 1 target failed, 2 config error, 3 numerical
  std::string message;
  std::vector<SampleRow> samples;
  bool has_fit = false;
  metrics::RateFit fit;
  double expected_slope = 0.0;
  bool pass = true;
  std::vector<std::string> files_written;
  std::string raw_table;  // material-map / solve: full CSV body
};

namespace detail {

// Evaluates f(i) for i in [0, count) on up to `jobs` threads; results land
// in order. The lowest-index failure wins so reruns are deterministic.
inline void parallel_for(int count, int jobs,
                         const std::function<void(int)>& f) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int probe_truncation(const ModalDensity& psi) {
  int n = 0;
  for (auto& [k, c] : psi.c2) n = std::max(n, std::abs(k));
  for (auto& [k, c] : psi.c3) n = std::max(n, k.first);
  return n;
}

inline std::string numerical_context(const std::string& what,
                                     double parameter) {
  std::ostringstream os;
  os << "numerical failure at parameter " << format_double(parameter) << ": "
     << what;
  return os.str();
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  const int dim = cfg.base.dimension;

  auto sweep_metric = [&](const std::function<double(double)>& eval) {
    res.samples.resize(cfg.sweep.size());
    detail::parallel_for(int(cfg.sweep.size()), cfg.jobs, [&](int i) {
      double p = cfg.sweep[i];
      try {
        res.samples[i] = {p, eval(p), 0, ""};
      } catch (const invalid_input_error&) {
        throw;
      } catch (const std::exception& e) {
        throw accuracy_loss_error(detail::numerical_context(e.what(), p), 0.0);
      }
    });
  };

  try {
    if (cfg.experiment == "convergence") {
      auto eval = [&](double rho) {
        CloakConfig c = cfg.base;
        c.rho = rho;
        if (cfg.metric == "ntd_opnorm") return metrics::ntd_diff_opnorm(c);
        ModalDensity psi = detail::probe_on_radius(cfg, c.R);
        return cfg.metric == "conormal" ? metrics::conormal_norm(c, psi)
                                        : metrics::trace_gap(c, psi);
      };
      sweep_metric(eval);
      std::vector<metrics::SweepSample> ss;
      for (auto& r : res.samples) ss.push_back({r.parameter, r.value, 0, {}});
      res.fit = metrics::fit_rate(ss);
      res.has_fit = true;
      double expected = cfg.expected_slope.value_or(
          cfg.metric == "conormal" ? 1.0 + cfg.base.delta / 2.0 : double(dim));
      double tol = cfg.slope_tolerance.value_or(
          cfg.metric == "conormal" ? 0.1 : (dim == 2 ? 0.1 : 0.15));
      res.expected_slope = expected;
      res.pass = std::abs(res.fit.slope - expected) <= tol &&
                 res.fit.r_squared >= cfg.min_r_squared;
    } else if (cfg.experiment == "theorem61") {
      auto eval = [&](double rho) {
        CloakConfig c = cfg.base;
        c.rho = rho;
        return metrics::sound_hard_gap(c, detail::probe_on_radius(cfg, c.R));
      };
      sweep_metric(eval);
      std::vector<metrics::SweepSample> ss;
      for (auto& r : res.samples) ss.push_back({r.parameter, r.value, 0, {}});
      res.fit = metrics::fit_rate(ss);
      res.has_fit = true;
      res.expected_slope = cfg.expected_slope.value_or(double(dim));
      double tol = cfg.slope_tolerance.value_or(0.15);
      res.pass = res.fit.slope >= res.expected_slope - tol;  // one-sided
    } else if (cfg.experiment == "lemma42") {
      auto eval = [&](double tau) {
        solver::InclusionProblem p;
        p.omega = cfg.base.omega;
        p.tau = tau;
        p.r0 = cfg.r0;
        p.r2 = cfg.r2;
        p.phi = detail::probe_on_radius(cfg, tau);
        return metrics::inclusion_trace_ratio(p);
      };
      sweep_metric(eval);
      std::vector<metrics::SweepSample> ss;
      for (auto& r : res.samples) ss.push_back({r.parameter, r.value, 0, {}});
      res.fit = metrics::fit_rate(ss);
      res.has_fit = true;
      res.expected_slope = cfg.expected_slope.value_or(double(dim) - 1.0);
      double tol = cfg.slope_tolerance.value_or(0.1);
      res.pass = std::abs(res.fit.slope - res.expected_slope) <= tol;
    } else if (cfg.experiment == "delta-sweep") {
      auto eval = [&](double delta) {
        CloakConfig c = cfg.base;
        c.delta = delta;
        return metrics::conormal_norm(c, detail::probe_on_radius(cfg, c.R));
      };
      sweep_metric(eval);
      bool decreasing = true;
      for (size_t i = 1; i < res.samples.size(); ++i)
        decreasing = decreasing && res.samples[i].value <
                                       res.samples[i - 1].value;
      bool decayed = res.samples.empty() ||
                     res.samples.back().value <
                         cfg.decay_ratio * res.samples.front().value;
      res.pass = decreasing && decayed;
    } else if (cfg.experiment == "absorption-check") {
      auto eval = [&](double rho) {
        CloakConfig c = cfg.base;
        c.rho = rho;
        return metrics::energy_residual(c,
                                        detail::probe_on_radius(cfg, c.R));
      };
      sweep_metric(eval);
      res.pass = true;
      for (auto& r : res.samples)
        res.pass = res.pass && r.value <= cfg.residual_tolerance;
    } else if (cfg.experiment == "material-map") {
      double R1 = cfg.R1 > 0.0 ? cfg.R1 : cfg.base.R / 2.0;
      auto a = material::cloak_assembly(cfg.base, R1, cfg.grid_points);
      std::ostringstream os;
      material::material_map_export(a, os);
      res.raw_table = os.str();
      res.pass = true;
    } else if (cfg.experiment == "solve") {
      CloakConfig c = cfg.base;
      ModalDensity psi = detail::probe_on_radius(cfg, c.R);
      auto s = solver::solve_cloak(c, psi, cfg.no_cloak);
      auto tr = solver::trace_density(s, c.R);
      std::ostringstream os;
      os << "n,m,psi_re,psi_im,trace_re,trace_im\n";
      if (dim == 2) {
        for (auto& [n, v] : psi.c2) {
          auto u = tr.c2.at(n);
          os << n << ",0," << format_double(v.real()) << ','
             << format_double(v.imag()) << ',' << format_double(u.real())
             << ',' << format_double(u.imag()) << '\n';
        }
      } else {
        for (auto& [nm, v] : psi.c3) {
          auto u = tr.c3.at(nm);
          os << nm.first << ',' << nm.second << ','
             << format_double(v.real()) << ',' << format_double(v.imag())
             << ',' << format_double(u.real()) << ','
             << format_double(u.imag()) << '\n';
        }
      }
      res.raw_table = os.str();
      res.pass = true;
    } else {
      res.status = 2;
      res.message = "unknown experiment '" + cfg.experiment + "'";
      return res;
    }
  } catch (const invalid_input_error& e) {
    res.status = 2;
    res.message = e.what();
    return res;
  } catch (const std::exception& e) {
    res.status = 3;
    res.message = e.what();
    return res;
  }

  // All computation succeeded: now (and only now) touch the filesystem.
  auto write_file = [&](const std::string& suffix, const std::string& body) {
    std::string path = cfg.out_prefix + suffix;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw invalid_input_error("cannot write output file: " + path);
    out << body;
    res.files_written.push_back(path);
  };

  try {
    if (!res.raw_table.empty()) {
      write_file("_samples.csv", res.raw_table);
    } else {
      std::ostringstream os;
      os << "parameter,value,n_max,warnings\n";
      for (auto& r : res.samples)
        os << format_double(r.parameter) << ',' << format_double(r.value)
           << ',' << r.n_max << ',' << r.warnings << '\n';
      write_file("_samples.csv", os.str());
    }
    if (res.has_fit) {
      std::ostringstream os;
      os << "slope,intercept,r_squared,expected_slope,pass\n"
         << format_double(res.fit.slope) << ','
         << format_double(res.fit.intercept) << ','
         << format_double(res.fit.r_squared) << ','
         << format_double(res.expected_slope) << ','
         << (res.pass ? "true" : "false") << '\n';
      write_file("_fit.csv", os.str());
    }
    if (cfg.emit_plot && res.raw_table.empty()) {
      std::ostringstream os;
      os << "set datafile separator ','\n"
         << "set logscale xy\n"
         << "set xlabel 'parameter'\n"
         << "set ylabel 'value'\n"
         << "set key left top\n"
         << "plot '" << cfg.out_prefix
         << "_samples.csv' every ::1 using 1:2 with linespoints title '"
         << cfg.experiment << "'\n";
      write_file(".gp", os.str());
    }
  } catch (const std::exception& e) {
    res.status = 2;
    res.message = e.what();
    return res;
  }

  if (!res.pass) {
    res.status = 1;
    res.message = res.has_fit
                      ? "fitted slope " + format_double(res.fit.slope) +
                            " misses target " +
                            format_double(res.expected_slope)
                      : "declared tolerance not met";
  }
  return res;
}

}  // namespace cloak::experiments
