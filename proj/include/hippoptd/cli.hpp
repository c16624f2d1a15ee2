/*
 * Copyright 2026 The hippoptd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "hippoptd/hippo.hpp"
#include "hippoptd/io.hpp"
#include "hippoptd/ptd.hpp"
#include "hippoptd/sim.hpp"
#include "hippoptd/transfer.hpp"

namespace hippoptd::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

namespace detail {

inline std::string fmt(double x) { return io::detail::fmt17(x); }

/// Collects named payloads and writes them into the output directory.
class Sink {
 public:
  Sink(std::string dir, std::string format, io::Provenance prov)
      : dir_(std::move(dir)), format_(std::move(format)), prov_(std::move(prov)) {}

  void add(std::string name, io::Payload p) { items_.emplace_back(std::move(name), std::move(p)); }

  void flush() const {
    if (dir_.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError(dir_, ec.message());
    for (const auto& [name, p] : items_) {
      const std::string path = (std::filesystem::path(dir_) / (name + "." + format_)).string();
      if (format_ == "json") {
        io::export_json(p, prov_, path);
      } else if (format_ == "csv") {
        io::export_csv(p, path);
      } else {
        io::export_npy(p, path);
      }
    }
    // csv and npy carry no metadata; a manifest keeps provenance alongside.
    if (format_ != "json") {
      nlohmann::json m;
      m["provenance"] = io::to_json(prov_);
      for (const auto& [name, p] : items_) {
        nlohmann::json e{{"file", name + "." + format_},
                         {"kind", io::kind_name(p.kind)},
                         {"rows", p.rows},
                         {"cols", p.cols},
                         {"complex", p.is_complex()}};
        if (!p.columns.empty()) e["columns"] = p.columns;
        if (!p.summary.empty()) e["summary"] = p.summary;
        m["payloads"].push_back(e);
      }
      io::write_file((std::filesystem::path(dir_) / "provenance.json").string(), m.dump(1) + "\n");
    }
  }

 private:
  std::string dir_;
  std::string format_;
  io::Provenance prov_;
  std::vector<std::pair<std::string, io::Payload>> items_;
};

inline Discretization parse_method(const std::string& s) {
  if (s == "bilinear") return Discretization::kBilinear;
  if (s == "zoh") return Discretization::kZoh;
  throw std::invalid_argument("unknown discretization '" + s + "'");
}

inline SignalSpec parse_signal(const std::string& s) {
  if (s == "expdecay") return SignalSpec::exp_decay();
  if (s == "impulse") return SignalSpec::unit_impulse();
  if (s.rfind("cosine:", 0) == 0) {
    std::size_t used = 0;
    const std::string num = s.substr(7);
    double f = 0.0;
    try {
      f = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size()) {
      throw std::invalid_argument("bad cosine frequency in '" + s + "'");
    }
    return SignalSpec::cosine(f);
  }
  throw std::invalid_argument("unknown signal '" + s + "' (cosine:S, expdecay, impulse)");
}

inline PerturbationStructure parse_structure(const std::string& s) {
  if (s == "complex") return PerturbationStructure::kComplexDense;
  if (s == "real") return PerturbationStructure::kRealDense;
  if (s == "symmetric") return PerturbationStructure::kRealSymmetric;
  throw std::invalid_argument("unknown structure '" + s + "'");
}

inline OutputSpec parse_output(const std::string& s, int ell) {
  if (s == "basis") return OutputSpec::basis(ell);
  if (s == "coordinate") return OutputSpec::coordinate(ell);
  if (s == "random") return OutputSpec::random();
  throw std::invalid_argument("unknown output row '" + s + "'");
}

}  // namespace detail

/// Runs one CLI invocation; args[0] is the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HiPPO initialization diagnostics and perturb-then-diagonalize tooling", "hippoptd"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string out_dir, format = "json";
  std::uint64_t seed = 0;
  auto add_io = [&](CLI::App* sub, bool with_csv = true) {
    sub->add_option("--out", out_dir, "directory for payload files");
    auto* f = sub->add_option("--format", format, "payload format")->capture_default_str();
    f->check(with_csv ? CLI::IsMember({"json", "csv", "npy"}) : CLI::IsMember({"json", "npy"}));
  };

  int n = 0, ell = 1, t_points = 1000, b_points = 10000, sim_steps = 1000, conv_steps = 10000,
      max_iters = 2000;
  double t_smin = 1e-2, t_smax = 1e4, sp_smin = 0.0, sp_smax = 0.0, dt = 1e-3, eps = 0.0, kappa_power = 2.0;
  bool dense = false, measure = false;
  std::string system = "diag", signal, method = "bilinear", structure = "complex",
              output = "basis";
  std::vector<int> n_list{4, 8, 16, 32, 64, 128};
  std::vector<double> gamma_list;
  std::optional<double> opt_gamma, opt_eps;

  auto* hippo = app.add_subcommand("hippo", "HiPPO pair, normal part and its eigenbasis");
  hippo->add_option("--n", n, "state size")->required()->check(CLI::PositiveNumber);
  add_io(hippo, false);

  auto* transfer = app.add_subcommand("transfer", "G_DPLR - G_Diag on a log frequency grid");
  transfer->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  transfer->add_option("--ell", ell)->capture_default_str();
  transfer->add_option("--smin", t_smin)->capture_default_str();
  transfer->add_option("--smax", t_smax)->capture_default_str();
  transfer->add_option("--points", t_points)->capture_default_str();
  auto* closed = transfer->add_flag("--closed-form", "closed-form evaluation (default)");
  transfer->add_flag("--dense", dense, "dense state-space evaluation")->excludes(closed);
  add_io(transfer);

  auto* spikes = app.add_subcommand("spikes", "spike centers of the diagonal initialization");
  spikes->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  spikes->add_option("--smin", sp_smin, "default 1");
  spikes->add_option("--smax", sp_smax, "default n^2");
  add_io(spikes);

  auto* simulate = app.add_subcommand("simulate", "discrete simulation of one initialized system");
  simulate->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  simulate->add_option("--system", system)->capture_default_str()
      ->check(CLI::IsMember({"dplr", "diag", "pert"}));
  simulate->add_option("--signal", signal, "cosine:S | expdecay | impulse")->required();
  simulate->add_option("--steps", sim_steps)->capture_default_str();
  simulate->add_option("--dt", dt)->capture_default_str();
  simulate->add_option("--method", method)->capture_default_str()
      ->check(CLI::IsMember({"bilinear", "zoh"}));
  simulate->add_option("--output", output, "basis | coordinate | random")->capture_default_str();
  simulate->add_option("--ell", ell)->capture_default_str();
  auto* sim_gamma = simulate->add_option("--gamma", opt_gamma, "pert: optimized perturbation");
  simulate->add_option("--ginibre-eps", opt_eps, "pert: Ginibre perturbation")->excludes(sim_gamma);
  simulate->add_option("--seed", seed)->capture_default_str();
  add_io(simulate);

  auto* converge = app.add_subcommand("converge", "DPLR vs diagonal output gap across n");
  converge->add_option("--signal", signal)->required()->check(CLI::IsMember({"expdecay", "impulse"}));
  converge->add_option("--n-list", n_list)->delimiter(',')->capture_default_str();
  converge->add_option("--steps", conv_steps)->capture_default_str();
  converge->add_option("--dt", dt)->capture_default_str();
  converge->add_option("--method", method)->capture_default_str()
      ->check(CLI::IsMember({"bilinear", "zoh"}));
  converge->add_option("--ell", ell)->capture_default_str();
  add_io(converge);

  auto* ptd = app.add_subcommand("ptd", "perturb-then-diagonalize initialization");
  ptd->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  auto* ptd_gamma = ptd->add_option("--gamma", opt_gamma);
  auto* ptd_eps = ptd->add_option("--ginibre-eps", opt_eps)->excludes(ptd_gamma);
  ptd->add_option("--seed", seed)->capture_default_str();
  ptd->add_option("--structure", structure)->capture_default_str()
      ->check(CLI::IsMember({"complex", "real", "symmetric"}));
  ptd->add_option("--kappa-power", kappa_power)->capture_default_str();
  ptd->add_option("--max-iters", max_iters)->capture_default_str();
  add_io(ptd, false);

  auto* sweep = app.add_subcommand("sweep", "optimizer sweep over n and gamma");
  sweep->add_option("--n-list", n_list)->delimiter(',')->required();
  sweep->add_option("--gamma-list", gamma_list)->delimiter(',')->required();
  sweep->add_option("--seed", seed)->capture_default_str();
  sweep->add_option("--structure", structure)->capture_default_str()
      ->check(CLI::IsMember({"complex", "real", "symmetric"}));
  sweep->add_option("--kappa-power", kappa_power)->capture_default_str();
  sweep->add_option("--max-iters", max_iters)->capture_default_str();
  add_io(sweep);

  auto* bound = app.add_subcommand("bound", "first-order transfer perturbation bound");
  bound->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  bound->add_option("--eps", eps)->required();
  bound->add_flag("--measure", measure, "also measure the sup gap for a seeded Ginibre E");
  bound->add_option("--seed", seed)->capture_default_str();
  bound->add_option("--points", b_points)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  io::Provenance prov;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) prov.command_line += ' ';
    prov.command_line += args[i];
  }
  prov.seed = seed;
  prov.timestamp = io::Provenance::now_utc();
  detail::Sink sink(out_dir, format, prov);
  using io::Payload;
  using detail::fmt;

  try {
    if (*hippo) {
      const auto h = hippoptd::detail::hippo_bundle(n);
      sink.add("A_H", Payload::matrix(h.pair.a));
      sink.add("B_H", Payload::matrix(h.pair.b));
      sink.add("A_perp", Payload::matrix(h.dec.normal_part));
      sink.add("V_H", Payload::matrix(h.eig.v));
      sink.add("Lambda_H", Payload::vector(h.eig.lambda));
      out << "n " << n << "\n||A_H|| " << fmt(hippoptd::detail::spectral_norm(h.pair.a))
          << "\nmax |Im Lambda_H| " << fmt(h.eig.lambda.imag().cwiseAbs().maxCoeff()) << "\n";
    } else if (*transfer) {
      const auto grid = log_grid_points(t_smin, t_smax, t_points);
      const GapPair pair = dense ? make_gap_pair(n, ell) : GapPair{};
      if (!dense) {
        hippoptd::detail::require(ell >= 1 && ell <= n, "transfer: ell outside [1, n]");
      }
      std::vector<std::vector<double>> rows;
      double peak = 0.0, peak_at = 0.0;
      for (double sigma : grid) {
        const cplx g = dense ? transfer_diff_dense(pair, sigma)
                             : transfer_diff_closed(n, ell, cplx(0.0, sigma));
        rows.push_back({sigma, g.real(), g.imag(), std::abs(g)});
        if (std::abs(g) > peak) {
          peak = std::abs(g);
          peak_at = sigma;
        }
      }
      auto p = Payload::table({"sigma", "gap_re", "gap_im", "gap_abs"}, rows);
      p.summary = {{"peak_gap", peak}, {"peak_sigma", peak_at}};
      sink.add("transfer", std::move(p));
      out << "points " << grid.size() << "\npeak_gap " << fmt(peak) << "\npeak_sigma "
          << fmt(peak_at) << "\n";
    } else if (*spikes) {
      const double lo = sp_smin > 0.0 ? sp_smin : 1.0;
      const double hi = sp_smax > 0.0 ? sp_smax : std::max(2.0, static_cast<double>(n) * n);
      const SpikeReport rep = find_spikes(n, lo, hi);
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < rep.spike_centers.size(); ++i) {
        rows.push_back({rep.spike_centers[i], rep.peak_gaps[i]});
      }
      auto p = Payload::table({"center", "peak_gap"}, rows);
      if (rep.last_spike) p.summary["last_spike"] = *rep.last_spike;
      sink.add("spikes", std::move(p));
      out << "spikes " << rep.spike_centers.size() << "\n";
      out << "last_spike " << (rep.last_spike ? fmt(*rep.last_spike) : "none") << "\n";
    } else if (*simulate) {
      const SignalSpec sig = detail::parse_signal(signal);
      const Discretization m = detail::parse_method(method);
      const OutputSpec cspec = detail::parse_output(output, ell);
      SimulationRun run;
      if (system == "dplr") {
        run = hippoptd::simulate(sig, init_dplr_system(n, cspec, seed), sim_steps, dt, m);
      } else if (system == "diag") {
        run = hippoptd::simulate(sig, init_diag_system(n, cspec, seed), sim_steps, dt, m);
      } else {
        if (!opt_gamma && !opt_eps) {
          throw std::invalid_argument("simulate --system pert needs --gamma or --ginibre-eps");
        }
        PerturbationSource src = GinibreSource{opt_eps.value_or(0.0)};
        if (opt_gamma) src = GammaSource{*opt_gamma, {}};
        const PtdInit init = ptd_initialize(n, src, seed);
        run = hippoptd::simulate(sig, ptd_system(init, cspec), sim_steps, dt, m);
      }
      std::vector<std::vector<double>> rows;
      for (std::size_t t = 0; t < run.outputs.size(); ++t) {
        rows.push_back({static_cast<double>(t) * dt, run.inputs[t], run.outputs[t].real(),
                        run.outputs[t].imag()});
      }
      auto p = Payload::table({"t", "u", "y_re", "y_im"}, rows, Payload::Kind::kTrace);
      p.summary = {{"max_abs_y", max_abs_output(run)}};
      sink.add("run", std::move(p));
      out << "steps " << sim_steps << "\nmethod " << to_string(m) << "\nmax_abs_y "
          << fmt(max_abs_output(run)) << "\n";
    } else if (*converge) {
      const auto table = convergence_study(detail::parse_signal(signal), n_list, conv_steps, dt,
                                           detail::parse_method(method), ell);
      std::vector<std::vector<double>> rows;
      for (const auto& r : table.rows) {
        rows.push_back({static_cast<double>(r.n), r.error});
        out << r.n << " " << fmt(r.error) << "\n";
      }
      auto p = Payload::table({"n", "error"}, rows);
      if (table.slope) p.summary["slope"] = *table.slope;
      sink.add("convergence", std::move(p));
      out << "slope " << (table.slope ? fmt(*table.slope) : "none") << "\n";
    } else if (*ptd) {
      if (!opt_gamma && !opt_eps) throw std::invalid_argument("ptd needs --gamma or --ginibre-eps");
      PerturbationSource src = GinibreSource{opt_eps.value_or(0.0)};
      if (opt_gamma) {
        PtdOptions o;
        o.max_iters = max_iters;
        o.kappa_power = kappa_power;
        o.structure = detail::parse_structure(structure);
        src = GammaSource{*opt_gamma, o};
      }
      const PtdInit init = ptd_initialize(n, src, seed);
      const std::map<std::string, double> meta{
          {"n", n},
          {"seed", static_cast<double>(seed)},
          {"gamma", init.gamma.value_or(0.0)},
          {"e_norm", init.e_norm},
          {"kappa_v", init.kappa_v}};
      auto add = [&](const char* name, Payload p) {
        p.summary = meta;
        sink.add(name, std::move(p));
      };
      add("lambda", Payload::vector(init.lambda));
      add("b_pert", Payload::matrix(init.b_pert));
      add("V", Payload::matrix(init.v));
      add("E", Payload::matrix(init.e));
      out << "n " << n << "\nseed " << seed << "\n";
      if (init.gamma) out << "gamma " << fmt(*init.gamma) << "\n";
      out << "e_norm " << fmt(init.e_norm) << "\nkappa_v " << fmt(init.kappa_v)
          << "\nbackward_error " << fmt(init.backward_error()) << "\n";
    } else if (*sweep) {
      PtdOptions o;
      o.seed = seed;
      o.max_iters = max_iters;
      o.kappa_power = kappa_power;
      o.structure = detail::parse_structure(structure);
      const SweepTable table = sweep_gamma(n_list, gamma_list, o);
      std::vector<std::vector<double>> rows;
      for (const auto& r : table.rows) {
        rows.push_back({static_cast<double>(r.n), r.gamma, r.kappa, r.e_norm});
        out << r.n << " " << fmt(r.gamma) << " " << fmt(r.kappa) << " " << fmt(r.e_norm);
        if (r.error) out << " failed: " << *r.error;
        out << "\n";
      }
      auto p = Payload::table({"n", "gamma", "kappa", "e_norm"}, rows);
      if (table.exponent) p.summary["exponent"] = *table.exponent;
      sink.add("sweep", std::move(p));
      out << "exponent " << (table.exponent ? fmt(*table.exponent) : "none") << "\n";
    } else if (*bound) {
      const double b = perturbation_bound(n, eps);
      out << "bound " << fmt(b) << "\n";
      if (measure) {
        const PtdInit init = ptd_initialize(n, ExplicitSource{unit_ginibre(n, eps, seed)}, seed);
        const double gap = measure_perturbation_gap(init, log_grid_points(1e-2, 1e4, b_points));
        out << "measured " << fmt(gap) << "\nratio " << fmt(gap / b) << "\n";
      }
    }
    sink.flush();
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    err << "I/O failure: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace hippoptd::cli
