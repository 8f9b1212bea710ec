// Batch experiment runner: certify / ode-run / pde-run / verify-identities.
// Reads a JSON config, writes CSV series, a summary JSON and SVG plots into
// the output directory. Exit codes: 0 all declared tolerances met, 2 config
// error, 3 numerical failure.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hcf/flow_ode.hpp"
#include "hcf/pde.hpp"
#include "hcf/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hcf;

namespace {

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

TorusChart chart_from(const json& j) {
  return TorusChart(j.at("n").get<int>(), j.at("size").get<std::vector<int>>(),
                    j.at("period").get<std::vector<double>>());
}

Backend backend_from(const json& j) {
  const std::string b = j.value("backend", "spectral");
  if (b == "spectral") return Backend::spectral;
  if (b == "fd2") return Backend::fd2;
  throw std::runtime_error("unknown backend: " + b);
}

MetricField metric_from(const json& j, const TorusChart& chart) {
  if (j.contains("file")) return read_metric_bin(j.at("file").get<std::string>());
  const std::string preset = j.value("preset", "flat");
  const double amp = j.value("amp", 0.1);
  const int freq = j.value("freq", 1);
  if (preset == "griffiths_preflowed")
    return griffiths_preflowed(chart, amp, j.value("margin_target", -5e-7)).g;
  return metric_preset(chart, preset, amp, freq);
}

ConeSpec cone_from(const json& j) { return cone_from_json(j.dump()); }

int run_verify_identities(const json& cfg, const fs::path& out, bool quiet) {
  TorusChart chart = chart_from(cfg.at("chart"));
  Backend backend = backend_from(cfg);
  MetricField g = metric_from(cfg.value("metric", json{{"preset", "nonkahler_sin"}}), chart);
  const json tol = cfg.value("tolerances", json::object());
  const double tol_bianchi = tol.value("bianchi", 1e-7);
  const double tol_rho = tol.value("lee_rho", 1e-7);
  const double tol_trace = tol.value("trace", 1e-10);

  Summary sum;
  auto res = bianchi_residuals(g, backend);
  for (int i = 0; i < 5; ++i)
    sum.add_bound("bianchi_" + std::to_string(i + 1), res[i], tol_bianchi);
  LeeRhoReport lee = lee_rho_check(g, backend);
  sum.add_bound("rho_minus_rhoT_minus_dalpha", lee.residual, tol_rho);
  sum.add_bound("d_rho", lee.d_rho_norm, tol_rho);

  MetricWork w = analyze_metric(g, backend);
  CurvatureField om = chern_curvature(w);
  RicciData ric = ricci_contractions(om, w);
  double trace_defect = 0.0;
  {
    const int n = chart.n;
    for (size_t p = 0; p < chart.points(); ++p) {
      cplx t1(0, 0), t2(0, 0), t3(0, 0), t4(0, 0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const cplx gup = w.gup.comp(i * n + j)[p];
          t1 += ric.s1.comp(i * n + j)[p] * gup;
          t2 += ric.s2.comp(i * n + j)[p] * gup;
          t3 += ric.s3.comp(i * n + j)[p] * gup;
          t4 += ric.s4.comp(i * n + j)[p] * gup;
        }
      trace_defect = std::max({trace_defect, std::abs(t1 - t2), std::abs(t3 - t4)});
    }
  }
  sum.add_bound("trace_identities", trace_defect, tol_trace);
  sum.add_bound("omega_hermitian_symmetry", om.hermitian_symmetry_defect(), 1e-11);

  CsvTable table;
  table.columns = {"residual_id", "value"};
  for (int i = 0; i < 5; ++i) table.add_row({double(i + 1), res[i]});
  table.add_row({6.0, lee.residual});
  table.add_row({7.0, lee.d_rho_norm});
  write_csv((out / "identities.csv").string(), table);
  write_text((out / "summary.json").string(), sum.to_json());
  if (!quiet) std::cout << sum.to_json() << "\n";
  return sum.all_pass() ? 0 : 1;
}

int run_ode_invariance(const json& cfg, const fs::path& out, uint64_t seed, bool quiet) {
  const int n = cfg.value("n", 2);
  const int samples = cfg.value("samples", 50);
  ConeSpec cone = cone_from(cfg.at("cone"));
  OdeConfig ocfg;
  ocfg.t_end = cfg.value("t_end", 0.05);
  ocfg.dt = cfg.value("dt", 0.0);
  ocfg.record_every = cfg.value("record_every", 5);
  if (cfg.value("integrator", "rk4") == std::string("rk45"))
    ocfg.integrator = OdeConfig::Integrator::rk45;
  const double tol = cfg.value("tolerance", 1e-6);

  InvarianceReport rep = invariance_experiment(cone, samples, n, ocfg, seed, tol);

  CsvTable table;
  table.columns = {"sample_id", "t", "margin", "norm"};
  for (const auto& r : rep.rows) table.add_row({double(r.sample), r.t, r.margin, r.norm});
  write_csv((out / "ode_invariance.csv").string(), table);

  Summary sum;
  sum.add_lower("worst_margin", rep.worst_margin, tol * rep.initial_scale);
  sum.add("initial_scale", rep.initial_scale);
  sum.add("samples", samples);
  sum.add("blown_up", rep.blown_up);
  sum.info["cone"] = cone_to_json(cone);
  if (std::isfinite(rep.first_violation_time))
    sum.add("first_violation_time", rep.first_violation_time);
  write_text((out / "summary.json").string(), sum.to_json());

  // margin-vs-time plot for the first few samples
  std::vector<double> ts;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (int s = 0; s < std::min(4, samples); ++s) {
    std::vector<double> tt, mm;
    for (const auto& r : rep.rows)
      if (r.sample == s) {
        tt.push_back(r.t);
        mm.push_back(r.margin);
      }
    if (ts.empty()) ts = tt;
    series.emplace_back("sample " + std::to_string(s), mm);
  }
  if (!ts.empty()) write_svg_lines((out / "margins.svg").string(), "cone margins", ts, series);
  if (!quiet) std::cout << sum.to_json() << "\n";
  return sum.all_pass() ? 0 : 1;
}

int run_pde(const json& cfg, const fs::path& out, bool quiet) {
  TorusChart chart = chart_from(cfg.at("chart"));
  Backend backend = backend_from(cfg);
  MetricField g0 = metric_from(cfg.value("metric", json{{"preset", "nonkahler_sin"}}), chart);
  PdeConfig pcfg;
  pcfg.backend = backend;
  pcfg.t_end = cfg.value("t_end", 0.02);
  pcfg.dt = cfg.value("dt", 0.0);
  pcfg.record_every = cfg.value("record_every", 1);
  pcfg.dealias = cfg.value("dealias", true);
  if (cfg.value("integrator", "rk4") == std::string("euler"))
    pcfg.integrator = PdeConfig::TimeIntegrator::euler;
  const json tol = cfg.value("tolerances", json::object());
  const double tol_shat = tol.value("shat_step", 1e-6);
  const double tol_margin = tol.value("margin", 1e-5);
  const double tol_rho = tol.value("rho", 1e-7);

  FlowRecord rec = evolve(g0, pcfg);
  if (rec.aborted) throw NumericalError("pde run aborted: " + rec.abort_reason);

  Summary sum;
  sum.add("dt_used", rec.dt_used);
  sum.add("snapshots", double(rec.snapshots.size()));

  CsvTable table;
  table.columns = {"t", "monitor", "value"};
  const auto monitors = cfg.value("monitors", std::vector<std::string>{"shat_inf"});
  std::vector<std::pair<std::string, std::vector<double>>> plot_series;

  for (const std::string& mon : monitors) {
    if (mon == "shat_inf") {
      ShatReport rep = shat_monitor(rec, backend);
      for (size_t k = 0; k < rep.inf_series.size(); ++k)
        table.add_row({rec.times[k], 0.0, rep.inf_series[k]});
      sum.add_lower("shat_min_step_increase", rep.min_step_increase, tol_shat);
      sum.add("eq51_max_residual", rep.max_residual);
      plot_series.emplace_back("inf shat", rep.inf_series);
    } else if (mon == "rho_check") {
      auto series = rho_residual_series(rec, backend);
      double worst = 0.0;
      for (size_t k = 0; k < series.size(); ++k) {
        table.add_row({rec.times[k], 1.0, series[k]});
        worst = std::max(worst, series[k]);
      }
      sum.add_bound("rho_residual_max", worst, tol_rho);
    } else if (mon == "cone_margins") {
      std::vector<ConeSpec> cones;
      for (const auto& cj : cfg.value("cones", json::array())) cones.push_back(cone_from(cj));
      if (cones.empty()) cones.push_back({SFamily::rank_one(), NiceFunction::zero()});
      ConeSeries cs = pointwise_cone_monitor(rec, cones, backend);
      for (size_t c = 0; c < cones.size(); ++c) {
        double worst = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < cs.worst_margins[c].size(); ++k) {
          table.add_row({rec.times[k], 2.0 + double(c), cs.worst_margins[c][k]});
          worst = std::min(worst, cs.worst_margins[c][k]);
        }
        sum.add_lower("worst_margin_" + cs.cone_names[c], worst, tol_margin);
        plot_series.emplace_back("margin " + cs.cone_names[c], cs.worst_margins[c]);
      }
    } else {
      throw std::runtime_error("unknown monitor: " + mon);
    }
  }
  write_csv((out / "pde_run.csv").string(), table);
  if (!plot_series.empty())
    write_svg_lines((out / "monitors.svg").string(), "flow monitors", rec.times, plot_series);
  write_text((out / "summary.json").string(), sum.to_json());
  if (!quiet) std::cout << sum.to_json() << "\n";
  return sum.all_pass() ? 0 : 1;
}

int run_certify(const json& cfg, const fs::path& out, uint64_t seed, bool quiet) {
  CurvatureOperator om;
  if (cfg.contains("operator_file")) {
    std::ifstream in(cfg.at("operator_file").get<std::string>());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    om = operator_from_json(text);
  } else {
    const int n = cfg.value("n", 2);
    Rng rng(seed);
    std::vector<Endo> gens;
    for (int i = 0; i < n * n; ++i) gens.push_back(rng.complex_gaussian(n, n));
    om = gram(gens);
  }
  const double require_margin =
      cfg.value("require_margin", -std::numeric_limits<double>::infinity());

  Summary sum;
  CsvTable table;
  table.columns = {"cone_id", "margin", "certified", "restarts"};
  int cid = 0;
  for (const auto& cj : cfg.value("cones", json::array())) {
    ConeSpec cone = cone_from(cj);
    MarginOptions mo;
    mo.seed = seed + cid;
    MembershipReport rep = margin(om, cone, mo);
    table.add_row({double(cid), rep.margin, rep.certified ? 1.0 : 0.0, double(rep.restarts_used)});
    const std::string name = "margin_" + std::to_string(cid) + "_" + skind_name(cone.s.kind);
    if (std::isfinite(require_margin))
      sum.add_lower(name, rep.margin - require_margin, 0.0);
    else
      sum.add(name, rep.margin);
    sum.info["cone_" + std::to_string(cid)] = cone_to_json(cone);
    ++cid;
  }
  for (const auto& fj : cfg.value("mu_families", json::array())) {
    ConeSpec cone = cone_from(json{{"s", fj.get<std::string>()}});
    MarginOptions mo;
    mo.seed = seed + 1000;
    sum.add("mu_" + fj.get<std::string>(), mu_value(om, cone.s, mo));
  }
  write_csv((out / "certify.csv").string(), table);
  write_text((out / "summary.json").string(), sum.to_json());
  if (!quiet) std::cout << sum.to_json() << "\n";
  return sum.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hermitian curvature flow laboratory"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  uint64_t seed = 0;
  bool seed_set = false, quiet = false;
  app.add_option("--config", config_path, "JSON config path")->required();
  app.add_option("--seed", seed, "PRNG seed (overrides config)")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "suppress stdout summary");
  auto* c_certify = app.add_subcommand("certify", "cone membership margins and mu values");
  auto* c_ode = app.add_subcommand("ode-run", "pointwise ODE invariance experiment");
  auto* c_pde = app.add_subcommand("pde-run", "HCF evolution with monitors");
  auto* c_verify = app.add_subcommand("verify-identities", "Bianchi / Lee-form residuals");

  CLI11_PARSE(app, argc, argv);

  json cfg;
  try {
    cfg = load_config(config_path);
    const std::string want =
        c_certify->parsed() ? "certify"
        : c_ode->parsed()   ? "ode_invariance"
        : c_pde->parsed()   ? "pde_run"
                            : "verify_identities";
    if (cfg.contains("kind") && cfg.at("kind").get<std::string>() != want)
      throw std::runtime_error("config kind '" + cfg.at("kind").get<std::string>() +
                               "' does not match subcommand '" + want + "'");
    if (!seed_set) seed = cfg.value("seed", 0);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    fs::path out(out_dir);
    fs::create_directories(out);
    if (c_verify->parsed()) return run_verify_identities(cfg, out, quiet);
    if (c_ode->parsed()) return run_ode_invariance(cfg, out, seed, quiet);
    if (c_pde->parsed()) return run_pde(cfg, out, quiet);
    if (c_certify->parsed()) return run_certify(cfg, out, seed, quiet);
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
