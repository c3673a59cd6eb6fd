// roa: certify, estimate, reference, plot.
// Exit codes: 0 success, 1 infeasible, 2 unknown, 64 usage or input error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roa/io.hpp"
#include "roa/odesim.hpp"
#include "roa/roa.hpp"
#include "roa/setgeom.hpp"

namespace fs = std::filesystem;
using namespace roa;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kUnknown = 2;
constexpr int kUsage = 64;

int log_level() {
  const char* v = std::getenv("ROA_LOG");
  return v ? std::atoi(v) : 0;
}

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << msg << "\n";
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_points(const fs::path& path, const PointSet& s) {
  std::ostringstream os;
  for (std::size_t k = 0; k < s.dim(); ++k) os << (k ? "," : "") << "x" << k + 1;
  os << "\n";
  write_csv(os, s);
  write_text(path, os.str());
}

SdpOptions sdp_options() {
  SdpOptions o;
  if (log_level() >= 3) o.verbosity = 1;
  return o;
}

ExperimentConfig config_for(const SystemSpec& sys, const std::string& path) {
  if (path.empty()) return parse_config(json::object(), sys.nvars);
  return load_config(path, sys.nvars);
}

json system_json(const SystemSpec& sys) {
  return {{"name", sys.name}, {"nvars", sys.nvars}, {"field", sys.components}, {"rescale", sys.rescale}};
}

// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string system, config, out;
  int d = 2;
  double r = 1.0;
};

int cmd_certify(const CertifyArgs& a) {
  const SystemSpec sys = load_system(a.system);
  const ExperimentConfig cfg = config_for(sys, a.config);
  if (!(a.r > 0.0)) throw ParseError("--r must be positive");
  if (a.d < 2) throw ParseError("--d must be >= 2");
  const HResult res = h_oracle(sys.field(), a.d, a.r, cfg.params, sdp_options());
  json j;
  j["system"] = system_json(sys);
  j["d"] = a.d;
  j["r"] = a.r;
  j["outcome"] = to_string(res.outcome);
  j["sdp_status"] = to_string(res.sdp_status);
  j["message"] = res.message;
  j["constraints"] = res.constraints;
  if (res.certificate) j["certificate"] = to_json(*res.certificate);
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  log(1, "certify: " + std::string(to_string(res.outcome)) + " (" + res.message + ", " +
             std::to_string(res.seconds) + " s)");
  switch (res.outcome) {
    case HOutcome::Feasible: return kOk;
    case HOutcome::Infeasible: return kInfeasible;
    case HOutcome::Unknown: return kUnknown;
  }
  return kUnknown;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string system, config, out = ".";
  int resolution = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

ExperimentConfig run_config(const SystemSpec& sys, const RunArgs& a) {
  ExperimentConfig cfg = config_for(sys, a.config);
  if (a.resolution > 0) cfg.resolution = a.resolution;
  if (a.seed_set) cfg.seed = a.seed;
  return cfg;
}

ReferenceRoa build_reference(const VectorField& f, const ExperimentConfig& cfg) {
  if (cfg.resolution == 1) warn("grid resolution 1 gives a single-node reference");
  log(1, "reference: classifying " + std::to_string(cfg.grid().size()) + " nodes");
  return reference_roa(f, cfg.grid(), cfg.integrator);
}

void write_reference(const fs::path& dir, const SystemSpec& sys, const ReferenceRoa& ref) {
  std::ostringstream labels;
  write_labeled_csv(labels, ref);
  write_text(dir / "reference_labels.csv", labels.str());
  write_points(dir / "reference_boundary.csv", ref.boundary());
  write_points(dir / "reference_inside.csv", ref.inside_points());
  json j;
  j["system"] = system_json(sys);
  j["grid"] = {{"lo", ref.grid.lo()}, {"hi", ref.grid.hi()}, {"resolution", ref.grid.resolution()}};
  j["inside"] = ref.inside;
  j["outside"] = ref.outside;
  j["undecided"] = ref.undecided;
  j["detached"] = ref.detached;
  write_text(dir / "reference.json", j.dump(2) + "\n");
}

int cmd_reference(const RunArgs& a) {
  const SystemSpec sys = load_system(a.system);
  const ExperimentConfig cfg = run_config(sys, a);
  const ReferenceRoa ref = build_reference(sys.field(), cfg);
  write_reference(a.out, sys, ref);
  std::cout << "inside " << ref.inside << "  outside " << ref.outside << "  undecided " << ref.undecided << "\n";
  return kOk;
}

int cmd_estimate(const RunArgs& a) {
  const SystemSpec sys = load_system(a.system);
  const ExperimentConfig cfg = run_config(sys, a);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  if (cfg.degrees.empty()) {
    warn("no degrees in the config; nothing to do");
    return kOk;
  }
  const VectorField f = sys.field();
  std::optional<ReferenceRoa> ref;
  PointSet inside;
  if (cfg.reference) {
    ref = build_reference(f, cfg);
    write_reference(dir, sys, *ref);
    inside = ref->inside_points();
  }

  std::ostringstream summary;
  summary << "d,r_best,a,component_size,hausdorff,status\n";
  std::cout << std::left << std::setw(4) << "d" << std::setw(12) << "r_best" << std::setw(14) << "a" << std::setw(10)
            << "|D|" << "hausdorff\n";
  int exit_code = kOk;
  for (int d : cfg.degrees) {
    EstimateConfig ec;
    ec.r_min = cfg.r_min;
    ec.r_max = cfg.r_max;
    ec.r_tol = cfg.r_tol;
    ec.a_tol = cfg.a_tol;
    ec.params = cfg.params;
    ec.sdp = sdp_options();
    ec.selection = cfg.selection;
    ec.grid = cfg.grid();
    ec.reference = inside.empty() ? nullptr : &inside;
    ec.on_oracle = [d](double r, const HResult& h) {
      log(2, "d=" + std::to_string(d) + " r=" + format_double(r) + " " + to_string(h.outcome));
    };
    const std::string tag = "d" + std::to_string(d);
    try {
      const RoaEstimate e = estimate_roa(f, d, ec);
      json j = to_json(e);
      j["system"] = system_json(sys);
      j["seed"] = cfg.seed;
      j["component_csv"] = "component_" + tag + ".csv";
      write_text(dir / ("estimate_" + tag + ".json"), j.dump(2) + "\n");
      write_points(dir / ("component_" + tag + ".csv"), e.component);
      const std::string h = e.hausdorff_to_reference ? format_double(*e.hausdorff_to_reference) : "";
      summary << d << "," << format_double(e.r_best) << "," << format_double(e.a) << "," << e.component.size() << ","
              << h << ",ok\n";
      std::ostringstream row;
      row << std::left << std::setprecision(6) << std::setw(4) << d << std::setw(12) << e.r_best << std::setw(14)
          << e.a << std::setw(10) << e.component.size();
      if (e.hausdorff_to_reference) {
        row << *e.hausdorff_to_reference;
      } else {
        row << "-";
      }
      std::cout << row.str() << "\n";
      log(1, tag + ": " + std::to_string(e.seconds) + " s");
    } catch (const NoFeasibleRadius& err) {
      summary << d << ",,,,,no feasible radius\n";
      std::cout << std::left << std::setw(4) << d << "no feasible radius\n";
      log(1, err.what());
      exit_code = kInfeasible;
    }
  }
  write_text(dir / "summary.csv", summary.str());
  return exit_code;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> estimates;
  std::string reference;
  std::string out = ".";
};

struct PlotSeries {
  std::string name;
  PointSet points;
  double r_best = 0.0;
};

// Nodes of D with a grid neighbour outside D.
PointSet component_boundary(const PointSet& d, const UniformGrid& g) {
  std::vector<std::uint8_t> mask(g.size(), 0);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t k = g.nearest(std::vector<double>(d[i].begin(), d[i].end()));
    mask[k] = 1;
    idx.push_back(k);
  }
  PointSet out(d.dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    bool edge = false;
    int count = 0;
    g.for_each_neighbour(idx[i], [&](std::size_t j) {
      ++count;
      edge = edge || !mask[j];
    });
    if (edge || count < static_cast<int>(2 * g.dim())) out.add(d[i]);
  }
  return out;
}

std::string svg_plot(const std::vector<PlotSeries>& series, const std::optional<PointSet>& reference) {
  double lo = -1.0, hi = 1.0;
  auto extend = [&](double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  if (reference) {
    for (double v : reference->coords()) extend(v);
  }
  for (const auto& s : series) {
    extend(-s.r_best);
    extend(s.r_best);
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double size = 600.0;
  auto px = [&](double v) { return (v - lo) / (hi - lo) * size; };
  auto py = [&](double v) { return size - (v - lo) / (hi - lo) * size; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 "
     << size << " " << size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (reference) {
    os << "<g fill=\"black\">\n";
    for (std::size_t i = 0; i < reference->size(); ++i) {
      os << "<circle cx=\"" << px((*reference)[i][0]) << "\" cy=\"" << py((*reference)[i][1]) << "\" r=\"0.8\"/>\n";
    }
    os << "</g>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = colors[k % 6];
    os << "<g fill=\"" << col << "\">\n";
    for (std::size_t i = 0; i < series[k].points.size(); ++i) {
      os << "<circle cx=\"" << px(series[k].points[i][0]) << "\" cy=\"" << py(series[k].points[i][1])
         << "\" r=\"0.8\"/>\n";
    }
    os << "</g>\n";
    os << "<circle cx=\"" << px(0.0) << "\" cy=\"" << py(0.0) << "\" r=\"" << series[k].r_best / (hi - lo) * size
       << "\" fill=\"none\" stroke=\"" << col << "\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"10\" y=\"" << 20 + 18 * k << "\" fill=\"" << col << "\" font-size=\"14\">" << series[k].name
       << "  r_best = " << format_double(series[k].r_best) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int cmd_plot(const PlotArgs& a) {
  if (a.estimates.empty() && a.reference.empty()) throw ParseError("plot: give --estimate and/or --reference");
  std::optional<PointSet> reference;
  if (!a.reference.empty()) {
    std::ifstream is(a.reference);
    if (!is) throw ParseError("cannot open " + a.reference);
    reference = read_csv(is);
  }
  std::vector<PlotSeries> series;
  std::size_t dim = reference ? reference->dim() : 0;
  for (const auto& path : a.estimates) {
    const json j = io_detail::parse_text(read_file(path), path);
    PlotSeries s;
    try {
      s.name = "d = " + std::to_string(j.at("requested_degree").get<int>());
      s.r_best = j.at("r_best").get<double>();
      const fs::path csv = fs::path(path).parent_path() / j.at("component_csv").get<std::string>();
      std::ifstream is(csv);
      if (!is) throw ParseError("cannot open " + csv.string());
      const PointSet d = read_csv(is);
      const json& g = j.at("grid");
      const UniformGrid grid(g.at("lo").get<std::vector<double>>(), g.at("hi").get<std::vector<double>>(),
                             g.at("resolution").get<int>());
      s.points = d.empty() ? d : component_boundary(d, grid);
      if (dim == 0) dim = grid.dim();
      if (grid.dim() != dim) throw ParseError("plot: inputs have different dimensions");
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
    series.push_back(std::move(s));
  }

  std::ostringstream csv;
  csv << "set";
  for (std::size_t k = 0; k < dim; ++k) csv << ",x" << k + 1;
  csv << "\n";
  auto rows = [&](const std::string& name, const PointSet& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      csv << name;
      for (double v : s[i]) csv << "," << format_double(v);
      csv << "\n";
    }
  };
  if (reference) rows("reference_boundary", *reference);
  for (const auto& s : series) {
    rows(s.name + " boundary", s.points);
    if (dim == 2) {
      PointSet circle(2);
      for (int k = 0; k < 180; ++k) {
        const double t = 2.0 * std::numbers::pi * k / 180;
        circle.add(std::vector<double>{s.r_best * std::cos(t), s.r_best * std::sin(t)});
      }
      rows(s.name + " r_best circle", circle);
    }
  }
  const fs::path dir = a.out;
  write_text(dir / "plot.csv", csv.str());
  if (dim == 2) {
    write_text(dir / "plot.svg", svg_plot(series, reference));
  } else {
    warn("SVG output needs a 2-D system; wrote plot.csv only");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-of-attraction estimates from SOS Lyapunov certificates"};
  app.require_subcommand(1);

  CertifyArgs ca;
  auto* certify = app.add_subcommand("certify", "Solve H(d, r) once and print the certificate JSON");
  certify->add_option("system", ca.system, "System JSON file")->required();
  certify->add_option("--d", ca.d, "Degree of P")->required();
  certify->add_option("--r", ca.r, "Ball radius")->required();
  certify->add_option("--config", ca.config, "Experiment config (beta, gamma, delta)");
  certify->add_option("--out", ca.out, "Write JSON here instead of stdout");

  RunArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Bisection, level and component for each configured degree");
  estimate->add_option("system", ea.system, "System JSON file")->required();
  estimate->add_option("--config", ea.config, "Experiment config JSON");
  estimate->add_option("--out", ea.out, "Output directory");
  estimate->add_option("--resolution", ea.resolution, "Grid nodes per axis (overrides the config)");
  estimate->add_option("--seed", ea.seed, "Recorded in the output metadata");

  RunArgs ra;
  auto* reference = app.add_subcommand("reference", "Classify a grid by forward integration");
  reference->add_option("system", ra.system, "System JSON file")->required();
  reference->add_option("--config", ra.config, "Experiment config JSON (grid, integrator)");
  reference->add_option("--out", ra.out, "Output directory");
  reference->add_option("--resolution", ra.resolution, "Grid nodes per axis (overrides the config)");
  reference->add_option("--seed", ra.seed, "Recorded in the output metadata");

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot", "Overlay estimates and the reference boundary (SVG + CSV)");
  plot->add_option("--estimate", pa.estimates, "estimate_d*.json files");
  plot->add_option("--reference", pa.reference, "Reference boundary CSV");
  plot->add_option("--out", pa.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  ea.seed_set = estimate->count("--seed") > 0;
  ra.seed_set = reference->count("--seed") > 0;

  try {
    if (*certify) return cmd_certify(ca);
    if (*estimate) return cmd_estimate(ea);
    if (*reference) return cmd_reference(ra);
    if (*plot) return cmd_plot(pa);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnknown;
  }
  return kUsage;
}
