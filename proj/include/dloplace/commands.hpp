#pragma once

// Command implementations behind the dloplace tool. Each returns the exit
// status: 0 success, 1 usage / I-O / validation, 2 planning, fit or
// simulation failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dloplace/controller.hpp"
#include "dloplace/io.hpp"
#include "dloplace/svg.hpp"

namespace dloplace {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDomain = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// DLO_SEED replaces the controller seed.
inline void apply_env(ToolConfig& cfg) {
  if (const char* s = std::getenv("DLO_SEED"); s && *s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw UsageError(std::string("DLO_SEED is not an integer: ") + s);
    cfg.controller.seed = v;
  }
}

/// Explicit argument first, then DLO_OUTPUT_DIR.
inline std::filesystem::path output_dir(const std::string& arg) {
  if (!arg.empty()) return arg;
  if (const char* s = std::getenv("DLO_OUTPUT_DIR"); s && *s) return s;
  throw UsageError("no output directory given and DLO_OUTPUT_DIR unset");
}

inline ToolConfig config_for(const std::string& path) {
  ToolConfig cfg = path.empty() ? ToolConfig{} : load_config(path);
  apply_env(cfg);
  return cfg;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::system_error(errno, std::generic_category(), "cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::string& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::system_error(errno, std::generic_category(), "cannot open " + p);
  return is;
}

inline void finish(std::ofstream& os, const std::filesystem::path& p) {
  os.flush();
  if (!os) throw std::system_error(errno, std::generic_category(), "write failed: " + p.string());
}

inline std::string first_line(const std::string& path) {
  auto is = open_in(path);
  std::string line;
  std::getline(is, line);
  return line;
}

/// Point samples from either an observation CSV or a shape CSV.
inline ObservedShape read_points_file(const std::string& path, double default_L) {
  const auto head = first_line(path);
  auto is = open_in(path);
  if (!head.empty() && head.front() == '{' && parse_header_line(head, path).contains("k")) {
    const auto shape = read_shape_csv(is);
    ObservedShape obs;
    obs.L = shape.stiffness.L;
    obs.base = shape.base;
    obs.contact_length = shape.contact_length;
    for (const auto& st : shape.samples) obs.points.push_back({st.x, st.y});
    return obs;
  }
  return read_observed_csv(is, default_L);
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const PlanningError& e) {
    err << "planning failed: " << e.what() << "\n";
    return kExitDomain;
  } catch (const FitError& e) {
    err << "fit failed: " << e.what() << "\n";
    return kExitDomain;
  } catch (const FormatError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::system_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return kExitDomain;
  }
}

inline Json summary_json(const SimResult& r, double epsilon) {
  const double n = static_cast<double>(r.frames.size());
  return Json{{"success", r.success},
              {"replans", r.replans},
              {"frames", r.frames.size()},
              {"under_epsilon", r.under_epsilon()},
              {"under_epsilon_fraction", n > 0 ? static_cast<double>(r.under_epsilon()) / n : 0.0},
              {"epsilon", epsilon},
              {"stats", error_stats_to_json(r.stats)},
              {"diagnostics", r.diagnostics}};
}

inline void print_stats(std::ostream& out, const ErrorStats& s) {
  out << format_stats_line("shape error", s.shape, "m") << "\n"
      << format_stats_line("elastica error", s.elastica, "") << "\n"
      << format_stats_line("tangent error", s.tangent, "rad") << "\n"
      << format_stats_line("accuracy error", s.weighted, "") << "\n";
}

}  // namespace detail

/// Echo the resolved configuration.
inline int cmd_config(const std::string& config_path, const std::string& output, std::ostream& out,
                      std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::config_for(config_path);
    const auto text = config_to_json(cfg).dump(2) + "\n";
    if (output.empty()) {
      out << text;
    } else {
      auto os = detail::open_out(output);
      os << text;
      detail::finish(os, output);
    }
    return kExitOk;
  });
}

/// `start` is a JSON file path or an inline JSON object.
inline int cmd_plan(const std::string& config_path, const std::string& start,
                    const std::string& output, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::config_for(config_path);
    Json sj;
    if (!start.empty() && start.front() == '{') {
      try {
        sj = Json::parse(start);
      } catch (const Json::parse_error& e) {
        throw FormatError(std::string("start: ") + e.what());
      }
    } else {
      sj = read_json_file(start);
    }
    const auto s = start_from_json(sj, cfg.stiffness.L);
    const auto path = plan_full(s, cfg.surface, cfg.direction, cfg.grid, cfg.stiffness);
    auto os = detail::open_out(output);
    os << plan_to_json(path).dump(2) << "\n";
    detail::finish(os, output);
    out << "nodes: " << path.nodes.size() << " (I " << path.count(Stage::I) << ", II "
        << path.count(Stage::II) << ", III " << path.count(Stage::III) << ")\n";
    return kExitOk;
  });
}

struct SimulateOptions {
  bool corpus = false;
  std::vector<Disturbance> disturbances;
};

/// Single plan, or with `opt.corpus` the generated multi-path corpus.
/// Writes frames.csv and summary.json into the output directory.
inline int cmd_simulate(const std::string& config_path, const std::string& plan_path,
                        const std::string& out_dir, const SimulateOptions& opt, std::ostream& out,
                        std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::config_for(config_path);
    const auto dir = detail::output_dir(out_dir);
    std::filesystem::create_directories(dir);
    if (!opt.corpus) {
      if (plan_path.empty()) throw UsageError("simulate needs a plan file or --corpus");
      const auto path = plan_from_json(read_json_file(plan_path));
      const auto r = run_simulation(path, cfg.controller, opt.disturbances);
      auto fs = detail::open_out(dir / "frames.csv");
      write_frames_csv(fs, r.frames);
      detail::finish(fs, dir / "frames.csv");
      auto ss = detail::open_out(dir / "summary.json");
      ss << detail::summary_json(r, cfg.controller.epsilon).dump(2) << "\n";
      detail::finish(ss, dir / "summary.json");
      out << "frames: " << r.frames.size() << ", under epsilon: " << r.under_epsilon()
          << ", replans: " << r.replans << ", success: " << (r.success ? "yes" : "no") << "\n";
      detail::print_stats(out, r.stats);
      if (!r.success) err << "simulation failed: " << r.diagnostics << "\n";
      return r.success ? kExitOk : kExitDomain;
    }

    const auto paths = generate_corpus(cfg.corpus, cfg.stiffness, cfg.surface, cfg.grid);
    std::vector<FrameRecord> all;
    Json per_path = Json::array();
    bool success = true;
    int replans = 0;
    std::size_t under = 0;
    auto fs = detail::open_out(dir / "frames.csv");
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto r = run_simulation(paths[i], cfg.controller, opt.disturbances);
      std::ostringstream rows;
      write_frames_csv(rows, r.frames, std::to_string(i));
      std::string text = rows.str();
      if (i > 0) text.erase(0, text.find('\n') + 1);  // single column line
      fs << text;
      all.insert(all.end(), r.frames.begin(), r.frames.end());
      success = success && r.success;
      replans += r.replans;
      under += r.under_epsilon();
      per_path.push_back(Json{{"path", i},
                              {"direction", to_string(paths[i].direction)},
                              {"nodes", paths[i].nodes.size()},
                              {"frames", r.frames.size()},
                              {"replans", r.replans},
                              {"success", r.success}});
    }
    detail::finish(fs, dir / "frames.csv");
    const auto stats = aggregate_stats(all);
    const double fraction = all.empty() ? 0.0 : static_cast<double>(under) / static_cast<double>(all.size());
    Json summary{{"success", success},
                 {"paths", paths.size()},
                 {"frames", all.size()},
                 {"replans", replans},
                 {"under_epsilon", under},
                 {"under_epsilon_fraction", fraction},
                 {"epsilon", cfg.controller.epsilon},
                 {"noise_sigma", cfg.controller.noise_sigma},
                 {"stats", error_stats_to_json(stats)},
                 {"per_path", per_path}};
    auto ss = detail::open_out(dir / "summary.json");
    ss << summary.dump(2) << "\n";
    detail::finish(ss, dir / "summary.json");
    out << "paths: " << paths.size() << ", frames: " << all.size() << ", under epsilon: " << under
        << " (" << std::fixed << std::setprecision(1) << 100.0 * fraction << "%), replans: " << replans
        << ", success: " << (success ? "yes" : "no") << "\n";
    out.unsetf(std::ios::floatfield);
    detail::print_stats(out, stats);
    return success ? kExitOk : kExitDomain;
  });
}

/// Writes the CandidateSet JSON, best residual first.
inline int cmd_fit(const std::string& points_path, const std::string& config_path,
                   const std::string& output, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::config_for(config_path);
    const auto obs = detail::read_points_file(points_path, cfg.stiffness.L);
    obs.validate();
    const StiffnessSpec stiffness{cfg.stiffness.EI, obs.L};
    FitOptions fo;
    fo.starts = cfg.controller.fit_starts;
    fo.refine = cfg.controller.fit_refine;
    const auto set = fit_elastica(obs, stiffness, fo);
    const auto text = candidates_to_json(set).dump(2) + "\n";
    if (output.empty()) {
      out << text;
    } else {
      auto os = detail::open_out(output);
      os << text;
      detail::finish(os, output);
      out << "candidates: " << set.candidates.size() << (set.degenerate ? " (degenerate)" : "") << "\n";
    }
    return kExitOk;
  });
}

struct DatasetOptions {
  int k_stride = 1;       // keep every n-th modulus
  int Ltilde_stride = 1;  // keep every n-th period length
};

struct DatasetGrid {
  std::vector<double> k;
  std::vector<double> Ltilde;
};

/// k in [0.02, 0.95] by dk, Ltilde in [L, 8L] by dLtilde, integer-indexed.
inline DatasetGrid dataset_grid(const ToolConfig& cfg, const DatasetOptions& opt) {
  if (opt.k_stride < 1 || opt.Ltilde_stride < 1) throw UsageError("strides must be >= 1");
  DatasetGrid g;
  const double L = cfg.stiffness.L;
  const auto nk = static_cast<long>(std::floor((0.95 - 0.02) / cfg.grid.dk + 1e-9));
  for (long i = 0; i <= nk; i += opt.k_stride) g.k.push_back(0.02 + static_cast<double>(i) * cfg.grid.dk);
  const auto nl = static_cast<long>(std::floor((8.0 * L - L) / cfg.grid.dLtilde + 1e-9));
  for (long i = 0; i <= nl; i += opt.Ltilde_stride) {
    g.Ltilde.push_back(L + static_cast<double>(i) * cfg.grid.dLtilde);
  }
  return g;
}

/// Per-shape sample CSV under shapes/ plus labels.csv.
inline int cmd_dataset_gen(const std::string& config_path, const std::string& out_dir,
                           const DatasetOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::config_for(config_path);
    const auto dir = detail::output_dir(out_dir);
    const auto grid = dataset_grid(cfg, opt);
    std::filesystem::create_directories(dir / "shapes");
    auto labels = detail::open_out(dir / "labels.csv");
    labels << "id,k,s0,Ltilde,phase,file\n";
    std::size_t id = 0;
    char name[32];
    for (double k : grid.k) {
      for (double Lt : grid.Ltilde) {
        for (double phase : {0.25, 0.75}) {
          const ElasticaParams p{k, phase * Lt, Lt};
          const auto shape = eval_shape(Pose{0.0, 0.0, 0.0}, p, cfg.stiffness, cfg.dataset_points);
          std::snprintf(name, sizeof name, "%07zu.csv", id);
          const auto file = dir / "shapes" / name;
          auto os = detail::open_out(file);
          write_shape_csv(os, shape);
          detail::finish(os, file);
          labels << id << ',' << format_double(k) << ',' << format_double(p.s0) << ','
                 << format_double(Lt) << ',' << format_double(phase) << ",shapes/" << name << '\n';
          ++id;
        }
      }
    }
    detail::finish(labels, dir / "labels.csv");
    out << "shapes: " << id << " (" << grid.k.size() << " k x " << grid.Ltilde.size()
        << " Ltilde x 2 phases)\n";
    return kExitOk;
  });
}

struct RenderOptions {
  std::size_t every = 1;  // draw every n-th plan node
  double width = 800.0;
};

/// Plans and shape CSVs are drawn solid, point CSVs dashed.
inline int cmd_render(const std::vector<std::string>& inputs, const std::string& output,
                      const RenderOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (inputs.empty()) throw UsageError("render needs at least one input");
    if (opt.every < 1) throw UsageError("--every must be >= 1");
    std::vector<SvgLayer> layers;
    std::optional<double> surface_y;
    for (const auto& in : inputs) {
      const auto head = detail::first_line(in);
      if (!head.empty() && head.front() == '{' && in.size() >= 5 &&
          in.substr(in.size() - 5) == ".json") {
        const auto path = plan_from_json(read_json_file(in));
        surface_y = path.surface.y0;
        for (std::size_t i = 0; i < path.nodes.size(); ++i) {
          if (i % opt.every != 0 && i + 1 != path.nodes.size()) continue;
          const auto shape = node_shape(path.nodes[i], path.direction, path.surface, path.stiffness);
          layers.push_back({shape_points(shape), false, "node " + std::to_string(i)});
        }
        continue;
      }
      auto is = detail::open_in(in);
      if (!head.empty() && head.front() == '{' && parse_header_line(head, in).contains("k")) {
        layers.push_back({shape_points(read_shape_csv(is)), false, in});
      } else {
        layers.push_back({read_observed_csv(is, 1.0).points, true, in});
      }
    }
    if (layers.empty() && !surface_y) throw FormatError("nothing to render");
    const auto svg = render_svg(layers, surface_y, opt.width);
    auto os = detail::open_out(output);
    os << svg;
    detail::finish(os, output);
    out << "layers: " << layers.size() << "\n";
    return kExitOk;
  });
}

/// Recompute mean / std / median per metric from a frames CSV.
inline ErrorStats stats_from_frames_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("frames CSV: empty input");
  const auto cols = split_csv(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw FormatError("frames CSV: missing column '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t cs = col("shape_err"), ce = col("elastica_err"), ct = col("tangent_err"),
                    cw = col("weighted");
  std::vector<double> s, e, t, w;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != cols.size()) throw FormatError("frames CSV: ragged row");
    s.push_back(parse_double(f[cs]));
    e.push_back(parse_double(f[ce]));
    t.push_back(parse_double(f[ct]));
    w.push_back(parse_double(f[cw]));
  }
  if (s.empty()) throw FormatError("frames CSV: no rows");
  return {describe(s), describe(e), describe(t), describe(w)};
}

inline int cmd_stats(const std::string& frames_path, const std::string& output, std::ostream& out,
                     std::ostream& err) {
  return detail::guarded(err, [&] {
    auto is = detail::open_in(frames_path);
    const auto stats = stats_from_frames_csv(is);
    detail::print_stats(out, stats);
    if (!output.empty()) {
      auto os = detail::open_out(output);
      os << error_stats_to_json(stats).dump(2) << "\n";
      detail::finish(os, output);
    }
    return kExitOk;
  });
}

}  // namespace dloplace
