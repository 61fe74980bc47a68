#pragma once

// File formats: shape and observation CSV with a JSON header line, plan and
// candidate JSON, simulation frame CSV and summary JSON, tool configuration.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "dloplace/characterize.hpp"
#include "dloplace/controller.hpp"
#include "dloplace/planner.hpp"

namespace dloplace {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t\r");
  std::size_t e = text.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw FormatError("empty numeric field");
  const std::string t = text.substr(b, e - b + 1);
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw FormatError("not a number: '" + t + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------- poses

inline Json pose_to_json(const Pose& p) {
  Json j{{"x", p.x}, {"y", p.y}, {"phi", p.phi}};
  if (p.z) j["z"] = *p.z;
  if (p.theta) j["theta"] = *p.theta;
  return j;
}

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw FormatError(where + ": unknown key '" + key + "'");
  }
}

inline double number_at(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw FormatError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline Pose pose_from_json(const Json& j, const std::string& where = "pose") {
  check_keys(j, {"x", "y", "phi", "z", "theta"}, where);
  Pose p{number_at(j, "x", where), number_at(j, "y", where), number_at(j, "phi", where)};
  if (j.contains("z")) p.z = number_at(j, "z", where);
  if (j.contains("theta")) p.theta = number_at(j, "theta", where);
  return p;
}

// ---------------------------------------------------------------- shapes

inline void write_shape_csv(std::ostream& os, const DLOShape& shape) {
  Json header{{"k", shape.params.k},         {"s0", shape.params.s0},
              {"Ltilde", shape.params.Ltilde}, {"EI", shape.stiffness.EI},
              {"L", shape.stiffness.L},        {"base", pose_to_json(shape.base)},
              {"l", shape.contact_length}};
  os << header.dump() << "\n";
  os << "s,x,y,phi,kappa\n";
  for (const auto& st : shape.samples) {
    os << format_double(st.s) << ',' << format_double(st.x) << ',' << format_double(st.y) << ','
       << format_double(st.phi) << ',' << format_double(st.kappa) << '\n';
  }
}

inline Json parse_header_line(const std::string& line, const std::string& where) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw FormatError(where + ": malformed JSON header: " + e.what());
  }
}

inline DLOShape read_shape_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("shape CSV: empty input");
  const Json h = parse_header_line(line, "shape CSV");
  check_keys(h, {"k", "s0", "Ltilde", "EI", "L", "base", "l"}, "shape CSV header");
  DLOShape shape;
  try {
    shape.params = ElasticaParams{number_at(h, "k", "shape CSV header"),
                                  number_at(h, "s0", "shape CSV header"),
                                  number_at(h, "Ltilde", "shape CSV header")};
    shape.stiffness = StiffnessSpec{number_at(h, "EI", "shape CSV header"),
                                    number_at(h, "L", "shape CSV header")};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("shape CSV header: ") + e.what());
  } catch (const std::domain_error& e) {
    throw FormatError(std::string("shape CSV header: ") + e.what());
  }
  if (!h.contains("base")) throw FormatError("shape CSV header: missing 'base'");
  shape.base = pose_from_json(h.at("base"), "shape CSV base");
  shape.contact_length = h.contains("l") ? number_at(h, "l", "shape CSV header") : 0.0;
  if (!std::getline(is, line) || line.rfind("s,x,y,phi,kappa", 0) != 0) {
    throw FormatError("shape CSV: expected column line 's,x,y,phi,kappa'");
  }
  std::size_t row = 2;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw FormatError("shape CSV line " + std::to_string(row) + ": expected 5 fields");
    shape.samples.push_back(
        {parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4])});
  }
  if (shape.samples.size() < 2) throw FormatError("shape CSV: fewer than 2 samples");
  return shape;
}

/// Observation CSV: optional JSON header {L, base, l}, then "x,y" rows.
/// Without a header, L comes from `default_L` and the base pose from the
/// first point and first chord.
inline void write_observed_csv(std::ostream& os, const ObservedShape& obs) {
  Json header{{"L", obs.L}, {"base", pose_to_json(obs.base)}, {"l", obs.contact_length}};
  os << header.dump() << "\n";
  os << "x,y\n";
  for (const auto& p : obs.points) os << format_double(p[0]) << ',' << format_double(p[1]) << '\n';
}

inline ObservedShape read_observed_csv(std::istream& is, std::optional<double> default_L = {}) {
  ObservedShape obs;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("points CSV: empty input");
  bool have_header = false;
  if (!line.empty() && line.front() == '{') {
    const Json h = parse_header_line(line, "points CSV");
    check_keys(h, {"L", "base", "l"}, "points CSV header");
    obs.L = number_at(h, "L", "points CSV header");
    if (h.contains("base")) {
      obs.base = pose_from_json(h.at("base"), "points CSV base");
      have_header = true;
    }
    obs.contact_length = h.contains("l") ? number_at(h, "l", "points CSV header") : 0.0;
    if (!std::getline(is, line)) throw FormatError("points CSV: missing column line");
  } else if (default_L) {
    obs.L = *default_L;
  } else {
    throw FormatError("points CSV: no header and no default length");
  }
  if (line.rfind("x,y", 0) != 0) throw FormatError("points CSV: expected column line 'x,y'");
  std::size_t row = have_header ? 2 : 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw FormatError("points CSV line " + std::to_string(row) + ": expected 2 fields");
    obs.points.push_back({parse_double(f[0]), parse_double(f[1])});
  }
  if (obs.points.size() < 2) throw FormatError("points CSV: fewer than 2 points");
  if (!have_header) {
    const auto& a = obs.points[0];
    const auto& b = obs.points[1];
    obs.base = Pose{a[0], a[1], std::atan2(b[1] - a[1], b[0] - a[0])};
  }
  return obs;
}

// ---------------------------------------------------------------- plans

inline Json grid_to_json(const GridSpec& g) {
  return Json{{"dx", g.dx},         {"dy", g.dy},     {"dz", g.dz}, {"dphi", g.dphi},
              {"dtheta", g.dtheta}, {"dLtilde", g.dLtilde}, {"dk", g.dk}, {"dl", g.dl}};
}

inline Json surface_to_json(const SurfaceSpec& s) {
  return Json{{"y0", s.y0}, {"alpha", s.alpha}, {"mu1", s.mu1}, {"mu2", s.mu2}};
}

inline Json stiffness_to_json(const StiffnessSpec& s) { return Json{{"EI", s.EI}, {"L", s.L}}; }

inline Json optional_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline RollDirection direction_from_string(const std::string& s) {
  if (s == "rightward") return RollDirection::rightward;
  if (s == "leftward") return RollDirection::leftward;
  throw FormatError("direction must be 'rightward' or 'leftward', got '" + s + "'");
}

inline Stage stage_from_string(const std::string& s) {
  if (s == "I") return Stage::I;
  if (s == "II") return Stage::II;
  if (s == "III") return Stage::III;
  throw FormatError("unknown stage '" + s + "'");
}

inline Json plan_to_json(const PlanPath& path) {
  Json nodes = Json::array();
  for (const auto& n : path.nodes) {
    nodes.push_back(Json{{"stage", to_string(n.stage)},
                         {"base", pose_to_json(n.base)},
                         {"grasp", pose_to_json(n.grasp)},
                         {"k", n.params.k},
                         {"s0", n.params.s0},
                         {"Ltilde", n.params.Ltilde},
                         {"l", n.l},
                         {"friction_margin", optional_number(n.friction_margin)},
                         {"penetration_margin", n.penetration_margin}});
  }
  const auto b = path.stage_begin();
  return Json{{"header",
               {{"grid", grid_to_json(path.grid)},
                {"surface", surface_to_json(path.surface)},
                {"stiffness", stiffness_to_json(path.stiffness)},
                {"direction", to_string(path.direction)}}},
              {"stage_begin", {{"I", b[0]}, {"II", b[1]}, {"III", b[2]}}},
              {"nodes", nodes}};
}

inline PlanPath plan_from_json(const Json& j) {
  try {
    check_keys(j, {"header", "stage_begin", "nodes"}, "plan");
    const auto& h = j.at("header");
    check_keys(h, {"grid", "surface", "stiffness", "direction"}, "plan header");
    PlanPath path;
    const auto& g = h.at("grid");
    check_keys(g, {"dx", "dy", "dz", "dphi", "dtheta", "dLtilde", "dk", "dl"}, "plan grid");
    path.grid = GridSpec{number_at(g, "dx", "grid"),     number_at(g, "dy", "grid"),
                         number_at(g, "dz", "grid"),     number_at(g, "dphi", "grid"),
                         number_at(g, "dtheta", "grid"), number_at(g, "dLtilde", "grid"),
                         number_at(g, "dk", "grid"),     number_at(g, "dl", "grid")};
    path.grid.validate();
    const auto& s = h.at("surface");
    check_keys(s, {"y0", "alpha", "mu1", "mu2"}, "plan surface");
    path.surface = SurfaceSpec{number_at(s, "y0", "surface"), number_at(s, "alpha", "surface"),
                               number_at(s, "mu1", "surface"), number_at(s, "mu2", "surface")};
    const auto& st = h.at("stiffness");
    check_keys(st, {"EI", "L"}, "plan stiffness");
    path.stiffness = StiffnessSpec{number_at(st, "EI", "stiffness"), number_at(st, "L", "stiffness")};
    path.direction = direction_from_string(h.at("direction").get<std::string>());
    for (const auto& n : j.at("nodes")) {
      check_keys(n, {"stage", "base", "grasp", "k", "s0", "Ltilde", "l", "friction_margin",
                     "penetration_margin"},
                 "plan node");
      PlanNode node;
      node.stage = stage_from_string(n.at("stage").get<std::string>());
      node.base = pose_from_json(n.at("base"));
      node.grasp = pose_from_json(n.at("grasp"));
      node.params = ElasticaParams{number_at(n, "k", "node"), number_at(n, "s0", "node"),
                                   number_at(n, "Ltilde", "node")};
      node.l = number_at(n, "l", "node");
      const auto& fm = n.at("friction_margin");
      node.friction_margin = fm.is_null() ? std::numeric_limits<double>::quiet_NaN() : fm.get<double>();
      node.penetration_margin = number_at(n, "penetration_margin", "node");
      path.nodes.push_back(node);
    }
    return path;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("plan JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("plan JSON: ") + e.what());
  } catch (const std::domain_error& e) {
    throw FormatError(std::string("plan JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- fits and simulations

inline Json params_to_json(const ElasticaParams& p) {
  return Json{{"k", p.k}, {"s0", p.s0}, {"Ltilde", p.Ltilde}};
}

inline Json candidates_to_json(const CandidateSet& set) {
  Json arr = Json::array();
  for (const auto& c : set.candidates) {
    Json j = params_to_json(c.params);
    j["residual"] = c.residual;
    arr.push_back(j);
  }
  return Json{{"degenerate", set.degenerate}, {"candidates", arr}};
}

inline void write_frames_csv(std::ostream& os, const std::vector<FrameRecord>& frames,
                             const std::string& path_column = {}) {
  if (!path_column.empty()) os << "path,";
  os << "index,time,revision,stage,l,shape_err,elastica_err,tangent_err,weighted,decision\n";
  for (const auto& f : frames) {
    if (!path_column.empty()) os << path_column << ',';
    os << f.index << ',' << format_double(f.time) << ',' << f.plan_revision << ','
       << to_string(f.planned.stage) << ',' << format_double(f.planned.l) << ','
       << format_double(f.error.shape_err) << ',' << format_double(f.error.elastica_err) << ','
       << format_double(f.error.tangent_err) << ',' << format_double(f.error.weighted) << ','
       << to_string(f.decision) << '\n';
  }
}

inline Json stats_to_json(const MetricStats& m) {
  return Json{{"mean", m.mean}, {"std", m.std}, {"median", m.median}, {"count", m.count}};
}

inline Json error_stats_to_json(const ErrorStats& s) {
  return Json{{"shape", stats_to_json(s.shape)},
              {"elastica", stats_to_json(s.elastica)},
              {"tangent", stats_to_json(s.tangent)},
              {"weighted", stats_to_json(s.weighted)}};
}

/// Paper-style "mean ± std" line.
inline std::string format_stats_line(const std::string& name, const MetricStats& m,
                                     const std::string& unit) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << name << ": " << m.mean << " ± " << m.std << (unit.empty() ? "" : " [" + unit + "]")
     << " (median " << m.median << ")";
  return os.str();
}

// ---------------------------------------------------------------- configuration

struct ToolConfig {
  StiffnessSpec stiffness{1.0, 0.3};
  SurfaceSpec surface;
  GridSpec grid = GridSpec::defaults(0.3);
  ControllerConfig controller = ControllerConfig::defaults(0.3);
  RollDirection direction = RollDirection::rightward;
  CorpusSpec corpus;
  int dataset_points = 50;

  bool operator==(const ToolConfig& o) const {
    return stiffness == o.stiffness && surface == o.surface && grid == o.grid &&
           direction == o.direction && dataset_points == o.dataset_points &&
           controller.epsilon == o.controller.epsilon && controller.weights == o.controller.weights &&
           controller.noise_sigma == o.controller.noise_sigma && controller.fps == o.controller.fps &&
           controller.seed == o.controller.seed && controller.max_replans == o.controller.max_replans &&
           controller.observation_points == o.controller.observation_points &&
           controller.fit_starts == o.controller.fit_starts &&
           controller.fit_refine == o.controller.fit_refine && corpus.paths == o.corpus.paths &&
           corpus.target_frames == o.corpus.target_frames && corpus.seed == o.corpus.seed &&
           corpus.min_drop == o.corpus.min_drop && corpus.max_drop == o.corpus.max_drop &&
           corpus.slack == o.corpus.slack;
  }
};

namespace detail {

// "<v>L" scales by the rod length; plain numbers are meters.
inline double resolve_length(const Json& v, double L, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (!s.empty() && s.back() == 'L') return parse_double(s.substr(0, s.size() - 1)) * L;
  }
  throw FormatError(where + ": expected meters or a '<fraction>L' string");
}

// "<v>deg" in degrees; plain numbers are radians.
inline double resolve_angle(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.size() > 3 && s.substr(s.size() - 3) == "deg") {
      return parse_double(s.substr(0, s.size() - 3)) * std::numbers::pi / 180.0;
    }
    if (s.size() > 3 && s.substr(s.size() - 3) == "rad") return parse_double(s.substr(0, s.size() - 3));
  }
  throw FormatError(where + ": expected radians or a '<value>deg' string");
}

inline double plain_number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw FormatError(where + ": expected a number");
  return v.get<double>();
}

inline long long plain_integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) throw FormatError(where + ": expected an integer");
  return v.get<long long>();
}

}  // namespace detail

/// Parse a configuration; every key is optional, unknown keys are errors.
inline ToolConfig config_from_json(const Json& j) {
  using detail::plain_integer;
  using detail::plain_number;
  using detail::resolve_angle;
  using detail::resolve_length;
  check_keys(j, {"stiffness", "surface", "grid", "controller", "direction", "corpus", "dataset"},
             "config");
  ToolConfig c;
  if (j.contains("stiffness")) {
    const auto& s = j["stiffness"];
    check_keys(s, {"EI", "L"}, "config.stiffness");
    const double EI = s.contains("EI") ? plain_number(s["EI"], "stiffness.EI") : c.stiffness.EI;
    const double L = s.contains("L") ? plain_number(s["L"], "stiffness.L") : c.stiffness.L;
    try {
      c.stiffness = StiffnessSpec{EI, L};
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("config.stiffness: ") + e.what());
    }
  }
  const double L = c.stiffness.L;
  c.grid = GridSpec::defaults(L);
  c.controller = ControllerConfig::defaults(L);

  if (j.contains("surface")) {
    const auto& s = j["surface"];
    check_keys(s, {"y0", "alpha", "mu1", "mu2"}, "config.surface");
    if (s.contains("y0")) c.surface.y0 = resolve_length(s["y0"], L, "surface.y0");
    if (s.contains("alpha")) c.surface.alpha = resolve_angle(s["alpha"], "surface.alpha");
    if (s.contains("mu1")) c.surface.mu1 = plain_number(s["mu1"], "surface.mu1");
    if (s.contains("mu2")) c.surface.mu2 = plain_number(s["mu2"], "surface.mu2");
    if (c.surface.mu1 < 0.0 || c.surface.mu2 < 0.0) throw FormatError("surface: mu must be >= 0");
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    check_keys(g, {"dx", "dy", "dz", "dphi", "dtheta", "dLtilde", "dk", "dl"}, "config.grid");
    if (g.contains("dx")) c.grid.dx = resolve_length(g["dx"], L, "grid.dx");
    if (g.contains("dy")) c.grid.dy = resolve_length(g["dy"], L, "grid.dy");
    if (g.contains("dz")) c.grid.dz = resolve_length(g["dz"], L, "grid.dz");
    if (g.contains("dphi")) c.grid.dphi = resolve_angle(g["dphi"], "grid.dphi");
    if (g.contains("dtheta")) c.grid.dtheta = resolve_angle(g["dtheta"], "grid.dtheta");
    if (g.contains("dLtilde")) c.grid.dLtilde = resolve_length(g["dLtilde"], L, "grid.dLtilde");
    if (g.contains("dk")) c.grid.dk = plain_number(g["dk"], "grid.dk");
    if (g.contains("dl")) c.grid.dl = resolve_length(g["dl"], L, "grid.dl");
  }
  try {
    c.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config.grid: ") + e.what());
  }
  if (j.contains("controller")) {
    const auto& s = j["controller"];
    check_keys(s, {"epsilon", "weights", "noise_sigma", "fps", "seed", "max_replans",
                   "observation_points", "fit_starts", "fit_refine"},
               "config.controller");
    auto& cc = c.controller;
    if (s.contains("epsilon")) cc.epsilon = plain_number(s["epsilon"], "controller.epsilon");
    if (s.contains("weights")) {
      const auto& w = s["weights"];
      check_keys(w, {"shape", "elastica", "tangent"}, "config.controller.weights");
      if (w.contains("shape")) cc.weights.shape = plain_number(w["shape"], "weights.shape");
      if (w.contains("elastica")) cc.weights.elastica = plain_number(w["elastica"], "weights.elastica");
      if (w.contains("tangent")) cc.weights.tangent = plain_number(w["tangent"], "weights.tangent");
    }
    if (s.contains("noise_sigma")) cc.noise_sigma = resolve_length(s["noise_sigma"], L, "controller.noise_sigma");
    if (s.contains("fps")) cc.fps = plain_number(s["fps"], "controller.fps");
    if (s.contains("seed")) {
      const auto seed = plain_integer(s["seed"], "controller.seed");
      if (seed < 0) throw FormatError("controller.seed must be nonnegative");
      cc.seed = static_cast<std::uint64_t>(seed);
    }
    if (s.contains("max_replans")) cc.max_replans = static_cast<int>(plain_integer(s["max_replans"], "controller.max_replans"));
    if (s.contains("observation_points")) {
      cc.observation_points = static_cast<int>(plain_integer(s["observation_points"], "controller.observation_points"));
    }
    if (s.contains("fit_starts")) cc.fit_starts = static_cast<int>(plain_integer(s["fit_starts"], "controller.fit_starts"));
    if (s.contains("fit_refine")) cc.fit_refine = static_cast<int>(plain_integer(s["fit_refine"], "controller.fit_refine"));
    try {
      cc.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("config.controller: ") + e.what());
    }
  }
  if (j.contains("direction")) {
    if (!j["direction"].is_string()) throw FormatError("config.direction must be a string");
    c.direction = direction_from_string(j["direction"].get<std::string>());
  }
  if (j.contains("corpus")) {
    const auto& s = j["corpus"];
    check_keys(s, {"paths", "target_frames", "seed", "min_drop", "max_drop", "slack"}, "config.corpus");
    if (s.contains("paths")) c.corpus.paths = static_cast<std::size_t>(plain_integer(s["paths"], "corpus.paths"));
    if (s.contains("target_frames")) {
      c.corpus.target_frames = static_cast<std::size_t>(plain_integer(s["target_frames"], "corpus.target_frames"));
    }
    if (s.contains("seed")) c.corpus.seed = static_cast<std::uint64_t>(plain_integer(s["seed"], "corpus.seed"));
    if (s.contains("min_drop")) c.corpus.min_drop = resolve_length(s["min_drop"], L, "corpus.min_drop");
    if (s.contains("max_drop")) c.corpus.max_drop = resolve_length(s["max_drop"], L, "corpus.max_drop");
    if (s.contains("slack")) c.corpus.slack = plain_number(s["slack"], "corpus.slack");
    if (c.corpus.paths == 0 || !(c.corpus.min_drop > 0.0) || c.corpus.max_drop < c.corpus.min_drop) {
      throw FormatError("config.corpus: invalid path count or drop range");
    }
  }
  if (j.contains("dataset")) {
    const auto& s = j["dataset"];
    check_keys(s, {"points"}, "config.dataset");
    if (s.contains("points")) c.dataset_points = static_cast<int>(plain_integer(s["points"], "dataset.points"));
    if (c.dataset_points < 8) throw FormatError("config.dataset.points must be >= 8");
  }
  return c;
}

/// Resolved configuration, every field explicit.
inline Json config_to_json(const ToolConfig& c) {
  const auto& cc = c.controller;
  return Json{{"stiffness", stiffness_to_json(c.stiffness)},
              {"surface", surface_to_json(c.surface)},
              {"grid", grid_to_json(c.grid)},
              {"controller",
               {{"epsilon", cc.epsilon},
                {"weights", {{"shape", cc.weights.shape}, {"elastica", cc.weights.elastica}, {"tangent", cc.weights.tangent}}},
                {"noise_sigma", cc.noise_sigma},
                {"fps", cc.fps},
                {"seed", cc.seed},
                {"max_replans", cc.max_replans},
                {"observation_points", cc.observation_points},
                {"fit_starts", cc.fit_starts},
                {"fit_refine", cc.fit_refine}}},
              {"direction", to_string(c.direction)},
              {"corpus",
               {{"paths", c.corpus.paths},
                {"target_frames", c.corpus.target_frames},
                {"seed", c.corpus.seed},
                {"min_drop", c.corpus.min_drop},
                {"max_drop", c.corpus.max_drop},
                {"slack", c.corpus.slack}}},
              {"dataset", {{"points", c.dataset_points}}}};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline ToolConfig load_config(const std::string& path) {
  try {
    return config_from_json(read_json_file(path));
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

/// Stage I start: {"base": {x, y, phi}, "k": .., "Ltilde": .., "s0": ..}.
inline StageIConfig start_from_json(const Json& j, double L) {
  check_keys(j, {"base", "k", "Ltilde", "s0"}, "start");
  if (!j.contains("base")) throw FormatError("start: missing 'base'");
  const auto& b = j["base"];
  check_keys(b, {"x", "y", "phi", "z", "theta"}, "start.base");
  Pose base{b.contains("x") ? detail::resolve_length(b["x"], L, "start.base.x") : 0.0,
            detail::resolve_length(b.at("y"), L, "start.base.y"),
            b.contains("phi") ? detail::resolve_angle(b["phi"], "start.base.phi") : 0.0};
  if (b.contains("z")) base.z = detail::resolve_length(b["z"], L, "start.base.z");
  if (b.contains("theta")) base.theta = detail::resolve_angle(b["theta"], "start.base.theta");
  const double k = j.contains("k") ? detail::plain_number(j["k"], "start.k") : 0.0;
  const double Lt = j.contains("Ltilde") ? detail::resolve_length(j["Ltilde"], L, "start.Ltilde") : L;
  const double s0 = j.contains("s0") ? detail::resolve_length(j["s0"], L, "start.s0") : 0.0;
  try {
    return {base, ElasticaParams{k, s0, Lt}};
  } catch (const std::exception& e) {
    throw FormatError(std::string("start: ") + e.what());
  }
}

}  // namespace dloplace
