#include "qcl/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "qcl/montecarlo.hpp"
#include "qcl/random.hpp"
#include "qcl/ulam.hpp"

namespace qcl::cli {
namespace {

using nlohmann::json;

std::string describe(const std::string& field, int line, const std::string& message) {
  std::string out = field.empty() ? message : field + ": " + message;
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  return out;
}

int line_of(const YAML::Node& node) {
  if (!node.IsDefined()) return 0;
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

struct Field {
  YAML::Node node;
  std::string path;
  int line = 0;

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path, line, message); }

  Field child(const std::string& key) const {
    Field f{node[key], path.empty() ? key : path + "." + key, 0};
    f.line = line_of(f.node);
    if (f.line == 0) f.line = line;
    return f;
  }
  Field item(std::size_t i) const {
    Field f{node[i], path + "[" + std::to_string(i) + "]", 0};
    f.line = line_of(f.node);
    if (f.line == 0) f.line = line;
    return f;
  }

  template <class T>
  T as(const char* expected) const {
    if (!node.IsScalar()) fail(std::string("expected ") + expected);
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(std::string("expected ") + expected + ", got '" + node.Scalar() + "'");
    }
  }
  double real() const {
    const double v = as<double>("a number");
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  long long integer() const { return as<long long>("an integer"); }
  std::size_t sequence_size(const char* expected) const {
    if (!node.IsSequence()) fail(std::string("expected ") + expected);
    return node.size();
  }
};

// A mapping section whose keys are checked against the ones actually read.
class Section {
 public:
  explicit Section(Field field) : field_(std::move(field)) {
    if (field_.node && !field_.node.IsNull() && !field_.node.IsMap()) field_.fail("expected a mapping");
  }
  std::optional<Field> get(const std::string& key) {
    known_.insert(key);
    if (!field_.node || !field_.node.IsMap()) return std::nullopt;
    Field f = field_.child(key);
    if (!f.node || f.node.IsNull()) return std::nullopt;
    return f;
  }
  Field require(const std::string& key) {
    auto f = get(key);
    if (!f) throw ConfigError(field_.path.empty() ? key : field_.path + "." + key, field_.line,
                              "required field is missing");
    return *f;
  }
  void finish() const {
    if (!field_.node || !field_.node.IsMap()) return;
    for (const auto& kv : field_.node) {
      const std::string key = kv.first.as<std::string>();
      if (!known_.count(key))
        throw ConfigError(field_.path.empty() ? key : field_.path + "." + key, line_of(kv.first),
                          "unknown key");
    }
  }
  const Field& field() const { return field_; }

 private:
  Field field_;
  std::set<std::string> known_;
};

template <class T, class Fn>
void read_opt(Section& s, const std::string& key, T& target, Fn&& convert) {
  if (auto f = s.get(key)) target = convert(*f);
}

int positive_int(const Field& f, long long min = 1) {
  const long long v = f.integer();
  if (v < min) f.fail("must be >= " + std::to_string(min));
  if (v > 1'000'000'000LL) f.fail("too large");
  return static_cast<int>(v);
}

std::size_t count_value(const Field& f, long long min = 1) {
  const long long v = f.integer();
  if (v < min) f.fail("must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double positive_real(const Field& f) {
  const double v = f.real();
  if (!(v > 0.0)) f.fail("must be > 0");
  return v;
}

std::vector<double> real_list(const Field& f, bool allow_empty = false) {
  const std::size_t n = f.sequence_size("a list of numbers");
  if (n == 0 && !allow_empty) f.fail("must be non-empty");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(f.item(i).real());
  return out;
}

std::vector<int> int_list(const Field& f, long long min) {
  const std::size_t n = f.sequence_size("a list of integers");
  if (n == 0) f.fail("must be non-empty");
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(positive_int(f.item(i), min));
  return out;
}

std::array<int, 2> int_pair(const Field& f) {
  if (f.sequence_size("a pair of integers") != 2) f.fail("expected a pair of integers");
  std::array<int, 2> out{};
  for (std::size_t i = 0; i < 2; ++i) {
    const long long v = f.item(i).integer();
    if (std::abs(v) > 1000) f.item(i).fail("frequency out of range");
    out[i] = static_cast<int>(v);
  }
  return out;
}

Vec2 real_pair(const Field& f) {
  if (f.sequence_size("a pair of numbers") != 2) f.fail("expected a pair of numbers");
  return {f.item(0).real(), f.item(1).real()};
}

Matrix2i matrix(const Field& f) {
  if (f.sequence_size("a 2x2 integer matrix") != 2) f.fail("expected a 2x2 integer matrix");
  std::array<std::array<std::int64_t, 2>, 2> a{};
  for (std::size_t r = 0; r < 2; ++r) {
    const Field row = f.item(r);
    if (row.sequence_size("a matrix row of 2 integers") != 2) row.fail("expected a matrix row of 2 integers");
    for (std::size_t c = 0; c < 2; ++c) a[r][c] = row.item(c).integer();
  }
  Matrix2i m{a[0][0], a[0][1], a[1][0], a[1][1]};
  if (m.det() != 1 && m.det() != -1) f.fail("determinant must be +-1");
  if (!m.is_hyperbolic()) f.fail("matrix is not hyperbolic (|trace| must exceed 2 for det 1)");
  return m;
}

TrigPolynomial trig_polynomial(const Field& f) {
  Section s(f);
  std::vector<TrigTerm> terms;
  if (auto list = s.get("terms")) {
    const std::size_t n = list->sequence_size("a list of terms");
    for (std::size_t i = 0; i < n; ++i) {
      Section t(list->item(i));
      TrigTerm term;
      term.frequency = int_pair(t.require("frequency"));
      read_opt(t, "cos", term.cos_coeff, [](const Field& x) { return x.real(); });
      read_opt(t, "sin", term.sin_coeff, [](const Field& x) { return x.real(); });
      t.finish();
      terms.push_back(term);
    }
  }
  s.finish();
  return TrigPolynomial(std::move(terms));
}

MapSpec map_spec(const Field& f) {
  Section s(f);
  MapSpec spec;
  const Field kind = s.require("kind");
  const std::string name = kind.as<std::string>("a map kind");
  if (name == "anosov") {
    spec.kind = MapKind::anosov_perturbed_cat;
    spec.base = matrix(s.require("base"));
    if (auto shears = s.get("shears")) {
      const std::size_t n = shears->sequence_size("a list of shear terms");
      for (std::size_t i = 0; i < n; ++i) {
        Section t(shears->item(i));
        ShearTerm term;
        term.frequency = int_pair(t.require("frequency"));
        term.amplitude = t.require("amplitude").real();
        term.direction = real_pair(t.require("direction"));
        t.finish();
        spec.shears.push_back(term);
      }
    }
  } else if (name == "piecewise") {
    spec.kind = MapKind::piecewise_toral;
    const Field pieces = s.require("pieces");
    const std::size_t n = pieces.sequence_size("a list of pieces");
    if (n == 0) pieces.fail("must be non-empty");
    for (std::size_t i = 0; i < n; ++i) {
      Section p(pieces.item(i));
      AffinePiece piece;
      const Field vertices = p.require("vertices");
      const std::size_t nv = vertices.sequence_size("a list of vertices");
      if (nv < 3) vertices.fail("a polygon needs at least 3 vertices");
      for (std::size_t v = 0; v < nv; ++v) piece.vertices.push_back(real_pair(vertices.item(v)));
      piece.matrix = matrix(p.require("matrix"));
      if (auto offset = p.get("offset")) piece.offset = real_pair(*offset);
      p.finish();
      spec.pieces.push_back(std::move(piece));
    }
  } else {
    kind.fail("unknown map kind '" + name + "' (expected anosov or piecewise)");
  }
  s.finish();
  return spec;
}

json trig_json(const TrigPolynomial& p) {
  json terms = json::array();
  for (const auto& t : p.terms())
    terms.push_back({{"frequency", {t.frequency[0], t.frequency[1]}}, {"cos", t.cos_coeff}, {"sin", t.sin_coeff}});
  return {{"terms", terms}};
}

json matrix_json(const Matrix2i& m) { return {{m.a11, m.a12}, {m.a21, m.a22}}; }

json canonical_json(const ExperimentConfig& c) {
  json maps = json::array();
  for (const auto& m : c.maps) {
    if (m.kind == MapKind::anosov_perturbed_cat) {
      json shears = json::array();
      for (const auto& s : m.shears)
        shears.push_back({{"frequency", {s.frequency[0], s.frequency[1]}},
                          {"amplitude", s.amplitude},
                          {"direction", {s.direction[0], s.direction[1]}}});
      maps.push_back({{"kind", "anosov"}, {"base", matrix_json(m.base)}, {"shears", shears}});
    } else {
      json pieces = json::array();
      for (const auto& p : m.pieces) {
        json vertices = json::array();
        for (const auto& v : p.vertices) vertices.push_back({v[0], v[1]});
        pieces.push_back({{"vertices", vertices},
                          {"matrix", matrix_json(p.matrix)},
                          {"offset", {p.offset[0], p.offset[1]}}});
      }
      maps.push_back({{"kind", "piecewise"}, {"pieces", pieces}});
    }
  }
  json per_symbol = json::array();
  for (const auto& p : c.observable) per_symbol.push_back(trig_json(p));
  json observable = {{"per_symbol", per_symbol},
                     {"centering", c.centering == Centering::equivariant ? "equivariant" : "none"}};
  if (c.coboundary) observable["coboundary"] = trig_json(*c.coboundary);
  return {
      {"seed", c.seed},
      {"maps", {{"delta", c.delta}, {"family", maps}}},
      {"driving", {{"distribution", c.distribution}}},
      {"observable", observable},
      {"operator", {{"k", c.k}, {"samples_per_cell", c.samples_per_cell}, {"n_pullback", c.n_pullback}}},
      {"density", {{"decay_n_max", c.decay_n_max}, {"ly_k_coarse", c.ly_k_coarse}, {"ly_n_grid", c.ly_n_grid}}},
      {"spectrum", {{"steps", c.lyapunov_steps}, {"r", c.lyapunov_r}, {"reorth_period", c.lyapunov_reorth}}},
      {"theta",
       {{"max", c.theta_max}, {"points", c.theta_points}, {"fd_step", c.fd_step},
        {"n_fibers", c.n_fibers}, {"batches", c.fiber_batches}}},
      {"rate", {{"eps_sigma", c.eps_sigma}, {"quadratic_regime", c.quadratic_regime}}},
      {"lambda",
       {{"mc_n", c.lambda_mc_n}, {"mc_samples", c.lambda_mc_samples}, {"agreement_thetas", c.agreement_thetas}}},
      {"aperiodicity", {{"t", c.t_grid}, {"n", c.aperiodicity_n}, {"periodic_symbol", c.periodic_symbol}}},
      {"variance", {{"n_max", c.series_n_max}, {"samples", c.series_samples}, {"steps", c.series_steps}}},
      {"montecarlo", {{"burn_in", c.burn_in}, {"batches", c.batches}}},
      {"clt", {{"n", c.clt_n}, {"samples", c.clt_samples}, {"omega_seeds", c.clt_seeds}}},
      {"ldp",
       {{"eps_sigma", c.ldp_eps_sigma}, {"n", c.ldp_n}, {"samples", c.ldp_samples}, {"min_count", c.ldp_min_count}}},
      {"lclt",
       {{"n", c.lclt_n}, {"samples", c.lclt_samples}, {"j_sigma", c.lclt_j_sigma}, {"s_sigma", c.lclt_s_sigma}}},
      {"thresholds",
       {{"degenerate_variance", c.degenerate_variance}, {"agreement", c.agreement}, {"clt_ks", c.clt_ks},
        {"ldp_relative", c.ldp_relative}, {"lclt_relative", c.lclt_relative}, {"equivariance", c.equivariance},
        {"spectral_gap", c.spectral_gap}, {"lyapunov_top", c.lyapunov_top}}},
      {"output", {{"dir", c.out_dir}}},
  };
}

// Splits "a.b[2].c" into ("a"), ("b", 2), ("c").
struct PathPart {
  std::string key;
  std::optional<std::size_t> index;
};

std::vector<PathPart> split_path(const std::string& path) {
  std::vector<PathPart> parts;
  std::stringstream ss(path);
  std::string token;
  while (std::getline(ss, token, '.')) {
    if (token.empty()) throw ConfigError(path, 0, "malformed override path");
    std::string key = token;
    std::vector<std::size_t> indices;
    const auto bracket = token.find('[');
    if (bracket != std::string::npos) {
      key = token.substr(0, bracket);
      std::string rest = token.substr(bracket);
      while (!rest.empty()) {
        const auto close = rest.find(']');
        if (rest[0] != '[' || close == std::string::npos) throw ConfigError(path, 0, "malformed index");
        try {
          indices.push_back(std::stoul(rest.substr(1, close - 1)));
        } catch (const std::exception&) {
          throw ConfigError(path, 0, "malformed index");
        }
        rest = rest.substr(close + 1);
      }
    }
    if (key.empty()) throw ConfigError(path, 0, "malformed override path");
    parts.push_back({key, std::nullopt});
    for (std::size_t i : indices) parts.push_back({"", i});
  }
  if (parts.empty()) throw ConfigError(path, 0, "empty override path");
  return parts;
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, 0, "override must be key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError(path, 0, std::string("override value is not valid YAML: ") + e.what());
  }
  const auto parts = split_path(path);
  YAML::Node cur = root;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const bool last = p + 1 == parts.size();
    if (parts[p].index) {
      if (!cur.IsSequence() || *parts[p].index >= cur.size())
        throw ConfigError(path, 0, "index out of range in override");
      if (last) {
        cur[*parts[p].index] = value;
        return;
      }
      YAML::Node next = cur[*parts[p].index];
      cur.reset(next);
    } else {
      if (!cur.IsMap() && !cur.IsNull()) throw ConfigError(path, 0, "override path crosses a non-mapping");
      if (last) {
        cur[parts[p].key] = value;
        return;
      }
      if (!std::as_const(cur)[parts[p].key]) cur[parts[p].key] = YAML::Node(YAML::NodeType::Map);
      YAML::Node next = cur[parts[p].key];
      cur.reset(next);
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::string field, int line, const std::string& message)
    : std::runtime_error(describe(field, line, message)), field_(std::move(field)), line_(line) {}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.mark.line + 1, std::string("parse error: ") + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("", line_of(root), "top level must be a mapping");
  for (const auto& o : overrides) apply_override(root, o);

  ExperimentConfig c;
  Section top(Field{root, "", line_of(root)});

  read_opt(top, "seed", c.seed, [](const Field& f) {
    const long long v = f.integer();
    if (v < 0) f.fail("must be >= 0");
    return static_cast<std::uint64_t>(v);
  });

  {
    Section s(top.require("maps"));
    read_opt(s, "delta", c.delta, positive_real);
    const Field family = s.require("family");
    const std::size_t n = family.sequence_size("a list of maps");
    if (n == 0) family.fail("must contain at least one map");
    if (n > 255) family.fail("at most 255 maps");
    for (std::size_t i = 0; i < n; ++i) c.maps.push_back(map_spec(family.item(i)));
    s.finish();
    // Construct once so family-level invariants surface as field errors.
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const auto& m = c.maps[i];
        if (m.kind == MapKind::anosov_perturbed_cat) (void)HyperbolicMap::anosov(m.base, m.shears, c.delta);
        else (void)HyperbolicMap::piecewise(m.pieces);
      } catch (const std::invalid_argument& e) {
        family.item(i).fail(e.what());
      }
    }
  }

  {
    Section s(top.require("driving"));
    const Field dist = s.require("distribution");
    c.distribution = real_list(dist);
    double total = 0.0;
    for (std::size_t i = 0; i < c.distribution.size(); ++i) {
      if (!(c.distribution[i] > 0.0)) dist.item(i).fail("probabilities must be > 0");
      total += c.distribution[i];
    }
    if (std::abs(total - 1.0) > 1e-9) dist.fail("probabilities must sum to 1 (sum is " + std::to_string(total) + ")");
    if (c.distribution.size() != c.maps.size())
      dist.fail("expected " + std::to_string(c.maps.size()) + " probabilities, one per map");
    s.finish();
  }

  {
    Section s(top.require("observable"));
    const Field per_symbol = s.require("per_symbol");
    const std::size_t n = per_symbol.sequence_size("a list with one entry per map");
    if (n != c.maps.size())
      per_symbol.fail("expected " + std::to_string(c.maps.size()) + " entries, one per map");
    for (std::size_t i = 0; i < n; ++i) c.observable.push_back(trig_polynomial(per_symbol.item(i)));
    if (auto cob = s.get("coboundary")) c.coboundary = trig_polynomial(*cob);
    if (auto centering = s.get("centering")) {
      const auto v = centering->as<std::string>("equivariant or none");
      if (v == "equivariant") c.centering = Centering::equivariant;
      else if (v == "none") c.centering = Centering::none;
      else centering->fail("expected equivariant or none");
    }
    bool empty = !c.coboundary || c.coboundary->empty();
    for (const auto& p : c.observable) empty = empty && p.empty();
    if (empty) s.field().fail("observable is empty: give at least one term or a coboundary");
    s.finish();
  }

  if (auto f = top.get("operator")) {
    Section s(*f);
    read_opt(s, "k", c.k, [](const Field& x) {
      const int k = positive_int(x, 2);
      if (k > 1024) x.fail("must be <= 1024");
      return k;
    });
    read_opt(s, "samples_per_cell", c.samples_per_cell, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "n_pullback", c.n_pullback, [](const Field& x) { return positive_int(x, 1); });
    s.finish();
  }
  if (auto f = top.get("density")) {
    Section s(*f);
    read_opt(s, "decay_n_max", c.decay_n_max, [](const Field& x) { return positive_int(x, 2); });
    read_opt(s, "ly_k_coarse", c.ly_k_coarse, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "ly_n_grid", c.ly_n_grid, [](const Field& x) { return int_list(x, 0); });
    if (c.k % c.ly_k_coarse != 0 || c.ly_k_coarse >= c.k)
      s.require("ly_k_coarse").fail("must be smaller than and divide operator.k");
    s.finish();
  } else if (c.k % c.ly_k_coarse != 0 || c.ly_k_coarse >= c.k) {
    c.ly_k_coarse = 1;
    while (c.ly_k_coarse * 2 < c.k && c.k % (c.ly_k_coarse * 2) == 0 && c.ly_k_coarse < 16) c.ly_k_coarse *= 2;
  }
  if (auto f = top.get("spectrum")) {
    Section s(*f);
    read_opt(s, "steps", c.lyapunov_steps, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "r", c.lyapunov_r, [](const Field& x) {
      const int r = positive_int(x, 1);
      if (r > 12) x.fail("must be <= 12");
      return r;
    });
    read_opt(s, "reorth_period", c.lyapunov_reorth, [](const Field& x) { return positive_int(x, 1); });
    s.finish();
  }
  if (auto f = top.get("theta")) {
    Section s(*f);
    read_opt(s, "max", c.theta_max, positive_real);
    read_opt(s, "points", c.theta_points, [](const Field& x) {
      const int p = positive_int(x, 3);
      if (p % 2 == 0) x.fail("must be odd so that 0 is a grid point");
      return p;
    });
    read_opt(s, "fd_step", c.fd_step, positive_real);
    read_opt(s, "n_fibers", c.n_fibers, [](const Field& x) { return positive_int(x, 10); });
    read_opt(s, "batches", c.fiber_batches, [](const Field& x) { return count_value(x, 2); });
    if (2.0 * c.fd_step > c.theta_max) s.require("fd_step").fail("2 * fd_step must not exceed theta.max");
    s.finish();
  }
  if (auto f = top.get("rate")) {
    Section s(*f);
    if (auto e = s.get("eps_sigma")) {
      c.eps_sigma = real_list(*e);
      for (std::size_t i = 0; i < c.eps_sigma.size(); ++i)
        if (!(c.eps_sigma[i] > 0.0)) e->item(i).fail("must be > 0");
    }
    read_opt(s, "quadratic_regime", c.quadratic_regime, positive_real);
    s.finish();
  }
  if (auto f = top.get("lambda")) {
    Section s(*f);
    read_opt(s, "mc_n", c.lambda_mc_n, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "mc_samples", c.lambda_mc_samples, [](const Field& x) { return count_value(x, 100); });
    read_opt(s, "agreement_thetas", c.agreement_thetas, [](const Field& x) { return real_list(x, true); });
    s.finish();
  }
  if (auto f = top.get("aperiodicity")) {
    Section s(*f);
    if (auto t = s.get("t")) {
      c.t_grid = real_list(*t);
      for (std::size_t i = 0; i < c.t_grid.size(); ++i)
        if (c.t_grid[i] == 0.0) t->item(i).fail("t = 0 is not allowed");
    }
    read_opt(s, "n", c.aperiodicity_n, [](const Field& x) { return positive_int(x, 20); });
    read_opt(s, "periodic_symbol", c.periodic_symbol, [&](const Field& x) {
      const std::size_t v = count_value(x, 0);
      if (v >= c.maps.size()) x.fail("must name a map of the family");
      return v;
    });
    s.finish();
  }
  if (auto f = top.get("variance")) {
    Section s(*f);
    read_opt(s, "n_max", c.series_n_max, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "samples", c.series_samples, [](const Field& x) { return count_value(x, 100); });
    read_opt(s, "steps", c.series_steps, [](const Field& x) { return positive_int(x, 2); });
    if (c.series_steps <= c.series_n_max) s.require("steps").fail("must exceed variance.n_max");
    s.finish();
  }
  if (auto f = top.get("montecarlo")) {
    Section s(*f);
    read_opt(s, "burn_in", c.burn_in, [](const Field& x) { return positive_int(x, 0); });
    read_opt(s, "batches", c.batches, [](const Field& x) { return count_value(x, 2); });
    s.finish();
  }
  if (auto f = top.get("clt")) {
    Section s(*f);
    read_opt(s, "n", c.clt_n, [](const Field& x) { return int_list(x, 1); });
    read_opt(s, "samples", c.clt_samples, [](const Field& x) { return count_value(x, 100); });
    read_opt(s, "omega_seeds", c.clt_seeds, [](const Field& x) { return positive_int(x, 1); });
    s.finish();
  }
  if (auto f = top.get("ldp")) {
    Section s(*f);
    read_opt(s, "eps_sigma", c.ldp_eps_sigma, [](const Field& x) { return real_list(x); });
    read_opt(s, "n", c.ldp_n, [](const Field& x) { return int_list(x, 1); });
    read_opt(s, "samples", c.ldp_samples, [](const Field& x) { return count_value(x, 100); });
    read_opt(s, "min_count", c.ldp_min_count, [](const Field& x) { return count_value(x, 1); });
    s.finish();
  }
  if (auto f = top.get("lclt")) {
    Section s(*f);
    read_opt(s, "n", c.lclt_n, [](const Field& x) { return positive_int(x, 1); });
    read_opt(s, "samples", c.lclt_samples, [](const Field& x) { return count_value(x, 100); });
    read_opt(s, "j_sigma", c.lclt_j_sigma, positive_real);
    read_opt(s, "s_sigma", c.lclt_s_sigma, [](const Field& x) { return real_list(x); });
    s.finish();
  }
  if (auto f = top.get("thresholds")) {
    Section s(*f);
    read_opt(s, "degenerate_variance", c.degenerate_variance, positive_real);
    read_opt(s, "agreement", c.agreement, positive_real);
    read_opt(s, "clt_ks", c.clt_ks, positive_real);
    read_opt(s, "ldp_relative", c.ldp_relative, positive_real);
    read_opt(s, "lclt_relative", c.lclt_relative, positive_real);
    read_opt(s, "equivariance", c.equivariance, positive_real);
    read_opt(s, "spectral_gap", c.spectral_gap, [](const Field& x) { return x.real(); });
    read_opt(s, "lyapunov_top", c.lyapunov_top, positive_real);
    s.finish();
  }
  if (auto f = top.get("output")) {
    Section s(*f);
    read_opt(s, "dir", c.out_dir, [](const Field& x) { return x.as<std::string>("a directory path"); });
    s.finish();
  }
  top.finish();

  // Batch counts must divide the sample counts they split.
  auto divides = [&](std::size_t samples, const char* field) {
    if (samples % c.batches != 0)
      throw ConfigError(field, 0, "must be a multiple of montecarlo.batches (" + std::to_string(c.batches) + ")");
  };
  divides(c.clt_samples, "clt.samples");
  divides(c.ldp_samples, "ldp.samples");
  divides(c.lclt_samples, "lclt.samples");
  divides(c.lambda_mc_samples, "lambda.mc_samples");
  divides(c.series_samples, "variance.samples");

  c.canonical = canonical_json(c);
  c.hash = content_hash(c.canonical.dump());
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

MapFamily build_maps(const ExperimentConfig& config) {
  MapFamily maps;
  for (const auto& m : config.maps) {
    if (m.kind == MapKind::anosov_perturbed_cat) maps.push_back(HyperbolicMap::anosov(m.base, m.shears, config.delta));
    else maps.push_back(HyperbolicMap::piecewise(m.pieces));
  }
  return maps;
}

Observable build_observable(const ExperimentConfig& config, const MapFamily& maps) {
  Observable g(config.observable, config.coboundary);
  if (config.centering == Centering::none) return g;
  const UlamSampling sampling{derive_seed(config.seed, "ulam"), config.samples_per_cell};
  return g.with_offsets(equivariant_centering(maps, g, config.distribution, UlamGrid(config.k), sampling));
}

}  // namespace qcl::cli
