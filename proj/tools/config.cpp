#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qet::cli {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(std::string_view s, std::string_view seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string_view::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Entry {
  std::string value;
  int line;
};

// section -> key -> entries (repeated keys kept in order)
using Table = std::map<std::string, std::map<std::string, std::vector<Entry>>>;

class Reader {
 public:
  Reader(const Table& table, std::string source) : table_(table), source_(std::move(source)) {}

  bool has_section(const std::string& s) const { return table_.count(s) > 0; }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = table_.find(section);
    if (s == table_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    if (k->second.size() > 1) fail(k->second[1].line, "duplicate key '" + key + "'");
    return &k->second.front();
  }

  std::vector<Entry> all(const std::string& section, const std::string& key) const {
    const auto s = table_.find(section);
    if (s == table_.end()) return {};
    const auto k = s->second.find(key);
    return k == s->second.end() ? std::vector<Entry>{} : k->second;
  }

  const Entry& require(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) {
      const auto s = table_.find(section);
      fail(s == table_.end() ? 0 : first_line(s->second), "missing required key '" + key + "' in [" + section + "]");
    }
    return *e;
  }

  double number(const Entry& e) const {
    double v = 0.0;
    const std::string s = trim(e.value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) fail(e.line, "expected a number, got '" + s + "'");
    return v;
  }

  long long integer(const Entry& e) const {
    long long v = 0;
    const std::string s = trim(e.value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(e.line, "expected an integer, got '" + s + "'");
    return v;
  }

  [[noreturn]] void fail(int line, const std::string& message) const { throw ConfigError(source_, line, message); }

  void reject_unknown(const std::map<std::string, std::set<std::string>>& known) const {
    for (const auto& [section, keys] : table_) {
      const auto k = known.find(section);
      if (k == known.end()) fail(first_line(keys), "unknown section [" + section + "]");
      for (const auto& [key, entries] : keys) {
        if (!k->second.count(key)) fail(entries.front().line, "unknown key '" + key + "' in [" + section + "]");
      }
    }
  }

 private:
  static int first_line(const std::map<std::string, std::vector<Entry>>& keys) {
    int line = 0;
    for (const auto& [key, entries] : keys) {
      for (const auto& e : entries) line = line == 0 ? e.line : std::min(line, e.line);
    }
    return line;
  }

  const Table& table_;
  std::string source_;
};

Table tokenize(std::string_view text, const std::string& source) {
  Table table;
  std::string section = "run";
  table[section];
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(source, line_no, "malformed section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line_no, "empty key");
    if (value.empty()) throw ConfigError(source, line_no, "empty value for '" + key + "'");
    table[section][key].push_back({value, line_no});
  }
  if (table["run"].empty()) table.erase("run");
  return table;
}

Direction direction(const Reader& r, const Entry& e, std::vector<std::string>& warnings, const std::string& what) {
  const auto parts = split(e.value, " ,\t");
  if (parts.size() != 3) r.fail(e.line, what + " needs three components");
  Direction u{};
  for (int k = 0; k < 3; ++k) u[k] = r.number({parts[k], e.line});
  const double n = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (n < 1e-12) r.fail(e.line, what + " is the zero vector");
  if (std::abs(n - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "line " << e.line << ": " << what << " renormalized (norm was " << n << ")";
    warnings.push_back(os.str());
  }
  for (double& c : u) c /= n;
  return u;
}

// "c F<off> F<off> ..." e.g. "-0.5 X0 X+1"
TermTemplate term_template(const Reader& r, const Entry& e) {
  const auto parts = split(e.value, " \t");
  if (parts.empty()) r.fail(e.line, "empty term");
  TermTemplate t{r.number({parts[0], e.line}), {}};
  std::set<int> seen;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const std::string& f = parts[k];
    if (f.size() < 2) r.fail(e.line, "bad factor '" + f + "', expected like X0 or Z+1");
    Axis a{};
    try {
      a = parse_axis(f[0]);
    } catch (const std::invalid_argument&) {
      r.fail(e.line, "bad Pauli letter in '" + f + "'");
    }
    std::string off = f.substr(1);
    if (off.front() == '+') off.erase(0, 1);
    const int offset = static_cast<int>(r.integer({off, e.line}));
    if (!seen.insert(offset).second) r.fail(e.line, "offset " + std::to_string(offset) + " repeated in one term");
    t.factors.emplace_back(offset, a);
  }
  return t;
}

}  // namespace

std::string_view format_name(OutputFormat f) {
  switch (f) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::both: return "both";
  }
  return "both";
}

OutputFormat parse_format(std::string_view s) {
  if (s == "json") return OutputFormat::json;
  if (s == "csv") return OutputFormat::csv;
  if (s == "both") return OutputFormat::both;
  throw std::invalid_argument("unknown output format '" + std::string(s) + "'");
}

std::string_view sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::distance: return "distance";
    case SweepAxis::angle_grid: return "angle-grid";
    case SweepAxis::coupling_grid: return "coupling-grid";
  }
  return "distance";
}

SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "distance") return SweepAxis::distance;
  if (s == "angle-grid") return SweepAxis::angle_grid;
  if (s == "coupling-grid") return SweepAxis::coupling_grid;
  throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "'");
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  const Table table = tokenize(text, source);
  const Reader r(table, source);
  r.reject_unknown({
      {"run", {"seed"}},
      {"model", {"kind", "n", "b", "h", "boundary"}},
      {"custom", {"range", "term"}},
      {"protocol", {"alice_site", "alice_direction", "bob_site", "bob_direction", "shots"}},
      {"solver", {"method", "tol", "max_iter"}},
      {"output", {"dir", "format"}},
      {"sweep", {"axis", "distances", "couplings", "angle_points", "plane"}},
  });

  RunConfig c;
  c.source = source;
  if (const Entry* e = r.find("run", "seed")) {
    const long long s = r.integer(*e);
    if (s < 0) r.fail(e->line, "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }

  if (!r.has_section("model")) r.fail(0, "missing [model] section");
  ModelConfig& m = c.model;
  if (const Entry* e = r.find("model", "kind")) {
    m.kind = lower(e->value);
    if (m.kind != "ising" && m.kind != "custom") r.fail(e->line, "model kind must be ising or custom");
  }
  {
    const Entry& e = r.require("model", "n");
    const long long n = r.integer(e);
    if (n < 3 || n > kMaxStateSites) r.fail(e.line, "N must lie in [3, " + std::to_string(kMaxStateSites) + "]");
    m.site_count = static_cast<int>(n);
  }
  if (const Entry* e = r.find("model", "boundary")) {
    try {
      m.boundary = parse_boundary(lower(e->value));
    } catch (const std::invalid_argument&) {
      r.fail(e->line, "boundary must be open or periodic");
    }
  }
  if (m.kind == "ising") {
    if (r.has_section("custom")) r.fail(0, "[custom] given for an ising model");
    if (const Entry* e = r.find("model", "b")) m.field = r.number(*e);
    if (const Entry* e = r.find("model", "h")) m.coupling = r.number(*e);
  } else {
    for (const char* key : {"b", "h"}) {
      if (const Entry* e = r.find("model", key)) r.fail(e->line, std::string("'") + key + "' applies to ising models only");
    }
    if (const Entry* re = r.find("custom", "range")) {
      const long long range = r.integer(*re);
      if (range < 1 || 2 * range + 1 > m.site_count) r.fail(re->line, "range must satisfy 1 <= L and 2L+1 <= N");
      m.range = static_cast<int>(range);
    }
    for (const Entry& e : r.all("custom", "term")) {
      TermTemplate t = term_template(r, e);
      for (const auto& [off, a] : t.factors) {
        if (std::abs(off) > m.range) r.fail(e.line, "offset " + std::to_string(off) + " exceeds range");
      }
      m.terms.push_back(std::move(t));
    }
    if (m.terms.empty()) r.fail(0, "[custom] needs at least one 'term'");
  }

  auto site_index = [&](const Entry& e) {
    const long long s = r.integer(e);
    if (s < 0 || s >= m.site_count) r.fail(e.line, "site index " + std::to_string(s) + " outside [0, N)");
    return static_cast<int>(s);
  };

  if (r.has_section("protocol")) {
    ProtocolConfig p;
    p.alice_site = site_index(r.require("protocol", "alice_site"));
    // A distance sweep places Bob itself, so bob_site may be left out there.
    if (const Entry* e = r.find("protocol", "bob_site")) p.bob_site = site_index(*e);
    else p.bob_site = -1;
    if (const Entry* e = r.find("protocol", "alice_direction")) p.alice_direction = direction(r, *e, c.warnings, "alice_direction");
    if (const Entry* e = r.find("protocol", "bob_direction")) p.bob_direction = direction(r, *e, c.warnings, "bob_direction");
    if (const Entry* e = r.find("protocol", "shots")) {
      const long long shots = r.integer(*e);
      if (shots < 0 || shots > 1000000) r.fail(e->line, "shots must lie in [0, 1000000]");
      p.shots = static_cast<int>(shots);
    }
    c.protocol = p;
  }

  if (const Entry* e = r.find("solver", "method")) {
    const std::string v = lower(e->value);
    if (v == "dense") c.solver.method = SolverMethod::dense;
    else if (v == "krylov") c.solver.method = SolverMethod::krylov;
    else r.fail(e->line, "solver method must be dense or krylov");
  }
  if (const Entry* e = r.find("solver", "tol")) {
    c.solver.tol = r.number(*e);
    if (c.solver.tol <= 0) r.fail(e->line, "tol must be positive");
  }
  if (const Entry* e = r.find("solver", "max_iter")) {
    const long long v = r.integer(*e);
    if (v < 2 || v > 100000) r.fail(e->line, "max_iter must lie in [2, 100000]");
    c.solver.max_iter = static_cast<int>(v);
  }
  if (c.solver.method == SolverMethod::dense && m.site_count > 12) {
    const Entry* e = r.find("solver", "method");
    r.fail(e ? e->line : 0, "dense solver supports N <= 12; use method = krylov");
  }

  if (const Entry* e = r.find("output", "dir")) c.output.dir = e->value;
  if (const Entry* e = r.find("output", "format")) {
    try {
      c.output.format = parse_format(lower(e->value));
    } catch (const std::invalid_argument&) {
      r.fail(e->line, "format must be json, csv or both");
    }
  }

  if (r.has_section("sweep")) {
    SweepConfig s;
    const Entry& ae = r.require("sweep", "axis");
    try {
      s.axis = parse_sweep_axis(lower(ae.value));
    } catch (const std::invalid_argument&) {
      r.fail(ae.line, "sweep axis must be distance, angle-grid or coupling-grid");
    }
    if (const Entry* e = r.find("sweep", "distances")) {
      // "3..7" or "3, 4, 6"
      if (const auto dots = e->value.find(".."); dots != std::string::npos) {
        const long long lo = r.integer({e->value.substr(0, dots), e->line});
        const long long hi = r.integer({e->value.substr(dots + 2), e->line});
        for (long long d = lo; d <= hi; ++d) s.distances.push_back(static_cast<int>(d));
      } else {
        for (const auto& part : split(e->value, " ,\t")) s.distances.push_back(static_cast<int>(r.integer({part, e->line})));
      }
      for (int d : s.distances) {
        if (d < 1 || d >= m.site_count) r.fail(e->line, "distance " + std::to_string(d) + " outside [1, N)");
      }
    }
    if (const Entry* e = r.find("sweep", "couplings")) {
      for (const auto& part : split(e->value, " ,\t")) s.couplings.push_back(r.number({part, e->line}));
    }
    if (const Entry* e = r.find("sweep", "angle_points")) {
      const long long v = r.integer(*e);
      if (v < 0 || v > 100000) r.fail(e->line, "angle_points must lie in [0, 100000]");
      s.angle_points = static_cast<int>(v);
    }
    if (const Entry* e = r.find("sweep", "plane")) {
      const auto parts = split(e->value, ";");
      if (parts.size() != 2) r.fail(e->line, "plane needs two directions separated by ';'");
      s.plane_first = direction(r, {parts[0], e->line}, c.warnings, "plane first direction");
      s.plane_second = direction(r, {parts[1], e->line}, c.warnings, "plane second direction");
      const double dot = s.plane_first[0] * s.plane_second[0] + s.plane_first[1] * s.plane_second[1] +
                         s.plane_first[2] * s.plane_second[2];
      if (std::abs(dot) > 1e-9) r.fail(e->line, "plane directions must be orthogonal");
    }
    const bool empty = (s.axis == SweepAxis::distance && s.distances.empty()) ||
                       (s.axis == SweepAxis::coupling_grid && s.couplings.empty()) ||
                       (s.axis == SweepAxis::angle_grid && s.angle_points == 0);
    if (empty) r.fail(ae.line, "sweep grid for axis '" + std::string(sweep_axis_name(s.axis)) + "' is empty");
    if (s.axis == SweepAxis::coupling_grid && m.kind != "ising") r.fail(ae.line, "coupling-grid needs an ising model");
    c.sweep = s;
  }
  if (c.protocol && c.protocol->bob_site < 0 && !(c.sweep && c.sweep->axis == SweepAxis::distance)) {
    r.require("protocol", "bob_site");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

ChainModel build_model(const ModelConfig& m) {
  if (m.kind == "ising") return build_ising(m.site_count, m.field, m.coupling, m.boundary);
  const int n = m.site_count;
  const bool periodic = m.boundary == Boundary::periodic;
  return build_custom(n, m.range, m.boundary, [&](int site) {
    std::vector<PauliTerm> out;
    for (const auto& t : m.terms) {
      std::map<int, Axis> factors;
      bool inside = true;
      for (const auto& [off, a] : t.factors) {
        int s = site + off;
        if (periodic) s = ((s % n) + n) % n;
        else if (s < 0 || s >= n) inside = false;
        factors.emplace(s, a);
      }
      if (inside) out.emplace_back(t.coefficient, factors);
    }
    return out;
  });
}

SolverSettings solver_settings(const SolverConfig& s) {
  SolverSettings out;
  out.method = s.method;
  out.krylov.tol = s.tol;
  out.krylov.max_iter = s.max_iter;
  return out;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  using nlohmann::ordered_json;
  ordered_json model{{"kind", c.model.kind}, {"N", c.model.site_count}, {"boundary", boundary_name(c.model.boundary)}};
  if (c.model.kind == "ising") {
    model["b"] = c.model.field;
    model["h"] = c.model.coupling;
  } else {
    model["range"] = c.model.range;
    ordered_json terms = ordered_json::array();
    for (const auto& t : c.model.terms) {
      ordered_json f = ordered_json::array();
      for (const auto& [off, a] : t.factors) f.push_back({{"offset", off}, {"axis", std::string(1, axis_name(a))}});
      terms.push_back({{"coefficient", t.coefficient}, {"factors", f}});
    }
    model["terms"] = terms;
  }
  ordered_json out{{"model", model}};
  if (c.protocol) {
    out["protocol"] = {{"alice_site", c.protocol->alice_site},
                       {"alice_direction", c.protocol->alice_direction},
                       {"bob_site", c.protocol->bob_site >= 0 ? ordered_json(c.protocol->bob_site) : ordered_json()},
                       {"bob_direction", c.protocol->bob_direction},
                       {"shots", c.protocol->shots}};
  }
  out["solver"] = {{"method", c.solver.method == SolverMethod::dense ? "dense" : "krylov"},
                   {"tol", c.solver.tol},
                   {"max_iter", c.solver.max_iter}};
  out["output"] = {{"format", format_name(c.output.format)}};
  if (c.sweep) {
    ordered_json s{{"axis", sweep_axis_name(c.sweep->axis)}};
    if (!c.sweep->distances.empty()) s["distances"] = c.sweep->distances;
    if (!c.sweep->couplings.empty()) s["couplings"] = c.sweep->couplings;
    if (c.sweep->angle_points > 0) {
      s["angle_points"] = c.sweep->angle_points;
      s["plane"] = {c.sweep->plane_first, c.sweep->plane_second};
    }
    out["sweep"] = s;
  }
  out["seed"] = c.seed;
  return out;
}

}  // namespace qet::cli
