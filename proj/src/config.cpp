#include "fibrod/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fibrod {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_' && c != '.' && c != '-')
      return false;
  return true;
}

}  // namespace

void ConfigFile::fail(const std::string& what, int line) const {
  throw ConfigError(what, name_, line);
}

ConfigFile ConfigFile::parse(std::istream& is, std::string name) {
  ConfigFile cf;
  cf.name_ = std::move(name);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::string body = trim(line);
    if (body.empty() || body[0] == ';') continue;

    if (body.front() == '[') {
      if (body.back() != ']')
        cf.fail("malformed section header '" + body + "'", lineno);
      section = trim(body.substr(1, body.size() - 2));
      if (!valid_name(section))
        cf.fail("malformed section name '" + section + "'", lineno);
      if (cf.sections_.count(section))
        cf.fail("duplicate section [" + section + "]", lineno);
      cf.sections_[section];
      cf.section_lines_[section] = lineno;
      cf.section_order_.push_back(section);
      cf.lines_.push_back("[" + section + "]");
      continue;
    }

    auto eq = body.find('=');
    if (eq == std::string::npos)
      cf.fail("expected 'key = value', got '" + body + "'", lineno);
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (!valid_name(key)) cf.fail("malformed key '" + key + "'", lineno);
    if (section.empty())
      cf.fail("key '" + key + "' appears before any [section]", lineno);
    if (value.empty()) cf.fail("key '" + key + "' has no value", lineno);
    auto [it, fresh] =
        cf.sections_[section].emplace(key, Entry{value, lineno, false});
    if (!fresh)
      cf.fail("duplicate key '" + key + "' in [" + section + "]", lineno);
    cf.lines_.push_back(key + " = " + value);
  }
  return cf;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file", path, 0);
  return parse(is, path);
}

bool ConfigFile::has_section(const std::string& section) const {
  return sections_.count(section) != 0;
}

ConfigFile::Entry* ConfigFile::find(const std::string& section,
                                    const std::string& key) {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  k->second.consumed = true;
  return &k->second;
}

std::optional<std::string> ConfigFile::get_string(const std::string& section,
                                                  const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  return e->value;
}

std::optional<double> ConfigFile::get_double(const std::string& section,
                                             const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  double v = 0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    fail("key '" + key + "' expects a number, got '" + e->value + "'", e->line);
  return v;
}

std::optional<int> ConfigFile::get_int(const std::string& section,
                                       const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  int v = 0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    fail("key '" + key + "' expects an integer, got '" + e->value + "'",
         e->line);
  return v;
}

std::optional<bool> ConfigFile::get_bool(const std::string& section,
                                         const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  if (e->value == "true") return true;
  if (e->value == "false") return false;
  fail("key '" + key + "' expects true or false, got '" + e->value + "'",
       e->line);
}

std::optional<std::vector<double>> ConfigFile::get_double_list(
    const std::string& section, const std::string& key) {
  Entry* e = find(section, key);
  if (!e) return std::nullopt;
  std::vector<double> out;
  std::stringstream ss(e->value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() ||
        res.ptr != item.data() + item.size())
      fail("key '" + key + "' expects comma-separated numbers, got '" +
               e->value + "'",
           e->line);
    out.push_back(v);
  }
  if (out.empty())
    fail("key '" + key + "' expects at least one number", e->line);
  return out;
}

void ConfigFile::require_all_consumed() const {
  for (const auto& name : section_order_) {
    bool known = false;
    for (const char* s :
         {"problem", "geometry", "material", "material.fiber",
          "material.matrix", "load", "discretization", "solver", "output"})
      known |= name == s;
    if (!known)
      fail("unknown section [" + name + "]", section_lines_.at(name));
    for (const auto& [key, entry] : sections_.at(name))
      if (!entry.consumed)
        fail("unknown key '" + key + "' in [" + name + "]", entry.line);
  }
}

namespace {

MaterialSpec read_material(ConfigFile& file, const std::string& section,
                           const MaterialSpec& base, bool present) {
  MaterialSpec m = base;
  if (!present) return m;
  int line = 0;  // best effort location for cross-key errors
  auto kind = file.get_string(section, "kind");
  std::string kind_text = kind.value_or("isotropic");
  if (kind_text == "isotropic" || kind_text == "expression") {
    m.kind = kind_text == "isotropic" ? MaterialSpec::Kind::Isotropic
                                      : MaterialSpec::Kind::Expression;
    m.lambda = file.get_double(section, "lambda").value_or(m.lambda);
    m.mu = file.get_double(section, "mu").value_or(m.mu);
    if (m.kind == MaterialSpec::Kind::Expression)
      m.factor = file.get_string(section, "factor").value_or("1");
  } else if (kind_text == "orthotropic") {
    m.kind = MaterialSpec::Kind::Orthotropic;
    auto need = [&](const char* key) {
      auto v = file.get_double(section, key);
      if (!v)
        throw ConfigError(std::string("orthotropic material needs key '") +
                              key + "' in [" + section + "]",
                          file.name(), line);
      return *v;
    };
    m.ortho = {need("E1"),   need("E2"),   need("E3"),
               need("nu12"), need("nu13"), need("nu23"),
               need("G23"),  need("G13"),  need("G12")};
  } else if (kind_text == "mandel66") {
    m.kind = MaterialSpec::Kind::Mandel66;
    auto values = file.get_double_list(section, "values");
    if (!values || values->size() != 36)
      throw ConfigError("mandel66 material needs key 'values' with 36 "
                        "row-major entries in [" + section + "]",
                        file.name(), line);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) m.mandel(i, j) = (*values)[6 * i + j];
    double scale = std::max(1.0, m.mandel.cwiseAbs().maxCoeff());
    if ((m.mandel - m.mandel.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * scale)
      throw ConfigError("mandel66 material matrix is not symmetric in [" +
                            section + "]",
                        file.name(), line);
  } else {
    throw ConfigError("unknown material kind '" + kind_text + "' in [" +
                          section + "]",
                      file.name(), line);
  }
  return m;
}

Mandel6 spec_base_tensor(const MaterialSpec& m) {
  switch (m.kind) {
    case MaterialSpec::Kind::Isotropic:
    case MaterialSpec::Kind::Expression:
      return make_isotropic(m.lambda, m.mu);
    case MaterialSpec::Kind::Orthotropic: return make_orthotropic(m.ortho);
    case MaterialSpec::Kind::Mandel66: return m.mandel;
  }
  return Mandel6::Zero();
}

}  // namespace

RunConfig read_run_config(ConfigFile& file) {
  RunConfig cfg;
  cfg.config_echo = file.canonical_lines();

  if (auto fam = file.get_string("problem", "family")) {
    if (*fam == "rod")
      cfg.family = RunConfig::Family::Rod;
    else if (*fam == "hom")
      cfg.family = RunConfig::Family::Hom;
    else
      throw ConfigError("family must be rod or hom, got '" + *fam + "'",
                        file.name(), 0);
  }

  if (auto outer = file.get_string("geometry", "outer")) {
    if (*outer == "disk")
      cfg.section.outer = SectionGeometry::Outer::Disk;
    else if (*outer == "square")
      cfg.section.outer = SectionGeometry::Outer::Square;
    else
      throw ConfigError("outer must be disk or square, got '" + *outer + "'",
                        file.name(), 0);
  }
  cfg.section.outer_size =
      file.get_double("geometry", "outer_size").value_or(cfg.section.outer_size);
  cfg.section.fiber_radius = file.get_double("geometry", "fiber_radius")
                                 .value_or(cfg.section.fiber_radius);
  cfg.length = file.get_double("geometry", "length").value_or(cfg.length);
  cfg.half_width =
      file.get_double("geometry", "half_width").value_or(cfg.half_width);
  cfg.cell_fiber_radius = file.get_double("geometry", "cell_fiber_radius")
                              .value_or(cfg.cell_fiber_radius);

  MaterialSpec shared = read_material(file, "material", MaterialSpec{},
                                      file.has_section("material"));
  cfg.material_fiber = read_material(file, "material.fiber", shared,
                                     file.has_section("material.fiber"));
  cfg.material_matrix = read_material(file, "material.matrix", shared,
                                      file.has_section("material.matrix"));

  cfg.f1 = file.get_string("load", "f1").value_or(cfg.f1);
  cfg.f2 = file.get_string("load", "f2").value_or(cfg.f2);
  cfg.f3 = file.get_string("load", "f3").value_or(cfg.f3);

  cfg.h = file.get_double("discretization", "h")
              .value_or(cfg.section.fiber_radius / 15.0);
  cfg.n3 = file.get_int("discretization", "n3").value_or(cfg.n3);
  cfg.n_per_cell =
      file.get_int("discretization", "n_per_cell").value_or(cfg.n_per_cell);
  cfg.macro_n1 = file.get_int("discretization", "macro_n1").value_or(cfg.macro_n1);
  cfg.macro_n2 = file.get_int("discretization", "macro_n2").value_or(cfg.macro_n2);
  cfg.macro_n3 = file.get_int("discretization", "macro_n3").value_or(cfg.macro_n3);
  if (auto eps = file.get_double_list("discretization", "eps"))
    cfg.eps = *eps;
  else
    cfg.eps = cfg.family == RunConfig::Family::Hom
                  ? std::vector<double>{0.25, 0.125, 0.0625}
                  : std::vector<double>{0.4, 0.2, 0.1, 0.05};

  cfg.solver_tol = file.get_double("solver", "tol").value_or(cfg.solver_tol);
  if (auto method = file.get_string("solver", "method")) {
    if (*method == "auto")
      cfg.solver_method = RunConfig::SolverMethod::Auto;
    else if (*method == "direct")
      cfg.solver_method = RunConfig::SolverMethod::Direct;
    else if (*method == "cg")
      cfg.solver_method = RunConfig::SolverMethod::Cg;
    else
      throw ConfigError("method must be auto, direct or cg, got '" + *method +
                            "'",
                        file.name(), 0);
  }
  cfg.direct_dof_cap =
      file.get_int("solver", "direct_dof_cap").value_or(cfg.direct_dof_cap);

  cfg.out_dir = file.get_string("output", "dir").value_or(cfg.out_dir);
  cfg.dump_fields =
      file.get_bool("output", "fields").value_or(cfg.dump_fields);
  cfg.workers = file.get_int("output", "workers").value_or(cfg.workers);

  file.require_all_consumed();
  validate_run_config(cfg, file.name());
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  ConfigFile file = ConfigFile::load(path);
  return read_run_config(file);
}

void validate_run_config(const RunConfig& cfg, const std::string& file_name) {
  auto bad = [&](const std::string& what) {
    throw ConfigError(what, file_name, 0);
  };
  if (!(cfg.section.fiber_radius > 0.0) ||
      !(cfg.section.fiber_radius < cfg.section.outer_size))
    bad("geometry requires 0 < fiber_radius < outer_size");
  if (!(cfg.length > 0.0)) bad("length must be positive");
  if (!(cfg.half_width > 0.0)) bad("half_width must be positive");
  if (!(cfg.cell_fiber_radius > 0.0) || !(cfg.cell_fiber_radius < 0.5))
    bad("cell_fiber_radius must lie in (0, 1/2)");
  if (!(cfg.h > 0.0)) bad("h must be positive");
  if (cfg.n3 < 1) bad("n3 must be at least 1");
  if (cfg.n_per_cell < 8) bad("n_per_cell must be at least 8");
  if (cfg.macro_n1 < 1 || cfg.macro_n2 < 1 || cfg.macro_n3 < 1)
    bad("macro grid counts must be at least 1");
  if (cfg.eps.empty()) bad("eps list must not be empty");
  for (size_t i = 0; i < cfg.eps.size(); ++i) {
    if (!(cfg.eps[i] > 0.0)) bad("eps values must be positive");
    if (i > 0 && !(cfg.eps[i] < cfg.eps[i - 1]))
      bad("eps list must be strictly decreasing");
  }
  if (cfg.family == RunConfig::Family::Hom) {
    for (double e : cfg.eps) {
      double kd = 2.0 * cfg.half_width / e;
      if (std::abs(kd - std::lround(kd)) > 1e-9 * std::max(1.0, kd))
        bad("eps must divide the section width 2*half_width");
    }
  }
  if (!(cfg.solver_tol > 0.0)) bad("solver tol must be positive");
  if (cfg.direct_dof_cap < 1) bad("direct_dof_cap must be positive");
  if (cfg.workers < 1) bad("workers must be at least 1");

  for (auto [name, text] : {std::pair<const char*, const std::string*>{
                                "f1", &cfg.f1},
                            {"f2", &cfg.f2},
                            {"f3", &cfg.f3}}) {
    try {
      Expression::parse(*text, cfg.scope());
    } catch (const ParseError& e) {
      bad(std::string("load ") + name + ": " + e.what());
    }
  }
  for (auto [name, spec] :
       {std::pair<const char*, const MaterialSpec*>{"fiber",
                                                    &cfg.material_fiber},
        {"matrix", &cfg.material_matrix}}) {
    try {
      spec_base_tensor(*spec);
      if (spec->kind == MaterialSpec::Kind::Expression)
        Expression::parse(spec->factor, cfg.scope());
    } catch (const ParseError& e) {
      bad(std::string("material ") + name + " factor: " + e.what());
    } catch (const std::invalid_argument& e) {
      bad(std::string("material ") + name + ": " + e.what());
    }
  }
}

ElasticityTensorField build_tensor_field(const RunConfig& cfg) {
  const MaterialSpec &fs = cfg.material_fiber, &ms = cfg.material_matrix;
  bool expr = fs.kind == MaterialSpec::Kind::Expression ||
              ms.kind == MaterialSpec::Kind::Expression;
  Mandel6 F = spec_base_tensor(fs), M = spec_base_tensor(ms);
  if (!expr) {
    if ((F - M).cwiseAbs().maxCoeff() == 0.0)
      return ElasticityTensorField::constant(F);
    return ElasticityTensorField::piecewise(F, M);
  }
  auto factor_of = [&](const MaterialSpec& spec) {
    return Expression::parse(
        spec.kind == MaterialSpec::Kind::Expression ? spec.factor : "1",
        cfg.scope());
  };
  Expression ff = factor_of(fs), mf = factor_of(ms);
  bool x12 = ff.uses_x12() || mf.uses_x12();
  bool x3 = ff.uses_x3() || mf.uses_x3();
  bool y = ff.uses_y() || mf.uses_y();
  return ElasticityTensorField::from_function(
      [F, M, ff, mf](const Eigen::Vector3d& x, const Eigen::Vector2d& y2,
                     Region region) -> Mandel6 {
        if (region == Region::Fiber) return ff.eval(x, y2, region) * F;
        return mf.eval(x, y2, region) * M;
      },
      x3, x12, y);
}

LoadField build_load_field(const RunConfig& cfg) {
  return LoadField{Expression::parse(cfg.f1, cfg.scope()),
                   Expression::parse(cfg.f2, cfg.scope()),
                   Expression::parse(cfg.f3, cfg.scope())};
}

const char* kind_name(RunConfig::Kind kind) {
  switch (kind) {
    case RunConfig::Kind::RodMicro: return "rod-micro";
    case RunConfig::Kind::RodLimit: return "rod-limit";
    case RunConfig::Kind::RodNonlocal: return "rod-nonlocal";
    case RunConfig::Kind::HomMicro: return "hom-micro";
    case RunConfig::Kind::HomLimit: return "hom-limit";
    case RunConfig::Kind::HomNonlocal: return "hom-nonlocal";
    case RunConfig::Kind::Sweep: return "sweep";
  }
  return "unknown";
}

}  // namespace fibrod
