#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fibrod/expr.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/tensors.hpp"

// Run configuration: flat INI-style text with [section] headers and
// key = value lines.  Every key belongs to a fixed schema; unknown keys are
// rejected with their file location, and so are type errors.

namespace fibrod {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& what, std::string file_name, int line_number)
      : std::runtime_error(file_name + ":" + std::to_string(line_number) +
                           ": " + what),
        file(std::move(file_name)),
        line(line_number) {}
  std::string file;
  int line;
};

// Raw parsed file with consumption tracking.  Typed getters mark keys as
// consumed; require_all_consumed reports the first leftover key.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& is, std::string name);
  static ConfigFile load(const std::string& path);

  const std::string& name() const { return name_; }
  bool has_section(const std::string& section) const;

  std::optional<std::string> get_string(const std::string& section,
                                        const std::string& key);
  std::optional<double> get_double(const std::string& section,
                                   const std::string& key);
  std::optional<int> get_int(const std::string& section,
                             const std::string& key);
  std::optional<bool> get_bool(const std::string& section,
                               const std::string& key);
  std::optional<std::vector<double>> get_double_list(
      const std::string& section, const std::string& key);

  void require_all_consumed() const;

  // Raw text of the file with comments and blanks dropped, for manifests.
  const std::vector<std::string>& canonical_lines() const { return lines_; }

 private:
  struct Entry {
    std::string value;
    int line;
    bool consumed = false;
  };
  std::string name_;
  std::vector<std::string> section_order_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;
  std::vector<std::string> lines_;

  [[noreturn]] void fail(const std::string& what, int line) const;
  Entry* find(const std::string& section, const std::string& key);
};

struct MaterialSpec {
  enum class Kind { Isotropic, Orthotropic, Mandel66, Expression };
  Kind kind = Kind::Isotropic;
  double lambda = 1.0, mu = 1.0;
  OrthotropicConstants ortho{};
  Mandel6 mandel = Mandel6::Zero();
  std::string factor;  // scalar expression, Expression kind only
};

struct RunConfig {
  enum class Kind {
    RodMicro, RodLimit, RodNonlocal, HomMicro, HomLimit, HomNonlocal, Sweep
  };
  enum class Family { Rod, Hom };
  enum class SolverMethod { Auto, Direct, Cg };

  Kind kind = Kind::RodLimit;
  Family family = Family::Rod;

  // Rod geometry: cross section omega with a centered fiber, length l along
  // x3.  Hom geometry: omega = (-half_width, half_width)^2 tiled by cells
  // with fiber radius cell_fiber_radius (relative to the unit cell).
  SectionGeometry section;
  double length = 1.0;
  double half_width = 0.5;
  double cell_fiber_radius = 0.25;

  MaterialSpec material_fiber, material_matrix;

  std::string f1 = "0", f2 = "0", f3 = "1";

  double h = 0.5 / 15.0;  // section target edge length, default r/15
  int n3 = 64;            // x3 elements
  int n_per_cell = 16;
  int macro_n1 = 4, macro_n2 = 4, macro_n3 = 8;
  std::vector<double> eps;  // sorted decreasing

  double solver_tol = 1e-10;
  SolverMethod solver_method = SolverMethod::Auto;
  int direct_dof_cap = 200000;

  std::string out_dir = "out";
  bool dump_fields = true;
  int workers = 1;

  std::vector<std::string> config_echo;  // canonical config lines

  Expression::Scope scope() const {
    return family == Family::Hom ? Expression::Scope::Cell
                                 : Expression::Scope::Rod;
  }
};

RunConfig read_run_config(ConfigFile& file);
RunConfig load_run_config(const std::string& path);

// Re-validation after command-line overrides (eps list, workers).
void validate_run_config(const RunConfig& cfg, const std::string& file_name);

// The elasticity field described by the two per-region specs.
ElasticityTensorField build_tensor_field(const RunConfig& cfg);

// Load components as expressions; evaluation is pure.
struct LoadField {
  Expression f1, f2, f3;
  Eigen::Vector3d eval(const Eigen::Vector3d& x, const Eigen::Vector2d& y,
                       Region region) const {
    return {f1.eval(x, y, region), f2.eval(x, y, region),
            f3.eval(x, y, region)};
  }
  bool uses_y() const { return f1.uses_y() || f2.uses_y() || f3.uses_y(); }
};

LoadField build_load_field(const RunConfig& cfg);

const char* kind_name(RunConfig::Kind kind);

}  // namespace fibrod
