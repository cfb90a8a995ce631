#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace tspipe {

enum class DimensionKind { Discrete, Continuous, Categorical };

std::string to_string(DimensionKind k);

/// One searchable dimension, mirroring the {name, type, domain,
/// dimensionality} record used by extension wrappers.
struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::Continuous;
  std::vector<double> values;           // discrete domain
  std::vector<std::string> categories;  // categorical domain
  double lo = 0.0;                      // continuous interval
  double hi = 1.0;
  bool log_scale = false;
  int dimensionality = 1;

  static Dimension discrete(std::string name, std::vector<double> domain, int dimensionality = 1);
  static Dimension continuous(std::string name, double lo, double hi, bool log_scale = false);
  static Dimension categorical(std::string name, std::vector<std::string> domain);

  /// Configuration keys this dimension produces: `name`, or `name[i]` when
  /// dimensionality > 1.
  std::vector<std::string> keys() const;
};

using ParamValue = std::variant<double, std::string>;
using Configuration = std::map<std::string, ParamValue>;

struct HyperparameterSpace {
  std::vector<Dimension> dimensions;

  bool empty() const { return dimensions.empty(); }
  std::size_t size() const { return dimensions.size(); }
  const Dimension* find(const std::string& name) const;

  /// Throws ParameterError on empty/duplicated domains or lo >= hi.
  void validate() const;
};

double number(const Configuration& c, const std::string& key);
double number_or(const Configuration& c, const std::string& key, double fallback);
const std::string& category(const Configuration& c, const std::string& key);
std::string describe(const Configuration& c);

}  // namespace tspipe
