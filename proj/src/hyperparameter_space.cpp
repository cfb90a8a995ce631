#include "tspipe/hyperparameter_space.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tspipe {

std::string to_string(DimensionKind k) {
  switch (k) {
    case DimensionKind::Discrete: return "discrete";
    case DimensionKind::Continuous: return "continuous";
    case DimensionKind::Categorical: return "categorical";
  }
  return "?";
}

Dimension Dimension::discrete(std::string name, std::vector<double> domain, int dimensionality) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::Discrete;
  d.values = std::move(domain);
  d.dimensionality = dimensionality;
  return d;
}

Dimension Dimension::continuous(std::string name, double lo, double hi, bool log_scale) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::Continuous;
  d.lo = lo;
  d.hi = hi;
  d.log_scale = log_scale;
  return d;
}

Dimension Dimension::categorical(std::string name, std::vector<std::string> domain) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::Categorical;
  d.categories = std::move(domain);
  return d;
}

std::vector<std::string> Dimension::keys() const {
  if (dimensionality == 1) return {name};
  std::vector<std::string> out;
  for (int i = 0; i < dimensionality; ++i) out.push_back(name + "[" + std::to_string(i) + "]");
  return out;
}

const Dimension* HyperparameterSpace::find(const std::string& name) const {
  for (const auto& d : dimensions) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

void HyperparameterSpace::validate() const {
  std::set<std::string> names;
  for (const auto& d : dimensions) {
    if (!names.insert(d.name).second) throw ParameterError("duplicate dimension '" + d.name + "'");
    if (d.dimensionality < 1) throw ParameterError("dimension '" + d.name + "' needs dimensionality >= 1");
    switch (d.kind) {
      case DimensionKind::Discrete: {
        if (d.values.empty()) throw ParameterError("dimension '" + d.name + "' has an empty domain");
        auto sorted = d.values;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
          throw ParameterError("dimension '" + d.name + "' has duplicate domain values");
        }
        break;
      }
      case DimensionKind::Categorical: {
        if (d.categories.empty()) throw ParameterError("dimension '" + d.name + "' has an empty domain");
        if (d.dimensionality != 1) throw ParameterError("categorical '" + d.name + "' must be 1-dimensional");
        std::set<std::string> seen(d.categories.begin(), d.categories.end());
        if (seen.size() != d.categories.size()) {
          throw ParameterError("dimension '" + d.name + "' has duplicate categories");
        }
        break;
      }
      case DimensionKind::Continuous:
        if (!(d.lo < d.hi)) throw ParameterError("dimension '" + d.name + "' needs lo < hi");
        if (d.log_scale && d.lo <= 0.0) throw ParameterError("log-scaled '" + d.name + "' needs lo > 0");
        break;
    }
  }
}

double number(const Configuration& c, const std::string& key) {
  const auto it = c.find(key);
  if (it == c.end()) throw ParameterError("configuration lacks '" + key + "'");
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  throw ParameterError("configuration value '" + key + "' is not numeric");
}

double number_or(const Configuration& c, const std::string& key, double fallback) {
  return c.count(key) ? number(c, key) : fallback;
}

const std::string& category(const Configuration& c, const std::string& key) {
  const auto it = c.find(key);
  if (it == c.end()) throw ParameterError("configuration lacks '" + key + "'");
  if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
  throw ParameterError("configuration value '" + key + "' is not categorical");
}

std::string describe(const Configuration& c) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : c) {
    if (!first) os << ' ';
    first = false;
    os << k << '=';
    std::visit([&os](const auto& x) { os << x; }, v);
  }
  return os.str();
}

}  // namespace tspipe
