#include "tspipe/automl.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace tspipe {

bool SearchSpace::active(const std::string& dimension, const Configuration& c) const {
  auto it = parent.find(dimension);
  while (it != parent.end()) {
    const auto& [cat, value] = it->second;
    auto v = c.find(cat);
    if (v == c.end() || !std::holds_alternative<std::string>(v->second) || std::get<std::string>(v->second) != value) {
      return false;
    }
    it = parent.find(cat);
  }
  return true;
}

void SearchSpace::validate() const {
  space.validate();
  std::set<std::string> seen;
  for (const auto& d : space.dimensions) {
    auto it = parent.find(d.name);
    if (it != parent.end()) {
      const Dimension* p = space.find(it->second.first);
      if (!p || p->kind != DimensionKind::Categorical || !seen.count(p->name)) {
        throw ParameterError("dimension '" + d.name + "' depends on '" + it->second.first +
                             "', which is not an earlier categorical dimension");
      }
      if (std::find(p->categories.begin(), p->categories.end(), it->second.second) == p->categories.end()) {
        throw ParameterError("dimension '" + d.name + "' depends on unknown category '" + it->second.second + "'");
      }
    }
    seen.insert(d.name);
  }
}

SearchSpace unconditional(HyperparameterSpace space) {
  SearchSpace s;
  s.space = std::move(space);
  return s;
}

void add_choice(SearchSpace& target, const std::string& name,
                const std::vector<std::pair<std::string, SearchSpace>>& options) {
  std::vector<std::string> labels;
  for (const auto& [label, _] : options) labels.push_back(label);
  target.space.dimensions.push_back(Dimension::categorical(name, labels));
  for (const auto& [label, sub] : options) {
    const std::string prefix = name + "." + label + ".";
    for (Dimension d : sub.space.dimensions) {
      const std::string original = d.name;
      d.name = prefix + original;
      auto it = sub.parent.find(original);
      if (it != sub.parent.end()) {
        target.parent[d.name] = {prefix + it->second.first, it->second.second};
      } else {
        target.parent[d.name] = {name, label};
      }
      target.space.dimensions.push_back(std::move(d));
    }
  }
}

Configuration scoped(const Configuration& c, const std::string& prefix) {
  Configuration out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : c) {
    if (k.size() > p.size() && k.compare(0, p.size(), p) == 0) out[k.substr(p.size())] = v;
  }
  return out;
}

ConfigEncoding::ConfigEncoding(SearchSpace space) : space_(std::move(space)) {
  space_.validate();
  for (const auto& d : space_.space.dimensions) {
    for (const auto& k : d.keys()) {
      keys_.push_back({k, &d, width_});
      width_ += d.kind == DimensionKind::Categorical ? static_cast<Index>(d.categories.size()) : 1;
    }
  }
}

namespace {

double to_unit(const Dimension& d, double x) {
  if (d.log_scale) return (std::log(x) - std::log(d.lo)) / (std::log(d.hi) - std::log(d.lo));
  return (x - d.lo) / (d.hi - d.lo);
}

double from_unit_continuous(const Dimension& d, double u) {
  u = std::clamp(u, 0.0, 1.0);
  if (d.log_scale) return std::exp(std::log(d.lo) + u * (std::log(d.hi) - std::log(d.lo)));
  return d.lo + u * (d.hi - d.lo);
}

std::size_t rank_of(const Dimension& d, double x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.values.size(); ++i) {
    if (std::abs(d.values[i] - x) < std::abs(d.values[best] - x)) best = i;
  }
  return best;
}

std::size_t pick(std::size_t count, double u) {
  return std::min(count - 1, static_cast<std::size_t>(std::clamp(u, 0.0, 1.0) * static_cast<double>(count)));
}

}  // namespace

Vector ConfigEncoding::encode(const Configuration& c) const {
  Vector x = Vector::Constant(width_, 0.5);
  for (const auto& k : keys_) {
    const Dimension& d = *k.dim;
    if (!space_.active(d.name, c)) continue;
    auto it = c.find(k.key);
    if (it == c.end()) throw ParameterError("configuration lacks '" + k.key + "'");
    switch (d.kind) {
      case DimensionKind::Continuous:
        x(k.column) = to_unit(d, number(c, k.key));
        break;
      case DimensionKind::Discrete: {
        const auto n = d.values.size();
        x(k.column) = n == 1 ? 0.5 : static_cast<double>(rank_of(d, number(c, k.key))) / static_cast<double>(n - 1);
        break;
      }
      case DimensionKind::Categorical: {
        const auto& v = category(c, k.key);
        auto pos = std::find(d.categories.begin(), d.categories.end(), v);
        if (pos == d.categories.end()) throw ParameterError("'" + v + "' is not a category of '" + k.key + "'");
        x.segment(k.column, static_cast<Index>(d.categories.size())).setZero();
        x(k.column + (pos - d.categories.begin())) = 1.0;
        break;
      }
    }
  }
  return x;
}

Configuration ConfigEncoding::decode(const Vector& x) const {
  if (x.size() != width_) throw ParameterError("encoded vector has the wrong width");
  Configuration c;
  for (const auto& k : keys_) {
    const Dimension& d = *k.dim;
    if (!space_.active(d.name, c)) continue;
    switch (d.kind) {
      case DimensionKind::Continuous:
        c[k.key] = from_unit_continuous(d, x(k.column));
        break;
      case DimensionKind::Discrete: {
        const auto n = d.values.size();
        const double r = std::clamp(x(k.column), 0.0, 1.0) * static_cast<double>(n - 1);
        c[k.key] = d.values[static_cast<std::size_t>(std::lround(r))];
        break;
      }
      case DimensionKind::Categorical: {
        Index best = 0;
        x.segment(k.column, static_cast<Index>(d.categories.size())).maxCoeff(&best);
        c[k.key] = d.categories[static_cast<std::size_t>(best)];
        break;
      }
    }
  }
  return c;
}

Configuration ConfigEncoding::from_unit(const std::vector<double>& u) const {
  if (u.size() != keys_.size()) throw ParameterError("one uniform number per configuration key is required");
  Configuration c;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const Dimension& d = *keys_[i].dim;
    if (!space_.active(d.name, c)) continue;
    switch (d.kind) {
      case DimensionKind::Continuous: c[keys_[i].key] = from_unit_continuous(d, u[i]); break;
      case DimensionKind::Discrete: c[keys_[i].key] = d.values[pick(d.values.size(), u[i])]; break;
      case DimensionKind::Categorical: c[keys_[i].key] = d.categories[pick(d.categories.size(), u[i])]; break;
    }
  }
  return c;
}

Configuration ConfigEncoding::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(keys_.size());
  for (auto& v : u) v = unif(rng);
  return from_unit(u);
}

std::vector<Configuration> ConfigEncoding::latin_hypercube(int count, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> u(static_cast<std::size_t>(count), std::vector<double>(keys_.size()));
  std::vector<int> strata(static_cast<std::size_t>(count));
  for (std::size_t j = 0; j < keys_.size(); ++j) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < count; ++i) {
      u[static_cast<std::size_t>(i)][j] = (strata[static_cast<std::size_t>(i)] + unif(rng)) / count;
    }
  }
  std::vector<Configuration> out;
  for (const auto& row : u) out.push_back(from_unit(row));
  return out;
}

}  // namespace tspipe
