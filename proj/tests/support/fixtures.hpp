#pragma once

#include "tspipe/csv_io.hpp"
#include "tspipe/dataset.hpp"

#include <atomic>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace tspipe::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tspipe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Dataset load_from_text(const std::string& static_csv, const std::string& temporal_csv) {
  TempDir dir;
  write_text_file(dir / "static.csv", static_csv);
  write_text_file(dir / "temporal.csv", temporal_csv);
  return load_csv(dir / "static.csv", dir / "temporal.csv");
}

/// Random raw dataset with ragged lengths, holes, a categorical static column
/// and negative values.
inline Dataset random_dataset(std::mt19937_64& rng, Index n, Index steps, Index features, double missing = 0.3) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Index> len(1, steps);
  Dataset ds;
  ds.static_names = {"s0", "kind"};
  ds.static_features.values.resize(n, 2);
  ds.static_features.observed.resize(n, 2);
  ds.static_features.levels = {{}, {"A", "B", "C"}};
  ds.temporal = TemporalTensor::empty(n, steps, features);
  for (Index j = 0; j < features; ++j) ds.temporal_names.push_back("f" + std::to_string(j));
  for (Index i = 0; i < n; ++i) {
    ds.ids.push_back("id" + std::to_string(i));
    ds.static_features.values(i, 0) = g(rng);
    ds.static_features.observed(i, 0) = u(rng) >= missing;
    if (!ds.static_features.observed(i, 0)) ds.static_features.values(i, 0) = kMissing;
    ds.static_features.values(i, 1) = static_cast<double>(static_cast<int>(u(rng) * 3.0) % 3);
    ds.static_features.observed(i, 1) = true;
    const Index l = len(rng);
    ds.temporal.seq_len(i) = static_cast<int>(l);
    double t = 0.0;
    for (Index s = 0; s < l; ++s) {
      t += 0.5 + u(rng);
      ds.temporal.time(i, s) = t;
      bool any = false;
      for (Index j = 0; j < features; ++j) {
        const bool obs = u(rng) >= missing;
        ds.temporal.observed[i](s, j) = obs;
        ds.temporal.values[i](s, j) = obs ? g(rng) : kMissing;
        any = any || obs;
      }
      if (!any) {
        ds.temporal.observed[i](s, 0) = true;
        ds.temporal.values[i](s, 0) = g(rng);
      }
    }
  }
  ds.fold.assign(static_cast<std::size_t>(n), Fold::Unassigned);
  return ds;
}

/// Bitwise equality of two doubles (NaNs with equal payload compare equal).
inline bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

/// Value/mask/name identity of the raw parts of two datasets. Unobserved
/// cells are not compared.
inline bool raw_equal(const Dataset& a, const Dataset& b, std::string* why = nullptr) {
  const auto fail = [&](const std::string& m) {
    if (why != nullptr) *why = m;
    return false;
  };
  if (a.ids != b.ids) return fail("ids");
  if (a.static_names != b.static_names) return fail("static names");
  if (a.temporal_names != b.temporal_names) return fail("temporal names");
  if (a.static_features.levels != b.static_features.levels) return fail("levels");
  if ((a.static_features.observed != b.static_features.observed).any()) return fail("static mask");
  for (Index i = 0; i < a.static_features.values.rows(); ++i)
    for (Index j = 0; j < a.static_features.values.cols(); ++j)
      if (a.static_features.observed(i, j) &&
          !same_bits(a.static_features.values(i, j), b.static_features.values(i, j)))
        return fail("static value");
  if (a.temporal.seq_len != b.temporal.seq_len) return fail("seq_len");
  for (Index i = 0; i < a.instances(); ++i) {
    const Index l = a.temporal.seq_len(i);
    for (Index t = 0; t < l; ++t) {
      if (!same_bits(a.temporal.time(i, t), b.temporal.time(i, t))) return fail("time");
      for (Index j = 0; j < a.temporal.features(); ++j) {
        if (a.temporal.observed[i](t, j) != b.temporal.observed[i](t, j)) return fail("temporal mask");
        if (a.temporal.observed[i](t, j) && !same_bits(a.temporal.values[i](t, j), b.temporal.values[i](t, j)))
          return fail("temporal value");
      }
    }
  }
  return true;
}

}  // namespace tspipe::testing
