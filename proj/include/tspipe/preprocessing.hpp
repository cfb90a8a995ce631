#pragma once

#include "tspipe/component.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tspipe {

/// Masks out every observed static/temporal cell holding a negative value.
Dataset filter_negative(const Dataset& dataset);

class FilterNegative final : public Component {
 public:
  std::string name() const override { return "filter-negative"; }
  std::unique_ptr<Component> clone_unfitted() const override { return std::make_unique<FilterNegative>(); }

 protected:
  void do_fit(const Dataset&) override {}
  Dataset do_transform(const Dataset& dataset) const override { return filter_negative(dataset); }
};

/// Replaces each named static feature by one binary column per category seen
/// in the training rows (`<feature>_<category>`, categories sorted). Unseen
/// categories encode as an all-zero block; a missing source cell leaves the
/// block unobserved.
class OneHotEncoder final : public Component {
 public:
  explicit OneHotEncoder(std::vector<std::string> features) : features_(std::move(features)) {}

  std::string name() const override { return "one-hot"; }
  std::unique_ptr<Component> clone_unfitted() const override { return std::make_unique<OneHotEncoder>(features_); }

  const std::vector<std::vector<std::string>>& vocabulary() const { return vocabulary_; }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  std::vector<std::string> features_;
  std::vector<std::vector<std::string>> vocabulary_;
};

enum class NormalizationMode { MinMax, Standard, None };
NormalizationMode parse_normalization(const std::string& s);
std::string to_string(NormalizationMode m);

/// Per-feature scaling learned from observed training cells. Features named
/// in `exclude` (typically labels and treatments) and categorical static
/// columns pass through.
class Normalizer final : public Component {
 public:
  explicit Normalizer(NormalizationMode mode, std::vector<std::string> exclude = {})
      : mode_(mode), exclude_(std::move(exclude)) {}

  std::string name() const override { return "normalizer"; }
  std::unique_ptr<Component> clone_unfitted() const override {
    return std::make_unique<Normalizer>(mode_, exclude_);
  }

  struct Stats {
    Vector offset;  // min or mean
    Vector scale;   // range or std, never zero
    std::vector<bool> active;
  };
  const Stats& static_stats() const { return static_; }
  const Stats& temporal_stats() const { return temporal_; }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  NormalizationMode mode_;
  std::vector<std::string> exclude_;
  Stats static_;
  Stats temporal_;
};

/// Turns raw sequences into a supervised problem: keeps the most recent
/// max_seq_len steps (tail-padded), moves label variables into the label
/// tensor and treatment variables into the action tensor.
///
/// Online: y[n][t] = label[n][t + window], valid only where that source cell
/// exists and is observed. One-shot: y[n] = last observed label value (or the
/// last one at/after trigger_step, with inputs cut before it).
Dataset make_problem(const Dataset& dataset, const ProblemSpec& spec);

class ProblemMaker final : public Component {
 public:
  explicit ProblemMaker(ProblemSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return "problem-maker"; }
  std::unique_ptr<Component> clone_unfitted() const override { return std::make_unique<ProblemMaker>(spec_); }

 protected:
  void do_fit(const Dataset&) override { spec_.validate(); }
  Dataset do_transform(const Dataset& dataset) const override { return make_problem(dataset, spec_); }

 private:
  ProblemSpec spec_;
};

/// Ordered chain of stages; each is fitted on its predecessor's output.
class PipelineComposer final : public Component {
 public:
  PipelineComposer() = default;
  explicit PipelineComposer(std::vector<std::unique_ptr<Component>> stages) : stages_(std::move(stages)) {}

  std::string name() const override;
  std::unique_ptr<Component> clone_unfitted() const override;

  std::size_t size() const { return stages_.size(); }
  const Component& stage(std::size_t i) const { return *stages_.at(i); }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  std::vector<std::unique_ptr<Component>> stages_;
};

PipelineComposer compose(std::vector<std::unique_ptr<Component>> stages);

template <typename... Stages>
PipelineComposer compose(Stages&&... stages) {
  std::vector<std::unique_ptr<Component>> v;
  (v.push_back(std::make_unique<std::decay_t<Stages>>(std::forward<Stages>(stages))), ...);
  return PipelineComposer(std::move(v));
}

}  // namespace tspipe
