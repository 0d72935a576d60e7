#pragma once

// Train/test partitioning. Group-aware strategies keep every plot's samples
// on one side of each partition.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "agb/core/error.hpp"
#include "agb/core/rng.hpp"
#include "agb/core/types.hpp"

namespace agb::eval {

struct SplitSpec {
  enum class Kind { Holdout, KFold };
  Kind kind = Kind::Holdout;
  double test_fraction = 0.2;
  int k = 5;
  bool group_by_plot = true;

  /// "holdout:0.2" or "kfold:5"; an optional ":samples" suffix disables grouping.
  static SplitSpec parse(const std::string& text) {
    SplitSpec s;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (const auto c2 = rest.find(':'); c2 != std::string::npos) {
      if (rest.substr(c2 + 1) != "samples") throw UsageError("unknown split option '" + rest.substr(c2 + 1) + "'");
      s.group_by_plot = false;
      rest = rest.substr(0, c2);
    }
    try {
      if (head == "holdout") {
        s.kind = Kind::Holdout;
        if (!rest.empty()) s.test_fraction = std::stod(rest);
      } else if (head == "kfold") {
        s.kind = Kind::KFold;
        if (!rest.empty()) s.k = std::stoi(rest);
      } else {
        throw UsageError("unknown split '" + text + "' (expected holdout:FRAC or kfold:K)");
      }
    } catch (const std::logic_error&) {
      throw UsageError("malformed split '" + text + "'");
    }
    if (s.kind == Kind::Holdout && !(s.test_fraction > 0 && s.test_fraction < 1))
      throw UsageError("holdout fraction must lie in (0, 1)");
    if (s.kind == Kind::KFold && s.k < 2) throw UsageError("kfold needs k >= 2");
    return s;
  }

  std::string describe() const {
    std::string g = group_by_plot ? "plot-disjoint" : "sample-level";
    if (kind == Kind::Holdout) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", test_fraction);
      return g + " hold-out, test fraction " + buf;
    }
    return g + " " + std::to_string(k) + "-fold cross-validation";
  }
};

struct Partition {
  std::vector<std::size_t> train;  // sample positions, ascending
  std::vector<std::size_t> test;
};

inline std::size_t holdout_test_groups(std::size_t groups, double frac) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(groups))));
}

/// Partitions of ds.samples (by position). Plots are shuffled with a stream
/// derived from the seed; holdout puts the first round(frac * G) groups in
/// the test side, kfold deals groups round-robin into k folds.
inline std::vector<Partition> split_dataset(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed) {
  // A group is a plot, or a single sample when grouping is off.
  std::vector<std::int64_t> group_of(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    group_of[i] = spec.group_by_plot ? ds.samples[i].quadrat.plot_id : ds.samples[i].id;
  std::vector<std::int64_t> groups(group_of.begin(), group_of.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  const std::size_t G = groups.size();

  RandomStream rng(seed, "split");
  rng.shuffle(std::span<std::int64_t>(groups));

  std::vector<std::set<std::int64_t>> test_sets;
  if (spec.kind == SplitSpec::Kind::Holdout) {
    const std::size_t n_test = holdout_test_groups(G, spec.test_fraction);
    if (G < 2 || n_test >= G)
      throw DomainError("hold-out needs more groups than test groups (" + std::to_string(G) + " available)");
    test_sets.emplace_back(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_test));
  } else {
    if (spec.k < 2 || static_cast<std::size_t>(spec.k) > G)
      throw DomainError("kfold k = " + std::to_string(spec.k) + " exceeds the " + std::to_string(G) +
                        " available groups");
    test_sets.resize(static_cast<std::size_t>(spec.k));
    for (std::size_t i = 0; i < G; ++i) test_sets[i % static_cast<std::size_t>(spec.k)].insert(groups[i]);
  }

  std::vector<Partition> out;
  for (const auto& test : test_sets) {
    Partition p;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) (test.contains(group_of[i]) ? p.test : p.train).push_back(i);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace agb::eval
