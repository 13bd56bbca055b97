#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/common.hpp"

namespace mgcn {

// N x F node features, every column min-max scaled to [0, 1].
struct FeatureMatrix {
  Mat data;
  std::vector<std::string> feature_names;
};

// N integer labels in [0, C) plus the C class names, ordered by label id.
struct LabelVector {
  std::vector<int> labels;
  std::vector<std::string> class_names;

  int n_classes() const { return static_cast<int>(class_names.size()); }
};

using BoolMask = std::vector<std::uint8_t>;

// Disjoint train/val/test membership over the N nodes.
struct Masks {
  BoolMask train, val, test;
};

inline long mask_count(const BoolMask& m) {
  long n = 0;
  for (auto b : m) n += b ? 1 : 0;
  return n;
}

}  // namespace mgcn
