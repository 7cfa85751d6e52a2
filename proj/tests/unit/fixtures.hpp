#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "conceptor/lab.hpp"

namespace testing {

using namespace conceptor;

/// A subject trained for a handful of steps; shared by every test in the binary.
inline const SubjectBundle& tiny_subject() {
  static const SubjectBundle bundle = [] {
    SubjectConfig c;
    c.vocab.dim = 16;
    c.arch.hidden = 32;
    c.arch.time_dim = 8;
    c.arch.residual_layers = 1;
    c.training.steps = 40;
    c.training.batch = 16;
    c.images_per_combo = 1;
    return train_subject_bundle(c);
  }();
  return bundle;
}

inline DecompositionConfig quick_config() {
  DecompositionConfig c;
  c.max_steps = 20;
  c.val_every = 10;
  c.val_count = 2;
  c.sampler_steps = 10;
  return c;
}

inline ConceptCorpusPlan quick_plan() {
  ConceptCorpusPlan p;
  p.train_count = 12;
  p.validation_count = 4;
  p.test_count = 4;
  return p;
}

inline const Decomposition& tiny_decomposition() {
  static const Decomposition dec = [] {
    const auto& b = tiny_subject();
    PooledCosineOracle oracle;
    return train_decomposition(b.model, b.schedule, b.vocab, suite_corpus(b.vocab, "gleeb", quick_plan()),
                               quick_config(), oracle);
  }();
  return dec;
}

/// Removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("conceptor_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

inline bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
           return std::memcmp(&x, &y, sizeof x) == 0;
         });
}

}  // namespace testing
