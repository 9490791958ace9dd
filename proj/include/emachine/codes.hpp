#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace emachine::codes {

/// Score tolerance used when collecting the set of maximal scores.
inline constexpr double kScoreEpsilon = 1e-9;

/// Fixed-length vector of small non-negative symbols. Component 0 means
/// "nothing at this position"; an all-zero vector is the NULL symbol.
class SymbolVector {
 public:
  SymbolVector() = default;
  explicit SymbolVector(std::size_t dimension) : components_(dimension, 0) {}
  SymbolVector(std::initializer_list<int> components);
  explicit SymbolVector(std::vector<int> components);

  std::size_t size() const noexcept { return components_.size(); }
  int operator[](std::size_t i) const { return components_[i]; }
  int& operator[](std::size_t i) { return components_[i]; }

  std::span<const int> components() const noexcept { return components_; }
  bool is_null() const noexcept;

  /// Throws Errc::Config if the dimension differs or a component exceeds max_symbol.
  void validate(std::size_t dimension, int max_symbol) const;

  std::string to_string() const;

  friend bool operator==(const SymbolVector&, const SymbolVector&) = default;
  friend auto operator<=>(const SymbolVector&, const SymbolVector&) = default;

 private:
  std::vector<int> components_;
};

SymbolVector concat(const SymbolVector& a, const SymbolVector& b);
SymbolVector concat(std::initializer_list<SymbolVector> parts);
/// Components [offset, offset + length).
SymbolVector slice(const SymbolVector& v, std::size_t offset, std::size_t length);

enum class SimilarityKind {
  ScalarProduct,      ///< sum of componentwise products
  NonzeroMatchRatio,  ///< matching non-zero positions over non-zero positions of x
};

SimilarityKind similarity_from_string(const std::string& name);
std::string to_string(SimilarityKind kind);

double similarity(const SymbolVector& x, const SymbolVector& g, SimilarityKind kind);

struct DecodingVerdict {
  bool pass = true;
  /// (x, x') with fn(x, x') >= fn(x, x) when the check fails.
  std::optional<std::pair<SymbolVector, SymbolVector>> witness;
};

/// Checks that every code in `codes` is strictly more similar to itself
/// than to any other code in the set.
DecodingVerdict correct_decoding_check(std::span<const SymbolVector> codes, SimilarityKind kind);

/// Bidirectional map between labels and their code vectors.
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::vector<std::string> labels, std::vector<SymbolVector> vectors);

  /// Label k becomes the unit vector with symbol 1 at position k.
  static Codebook one_hot(std::vector<std::string> labels);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<SymbolVector>& vectors() const noexcept { return vectors_; }

  bool contains(const std::string& label) const { return index_.contains(label); }
  const SymbolVector& encode(const std::string& label) const;
  std::optional<std::string> decode(const SymbolVector& v) const;

 private:
  std::vector<std::string> labels_;
  std::vector<SymbolVector> vectors_;
  std::map<std::string, std::size_t> index_;
  std::size_t dimension_ = 0;
};

void to_json(nlohmann::json& j, const SymbolVector& v);
void from_json(const nlohmann::json& j, SymbolVector& v);

}  // namespace emachine::codes
