#include "emachine/codes.hpp"

#include <sstream>

#include "emachine/error.hpp"

namespace emachine {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::Config: return "configuration error";
    case Errc::Rejection: return "rejection error";
    case Errc::NumericalDivergence: return "numerical divergence";
    case Errc::SingularParameter: return "singular parameter";
    case Errc::NonConvergence: return "non-convergence";
    case Errc::ResetFailure: return "reset failure";
    case Errc::NoSelection: return "no selection";
    case Errc::MemoryFull: return "memory full";
    case Errc::Coverage: return "coverage error";
    case Errc::TeacherFault: return "teacher fault";
    case Errc::Stuck: return "stuck";
    case Errc::ImageryGap: return "imagery gap";
    case Errc::StepSize: return "step-size error";
  }
  return "unknown error";
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace emachine

namespace emachine::codes {

SymbolVector::SymbolVector(std::initializer_list<int> components)
    : SymbolVector(std::vector<int>(components)) {}

SymbolVector::SymbolVector(std::vector<int> components) : components_(std::move(components)) {
  for (int c : components_) {
    if (c < 0) fail(Errc::Config, "symbol components must be non-negative");
  }
}

bool SymbolVector::is_null() const noexcept {
  for (int c : components_) {
    if (c != 0) return false;
  }
  return true;
}

void SymbolVector::validate(std::size_t dimension, int max_symbol) const {
  if (size() != dimension) {
    fail(Errc::Config, "symbol vector " + to_string() + " has dimension " + std::to_string(size()) +
                           ", expected " + std::to_string(dimension));
  }
  for (int c : components_) {
    if (c > max_symbol) {
      fail(Errc::Config, "symbol " + std::to_string(c) + " exceeds alphabet bound " +
                             std::to_string(max_symbol));
    }
  }
}

std::string SymbolVector::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) out << ' ';
    out << components_[i];
  }
  return out.str();
}

SymbolVector concat(const SymbolVector& a, const SymbolVector& b) {
  return concat({a, b});
}

SymbolVector concat(std::initializer_list<SymbolVector> parts) {
  std::vector<int> out;
  for (const auto& p : parts) {
    out.insert(out.end(), p.components().begin(), p.components().end());
  }
  return SymbolVector(std::move(out));
}

SymbolVector slice(const SymbolVector& v, std::size_t offset, std::size_t length) {
  if (offset + length > v.size()) fail(Errc::Config, "slice exceeds vector dimension");
  auto c = v.components();
  return SymbolVector(std::vector<int>(c.begin() + static_cast<std::ptrdiff_t>(offset),
                                       c.begin() + static_cast<std::ptrdiff_t>(offset + length)));
}

SimilarityKind similarity_from_string(const std::string& name) {
  if (name == "scalar" || name == "scalar-product") return SimilarityKind::ScalarProduct;
  if (name == "ratio" || name == "nonzero-match-ratio") return SimilarityKind::NonzeroMatchRatio;
  fail(Errc::Config, "unknown similarity '" + name + "' (expected scalar or ratio)");
}

std::string to_string(SimilarityKind kind) {
  return kind == SimilarityKind::ScalarProduct ? "scalar" : "ratio";
}

double similarity(const SymbolVector& x, const SymbolVector& g, SimilarityKind kind) {
  if (x.size() != g.size()) {
    fail(Errc::Config, "similarity: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                           std::to_string(g.size()) + ")");
  }
  if (kind == SimilarityKind::ScalarProduct) {
    double sum = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) sum += double(x[j]) * double(g[j]);
    return sum;
  }
  int matches = 0;
  int nonzero = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0) {
      ++nonzero;
      if (x[j] == g[j]) ++matches;
    }
  }
  return nonzero > 0 ? double(matches) / double(nonzero) : 0.0;
}

DecodingVerdict correct_decoding_check(std::span<const SymbolVector> codes, SimilarityKind kind) {
  for (const auto& x : codes) {
    const double self = similarity(x, x, kind);
    for (const auto& other : codes) {
      if (other == x) continue;
      // A cross score within the tie tolerance would enter the same max-set.
      if (similarity(x, other, kind) >= self - kScoreEpsilon) {
        return {false, std::make_pair(x, other)};
      }
    }
  }
  return {};
}

Codebook::Codebook(std::vector<std::string> labels, std::vector<SymbolVector> vectors)
    : labels_(std::move(labels)), vectors_(std::move(vectors)) {
  if (labels_.size() != vectors_.size()) fail(Errc::Config, "codebook: label/vector count mismatch");
  dimension_ = vectors_.empty() ? 0 : vectors_.front().size();
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (vectors_[i].size() != dimension_) fail(Errc::Config, "codebook: ragged code vectors");
    if (!index_.emplace(labels_[i], i).second) {
      fail(Errc::Config, "codebook: duplicate label '" + labels_[i] + "'");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (vectors_[k] == vectors_[i]) fail(Errc::Config, "codebook: duplicate code for '" + labels_[i] + "'");
    }
  }
}

Codebook Codebook::one_hot(std::vector<std::string> labels) {
  std::vector<SymbolVector> vectors;
  vectors.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SymbolVector v(labels.size());
    v[i] = 1;
    vectors.push_back(std::move(v));
  }
  return Codebook(std::move(labels), std::move(vectors));
}

const SymbolVector& Codebook::encode(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) fail(Errc::Rejection, "codebook: unknown label '" + label + "'");
  return vectors_[it->second];
}

std::optional<std::string> Codebook::decode(const SymbolVector& v) const {
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (vectors_[i] == v) return labels_[i];
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const SymbolVector& v) {
  j = nlohmann::json::array();
  for (int c : v.components()) j.push_back(c);
}

void from_json(const nlohmann::json& j, SymbolVector& v) {
  if (!j.is_array()) fail(Errc::Config, "symbol vector must be a JSON array of integers");
  std::vector<int> c;
  for (const auto& e : j) {
    if (!e.is_number_integer()) fail(Errc::Config, "symbol vector must be a JSON array of integers");
    c.push_back(e.get<int>());
  }
  v = SymbolVector(std::move(c));
}

}  // namespace emachine::codes
