#pragma once
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hnal/corpus.hpp"
#include "hnal/error.hpp"
#include "hnal/matrix.hpp"

namespace hnal::test {

// Code of the hnal::Error thrown by f, or nullopt if nothing was thrown.
inline std::optional<ErrorCode> thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

inline std::string id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

// Corpus whose i-th image/text rows pair up as img{i} <-> txt{i}.
inline Corpus corpus_from(const Matrix& images, const Matrix& texts) {
  std::vector<EmbeddingRecord> recs;
  std::vector<Pair> oracle;
  for (std::size_t i = 0; i < images.rows; ++i) {
    auto ir = images.row(i);
    auto tr = texts.row(i);
    recs.push_back({id("img", i), Modality::Image, {ir.begin(), ir.end()}});
    recs.push_back({id("txt", i), Modality::Text, {tr.begin(), tr.end()}});
    oracle.push_back({id("img", i), id("txt", i)});
  }
  return Corpus({images.cols, texts.cols}, std::move(recs), std::move(oracle));
}

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// True when no hinge sits within `eps` of its kink and every hardest
// negative beats the runner-up by more than `eps`.
inline bool away_from_kinks(const Matrix& s, double alpha, double eps) {
  const std::size_t n = s.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (bool by_row : {true, false}) {
      std::vector<double> neg;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) neg.push_back(by_row ? s(i, j) : s(j, i));
      std::sort(neg.rbegin(), neg.rend());
      if (neg.size() > 1 && neg[0] - neg[1] <= eps) return false;
      if (std::abs(alpha + neg[0] - s(i, i)) <= eps) return false;
    }
  }
  return true;
}

// ‖a - b‖_F / max(‖a‖_F, ‖b‖_F)
inline double rel_err(const Matrix& a, const Matrix& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    na += a.data[i] * a.data[i];
    nb += b.data[i] * b.data[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("hnal_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace hnal::test
