#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace marginlab {

// binom(n, k) with overflow detection; throws std::invalid_argument for
// arguments outside 0 <= k <= n and std::overflow_error past int64 range.
std::int64_t binomial(int n, int k);

// j-th k-subset of [0, n) in colexicographic order, strictly increasing.
std::vector<int> colex_unrank(std::int64_t j, int n, int k);

// Inverse of colex_unrank; support must be strictly increasing.
std::int64_t colex_rank(const std::vector<int>& support);

// Advances support to its colex successor among k-subsets of [0, n).
// Returns false (support unchanged) when it is already the last subset.
bool colex_next(std::vector<int>& support, int n);

// Relevance matrix A in {0,1}^{N x n} with sparse rows: either the complete
// matrix of all k-subsets of [0, n) (one row per subset, colex order) or an
// explicit list of distinct row supports. Immutable after construction.
class RelevanceMatrix {
 public:
  static RelevanceMatrix snk(int n, int k);
  static RelevanceMatrix explicit_rows(int n,
                                       std::vector<std::vector<int>> supports);

  int docs() const { return n_; }
  std::int64_t rows() const { return N_; }
  bool is_snk() const { return is_snk_; }
  int snk_k() const;

  // Common support size when all rows share one, else nullopt.
  std::optional<int> uniform_k() const;
  // Same, but throws std::invalid_argument naming `op` when non-uniform.
  int require_uniform_k(const char* op) const;
  // Largest support size over all rows.
  int max_support_size() const;

  std::vector<int> row_support(std::int64_t j) const;

  // Visits every row in index order as fn(j, support). The support reference
  // is only valid during the call.
  template <class Fn>
  void for_each_row(Fn&& fn) const {
    if (is_snk_) {
      std::vector<int> s(k_);
      for (int i = 0; i < k_; ++i) s[i] = i;
      for (std::int64_t j = 0; j < N_; ++j) {
        fn(j, static_cast<const std::vector<int>&>(s));
        if (j + 1 < N_) colex_next(s, n_);
      }
    } else {
      for (std::int64_t j = 0; j < N_; ++j)
        fn(j, static_cast<const std::vector<int>&>(rows_[j]));
    }
  }

  // Like for_each_row over the index range [begin, end).
  template <class Fn>
  void for_row_range(std::int64_t begin, std::int64_t end, Fn&& fn) const {
    if (begin < 0 || end > N_ || begin > end)
      throw std::out_of_range("for_row_range: bad range");
    if (begin == end) return;
    if (is_snk_) {
      std::vector<int> s = colex_unrank(begin, n_, k_);
      for (std::int64_t j = begin; j < end; ++j) {
        fn(j, static_cast<const std::vector<int>&>(s));
        if (j + 1 < end) colex_next(s, n_);
      }
    } else {
      for (std::int64_t j = begin; j < end; ++j)
        fn(j, static_cast<const std::vector<int>&>(rows_[j]));
    }
  }

  nlohmann::json descriptor() const;
  static RelevanceMatrix from_descriptor(const nlohmann::json& desc);

  bool operator==(const RelevanceMatrix& other) const;

 private:
  RelevanceMatrix() = default;

  int n_ = 0;
  std::int64_t N_ = 0;
  bool is_snk_ = false;
  int k_ = 0;  // Snk only
  std::vector<std::vector<int>> rows_;  // Explicit only
};

}  // namespace marginlab
