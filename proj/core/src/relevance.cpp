#include "marginlab/relevance.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

#include "marginlab/errors.hpp"

namespace marginlab {

namespace {

// binom with 0 for k > n; throws only on int64 overflow.
std::int64_t binom_or_zero(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= static_cast<unsigned>(n - k + i);
    r /= static_cast<unsigned>(i);  // exact: r is binom(n-k+i, i) here
    if (r > static_cast<unsigned __int128>(
                std::numeric_limits<std::int64_t>::max()))
      throw std::overflow_error("binomial: value exceeds int64 range");
  }
  return static_cast<std::int64_t>(r);
}

}  // namespace

std::int64_t binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n)
    throw std::invalid_argument("binomial: need 0 <= k <= n");
  return binom_or_zero(n, k);
}

std::vector<int> colex_unrank(std::int64_t j, int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("colex_unrank: bad k");
  if (j < 0 || j >= binom_or_zero(n, k))
    throw std::out_of_range("colex_unrank: rank out of range");
  std::vector<int> s(k);
  std::int64_t rem = j;
  int c = n - 1;
  for (int i = k; i >= 1; --i) {
    while (binom_or_zero(c, i) > rem) --c;
    s[i - 1] = c;
    rem -= binom_or_zero(c, i);
    --c;
  }
  return s;
}

std::int64_t colex_rank(const std::vector<int>& support) {
  std::int64_t r = 0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i > 0 && support[i] <= support[i - 1])
      throw std::invalid_argument("colex_rank: support not increasing");
    r += binom_or_zero(support[i], static_cast<int>(i) + 1);
  }
  return r;
}

bool colex_next(std::vector<int>& support, int n) {
  const int k = static_cast<int>(support.size());
  for (int i = 0; i < k; ++i) {
    const int limit = (i + 1 < k) ? support[i + 1] : n;
    if (support[i] + 1 < limit) {
      ++support[i];
      for (int t = 0; t < i; ++t) support[t] = t;
      return true;
    }
  }
  return false;
}

RelevanceMatrix RelevanceMatrix::snk(int n, int k) {
  if (n < 1 || k < 1 || k > n)
    throw std::invalid_argument("snk: need 1 <= k <= n");
  RelevanceMatrix m;
  m.n_ = n;
  m.k_ = k;
  m.is_snk_ = true;
  m.N_ = binomial(n, k);
  return m;
}

RelevanceMatrix RelevanceMatrix::explicit_rows(
    int n, std::vector<std::vector<int>> supports) {
  if (n < 1) throw std::invalid_argument("explicit_rows: need n >= 1");
  for (const auto& s : supports) {
    if (s.empty())
      throw std::invalid_argument("explicit_rows: empty support");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0 || s[i] >= n)
        throw std::invalid_argument("explicit_rows: index out of [0, n)");
      if (i > 0 && s[i] <= s[i - 1])
        throw std::invalid_argument(
            "explicit_rows: support not strictly increasing");
    }
  }
  std::set<std::vector<int>> uniq(supports.begin(), supports.end());
  if (uniq.size() != supports.size())
    throw std::invalid_argument("explicit_rows: duplicate supports");
  RelevanceMatrix m;
  m.n_ = n;
  m.N_ = static_cast<std::int64_t>(supports.size());
  m.rows_ = std::move(supports);
  return m;
}

int RelevanceMatrix::snk_k() const {
  if (!is_snk_) throw std::logic_error("snk_k: not an Snk matrix");
  return k_;
}

std::optional<int> RelevanceMatrix::uniform_k() const {
  if (is_snk_) return k_;
  if (rows_.empty()) return std::nullopt;
  const auto k = rows_.front().size();
  for (const auto& s : rows_)
    if (s.size() != k) return std::nullopt;
  return static_cast<int>(k);
}

int RelevanceMatrix::require_uniform_k(const char* op) const {
  const auto k = uniform_k();
  if (!k)
    throw std::invalid_argument(std::string(op) +
                                ": matrix must have uniform row sparsity");
  return *k;
}

int RelevanceMatrix::max_support_size() const {
  if (is_snk_) return k_;
  std::size_t k = 0;
  for (const auto& s : rows_) k = std::max(k, s.size());
  return static_cast<int>(k);
}

std::vector<int> RelevanceMatrix::row_support(std::int64_t j) const {
  if (j < 0 || j >= N_) throw std::out_of_range("row_support: bad row index");
  if (is_snk_) return colex_unrank(j, n_, k_);
  return rows_[j];
}

nlohmann::json RelevanceMatrix::descriptor() const {
  if (is_snk_) return nlohmann::json{{"type", "snk"}, {"n", n_}, {"k", k_}};
  return nlohmann::json{{"type", "explicit"}, {"n", n_}, {"rows", rows_}};
}

RelevanceMatrix RelevanceMatrix::from_descriptor(const nlohmann::json& desc) {
  if (!desc.is_object() || !desc.contains("type") ||
      !desc["type"].is_string())
    throw file_format_error("matrix descriptor: missing string field 'type'");
  const std::string type = desc["type"].get<std::string>();
  if (type == "snk") {
    if (!desc.contains("n") || !desc.contains("k") ||
        !desc["n"].is_number_integer() || !desc["k"].is_number_integer())
      throw file_format_error("snk descriptor: need integer fields 'n', 'k'");
    return snk(desc["n"].get<int>(), desc["k"].get<int>());
  }
  if (type == "explicit") {
    if (!desc.contains("n") || !desc["n"].is_number_integer() ||
        !desc.contains("rows") || !desc["rows"].is_array())
      throw file_format_error(
          "explicit descriptor: need integer 'n' and array 'rows'");
    std::vector<std::vector<int>> rows;
    for (const auto& r : desc["rows"]) {
      if (!r.is_array())
        throw file_format_error("explicit descriptor: row is not an array");
      rows.push_back(r.get<std::vector<int>>());
    }
    return explicit_rows(desc["n"].get<int>(), std::move(rows));
  }
  throw file_format_error("matrix descriptor: unknown type '" + type + "'");
}

bool RelevanceMatrix::operator==(const RelevanceMatrix& other) const {
  if (is_snk_ != other.is_snk_ || n_ != other.n_ || N_ != other.N_)
    return false;
  if (is_snk_) return k_ == other.k_;
  return rows_ == other.rows_;
}

}  // namespace marginlab
