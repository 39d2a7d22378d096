#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "marginlab/relevance.hpp"

namespace marginlab {

// Unit-norm tolerance shared by every vector check in the library.
inline constexpr double kUnitNormTol = 1e-9;

// Exact or row-sampled scan over all pair inner products. best_tau is the
// midpoint maximizer of min(min_positive - tau, tau - max_negative).
// A matrix with no negative pairs reports max_negative = -1 (every inner
// product of unit vectors is >= -1, so the certificate stays sound) and
// witness indices -1.
struct MarginCertificate {
  double bias0_margin = 0.0;
  double best_tau = 0.0;
  double best_tau_margin = 0.0;
  double min_positive = 0.0;
  double max_negative = 0.0;
  std::int64_t min_positive_row = -1;
  int min_positive_doc = -1;
  std::int64_t max_negative_row = -1;
  int max_negative_doc = -1;
  bool exact = true;
  std::int64_t sampled_rows = 0;   // rows scanned in sampled mode
  std::uint64_t sample_seed = 0;

  nlohmann::json to_json() const;
};

struct CertifyOptions {
  bool sampled = false;
  std::int64_t sample_count = 0;
  std::uint64_t sample_seed = 0;
  int jobs = 1;
};

// Document vectors stored dense (column i is V_i); query vectors either
// dense (column j is U_j) or produced on demand by a deterministic
// generator from the row support. Vectors outside the unit-norm tolerance
// are renormalized on entry (zero vectors rejected).
class EmbeddingPair {
 public:
  using QueryGenerator =
      std::function<Eigen::VectorXd(const std::vector<int>&)>;

  EmbeddingPair(RelevanceMatrix matrix, Eigen::MatrixXd docs);

  void set_dense_queries(Eigen::MatrixXd queries);
  void set_query_generator(QueryGenerator gen);

  int dim() const { return static_cast<int>(docs_.rows()); }
  const RelevanceMatrix& matrix() const { return matrix_; }
  const Eigen::MatrixXd& doc_vectors() const { return docs_; }

  bool has_dense_queries() const { return dense_queries_.has_value(); }
  bool has_query_generator() const { return static_cast<bool>(generator_); }
  const Eigen::MatrixXd& dense_queries() const;

  // U_j. Dense queries are returned as stored; generator outputs are
  // normalized only when outside tolerance, so materializing queries and
  // re-reading them is bit-identical.
  Eigen::VectorXd query(std::int64_t j) const;
  Eigen::VectorXd query_for_support(const std::vector<int>& support) const;

  // Count of input vectors that needed renormalization (diagnostic).
  int renormalized_count() const { return renormalized_; }

  // Method/seed/parameter record, serialized verbatim into emb-v1 files.
  nlohmann::json meta;

 private:
  RelevanceMatrix matrix_;
  Eigen::MatrixXd docs_;  // d x n
  std::optional<Eigen::MatrixXd> dense_queries_;  // d x N
  QueryGenerator generator_;
  int renormalized_ = 0;
};

MarginCertificate certify(const EmbeddingPair& E,
                          const CertifyOptions& opts = {});

// Appends one coordinate that absorbs the relative bias tau, turning a
// margin-m relative-bias-tau embedding into a bias-0 embedding of margin
// >= m/(1+|tau|) in dimension d+1. m is recorded in meta only.
EmbeddingPair bias_lift(const EmbeddingPair& E, double tau, double margin);

// Evaluates generator-backed queries into a dense table (N <= cap).
EmbeddingPair materialize_queries(const EmbeddingPair& E,
                                  std::int64_t cap = 1000000);

// emb-v1 JSON file format. Save materializes queries (subject to cap) when
// the generator is not seed-rebuildable from meta. Load restores dense
// queries or rebuilds the generator recorded in meta.
void save_embedding(const EmbeddingPair& E, const std::string& path,
                    std::int64_t materialize_cap = 1000000);
EmbeddingPair load_embedding(const std::string& path);

}  // namespace marginlab
