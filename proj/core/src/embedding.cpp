#include "marginlab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <stdexcept>

#include "marginlab/parallel.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {

namespace {

// Renormalizes columns outside tolerance; returns how many were touched.
int normalize_columns(Eigen::MatrixXd& M, const char* what) {
  int fixed = 0;
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    const double norm = M.col(c).norm();
    if (!std::isfinite(norm) || norm < 1e-300)
      throw std::invalid_argument(std::string(what) +
                                  ": zero or non-finite vector");
    if (std::abs(norm - 1.0) > kUnitNormTol) {
      M.col(c) /= norm;
      ++fixed;
    }
  }
  return fixed;
}

void warn_renormalized(int fixed, const char* what) {
  if (fixed > 0)
    std::cerr << "[marginlab] renormalized " << fixed << " " << what
              << " outside unit-norm tolerance\n";
}

struct ScanBest {
  double min_pos = std::numeric_limits<double>::infinity();
  std::int64_t min_pos_row = -1;
  int min_pos_doc = -1;
  double max_neg = -std::numeric_limits<double>::infinity();
  std::int64_t max_neg_row = -1;
  int max_neg_doc = -1;
};

// Strict improvement keeps the first attaining pair in (row, doc) order,
// so merged results are independent of how rows were chunked.
void merge_best(ScanBest& into, const ScanBest& from) {
  if (from.min_pos < into.min_pos) {
    into.min_pos = from.min_pos;
    into.min_pos_row = from.min_pos_row;
    into.min_pos_doc = from.min_pos_doc;
  }
  if (from.max_neg > into.max_neg) {
    into.max_neg = from.max_neg;
    into.max_neg_row = from.max_neg_row;
    into.max_neg_doc = from.max_neg_doc;
  }
}

}  // namespace

nlohmann::json MarginCertificate::to_json() const {
  nlohmann::json j{
      {"bias0_margin", bias0_margin},
      {"best_tau", best_tau},
      {"best_tau_margin", best_tau_margin},
      {"min_positive", min_positive},
      {"max_negative", max_negative},
      {"witness_min_positive", {min_positive_row, min_positive_doc}},
      {"witness_max_negative", {max_negative_row, max_negative_doc}},
      {"mode", exact ? "exact" : "sampled"},
  };
  if (!exact) {
    j["sampled_rows"] = sampled_rows;
    j["sample_seed"] = sample_seed;
  }
  return j;
}

EmbeddingPair::EmbeddingPair(RelevanceMatrix matrix, Eigen::MatrixXd docs)
    : matrix_(std::move(matrix)), docs_(std::move(docs)) {
  if (docs_.cols() != matrix_.docs())
    throw std::invalid_argument("EmbeddingPair: docs count mismatch");
  if (docs_.rows() < 1)
    throw std::invalid_argument("EmbeddingPair: dimension must be >= 1");
  renormalized_ += normalize_columns(docs_, "document vectors");
  warn_renormalized(renormalized_, "document vectors");
}

void EmbeddingPair::set_dense_queries(Eigen::MatrixXd queries) {
  if (queries.cols() != matrix_.rows() || queries.rows() != docs_.rows())
    throw std::invalid_argument("set_dense_queries: shape mismatch");
  const int fixed = normalize_columns(queries, "query vectors");
  warn_renormalized(fixed, "query vectors");
  renormalized_ += fixed;
  dense_queries_ = std::move(queries);
}

void EmbeddingPair::set_query_generator(QueryGenerator gen) {
  if (!gen) throw std::invalid_argument("set_query_generator: empty generator");
  generator_ = std::move(gen);
}

const Eigen::MatrixXd& EmbeddingPair::dense_queries() const {
  if (!dense_queries_)
    throw std::logic_error("dense_queries: queries are generator-backed");
  return *dense_queries_;
}

Eigen::VectorXd EmbeddingPair::query(std::int64_t j) const {
  if (dense_queries_) {
    if (j < 0 || j >= dense_queries_->cols())
      throw std::out_of_range("query: bad row index");
    return dense_queries_->col(j);
  }
  return query_for_support(matrix_.row_support(j));
}

Eigen::VectorXd EmbeddingPair::query_for_support(
    const std::vector<int>& support) const {
  if (dense_queries_) {
    if (!matrix_.is_snk())
      throw std::logic_error(
          "query_for_support: dense explicit matrices must be addressed by "
          "row index");
    return query(colex_rank(support));
  }
  if (!generator_)
    throw std::logic_error("query: no dense queries and no generator");
  Eigen::VectorXd u = generator_(support);
  if (u.size() != docs_.rows())
    throw std::logic_error("query: generator dimension mismatch");
  const double norm = u.norm();
  if (!std::isfinite(norm) || norm < 1e-300)
    throw std::logic_error("query: generator produced a degenerate vector");
  if (std::abs(norm - 1.0) > kUnitNormTol) u /= norm;
  return u;
}

MarginCertificate certify(const EmbeddingPair& E, const CertifyOptions& opts) {
  const RelevanceMatrix& A = E.matrix();
  const std::int64_t N = A.rows();
  if (N == 0) throw std::invalid_argument("certify: empty matrix");
  if (!E.has_dense_queries() && !E.has_query_generator())
    throw std::invalid_argument("certify: embedding has no queries");
  const int n = A.docs();
  const Eigen::MatrixXd& V = E.doc_vectors();

  const auto scan_row = [&](ScanBest& b, std::int64_t j,
                            const std::vector<int>& S) {
    const Eigen::VectorXd u = E.has_dense_queries()
                                  ? Eigen::VectorXd(E.dense_queries().col(j))
                                  : E.query_for_support(S);
    const Eigen::VectorXd scores = V.transpose() * u;
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      const double v = scores[i];
      if (p < S.size() && S[p] == i) {
        if (v < b.min_pos) {
          b.min_pos = v;
          b.min_pos_row = j;
          b.min_pos_doc = i;
        }
        ++p;
      } else if (v > b.max_neg) {
        b.max_neg = v;
        b.max_neg_row = j;
        b.max_neg_doc = i;
      }
    }
  };

  std::vector<std::int64_t> sample;
  if (opts.sampled) {
    if (opts.sample_count < 1)
      throw std::invalid_argument("certify: sampled mode needs count >= 1");
    const std::int64_t count = std::min(opts.sample_count, N);
    // Floyd's algorithm: `count` distinct rows, uniform without replacement.
    Rng rng(opts.sample_seed);
    std::set<std::int64_t> chosen;
    for (std::int64_t i = N - count; i < N; ++i) {
      const std::int64_t t = rng.uniform_int(0, i);
      if (!chosen.insert(t).second) chosen.insert(i);
    }
    sample.assign(chosen.begin(), chosen.end());
  }

  const std::int64_t scan_count =
      opts.sampled ? static_cast<std::int64_t>(sample.size()) : N;
  const int jobs = std::max(opts.jobs, 1);
  std::vector<ScanBest> partial(
      static_cast<std::size_t>(std::min<std::int64_t>(jobs, scan_count)));

  parallel_chunks(scan_count, jobs,
                  [&](std::int64_t b, std::int64_t e, int chunk) {
                    ScanBest& best = partial[chunk];
                    if (opts.sampled) {
                      for (std::int64_t idx = b; idx < e; ++idx) {
                        const std::int64_t j = sample[idx];
                        scan_row(best, j, A.row_support(j));
                      }
                    } else {
                      A.for_row_range(b, e,
                                      [&](std::int64_t j,
                                          const std::vector<int>& S) {
                                        scan_row(best, j, S);
                                      });
                    }
                  });

  ScanBest best;
  for (const auto& p : partial) merge_best(best, p);

  MarginCertificate cert;
  cert.min_positive = best.min_pos;
  cert.min_positive_row = best.min_pos_row;
  cert.min_positive_doc = best.min_pos_doc;
  if (best.max_neg_row >= 0) {
    cert.max_negative = best.max_neg;
    cert.max_negative_row = best.max_neg_row;
    cert.max_negative_doc = best.max_neg_doc;
  } else {
    cert.max_negative = -1.0;  // no negative pairs scanned; vacuous bound
  }
  cert.best_tau = 0.5 * (cert.min_positive + cert.max_negative);
  cert.best_tau_margin = 0.5 * (cert.min_positive - cert.max_negative);
  cert.bias0_margin = std::min(cert.min_positive, -cert.max_negative);
  cert.exact = !opts.sampled;
  if (opts.sampled) {
    cert.sampled_rows = scan_count;
    cert.sample_seed = opts.sample_seed;
  }
  return cert;
}

EmbeddingPair bias_lift(const EmbeddingPair& E, double tau, double margin) {
  if (!(std::abs(tau) <= 1.0))
    throw std::invalid_argument("bias_lift: need |tau| <= 1");
  const int d = E.dim();
  const double scale = 1.0 / std::sqrt(1.0 + std::abs(tau));
  const double lift = std::sqrt(std::abs(tau) / (1.0 + std::abs(tau)));
  const double qsign = (tau >= 0.0) ? -1.0 : 1.0;

  Eigen::MatrixXd docs(d + 1, E.doc_vectors().cols());
  docs.topRows(d) = scale * E.doc_vectors();
  docs.row(d).setConstant(lift);

  EmbeddingPair out(E.matrix(), std::move(docs));
  if (E.has_dense_queries()) {
    Eigen::MatrixXd q(d + 1, E.dense_queries().cols());
    q.topRows(d) = scale * E.dense_queries();
    q.row(d).setConstant(qsign * lift);
    out.set_dense_queries(std::move(q));
  } else {
    out.set_query_generator(
        [base = E, scale, lift, qsign, d](const std::vector<int>& S) {
          Eigen::VectorXd u(d + 1);
          u.head(d) = scale * base.query_for_support(S);
          u[d] = qsign * lift;
          return u;
        });
  }
  out.meta = nlohmann::json{{"method", "bias-lift"},
                            {"tau", tau},
                            {"margin", margin},
                            {"base", E.meta}};
  return out;
}

EmbeddingPair materialize_queries(const EmbeddingPair& E, std::int64_t cap) {
  if (E.has_dense_queries()) return E;
  const std::int64_t N = E.matrix().rows();
  if (N > cap)
    throw std::invalid_argument(
        "materialize_queries: row count exceeds cap (" + std::to_string(N) +
        " > " + std::to_string(cap) + ")");
  Eigen::MatrixXd U(E.dim(), N);
  E.matrix().for_each_row([&](std::int64_t j, const std::vector<int>& S) {
    U.col(j) = E.query_for_support(S);
  });
  EmbeddingPair out(E.matrix(), E.doc_vectors());
  out.set_dense_queries(std::move(U));
  out.meta = E.meta;
  return out;
}

}  // namespace marginlab
