#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <utility>

#include "marginlab/embedding.hpp"
#include "marginlab/relevance.hpp"

namespace marginlab {

struct KhatriRaoParams {
  int d = 0;        // requested dimension (r(r+1)/2 + 1 coordinates used)
  int r = 0;        // base sphere dimension floor((sqrt(8d-7)-1)/2)
  double delta = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  int retries = 0;  // attempts used (1 = first try succeeded)
};

struct RipParams {
  int d = 0;              // output dimension (inner dimension + 1)
  double delta3k = 0.0;   // assumed RIP constant driving the cap
  double delta3k_estimate = 0.0;  // sampled empirical estimate
  std::uint64_t seed = 0;
  double offsupport_cap = 0.0;
  int retries = 0;
};

// V_i = (sqrt(1-(4k)^{-1/2}) e_i, (4k)^{-1/4}); queries generator-backed.
// Positive pairs equal (1-(4k)^{-1/2})/sqrt(k) - (4k)^{-1/2}, negative
// pairs equal -(4k)^{-1/2}. Output dimension n+1. k=1 degenerates to a
// zero positive margin and is emitted with a warning.
EmbeddingPair simplex_baseline(const RelevanceMatrix& A);

// Moment-curve documents on the grid t_i = -1 + 2(i-1)/(n-1) and sign
// polynomials with roots at the midpoints of each row's sign changes.
// Output dimension 2k+1 where k is the largest row support size.
EmbeddingPair vandermonde(const RelevanceMatrix& A);

// Sphere vectors a_i lifted through vec(a a^T); queries are lifted span
// projectors. Requires d >= (k^2+5k+7)/2 and uniform k >= 2. Verifies all
// non-edge pairs against 1 - Delta, resampling everything on failure.
std::pair<EmbeddingPair, KhatriRaoParams> khatri_rao(const RelevanceMatrix& A,
                                                     int d,
                                                     std::uint64_t seed,
                                                     int max_retries = 20);

// Gaussian documents (entries N(0, 1/d)) with least-norm interpolator
// queries; off-support inner products checked against
// delta3k/((1-2*delta3k)*sqrt(k)), fresh matrix on failure. Output
// dimension d+1 after the bias lift coordinate (5/8)^{1/2} k^{-1/4}.
std::pair<EmbeddingPair, RipParams> gaussian_rip(const RelevanceMatrix& A,
                                                 int d, std::uint64_t seed,
                                                 int max_retries = 20,
                                                 double delta3k = 1.0 / 6.0);

enum class RipEstimateMode { Exhaustive, Sampled };

// delta_s = max over s-column submatrices of max(1 - sigma_min^2,
// sigma_max^2 - 1). Exhaustive mode enumerates all binom(n,s) subsets
// (subject to cap); sampled mode draws `count` random subsets and is a
// lower-bound estimate.
double rip_estimate(const Eigen::MatrixXd& V, int s,
                    RipEstimateMode mode = RipEstimateMode::Exhaustive,
                    std::int64_t count_or_cap = 200000,
                    std::uint64_t seed = 0);

// Generator factories used by the emb-v1 loader.
EmbeddingPair::QueryGenerator make_simplex_generator(const RelevanceMatrix& A);
EmbeddingPair::QueryGenerator make_vandermonde_generator(
    const RelevanceMatrix& A);
// Rebuilds from meta fields {seed, retry_used}; no verification loop.
EmbeddingPair rebuild_khatri_rao(const RelevanceMatrix& A,
                                 const nlohmann::json& meta);
EmbeddingPair rebuild_gaussian_rip(const RelevanceMatrix& A,
                                   const nlohmann::json& meta);

}  // namespace marginlab
