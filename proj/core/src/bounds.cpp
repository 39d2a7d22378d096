#include "marginlab/bounds.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "marginlab/rng.hpp"

namespace marginlab {

nlohmann::json BoundReport::to_json() const {
  return nlohmann::json{{"name", name},
                        {"inputs", inputs},
                        {"value", value},
                        {"direction", direction},
                        {"notes", notes}};
}

double operator_norm(const Eigen::MatrixXd& M, double rel_tol) {
  if (M.size() == 0) throw std::invalid_argument("operator_norm: empty matrix");
  if (!(rel_tol > 0.0))
    throw std::invalid_argument("operator_norm: rel_tol must be positive");
  const Eigen::MatrixXd B =
      M.rows() <= M.cols() ? Eigen::MatrixXd(M * M.transpose())
                           : Eigen::MatrixXd(M.transpose() * M);
  const Eigen::Index n = B.rows();
  Rng rng(0x9E3779B97F4A7C15ull);
  Eigen::VectorXd v = rng.gaussian_vector(static_cast<int>(n));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd w = B * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

BoundReport spectral_bound(const RelevanceMatrix& A, const Eigen::MatrixXd& J) {
  const int n = A.docs();
  const std::int64_t N = A.rows();
  if (J.rows() != N || J.cols() != n)
    throw std::invalid_argument("spectral_bound: J must be N x n");
  A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      const bool relevant = p < S.size() && S[p] == i;
      if (relevant) ++p;
      const double v = J(j, i);
      if ((relevant && v < 0.0) || (!relevant && v > 0.0))
        throw std::invalid_argument(
            "spectral_bound: J sign-incompatible with A at (row " +
            std::to_string(j) + ", doc " + std::to_string(i) + ")");
    }
  });
  const double total = J.cwiseAbs().sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument(
        "spectral_bound: sum |J_ji| = " + std::to_string(total) +
        ", expected 1");

  BoundReport rep;
  rep.name = "spectral";
  rep.inputs = nlohmann::json{{"n", n}, {"N", N}};
  rep.value = operator_norm(J) *
              std::sqrt(static_cast<double>(N) * static_cast<double>(n));
  rep.direction = "upper-on-margin";
  rep.notes = "||J||_op sqrt(Nn) for the supplied dual witness";
  return rep;
}

Eigen::MatrixXd snk_spectral_J(int n, int k) {
  if (k < 1 || k >= n)
    throw std::invalid_argument("snk_spectral_J: need 1 <= k < n");
  const double N = static_cast<double>(binomial(n, k));
  const double root = 2.0 * std::sqrt(static_cast<double>(n - 1) * k * (n - k));
  const double y = 0.5 - 0.5 * (n - 2.0 * k) / (n - 2.0 * k + root);
  const double pos = y / (N * k);
  const double neg = -(1.0 - y) / (N * (n - k));
  const RelevanceMatrix A = RelevanceMatrix::snk(n, k);
  Eigen::MatrixXd J =
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(N), n, neg);
  A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
    for (int i : S) J(j, i) = pos;
  });
  return J;
}

Eigen::MatrixXd identity_spectral_J(int n) {
  if (n < 2) throw std::invalid_argument("identity_spectral_J: need n >= 2");
  const double den = static_cast<double>(n) * (3.0 * n - 4.0);
  return Eigen::MatrixXd::Identity(n, n) / (3.0 * n - 4.0) -
         2.0 * Eigen::MatrixXd::Ones(n, n) / den;
}

BoundReport weller_dim_bound(int n, int k, double m) {
  if (k < 1 || k > n)
    throw std::invalid_argument("weller_dim_bound: need 1 <= k <= n");
  if (!(m > 0.0)) throw std::invalid_argument("weller_dim_bound: need m > 0");
  const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                           std::lgamma(n - k + 1.0);
  BoundReport rep;
  rep.name = "weller";
  rep.inputs = nlohmann::json{{"n", n}, {"k", k}, {"m", m}};
  rep.value = log_binom / std::log1p(1.0 / m);
  rep.direction = "lower-on-dimension";
  rep.notes = "ln binom(n,k) / ln(1 + 1/m)";
  return rep;
}

BoundReport packing_dim_bound(int n, int k, double m, double C) {
  if (k < 1) throw std::invalid_argument("packing_dim_bound: need k >= 1");
  if (n < 3 * k)
    throw std::invalid_argument("packing_dim_bound: need n >= 3k");
  if (!(m > 0.0)) throw std::invalid_argument("packing_dim_bound: need m > 0");
  if (!(C > 0.0)) throw std::invalid_argument("packing_dim_bound: need C > 0");
  BoundReport rep;
  rep.name = "packing";
  rep.inputs = nlohmann::json{{"n", n}, {"k", k}, {"m", m}, {"C", C}};
  rep.value = C * k * std::log(static_cast<double>(n) / k) /
              std::log1p(2.0 / (m * std::sqrt(static_cast<double>(k))));
  rep.direction = "lower-on-dimension";
  rep.notes =
      "C k ln(n/k) / ln(1 + 2/(m sqrt(k))); C is an unspecified universal "
      "constant, caller-supplied";
  return rep;
}

DisjointFamily disjoint_family(int n, int s, std::uint64_t seed,
                               std::int64_t max_attempts) {
  if (s < 1 || s >= n)
    throw std::invalid_argument("disjoint_family: need 1 <= s < n");
  if (max_attempts < 1)
    throw std::invalid_argument("disjoint_family: need max_attempts >= 1");

  DisjointFamily out;
  out.target = static_cast<std::int64_t>(std::ceil(
      std::pow(static_cast<double>(n) / (4.0 * s), s / 2.0)));
  out.target = std::max<std::int64_t>(out.target, 1);

  Rng rng(seed);
  for (std::int64_t attempt = 0;
       attempt < max_attempts &&
       static_cast<std::int64_t>(out.sets.size()) < out.target;
       ++attempt) {
    // Floyd's distinct sampler for an s-subset of [0, n).
    std::set<int> chosen;
    for (int i = n - s; i < n; ++i) {
      const int t = static_cast<int>(rng.uniform_int(0, i));
      if (!chosen.insert(t).second) chosen.insert(i);
    }
    std::vector<int> cand(chosen.begin(), chosen.end());
    bool ok = true;
    for (const auto& kept : out.sets) {
      std::vector<int> inter;
      std::set_intersection(cand.begin(), cand.end(), kept.begin(),
                            kept.end(), std::back_inserter(inter));
      if (2 * static_cast<int>(inter.size()) >= s) {
        ok = false;
        break;
      }
    }
    if (ok) out.sets.push_back(std::move(cand));
  }
  out.complete = static_cast<std::int64_t>(out.sets.size()) >= out.target;
  return out;
}

nlohmann::json PackingAudit::to_json() const {
  return nlohmann::json{{"s", s},
                        {"family", family},
                        {"y_norms", y_norms},
                        {"min_pairwise_distance", min_pairwise_distance},
                        {"target_separation", target_separation},
                        {"family_size_target", family_size_target},
                        {"family_complete", family_complete},
                        {"pairs_compared", pairs_compared},
                        {"norm_violations", norm_violations},
                        {"separation_violations", separation_violations}};
}

PackingAudit packing_audit(const EmbeddingPair& E, double margin, int s,
                           std::uint64_t seed, std::int64_t max_attempts) {
  const RelevanceMatrix& A = E.matrix();
  if (!A.is_snk())
    throw std::invalid_argument("packing_audit: matrix must be S_{n,k}");
  if (!(margin > 0.0))
    throw std::invalid_argument("packing_audit: need a positive margin");
  const int n = A.docs();
  const int k = A.snk_k();
  if (s < 0) s = std::max(1, k / 8);
  if (s < 1 || s > 20)
    throw std::invalid_argument(
        "packing_audit: need 1 <= s <= 20 (exhaustive 2^s sign search)");
  if (s >= n) throw std::invalid_argument("packing_audit: need s < n");

  DisjointFamily fam = disjoint_family(n, s, seed, max_attempts);
  const Eigen::MatrixXd& V = E.doc_vectors();

  PackingAudit audit;
  audit.s = s;
  audit.family = fam.sets;
  audit.target_separation = margin * s;
  audit.family_size_target =
      std::pow(static_cast<double>(n) / (4.0 * s), s / 2.0);
  audit.family_complete = fam.complete;

  // Sign-minimized combinations y_T; first minimal mask wins. Mask bit i
  // set means sigma_i = -1.
  std::vector<Eigen::VectorXd> ys;
  std::vector<Eigen::VectorXd> xs;  // coefficient vectors in R^n
  for (const auto& T : fam.sets) {
    Eigen::VectorXd best_y;
    Eigen::VectorXd best_x;
    double best_norm2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << s); ++mask) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(V.rows());
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < s; ++i) {
        const double sigma = (mask >> i) & 1u ? -1.0 : 1.0;
        y += sigma * V.col(T[static_cast<std::size_t>(i)]);
        x[T[static_cast<std::size_t>(i)]] = sigma;
      }
      const double norm2 = y.squaredNorm();
      if (norm2 < best_norm2) {
        best_norm2 = norm2;
        best_y = std::move(y);
        best_x = std::move(x);
      }
    }
    audit.y_norms.push_back(std::sqrt(best_norm2));
    if (std::sqrt(best_norm2) > std::sqrt(static_cast<double>(s)) + 1e-9)
      ++audit.norm_violations;
    ys.push_back(std::move(best_y));
    xs.push_back(std::move(best_x));
  }

  audit.min_pairwise_distance = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ys.size(); ++a) {
    for (std::size_t b = a + 1; b < ys.size(); ++b) {
      // The separation guarantee only covers k-sparse coefficient differences.
      const int sparsity =
          static_cast<int>((xs[a] - xs[b]).cwiseAbs().unaryExpr([](double v) {
            return v > 0.0 ? 1.0 : 0.0;
          }).sum());
      if (sparsity > k) continue;
      ++audit.pairs_compared;
      const double dist = (ys[a] - ys[b]).norm();
      audit.min_pairwise_distance =
          std::min(audit.min_pairwise_distance, dist);
      if (dist < audit.target_separation - 1e-9)
        ++audit.separation_violations;
    }
  }
  if (audit.pairs_compared == 0)
    audit.min_pairwise_distance = 0.0;
  return audit;
}

double beta_tail_bound(int s, int r, double delta) {
  if (s < 2 || s > r - 2)
    throw std::invalid_argument("beta_tail_bound: need 2 <= s <= r-2");
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("beta_tail_bound: need delta in (0, 1]");
  const double log_value = std::lgamma(r / 2.0) - std::lgamma(s / 2.0) -
                           std::lgamma((r - s) / 2.0) +
                           (s / 2.0) * std::log(delta);
  return std::exp(log_value);
}

double beta_tail_montecarlo(int s, int r, double delta, std::int64_t trials,
                            std::uint64_t seed) {
  if (s < 2 || s > r - 2)
    throw std::invalid_argument("beta_tail_montecarlo: need 2 <= s <= r-2");
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("beta_tail_montecarlo: need delta in (0, 1]");
  if (trials < 1)
    throw std::invalid_argument("beta_tail_montecarlo: need trials >= 1");
  Rng rng(seed);
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd z = rng.sphere_vector(r);
    if (z.head(s).squaredNorm() <= delta) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

double gamma_ratio(double x, double y) {
  if (!(x >= 0.5) || !(y >= 0.5))
    throw std::invalid_argument("gamma_ratio: need x, y >= 1/2");
  return std::exp(
      (std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y)) / y);
}

}  // namespace marginlab
