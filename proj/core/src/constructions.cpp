#include "marginlab/constructions.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <set>
#include <stdexcept>

#include "marginlab/errors.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {

namespace {

// Isometric vectorization of a symmetric r x r matrix: diagonal entries,
// then sqrt(2) * upper-triangle entries; <vec(M1),vec(M2)> = <M1,M2>_F.
Eigen::VectorXd sym_vec(const Eigen::MatrixXd& M) {
  const int r = static_cast<int>(M.rows());
  Eigen::VectorXd v(r * (r + 1) / 2);
  int idx = 0;
  for (int i = 0; i < r; ++i) v[idx++] = M(i, i);
  const double s2 = std::sqrt(2.0);
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) v[idx++] = s2 * M(i, j);
  return v;
}

Eigen::MatrixXd pick_columns(const Eigen::MatrixXd& M,
                             const std::vector<int>& idx) {
  Eigen::MatrixXd B(M.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) B.col(c) = M.col(idx[c]);
  return B;
}

// ---- Khatri-Rao internals ----

int kr_base_dim(int d) {
  return static_cast<int>(
      std::floor((std::sqrt(8.0 * d - 7.0) - 1.0) / 2.0));
}

struct KrDerived {
  int r;
  int m;  // r(r+1)/2
  double delta;
  double beta;
};

KrDerived kr_derive(const RelevanceMatrix& A, int d, int k) {
  const int n = A.docs();
  const std::int64_t N = A.rows();
  KrDerived out;
  out.r = kr_base_dim(d);
  out.m = out.r * (out.r + 1) / 2;
  // d >= (k^2+5k+7)/2 forces r >= k+2 and m+1 <= d.
  const double log_delta =
      (2.0 / (out.r - k)) *
      (std::lgamma(k / 2.0) + std::lgamma((out.r - k) / 2.0) -
       std::log(2.0 * static_cast<double>(N) * (n - k)) -
       std::lgamma(out.r / 2.0));
  out.delta = std::exp(log_delta);
  out.beta = std::sqrt(2.0 * std::sqrt(static_cast<double>(k)) /
                       (2.0 * (std::sqrt(static_cast<double>(k)) + 1.0) -
                        out.delta));
  return out;
}

// Sphere directions for one attempt; the (seed, attempt) pair fully
// determines the sample so files can be rebuilt.
Eigen::MatrixXd kr_sample_dirs(int r, int n, std::uint64_t seed,
                               int attempt) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
  Eigen::MatrixXd dirs(r, n);
  for (int i = 0; i < n; ++i) dirs.col(i) = rng.sphere_vector(r);
  return dirs;
}

// Orthonormal basis of the support columns' span; false when numerically
// rank-deficient (rank tolerance 1e-10).
bool kr_support_basis(const Eigen::MatrixXd& dirs, const std::vector<int>& S,
                      Eigen::MatrixXd& Q) {
  const int k = static_cast<int>(S.size());
  const Eigen::MatrixXd B = pick_columns(dirs, S);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return false;
  Q = qr.householderQ() * Eigen::MatrixXd::Identity(dirs.rows(), k);
  return true;
}

EmbeddingPair kr_assemble(const RelevanceMatrix& A,
                          std::shared_ptr<const Eigen::MatrixXd> dirs,
                          const KrDerived& der, int d, int k) {
  const int n = A.docs();
  const double beta = der.beta;
  const double tail = std::sqrt(1.0 - beta * beta);
  const int m = der.m;
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(d, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd a = dirs->col(i);
    V.col(i).head(m) = beta * sym_vec(a * a.transpose());
    V(m, i) = tail;
  }
  EmbeddingPair E(A, std::move(V));
  const double qscale = beta / std::sqrt(static_cast<double>(k));
  E.set_query_generator([dirs, qscale, tail, d, m,
                         k](const std::vector<int>& S) {
    Eigen::MatrixXd Q;
    if (static_cast<int>(S.size()) != k || !kr_support_basis(*dirs, S, Q))
      throw std::logic_error("khatri-rao query: degenerate support basis");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
    u.head(m) = qscale * sym_vec(Q * Q.transpose());
    u[m] = -tail;
    return u;
  });
  return E;
}

// ---- Gaussian-RIP internals ----

Eigen::MatrixXd rip_sample_docs(int d, int n, std::uint64_t seed,
                                int attempt) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
  Eigen::MatrixXd Vt(d, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < d; ++r) Vt(r, i) = scale * rng.gaussian();
  return Vt;
}

// Least-norm interpolator of c = (1/sqrt(k)) 1 on the support columns;
// false when the support Gram is numerically singular.
bool rip_interpolator(const Eigen::MatrixXd& Vt, const std::vector<int>& S,
                      Eigen::VectorXd& u) {
  const Eigen::MatrixXd B = pick_columns(Vt, S);
  const Eigen::MatrixXd G = B.transpose() * B;
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(S.size()),
      1.0 / std::sqrt(static_cast<double>(S.size())));
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd w = ldlt.solve(c);
  if ((G * w - c).norm() > 1e-8) return false;
  u = B * w;
  return true;
}

EmbeddingPair rip_assemble(const RelevanceMatrix& A,
                           std::shared_ptr<const Eigen::MatrixXd> Vt, int k) {
  const int d = static_cast<int>(Vt->rows());
  const int n = A.docs();
  const double lift =
      std::sqrt(5.0 / 8.0) * std::pow(static_cast<double>(k), -0.25);
  Eigen::MatrixXd V(d + 1, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd col(d + 1);
    col.head(d) = Vt->col(i);
    col[d] = lift;
    V.col(i) = col / col.norm();
  }
  EmbeddingPair E(A, std::move(V));
  E.set_query_generator([Vt, lift, d](const std::vector<int>& S) {
    Eigen::VectorXd ut;
    if (!rip_interpolator(*Vt, S, ut))
      throw std::logic_error("gaussian-rip query: singular support Gram");
    Eigen::VectorXd u(d + 1);
    u.head(d) = ut;
    u[d] = -lift;
    u /= u.norm();
    return u;
  });
  return E;
}

}  // namespace

EmbeddingPair simplex_baseline(const RelevanceMatrix& A) {
  const int k = A.require_uniform_k("simplex_baseline");
  const int n = A.docs();
  const double lift2 = 1.0 / std::sqrt(4.0 * k);        // (4k)^{-1/2}
  const double lift = std::sqrt(lift2);                 // (4k)^{-1/4}
  const double body = std::sqrt(1.0 - lift2);
  if (k == 1)
    std::cerr << "[marginlab] simplex baseline with k=1 has zero positive "
                 "margin\n";
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n + 1, n);
  for (int i = 0; i < n; ++i) {
    V(i, i) = body;
    V(n, i) = lift;
  }
  EmbeddingPair E(A, std::move(V));
  E.set_query_generator(make_simplex_generator(A));
  E.meta = nlohmann::json{{"method", "simplex"}, {"k", k}};
  return E;
}

EmbeddingPair::QueryGenerator make_simplex_generator(
    const RelevanceMatrix& A) {
  const int k = A.require_uniform_k("simplex_baseline");
  const int n = A.docs();
  const double lift2 = 1.0 / std::sqrt(4.0 * k);
  const double lift = std::sqrt(lift2);
  const double body = std::sqrt(1.0 - lift2);
  const double coord = body / std::sqrt(static_cast<double>(k));
  return [n, k, coord, lift](const std::vector<int>& S) {
    if (static_cast<int>(S.size()) != k)
      throw std::logic_error("simplex query: support size mismatch");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
    for (int i : S) u[i] = coord;
    u[n] = -lift;
    return u;
  };
}

EmbeddingPair vandermonde(const RelevanceMatrix& A) {
  const int n = A.docs();
  if (n < 2) throw std::invalid_argument("vandermonde: need n >= 2");
  const int k = A.max_support_size();
  const int dim = 2 * k + 1;
  Eigen::MatrixXd V(dim, n);
  for (int i = 0; i < n; ++i) {
    const double t = -1.0 + 2.0 * i / (n - 1);
    double p = 1.0;
    for (int c = 0; c < dim; ++c) {
      V(c, i) = p;
      p *= t;
    }
    V.col(i).normalize();
  }
  EmbeddingPair E(A, std::move(V));
  E.set_query_generator(make_vandermonde_generator(A));
  E.meta = nlohmann::json{{"method", "vandermonde"}, {"k", k}};
  return E;
}

EmbeddingPair::QueryGenerator make_vandermonde_generator(
    const RelevanceMatrix& A) {
  const int n = A.docs();
  if (n < 2) throw std::invalid_argument("vandermonde: need n >= 2");
  const int k = A.max_support_size();
  const int dim = 2 * k + 1;
  return [n, dim](const std::vector<int>& S) {
    std::vector<char> rel(static_cast<std::size_t>(n), 0);
    for (int i : S) rel[static_cast<std::size_t>(i)] = 1;
    // Midpoint roots at every sign boundary of the row pattern.
    std::vector<double> roots;
    for (int i = 0; i + 1 < n; ++i)
      if (rel[i] != rel[i + 1]) {
        const double ti = -1.0 + 2.0 * i / (n - 1);
        const double tn = -1.0 + 2.0 * (i + 1) / (n - 1);
        roots.push_back(0.5 * (ti + tn));
      }
    if (static_cast<int>(roots.size()) + 1 > dim)
      throw std::logic_error(
          "vandermonde query: row has more sign changes than the degree "
          "budget");
    // p(s) = C * prod (root - s), C matching the first document's side.
    std::vector<double> coeff{rel[0] ? 1.0 : -1.0};
    for (double root : roots) {
      std::vector<double> next(coeff.size() + 1, 0.0);
      for (std::size_t c = 0; c < coeff.size(); ++c) {
        next[c] += root * coeff[c];
        next[c + 1] -= coeff[c];
      }
      coeff = std::move(next);
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
    for (std::size_t c = 0; c < coeff.size(); ++c)
      u[static_cast<Eigen::Index>(c)] = coeff[c];
    return Eigen::VectorXd(u / u.norm());
  };
}

std::pair<EmbeddingPair, KhatriRaoParams> khatri_rao(const RelevanceMatrix& A,
                                                     int d,
                                                     std::uint64_t seed,
                                                     int max_retries) {
  const int k = A.require_uniform_k("khatri_rao");
  const int n = A.docs();
  if (k < 2) throw std::invalid_argument("khatri_rao: need uniform k >= 2");
  if (n <= k)
    throw std::invalid_argument(
        "khatri_rao: need n > k (no negative pairs otherwise)");
  if (2LL * d < 1LL * k * k + 5LL * k + 7)
    throw std::invalid_argument(
        "khatri_rao: need d >= (k^2+5k+7)/2 = " +
        std::to_string((1LL * k * k + 5 * k + 7 + 1) / 2));
  if (max_retries < 1)
    throw std::invalid_argument("khatri_rao: need max_retries >= 1");

  const KrDerived der = kr_derive(A, d, k);
  if (!(der.delta > 0.0 && der.delta <= 1.0))
    throw std::logic_error("khatri_rao: Delta outside (0, 1]");

  double worst_val = -1.0;
  std::int64_t worst_row = -1;
  int worst_doc = -1;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto dirs = std::make_shared<const Eigen::MatrixXd>(
        kr_sample_dirs(der.r, n, seed, attempt));
    bool ok = true;
    A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
      Eigen::MatrixXd Q;
      if (!kr_support_basis(*dirs, S, Q)) {
        ok = false;  // dependent support vectors: resample
        return;
      }
      // ||P a_i||^2 for all documents at once.
      const Eigen::VectorXd norms2 =
          (Q.transpose() * (*dirs)).colwise().squaredNorm();
      std::size_t p = 0;
      for (int i = 0; i < n; ++i) {
        if (p < S.size() && S[p] == i) {
          ++p;
          continue;
        }
        if (norms2[i] > 1.0 - der.delta) {
          ok = false;
          if (norms2[i] > worst_val) {
            worst_val = norms2[i];
            worst_row = j;
            worst_doc = i;
          }
        }
      }
    });
    if (!ok) continue;

    EmbeddingPair E = kr_assemble(A, dirs, der, d, k);
    E.meta = nlohmann::json{{"method", "khatri-rao"},
                            {"seed", seed},
                            {"retry_used", attempt},
                            {"d", d},
                            {"r", der.r},
                            {"delta", der.delta},
                            {"beta", der.beta}};
    KhatriRaoParams params{d, der.r, der.delta, der.beta, seed, attempt + 1};
    return {std::move(E), params};
  }
  throw construction_error(
      "khatri_rao: non-edge verification failed on all " +
          std::to_string(max_retries) + " attempts; worst pair (row " +
          std::to_string(worst_row) + ", doc " + std::to_string(worst_doc) +
          ") has ||P a||^2 = " + std::to_string(worst_val) + " > 1 - Delta",
      worst_row, worst_doc, worst_val);
}

EmbeddingPair rebuild_khatri_rao(const RelevanceMatrix& A,
                                 const nlohmann::json& meta) {
  if (!meta.contains("seed") || !meta.contains("retry_used") ||
      !meta.contains("d"))
    throw file_format_error(
        "khatri-rao meta: need fields 'seed', 'retry_used', 'd'");
  const int d = meta["d"].get<int>();
  const int k = A.require_uniform_k("khatri_rao");
  const KrDerived der = kr_derive(A, d, k);
  auto dirs = std::make_shared<const Eigen::MatrixXd>(
      kr_sample_dirs(der.r, A.docs(), meta["seed"].get<std::uint64_t>(),
                     meta["retry_used"].get<int>()));
  EmbeddingPair E = kr_assemble(A, dirs, der, d, k);
  E.meta = meta;
  return E;
}

std::pair<EmbeddingPair, RipParams> gaussian_rip(const RelevanceMatrix& A,
                                                 int d, std::uint64_t seed,
                                                 int max_retries,
                                                 double delta3k) {
  const int k = A.require_uniform_k("gaussian_rip");
  const int n = A.docs();
  if (d < 2) throw std::invalid_argument("gaussian_rip: need d >= 2");
  if (d < k)
    throw std::invalid_argument(
        "gaussian_rip: need d >= k (support Gram is singular otherwise)");
  if (!(delta3k > 0.0 && delta3k <= 1.0 / 3.0))
    throw std::invalid_argument("gaussian_rip: need delta3k in (0, 1/3]");
  if (max_retries < 1)
    throw std::invalid_argument("gaussian_rip: need max_retries >= 1");

  const double cap =
      delta3k / ((1.0 - 2.0 * delta3k) * std::sqrt(static_cast<double>(k)));
  double worst_val = -1.0;
  std::int64_t worst_row = -1;
  int worst_doc = -1;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto Vt = std::make_shared<const Eigen::MatrixXd>(
        rip_sample_docs(d, n, seed, attempt));
    bool ok = true;
    A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
      Eigen::VectorXd u;
      if (!rip_interpolator(*Vt, S, u)) {
        ok = false;
        return;
      }
      const Eigen::VectorXd scores = Vt->transpose() * u;
      std::size_t p = 0;
      for (int i = 0; i < n; ++i) {
        if (p < S.size() && S[p] == i) {
          ++p;
          continue;
        }
        if (std::abs(scores[i]) > cap) {
          ok = false;
          if (std::abs(scores[i]) > worst_val) {
            worst_val = std::abs(scores[i]);
            worst_row = j;
            worst_doc = i;
          }
        }
      }
    });
    if (!ok) continue;

    const double estimate =
        rip_estimate(*Vt, std::min(3 * k, n), RipEstimateMode::Sampled, 200,
                     derive_seed(seed, 0x524950u));
    EmbeddingPair E = rip_assemble(A, Vt, k);
    E.meta = nlohmann::json{{"method", "gaussian-rip"},
                            {"seed", seed},
                            {"retry_used", attempt},
                            {"d_inner", d},
                            {"delta3k", delta3k},
                            {"offsupport_cap", cap},
                            {"delta3k_estimate", estimate}};
    RipParams params{d, delta3k, estimate, seed, cap, attempt + 1};
    return {std::move(E), params};
  }
  throw construction_error(
      "gaussian_rip: off-support check failed on all " +
          std::to_string(max_retries) + " attempts; worst pair (row " +
          std::to_string(worst_row) + ", doc " + std::to_string(worst_doc) +
          ") has |<U,V>| = " + std::to_string(worst_val) + " > " +
          std::to_string(cap),
      worst_row, worst_doc, worst_val);
}

EmbeddingPair rebuild_gaussian_rip(const RelevanceMatrix& A,
                                   const nlohmann::json& meta) {
  if (!meta.contains("seed") || !meta.contains("retry_used") ||
      !meta.contains("d_inner"))
    throw file_format_error(
        "gaussian-rip meta: need fields 'seed', 'retry_used', 'd_inner'");
  const int k = A.require_uniform_k("gaussian_rip");
  auto Vt = std::make_shared<const Eigen::MatrixXd>(
      rip_sample_docs(meta["d_inner"].get<int>(), A.docs(),
                      meta["seed"].get<std::uint64_t>(),
                      meta["retry_used"].get<int>()));
  EmbeddingPair E = rip_assemble(A, Vt, k);
  E.meta = meta;
  return E;
}

double rip_estimate(const Eigen::MatrixXd& V, int s, RipEstimateMode mode,
                    std::int64_t count_or_cap, std::uint64_t seed) {
  const int n = static_cast<int>(V.cols());
  if (s < 1 || s > n)
    throw std::invalid_argument("rip_estimate: need 1 <= s <= n");
  if (count_or_cap < 1)
    throw std::invalid_argument("rip_estimate: need a positive count/cap");

  const auto subset_delta = [&](const std::vector<int>& S) {
    const Eigen::MatrixXd B = pick_columns(V, S);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B.transpose() * B);
    const auto& ev = es.eigenvalues();
    return std::max(1.0 - ev(0), ev(ev.size() - 1) - 1.0);
  };

  double delta = 0.0;
  if (mode == RipEstimateMode::Exhaustive) {
    std::int64_t total;
    try {
      total = binomial(n, s);
    } catch (const std::overflow_error&) {
      throw std::invalid_argument("rip_estimate: subset count exceeds cap");
    }
    if (total > count_or_cap)
      throw std::invalid_argument("rip_estimate: subset count exceeds cap (" +
                                  std::to_string(total) + ")");
    std::vector<int> S(s);
    for (int i = 0; i < s; ++i) S[i] = i;
    for (std::int64_t idx = 0; idx < total; ++idx) {
      delta = std::max(delta, subset_delta(S));
      if (idx + 1 < total) colex_next(S, n);
    }
  } else {
    Rng rng(seed);
    for (std::int64_t draw = 0; draw < count_or_cap; ++draw) {
      std::set<int> chosen;
      for (int i = n - s; i < n; ++i) {
        const int t = static_cast<int>(rng.uniform_int(0, i));
        if (!chosen.insert(t).second) chosen.insert(i);
      }
      std::vector<int> S(chosen.begin(), chosen.end());
      delta = std::max(delta, subset_delta(S));
    }
  }
  return delta;
}

}  // namespace marginlab
