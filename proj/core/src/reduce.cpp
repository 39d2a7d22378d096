#include "marginlab/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "marginlab/rng.hpp"

namespace marginlab {

MnpResult min_norm_point(const Eigen::MatrixXd& points, double tol,
                         std::int64_t max_iter) {
  const int n = static_cast<int>(points.cols());
  const int d = static_cast<int>(points.rows());
  if (n == 0 || d == 0)
    throw std::invalid_argument("min_norm_point: empty input");
  if (!points.allFinite())
    throw std::invalid_argument("min_norm_point: non-finite input");
  if (!(tol > 0.0))
    throw std::invalid_argument("min_norm_point: tol must be positive");
  if (max_iter < 0) max_iter = 100LL * n;

  int v0 = 0;
  points.colwise().squaredNorm().minCoeff(&v0);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  lambda[v0] = 1.0;
  Eigen::VectorXd x = points.col(v0);

  std::int64_t it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd scores = points.transpose() * x;
    int fw = 0;
    const double fw_val = scores.minCoeff(&fw);
    const double xx = x.squaredNorm();
    if (xx - fw_val <= tol) break;

    // Strongest away vertex inside the active set.
    int aw = -1;
    double aw_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      if (lambda[i] > 0.0 && scores[i] > aw_val) {
        aw_val = scores[i];
        aw = i;
      }

    const double fw_gain = xx - fw_val;
    const double aw_gain = aw_val - xx;
    Eigen::VectorXd dir;
    double gamma_max;
    bool away = false;
    if (fw_gain >= aw_gain || lambda[aw] >= 1.0) {
      dir = points.col(fw) - x;
      gamma_max = 1.0;
    } else {
      away = true;
      dir = x - points.col(aw);
      gamma_max = lambda[aw] / (1.0 - lambda[aw]);
    }
    const double dd = dir.squaredNorm();
    if (dd <= 0.0) break;
    const double gamma = std::clamp(-x.dot(dir) / dd, 0.0, gamma_max);
    if (away) {
      lambda *= (1.0 + gamma);
      lambda[aw] -= gamma;
      if (lambda[aw] < 1e-15) lambda[aw] = 0.0;
    } else {
      lambda *= (1.0 - gamma);
      lambda[fw] += gamma;
    }
    x += gamma * dir;
    // Drift cleanup: weights are authoritative.
    if ((it & 31) == 31) x = points * lambda;
  }

  MnpResult res;
  x = points * lambda;
  res.weights = std::move(lambda);
  res.norm_at_solution = x.norm();
  if (res.norm_at_solution > 0.0) {
    res.direction = x / res.norm_at_solution;
  } else {
    res.direction = Eigen::VectorXd::Zero(d);
    res.direction[0] = 1.0;  // any unit vector certifies soundly
  }
  const Eigen::VectorXd final_scores = points.transpose() * res.direction;
  res.certified = final_scores.minCoeff();
  res.gap = x.squaredNorm() - (points.transpose() * x).minCoeff();
  res.iterations = it;
  return res;
}

EmbeddingPair::QueryGenerator make_mnp_generator(
    std::shared_ptr<const Eigen::MatrixXd> docs, double tol) {
  if (!docs) throw std::invalid_argument("make_mnp_generator: null docs");
  return [docs, tol](const std::vector<int>& S) {
    Eigen::MatrixXd signed_docs = -(*docs);
    for (int i : S) signed_docs.col(i) = docs->col(i);
    MnpResult r = min_norm_point(signed_docs, tol);
    return r.direction;
  };
}

std::int64_t theory_T(double margin, double eps) {
  if (!(margin > 0.0)) throw std::invalid_argument("theory_T: margin <= 0");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("theory_T: eps outside (0,1)");
  return static_cast<std::int64_t>(
      std::ceil(128.0 / (margin * margin * eps * eps)));
}

std::int64_t theory_dim(std::int64_t n, double margin, double eps) {
  if (n < 1) throw std::invalid_argument("theory_dim: n < 1");
  const double T = static_cast<double>(theory_T(margin, eps));
  const double half = eps / 2.0;
  return static_cast<std::int64_t>(
      std::ceil(32.0 * T * std::log(2.0 * static_cast<double>(n)) /
                (half * half)));
}

Eigen::MatrixXd jl_project(const Eigen::MatrixXd& X, int d_out,
                           std::uint64_t seed) {
  if (d_out < 1) throw std::invalid_argument("jl_project: d_out < 1");
  const int D = static_cast<int>(X.rows());
  Rng rng(seed);
  Eigen::MatrixXd Pi(d_out, D);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_out));
  for (int c = 0; c < D; ++c)
    for (int r = 0; r < d_out; ++r) Pi(r, c) = scale * rng.gaussian();
  return Pi * X;
}

namespace {

void check_simplex_weights(const Eigen::VectorXd& w, Eigen::Index n_points) {
  if (w.size() != n_points)
    throw std::invalid_argument("maurey_sample: weights size mismatch");
  if (!w.allFinite() || w.minCoeff() < 0.0)
    throw std::invalid_argument("maurey_sample: weights must be non-negative");
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("maurey_sample: weights must sum to 1");
}

}  // namespace

std::pair<Eigen::VectorXd, double> maurey_sample(const Eigen::MatrixXd& points,
                                                 const Eigen::VectorXd& weights,
                                                 std::int64_t T,
                                                 std::uint64_t seed) {
  check_simplex_weights(weights, points.cols());
  if (T < 1) throw std::invalid_argument("maurey_sample: T < 1");
  if (points.colwise().norm().maxCoeff() > 1.0 + kUnitNormTol)
    throw std::invalid_argument("maurey_sample: points must have norm <= 1");

  const int n = static_cast<int>(points.cols());
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += weights[i];
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  cdf.back() = 1.0;

  Rng rng(seed);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(points.rows());
  for (std::int64_t t = 0; t < T; ++t) {
    const double u = rng.uniform();
    const auto itp = std::upper_bound(cdf.begin(), cdf.end(), u);
    const int idx = std::min<int>(
        static_cast<int>(std::distance(cdf.begin(), itp)), n - 1);
    avg += points.col(idx);
  }
  avg /= static_cast<double>(T);
  const double dist = (avg - points * weights).norm();
  return {avg, dist};
}

Eigen::VectorXd maurey_sample_retry(const Eigen::MatrixXd& points,
                                    const Eigen::VectorXd& weights,
                                    std::int64_t T, std::uint64_t seed,
                                    int max_retries) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(T));
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto [avg, dist] = maurey_sample(
        points, weights, T, derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    if (dist <= bound) return avg;
  }
  throw std::runtime_error(
      "maurey_sample_retry: no draw within 1/sqrt(T) after " +
      std::to_string(max_retries) + " attempts");
}

nlohmann::json ReduceReport::to_json() const {
  return nlohmann::json{{"input_margin", input_margin},
                        {"target_margin", target_margin},
                        {"certified_margin", certified_margin},
                        {"eps", eps},
                        {"T", T},
                        {"d_out", d_out},
                        {"identity_shortcut", identity_shortcut},
                        {"below_target", below_target},
                        {"seed", seed},
                        {"seed_used", seed_used},
                        {"attempts", attempts},
                        {"attempt_margins", attempt_margins}};
}

std::pair<EmbeddingPair, ReduceReport> reduce_embedding(
    const EmbeddingPair& E, const ReduceParams& params) {
  if (!(params.eps > 0.0 && params.eps < 1.0))
    throw std::invalid_argument("reduce_embedding: eps outside (0,1)");
  if (params.max_retries < 1)
    throw std::invalid_argument("reduce_embedding: max_retries < 1");

  CertifyOptions copts;
  copts.jobs = params.jobs;
  const MarginCertificate input_cert = certify(E, copts);
  const double m = input_cert.bias0_margin;
  if (!(m > 0.0))
    throw std::invalid_argument(
        "reduce_embedding: input margin must be positive, certified " +
        std::to_string(m));

  ReduceReport rep;
  rep.input_margin = m;
  rep.eps = params.eps;
  rep.target_margin = (1.0 - params.eps) * m;
  rep.T = params.T > 0 ? params.T : theory_T(m, params.eps);
  rep.d_out = params.d_out > 0
                  ? params.d_out
                  : static_cast<int>(theory_dim(E.matrix().docs(), m,
                                                params.eps));
  rep.seed = params.seed;
  if (rep.d_out < 2)
    throw std::invalid_argument("reduce_embedding: d_out must be >= 2");

  const auto attempt_embedding = [&](std::uint64_t jl_seed,
                                     bool identity) {
    if (identity) {
      // True no-op: keep the documents and the original query source so the
      // recertified margin matches the input margin exactly.
      EmbeddingPair out = E;
      out.meta["reduce_identity"] = true;
      return out;
    }
    Eigen::MatrixXd docs = jl_project(E.doc_vectors(), rep.d_out, jl_seed);
    for (Eigen::Index i = 0; i < docs.cols(); ++i) {
      const double norm = docs.col(i).norm();
      if (norm <= 0.0 || !std::isfinite(norm))
        throw std::runtime_error(
            "reduce_embedding: projected document vector degenerated");
      docs.col(i) /= norm;
    }
    EmbeddingPair out(E.matrix(), std::move(docs));
    out.set_query_generator(make_mnp_generator(
        std::make_shared<const Eigen::MatrixXd>(out.doc_vectors()),
        params.mnp_tol));
    out.meta = nlohmann::json{{"method", "mnp"},
                              {"mnp_tol", params.mnp_tol},
                              {"seed", jl_seed},
                              {"eps", params.eps},
                              {"input_margin", m}};
    return out;
  };

  rep.identity_shortcut = rep.d_out == E.dim();
  const int tries = rep.identity_shortcut ? 1 : params.max_retries;
  double best_margin = -std::numeric_limits<double>::infinity();
  std::optional<EmbeddingPair> best;
  std::uint64_t best_seed = params.seed;
  for (int attempt = 0; attempt < tries; ++attempt) {
    const std::uint64_t jl_seed =
        derive_seed(params.seed, static_cast<std::uint64_t>(attempt));
    EmbeddingPair out = attempt_embedding(jl_seed, rep.identity_shortcut);
    const MarginCertificate cert = certify(out, copts);
    rep.attempt_margins.push_back(cert.bias0_margin);
    if (cert.bias0_margin > best_margin) {
      best_margin = cert.bias0_margin;
      best = std::move(out);
      best_seed = jl_seed;
    }
    if (best_margin >= rep.target_margin) break;
  }

  rep.certified_margin = best_margin;
  rep.below_target = best_margin < rep.target_margin;
  rep.seed_used = best_seed;
  rep.attempts = static_cast<int>(rep.attempt_margins.size());
  best->meta["certified_margin"] = best_margin;
  return {std::move(*best), rep};
}

}  // namespace marginlab
