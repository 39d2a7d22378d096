#include "marginlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "marginlab/rng.hpp"

namespace marginlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPositiveMargin = 1e-12;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// (-1)^{A_ji}: -1 on relevant pairs.
Eigen::MatrixXd sign_matrix(const RelevanceMatrix& A) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Ones(A.rows(), A.docs());
  A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
    for (int i : S) C(j, i) = -1.0;
  });
  return C;
}

void check_loss_inputs(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                       const Eigen::MatrixXd& V, double t, const char* op) {
  if (U.rows() != A.rows() || V.rows() != A.docs() || U.cols() != V.cols())
    throw std::invalid_argument(std::string(op) +
                                ": U must be N x d and V must be n x d");
  if (!(t > 0.0))
    throw std::invalid_argument(std::string(op) + ": need t > 0");
}

LossGrad sigmoid_core(const RelevanceMatrix& A, const Eigen::MatrixXd& C,
                      const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                      double t, double b, bool with_grad) {
  check_loss_inputs(A, U, V, t, "sigmoid_loss");
  const Eigen::MatrixXd S = U * V.transpose();
  const Eigen::ArrayXXd Z = C.array() * (t * S.array() - b);
  LossGrad out;
  out.value = (Z.max(0.0) + (-Z.abs()).exp().log1p()).sum();
  if (with_grad) {
    const Eigen::ArrayXXd sig = 0.5 * (1.0 + (0.5 * Z).tanh());
    const Eigen::MatrixXd G = (t * sig * C.array()).matrix();
    out.dU = G * V;
    out.dV = G.transpose() * U;
    out.dlogt = t * (sig * C.array() * S.array()).sum();
  }
  return out;
}

LossGrad infonce_core(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                      const Eigen::MatrixXd& V, double t, bool with_grad) {
  check_loss_inputs(A, U, V, t, "infonce_loss");
  const int n = A.docs();
  const Eigen::MatrixXd S = U * V.transpose();
  Eigen::MatrixXd G;
  if (with_grad) G = Eigen::MatrixXd::Zero(A.rows(), n);
  LossGrad out;
  A.for_each_row([&](std::int64_t j, const std::vector<int>& Sj) {
    const Eigen::ArrayXd s = t * S.row(j).transpose().array();
    const double M = s.maxCoeff();
    const Eigen::ArrayXd e = (s - M).exp();
    const double sum = e.sum();
    const double lse = M + std::log(sum);
    const double kj = static_cast<double>(Sj.size());
    double pos = 0.0;
    for (int i : Sj) pos += S(j, i);
    out.value += kj * lse - t * pos;
    if (with_grad) {
      Eigen::ArrayXd row = kj * (e / sum);
      for (int i : Sj) row[i] -= 1.0;
      G.row(j) = row.transpose();
    }
  });
  if (with_grad) {
    out.dU = t * G * V;
    out.dV = t * G.transpose() * U;
    out.dlogt = t * (G.array() * S.array()).sum();
  }
  return out;
}

// ln softplus(z), safe across the whole range.
double log_softplus(double z) {
  if (z < -36.0) return z;
  if (z > 30.0) return std::log(z);
  return std::log(std::log1p(std::exp(z)));
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct RunningLse {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  void add(double x) {
    if (x <= max) {
      sum += std::exp(x - max);
    } else {
      sum = sum * std::exp(max - x) + 1.0;
      max = x;
    }
  }
  double value() const { return max + std::log(sum); }
};

// Raw score matrix S_ji = <U_j, V_i>, materialized through the query
// interface so generator-backed embeddings work too.
Eigen::MatrixXd score_matrix(const EmbeddingPair& E, const char* op) {
  const std::int64_t N = E.matrix().rows();
  const int n = E.matrix().docs();
  if (N * n > 4000000)
    throw std::invalid_argument(std::string(op) +
                                ": matrix too large to materialize scores");
  const Eigen::MatrixXd& V = E.doc_vectors();
  Eigen::MatrixXd S(N, n);
  E.matrix().for_each_row([&](std::int64_t j, const std::vector<int>&) {
    S.row(j) = (V.transpose() * E.query(j)).transpose();
  });
  return S;
}

}  // namespace

const char* loss_kind_name(LossKind kind) {
  return kind == LossKind::Sigmoid ? "sigmoid" : "infonce";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "sigmoid") return LossKind::Sigmoid;
  if (name == "infonce") return LossKind::InfoNce;
  throw std::invalid_argument("unknown loss kind: " + name);
}

LossGrad sigmoid_loss(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                      const Eigen::MatrixXd& V, double t, double b,
                      bool with_grad) {
  return sigmoid_core(A, sign_matrix(A), U, V, t, b, with_grad);
}

LossGrad infonce_loss(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                      const Eigen::MatrixXd& V, double t, bool with_grad) {
  return infonce_core(A, U, V, t, with_grad);
}

EmbeddingPair embedding_from_rows(const RelevanceMatrix& A,
                                  const Eigen::MatrixXd& U,
                                  const Eigen::MatrixXd& V) {
  EmbeddingPair E(A, V.transpose());
  E.set_dense_queries(U.transpose());
  return E;
}

TrainTrace train(const TrainConfig& cfg) {
  const RelevanceMatrix& A = cfg.matrix;
  const std::int64_t N = A.rows();
  const int n = A.docs();
  if (cfg.d < 1) throw std::invalid_argument("train: need d >= 1");
  if (cfg.steps < 1) throw std::invalid_argument("train: need steps >= 1");
  if (!(cfg.base_lr > 0.0))
    throw std::invalid_argument("train: need base_lr > 0");
  if (!(cfg.t0 > 0.0)) throw std::invalid_argument("train: need t0 > 0");
  if (cfg.checkpoint_every < 1)
    throw std::invalid_argument("train: need checkpoint_every >= 1");
  if (N * n > cfg.full_batch_cap)
    throw std::invalid_argument("train: N*n exceeds the full-batch cap");

  Rng rng(cfg.seed);
  Eigen::MatrixXd U(N, cfg.d);
  Eigen::MatrixXd V(n, cfg.d);
  for (std::int64_t j = 0; j < N; ++j)
    U.row(j) = rng.sphere_vector(cfg.d).transpose();
  for (int i = 0; i < n; ++i)
    V.row(i) = rng.sphere_vector(cfg.d).transpose();
  double logt = std::log(cfg.t0);

  const bool sigmoid = cfg.loss == LossKind::Sigmoid;
  const Eigen::MatrixXd C =
      sigmoid ? sign_matrix(A) : Eigen::MatrixXd();
  const auto eval = [&](bool with_grad) {
    const double t = std::exp(logt);
    return sigmoid ? sigmoid_core(A, C, U, V, t, cfg.bias, with_grad)
                   : infonce_core(A, U, V, t, with_grad);
  };

  TrainTrace trace;
  trace.loss = cfg.loss;
  trace.max_margin = -std::numeric_limits<double>::infinity();
  CertifyOptions copts;
  copts.jobs = cfg.jobs;
  const auto checkpoint = [&](std::int64_t step) {
    const double value = eval(false).value;
    const MarginCertificate cert = certify(embedding_from_rows(A, U, V), copts);
    const double stat =
        sigmoid ? cert.bias0_margin : cert.best_tau_margin;
    trace.max_margin = std::max(trace.max_margin, stat);
    trace.rows.push_back({step, value, std::exp(logt), cert.bias0_margin,
                          cert.best_tau, cert.best_tau_margin});
  };
  checkpoint(0);

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::ArrayXXd mU = Eigen::ArrayXXd::Zero(N, cfg.d);
  Eigen::ArrayXXd vU = Eigen::ArrayXXd::Zero(N, cfg.d);
  Eigen::ArrayXXd mV = Eigen::ArrayXXd::Zero(n, cfg.d);
  Eigen::ArrayXXd vV = Eigen::ArrayXXd::Zero(n, cfg.d);
  double mt = 0.0, vt = 0.0;

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const LossGrad g = eval(true);
    if (!std::isfinite(g.value)) {
      trace.aborted = true;
      trace.abort_step = step;
      break;
    }
    const double lr =
        cfg.base_lr * 0.5 *
        (1.0 + std::cos(kPi * static_cast<double>(step - 1) /
                        static_cast<double>(cfg.steps)));
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));

    mU = beta1 * mU + (1.0 - beta1) * g.dU.array();
    vU = beta2 * vU + (1.0 - beta2) * g.dU.array().square();
    U.array() -= lr * (mU / c1) / ((vU / c2).sqrt() + eps);
    mV = beta1 * mV + (1.0 - beta1) * g.dV.array();
    vV = beta2 * vV + (1.0 - beta2) * g.dV.array().square();
    V.array() -= lr * (mV / c1) / ((vV / c2).sqrt() + eps);
    mt = beta1 * mt + (1.0 - beta1) * g.dlogt;
    vt = beta2 * vt + (1.0 - beta2) * g.dlogt * g.dlogt;
    logt -= lr * (mt / c1) / (std::sqrt(vt / c2) + eps);

    U.rowwise().normalize();
    V.rowwise().normalize();

    if (step % cfg.checkpoint_every == 0 || step == cfg.steps)
      checkpoint(step);
  }

  trace.U = std::move(U);
  trace.V = std::move(V);
  trace.final_inv_temp = std::exp(logt);
  return trace;
}

SweepResult sweep_min_dim(int n, int k, LossKind loss,
                          const std::vector<int>& d_range, std::int64_t steps,
                          const std::vector<std::uint64_t>& seeds,
                          const SweepOptions& opts) {
  if (d_range.empty())
    throw std::invalid_argument("sweep_min_dim: empty dimension range");
  if (seeds.empty())
    throw std::invalid_argument("sweep_min_dim: empty seed list");

  const RelevanceMatrix A = RelevanceMatrix::snk(n, k);
  SweepResult result;
  for (int d : d_range) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg(A);
      cfg.d = d;
      cfg.loss = loss;
      cfg.steps = steps;
      cfg.base_lr = opts.base_lr;
      cfg.t0 = opts.t0;
      cfg.checkpoint_every = opts.checkpoint_every;
      cfg.seed = seed;
      cfg.jobs = opts.jobs;
      const TrainTrace trace = train(cfg);
      result.cells.push_back({n, k, d, loss, seed, trace.max_margin});
    }
  }

  result.dims = d_range;
  std::sort(result.dims.begin(), result.dims.end());
  result.dims.erase(std::unique(result.dims.begin(), result.dims.end()),
                    result.dims.end());
  for (int d : result.dims) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& cell : result.cells)
      if (cell.d == d) best = std::max(best, cell.max_margin);
    result.best_margin_by_dim.push_back(best);
    if (result.min_positive_dim < 0 && best > kPositiveMargin)
      result.min_positive_dim = d;
  }
  return result;
}

RateCheck sigmoid_rate_check(const EmbeddingPair& E,
                             const std::vector<double>& T_values, int jobs) {
  CertifyOptions copts;
  copts.jobs = jobs;
  const MarginCertificate cert = certify(E, copts);
  if (!(cert.best_tau_margin > 0.0))
    throw std::invalid_argument(
        "sigmoid_rate_check: needs a positive best-tau margin, certified " +
        std::to_string(cert.best_tau_margin));

  const std::int64_t N = E.matrix().rows();
  const int n = E.matrix().docs();
  const Eigen::MatrixXd S = score_matrix(E, "sigmoid_rate_check");
  // Signed slack relative to tau; every entry is >= m* by the certificate.
  Eigen::MatrixXd slack(N, n);
  E.matrix().for_each_row([&](std::int64_t j, const std::vector<int>& Sj) {
    for (int i = 0; i < n; ++i) slack(j, i) = cert.best_tau - S(j, i);
    for (int i : Sj) slack(j, i) = S(j, i) - cert.best_tau;
  });

  RateCheck out;
  out.best_tau = cert.best_tau;
  out.margin = cert.best_tau_margin;
  const double log_pairs =
      std::log(static_cast<double>(N) * static_cast<double>(n));
  for (double T : T_values) {
    if (!(T > 0.0))
      throw std::invalid_argument("sigmoid_rate_check: need T > 0");
    RunningLse lse;
    for (std::int64_t j = 0; j < N; ++j)
      for (int i = 0; i < n; ++i) lse.add(log_softplus(-T * slack(j, i)));
    RateCheck::Row row;
    row.T = T;
    row.log_loss = lse.value();
    row.normalized = row.log_loss / T;
    row.lower = -T * out.margin - std::log(2.0);
    row.upper = -T * out.margin + log_pairs;
    row.within = row.log_loss >= row.lower - 1e-9 &&
                 row.log_loss <= row.upper + 1e-9;
    out.rows.push_back(row);
  }
  return out;
}

DivergenceCheck infonce_divergence_check(const EmbeddingPair& E,
                                         const std::vector<double>& T_values,
                                         int jobs) {
  (void)jobs;
  const Eigen::MatrixXd S = score_matrix(E, "infonce_divergence_check");
  DivergenceCheck out;
  E.matrix().for_each_row([&](std::int64_t j, const std::vector<int>& Sj) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i : Sj) {
      lo = std::min(lo, S(j, i));
      hi = std::max(hi, S(j, i));
    }
    if (hi - lo > out.gap) {
      out.gap = hi - lo;
      out.witness_row = j;
    }
  });
  if (out.gap <= 1e-12)
    throw std::invalid_argument(
        "infonce_divergence_check: every row's positive similarities are "
        "equal; no divergence witness exists");

  const auto loss_at = [&](double T) {
    double total = 0.0;
    E.matrix().for_each_row([&](std::int64_t j, const std::vector<int>& Sj) {
      const Eigen::ArrayXd s = T * S.row(j).transpose().array();
      const double M = s.maxCoeff();
      const double lse = M + std::log((s - M).exp().sum());
      double pos = 0.0;
      for (int i : Sj) pos += s[i];
      total += static_cast<double>(Sj.size()) * lse - pos;
    });
    return total;
  };

  for (double T : T_values) {
    if (!(T > 0.0))
      throw std::invalid_argument("infonce_divergence_check: need T > 0");
    DivergenceCheck::Row row;
    row.T = T;
    row.loss = loss_at(T);
    row.lower_bound = softplus(T * out.gap);
    row.exceeds = row.loss >= row.lower_bound - 1e-9;
    out.rows.push_back(row);
  }

  auto sorted = out.rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.T < b.T; });
  out.strictly_increasing = true;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i].loss > sorted[i - 1].loss))
      out.strictly_increasing = false;
  return out;
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::string csv = "step,loss,inv_temp,margin,best_tau,best_tau_margin\n";
  for (const auto& row : trace.rows) {
    csv += std::to_string(row.step);
    csv += ',';
    csv += fmt17(row.loss);
    csv += ',';
    csv += fmt17(row.inv_temp);
    csv += ',';
    csv += fmt17(row.margin);
    csv += ',';
    csv += fmt17(row.best_tau);
    csv += ',';
    csv += fmt17(row.best_tau_margin);
    csv += '\n';
  }
  return csv;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string csv = "n,k,d,loss,seed,max_margin\n";
  for (const auto& cell : result.cells) {
    csv += std::to_string(cell.n);
    csv += ',';
    csv += std::to_string(cell.k);
    csv += ',';
    csv += std::to_string(cell.d);
    csv += ',';
    csv += loss_kind_name(cell.loss);
    csv += ',';
    csv += std::to_string(cell.seed);
    csv += ',';
    csv += fmt17(cell.max_margin);
    csv += '\n';
  }
  return csv;
}

}  // namespace marginlab
