#include "curio/psychometrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "curio/errors.hpp"
#include "curio/hashing.hpp"

namespace curio::psy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double SampleStats::unbiased_variance() const {
  if (n < 2) throw PreconditionError("variance needs n >= 2");
  double v = sd * sd;
  if (sd_kind == SdKind::Population) {
    v *= static_cast<double>(n) / static_cast<double>(n - 1);
  }
  return v;
}

nlohmann::json SampleStats::to_json() const {
  return {{"n", n},
          {"mean", mean},
          {"sd", sd},
          {"sd_kind", sd_kind == SdKind::Population ? "population" : "sample"}};
}

SampleStats SampleStats::from_json(const nlohmann::json& j) {
  SampleStats s;
  s.n = j.at("n").get<std::size_t>();
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  s.sd_kind = j.value("sd_kind", std::string("population")) == "sample" ? SdKind::Sample
                                                                        : SdKind::Population;
  return s;
}

SampleStats summarize(std::span<const double> samples) {
  if (samples.empty()) throw PreconditionError("summarize: no samples");
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return {samples.size(), mean, std::sqrt(ss / n), SdKind::Population};
}

double pooled_sd(const SampleStats& a, const SampleStats& b) {
  if (a.n < 2 || b.n < 2) throw PreconditionError("pooled SD needs n >= 2 in both samples");
  const double dfa = static_cast<double>(a.n - 1);
  const double dfb = static_cast<double>(b.n - 1);
  return std::sqrt((dfa * a.unbiased_variance() + dfb * b.unbiased_variance()) / (dfa + dfb));
}

double cohens_d(const SampleStats& a, const SampleStats& b) {
  const double s = pooled_sd(a, b);
  if (!(s > 0.0)) throw DegenerateSamples("pooled standard deviation is zero");
  return (a.mean - b.mean) / s;
}

void CovMatrix::validate() const {
  const auto n = values.rows();
  if (n == 0 || values.cols() != n) throw PreconditionError("matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(values(i, i) > 0.0)) throw PreconditionError("diagonal must be strictly positive");
    if (correlation && std::abs(values(i, i) - 1.0) > 1e-12) {
      throw PreconditionError("correlation diagonal must be 1");
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(values(i, j) - values(j, i)) > 1e-12) {
        throw PreconditionError("matrix must be symmetric");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(values, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw PreconditionError("matrix is not positive semidefinite");
  }
}

CovMatrix sample_correlation(const MatrixXd& data, std::span<const std::string> names) {
  const auto n = data.rows();
  const auto k = data.cols();
  if (n < 3) throw PreconditionError("correlation needs at least 3 observations");
  if (k < 1) throw PreconditionError("correlation needs at least one column");
  MatrixXd centered = data.rowwise() - data.colwise().mean();
  VectorXd sd(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    sd(j) = std::sqrt(centered.col(j).squaredNorm());
    if (!(sd(j) > 0.0)) {
      std::string name = static_cast<std::size_t>(j) < names.size()
                             ? names[static_cast<std::size_t>(j)]
                             : "column " + std::to_string(j);
      throw PreconditionError("zero variance in item " + name);
    }
  }
  MatrixXd r = centered.transpose() * centered;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      r(i, j) = std::clamp(r(i, j) / (sd(i) * sd(j)), -1.0, 1.0);
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) r(j, i) = r(i, j);
  }
  return {std::move(r), true};
}

MatrixXd implied_matrix(const VectorXd& loadings, const VectorXd& error_vars) {
  MatrixXd s = loadings * loadings.transpose();
  s.diagonal() += error_vars;
  return s;
}

double uls_discrepancy(const MatrixXd& r, const VectorXd& loadings, const VectorXd& error_vars) {
  return (r - implied_matrix(loadings, error_vars)).squaredNorm();
}

Gradient uls_gradient(const MatrixXd& r, const VectorXd& loadings, const VectorXd& error_vars) {
  const MatrixXd e = r - implied_matrix(loadings, error_vars);
  return {-4.0 * e * loadings, -2.0 * e.diagonal()};
}

double ml_discrepancy(const MatrixXd& r, const VectorXd& loadings, const VectorXd& error_vars) {
  const MatrixXd sigma = implied_matrix(loadings, error_vars);
  Eigen::LLT<MatrixXd> ls(sigma);
  Eigen::LLT<MatrixXd> lr(r);
  if (ls.info() != Eigen::Success || lr.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  auto logdet = [](const Eigen::LLT<MatrixXd>& l) {
    return 2.0 * l.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const double trace = ls.solve(r).trace();
  return logdet(ls) + trace - logdet(lr) - static_cast<double>(r.rows());
}

Gradient ml_gradient(const MatrixXd& r, const VectorXd& loadings, const VectorXd& error_vars) {
  const MatrixXd sigma = implied_matrix(loadings, error_vars);
  const MatrixXd inv = sigma.llt().solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
  const MatrixXd m = inv - inv * r * inv;
  return {2.0 * m * loadings, m.diagonal()};
}

namespace {

struct StartResult {
  VectorXd loadings;
  double discrepancy = 0.0;
  bool converged = false;
  int iterations = 0;
};

// ULS with theta concentrated out: theta_k = max(floor, r_kk - lambda_k^2).
// The diagonal residual is then min(0, r_kk - floor - lambda_k^2).
struct Concentrated {
  const MatrixXd& r;
  double floor;

  double value(const VectorXd& l) const {
    double f = 0.0;
    const auto k = l.size();
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        const double e = r(i, j) - l(i) * l(j);
        f += e * e;
      }
      const double d = std::min(0.0, r(i, i) - floor - l(i) * l(i));
      f += d * d;
    }
    return f;
  }

  VectorXd gradient(const VectorXd& l) const {
    const auto k = l.size();
    VectorXd g = VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        g(i) -= 4.0 * (r(i, j) - l(i) * l(j)) * l(j);
      }
      g(i) -= 4.0 * l(i) * std::min(0.0, r(i, i) - floor - l(i) * l(i));
    }
    return g;
  }

  MatrixXd hessian(const VectorXd& l) const {
    const auto k = l.size();
    MatrixXd h(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      double diag = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        h(i, j) = -4.0 * r(i, j) + 8.0 * l(i) * l(j);
        diag += 4.0 * l(j) * l(j);
      }
      const double c = r(i, i) - floor;
      if (l(i) * l(i) > c) diag += 12.0 * l(i) * l(i) - 4.0 * c;
      h(i, i) = diag;
    }
    return h;
  }

  VectorXd theta(const VectorXd& l) const {
    VectorXd t(l.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) t(i) = std::max(floor, r(i, i) - l(i) * l(i));
    return t;
  }
};

// Levenberg-damped Newton on the concentrated objective.
StartResult fit_uls_from(const Concentrated& obj, VectorXd l, const FitConfig& cfg) {
  const auto k = l.size();
  const MatrixXd eye = MatrixXd::Identity(k, k);
  double mu = 1e-3;
  double f = obj.value(l);
  StartResult out;
  int iters = 0;
  while (iters < cfg.max_iterations) {
    const VectorXd g = obj.gradient(l);
    if (g.lpNorm<Eigen::Infinity>() < cfg.gradient_tol) {
      out.converged = true;
      break;
    }
    const MatrixXd h = obj.hessian(l);
    bool accepted = false;
    while (!accepted && iters < cfg.max_iterations) {
      ++iters;
      Eigen::LLT<MatrixXd> llt(h + mu * eye);
      if (llt.info() != Eigen::Success) {
        mu = std::max(mu * 10.0, 1e-8);
        continue;
      }
      const VectorXd step = -llt.solve(g);
      const VectorXd trial = l + step;
      const double ft = obj.value(trial);
      if (ft <= f) {
        l = trial;
        f = ft;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
      } else {
        mu *= 4.0;
      }
      if (mu > 1e16) break;
    }
    if (!accepted) break;
  }
  out.loadings = std::move(l);
  out.discrepancy = f;
  out.iterations = iters;
  return out;
}

VectorXd symmetric_start(const MatrixXd& r) {
  const auto k = r.rows();
  VectorXd l(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) s += std::abs(r(i, j));
    }
    l(i) = std::clamp(std::sqrt(s / static_cast<double>(k - 1)), 0.1, 0.95);
  }
  return l;
}

// BFGS over (lambda, u) with theta = floor + u^2, seeded from a ULS solution.
StartResult fit_ml_from(const MatrixXd& r, const VectorXd& l0, const VectorXd& t0,
                        const FitConfig& cfg, VectorXd& theta_out) {
  const auto k = l0.size();
  VectorXd x(2 * k);
  x.head(k) = l0;
  for (Eigen::Index i = 0; i < k; ++i) x(k + i) = std::sqrt(std::max(0.0, t0(i) - cfg.theta_floor));

  auto unpack = [&](const VectorXd& v, VectorXd& l, VectorXd& t) {
    l = v.head(k);
    t = v.tail(k).array().square() + cfg.theta_floor;
  };
  auto value = [&](const VectorXd& v) {
    VectorXd l, t;
    unpack(v, l, t);
    return ml_discrepancy(r, l, t);
  };
  auto grad = [&](const VectorXd& v) {
    VectorXd l, t;
    unpack(v, l, t);
    auto g = ml_gradient(r, l, t);
    VectorXd out(2 * k);
    out.head(k) = g.loadings;
    out.tail(k) = 2.0 * v.tail(k).cwiseProduct(g.error_vars);
    return out;
  };

  StartResult out;
  double f = value(x);
  VectorXd g = grad(x);
  MatrixXd hinv = MatrixXd::Identity(2 * k, 2 * k);
  int iters = 0;
  while (iters < cfg.max_iterations) {
    if (g.lpNorm<Eigen::Infinity>() < cfg.gradient_tol) {
      out.converged = true;
      break;
    }
    ++iters;
    VectorXd p = -hinv * g;
    if (p.dot(g) >= 0.0) {
      hinv.setIdentity();
      p = -g;
    }
    double step = 1.0;
    VectorXd xn;
    double fn = std::numeric_limits<double>::infinity();
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * p;
      fn = value(xn);
      if (fn <= f + 1e-4 * step * g.dot(p)) break;
      step *= 0.5;
    }
    if (!(fn <= f)) break;
    const VectorXd gn = grad(xn);
    const VectorXd s = xn - x;
    const VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      const MatrixXd eye = MatrixXd::Identity(2 * k, 2 * k);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    x = xn;
    f = fn;
    g = gn;
  }
  VectorXd l, t;
  unpack(x, l, t);
  out.loadings = l;
  out.discrepancy = f;
  out.iterations = iters;
  theta_out = t;
  return out;
}

}  // namespace

CFAFit fit_single_factor_cfa(const CovMatrix& r, const FitConfig& cfg) {
  if (!r.correlation) throw PreconditionError("single-factor CFA expects a correlation matrix");
  r.validate();
  const auto k = r.values.rows();
  if (k < 3) throw PreconditionError("single-factor model is under-identified for k < 3");
  if (cfg.starts < 1) throw PreconditionError("need at least one start");

  const Concentrated obj{r.values, cfg.theta_floor};
  Rng rng(cfg.seed);
  StartResult best;
  int best_index = -1;
  for (int s = 0; s < cfg.starts; ++s) {
    VectorXd start = s == 0 ? symmetric_start(r.values) : VectorXd(k);
    if (s > 0) {
      for (Eigen::Index i = 0; i < k; ++i) start(i) = rng.uniform(0.1, 0.9);
    }
    auto res = fit_uls_from(obj, start, cfg);
    bool better = best_index < 0 || (res.converged && !best.converged) ||
                  (res.converged == best.converged && res.discrepancy < best.discrepancy - 1e-10);
    if (better) {
      best = std::move(res);
      best_index = s;
    }
  }

  CFAFit fit;
  fit.k = static_cast<std::size_t>(k);
  fit.loadings = best.loadings;
  fit.error_vars = obj.theta(best.loadings);
  fit.discrepancy = uls_discrepancy(r.values, fit.loadings, fit.error_vars);
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  fit.start_index = best_index;
  fit.estimator = Estimator::Uls;

  if (cfg.estimator == Estimator::Ml) {
    VectorXd theta;
    auto res = fit_ml_from(r.values, fit.loadings, fit.error_vars, cfg, theta);
    fit.loadings = res.loadings;
    fit.error_vars = theta;
    fit.discrepancy = res.discrepancy;
    fit.converged = res.converged;
    fit.iterations += res.iterations;
    fit.estimator = Estimator::Ml;
  }
  if (fit.loadings.sum() < 0.0) fit.loadings = -fit.loadings;
  return fit;
}

nlohmann::json CFAFit::to_json() const {
  std::vector<double> l(loadings.data(), loadings.data() + loadings.size());
  std::vector<double> t(error_vars.data(), error_vars.data() + error_vars.size());
  return {{"k", k},
          {"loadings", l},
          {"error_vars", t},
          {"discrepancy", discrepancy},
          {"converged", converged},
          {"iterations", iterations},
          {"start_index", start_index},
          {"estimator", estimator == Estimator::Uls ? "uls" : "ml"}};
}

double mcdonalds_omega(std::span<const double> loadings, std::span<const double> error_vars) {
  if (loadings.size() != error_vars.size()) {
    throw PreconditionError("loadings and error variances differ in length");
  }
  double sl = 0.0;
  double st = 0.0;
  for (double l : loadings) sl += l;
  for (double t : error_vars) st += t;
  const double common = sl * sl;
  const double total = common + st;
  if (total == 0.0) throw PreconditionError("omega is undefined when loadings and errors are all zero");
  return common / total;
}

double mcdonalds_omega(const CFAFit& fit, bool allow_unconverged) {
  if (!fit.converged && !allow_unconverged) {
    throw PreconditionError("omega requested for an unconverged CFA fit");
  }
  return mcdonalds_omega(std::span<const double>(fit.loadings.data(), fit.loadings.size()),
                         std::span<const double>(fit.error_vars.data(), fit.error_vars.size()));
}

}  // namespace curio::psy
