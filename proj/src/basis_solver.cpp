// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/basis_solver.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "wgmrf/rng.hpp"

namespace wgmrf {

double Basis::orthonormality_defect() const {
  if (size() == 0) return 0.0;
  Eigen::MatrixXd gram = vectors.transpose() * vectors;
  gram -= Eigen::MatrixXd::Identity(size(), size());
  return gram.cwiseAbs().maxCoeff();
}

void Basis::validate(double tol) const {
  if (orthonormality_defect() > tol)
    throw Error(ErrorCode::invalid_argument, "basis columns are not orthonormal");
}

DeflatedObjective::DeflatedObjective(CovarianceOperator cov,
                                     const WeightVector& w,
                                     Eigen::MatrixXd previous)
    : cov_(std::move(cov)), w_(w.values), previous_(std::move(previous)) {
  w.validate();
  if (w_.size() != cov_.dimension())
    throw Error(ErrorCode::dimension_mismatch, "weights do not match operator");
  if (previous_.size() > 0 && previous_.rows() != cov_.dimension())
    throw Error(ErrorCode::dimension_mismatch, "previous basis does not match operator");
}

Eigen::VectorXd DeflatedObjective::project(const Eigen::VectorXd& v) const {
  if (previous_.cols() == 0) return v;
  return v - previous_ * (previous_.transpose() * v).eval();
}

Eigen::VectorXd DeflatedObjective::sigma_p(const Eigen::VectorXd& v) const {
  if (previous_.cols() == 0) return cov_.apply(v);
  return project(cov_.apply(project(v)));
}

double DeflatedObjective::risk(const Eigen::VectorXd& b, bool include_constant) const {
  if (b.size() != dimension())
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match objective");
  Eigen::VectorXd s = sigma_p(b);
  Eigen::VectorXd wb = w_.cwiseProduct(b);
  double bws = wb.dot(s);     // b^t W Sigma_p b
  double bwb = wb.dot(b);
  double bsb = b.dot(s);
  double value = -2.0 * bws + bwb * bsb;
  if (include_constant) value += constant_term();
  return value;
}

std::pair<double, Eigen::VectorXd> DeflatedObjective::value_and_gradient(
    const Eigen::VectorXd& b) const {
  Eigen::VectorXd s = sigma_p(b);
  Eigen::VectorXd wb = w_.cwiseProduct(b);
  double bws = wb.dot(s);
  double bwb = wb.dot(b);
  double bsb = b.dot(s);
  double value = -2.0 * bws + bwb * bsb;
  Eigen::VectorXd grad = -2.0 * (w_.cwiseProduct(s) + sigma_p(wb));
  grad += (2.0 * bsb) * wb + (2.0 * bwb) * s;
  return {value, std::move(grad)};
}

Eigen::VectorXd DeflatedObjective::gradient(const Eigen::VectorXd& b) const {
  if (b.size() != dimension())
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match objective");
  return value_and_gradient(b).second;
}

Eigen::VectorXd DeflatedObjective::hessian_vector(const Eigen::VectorXd& b,
                                                  const Eigen::VectorXd& v) const {
  if (b.size() != dimension() || v.size() != dimension())
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match objective");
  Eigen::VectorXd sb = sigma_p(b);
  Eigen::VectorXd sv = sigma_p(v);
  Eigen::VectorXd wb = w_.cwiseProduct(b);
  Eigen::VectorXd wv = w_.cwiseProduct(v);
  double bsb = b.dot(sb);
  double bwb = b.dot(wb);
  Eigen::VectorXd out = -2.0 * (w_.cwiseProduct(sv) + sigma_p(wv));
  out += (2.0 * bsb) * wv + (2.0 * bwb) * sv;
  out += (4.0 * sv.dot(b)) * wb + (4.0 * wv.dot(b)) * sb;
  return out;
}

double DeflatedObjective::constant_term() const {
  if (!constant_) {
    // tr(W Sigma_p) = tr(W Sigma) - 2 sum_i (W b_i)^t (Sigma b_i)
    //               + tr((B^t W B)(B^t Sigma B))
    double value = cov_.weighted_trace(w_);
    int p = static_cast<int>(previous_.cols());
    if (p > 0) {
      Eigen::MatrixXd sigma_b(previous_.rows(), p);
      for (int i = 0; i < p; ++i) sigma_b.col(i) = cov_.apply(previous_.col(i));
      Eigen::MatrixXd wbasis = w_.asDiagonal() * previous_;
      value -= 2.0 * (wbasis.array() * sigma_b.array()).sum();
      Eigen::MatrixXd bwb = previous_.transpose() * wbasis;
      Eigen::MatrixXd bsb = previous_.transpose() * sigma_b;
      value += (bwb.array() * bsb.transpose().array()).sum();
    }
    constant_ = value;
  }
  return *constant_;
}

Eigen::VectorXd DeflatedObjective::starting_point(double scale, double tol,
                                                  int max_iter, std::uint64_t seed,
                                                  EigenPair* info) const {
  if (scale <= 0.0)
    throw Error(ErrorCode::invalid_argument, "starting scale must be positive");
  auto op = [this](const Eigen::VectorXd& x) {
    // P (W Sigma_p + Sigma_p W) P x, using Sigma_p P = Sigma_p = P Sigma_p.
    Eigen::VectorXd t = sigma_p(x);
    Eigen::VectorXd out = project(w_.cwiseProduct(t));
    out += sigma_p(w_.cwiseProduct(project(x)));
    return out;
  };
  EigenPair pair = extreme_eigenpair(op, dimension(),
                                     EigenWhich::largest_algebraic, tol,
                                     max_iter, seed);
  if (info) *info = pair;
  return scale * pair.vector;
}

namespace {

struct Evaluation {
  double f;
  Eigen::VectorXd g;
};

// Scale-invariant view of the deflated risk: L(b) = R(b / ||b||). The risk of
// the normalized vector is what the basis keeps, so homogenizing removes the
// radial mismatch between the unconstrained minimizer and the unit sphere.
class ScaleFreeRisk {
 public:
  explicit ScaleFreeRisk(const DeflatedObjective& obj) : obj_(obj) {}

  std::pair<double, Eigen::VectorXd> value_and_gradient(const Eigen::VectorXd& b) const {
    double r = b.norm();
    if (!(r > 0.0))
      throw Error(ErrorCode::degenerate_direction, "iterate collapsed to zero");
    Eigen::VectorXd u = b / r;
    auto [f, g] = obj_.value_and_gradient(u);
    Eigen::VectorXd gl = (g - u.dot(g) * u) / r;
    return {f, std::move(gl)};
  }

  // D^2 L(b)[v] = (P H(u) P v - (u.v) P g - (u.g) P v - (g.P v) u) / r^2,
  // with u = b/r and P = I - u u^t.
  Eigen::VectorXd hessian_vector(const Eigen::VectorXd& b, const Eigen::VectorXd& v) const {
    double r = b.norm();
    Eigen::VectorXd u = b / r;
    auto [f, g] = obj_.value_and_gradient(u);
    (void)f;
    Eigen::VectorXd pv = v - u.dot(v) * u;
    Eigen::VectorXd hpv = obj_.hessian_vector(u, pv);
    hpv -= u.dot(hpv) * u;
    Eigen::VectorXd pg = g - u.dot(g) * u;
    Eigen::VectorXd out = hpv - u.dot(v) * pg - u.dot(g) * pv - pg.dot(v) * u;
    return out / (r * r);
  }

 private:
  const DeflatedObjective& obj_;
};

// Strong-Wolfe line search (bracket + zoom). When the curvature condition
// cannot be met within the bisection budget, the best point satisfying
// sufficient decrease is accepted instead; if not even sufficient decrease
// is attainable the search reports a stall (the iterate is numerically
// stationary along this direction). Hard failures (non-descent direction,
// unbounded or non-finite steps) throw LineSearchError.
template <class Obj>
class LineSearch {
 public:
  LineSearch(const Obj& obj, double c1, double c2, int max_steps)
      : obj_(obj), c1_(c1), c2_(c2), max_steps_(max_steps) {}

  // On success x, e are updated to the accepted point; returns false on stall.
  bool search(Eigen::VectorXd& x, Evaluation& e, const Eigen::VectorXd& dir,
              double alpha_init) {
    const double f0 = e.f;
    const double d0 = e.g.dot(dir);
    if (!(d0 < 0.0))
      throw LineSearchError(x, "search direction is not a descent direction");

    double alpha_prev = 0.0, f_prev = f0, d_prev = d0;
    double alpha = alpha_init;
    Eigen::VectorXd trial;
    Evaluation et;

    bool have_fallback = false;
    double fallback_f = f0;
    Eigen::VectorXd fallback_x;
    Eigen::VectorXd fallback_g;

    auto evaluate = [&](double a) {
      trial = x + a * dir;
      auto [fv, gv] = obj_.value_and_gradient(trial);
      if (!std::isfinite(fv))
        throw LineSearchError(x, "objective is not finite along the search direction");
      et.f = fv;
      et.g = std::move(gv);
      if (fv <= f0 + c1_ * a * d0 && fv < fallback_f) {
        fallback_f = fv;
        fallback_x = trial;
        fallback_g = et.g;
        have_fallback = true;
      }
    };

    auto accept = [&]() {
      x = std::move(trial);
      e = std::move(et);
      return true;
    };

    auto finish = [&]() {
      if (!have_fallback) return false;
      x = std::move(fallback_x);
      e.f = fallback_f;
      e.g = std::move(fallback_g);
      return true;
    };

    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi) {
      for (int it = 0; it < max_steps_; ++it) {
        // Quadratic interpolation from (lo, f_lo, d_lo) and (hi, f_hi) on
        // every other step; plain bisection in between keeps the bracket
        // shrinking geometrically.
        double a = lo + 0.5 * (hi - lo);
        double denom = 2.0 * (f_hi - f_lo - d_lo * (hi - lo));
        if (it % 2 == 0 && denom != 0.0) {
          double cand = lo - d_lo * (hi - lo) * (hi - lo) / denom;
          double lb = std::min(lo, hi), ub = std::max(lo, hi);
          double margin = 0.1 * (ub - lb);
          if (cand > lb + margin && cand < ub - margin) a = cand;
        }
        evaluate(a);
        if (et.f > f0 + c1_ * a * d0 || et.f >= f_lo) {
          hi = a;
          f_hi = et.f;
          continue;
        }
        double da = et.g.dot(dir);
        if (std::abs(da) <= -c2_ * d0) return accept();
        if (da * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = a;
        f_lo = et.f;
        d_lo = da;
      }
      return finish();
    };

    for (int it = 0; it < max_steps_; ++it) {
      evaluate(alpha);
      if (et.f > f0 + c1_ * alpha * d0 || (it > 0 && et.f >= f_prev))
        return zoom(alpha_prev, f_prev, d_prev, alpha, et.f);
      double da = et.g.dot(dir);
      if (std::abs(da) <= -c2_ * d0) return accept();
      if (da >= 0.0) return zoom(alpha, et.f, da, alpha_prev, f_prev);
      alpha_prev = alpha;
      f_prev = et.f;
      d_prev = da;
      alpha *= 2.0;
      if (alpha > 1e12)
        throw LineSearchError(x, "line search step grew unbounded");
    }
    return finish();
  }

 private:
  const Obj& obj_;
  double c1_, c2_;
  int max_steps_;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double f;
  double grad_norm;
  int iterations;
};

// Limited-memory BFGS with the two-loop recursion.
template <class Obj>
MinimizeResult minimize_lbfgs(const Obj& obj, Eigen::VectorXd x,
                              const SolverOptions& opts) {
  LineSearch<Obj> ls(obj, opts.wolfe_c1, opts.wolfe_c2, opts.max_line_search);
  auto [f, g] = obj.value_and_gradient(x);
  Evaluation e{f, std::move(g)};

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  int iter = 0;
  int stagnant = 0;
  for (; iter < opts.max_iter; ++iter) {
    double gnorm = e.g.norm();
    if (gnorm <= opts.grad_tol * std::max(1.0, std::abs(e.f))) break;

    // Two-loop recursion for the quasi-Newton direction.
    Eigen::VectorXd q = e.g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    if (!(dir.dot(e.g) < 0.0)) dir = -e.g;  // curvature info unusable

    // Predicted decrease below the rounding resolution of f: the iterate is
    // stationary to floating-point accuracy and no step can be verified.
    if (std::abs(dir.dot(e.g)) <=
        16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(e.f)))
      break;

    double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / e.g.norm()) : 1.0;
    Eigen::VectorXd x_old = x;
    Eigen::VectorXd g_old = e.g;
    double f_old = e.f;
    if (!ls.search(x, e, dir, alpha0)) break;  // stationary along dir
    if (f_old - e.f <= 1e-13 * (1.0 + std::abs(e.f))) {
      if (++stagnant >= 3) break;
    } else {
      stagnant = 0;
    }

    Eigen::VectorXd s = x - x_old;
    Eigen::VectorXd y = e.g - g_old;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    // The objective is scale-free; keep the iterate away from the origin
    // and from huge radii (memory is reset since the metric changed).
    double r = x.norm();
    if (r < 0.1 || r > 10.0) {
      x /= r;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
  }
  return {std::move(x), e.f, e.g.norm(), iter};
}

// Newton direction by conjugate gradients on H d = -g with negative-curvature
// exit (Steihaug style, without a trust region radius).
template <class Obj>
Eigen::VectorXd newton_direction(const Obj& obj, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& g) {
  int n = static_cast<int>(g.size());
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = -g;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  double tol = 1e-10 * std::sqrt(rr);
  for (int it = 0; it < 2 * n; ++it) {
    if (std::sqrt(rr) <= tol) break;
    Eigen::VectorXd hp = obj.hessian_vector(x, p);
    double php = p.dot(hp);
    if (php <= 1e-14 * p.squaredNorm()) {
      if (it == 0) return r;  // steepest descent along -g
      break;
    }
    double alpha = rr / php;
    d += alpha * p;
    r -= alpha * hp;
    double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (d.squaredNorm() == 0.0) return -g;
  return d;
}

template <class Obj>
MinimizeResult minimize_newton(const Obj& obj, Eigen::VectorXd x,
                               const SolverOptions& opts) {
  LineSearch<Obj> ls(obj, opts.wolfe_c1, opts.wolfe_c2, opts.max_line_search);
  auto [f, g] = obj.value_and_gradient(x);
  Evaluation e{f, std::move(g)};
  int iter = 0;
  int stagnant = 0;
  for (; iter < opts.max_iter; ++iter) {
    double gnorm = e.g.norm();
    if (gnorm <= opts.grad_tol * std::max(1.0, std::abs(e.f))) break;
    Eigen::VectorXd dir = newton_direction(obj, x, e.g);
    if (!(dir.dot(e.g) < 0.0)) dir = -e.g;
    if (std::abs(dir.dot(e.g)) <=
        16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(e.f)))
      break;
    double alpha0 = (iter == 0) ? std::min(1.0, 1.0 / e.g.norm()) : 1.0;
    double f_old = e.f;
    if (!ls.search(x, e, dir, alpha0)) break;
    if (f_old - e.f <= 1e-13 * (1.0 + std::abs(e.f))) {
      if (++stagnant >= 3) break;
    } else {
      stagnant = 0;
    }
    double r = x.norm();
    if (r < 0.1 || r > 10.0) x /= r;
  }
  return {std::move(x), e.f, e.g.norm(), iter};
}

void canonicalize_sign(Eigen::VectorXd& v) {
  int imax = 0;
  double best = std::abs(v[0]);
  for (int i = 1; i < v.size(); ++i) {
    double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  if (v[imax] < 0.0) v = -v;
}

}  // namespace

std::pair<Eigen::VectorXd, VectorDiagnostics> solve_next_vector(
    const DeflatedObjective& obj, const SolverOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  VectorDiagnostics diag;

  EigenPair seed_pair;
  Eigen::VectorXd b0 =
      obj.starting_point(opts.start_scale, opts.eigen_tol, opts.eigen_max_iter,
                         opts.seed, &seed_pair);
  diag.start_eigenvalue = seed_pair.value;
  diag.eigen_iterations = seed_pair.iterations;

  ScaleFreeRisk scale_free(obj);
  MinimizeResult res = opts.newton
                           ? minimize_newton(scale_free, std::move(b0), opts)
                           : minimize_lbfgs(scale_free, std::move(b0), opts);

  // Orthogonalize against the previous vectors (two rounds of modified
  // Gram-Schmidt), then normalize.
  Eigen::VectorXd b = std::move(res.x);
  const Eigen::MatrixXd& prev = obj.previous();
  for (int round = 0; round < 2; ++round)
    for (int i = 0; i < prev.cols(); ++i) b -= prev.col(i).dot(b) * prev.col(i);
  double norm = b.norm();
  if (norm < 1e-10)
    throw Error(ErrorCode::degenerate_direction,
                "optimizer collapsed into the span of the previous basis");
  b /= norm;
  canonicalize_sign(b);

  diag.risk = obj.risk(b, false);
  diag.grad_norm = res.grad_norm;
  diag.iterations = res.iterations;
  diag.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(b), diag};
}

Basis compute_basis(const CovarianceOperator& cov, const WeightVector& w, int p,
                    const SolverOptions& opts, const Basis* resume) {
  w.validate();
  int m = cov.dimension();
  if (p < 1 || p > m)
    throw Error(ErrorCode::invalid_argument,
                "basis length must lie in [1, " + std::to_string(m) + "]");

  Basis basis;
  basis.vectors.resize(m, 0);
  const std::string fp = w.fingerprint();
  if (resume && resume->size() > 0) {
    resume->validate();
    if (resume->dimension() != m)
      throw Error(ErrorCode::dimension_mismatch, "resume basis does not match operator");
    if (resume->size() > p)
      throw Error(ErrorCode::invalid_argument, "resume basis longer than requested");
    if (!resume->weights_fingerprint.empty() && resume->weights_fingerprint != fp)
      throw Error(ErrorCode::invalid_argument,
                  "resume basis was computed for different weights");
    basis = *resume;
  }
  basis.weights_fingerprint = fp;

  while (basis.size() < p) {
    int index = basis.size();
    SolverOptions vec_opts = opts;
    vec_opts.seed = Rng::mix_seed(opts.seed, static_cast<std::uint64_t>(index));
    DeflatedObjective obj(cov, w, basis.vectors);
    try {
      auto [b, diag] = solve_next_vector(obj, vec_opts);
      basis.vectors.conservativeResize(Eigen::NoChange, index + 1);
      basis.vectors.col(index) = b;
      basis.diagnostics.push_back(diag);
    } catch (const Error& err) {
      throw BasisComputationError(
          index, basis,
          "basis vector " + std::to_string(index + 1) + " failed: " + err.what());
    }
  }
  return basis;
}

double residual_weighted_risk(const CovarianceOperator& cov,
                              const WeightVector& w, const Basis& basis) {
  DeflatedObjective obj(cov, w, basis.vectors);
  return obj.constant_term();
}

}  // namespace wgmrf
