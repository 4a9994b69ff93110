#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "conic_internal.hpp"

namespace crsn::detail {

namespace {

// min c^T w  s.t.  F_j(w) = F0_j + sum_k w_k H_jk >= 0,  l(w) = l0 + G w >= 0.
struct Lmi {
  Matrix f0;
  std::vector<Matrix> h;
};

struct BarrierProblem {
  int nw = 0;
  Vector c;
  std::vector<Lmi> lmis;
  Matrix g;
  Vector l0;

  int barrier_degree() const {
    int deg = static_cast<int>(l0.size());
    for (const auto& l : lmis) deg += static_cast<int>(l.f0.rows());
    return deg;
  }

  Matrix lmi_at(const Lmi& l, const Vector& w) const {
    Matrix f = l.f0;
    for (int k = 0; k < nw; ++k) {
      if (w(k) != 0.0) f += w(k) * l.h[static_cast<std::size_t>(k)];
    }
    return f;
  }

  // Barrier value -sum log det F - sum log l, or +inf outside the interior.
  double barrier(const Vector& w) const {
    double val = 0.0;
    for (const auto& l : lmis) {
      Eigen::LLT<Matrix> llt(lmi_at(l, w));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const auto diag = llt.matrixLLT().diagonal();
      for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag(i) > 0.0)) return std::numeric_limits<double>::infinity();
        val -= 2.0 * std::log(diag(i));
      }
    }
    if (l0.size() > 0) {
      const Vector lin = l0 + g * w;
      for (Eigen::Index i = 0; i < lin.size(); ++i) {
        if (!(lin(i) > 0.0)) return std::numeric_limits<double>::infinity();
        val -= std::log(lin(i));
      }
    }
    return val;
  }

  // Gradient and Hessian of the barrier.
  void derivatives(const Vector& w, Vector& grad, Matrix& hess) const {
    grad = Vector::Zero(nw);
    hess = Matrix::Zero(nw, nw);
    std::vector<Matrix> scaled(static_cast<std::size_t>(nw));
    for (const auto& l : lmis) {
      Eigen::LLT<Matrix> llt(lmi_at(l, w));
      const auto lower = llt.matrixL();
      for (int k = 0; k < nw; ++k) {
        // L^{-1} H_k L^{-T}
        Matrix t = lower.solve(l.h[static_cast<std::size_t>(k)]);
        scaled[static_cast<std::size_t>(k)] = lower.solve(t.transpose());
        grad(k) -= scaled[static_cast<std::size_t>(k)].trace();
      }
      for (int k = 0; k < nw; ++k) {
        for (int j = 0; j <= k; ++j) {
          const double v = scaled[static_cast<std::size_t>(k)].cwiseProduct(scaled[static_cast<std::size_t>(j)]).sum();
          hess(k, j) += v;
          if (j != k) hess(j, k) += v;
        }
      }
    }
    if (l0.size() > 0) {
      const Vector inv = (l0 + g * w).cwiseInverse();
      grad -= g.transpose() * inv;
      hess += g.transpose() * inv.cwiseAbs2().asDiagonal() * g;
    }
  }
};

// -H^{-1} g with H Jacobi-scaled first: barrier Hessians of thin feasible sets
// mix curvatures many orders of magnitude apart.
Vector newton_direction(const Matrix& hess, const Vector& grad) {
  const Vector d = hess.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
  Matrix hs = d.asDiagonal() * hess * d.asDiagonal();
  hs.diagonal().array() += 1e-13;
  return -(d.asDiagonal() * hs.ldlt().solve(d.asDiagonal() * grad)).eval();
}

struct PathResult {
  Vector w;
  int newton_steps = 0;
  double gap = 0.0;
  bool converged = false;
  bool stopped_early = false;
};

// Follows the central path of min t c^T w + barrier(w) from a strictly
// feasible w. `stop` may end the run early (used by phase I).
PathResult follow_path(const BarrierProblem& bp, Vector w, double tol, int max_steps,
                       const std::function<bool(const Vector&)>& stop) {
  PathResult res;
  const double degree = std::max(1, bp.barrier_degree());
  const double mu = 20.0;
  Vector grad;
  Matrix hess;
  // Starting weight: the t that best centers w, min_t || t c + grad ||_{H^-1}.
  double t = 1.0;
  {
    bp.derivatives(w, grad, hess);
    const Vector hc = -newton_direction(hess, bp.c);
    const double chc = bp.c.dot(hc);
    if (chc > 0.0 && std::isfinite(chc)) {
      const double best = -grad.dot(hc) / chc;
      if (std::isfinite(best)) t = std::clamp(best, 1.0, 1e12);
    }
  }
  for (int outer = 0; outer < 400; ++outer) {
    bool centered = false, stuck = false;
    for (int inner = 0; inner < 500; ++inner) {
      if (res.newton_steps >= max_steps) {
        res.w = w;
        res.gap = degree / t;
        return res;
      }
      bp.derivatives(w, grad, hess);
      grad += t * bp.c;
      const Vector dw = newton_direction(hess, grad);
      const double dec = -grad.dot(dw);
      ++res.newton_steps;
      if (!std::isfinite(dec)) break;
      if (dec < 1e-9) {
        centered = true;
        break;
      }
      const double f0 = t * bp.c.dot(w) + bp.barrier(w);
      double step = 1.0;
      bool moved = false;
      bool stalled = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vector cand = w + step * dw;
        const double fc = t * bp.c.dot(cand) + bp.barrier(cand);
        if (std::isfinite(fc) && fc <= f0 - 0.25 * step * dec) {
          w = cand;
          moved = true;
          stalled = f0 - fc <= 1e-13 * std::max(1.0, std::abs(f0));
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        centered = dec < 1e-4;
        stuck = !centered;
        break;
      }
      // Near the center a full step is always acceptable in exact arithmetic;
      // backtracking there means rounding dominates.
      if ((step < 1.0 && dec < 1e-6) || (stalled && dec < 1e-3)) {
        centered = true;
        break;
      }
      if (stop && stop(w)) {
        res.w = w;
        res.stopped_early = true;
        res.gap = degree / t;
        return res;
      }
      if (w.lpNorm<Eigen::Infinity>() > 1e15) {
        res.w = w;
        res.gap = degree / t;
        return res;
      }
    }
    if (stuck) break;
    const double gap = degree / t;
    if (centered && gap <= tol * std::max(1.0, std::abs(bp.c.dot(w)))) {
      res.w = w;
      res.gap = gap;
      res.converged = true;
      return res;
    }
    t *= centered ? mu : 1.0;
  }
  res.w = w;
  res.gap = degree / t;
  return res;
}

double min_slack(const BarrierProblem& bp, const Vector& w) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& l : bp.lmis) {
    const Matrix f = bp.lmi_at(l, w);
    worst = std::min(worst, Eigen::SelfAdjointEigenSolver<Matrix>(f, Eigen::EigenvaluesOnly).eigenvalues()(0));
  }
  if (bp.l0.size() > 0) worst = std::min(worst, (bp.l0 + bp.g * w).minCoeff());
  return worst;
}

}  // namespace

SdpSolution solve_barrier(const SdpProblem& p, const Compiled& cp, const SolverOptions& opts) {
  const int n = cp.cols();
  SdpSolution sol;

  // Equalities: the zero-cone rows and intervals of zero width, as (row of A, value of s).
  std::vector<std::pair<int, double>> eq_rows;
  std::vector<int> ineq_rows;  // interval indices
  for (int i = 0; i < cp.n_eq; ++i) eq_rows.emplace_back(i, 0.0);
  for (int i = 0; i < cp.n_int; ++i) {
    const double lo = cp.lo(i), hi = cp.hi(i);
    const bool point = std::isfinite(lo) && std::isfinite(hi) &&
                       hi - lo <= 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (point) {
      eq_rows.emplace_back(cp.n_eq + i, 0.5 * (lo + hi));
    } else {
      ineq_rows.push_back(i);
    }
  }
  // s = b - A x = value  ->  A x = b - value
  Matrix e(static_cast<Eigen::Index>(eq_rows.size()), n);
  Vector f(static_cast<Eigen::Index>(eq_rows.size()));
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    e.row(static_cast<Eigen::Index>(i)) = cp.A.row(eq_rows[i].first);
    f(static_cast<Eigen::Index>(i)) = cp.b(eq_rows[i].first) - eq_rows[i].second;
  }

  Vector xp = Vector::Zero(n);
  Matrix basis = Matrix::Identity(n, n);
  if (e.rows() > 0) {
    Eigen::JacobiSVD<Matrix> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cut = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > cut ? 1 : 0;
    xp = svd.solve(f);
    if ((e * xp - f).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + f.lpNorm<Eigen::Infinity>())) {
      finalize(p, cp, xp, sol);
      sol.status = SdpStatus::kInfeasible;
      return sol;
    }
    basis = svd.matrixV().rightCols(n - rank);
  }
  const int r = static_cast<int>(basis.cols());

  // Reduced problem in z, x = xp + basis z.
  BarrierProblem bp;
  bp.nw = r;
  bp.c = basis.transpose() * cp.c;
  const Vector b_red = cp.b - cp.A * xp;
  const Matrix a_red = cp.A * basis;
  std::vector<Vector> g_rows;
  std::vector<double> l0s;
  for (int row : ineq_rows) {
    const int arow = cp.n_eq + row;
    // lo <= b - a z <= hi
    if (std::isfinite(cp.lo(row))) {
      g_rows.push_back(-a_red.row(arow).transpose());
      l0s.push_back(b_red(arow) - cp.lo(row));
    }
    if (std::isfinite(cp.hi(row))) {
      g_rows.push_back(a_red.row(arow).transpose());
      l0s.push_back(cp.hi(row) - b_red(arow));
    }
  }
  bp.g = Matrix(static_cast<Eigen::Index>(g_rows.size()), r);
  bp.l0 = Vector(static_cast<Eigen::Index>(l0s.size()));
  for (std::size_t i = 0; i < g_rows.size(); ++i) {
    bp.g.row(static_cast<Eigen::Index>(i)) = g_rows[i].transpose();
    bp.l0(static_cast<Eigen::Index>(i)) = l0s[i];
  }
  for (std::size_t bi = 0; bi < cp.psd_dims.size(); ++bi) {
    const int d = cp.psd_dims[bi];
    const int off = cp.psd_offsets[bi];
    Lmi l;
    l.f0 = smat(b_red.segment(off, svec_size(d)), d);
    for (int k = 0; k < r; ++k) l.h.push_back(-smat(a_red.block(off, k, svec_size(d), 1), d));
    bp.lmis.push_back(std::move(l));
  }

  double scale = 1.0;
  for (const auto& l : bp.lmis) scale = std::max(scale, l.f0.cwiseAbs().maxCoeff());
  if (bp.l0.size() > 0) scale = std::max(scale, bp.l0.cwiseAbs().maxCoeff());

  // Phase I: min sigma s.t. F_j(z) + sigma I >= 0, l(z) + sigma >= 0, sigma >= -scale.
  Vector z = Vector::Zero(r);
  double widen = 0.0;
  const double start_slack = min_slack(bp, z);
  if (!(start_slack > 1e-9 * scale) || r == 0) {
    BarrierProblem ph;
    ph.nw = r + 1;
    ph.c = Vector::Zero(r + 1);
    ph.c(r) = 1.0;
    for (const auto& l : bp.lmis) {
      Lmi pl = l;
      pl.h.push_back(Matrix::Identity(l.f0.rows(), l.f0.cols()));
      ph.lmis.push_back(std::move(pl));
    }
    // The box |z_i| <= bound keeps the phase-I barrier bounded below along
    // recession directions of the feasible set. A small box gives a well
    // scaled start for phase II, so it is grown only when needed.
    const auto ng = bp.g.rows();
    ph.g = Matrix::Zero(ng + 1 + 2 * r, r + 1);
    ph.g.topLeftCorner(ng, r) = bp.g;
    ph.g.block(0, r, ng, 1).setOnes();
    ph.g(ng, r) = 1.0;
    for (int k = 0; k < r; ++k) {
      ph.g(ng + 1 + 2 * k, k) = 1.0;
      ph.g(ng + 2 + 2 * k, k) = -1.0;
    }
    // Interiors thinner than this are treated as empty.
    const double thin = 1e-9 * scale;
    PathResult ph_res;
    for (double bound = 1e2 * scale; bound <= 1e8 * scale; bound *= 1e2) {
      ph.l0 = Vector::Constant(ng + 1 + 2 * r, bound);
      ph.l0.head(ng) = bp.l0;
      ph.l0(ng) = scale;
      Vector w0 = Vector::Zero(r + 1);
      w0(r) = std::max(0.0, -start_slack) + 1.0;
      ph_res = follow_path(ph, w0, 1e-9, opts.max_iter - sol.iterations,
                           [&](const Vector& w) { return w(r) < -thin && min_slack(bp, w.head(r)) > thin; });
      sol.iterations += ph_res.newton_steps;
      if (ph_res.stopped_early || !ph_res.converged || ph_res.w(r) <= 1e-7 * scale) break;
    }
    z = ph_res.w.head(r);
    const double sigma = ph_res.w(r);
    if (!ph_res.stopped_early) {
      if (sigma > 1e-7 * scale || !ph_res.converged || !opts.allow_widening) {
        finalize(p, cp, xp + basis * z, sol);
        sol.status = !ph_res.converged          ? SdpStatus::kIterationLimit
                     : sigma > 1e-7 * scale     ? SdpStatus::kInfeasible
                                                : SdpStatus::kNoInterior;
        return sol;
      }
      // No interior: widen every cone past the phase-I optimum.
      widen = std::max(sigma, 0.0) + 2.0 * thin;
      for (auto& l : bp.lmis) l.f0.diagonal().array() += widen;
      bp.l0.array() += widen;
    }
  }

  PathResult res = follow_path(bp, z, opts.tol, opts.max_iter - sol.iterations, nullptr);
  sol.iterations += res.newton_steps;
  finalize(p, cp, xp + basis * res.w, sol);
  sol.dual_residual = res.gap;
  sol.primal_residual = widen;
  sol.status = res.converged ? SdpStatus::kOptimal : SdpStatus::kIterationLimit;
  return sol;
}

}  // namespace crsn::detail
