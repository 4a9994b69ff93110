#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "conic_internal.hpp"

namespace crsn {

int SdpProblem::add_variable(int dim, std::string name) {
  if (dim < 1) throw Error(ErrorCode::kInvalidInput, "variable dimension must be positive");
  vars_.push_back({std::move(name), dim, num_coords_});
  num_coords_ += vech_size(dim);
  return static_cast<int>(vars_.size()) - 1;
}

void SdpProblem::add_psd_block(int dim, BlockMap map, std::string name) {
  blocks_.push_back({std::move(name), dim, std::move(map)});
}

void SdpProblem::add_equality(ScalarMap map, std::string name) {
  eqs_.push_back({std::move(name), std::move(map), 0.0, 0.0});
}

void SdpProblem::add_interval(ScalarMap map, double lo, double hi, std::string name) {
  if (lo > hi) throw Error(ErrorCode::kInvalidInput, "interval " + name + " is empty");
  intervals_.push_back({std::move(name), std::move(map), lo, hi});
}

VarValues SdpProblem::unpack(const Vector& coords) const {
  std::vector<Matrix> vals;
  vals.reserve(vars_.size());
  for (const auto& v : vars_) vals.push_back(unvech(coords.segment(v.offset, vech_size(v.dim))).mat());
  return VarValues(std::move(vals));
}

Vector SdpProblem::pack(const std::vector<Matrix>& values) const {
  Vector out(num_coords_);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    out.segment(vars_[i].offset, vech_size(vars_[i].dim)) = vech(SymMatrix(values[i]));
  }
  return out;
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kNoInterior: return "no-interior";
    case SdpStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace detail {

void svec_into(const Matrix& m, Eigen::Ref<Vector> out) {
  const int d = static_cast<int>(m.rows());
  int k = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = j; i < d; ++i) out(k++) = (i == j) ? m(i, j) : std::numbers::sqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
}

Matrix smat(const Eigen::Ref<const Vector>& v, int d) {
  Matrix m(d, d);
  int k = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = j; i < d; ++i) {
      const double val = (i == j) ? v(k) : v(k) / std::numbers::sqrt2;
      m(i, j) = val;
      m(j, i) = val;
      ++k;
    }
  }
  return m;
}

Compiled compile(const SdpProblem& p) {
  const int n = p.num_coords();
  std::vector<VarValues> probes;
  probes.reserve(static_cast<std::size_t>(n) + 1);
  probes.push_back(p.unpack(Vector::Zero(n)));
  for (int k = 0; k < n; ++k) probes.push_back(p.unpack(Vector::Unit(n, k)));

  Compiled cp;
  cp.n_eq = static_cast<int>(p.equalities().size());
  cp.n_int = static_cast<int>(p.intervals().size());
  int rows = cp.n_eq + cp.n_int;
  for (const auto& blk : p.blocks()) {
    cp.psd_offsets.push_back(rows);
    cp.psd_dims.push_back(blk.dim);
    rows += svec_size(blk.dim);
  }
  cp.A = Matrix::Zero(rows, n);
  cp.b = Vector::Zero(rows);
  cp.lo.resize(cp.n_int);
  cp.hi.resize(cp.n_int);

  auto scalar_row = [&](int row, const ScalarMap& f) {
    const double f0 = f(probes[0]);
    cp.b(row) = f0;
    for (int k = 0; k < n; ++k) cp.A(row, k) = -(f(probes[static_cast<std::size_t>(k) + 1]) - f0);
  };
  for (int i = 0; i < cp.n_eq; ++i) scalar_row(i, p.equalities()[static_cast<std::size_t>(i)].map);
  for (int i = 0; i < cp.n_int; ++i) {
    const auto& iv = p.intervals()[static_cast<std::size_t>(i)];
    scalar_row(cp.n_eq + i, iv.map);
    cp.lo(i) = iv.lo;
    cp.hi(i) = iv.hi;
  }
  for (std::size_t bi = 0; bi < p.blocks().size(); ++bi) {
    const auto& blk = p.blocks()[bi];
    const int d = blk.dim;
    const int off = cp.psd_offsets[bi];
    const int sz = svec_size(d);
    const Matrix f0 = blk.map(probes[0]);
    if (f0.rows() != d || f0.cols() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "block " + blk.name + " has the wrong size");
    }
    svec_into(f0, cp.b.segment(off, sz));
    Vector col(sz);
    for (int k = 0; k < n; ++k) {
      svec_into(blk.map(probes[static_cast<std::size_t>(k) + 1]) - f0, col);
      cp.A.block(off, k, sz, 1) = -col;
    }
  }
  cp.c.resize(n);
  if (p.objective()) {
    cp.c0 = p.objective()(probes[0]);
    for (int k = 0; k < n; ++k) cp.c(k) = p.objective()(probes[static_cast<std::size_t>(k) + 1]) - cp.c0;
  } else {
    cp.c.setZero();
  }
  return cp;
}

}  // namespace detail

namespace {

using namespace detail;

constexpr double kInf = std::numeric_limits<double>::infinity();

void project_psd_svec(Eigen::Ref<Vector> v, int d) {
  if (d == 1) {
    v(0) = std::max(0.0, v(0));
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(smat(v, d));
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  svec_into(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose(), v);
}

// Ruiz equilibration: A_hat = E A D. Rows of one PSD cone share a single
// factor so the scaled cone is still the PSD cone.
struct Scaling {
  Vector d, e;
  double cost = 1.0;
};

Scaling equilibrate(const Compiled& cp, int iters) {
  const int n = static_cast<int>(cp.A.cols());
  const int m = cp.rows();
  Scaling sc{Vector::Ones(n), Vector::Ones(m), 1.0};
  Matrix a = cp.A;
  auto clampf = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < iters; ++it) {
    Vector dcol(n), erow(m);
    for (int j = 0; j < n; ++j) {
      const double nrm = a.col(j).lpNorm<Eigen::Infinity>();
      dcol(j) = nrm > 1e-12 ? 1.0 / std::sqrt(nrm) : 1.0;
    }
    for (int i = 0; i < m; ++i) {
      const double nrm = a.row(i).lpNorm<Eigen::Infinity>();
      erow(i) = nrm > 1e-12 ? 1.0 / std::sqrt(nrm) : 1.0;
    }
    for (std::size_t bi = 0; bi < cp.psd_dims.size(); ++bi) {
      const int off = cp.psd_offsets[bi];
      const int sz = svec_size(cp.psd_dims[bi]);
      const double nrm = a.middleRows(off, sz).lpNorm<Eigen::Infinity>();
      erow.segment(off, sz).setConstant(nrm > 1e-12 ? 1.0 / std::sqrt(nrm) : 1.0);
    }
    for (int j = 0; j < n; ++j) sc.d(j) = clampf(sc.d(j) * dcol(j));
    for (int i = 0; i < m; ++i) sc.e(i) = clampf(sc.e(i) * erow(i));
    a = sc.e.asDiagonal() * cp.A * sc.d.asDiagonal();
  }
  const double cnorm = (sc.d.cwiseProduct(cp.c)).lpNorm<Eigen::Infinity>();
  sc.cost = cnorm > 1e-12 ? 1.0 / cnorm : 1.0;
  return sc;
}

struct ScaledCones {
  int n_eq, n_int;
  Vector lo, hi;
  std::vector<int> psd_dims, psd_offsets;
};

void project(const ScaledCones& k, Eigen::Ref<Vector> s) {
  s.head(k.n_eq).setZero();
  for (int i = 0; i < k.n_int; ++i) s(k.n_eq + i) = std::clamp(s(k.n_eq + i), k.lo(i), k.hi(i));
  for (std::size_t bi = 0; bi < k.psd_dims.size(); ++bi) {
    const int d = k.psd_dims[bi];
    project_psd_svec(s.segment(k.psd_offsets[bi], svec_size(d)), d);
  }
}

// Tests whether w certifies primal infeasibility: A^T w = 0 and
// b^T w < inf_{s in C} <w, s>. w is first moved into the recession-dual of C
// (PSD parts projected), so the test is exact for the vector it checks.
bool certifies_infeasibility(const Matrix& a, const Vector& b, const ScaledCones& k, Vector w, double tol) {
  for (std::size_t bi = 0; bi < k.psd_dims.size(); ++bi) {
    const int d = k.psd_dims[bi];
    project_psd_svec(w.segment(k.psd_offsets[bi], svec_size(d)), d);
  }
  const double wn = w.lpNorm<Eigen::Infinity>();
  if (wn < 1e-12) return false;
  w /= wn;
  double support = 0.0;  // inf over C of <w, s>
  for (int i = 0; i < k.n_int; ++i) {
    const double wi = w(k.n_eq + i);
    if (wi > 0.0) {
      if (!std::isfinite(k.lo(i))) return false;
      support += wi * k.lo(i);
    } else if (wi < 0.0) {
      if (!std::isfinite(k.hi(i))) return false;
      support += wi * k.hi(i);
    }
  }
  if ((a.transpose() * w).lpNorm<Eigen::Infinity>() > tol) return false;
  return b.dot(w) - support < -tol;
}

}  // namespace

namespace detail {

SdpSolution solve_splitting(const SdpProblem& p, const Compiled& cp, const SolverOptions& opts,
                            const WarmStart* warm) {
  const int n = static_cast<int>(cp.A.cols());
  const int m = cp.rows();
  const Scaling sc = equilibrate(cp, opts.scaling_iters);

  const Matrix a = sc.e.asDiagonal() * cp.A * sc.d.asDiagonal();
  const Matrix at = a.transpose();
  const Vector b = sc.e.cwiseProduct(cp.b);
  const Vector q = sc.cost * sc.d.cwiseProduct(cp.c);
  ScaledCones cones{cp.n_eq, cp.n_int, Vector(cp.n_int), Vector(cp.n_int), cp.psd_dims, cp.psd_offsets};
  for (int i = 0; i < cp.n_int; ++i) {
    const double e = sc.e(cp.n_eq + i);
    cones.lo(i) = std::isfinite(cp.lo(i)) ? cp.lo(i) * e : -kInf;
    cones.hi(i) = std::isfinite(cp.hi(i)) ? cp.hi(i) * e : kInf;
  }
  Vector row_weight = Vector::Ones(m);
  for (int i = 0; i < cp.n_eq; ++i) row_weight(i) = 1e3;
  for (int i = 0; i < cp.n_int; ++i) {
    if (cones.lo(i) == cones.hi(i)) row_weight(cp.n_eq + i) = 1e3;
  }

  Vector x = Vector::Zero(n), s = Vector::Zero(m), y = Vector::Zero(m);
  if (warm != nullptr && warm->x.size() == n && warm->s.size() == m && warm->y.size() == m) {
    x = warm->x;
    s = warm->s;
    y = warm->y;
  }

  double rho = opts.rho;
  Vector rho_vec = rho * row_weight;
  Eigen::LLT<Matrix> llt;
  auto factor = [&] {
    Matrix kkt = at * rho_vec.asDiagonal() * a;
    kkt.diagonal().array() += opts.sigma;
    llt.compute(kkt);
  };
  factor();

  const Vector e_inv = sc.e.cwiseInverse();
  const Vector d_inv = sc.d.cwiseInverse();
  SdpSolution sol;
  sol.status = SdpStatus::kIterationLimit;
  Vector x_tilde(n), s_tilde(m), s_rel(m), y_prev = y, ax(m), aty(n);
  const int check_every = 25;
  int it = 0;
  double rp = 0.0, rd = 0.0;
  for (it = 1; it <= opts.max_iter; ++it) {
    x_tilde = llt.solve(opts.sigma * x - q + at * (rho_vec.cwiseProduct(b - s) - y));
    s_tilde = b - a * x_tilde;
    x = opts.alpha * x_tilde + (1.0 - opts.alpha) * x;
    s_rel = opts.alpha * s_tilde + (1.0 - opts.alpha) * s;
    s = s_rel - y.cwiseQuotient(rho_vec);
    project(cones, s);
    y += rho_vec.cwiseProduct(s - s_rel);

    if (it % check_every != 0 && it != opts.max_iter) continue;

    ax = a * x;
    aty = at * y;
    rp = e_inv.cwiseProduct(ax + s - b).lpNorm<Eigen::Infinity>();
    const double norm_p = std::max({e_inv.cwiseProduct(ax).lpNorm<Eigen::Infinity>(),
                                    e_inv.cwiseProduct(s).lpNorm<Eigen::Infinity>(),
                                    e_inv.cwiseProduct(b).lpNorm<Eigen::Infinity>()});
    rd = d_inv.cwiseProduct(q + aty).lpNorm<Eigen::Infinity>() / sc.cost;
    const double norm_d = std::max(d_inv.cwiseProduct(q).lpNorm<Eigen::Infinity>(),
                                   d_inv.cwiseProduct(aty).lpNorm<Eigen::Infinity>()) / sc.cost;
    if (rp <= opts.tol * (1.0 + norm_p) && rd <= opts.tol * (1.0 + norm_d)) {
      sol.status = SdpStatus::kOptimal;
      break;
    }
    const Vector dy = y - y_prev;
    y_prev = y;
    if (certifies_infeasibility(a, b, cones, dy, opts.infeasibility_tol) ||
        certifies_infeasibility(a, b, cones, -dy, opts.infeasibility_tol)) {
      sol.status = SdpStatus::kInfeasible;
      break;
    }
    if (opts.adaptive_rho) {
      // Balance the scaled primal and dual residuals.
      const double sp = (ax + s - b).lpNorm<Eigen::Infinity>();
      const double sd = (q + aty).lpNorm<Eigen::Infinity>();
      if (sp > 0.0 && sd > 0.0) {
        const double next = std::clamp(rho * std::sqrt(sp / sd), 1e-6, 1e6);
        if (next > 5.0 * rho || next < 0.2 * rho) {
          rho = next;
          rho_vec = rho * row_weight;
          factor();
        }
      }
    }
  }
  sol.iterations = std::min(it, opts.max_iter);
  sol.primal_residual = rp;
  sol.dual_residual = rd;
  sol.iterate = {x, s, y};

  finalize(p, cp, sc.d.cwiseProduct(x), sol);
  return sol;
}

void finalize(const SdpProblem& p, const Compiled& cp, const Vector& x, SdpSolution& sol) {
  const VarValues vals = p.unpack(x);
  sol.values.clear();
  sol.values.reserve(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) sol.values.emplace_back(vals[static_cast<int>(i)]);
  sol.objective_value = cp.c0 + cp.c.dot(x);

  const Vector slack = cp.b - cp.A * x;
  double viol = 0.0;
  for (int i = 0; i < cp.n_eq; ++i) viol = std::max(viol, std::abs(slack(i)));
  for (int i = 0; i < cp.n_int; ++i) {
    const double v = slack(cp.n_eq + i);
    viol = std::max({viol, cp.lo(i) - v, v - cp.hi(i)});
  }
  for (std::size_t bi = 0; bi < cp.psd_dims.size(); ++bi) {
    const int d = cp.psd_dims[bi];
    const Matrix blk = smat(slack.segment(cp.psd_offsets[bi], svec_size(d)), d);
    viol = std::max(viol, -Eigen::SelfAdjointEigenSolver<Matrix>(blk, Eigen::EigenvaluesOnly).eigenvalues()(0));
  }
  sol.primal_infeasibility = viol;
}

}  // namespace detail

SdpSolution solve(const SdpProblem& p, const SolverOptions& opts, const WarmStart* warm) {
  const detail::Compiled cp = detail::compile(p);
  if (opts.method == SdpMethod::kSplitting) return detail::solve_splitting(p, cp, opts, warm);
  return detail::solve_barrier(p, cp, opts);
}

}  // namespace crsn
