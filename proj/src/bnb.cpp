#include "crsn/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "crsn/riccati.hpp"

namespace crsn {

namespace {

constexpr double kPruneSlack = 1e-9;
constexpr double kEdgeFraction = 0.01;

// z = G vech(Z) for a symmetric Z.
Vector apply_map(const Matrix& g, const Matrix& z) { return g * vech(SymMatrix(symmetrize(z))); }

double weight(int i, int j) { return i == j ? 1.0 : 2.0; }

bool inside(double lo, double hi, double v) {
  const double slack = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  return v >= lo - slack && v <= hi + slack;
}

// Replaces X by the smallest X feasible for this Z, the fixed point of
// g_{lambda, R + Z^{-1}}; keeps the relaxation point when that fails.
void tighten(Relaxation& r, const LtiSystem& sys, double lambda, const SymMatrix& m) {
  try {
    const SymMatrix z = psd_project(r.Z);
    const SymMatrix x = fixed_point(RiccatiOp::from_information(sys, lambda, silent_information(sys.R(), z)), sys);
    if (!psd_leq(x, m, 1e-9)) return;
    const Matrix c = sys.C();
    const double val = ((c * x.mat() * c.transpose() + sys.R().mat()) * z.mat()).trace();
    if (val <= r.true_objective) {
      r.X = x;
      r.Z = z;
      r.S = x.inverse();
      r.true_objective = val;
    }
  } catch (const Error&) {
  }
}

}  // namespace

bool Box::valid() const {
  const auto ok = [](const Vector& lo, const Vector& hi) {
    return lo.size() == hi.size() && (lo.array() <= hi.array()).all();
  };
  return x_lo.size() == z_lo.size() && ok(x_lo, x_hi) && ok(z_lo, z_hi) && ok(y_lo, y_hi);
}

std::pair<double, double> x_bounds(const Box& b, int i, int j) {
  const int n = static_cast<int>(std::lround((std::sqrt(8.0 * b.size() + 1.0) - 1.0) / 2.0));
  const int k = vech_index(i, j, n);
  return {b.x_lo(k), b.x_hi(k)};
}

std::pair<double, double> z_bounds(const Box& b, int i, int j) {
  const int n = static_cast<int>(std::lround((std::sqrt(8.0 * b.size() + 1.0) - 1.0) / 2.0));
  const int k = vech_index(i, j, n);
  return {b.z_lo(k), b.z_hi(k)};
}

Matrix bilinear_map(const Matrix& c) {
  const int m = static_cast<int>(c.rows());
  const int n = static_cast<int>(c.cols());
  Matrix g = Matrix::Zero(vech_size(n), vech_size(m));
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const int k = vech_index(i, j, n);
      for (int b = 0; b < m; ++b) {
        for (int a = b; a < m; ++a) {
          const int l = vech_index(a, b, m);
          // (C^T Z C)_ij = sum_ab C_ai Z_ab C_bj with Z_ab = Z_ba
          g(k, l) = a == b ? c(a, i) * c(a, j) : c(a, i) * c(b, j) + c(b, i) * c(a, j);
        }
      }
    }
  }
  return g;
}

Box initial_box(const LtiSystem& sys, double lambda, const SymMatrix& m, const SolverOptions& opts) {
  const SymMatrix x0 = check_quality_bound(sys, lambda, m);
  const double zstar = solve_zstar(sys, lambda, m, x0, opts).value;
  const int n = sys.n();
  const int p = sys.m();
  Box b;
  b.x_lo.resize(vech_size(n));
  b.x_hi.resize(vech_size(n));
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const int k = vech_index(i, j, n);
      const double span = std::sqrt(m(i, i) * m(j, j));
      b.x_lo(k) = i == j ? x0(i, i) : -span;
      b.x_hi(k) = span;
    }
  }
  b.y_lo.resize(vech_size(p));
  b.y_hi = Vector::Constant(vech_size(p), zstar);
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) b.y_lo(vech_index(i, j, p)) = i == j ? 0.0 : -zstar;
  }
  const Matrix g = bilinear_map(sys.C());
  b.z_lo = Vector::Zero(g.rows());
  b.z_hi = Vector::Zero(g.rows());
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      const double a = g(k, l);
      b.z_lo(k) += a * (a >= 0.0 ? b.y_lo(l) : b.y_hi(l));
      b.z_hi(k) += a * (a >= 0.0 ? b.y_hi(l) : b.y_lo(l));
    }
  }
  return b;
}

double convex_envelope(double x_lo, double x_hi, double z_lo, double z_hi, double x, double z) {
  if (!(x_lo <= x_hi && z_lo <= z_hi)) throw Error(ErrorCode::kDomain, "empty rectangle");
  if (!inside(x_lo, x_hi, x) || !inside(z_lo, z_hi, z)) {
    throw Error(ErrorCode::kDomain, "point outside the rectangle");
  }
  return std::max(z_lo * x + x_lo * z - x_lo * z_lo, z_hi * x + x_hi * z - x_hi * z_hi);
}

Relaxation solve_relaxation(const Box& box, const LtiSystem& sys, double lambda, const SymMatrix& m,
                            const SolverOptions& opts) {
  if (!box.valid()) throw Error(ErrorCode::kDomain, "invalid box");
  const int n = sys.n();
  const int p = sys.m();
  const int nk = vech_size(n);
  if (box.size() != nk || box.y_lo.size() != vech_size(p)) throw Error(ErrorCode::kDimensionMismatch, "box size");
  const PsiData d = psi_data(sys, lambda);
  const Matrix g = bilinear_map(sys.C());
  const Matrix r = sys.R().mat();
  const Matrix mm = m.mat();

  SdpProblem prob;
  const int xv = prob.add_variable(n, "X");
  const int zv = prob.add_variable(p, "Z");
  const int sv = prob.add_variable(n, "S");
  std::vector<int> tv(static_cast<std::size_t>(nk));
  std::vector<std::pair<int, int>> entry(static_cast<std::size_t>(nk));
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const int k = vech_index(i, j, n);
      entry[static_cast<std::size_t>(k)] = {i, j};
      tv[static_cast<std::size_t>(k)] = prob.add_scalar("t" + std::to_string(k));
    }
  }

  prob.set_objective([=](const VarValues& v) {
    double val = (r * v[zv]).trace();
    for (int k = 0; k < nk; ++k) {
      const auto [i, j] = entry[static_cast<std::size_t>(k)];
      val += weight(i, j) * v.scalar(tv[static_cast<std::size_t>(k)]);
    }
    return val;
  });
  prob.add_psd_block(2 * n, [=](const VarValues& v) { return coupling_block(v[xv], v[sv]); }, "X-S coupling");
  prob.add_psd_block(2 * n, [=](const VarValues& v) { return coupling_block(v[sv], mm); }, "S-M coupling");
  prob.add_psd_block(4 * n + p, build_psi(sv, zv, d), "Psi");
  prob.add_psd_block(p, [=](const VarValues& v) { return v[zv]; }, "Z");

  for (int k = 0; k < nk; ++k) {
    const auto [i, j] = entry[static_cast<std::size_t>(k)];
    const auto tk = tv[static_cast<std::size_t>(k)];
    const auto xk = [=](const VarValues& v) { return v[xv](i, j); };
    const auto zk = [=](const VarValues& v) { return g.row(k).dot(vech(SymMatrix(symmetrize(v[zv])))); };
    const double xl = box.x_lo(k), xh = box.x_hi(k), zl = box.z_lo(k), zh = box.z_hi(k);
    const std::string tag = std::to_string(k);
    prob.add_interval(xk, xl, xh, "x" + tag);
    prob.add_interval(zk, zl, zh, "z" + tag);
    const double inf = std::numeric_limits<double>::infinity();
    prob.add_interval([=](const VarValues& v) { return v.scalar(tk) - (zl * xk(v) + xl * zk(v) - xl * zl); }, 0.0,
                      inf, "lower piece " + tag);
    prob.add_interval([=](const VarValues& v) { return v.scalar(tk) - (zh * xk(v) + xh * zk(v) - xh * zh); }, 0.0,
                      inf, "upper piece " + tag);
  }
  for (int b = 0; b < p; ++b) {
    for (int a = b; a < p; ++a) {
      const int l = vech_index(a, b, p);
      prob.add_interval([=](const VarValues& v) { return v[zv](a, b); }, box.y_lo(l), box.y_hi(l),
                        "Z" + std::to_string(l));
    }
  }

  Relaxation out;
  const SdpSolution sol = solve(prob, opts);
  out.status = sol.status;
  // A box meeting the feasible set only on its boundary adds nothing: every
  // such point is a limit of interior points of the parent region, which the
  // sibling boxes cover.
  if (sol.status == SdpStatus::kInfeasible || sol.status == SdpStatus::kNoInterior) return out;
  if (sol.status != SdpStatus::kOptimal) {
    throw Error(ErrorCode::kSolverFailure, std::string("relaxation solve: ") + to_string(sol.status));
  }
  out.feasible = true;
  out.X = sol.value(xv);
  out.Z = sol.value(zv);
  out.S = sol.value(sv);
  out.value = sol.objective_value;
  const Matrix c = sys.C();
  out.true_objective = ((c * out.X.mat() * c.transpose() + r) * out.Z.mat()).trace();
  return out;
}

Vector envelope_gaps(const BnbNode& node, const Matrix& g) {
  const Box& b = node.box;
  const int nk = b.size();
  const int n = node.point.X.dim();
  const Vector z = apply_map(g, node.point.Z.mat());
  Vector gaps(nk);
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const int k = vech_index(i, j, n);
      const double x = std::clamp(node.point.X(i, j), b.x_lo(k), b.x_hi(k));
      const double zk = std::clamp(z(k), b.z_lo(k), b.z_hi(k));
      gaps(k) = x * zk - convex_envelope(b.x_lo(k), b.x_hi(k), b.z_lo(k), b.z_hi(k), x, zk);
    }
  }
  return gaps;
}

std::vector<Box> split(const BnbNode& node, const Matrix& g) {
  const Vector gaps = envelope_gaps(node, g);
  Eigen::Index at = 0;
  for (Eigen::Index k = 1; k < gaps.size(); ++k) {
    if (gaps(k) > gaps(at)) at = k;
  }
  if (!(gaps(at) > 0.0)) throw Error(ErrorCode::kDomain, "no coordinate with a positive envelope gap");
  const Box& b = node.box;
  const int n = node.point.X.dim();
  int pi = 0, pj = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      if (vech_index(i, j, n) == at) pi = i, pj = j;
    }
  }
  const auto cut = [](double lo, double hi, double v) {
    const double margin = kEdgeFraction * (hi - lo);
    return std::clamp(v, lo + margin, hi - margin);
  };
  const double xs = cut(b.x_lo(at), b.x_hi(at), node.point.X(pi, pj));
  const double zs = cut(b.z_lo(at), b.z_hi(at), apply_map(g, node.point.Z.mat())(at));

  std::vector<Box> kids(4, b);
  kids[0].x_hi(at) = xs, kids[0].z_hi(at) = zs;
  kids[1].x_lo(at) = xs, kids[1].z_hi(at) = zs;
  kids[2].x_lo(at) = xs, kids[2].z_lo(at) = zs;
  kids[3].x_hi(at) = xs, kids[3].z_lo(at) = zs;
  return kids;
}

const char* to_string(BnbStatus s) {
  switch (s) {
    case BnbStatus::kEpsOptimal: return "eps-optimal";
    case BnbStatus::kNodeLimit: return "node-limit";
  }
  return "unknown";
}

BnbResult design_closed(const LtiSystem& sys, double lambda, const SymMatrix& m, const BnbOptions& opts) {
  if (!feasibility_check(sys, lambda)) throw Error(ErrorCode::kInfeasibleLambda, "lambda below the critical value");
  if (opts.node_cap < 1) throw Error(ErrorCode::kInvalidInput, "node cap must be positive");
  const Matrix g = bilinear_map(sys.C());

  BnbResult res;
  res.root = initial_box(sys, lambda, m, opts.sdp);
  Relaxation root = solve_relaxation(res.root, sys, lambda, m, opts.sdp);
  if (!root.feasible) throw Error(ErrorCode::kSolverInfeasible, "root relaxation infeasible");
  res.nodes = 1;

  Relaxation best = root;
  tighten(best, sys, lambda, m);
  double upper = best.true_objective;
  res.eps = opts.eps > 0.0 ? opts.eps : 1e-4 * std::max(std::abs(upper), std::numeric_limits<double>::min());

  std::vector<BnbNode> open;
  open.push_back(BnbNode{res.root, std::min(root.value, upper), root, 1, 0});
  const auto lower_bound = [&] {
    double nu = upper;
    for (const auto& node : open) nu = std::min(nu, node.nu);
    return nu;
  };
  int stage = 1;
  res.trace.push_back({stage, lower_bound(), upper, static_cast<int>(open.size())});

  res.status = BnbStatus::kNodeLimit;
  while (true) {
    if (upper - lower_bound() <= res.eps) {
      res.status = BnbStatus::kEpsOptimal;
      break;
    }
    if (res.nodes + 4 > opts.node_cap) break;

    const auto pick = std::min_element(open.begin(), open.end(), [](const BnbNode& a, const BnbNode& b) {
      if (a.nu != b.nu) return a.nu < b.nu;
      if (a.stage != b.stage) return a.stage < b.stage;
      return a.child < b.child;
    });
    const BnbNode node = *pick;
    open.erase(pick);
    const Vector gaps = envelope_gaps(node, g);
    if (!(gaps.maxCoeff() > 1e-14 * std::max(1.0, std::abs(upper)))) continue;  // relaxation already exact

    const std::vector<Box> kids = split(node, g);
    std::vector<Relaxation> sols(kids.size());
    std::vector<std::exception_ptr> errors(kids.size());
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
    for (int t = 0; t < static_cast<int>(kids.size()); ++t) {
      try {
        sols[static_cast<std::size_t>(t)] = solve_relaxation(kids[static_cast<std::size_t>(t)], sys, lambda, m, opts.sdp);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    res.nodes += static_cast<int>(kids.size());
    ++stage;

    for (std::size_t t = 0; t < kids.size(); ++t) {
      if (!sols[t].feasible) continue;
      Relaxation s = sols[t];
      tighten(s, sys, lambda, m);
      if (s.true_objective < upper) {
        upper = s.true_objective;
        best = s;
      }
    }
    for (std::size_t t = 0; t < kids.size(); ++t) {
      const Relaxation& s = sols[t];
      if (!s.feasible) continue;
      // A child region is contained in its parent, so the parent bound stays valid.
      const double nu = std::min(std::max(s.value, node.nu), s.true_objective);
      if (nu <= upper + kPruneSlack) open.push_back(BnbNode{kids[t], nu, s, stage, static_cast<int>(t)});
    }
    std::erase_if(open, [&](const BnbNode& nd) { return nd.nu > upper + kPruneSlack; });
    res.trace.push_back({stage, lower_bound(), upper, static_cast<int>(open.size())});
  }

  res.stages = stage;
  res.upsilon_star = lower_bound();
  res.Upsilon_star = upper;
  res.X_star = best.X;
  res.Z_star = best.Z;
  res.S_star = best.S;
  return res;
}

double boundary_check(const BnbResult& result, const Box& box, const Matrix& c) {
  const int n = result.X_star.dim();
  const Vector z = apply_map(bilinear_map(c), result.Z_star.mat());
  double worst = std::numeric_limits<double>::infinity();
  const auto dist = [&](double lo, double hi, double v) {
    if (!(hi > lo)) return 0.0;
    return std::max(0.0, std::min(v - lo, hi - v)) / (hi - lo);
  };
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const int k = vech_index(i, j, n);
      worst = std::min(worst, dist(box.x_lo(k), box.x_hi(k), result.X_star(i, j)));
      worst = std::min(worst, dist(box.z_lo(k), box.z_hi(k), z(k)));
    }
  }
  return worst;
}

}  // namespace crsn
