#include "sispersist/hamiltonian.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "sispersist/asymptotics.hpp"
#include "sispersist/error.hpp"

namespace sispersist {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Vector field F, its rotation P F = grad H, and their Jacobians at z = (y, theta).
struct Field {
  Vec F;
  Vec PF;
  Mat J;
  Mat PJ;
};

void eval_field(const ModelSpec& spec, const double* z, bool with_jacobian, Field& out) {
  const auto& g = spec.groups;
  const std::size_t k = g.size();
  const double b = spec.beta;
  const double c = spec.gamma;
  const double* y = z;
  const double* th = z + k;

  double force = 0.0;
  double w = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    force += g.lambda[j] * y[j];
    w += g.mu[j] * (g.f[j] - y[j]) * std::expm1(th[j]);
  }
  out.F.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double ep = std::exp(th[i]);
    const double em = std::exp(-th[i]);
    out.F[i] = b * force * g.mu[i] * (g.f[i] - y[i]) * ep - c * y[i] * em;
    out.F[k + i] = -b * g.lambda[i] * w + b * force * g.mu[i] * std::expm1(th[i]) - c * std::expm1(-th[i]);
  }
  out.PF.resize(2 * k);
  out.PF.head(k) = -out.F.tail(k);
  out.PF.tail(k) = out.F.head(k);
  if (!with_jacobian) return;

  Mat& J = out.J;
  J.setZero(2 * k, 2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double ep = std::exp(th[i]);
    const double em = std::exp(-th[i]);
    const auto ii = static_cast<Eigen::Index>(i);
    const auto ki = static_cast<Eigen::Index>(k + i);
    for (std::size_t l = 0; l < k; ++l) {
      const auto ll = static_cast<Eigen::Index>(l);
      const auto kl = static_cast<Eigen::Index>(k + l);
      J(ii, ll) = b * g.lambda[l] * g.mu[i] * (g.f[i] - y[i]) * ep;
      J(ki, ll) = b * g.lambda[i] * g.mu[l] * std::expm1(th[l]) + b * g.lambda[l] * g.mu[i] * std::expm1(th[i]);
      J(ki, kl) = -b * g.lambda[i] * g.mu[l] * (g.f[l] - y[l]) * std::exp(th[l]);
    }
    J(ii, ii) -= b * force * g.mu[i] * ep + c * em;
    J(ii, ki) = b * force * g.mu[i] * (g.f[i] - y[i]) * ep + c * y[i] * em;
    J(ki, ki) += b * force * g.mu[i] * ep + c * em;
  }
  const auto kk = static_cast<Eigen::Index>(k);
  out.PJ.resize(2 * k, 2 * k);
  out.PJ.topRows(kk) = -J.bottomRows(kk);
  out.PJ.bottomRows(kk) = J.topRows(kk);
}

double hamiltonian_at(const ModelSpec& spec, const double* z) {
  const auto& g = spec.groups;
  const std::size_t k = g.size();
  double force = 0.0;
  double w = 0.0;
  double rec = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    force += g.lambda[j] * z[j];
    w += g.mu[j] * (g.f[j] - z[j]) * std::expm1(z[k + j]);
    rec += z[j] * std::expm1(-z[k + j]);
  }
  return spec.beta * force * w + spec.gamma * rec;
}

// Row basis of a rank-r projector; v lies in the complementary invariant
// subspace iff rows * v = 0.
Mat row_basis(const Mat& projector, Eigen::Index rank) {
  Eigen::ColPivHouseholderQR<Mat> qr(projector.transpose());
  const Mat q = qr.householderQ();
  return q.leftCols(rank).transpose();
}

// Matrix sign function by the scaled Newton iteration.
Mat matrix_sign(const Mat& a) {
  Mat x = a;
  for (int it = 0; it < 100; ++it) {
    const Mat inv = x.inverse();
    const double mu = std::sqrt(inv.norm() / x.norm());
    const Mat next = 0.5 * (mu * x + inv / mu);
    const double change = (next - x).norm();
    x = next;
    if (change <= 1e-14 * x.norm()) break;
  }
  return x;
}

// Boundary data of the problem at one parameter value.
struct System {
  ModelSpec spec;
  std::size_t k = 0;
  std::size_t d = 0;
  Vec left_eq;   // (y*, 0)
  Vec right_eq;  // (0, theta*)
  Mat left_rows;   // annihilate the unstable subspace at left_eq
  Mat right_rows;  // annihilate the stable subspace at right_eq
  double left_rate = 0.0;   // slowest unstable rate at left_eq
  double right_rate = 0.0;  // slowest stable rate at right_eq
  double phase_target = 0.0;
  double scale = 1.0;
};

System make_system(const ModelSpec& spec) {
  System s;
  s.spec = spec;
  s.k = spec.k();
  s.d = 2 * s.k;
  const auto k = static_cast<Eigen::Index>(s.k);
  const auto ystar = endemic_equilibrium(spec);
  const auto thstar = theta_star(spec);
  s.left_eq = Vec::Zero(2 * k);
  s.right_eq = Vec::Zero(2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    s.left_eq[i] = ystar[static_cast<std::size_t>(i)];
    s.right_eq[k + i] = thstar[static_cast<std::size_t>(i)];
    s.phase_target += 0.5 * ystar[static_cast<std::size_t>(i)];
  }
  s.scale = (s.left_eq - s.right_eq).lpNorm<Eigen::Infinity>();

  const auto setup_end = [&](const Vec& eq, bool keep_unstable, Mat& rows, double& rate) {
    Field f;
    eval_field(spec, eq.data(), true, f);
    Eigen::EigenSolver<Mat> es(f.J, false);
    int positive = 0;
    rate = INFINITY;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double re = es.eigenvalues()[i].real();
      if (re > 0.0) ++positive;
      if (keep_unstable && re > 0.0) rate = std::min(rate, re);
      if (!keep_unstable && re < 0.0) rate = std::min(rate, -re);
    }
    if (positive != k) {
      std::ostringstream os;
      os << "equilibrium is not hyperbolic with a " << k << "-dimensional unstable subspace";
      throw ConvergenceFailure(os.str(), 0.0);
    }
    const Mat sign = matrix_sign(f.J);
    const Mat id = Mat::Identity(2 * k, 2 * k);
    // keep the unstable subspace: kill its complement through the stable projector
    const Mat proj = keep_unstable ? Mat(0.5 * (id - sign)) : Mat(0.5 * (id + sign));
    rows = row_basis(proj, k);
  };
  setup_end(s.left_eq, true, s.left_rows, s.left_rate);
  setup_end(s.right_eq, false, s.right_rows, s.right_rate);
  return s;
}

// Unknowns: node values z_0..z_M stacked, then the unfolding parameter.
struct Discrete {
  std::vector<double> t;
  std::size_t phase_node = 0;
  Vec x;

  std::size_t nodes() const { return t.size(); }
};

double alpha_of(const Discrete& disc) { return disc.x[disc.x.size() - 1]; }

struct Assembly {
  Vec residual;
  Eigen::SparseMatrix<double> jacobian;
};

void assemble(const System& sys, const Discrete& disc, bool with_jacobian, Assembly& out) {
  const std::size_t d = sys.d;
  const std::size_t k = sys.k;
  const std::size_t m = disc.nodes() - 1;
  const auto n = static_cast<Eigen::Index>(d * (m + 1) + 1);
  const auto dd = static_cast<Eigen::Index>(d);
  const auto kk = static_cast<Eigen::Index>(k);
  const double alpha = alpha_of(disc);
  const Eigen::Index acol = n - 1;

  std::vector<Field> node(m + 1);
  for (std::size_t i = 0; i <= m; ++i) eval_field(sys.spec, disc.x.data() + i * d, with_jacobian, node[i]);

  out.residual.resize(n);
  std::vector<Eigen::Triplet<double>> trip;
  if (with_jacobian) trip.reserve(m * (2 * d * d + d) + 2 * k * d + k + 16);
  const auto add_block = [&](Eigen::Index r0, Eigen::Index c0, const Mat& b) {
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j)
        if (b(i, j) != 0.0) trip.emplace_back(r0 + i, c0 + j, b(i, j));
  };

  const auto z = [&](std::size_t i) { return disc.x.segment(static_cast<Eigen::Index>(i * d), dd); };

  out.residual.head(kk) = sys.left_rows * (z(0) - sys.left_eq);
  if (with_jacobian) add_block(0, 0, sys.left_rows);

  const Mat id = Mat::Identity(dd, dd);
  Field mid;
  for (std::size_t i = 0; i < m; ++i) {
    const double h = disc.t[i + 1] - disc.t[i];
    const Vec gi = node[i].F + alpha * node[i].PF;
    const Vec gj = node[i + 1].F + alpha * node[i + 1].PF;
    const Vec zm = 0.5 * (z(i) + z(i + 1)) + (h / 8.0) * (gi - gj);
    eval_field(sys.spec, zm.data(), with_jacobian, mid);
    const Vec gm = mid.F + alpha * mid.PF;
    const auto row = kk + static_cast<Eigen::Index>(i) * dd;
    out.residual.segment(row, dd) = z(i + 1) - z(i) - (h / 6.0) * (gi + 4.0 * gm + gj);
    if (!with_jacobian) continue;
    const Mat ji = node[i].J + alpha * node[i].PJ;
    const Mat jj = node[i + 1].J + alpha * node[i + 1].PJ;
    const Mat jm = mid.J + alpha * mid.PJ;
    const Mat a = -id - (h / 6.0) * (ji + 4.0 * jm * (0.5 * id + (h / 8.0) * ji));
    const Mat b = id - (h / 6.0) * (jj + 4.0 * jm * (0.5 * id - (h / 8.0) * jj));
    const Vec c = -(h / 6.0) * (node[i].PF +
                                4.0 * (mid.PF + (h / 8.0) * jm * (node[i].PF - node[i + 1].PF)) +
                                node[i + 1].PF);
    add_block(row, static_cast<Eigen::Index>(i) * dd, a);
    add_block(row, static_cast<Eigen::Index>(i + 1) * dd, b);
    for (Eigen::Index r = 0; r < dd; ++r) trip.emplace_back(row + r, acol, c[r]);
  }

  const Eigen::Index rrow = kk + static_cast<Eigen::Index>(m) * dd;
  out.residual.segment(rrow, kk) = sys.right_rows * (z(m) - sys.right_eq);
  if (with_jacobian) add_block(rrow, static_cast<Eigen::Index>(m) * dd, sys.right_rows);

  double phase = -sys.phase_target;
  for (std::size_t j = 0; j < k; ++j) {
    phase += disc.x[static_cast<Eigen::Index>(disc.phase_node * d + j)];
    if (with_jacobian)
      trip.emplace_back(n - 1, static_cast<Eigen::Index>(disc.phase_node * d + j), 1.0);
  }
  out.residual[n - 1] = phase;

  if (with_jacobian) {
    out.jacobian.resize(n, n);
    out.jacobian.setFromTriplets(trip.begin(), trip.end());
  }
}

struct NewtonReport {
  bool ok = false;
  int iterations = 0;
  double residual = INFINITY;
};

NewtonReport newton(const System& sys, Discrete& disc, const BvpOptions& opts) {
  NewtonReport rep;
  Assembly as;
  Assembly trial;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool pattern_ready = false;
  for (int it = 0; it < opts.max_newton; ++it) {
    assemble(sys, disc, true, as);
    const double rn = as.residual.lpNorm<Eigen::Infinity>();
    rep.residual = rn;
    if (!std::isfinite(rn)) return rep;
    if (rn < opts.newton_tol) {
      rep.ok = true;
      return rep;
    }
    if (!pattern_ready) {
      lu.analyzePattern(as.jacobian);
      pattern_ready = true;
    }
    lu.factorize(as.jacobian);
    if (lu.info() != Eigen::Success) return rep;
    const Vec dx = lu.solve(as.residual);
    if (!dx.allFinite()) return rep;

    double step = 1.0;
    Discrete next = disc;
    double rt = INFINITY;
    for (;;) {
      next.x = disc.x - step * dx;
      assemble(sys, next, false, trial);
      rt = trial.residual.lpNorm<Eigen::Infinity>();
      if (std::isfinite(rt) && rt < rn) break;
      step *= 0.5;
      if (step < 1.0 / 256.0) return rep;
    }
    disc.x = next.x;
    ++rep.iterations;
    rep.residual = rt;
    if (rt < opts.newton_tol) {
      rep.ok = true;
      return rep;
    }
    // Converged to rounding level even if the absolute target is out of reach.
    if (step == 1.0 && dx.lpNorm<Eigen::Infinity>() < 1e-14 && rt < 1e3 * opts.newton_tol) {
      rep.ok = true;
      return rep;
    }
  }
  return rep;
}

double tail_length(double scale, double offset, double rate) {
  return std::log(std::max(scale, 10.0 * offset) / offset) / rate;
}

// Extends the mesh at either end so that it covers the interval on which the
// linearized tails decay to the requested offset; new nodes follow the
// slowest linear mode.
void ensure_coverage(const System& sys, Discrete& disc, double offset) {
  const std::size_t d = sys.d;
  const double need_left = tail_length(sys.scale, offset, sys.left_rate);
  const double need_right = tail_length(sys.scale, offset, sys.right_rate);
  const double alpha = alpha_of(disc);

  if (-disc.t.front() < need_left) {
    const double h = disc.t[1] - disc.t[0];
    const double t0 = disc.t.front();
    const auto extra = static_cast<std::size_t>(std::ceil((need_left + t0) / h));
    std::vector<double> t(extra);
    std::vector<double> vals(extra * d);
    const Vec z0 = disc.x.head(static_cast<Eigen::Index>(d));
    for (std::size_t e = 0; e < extra; ++e) {
      t[e] = t0 - h * static_cast<double>(extra - e);
      const Vec v = sys.left_eq + (z0 - sys.left_eq) * std::exp(sys.left_rate * (t[e] - t0));
      std::copy(v.data(), v.data() + d, vals.begin() + static_cast<std::ptrdiff_t>(e * d));
    }
    Vec x(disc.x.size() + static_cast<Eigen::Index>(extra * d));
    std::copy(vals.begin(), vals.end(), x.data());
    std::copy(disc.x.data(), disc.x.data() + disc.x.size(), x.data() + extra * d);
    disc.t.insert(disc.t.begin(), t.begin(), t.end());
    disc.x = std::move(x);
    disc.phase_node += extra;
  }
  if (disc.t.back() < need_right) {
    const std::size_t m = disc.nodes() - 1;
    const double h = disc.t[m] - disc.t[m - 1];
    const double tm = disc.t.back();
    const auto extra = static_cast<std::size_t>(std::ceil((need_right - tm) / h));
    const Vec zm = disc.x.segment(static_cast<Eigen::Index>(m * d), static_cast<Eigen::Index>(d));
    Vec x(disc.x.size() + static_cast<Eigen::Index>(extra * d));
    std::copy(disc.x.data(), disc.x.data() + m * d + d, x.data());
    for (std::size_t e = 1; e <= extra; ++e) {
      const double te = tm + h * static_cast<double>(e);
      disc.t.push_back(te);
      const Vec v = sys.right_eq + (zm - sys.right_eq) * std::exp(-sys.right_rate * (te - tm));
      std::copy(v.data(), v.data() + d, x.data() + (m + e) * d);
    }
    x[x.size() - 1] = alpha;
    disc.x = std::move(x);
  }
}

// Cubic Hermite interpolant on one interval at fraction s in [0, 1].
Vec hermite_value(const Vec& z0, const Vec& z1, const Vec& g0, const Vec& g1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * z0 + (s3 - 2 * s2 + s) * h * g0 + (-2 * s3 + 3 * s2) * z1 +
         (s3 - s2) * h * g1;
}

Vec hermite_slope(const Vec& z0, const Vec& z1, const Vec& g0, const Vec& g1, double h, double s) {
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * z0 + (3 * s2 - 4 * s + 1) * h * g0 + (-6 * s2 + 6 * s) * z1 +
          (3 * s2 - 2 * s) * h * g1) /
         h;
}

// Bisects the intervals carrying the largest local defect.
void refine(const System& sys, Discrete& disc) {
  const std::size_t d = sys.d;
  const auto dd = static_cast<Eigen::Index>(d);
  const std::size_t m = disc.nodes() - 1;
  const double alpha = alpha_of(disc);
  std::vector<Vec> g(m + 1);
  Field f;
  for (std::size_t i = 0; i <= m; ++i) {
    eval_field(sys.spec, disc.x.data() + i * d, false, f);
    g[i] = f.F + alpha * f.PF;
  }
  const auto z = [&](std::size_t i) -> Vec { return disc.x.segment(static_cast<Eigen::Index>(i * d), dd); };
  std::vector<double> err(m, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double h = disc.t[i + 1] - disc.t[i];
    for (double s : {0.25, 0.75}) {
      const Vec p = hermite_value(z(i), z(i + 1), g[i], g[i + 1], h, s);
      eval_field(sys.spec, p.data(), false, f);
      const Vec defect = hermite_slope(z(i), z(i + 1), g[i], g[i + 1], h, s) - (f.F + alpha * f.PF);
      err[i] = std::max(err[i], h * defect.lpNorm<Eigen::Infinity>());
    }
    worst = std::max(worst, err[i]);
  }
  const double cut = 0.05 * worst;

  std::vector<double> t;
  std::vector<double> vals;
  std::size_t phase = 0;
  for (std::size_t i = 0; i <= m; ++i) {
    if (i == disc.phase_node) phase = t.size();
    t.push_back(disc.t[i]);
    const Vec zi = z(i);
    vals.insert(vals.end(), zi.data(), zi.data() + d);
    if (i < m && err[i] > cut) {
      const double h = disc.t[i + 1] - disc.t[i];
      t.push_back(disc.t[i] + 0.5 * h);
      const Vec zm = hermite_value(z(i), z(i + 1), g[i], g[i + 1], h, 0.5);
      vals.insert(vals.end(), zm.data(), zm.data() + d);
    }
  }
  Vec x(static_cast<Eigen::Index>(vals.size() + 1));
  std::copy(vals.begin(), vals.end(), x.data());
  x[x.size() - 1] = alpha;
  disc.t = std::move(t);
  disc.x = std::move(x);
  disc.phase_node = phase;
}

double max_abs_h(const System& sys, const Discrete& disc) {
  double worst = 0.0;
  for (std::size_t i = 0; i < disc.nodes(); ++i)
    worst = std::max(worst, std::abs(hamiltonian_at(sys.spec, disc.x.data() + i * sys.d)));
  return worst;
}

double end_distance(const System& sys, const Discrete& disc, bool left) {
  const auto dd = static_cast<Eigen::Index>(sys.d);
  if (left) return (disc.x.head(dd) - sys.left_eq).lpNorm<Eigen::Infinity>();
  const auto m = static_cast<Eigen::Index>(disc.nodes() - 1);
  return (disc.x.segment(m * dd, dd) - sys.right_eq).lpNorm<Eigen::Infinity>();
}

Trajectory to_trajectory(const System& sys, const Discrete& disc) {
  const std::size_t k = sys.k;
  const std::size_t d = sys.d;
  const auto dd = static_cast<Eigen::Index>(d);
  const auto kk = static_cast<Eigen::Index>(k);
  const std::size_t m = disc.nodes() - 1;
  const double alpha = alpha_of(disc);

  Trajectory tr;
  tr.times = disc.t;
  tr.unfolding = alpha;
  tr.points.resize(m + 1);
  std::vector<Vec> g(m + 1);
  Field f;
  for (std::size_t i = 0; i <= m; ++i) {
    const double* zi = disc.x.data() + i * d;
    tr.points[i].y.assign(zi, zi + k);
    tr.points[i].theta.assign(zi + k, zi + d);
    eval_field(sys.spec, zi, false, f);
    g[i] = f.F + alpha * f.PF;
  }
  const auto z = [&](std::size_t i) -> Vec { return disc.x.segment(static_cast<Eigen::Index>(i * d), dd); };

  double fwd = 0.0;
  double bwd = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double h = disc.t[i + 1] - disc.t[i];
    const Vec zi = z(i);
    const Vec zj = z(i + 1);
    const Vec zm = hermite_value(zi, zj, g[i], g[i + 1], h, 0.5);
    eval_field(sys.spec, zm.data(), false, f);
    const Vec gm = f.F + alpha * f.PF;
    fwd += h / 6.0 *
           (zi.tail(kk).dot(g[i].head(kk)) + 4.0 * zm.tail(kk).dot(gm.head(kk)) +
            zj.tail(kk).dot(g[i + 1].head(kk)));
    bwd -= h / 6.0 *
           (zi.head(kk).dot(g[i].tail(kk)) + 4.0 * zm.head(kk).dot(gm.tail(kk)) +
            zj.head(kk).dot(g[i + 1].tail(kk)));
  }
  // Linearized tails beyond the mesh ends.
  const Vec z0 = z(0);
  const Vec zl = z(m);
  const Vec ystar = sys.left_eq.head(kk);
  const Vec thstar = sys.right_eq.tail(kk);
  fwd += 0.5 * z0.tail(kk).dot(z0.head(kk) - ystar);
  fwd -= 0.5 * (zl.tail(kk) + thstar).dot(zl.head(kk));
  bwd -= 0.5 * (ystar + z0.head(kk)).dot(z0.tail(kk));
  bwd += 0.5 * zl.head(kk).dot(zl.tail(kk) - thstar);

  tr.action_forward = fwd;
  tr.action_backward = bwd;
  tr.h_residual_max = max_abs_h(sys, disc);
  tr.left_distance = end_distance(sys, disc, true);
  tr.right_distance = end_distance(sys, disc, false);
  return tr;
}

Discrete from_trajectory(const Trajectory& tr) {
  Discrete disc;
  disc.t = tr.times;
  const std::size_t k = tr.points.front().y.size();
  const std::size_t d = 2 * k;
  disc.x.resize(static_cast<Eigen::Index>(tr.points.size() * d + 1));
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    std::copy(tr.points[i].y.begin(), tr.points[i].y.end(), disc.x.data() + i * d);
    std::copy(tr.points[i].theta.begin(), tr.points[i].theta.end(), disc.x.data() + i * d + k);
  }
  disc.x[disc.x.size() - 1] = tr.unfolding;
  const auto it = std::min_element(disc.t.begin(), disc.t.end(),
                                   [](double a, double b) { return std::abs(a) < std::abs(b); });
  disc.phase_node = static_cast<std::size_t>(it - disc.t.begin());
  return disc;
}

// Closed-form orbit of the model with lambda = mu = 1: y_i = f_i u(t),
// theta_i = -ln(R0 (1 - u)), u = u* / (1 + e^{gamma (R0 - 1) t}).
Discrete homogeneous_orbit(const System& sys, const BvpOptions& opts) {
  const ModelSpec& spec = sys.spec;
  const double R = r0(spec);
  const double ustar = 1.0 - 1.0 / R;
  const double rate = spec.gamma * (R - 1.0);
  const double need_left = tail_length(sys.scale, opts.endpoint_offset, sys.left_rate);
  const double need_right = tail_length(sys.scale, opts.endpoint_offset, sys.right_rate);
  const double h = opts.initial_step / (spec.gamma * std::max(1.0, R));
  const auto nl = static_cast<std::size_t>(std::ceil(need_left / h));
  const auto nr = static_cast<std::size_t>(std::ceil(need_right / h));

  Discrete disc;
  for (std::size_t i = 0; i < nl; ++i) disc.t.push_back(-need_left + need_left * static_cast<double>(i) / nl);
  disc.phase_node = disc.t.size();
  for (std::size_t i = 0; i <= nr; ++i) disc.t.push_back(need_right * static_cast<double>(i) / nr);

  const std::size_t k = sys.k;
  disc.x.resize(static_cast<Eigen::Index>(disc.t.size() * 2 * k + 1));
  for (std::size_t i = 0; i < disc.t.size(); ++i) {
    const double e = rate * disc.t[i];
    // u* / (1 + e^e) evaluated without overflow
    const double u = e > 0.0 ? ustar * std::exp(-e) / (1.0 + std::exp(-e)) : ustar / (1.0 + std::exp(e));
    const double th = -std::log(R * (1.0 - u));
    for (std::size_t j = 0; j < k; ++j) {
      disc.x[static_cast<Eigen::Index>(i * 2 * k + j)] = spec.groups.f[j] * u;
      disc.x[static_cast<Eigen::Index>(i * 2 * k + k + j)] = th;
    }
  }
  disc.x[disc.x.size() - 1] = 0.0;
  return disc;
}

ModelSpec blend(const ModelSpec& a, const ModelSpec& b, double s) {
  if (s >= 1.0) return b;
  if (a.k() != b.k()) throw InvalidModel("continuation needs equal group counts");
  GroupStructure g;
  for (std::size_t i = 0; i < a.k(); ++i) {
    g.f.push_back((1 - s) * a.groups.f[i] + s * b.groups.f[i]);
    g.lambda.push_back((1 - s) * a.groups.lambda[i] + s * b.groups.lambda[i]);
    g.mu.push_back((1 - s) * a.groups.mu[i] + s * b.groups.mu[i]);
  }
  const double gamma = (1 - s) * a.gamma + s * b.gamma;
  const double target = (1 - s) * r0(a) + s * r0(b);
  return spec_for_r0(std::move(g), gamma, target);
}

void check_problem(const ModelSpec& spec) {
  if (spec.stages != 1) throw InvalidModel("the boundary-value solver handles exponential periods only");
  const double R = r0(spec);
  if (!(R > 1.0)) {
    std::ostringstream os;
    os << "R0 = " << R << " <= 1: no heteroclinic orbit";
    throw Subcritical(os.str());
  }
}

Trajectory finish(const System& sys, Discrete disc, const BvpOptions& opts, int newton_total, int steps) {
  double offset = opts.endpoint_offset;
  for (int pass = 0;; ++pass) {
    const bool far = end_distance(sys, disc, true) > opts.max_endpoint_distance ||
                     end_distance(sys, disc, false) > opts.max_endpoint_distance;
    const double hmax = max_abs_h(sys, disc);
    if (!far && hmax < opts.h_tol) break;
    if (pass >= opts.max_refinements || disc.nodes() > opts.max_nodes) {
      if (far) {
        std::ostringstream os;
        os << "orbit ends stay " << std::max(end_distance(sys, disc, true), end_distance(sys, disc, false))
           << " away from the equilibria";
        throw ConvergenceFailure(os.str(), hmax);
      }
      break;  // accepted with the residual reported in the trajectory
    }
    if (far) {
      offset *= 0.1;
      ensure_coverage(sys, disc, offset);
    } else {
      refine(sys, disc);
    }
    const NewtonReport rep = newton(sys, disc, opts);
    newton_total += rep.iterations;
    if (!rep.ok) throw ConvergenceFailure("Newton failed after mesh refinement", rep.residual);
  }
  Trajectory tr = to_trajectory(sys, disc);
  tr.newton_iterations = newton_total;
  tr.continuation_steps = steps;
  tr.converged = true;
  return tr;
}

Trajectory continue_from(const ModelSpec& from, Discrete start, const ModelSpec& to, const BvpOptions& opts) {
  Discrete cur = std::move(start);
  int newton_total = 0;
  int steps = 0;
  double s = 0.0;
  double ds = 1.0;
  {
    const System sys = make_system(from);
    ensure_coverage(sys, cur, opts.endpoint_offset);
    const NewtonReport rep = newton(sys, cur, opts);
    newton_total += rep.iterations;
    if (!rep.ok) throw ConvergenceFailure("Newton failed on the starting orbit", rep.residual);
  }
  while (s < 1.0) {
    const double target = std::min(1.0, s + ds);
    const System sys = make_system(blend(from, to, target));
    Discrete trial = cur;
    ensure_coverage(sys, trial, opts.endpoint_offset);
    const NewtonReport rep = newton(sys, trial, opts);
    newton_total += rep.iterations;
    if (rep.ok) {
      cur = std::move(trial);
      s = target;
      ++steps;
      if (rep.iterations <= 6) ds = std::min(1.0, 2.0 * ds);
    } else {
      ds *= 0.5;
      if (ds < opts.min_continuation_step) {
        std::ostringstream os;
        os << "continuation stalled at s = " << s;
        throw ConvergenceFailure(os.str(), rep.residual);
      }
    }
  }
  return finish(make_system(to), std::move(cur), opts, newton_total, steps);
}

}  // namespace

double hamiltonian(const ModelSpec& spec, const PhasePoint& p) {
  std::vector<double> z(p.y);
  z.insert(z.end(), p.theta.begin(), p.theta.end());
  return hamiltonian_at(spec, z.data());
}

EomRhs eom_rhs(const ModelSpec& spec, const PhasePoint& p) {
  std::vector<double> z(p.y);
  z.insert(z.end(), p.theta.begin(), p.theta.end());
  Field f;
  eval_field(spec, z.data(), false, f);
  const std::size_t k = spec.k();
  EomRhs out;
  out.dy.assign(f.F.data(), f.F.data() + k);
  out.dtheta.assign(f.F.data() + k, f.F.data() + 2 * k);
  return out;
}

Eigen::MatrixXd eom_jacobian(const ModelSpec& spec, const PhasePoint& p) {
  std::vector<double> z(p.y);
  z.insert(z.end(), p.theta.begin(), p.theta.end());
  Field f;
  eval_field(spec, z.data(), true, f);
  return f.J;
}

Trajectory solve_heteroclinic(const ModelSpec& spec, const BvpOptions& opts) {
  check_problem(spec);
  GroupStructure g;
  g.f = spec.groups.f;
  g.lambda.assign(spec.k(), 1.0);
  g.mu.assign(spec.k(), 1.0);
  const ModelSpec flat = spec_for_r0(std::move(g), spec.gamma, r0(spec));
  const System sys = make_system(flat);
  return continue_from(flat, homogeneous_orbit(sys, opts), spec, opts);
}

Trajectory continue_heteroclinic(const ModelSpec& from, const Trajectory& orbit, const ModelSpec& to,
                                 const BvpOptions& opts) {
  check_problem(from);
  check_problem(to);
  return continue_from(from, from_trajectory(orbit), to, opts);
}

ModelSpec two_group_spec(double lambda1, double mu1, double r0_target, double gamma) {
  GroupStructure g;
  g.f = {0.5, 0.5};
  g.lambda = {lambda1, 2.0 - lambda1};
  g.mu = {mu1, 2.0 - mu1};
  return spec_for_r0(std::move(g), gamma, r0_target);
}

std::vector<GridCell> action_grid(std::span<const double> lambda1_values, std::span<const double> mu1_values,
                                  double r0_target, double gamma, const BvpOptions& opts) {
  const std::size_t nl = lambda1_values.size();
  const std::size_t nm = mu1_values.size();
  std::vector<GridCell> cells(nl * nm);
  if (cells.empty()) return cells;

  const auto closest = [](std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (std::abs(v[i] - 1.0) < std::abs(v[best] - 1.0)) best = i;
    return best;
  };
  const std::size_t cl = closest(lambda1_values);
  const std::size_t cm = closest(mu1_values);

  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto ring = [&](std::size_t idx) {
    const auto a = static_cast<long>(idx / nm) - static_cast<long>(cl);
    const auto b = static_cast<long>(idx % nm) - static_cast<long>(cm);
    return std::max(std::labs(a), std::labs(b));
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ring(a) < ring(b); });

  std::map<std::size_t, std::pair<ModelSpec, Trajectory>> solved;
  for (std::size_t idx : order) {
    GridCell& cell = cells[idx];
    cell.lambda1 = lambda1_values[idx / nm];
    cell.mu1 = mu1_values[idx % nm];
    try {
      const ModelSpec spec = two_group_spec(cell.lambda1, cell.mu1, r0_target, gamma);
      cell.beta = spec.beta;
      std::vector<std::pair<double, const std::pair<ModelSpec, Trajectory>*>> parents;
      for (const auto& [other, entry] : solved) {
        const double dl = lambda1_values[other / nm] - cell.lambda1;
        const double dm = mu1_values[other % nm] - cell.mu1;
        parents.emplace_back(dl * dl + dm * dm, &entry);
      }
      std::stable_sort(parents.begin(), parents.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      if (parents.size() > 3) parents.resize(3);

      // nearest neighbours first, then a fresh solve from the homogeneous orbit
      std::optional<Trajectory> found;
      for (const auto& [dist, parent] : parents) {
        try {
          found = continue_heteroclinic(parent->first, parent->second, spec, opts);
          break;
        } catch (const ConvergenceFailure&) {
        }
      }
      if (!found) found = solve_heteroclinic(spec, opts);
      Trajectory tr = std::move(*found);
      cell.action = tr.action();
      cell.h_residual_max = tr.h_residual_max;
      cell.converged = tr.converged;
      solved.emplace(idx, std::make_pair(spec, std::move(tr)));
    } catch (const Error& e) {
      cell.converged = false;
      cell.message = e.what();
    }
  }
  return cells;
}

}  // namespace sispersist
