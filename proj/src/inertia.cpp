#include <cmath>
#include <sstream>

#include "idvo/objective.hpp"

namespace idvo {

void InertiaParams::validate() const {
  if (!(chi > 0.0) || !(a_typ > 0.0) || !(j_typ > 0.0)) {
    std::ostringstream msg;
    msg << "inertia parameters must be positive (chi=" << chi << ", a_typ=" << a_typ
        << ", j_typ=" << j_typ << ")";
    throw DomainError(msg.str());
  }
}

namespace {

struct Differences {
  std::vector<Eigen::Vector3d> dp;  // P[i+1] - P[i]
  std::vector<Eigen::Vector3d> de;  // wrap(E[i+1] - E[i])
};

Differences differences(std::span<const Pose6DoF> poses) {
  Differences d;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    d.dp.push_back(poses[i + 1].translation() - poses[i].translation());
    d.de.push_back(wrap_angles(Eigen::Vector3d(poses[i + 1].orientation() - poses[i].orientation())));
  }
  return d;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Derivative of hinge_ratio; 0 at the kinks.
double hinge_ratio_derivative(double x, double typ, bool symmetric) {
  const double ax = std::abs(x);
  if (ax <= typ) return 0.0;
  if (!symmetric && x < 0.0) return 0.0;
  // 1 - typ / |x|
  return typ * sign(x) / (x * x);
}

}  // namespace

MotionSeries motion_series(std::span<const Pose6DoF> poses, double chi) {
  if (poses.size() < 2) {
    throw LengthError("motion_series: need at least 2 poses, got " +
                      std::to_string(poses.size()));
  }
  const Differences d = differences(poses);
  MotionSeries m;
  for (std::size_t i = 0; i < d.dp.size(); ++i) {
    m.v.push_back(d.dp[i].norm());
    m.phi_rate.push_back(d.de[i].norm());
  }
  for (std::size_t i = 0; i + 1 < m.v.size(); ++i) {
    m.a.push_back((m.v[i + 1] - m.v[i]) + chi * (m.phi_rate[i + 1] - m.phi_rate[i]));
  }
  for (std::size_t i = 0; i + 1 < m.a.size(); ++i) m.j.push_back(m.a[i + 1] - m.a[i]);
  return m;
}

double hinge_ratio(double x, double typ, bool symmetric) {
  const double ax = std::abs(x);
  if (ax <= typ) return 0.0;
  const double denom = symmetric ? ax : x;
  return std::max(0.0, (ax - typ) / denom);
}

InertiaLoss inertia_loss(std::span<const Pose6DoF> poses, const InertiaParams& params) {
  if (poses.size() < 4) {
    throw LengthError("inertia_loss: need at least 4 poses, got " + std::to_string(poses.size()));
  }
  params.validate();
  const bool sym = params.symmetric_denominator;
  const MotionSeries m = motion_series(poses, params.chi);

  InertiaLoss out;
  out.grad.assign(poses.size(), Vector6d::Zero());
  std::vector<double> g_a(m.a.size(), 0.0);
  std::vector<double> g_j(m.j.size(), 0.0);

  // Step i pairs a[i] with the jerk ending at it, j[i-1].
  for (std::size_t i = 0; i < m.a.size(); ++i) {
    const double la = hinge_ratio(m.a[i], params.a_typ, sym);
    const double lj = i > 0 ? hinge_ratio(m.j[i - 1], params.j_typ, sym) : 0.0;
    const double s = la + lj;
    out.value += std::abs(s);
    const double outer = sign(s);
    if (outer == 0.0) continue;
    g_a[i] += outer * hinge_ratio_derivative(m.a[i], params.a_typ, sym);
    if (i > 0) g_j[i - 1] += outer * hinge_ratio_derivative(m.j[i - 1], params.j_typ, sym);
  }

  for (std::size_t i = 0; i < m.j.size(); ++i) {
    g_a[i + 1] += g_j[i];
    g_a[i] -= g_j[i];
  }
  std::vector<double> g_v(m.v.size(), 0.0);
  std::vector<double> g_phi(m.phi_rate.size(), 0.0);
  for (std::size_t i = 0; i < m.a.size(); ++i) {
    g_v[i + 1] += g_a[i];
    g_v[i] -= g_a[i];
    g_phi[i + 1] += params.chi * g_a[i];
    g_phi[i] -= params.chi * g_a[i];
  }

  const Differences d = differences(poses);
  for (std::size_t i = 0; i < d.dp.size(); ++i) {
    if (m.v[i] > 0.0) {
      const Eigen::Vector3d g = g_v[i] * d.dp[i] / m.v[i];
      out.grad[i + 1].head<3>() += g;
      out.grad[i].head<3>() -= g;
    }
    if (m.phi_rate[i] > 0.0) {
      const Eigen::Vector3d g = g_phi[i] * d.de[i] / m.phi_rate[i];
      out.grad[i + 1].tail<3>() += g;
      out.grad[i].tail<3>() -= g;
    }
  }
  return out;
}

}  // namespace idvo
