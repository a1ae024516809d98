#include "nrl/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "nrl/error.hpp"

namespace nrl {

GammaVector compute_gamma(const Dataset& data) {
  GammaVector g;
  g.gamma.assign(data.d_aug(), 0.0);
  for (std::size_t j = 0; j < data.n(); ++j)
    for (std::size_t k = 0; k < data.d_aug(); ++k) g.gamma[k] += data.y(j) * data.x(j)[k];
  double s = 0.0;
  for (double v : g.gamma) s += v * v;
  g.norm = std::sqrt(s);
  require(g.norm > 0.0, ErrorCode::kAssumptionViolation, "gamma = sum y_i x_i vanishes");
  return g;
}

double c_tilde_from_ratio(double ratio) {
  const double r = std::abs(ratio);
  if (r == 0.0 || !std::isfinite(r)) return 0.0;
  return std::min(r, 1.0 / r);
}

NeuronScales neuron_scales(const NetworkParams& theta, const GammaVector& g) {
  require(theta.d_aug() == g.gamma.size(), ErrorCode::kInvalidInput, "neuron_scales: dimension mismatch");
  NeuronScales s;
  for (std::size_t i = 0; i < theta.m(); ++i) s.c.push_back(theta.a(i) * g.norm + dot(theta.w(i), g.gamma));
  if (theta.m() == 2) {
    if (s.c[1] != 0.0) s.ratio_c = s.c[0] / s.c[1];
    s.c_tilde = (s.c[0] == 0.0 || s.c[1] == 0.0) ? 0.0 : c_tilde_from_ratio(s.c[0] / s.c[1]);
  }
  return s;
}

HessianAtOrigin hessian_at_origin(const Dataset& data, const Activation& act, std::size_t m) {
  require(act.admissible_thm1(), ErrorCode::kAssumptionViolation,
          "activation '" + act.name() + "' needs sigma(0) = 0 and sigma'(0) != 0");
  require(m >= 1, ErrorCode::kInvalidInput, "m must be >= 1");
  const auto g = compute_gamma(data);
  const double s = act.d1(0.0);
  const std::size_t d = data.d_aug(), b = d + 1;
  HessianAtOrigin h;
  h.neg_hessian = Matrix(m * b, m * b);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      h.neg_hessian(i * b, i * b + 1 + k) = s * g.gamma[k];
      h.neg_hessian(i * b + 1 + k, i * b) = s * g.gamma[k];
    }
  const double mu1 = std::abs(s) * g.norm;
  h.eigenvalues.assign(m, mu1);
  h.eigenvalues.insert(h.eigenvalues.end(), m * (d - 1), 0.0);
  h.eigenvalues.insert(h.eigenvalues.end(), m, -mu1);
  h.spectrum.mu1 = mu1;
  h.spectrum.mu2 = d >= 2 ? 0.0 : -mu1;
  h.spectrum.top_eigenspace_dim = m;
  h.spectrum.rate_exponent = (mu1 - h.spectrum.mu2) / (2.0 * mu1 - h.spectrum.mu2);
  const double sg = s > 0 ? 1.0 : -1.0;
  h.top_direction.assign(b, 0.0);
  h.top_direction[0] = 1.0 / std::sqrt(2.0);
  for (std::size_t k = 0; k < d; ++k) h.top_direction[1 + k] = sg * g.gamma[k] / (std::sqrt(2.0) * g.norm);
  return h;
}

Matrix numeric_neg_hessian_at_origin(const Dataset& data, const Activation& act, std::size_t m, double h) {
  NetworkParams theta(m, data.d_aug());
  const std::size_t p = theta.size();
  Matrix out(p, p);
  auto at = [&](std::size_t k, double hk, std::size_t l, double hl) {
    NetworkParams t(m, data.d_aug());
    t.flat()[k] += hk;
    t.flat()[l] += hl;
    return loss(t, data, act);
  };
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t l = k; l < p; ++l) {
      const double v = (at(k, h, l, h) - at(k, h, l, -h) - at(k, -h, l, h) + at(k, -h, l, -h)) / (4.0 * h * h);
      out(k, l) = -v;
      out(l, k) = -v;
    }
  return out;
}

double time_shift(double alpha, const GammaVector& g) {
  require(alpha > 0.0 && std::isfinite(alpha), ErrorCode::kInvalidInput, "time_shift needs alpha > 0");
  return -std::log(alpha) / g.norm;
}

NetworkParams linearized_params(const NeuronScales& scales, const GammaVector& g, double t, std::size_t d_aug) {
  require(g.gamma.size() == d_aug, ErrorCode::kInvalidInput, "linearized_params: dimension mismatch");
  NetworkParams p(scales.c.size(), d_aug);
  const double e = std::exp(g.norm * t);
  for (std::size_t i = 0; i < scales.c.size(); ++i) {
    p.a(i) = scales.c[i] * e / (2.0 * g.norm);
    for (std::size_t k = 0; k < d_aug; ++k) p.w(i)[k] = scales.c[i] * g.gamma[k] * e / (2.0 * g.norm * g.norm);
  }
  return p;
}

NetworkParams rescale_to_ratio(const NetworkParams& theta, const GammaVector& g, const Vec& target_ratios) {
  require(target_ratios.size() == theta.m(), ErrorCode::kInvalidInput, "rescale_to_ratio: need one ratio per neuron");
  require(target_ratios[0] == 1.0, ErrorCode::kInvalidInput, "rescale_to_ratio: target_ratios[0] must be 1");
  const auto c = neuron_scales(theta, g).c;
  require(c[0] != 0.0, ErrorCode::kInfeasibleRescale, "rescale_to_ratio: C_1 = 0");
  NetworkParams out = theta;
  for (std::size_t k = 1; k < theta.m(); ++k) {
    const double want = target_ratios[k];
    require(std::isfinite(want), ErrorCode::kInvalidInput, "rescale_to_ratio: non-finite ratio");
    if (want == 0.0) {
      for (double& v : out.neuron(k)) v = 0.0;
      continue;
    }
    require(c[k] != 0.0, ErrorCode::kInfeasibleRescale,
            "rescale_to_ratio: C_" + std::to_string(k + 1) + " = 0 cannot reach a nonzero ratio");
    const double s = want * c[0] / c[k];
    for (double& v : out.neuron(k)) v *= s;
  }
  const auto got = neuron_scales(out, g).c;
  for (std::size_t k = 1; k < theta.m(); ++k) {
    const double r = got[k] / got[0];
    require(std::abs(r - target_ratios[k]) <= 1e-12 * std::max(1.0, std::abs(target_ratios[k])),
            ErrorCode::kInfeasibleRescale, "rescale_to_ratio: achieved ratio off by more than 1e-12");
  }
  return out;
}

namespace {

std::size_t bracket(const Trajectory& t, double iter) {
  const auto& s = t.snapshots;
  auto it = std::upper_bound(s.begin(), s.end(), iter,
                             [](double v, const Snapshot& snap) { return v < static_cast<double>(snap.iter); });
  const std::size_t hi = static_cast<std::size_t>(it - s.begin());
  return hi == 0 ? 0 : hi - 1;
}

bool in_range(const Trajectory& t, double iter) {
  return !t.snapshots.empty() && iter >= static_cast<double>(t.snapshots.front().iter) &&
         iter <= static_cast<double>(t.snapshots.back().iter);
}

}  // namespace

namespace {

// Snapshot indices and weights reproducing the interpolant at `iter`.
std::vector<std::pair<std::size_t, double>> interpolation_weights(const Trajectory& t, double iter,
                                                                  Interpolation kind) {
  const auto& s = t.snapshots;
  const std::size_t i = bracket(t, iter);
  if (static_cast<double>(s[i].iter) == iter || i + 1 == s.size()) return {{i, 1.0}};
  if (kind == Interpolation::kLinear || s.size() < 4) {
    const double u = (iter - s[i].iter) / static_cast<double>(s[i + 1].iter - s[i].iter);
    return {{i, 1.0 - u}, {i + 1, u}};
  }
  std::size_t lo = i == 0 ? 0 : i - 1;
  if (lo + 4 > s.size()) lo = s.size() - 4;
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t a = lo; a < lo + 4; ++a) {
    double w = 1.0;
    for (std::size_t b = lo; b < lo + 4; ++b)
      if (b != a) w *= (iter - s[b].iter) / static_cast<double>(s[a].iter - s[b].iter);
    out.emplace_back(a, w);
  }
  return out;
}

}  // namespace

std::optional<Vec> interpolate_state(const Trajectory& t, double iter, Interpolation kind) {
  if (!in_range(t, iter)) return std::nullopt;
  const auto ws = interpolation_weights(t, iter, kind);
  if (ws.size() == 1) return t.snapshots[ws[0].first].theta.flat();
  Vec out(t.snapshots.front().theta.size(), 0.0);
  for (const auto& [k, w] : ws) {
    const auto& x = t.snapshots[k].theta.flat();
    for (std::size_t q = 0; q < out.size(); ++q) out[q] += w * x[q];
  }
  return out;
}

std::optional<double> interpolate_loss(const Trajectory& t, double iter, Interpolation kind) {
  if (!in_range(t, iter)) return std::nullopt;
  double out = 0.0;
  for (const auto& [k, w] : interpolation_weights(t, iter, kind)) out += w * t.snapshots[k].loss;
  return out;
}

namespace {

Vec orientation(const Trajectory& t, const GammaVector& g) {
  const auto c = neuron_scales(t.snapshots.front().theta, g).c;
  Vec s;
  for (double v : c) s.push_back(v < 0 ? -1.0 : 1.0);
  return s;
}

void orient(Vec& flat, const Vec& signs, std::size_t block) {
  for (std::size_t i = 0; i < signs.size(); ++i)
    for (std::size_t k = 0; k < block; ++k) flat[i * block + k] *= signs[i];
}

}  // namespace

AlignmentReport align_trajectories(const Trajectory& a, const Trajectory& b, double alpha_a, double alpha_b,
                                   const GammaVector& g, double eta, const AlignmentOptions& opts) {
  require(alpha_a > 0.0 && alpha_b > 0.0, ErrorCode::kInvalidInput, "alignment needs positive scales");
  require(eta > 0.0, ErrorCode::kInvalidInput, "alignment needs eta > 0");
  require(!a.snapshots.empty() && !b.snapshots.empty(), ErrorCode::kInvalidInput, "alignment needs snapshots");
  const auto& ta = a.snapshots.front().theta;
  const auto& tb = b.snapshots.front().theta;
  require(ta.m() == tb.m() && ta.d_aug() == tb.d_aug(), ErrorCode::kInvalidInput, "alignment: shape mismatch");
  const double mu = opts.mu1 > 0.0 ? opts.mu1 : g.norm;
  const double log_ratio = std::log(alpha_b / alpha_a);

  AlignmentReport rep;
  rep.shift = opts.mapping == TimeMapping::kForwardEuler ? log_ratio / (mu * eta) : log_ratio / std::log1p(eta * mu);
  rep.shift_iters = std::llround(rep.shift);

  Vec sa, sb;
  if (opts.orient_by_scales) {
    sa = orientation(a, g);
    sb = orientation(b, g);
  }
  for (const auto& snap : a.snapshots) {
    const double ib = static_cast<double>(snap.iter) - rep.shift;
    auto xb = interpolate_state(b, ib, opts.interpolation);
    if (!xb) continue;
    Vec xa = snap.theta.flat();
    if (opts.orient_by_scales) {
      orient(xa, sa, ta.block());
      orient(*xb, sb, ta.block());
    }
    double d2 = 0.0;
    for (std::size_t q = 0; q < xa.size(); ++q) d2 += (xa[q] - (*xb)[q]) * (xa[q] - (*xb)[q]);
    rep.sup_distance = std::max(rep.sup_distance, std::sqrt(d2));
    rep.sup_loss_gap = std::max(rep.sup_loss_gap, std::abs(snap.loss - *interpolate_loss(b, ib, opts.interpolation)));
    ++rep.overlap_len;
  }
  require(rep.overlap_len > 0, ErrorCode::kInvalidInput, "alignment: empty overlap window");
  return rep;
}

}  // namespace nrl
