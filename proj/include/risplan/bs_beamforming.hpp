#pragma once

#include "risplan/core.hpp"

#include <Eigen/SVD>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace risplan {

/// One unit-norm beam per link; `power_weights` holds ω per column (Tr Ω² = Σ ω = 1).
struct BsBeamformer {
  CMat vectors;
  Eigen::VectorXd power_weights;

  CVec weighted_column(Eigen::Index n) const {
    const double w = power_weights.size() > n ? power_weights[n] : 1.0;
    return std::sqrt(w) * vectors.col(n);
  }
};

/// Dominant right singular vector with its largest-magnitude entry made real-positive.
inline CVec dominant_right_singular_vector(const CMat& link) {
  Eigen::JacobiSVD<CMat> svd(link, Eigen::ComputeThinV);
  CVec v = svd.matrixV().col(0);
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  v *= std::polar(1.0, -std::arg(v[arg]));
  return v / v.norm();
}

inline BsBeamformer svd_beamformer(const std::vector<CMat>& links) {
  require(!links.empty(), "svd_beamformer: no links");
  const Eigen::Index mb = links.front().cols();
  BsBeamformer bf;
  bf.vectors.resize(mb, static_cast<Eigen::Index>(links.size()));
  for (std::size_t i = 0; i < links.size(); ++i) {
    require(links[i].cols() == mb, "svd_beamformer: links disagree on the BS antenna count");
    if (links[i].size() == 0 || links[i].cwiseAbs().maxCoeff() == 0.0) {
      fail(ErrorCode::degenerate_link, "svd_beamformer: link " + std::to_string(i) + " is all zero");
    }
    bf.vectors.col(static_cast<Eigen::Index>(i)) = dominant_right_singular_vector(links[i]);
  }
  bf.power_weights = Eigen::VectorXd::Ones(bf.vectors.cols()) / static_cast<double>(bf.vectors.cols());
  return bf;
}

inline BsBeamformer svd_beamformer(const CRowVec& link) { return svd_beamformer(std::vector<CMat>{CMat(link)}); }

/// Scales column n by √ω_n.
inline BsBeamformer apply_power_allocation(BsBeamformer bf, const Eigen::VectorXd& weights) {
  require(weights.size() == bf.vectors.cols(), "apply_power_allocation: one weight per column");
  require((weights.array() >= 0.0).all(), "apply_power_allocation: weights must be nonnegative");
  require(std::abs(weights.sum() - 1.0) <= 1e-9, "apply_power_allocation: weights must sum to 1");
  for (Eigen::Index n = 0; n < weights.size(); ++n) {
    bf.vectors.col(n) *= std::sqrt(weights[n]);
  }
  bf.power_weights = weights;
  return bf;
}

/// Smallest weight in (0, 1] for which the monotone predicate holds, to `rel_tol`.
inline std::optional<double> minimum_feasible_weight(const std::function<bool(double)>& satisfied,
                                                     double rel_tol = 1e-6) {
  if (!satisfied(1.0)) return std::nullopt;
  double hi = 1.0;
  double lo = 0.0;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (satisfied(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi < 1e-300) break;
  }
  return hi;
}

}  // namespace risplan
