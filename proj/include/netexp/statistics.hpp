// Copyright 2026 The netexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Test statistics for randomization tests. A statistic maps (residual
// outcomes, treatment, exposure) to a real number where larger values are
// more extreme, or to nullopt when it cannot be evaluated.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "netexp/common.hpp"

namespace netexp {

// Least squares of y on (1, z, t), computed from centred cross-products.
struct ExposureRegression {
  std::size_t n = 0;
  double beta_z = 0.0;
  double beta_t = 0.0;
  double total_ss = 0.0;     // sum (y - ybar)^2
  double explained_ss = 0.0;  // regression sum of squares
  double residual_ss = 0.0;
};

namespace detail {

// Relative tolerance below which the centred (z, t) cross-product matrix is
// treated as singular.
inline constexpr double kRankTolerance = 1e-10;

}  // namespace detail

inline std::optional<ExposureRegression> fit_exposure_regression(std::span<const double> y,
                                                                 std::span<const std::uint8_t> z,
                                                                 std::span<const double> t) {
  const std::size_t n = y.size();
  if (z.size() != n || t.size() != n) throw InvalidArgument("statistic inputs differ in length");
  if (n < 3) return std::nullopt;
  // Shifting by the first observation keeps constant columns exactly constant.
  const double y0 = y[0], t0 = t[0];
  double my = 0, mz = 0, mt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    my += y[i] - y0;
    mz += z[i];
    mt += t[i] - t0;
  }
  const double nn = static_cast<double>(n);
  my /= nn;
  mz /= nn;
  mt /= nn;
  double szz = 0, stt = 0, szt = 0, szy = 0, sty = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dz = z[i] - mz, dt = (t[i] - t0) - mt, dy = (y[i] - y0) - my;
    szz += dz * dz;
    stt += dt * dt;
    szt += dz * dt;
    szy += dz * dy;
    sty += dt * dy;
    syy += dy * dy;
  }
  const double det = szz * stt - szt * szt;
  if (!(szz > 0.0) || !(stt > 0.0) || det <= detail::kRankTolerance * szz * stt) return std::nullopt;
  ExposureRegression fit;
  fit.n = n;
  fit.beta_z = (stt * szy - szt * sty) / det;
  fit.beta_t = (szz * sty - szt * szy) / det;
  fit.total_ss = syy;
  fit.explained_ss = std::min(syy, std::max(0.0, fit.beta_z * szy + fit.beta_t * sty));
  fit.residual_ss = syy - fit.explained_ss;
  return fit;
}

enum class StatisticKind {
  kScoreRho,       // |rho_hat| from y ~ 1 + z + t
  kScoreRhoUpper,  // rho_hat (large positive values extreme)
  kScoreRhoLower,  // -rho_hat
  kJointF,         // F statistic for (z, t) jointly in y ~ 1 + z + t
  kExposureSlope,  // |slope| from y ~ 1 + t, not adjusting for own treatment
};

class Statistic {
 public:
  constexpr Statistic(StatisticKind kind = StatisticKind::kScoreRho) : kind_(kind) {}  // NOLINT

  StatisticKind kind() const noexcept { return kind_; }

  std::string name() const {
    switch (kind_) {
      case StatisticKind::kScoreRho: return "score";
      case StatisticKind::kScoreRhoUpper: return "score_upper";
      case StatisticKind::kScoreRhoLower: return "score_lower";
      case StatisticKind::kJointF: return "F";
      case StatisticKind::kExposureSlope: return "slope";
    }
    return "unknown";
  }

  static Statistic from_name(std::string_view name) {
    if (name == "score") return StatisticKind::kScoreRho;
    if (name == "score_upper") return StatisticKind::kScoreRhoUpper;
    if (name == "score_lower") return StatisticKind::kScoreRhoLower;
    if (name == "F" || name == "f") return StatisticKind::kJointF;
    if (name == "slope") return StatisticKind::kExposureSlope;
    throw InvalidArgument("unknown statistic \"" + std::string(name) + "\"");
  }

  std::optional<double> operator()(std::span<const double> y, std::span<const std::uint8_t> z,
                                   std::span<const double> t) const {
    if (kind_ == StatisticKind::kExposureSlope) return exposure_slope(y, t);
    auto fit = fit_exposure_regression(y, z, t);
    if (!fit) return std::nullopt;
    switch (kind_) {
      case StatisticKind::kScoreRho: return std::abs(fit->beta_t);
      case StatisticKind::kScoreRhoUpper: return fit->beta_t;
      case StatisticKind::kScoreRhoLower: return -fit->beta_t;
      case StatisticKind::kJointF: {
        if (fit->n <= 3) return std::nullopt;
        if (fit->total_ss == 0.0) return 0.0;
        const double df_resid = static_cast<double>(fit->n) - 3.0;
        if (fit->residual_ss <= 1e-14 * fit->total_ss) return std::numeric_limits<double>::infinity();
        return (fit->explained_ss / 2.0) / (fit->residual_ss / df_resid);
      }
      default: return std::nullopt;
    }
  }

 private:
  static std::optional<double> exposure_slope(std::span<const double> y, std::span<const double> t) {
    const std::size_t n = y.size();
    if (t.size() != n) throw InvalidArgument("statistic inputs differ in length");
    if (n < 2) return std::nullopt;
    const double y0 = y[0], t0 = t[0];
    double my = 0, mt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      my += y[i] - y0;
      mt += t[i] - t0;
    }
    my /= static_cast<double>(n);
    mt /= static_cast<double>(n);
    double stt = 0, sty = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double dt = (t[i] - t0) - mt;
      stt += dt * dt;
      sty += dt * ((y[i] - y0) - my);
    }
    if (!(stt > 0.0)) return std::nullopt;
    return std::abs(sty / stt);
  }

  StatisticKind kind_;
};

// Score statistic for rho: |rho_hat| from y_resid ~ 1 + z + t. Throws when the
// design matrix is rank deficient.
inline double score_statistic_rho(std::span<const double> y_resid, std::span<const std::uint8_t> z,
                                  std::span<const double> t) {
  auto v = Statistic(StatisticKind::kScoreRho)(y_resid, z, t);
  if (!v) throw DegenerateStatistic("design matrix (1, z, t) is rank deficient");
  return *v;
}

}  // namespace netexp
