#pragma once

// Discrete-time LTI plants driven by Gaussian process and measurement noise.
//
//   x(k+1) = A x(k) + B u(k) + v(k),   v ~ N(0, SigmaV)
//   y(k)   = x(k) + w(k),              w ~ N(0, SigmaW)
//
// One base interval is `base_interval` local ticks of 10 ms.

#include "wncs/linalg.hpp"
#include "wncs/rng.hpp"

#include <cstdint>
#include <string_view>

namespace wncs {

inline constexpr double kTickSeconds = 0.01;

/// Components beyond this magnitude count as blow-up.
inline constexpr double kDivergenceBound = 1e3;

class PlantModel {
public:
    /// Validates dimensions and covariance PSD-ness; throws ConfigError.
    PlantModel(Mat a, Mat b, Mat sigma_v, Mat sigma_w, std::uint32_t base_interval = 1);

    const Mat& A() const noexcept { return a_; }
    const Mat& B() const noexcept { return b_; }
    const Mat& sigma_v() const noexcept { return sigma_v_; }
    const Mat& sigma_w() const noexcept { return sigma_w_; }
    std::uint32_t base_interval() const noexcept { return base_interval_; }
    Eigen::Index n() const noexcept { return a_.rows(); }
    Eigen::Index m() const noexcept { return b_.cols(); }

    /// Square-root factors of the covariances, cached at construction.
    const Mat& process_factor() const noexcept { return lv_; }
    const Mat& measurement_factor() const noexcept { return lw_; }

    PlantModel with_noise(Mat sigma_v, Mat sigma_w) const;

private:
    Mat a_, b_, sigma_v_, sigma_w_;
    Mat lv_, lw_;
    std::uint32_t base_interval_;
};

struct PlantState {
    Vec x;
    std::uint64_t tick = 0;
};

/// x' = A x + B u + v. Throws ConfigError on dimension mismatch and
/// DivergenceError if the result is not finite.
PlantState step_plant(const PlantModel& model, const PlantState& state, const Vec& u, Rng& rng);

/// y = x + w.
Vec measure(const PlantModel& model, const PlantState& state, Rng& rng);

/// Model sampled every `steps` base intervals under a held input. Throws
/// std::invalid_argument for steps == 0.
PlantModel lift_model(const PlantModel& model, std::uint32_t steps);

/// Zero-mean Gaussian with covariance factor L (sigma = L L^T).
Vec sample_gaussian(const Mat& factor, Rng& rng);

/// Default noise covariances for an n-state plant.
Mat default_process_noise(Eigen::Index n);
Mat default_measurement_noise(Eigen::Index n);

/// Named parameter sets:
///   "selfbuilt" - identified cart-pole at 10 ms (state: cart position, pole
///                 angle, cart velocity, pole angular velocity).
///   "perturbed" - selfbuilt with off-diagonal A entries scaled by 1.15. Not a
///                 physical plant; only there to make agents heterogeneous.
///   "cart"      - selfbuilt restricted to (cart position, cart velocity), i.e.
///                 a cart without a mounted pole.
/// Throws ConfigError for unknown names.
PlantModel plant_preset(std::string_view name);

/// Cart position is component 0 for every preset.
inline constexpr Eigen::Index kPositionIndex = 0;
/// Pole angle index for the four-state presets.
inline constexpr Eigen::Index kAngleIndex = 1;

} // namespace wncs
