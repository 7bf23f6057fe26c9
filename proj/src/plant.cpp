#include "wncs/plant.hpp"

#include "wncs/errors.hpp"

#include <stdexcept>
#include <string>

namespace wncs {

namespace {

std::string dims(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

PlantModel::PlantModel(Mat a, Mat b, Mat sigma_v, Mat sigma_w, std::uint32_t base_interval)
    : a_(std::move(a)), b_(std::move(b)), sigma_v_(std::move(sigma_v)), sigma_w_(std::move(sigma_w)),
      base_interval_(base_interval) {
    const auto n = a_.rows();
    if (n < 1 || a_.cols() != n) throw ConfigError("plant: A must be square and non-empty, got " + dims(a_));
    if (b_.rows() != n || b_.cols() < 1) throw ConfigError("plant: B must be n x m with m >= 1, got " + dims(b_));
    if (sigma_v_.rows() != n || sigma_v_.cols() != n) throw ConfigError("plant: SigmaV must be n x n, got " + dims(sigma_v_));
    if (sigma_w_.rows() != n || sigma_w_.cols() != n) throw ConfigError("plant: SigmaW must be n x n, got " + dims(sigma_w_));
    if (!all_finite(a_) || !all_finite(b_)) throw ConfigError("plant: A and B must be finite");
    if (!is_psd(sigma_v_)) throw ConfigError("plant: SigmaV must be symmetric positive semidefinite");
    if (!is_psd(sigma_w_)) throw ConfigError("plant: SigmaW must be symmetric positive semidefinite");
    if (base_interval_ < 1) throw ConfigError("plant: base_interval must be positive");
    lv_ = psd_factor(sigma_v_);
    lw_ = psd_factor(sigma_w_);
}

PlantModel PlantModel::with_noise(Mat sigma_v, Mat sigma_w) const {
    return PlantModel(a_, b_, std::move(sigma_v), std::move(sigma_w), base_interval_);
}

Vec sample_gaussian(const Mat& factor, Rng& rng) {
    Vec z(factor.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
    return factor * z;
}

PlantState step_plant(const PlantModel& model, const PlantState& state, const Vec& u, Rng& rng) {
    if (state.x.size() != model.n()) throw ConfigError("step_plant: state has " + std::to_string(state.x.size()) + " components, plant has " + std::to_string(model.n()));
    if (u.size() != model.m()) throw ConfigError("step_plant: input has " + std::to_string(u.size()) + " components, plant has " + std::to_string(model.m()));
    if (!u.allFinite()) throw ConfigError("step_plant: non-finite input");
    PlantState next;
    next.x = model.A() * state.x + model.B() * u + sample_gaussian(model.process_factor(), rng);
    next.tick = state.tick + model.base_interval();
    if (!next.x.allFinite()) throw DivergenceError("step_plant: state became non-finite at tick " + std::to_string(next.tick));
    return next;
}

Vec measure(const PlantModel& model, const PlantState& state, Rng& rng) {
    if (state.x.size() != model.n()) throw ConfigError("measure: state dimension mismatch");
    if (!state.x.allFinite()) throw DivergenceError("measure: non-finite state");
    return state.x + sample_gaussian(model.measurement_factor(), rng);
}

PlantModel lift_model(const PlantModel& model, std::uint32_t steps) {
    if (steps == 0) throw std::invalid_argument("lift_model: steps must be >= 1");
    const auto n = model.n();
    Mat power = Mat::Identity(n, n); // A^i
    Mat b_sum = Mat::Zero(n, model.m());
    Mat v_sum = Mat::Zero(n, n);
    for (std::uint32_t i = 0; i < steps; ++i) {
        b_sum += power * model.B();
        v_sum += power * model.sigma_v() * power.transpose();
        power = model.A() * power;
    }
    // symmetrize away round-off so the PSD check sees an exactly symmetric matrix
    Mat v_sym = 0.5 * (v_sum + v_sum.transpose());
    return PlantModel(std::move(power), std::move(b_sum), std::move(v_sym), model.sigma_w(),
                      steps * model.base_interval());
}

Mat default_process_noise(Eigen::Index n) { return 1e-6 * Mat::Identity(n, n); }

Mat default_measurement_noise(Eigen::Index n) {
    // positions/angles 1e-6, rates 1e-5
    Mat w = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) w(i, i) = (i < n / 2) ? 1e-6 : 1e-5;
    return w;
}

namespace {

Mat selfbuilt_a() {
    Mat a(4, 4);
    a << 1.0, -3e-3, 8e-3, 5e-4,
         -2e-3, 1.02, -6e-3, 1e-2,
         1e-2, -0.11, 0.94, 2e-2,
         1e-2, -2e-2, -8e-2, 1.03;
    return a;
}

Mat selfbuilt_b() {
    Mat b(4, 1);
    b << 3e-4, 9e-4, 8e-3, 1e-2;
    return b;
}

} // namespace

PlantModel plant_preset(std::string_view name) {
    if (name == "selfbuilt") {
        return PlantModel(selfbuilt_a(), selfbuilt_b(), default_process_noise(4), default_measurement_noise(4));
    }
    if (name == "perturbed") {
        Mat a = selfbuilt_a();
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j < 4; ++j)
                if (i != j) a(i, j) *= 1.15;
        return PlantModel(std::move(a), selfbuilt_b(), default_process_noise(4), default_measurement_noise(4));
    }
    if (name == "cart") {
        const Mat a4 = selfbuilt_a();
        const Mat b4 = selfbuilt_b();
        Mat a(2, 2);
        a << a4(0, 0), a4(0, 2), a4(2, 0), a4(2, 2);
        Mat b(2, 1);
        b << b4(0, 0), b4(2, 0);
        return PlantModel(std::move(a), std::move(b), default_process_noise(2), default_measurement_noise(2));
    }
    throw ConfigError("unknown plant preset '" + std::string(name) + "' (expected selfbuilt, perturbed, cart)");
}

} // namespace wncs
