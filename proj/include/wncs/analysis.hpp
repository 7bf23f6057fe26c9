#pragma once

// Mean-square stability of closed loops under i.i.d. Bernoulli message loss,
// and average-dwell-time bounds for switching between such loops.

#include "wncs/control.hpp"
#include "wncs/linalg.hpp"
#include "wncs/plant.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace wncs {

enum class Architecture { remote, distributed_pair };

/// "remote" or "distributed-pair" (underscore accepted); throws std::invalid_argument.
Architecture parse_architecture(std::string_view tag);

struct EnsembleMember {
    double probability = 0.0;
    Mat A;
    /// Delivery flags of this realization (sensor / peer link, control / reverse link).
    bool theta = true;
    bool phi = true;
};

struct ClosedLoopEnsemble {
    std::vector<EnsembleMember> members;
    Eigen::Index dim = 0;

    /// Throws ConfigError unless probabilities sum to one and shapes agree.
    void validate() const;
    /// The member for the given flags; throws std::out_of_range if absent.
    const EnsembleMember& member(bool theta, bool phi) const;
};

/// Remote loop: state z = (x, x^, u^, u_prev), dimension 2n + 2m.
///   x'      = A x + phi B u^ + (1 - phi) B u_prev
///   x^'     = theta A x + (1 - theta) A x^ + B u^
///   u^'     = F A x^ + F B u^
///   u_prev' = phi u^ + (1 - phi) u_prev
/// theta: the measurement of this round reaches the controller.
/// phi:   the command for this round reaches the actuator.
///
/// Distributed pair: two copies of the model with F of shape 2m x 2n,
/// z = (x1, x2, h12, h21) where h12 is agent 1's held copy of x2. theta is
/// the 2 -> 1 link, phi the 1 -> 2 link.
///   x1' = (A + B F11) x1 + B F12 h12,   h12' = theta ? x2 : h12
///   x2' = (A + B F22) x2 + B F21 h21,   h21' = phi ? x1 : h21
///
/// Realizations of probability zero are omitted, so lossless links give one member.
ClosedLoopEnsemble build_ensemble(const PlantModel& model, const Mat& F, double loss_theta, double loss_phi,
                                  Architecture architecture);

/// Remote-loop initial state for plant state x0 (nothing computed or applied yet).
Vec remote_initial_state(const Vec& x0, Eigen::Index m);

struct StabilityReport {
    double spectral_radius = 0.0;
    bool stable = false;
    /// Dimension of the second-moment operator (d * d).
    Eigen::Index dim = 0;
};

/// rho(sum_j p_j A_j (x) A_j) < 1. Throws NumericalError if the eigensolver fails.
StabilityReport mean_square_stable(const ClosedLoopEnsemble& ens);

struct LyapunovCertificate {
    Mat P;
    /// sum_j p_j A_j' P A_j <= rho^2 P.
    double rho = 0.0;
};

/// Solves P = I + T(P) / r with T(P) = sum_j p_j A_j' P A_j and
/// r = s (1 + (1 - s) / 2), s the mean-square spectral radius, so that
/// T(P) = r (P - I) <= r P. Throws NumericalError if the ensemble is not
/// mean-square stable or the solution is not positive definite.
LyapunovCertificate lyapunov_certificate(const ClosedLoopEnsemble& ens);

struct ModeStabilityData {
    Mat P;
    /// Per-round decay of V(z) = z' P z in expectation.
    double rho = 0.0;

    static ModeStabilityData from_certificate(const LyapunovCertificate& cert);
};

/// max over ordered pairs i != j of lambda_max(P_i) / lambda_min(P_j); 1 for a single mode.
double mode_level_ratio(const std::vector<ModeStabilityData>& modes);

/// ln(mu) / ln(1 / rho_max) in rounds; 0 if mu <= 1. Throws ContractError if
/// any mode has rho >= 1 ("unstable mode admitted").
double average_dwell_time(const std::vector<ModeStabilityData>& modes);

/// Empirical E|z_k|^2 for k = 0..steps over `trajectories` independent runs,
/// member drawn i.i.d. per step and trajectory. Uses the lane kernels.
std::vector<double> monte_carlo_second_moment(const ClosedLoopEnsemble& ens, const Vec& z0, std::uint32_t steps,
                                              std::uint32_t trajectories, std::uint64_t seed);

/// Parameter in [lo, hi] where the mean-square verdict of `family` flips,
/// located by bisection to width `tol`. The verdicts at lo and hi must differ
/// (throws std::invalid_argument otherwise).
double locate_stability_boundary(const std::function<ClosedLoopEnsemble(double)>& family, double lo, double hi,
                                 double tol = 1e-10);

} // namespace wncs
