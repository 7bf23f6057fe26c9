#pragma once

// Controller synthesis and run-time control laws.
//
// Sign convention: every gain is stored so that the law reads u = F x. LQR
// synthesis therefore returns F = -(R + B'PB)^-1 B'PA, and A + B F is Schur.

#include "wncs/linalg.hpp"
#include "wncs/plant.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace wncs {

struct GainSet {
    /// (agents * m) x (agents * n); block (i, j) is agent i's feedback on agent j.
    Mat F;
    std::size_t agents = 1;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    /// agents x agents, nonnegative, rows sum to one.
    Mat consensus_weights;
    double track_gain = 0.0;
    double integrator_gain = 0.0;
    /// Self-trigger threshold on E[e'e].
    double delta = 0.0;
    /// Cap on the self-trigger horizon, in rounds.
    std::uint32_t max_horizon = 1;

    Mat block(std::size_t i, std::size_t j) const {
        return F.block(static_cast<Eigen::Index>(i) * m, static_cast<Eigen::Index>(j) * n, m, n);
    }

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

struct RiccatiSolution {
    Mat P;
    Mat F;
    std::uint32_t iterations = 0;
};

/// Stabilizing DARE solution by fixed-point (value) iteration. Throws
/// SynthesisError if the iteration does not settle within `max_iterations` at
/// relative tolerance `tol`, or if the resulting gain is not stabilizing.
RiccatiSolution solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                           double tol = 1e-12, std::uint32_t max_iterations = 100000);

/// || P - A'PA + A'PB (R + B'PB)^-1 B'PA - Q ||_inf (max-abs entry).
double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

/// Infinite-horizon discrete LQR gain for the model (u = F x).
Mat design_lqr(const PlantModel& model, const Mat& Q, const Mat& R);

/// Centralized LQR over the stacked agents with pairwise penalties
/// (x_i - x_j)' Q_sync (x_i - x_j) on `coupled_pairs` (all pairs if empty).
/// Q and R may hold one entry (shared) or one per agent.
GainSet design_sync_lqr(const std::vector<PlantModel>& models, const std::vector<Mat>& Q,
                        const std::vector<Mat>& R, const Mat& Q_sync,
                        const std::vector<std::pair<std::size_t, std::size_t>>& coupled_pairs = {});

/// Same plant with the static feedback u = F x + u_ext folded into A.
PlantModel closed_loop_model(const PlantModel& model, const Mat& F);

// -- remote control ----------------------------------------------------------

struct RemoteLoopState {
    Vec xhat;      // controller's estimate of x(k)
    Vec uhat;      // input predicted to act in the current round, u^(k)
    Vec uhat_prev; // u^(k-1)
    Vec u_applied; // actuator hold value u(k-1)
    std::int64_t last_meas_round = -1;

    static RemoteLoopState zero(Eigen::Index n, Eigen::Index m);
};

/// x^(k) = A y(k-1) + B u^(k-1) if a measurement arrived, else A x^(k-1) + B u^(k-1).
RemoteLoopState remote_estimate(RemoteLoopState loop, const PlantModel& model,
                                const std::optional<Vec>& received_y, std::int64_t round = -1);

/// u^(k+1) = F (A x^(k) + B u^(k)).
Vec remote_control_input(const RemoteLoopState& loop, const PlantModel& model, const Mat& F);

/// Estimate, compute the next input, and shift the input history by one round.
/// Returns the updated loop and u^(k+1).
std::pair<RemoteLoopState, Vec> advance_remote_loop(RemoteLoopState loop, const PlantModel& model,
                                                    const Mat& F, const std::optional<Vec>& received_y,
                                                    std::int64_t round);

/// u(k) = u^(k) if the command arrived, else u(k-1).
Vec apply_actuation_zoh(bool phi_received, const Vec& uhat, const Vec& u_prev);

// -- distributed control -----------------------------------------------------

struct PeerEstimate {
    Vec xhat_j;
    Vec u12_last;
    std::int64_t last_rx_round = -1;
};

/// Holds the latest received peer measurement.
PeerEstimate peer_estimate_zoh(PeerEstimate est, bool theta_received, const std::optional<Vec>& y_j,
                               std::int64_t round = -1);

/// Agents j != i with a nonzero feedback block F_ij.
std::set<std::size_t> relevant_peers(const GainSet& gains, std::size_t i);

/// u_i = F_ii x_i + sum_{j in omega} F_ij x^_j. Throws ContractError if a
/// peer in omega has no estimate.
Vec distributed_input(std::size_t i, const Vec& x_i, const std::map<std::size_t, PeerEstimate>& peers,
                      const GainSet& gains, const std::set<std::size_t>& omega);

/// Variant with omega = relevant_peers(gains, i).
Vec distributed_input(std::size_t i, const Vec& x_i, const std::map<std::size_t, PeerEstimate>& peers,
                      const GainSet& gains);

// -- consensus ---------------------------------------------------------------

struct ConsensusState {
    double x_des = 0.0;
    bool agreed = false;
    std::uint32_t agree_counter = 0;
    double x_star = 0.0;
};

/// x_des(k) = p_ii x_des(k-1) + sum_j p_ij x^_j,des(k-1).
///
/// `received` holds the (hold-last) estimates of every peer heard so far. A
/// peer with positive weight that has never been heard has its weight folded
/// into the self weight.
ConsensusState consensus_update(ConsensusState state, std::size_t self,
                                const std::map<std::size_t, double>& received, const Vec& weights_row);

struct TrackOutput {
    Vec u;
    double integ = 0.0;
};

/// u = F_i (position - x*) + K_I * integ, then integ += (position - x*) * tick.
/// Throws ContractError before agreement.
TrackOutput consensus_track_input(double position, const ConsensusState& state, const GainSet& gains,
                                  double integ, double tick_seconds = kTickSeconds);

/// True iff every history holds at least R values and its last R values span
/// less than tol.
bool agreement_detector(const std::vector<std::vector<double>>& histories, double tol, std::size_t R);

// -- self-triggered communication ---------------------------------------------

/// Smallest M >= 1 with m(M)'m(M) + trace(Sigma(M)) > delta, capped at
/// max_horizon; delta == 0 always yields 1.
std::uint32_t self_trigger_horizon(const std::function<Vec(std::uint32_t)>& drift,
                                   const std::function<Mat(std::uint32_t)>& accumulated_cov,
                                   double delta, std::uint32_t max_horizon);

/// Conditional mean and covariance of e(k+M) = G (x(k+M) - x0) for
/// x(s+1) = Phi x(s) + Gamma c + v, v ~ N(0, Sigma), x(k) = x0, for M = 1..horizon.
struct ErrorForecast {
    std::vector<Vec> drift;
    std::vector<Mat> covariance;

    double expected_squared_error(std::uint32_t M) const;
};

ErrorForecast forecast_held_input_error(const Mat& phi, const Mat& gamma, const Vec& c, const Mat& G,
                                        const Mat& sigma, const Vec& x0, std::uint32_t horizon);

/// u_ij = F_ij x_j: agent j's contribution to agent i's input.
Vec self_triggered_peer_input(const Vec& x_j, const GainSet& gains, std::size_t i, std::size_t j);

/// Stacked contributions F_ij for i != j (rows ordered by i), so that
/// e_j = G (x_j(k+M) - x_j(k_l)) with G = peer_contribution_matrix(gains, j).
Mat peer_contribution_matrix(const GainSet& gains, std::size_t j);

} // namespace wncs
