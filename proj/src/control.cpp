#include "wncs/control.hpp"

#include "wncs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wncs {

void GainSet::validate() const {
    std::vector<std::string> bad;
    const auto N = static_cast<Eigen::Index>(agents);
    if (agents == 0) bad.emplace_back("gains: agents must be positive");
    if (n <= 0 || m <= 0) bad.emplace_back("gains: block dimensions must be positive");
    if (F.rows() != N * m || F.cols() != N * n) bad.emplace_back("gains: F has wrong shape");
    if (!all_finite(F)) bad.emplace_back("gains: F must be finite");
    if (consensus_weights.size() != 0) {
        if (consensus_weights.rows() != N || consensus_weights.cols() != N) {
            bad.emplace_back("gains: consensus_weights must be agents x agents");
        } else {
            if ((consensus_weights.array() < 0.0).any())
                bad.emplace_back("gains: consensus_weights must be nonnegative");
            for (Eigen::Index i = 0; i < N; ++i)
                if (std::abs(consensus_weights.row(i).sum() - 1.0) > 1e-12)
                    bad.emplace_back("gains: consensus_weights row " + std::to_string(i) + " must sum to 1");
        }
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) bad.emplace_back("gains: delta must be finite and >= 0");
    if (max_horizon < 1) bad.emplace_back("gains: max_horizon must be >= 1");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

namespace {

Mat riccati_step(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P, Mat* gain) {
    const Mat BtP = B.transpose() * P;
    const Mat S = R + BtP * B;
    const Mat K = S.ldlt().solve(BtP * A);
    if (gain) *gain = -K;
    Mat next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    return 0.5 * (next + next.transpose());
}

} // namespace

RiccatiSolution solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol,
                           std::uint32_t max_iterations) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || Q.cols() != A.cols() ||
        R.rows() != B.cols() || R.cols() != B.cols())
        throw ConfigError("solve_dare: dimension mismatch");
    if (!is_psd(Q, 1e-9)) throw ConfigError("solve_dare: Q must be symmetric PSD");
    Eigen::LLT<Mat> rchk(0.5 * (R + R.transpose()));
    if (rchk.info() != Eigen::Success) throw ConfigError("solve_dare: R must be positive definite");

    RiccatiSolution sol;
    Mat P = Q;
    for (std::uint32_t it = 1; it <= max_iterations; ++it) {
        Mat next = riccati_step(A, B, Q, R, P, nullptr);
        if (!all_finite(next)) throw SynthesisError("solve_dare: iteration diverged");
        const double change = max_abs(next - P);
        P = std::move(next);
        if (change <= tol * std::max(1.0, max_abs(P))) {
            sol.iterations = it;
            sol.P = P;
            riccati_step(A, B, Q, R, P, &sol.F);
            if (spectral_radius(A + B * sol.F) >= 1.0)
                throw SynthesisError("solve_dare: solution is not stabilizing");
            return sol;
        }
    }
    throw SynthesisError("solve_dare: no convergence within " + std::to_string(max_iterations) + " iterations");
}

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
    return max_abs(riccati_step(A, B, Q, R, P, nullptr) - P);
}

Mat design_lqr(const PlantModel& model, const Mat& Q, const Mat& R) {
    return solve_dare(model.A(), model.B(), Q, R).F;
}

GainSet design_sync_lqr(const std::vector<PlantModel>& models, const std::vector<Mat>& Q,
                        const std::vector<Mat>& R, const Mat& Q_sync,
                        const std::vector<std::pair<std::size_t, std::size_t>>& coupled_pairs) {
    const std::size_t N = models.size();
    if (N == 0) throw ConfigError("design_sync_lqr: no agents");
    const Eigen::Index n = models[0].n(), m = models[0].m();
    for (const auto& mod : models)
        if (mod.n() != n || mod.m() != m) throw ConfigError("design_sync_lqr: agents differ in dimension");
    auto pick = [&](const std::vector<Mat>& v, std::size_t i, const char* what) -> const Mat& {
        if (v.size() == 1) return v[0];
        if (v.size() != N) throw ConfigError(std::string("design_sync_lqr: need 1 or N entries for ") + what);
        return v[i];
    };
    if (Q_sync.rows() != n || Q_sync.cols() != n) throw ConfigError("design_sync_lqr: Q_sync must be n x n");

    const auto Ni = static_cast<Eigen::Index>(N);
    Mat A = Mat::Zero(Ni * n, Ni * n), B = Mat::Zero(Ni * n, Ni * m);
    Mat Qs = Mat::Zero(Ni * n, Ni * n), Rs = Mat::Zero(Ni * m, Ni * m);
    for (std::size_t i = 0; i < N; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        A.block(k * n, k * n, n, n) = models[i].A();
        B.block(k * n, k * m, n, m) = models[i].B();
        Qs.block(k * n, k * n, n, n) = pick(Q, i, "Q");
        Rs.block(k * m, k * m, m, m) = pick(R, i, "R");
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs = coupled_pairs;
    if (pairs.empty())
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = i + 1; j < N; ++j) pairs.emplace_back(i, j);
    for (auto [i, j] : pairs) {
        if (i >= N || j >= N || i == j) throw ConfigError("design_sync_lqr: bad coupled pair");
        const auto a = static_cast<Eigen::Index>(i) * n, b = static_cast<Eigen::Index>(j) * n;
        Qs.block(a, a, n, n) += Q_sync;
        Qs.block(b, b, n, n) += Q_sync;
        Qs.block(a, b, n, n) -= Q_sync;
        Qs.block(b, a, n, n) -= Q_sync;
    }
    GainSet g;
    g.F = solve_dare(A, B, Qs, Rs).F;
    g.agents = N;
    g.n = n;
    g.m = m;
    g.consensus_weights = Mat::Identity(Ni, Ni);
    return g;
}

PlantModel closed_loop_model(const PlantModel& model, const Mat& F) {
    if (F.rows() != model.m() || F.cols() != model.n()) throw ConfigError("closed_loop_model: F has wrong shape");
    return PlantModel(model.A() + model.B() * F, model.B(), model.sigma_v(), model.sigma_w(), model.base_interval());
}

// -- remote -------------------------------------------------------------------

RemoteLoopState RemoteLoopState::zero(Eigen::Index n, Eigen::Index m) {
    return RemoteLoopState{Vec::Zero(n), Vec::Zero(m), Vec::Zero(m), Vec::Zero(m), -1};
}

RemoteLoopState remote_estimate(RemoteLoopState loop, const PlantModel& model, const std::optional<Vec>& received_y,
                                std::int64_t round) {
    const Vec& base = received_y ? *received_y : loop.xhat;
    if (base.size() != model.n() || loop.uhat_prev.size() != model.m())
        throw ConfigError("remote_estimate: dimension mismatch");
    loop.xhat = model.A() * base + model.B() * loop.uhat_prev;
    if (received_y) loop.last_meas_round = round;
    return loop;
}

Vec remote_control_input(const RemoteLoopState& loop, const PlantModel& model, const Mat& F) {
    return F * (model.A() * loop.xhat + model.B() * loop.uhat);
}

std::pair<RemoteLoopState, Vec> advance_remote_loop(RemoteLoopState loop, const PlantModel& model, const Mat& F,
                                                    const std::optional<Vec>& received_y, std::int64_t round) {
    loop = remote_estimate(std::move(loop), model, received_y, round);
    Vec next = remote_control_input(loop, model, F);
    loop.uhat_prev = loop.uhat;
    loop.uhat = next;
    return {std::move(loop), std::move(next)};
}

Vec apply_actuation_zoh(bool phi_received, const Vec& uhat, const Vec& u_prev) {
    return phi_received ? uhat : u_prev;
}

// -- distributed --------------------------------------------------------------

PeerEstimate peer_estimate_zoh(PeerEstimate est, bool theta_received, const std::optional<Vec>& y_j,
                               std::int64_t round) {
    if (theta_received) {
        if (!y_j) throw ContractError("peer_estimate_zoh: reception flagged without a value");
        est.xhat_j = *y_j;
        est.last_rx_round = round;
    }
    return est;
}

std::set<std::size_t> relevant_peers(const GainSet& gains, std::size_t i) {
    std::set<std::size_t> out;
    for (std::size_t j = 0; j < gains.agents; ++j)
        if (j != i && max_abs(gains.block(i, j)) > 0.0) out.insert(j);
    return out;
}

Vec distributed_input(std::size_t i, const Vec& x_i, const std::map<std::size_t, PeerEstimate>& peers,
                      const GainSet& gains, const std::set<std::size_t>& omega) {
    if (i >= gains.agents) throw ContractError("distributed_input: agent index out of range");
    Vec u = gains.block(i, i) * x_i;
    for (std::size_t j : omega) {
        auto it = peers.find(j);
        if (it == peers.end() || it->second.xhat_j.size() != gains.n)
            throw ContractError("distributed_input: missing estimate for peer " + std::to_string(j));
        u += gains.block(i, j) * it->second.xhat_j;
    }
    return u;
}

Vec distributed_input(std::size_t i, const Vec& x_i, const std::map<std::size_t, PeerEstimate>& peers,
                      const GainSet& gains) {
    return distributed_input(i, x_i, peers, gains, relevant_peers(gains, i));
}

// -- consensus ----------------------------------------------------------------

ConsensusState consensus_update(ConsensusState state, std::size_t self, const std::map<std::size_t, double>& received,
                                const Vec& weights_row) {
    const auto N = static_cast<std::size_t>(weights_row.size());
    if (self >= N) throw ContractError("consensus_update: self index out of range");
    double self_w = weights_row(static_cast<Eigen::Index>(self));
    double acc = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        if (j == self) continue;
        const double w = weights_row(static_cast<Eigen::Index>(j));
        if (w == 0.0) continue;
        auto it = received.find(j);
        if (it == received.end()) self_w += w;
        else acc += w * it->second;
    }
    state.x_des = self_w * state.x_des + acc;
    return state;
}

TrackOutput consensus_track_input(double position, const ConsensusState& state, const GainSet& gains, double integ,
                                  double tick_seconds) {
    if (!state.agreed) throw ContractError("consensus_track_input: called before agreement");
    const double err = position - state.x_star;
    TrackOutput out;
    out.u = Vec::Constant(1, gains.track_gain * err + gains.integrator_gain * integ);
    out.integ = integ + err * tick_seconds;
    return out;
}

bool agreement_detector(const std::vector<std::vector<double>>& histories, double tol, std::size_t R) {
    if (R == 0 || histories.empty()) return false;
    for (const auto& h : histories) {
        if (h.size() < R) return false;
        auto [lo, hi] = std::minmax_element(h.end() - static_cast<std::ptrdiff_t>(R), h.end());
        if (!(*hi - *lo < tol)) return false;
    }
    return true;
}

// -- self-trigger -------------------------------------------------------------

std::uint32_t self_trigger_horizon(const std::function<Vec(std::uint32_t)>& drift,
                                   const std::function<Mat(std::uint32_t)>& accumulated_cov, double delta,
                                   std::uint32_t max_horizon) {
    if (max_horizon < 1) throw ContractError("self_trigger_horizon: max_horizon must be >= 1");
    if (delta <= 0.0) return 1;
    for (std::uint32_t M = 1; M <= max_horizon; ++M) {
        const Vec d = drift(M);
        if (d.squaredNorm() + accumulated_cov(M).trace() > delta) return M;
    }
    return max_horizon;
}

double ErrorForecast::expected_squared_error(std::uint32_t M) const {
    if (M < 1 || M > drift.size()) throw ContractError("ErrorForecast: horizon out of range");
    return drift[M - 1].squaredNorm() + covariance[M - 1].trace();
}

ErrorForecast forecast_held_input_error(const Mat& phi, const Mat& gamma, const Vec& c, const Mat& G,
                                        const Mat& sigma, const Vec& x0, std::uint32_t horizon) {
    ErrorForecast f;
    f.drift.reserve(horizon);
    f.covariance.reserve(horizon);
    Vec mean = x0;
    Mat cov = Mat::Zero(phi.rows(), phi.cols());
    const Vec forcing = gamma * c;
    for (std::uint32_t M = 1; M <= horizon; ++M) {
        mean = phi * mean + forcing;
        cov = phi * cov * phi.transpose() + sigma;
        f.drift.push_back(G * (mean - x0));
        f.covariance.push_back(G * cov * G.transpose());
    }
    return f;
}

Vec self_triggered_peer_input(const Vec& x_j, const GainSet& gains, std::size_t i, std::size_t j) {
    return gains.block(i, j) * x_j;
}

Mat peer_contribution_matrix(const GainSet& gains, std::size_t j) {
    const auto N = static_cast<Eigen::Index>(gains.agents);
    Mat G(std::max<Eigen::Index>(N - 1, 0) * gains.m, gains.n);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < gains.agents; ++i) {
        if (i == j) continue;
        G.block(r, 0, gains.m, gains.n) = gains.block(i, j);
        r += gains.m;
    }
    return G;
}

} // namespace wncs
