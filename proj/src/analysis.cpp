#include "wncs/analysis.hpp"

#include "wncs/errors.hpp"
#include "wncs/kernels.hpp"
#include "wncs/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wncs {

Architecture parse_architecture(std::string_view tag) {
    if (tag == "remote") return Architecture::remote;
    if (tag == "distributed-pair" || tag == "distributed_pair") return Architecture::distributed_pair;
    throw std::invalid_argument("unknown architecture '" + std::string(tag) + "'");
}

void ClosedLoopEnsemble::validate() const {
    if (members.empty()) throw ConfigError("ensemble has no members");
    double total = 0.0;
    for (const auto& mem : members) {
        if (!(mem.probability >= 0.0 && mem.probability <= 1.0))
            throw ConfigError("ensemble probability outside [0, 1]");
        if (mem.A.rows() != dim || mem.A.cols() != dim) throw ConfigError("ensemble member has wrong shape");
        total += mem.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("ensemble probabilities do not sum to 1");
}

const EnsembleMember& ClosedLoopEnsemble::member(bool theta, bool phi) const {
    for (const auto& mem : members)
        if (mem.theta == theta && mem.phi == phi) return mem;
    throw std::out_of_range("no ensemble member for the requested delivery flags");
}

namespace {

void check_prob(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0, 1]");
}

Mat remote_member(const PlantModel& model, const Mat& F, bool theta, bool phi) {
    const Eigen::Index n = model.n(), m = model.m();
    const Mat& A = model.A();
    const Mat& B = model.B();
    const double t = theta ? 1.0 : 0.0, p = phi ? 1.0 : 0.0;
    // Column offsets of x, x^, u^, u_prev.
    const Eigen::Index cx = 0, ce = n, cu = 2 * n, cp = 2 * n + m;
    Mat Z = Mat::Zero(2 * n + 2 * m, 2 * n + 2 * m);
    Z.block(cx, cx, n, n) = A;
    Z.block(cx, cu, n, m) = p * B;
    Z.block(cx, cp, n, m) = (1.0 - p) * B;
    Z.block(ce, cx, n, n) = t * A;
    Z.block(ce, ce, n, n) = (1.0 - t) * A;
    Z.block(ce, cu, n, m) = B;
    Z.block(cu, ce, m, n) = F * A;
    Z.block(cu, cu, m, m) = F * B;
    Z.block(cp, cu, m, m) = p * Mat::Identity(m, m);
    Z.block(cp, cp, m, m) = (1.0 - p) * Mat::Identity(m, m);
    return Z;
}

Mat pair_member(const PlantModel& model, const Mat& F, bool theta, bool phi) {
    const Eigen::Index n = model.n(), m = model.m();
    const Mat& A = model.A();
    const Mat& B = model.B();
    const Mat F11 = F.block(0, 0, m, n), F12 = F.block(0, n, m, n);
    const Mat F21 = F.block(m, 0, m, n), F22 = F.block(m, n, m, n);
    const Mat I = Mat::Identity(n, n);
    Mat Z = Mat::Zero(4 * n, 4 * n);
    Z.block(0, 0, n, n) = A + B * F11;
    Z.block(0, 2 * n, n, n) = B * F12;
    Z.block(n, n, n, n) = A + B * F22;
    Z.block(n, 3 * n, n, n) = B * F21;
    if (theta) Z.block(2 * n, n, n, n) = I;
    else Z.block(2 * n, 2 * n, n, n) = I;
    if (phi) Z.block(3 * n, 0, n, n) = I;
    else Z.block(3 * n, 3 * n, n, n) = I;
    return Z;
}

} // namespace

ClosedLoopEnsemble build_ensemble(const PlantModel& model, const Mat& F, double loss_theta, double loss_phi,
                                  Architecture architecture) {
    check_prob(loss_theta, "loss_theta");
    check_prob(loss_phi, "loss_phi");
    ClosedLoopEnsemble ens;
    const Eigen::Index n = model.n(), m = model.m();
    if (architecture == Architecture::remote) {
        if (F.rows() != m || F.cols() != n) throw ConfigError("build_ensemble: F must be m x n for a remote loop");
        ens.dim = 2 * n + 2 * m;
    } else {
        if (F.rows() != 2 * m || F.cols() != 2 * n)
            throw ConfigError("build_ensemble: F must be 2m x 2n for a distributed pair");
        ens.dim = 4 * n;
    }
    for (bool theta : {true, false}) {
        for (bool phi : {true, false}) {
            const double p = (theta ? 1.0 - loss_theta : loss_theta) * (phi ? 1.0 - loss_phi : loss_phi);
            if (p == 0.0) continue;
            Mat Z = architecture == Architecture::remote ? remote_member(model, F, theta, phi)
                                                         : pair_member(model, F, theta, phi);
            ens.members.push_back({p, std::move(Z), theta, phi});
        }
    }
    ens.validate();
    return ens;
}

Vec remote_initial_state(const Vec& x0, Eigen::Index m) {
    Vec z = Vec::Zero(2 * x0.size() + 2 * m);
    z.head(x0.size()) = x0;
    return z;
}

namespace {

Mat second_moment_operator(const ClosedLoopEnsemble& ens) {
    const Eigen::Index d = ens.dim;
    Mat T = Mat::Zero(d * d, d * d);
    for (const auto& mem : ens.members) T += mem.probability * kron(mem.A, mem.A);
    return T;
}

} // namespace

StabilityReport mean_square_stable(const ClosedLoopEnsemble& ens) {
    ens.validate();
    StabilityReport r;
    r.spectral_radius = spectral_radius(second_moment_operator(ens));
    r.stable = r.spectral_radius < 1.0;
    r.dim = ens.dim * ens.dim;
    return r;
}

LyapunovCertificate lyapunov_certificate(const ClosedLoopEnsemble& ens) {
    const StabilityReport rep = mean_square_stable(ens);
    if (!rep.stable) throw NumericalError("lyapunov_certificate: ensemble is not mean-square stable");
    const Eigen::Index d = ens.dim;
    LyapunovCertificate cert;
    const double s = rep.spectral_radius;
    if (s == 0.0) {
        cert.P = Mat::Identity(d, d);
        cert.rho = 0.0;
        return cert;
    }
    const double r = s * (1.0 + 0.5 * (1.0 - s));
    // vec(A' P A) = (A' (x) A') vec(P) for column-major vec.
    Mat Tt = Mat::Zero(d * d, d * d);
    for (const auto& mem : ens.members) {
        const Mat At = mem.A.transpose();
        Tt += mem.probability * kron(At, At);
    }
    const Mat Id = Mat::Identity(d, d);
    const Vec rhs = Eigen::Map<const Vec>(Id.data(), d * d);
    const Mat lhs = Mat::Identity(d * d, d * d) - Tt / r;
    const Vec sol = lhs.partialPivLu().solve(rhs);
    if (!all_finite(sol)) throw NumericalError("lyapunov_certificate: singular fixed-point system");
    Mat P = Eigen::Map<const Mat>(sol.data(), d, d);
    P = 0.5 * (P + P.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("lyapunov_certificate: solution is not positive definite");
    cert.P = std::move(P);
    cert.rho = std::sqrt(r);
    return cert;
}

ModeStabilityData ModeStabilityData::from_certificate(const LyapunovCertificate& cert) {
    return ModeStabilityData{cert.P, cert.rho * cert.rho};
}

double mode_level_ratio(const std::vector<ModeStabilityData>& modes) {
    std::vector<double> lmax, lmin;
    for (const auto& mode : modes) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (mode.P + mode.P.transpose()), Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw NumericalError("mode_level_ratio: eigensolver failed");
        lmin.push_back(es.eigenvalues().minCoeff());
        lmax.push_back(es.eigenvalues().maxCoeff());
        if (lmin.back() <= 0.0) throw ContractError("mode_level_ratio: Lyapunov matrix is not positive definite");
    }
    double mu = 1.0;
    for (std::size_t i = 0; i < modes.size(); ++i)
        for (std::size_t j = 0; j < modes.size(); ++j)
            if (i != j) mu = std::max(mu, lmax[i] / lmin[j]);
    return mu;
}

double average_dwell_time(const std::vector<ModeStabilityData>& modes) {
    double rho_max = 0.0;
    for (const auto& mode : modes) {
        if (!(mode.rho < 1.0)) throw ContractError("unstable mode admitted");
        rho_max = std::max(rho_max, mode.rho);
    }
    if (modes.size() < 2) return 0.0;
    const double mu = mode_level_ratio(modes);
    if (mu <= 1.0) return 0.0;
    if (rho_max == 0.0) return 0.0;
    return std::log(mu) / std::log(1.0 / rho_max);
}

std::vector<double> monte_carlo_second_moment(const ClosedLoopEnsemble& ens, const Vec& z0, std::uint32_t steps,
                                              std::uint32_t trajectories, std::uint64_t seed) {
    ens.validate();
    if (z0.size() != ens.dim) throw ConfigError("monte_carlo_second_moment: z0 has wrong dimension");
    if (ens.members.size() > 255) throw ConfigError("monte_carlo_second_moment: too many members");
    const auto d = static_cast<std::size_t>(ens.dim);
    const std::size_t lanes = trajectories;

    std::vector<std::vector<double>> mats;
    for (const auto& mem : ens.members) {
        std::vector<double> rm(d * d);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c)
                rm[r * d + c] = mem.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        mats.push_back(std::move(rm));
    }
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& mem : ens.members) cum.push_back(acc += mem.probability);

    std::vector<double> state(d * lanes), next(d * lanes), tmp(d * lanes), sq(lanes);
    for (std::size_t r = 0; r < d; ++r)
        std::fill_n(state.begin() + static_cast<std::ptrdiff_t>(r * lanes), lanes, z0(static_cast<Eigen::Index>(r)));
    std::vector<std::uint8_t> select(lanes);
    Rng rng = derive_stream(seed, "monte_carlo");

    auto moment = [&] {
        kernels::lane_sum_squares(state, d, sq, lanes);
        double s = 0.0;
        for (double v : sq) s += v;
        return lanes ? s / static_cast<double>(lanes) : 0.0;
    };
    std::vector<double> out;
    out.reserve(steps + 1);
    out.push_back(moment());
    for (std::uint32_t k = 0; k < steps; ++k) {
        for (auto& s : select) {
            const double u = rng.uniform();
            std::size_t j = 0;
            while (j + 1 < cum.size() && u >= cum[j]) ++j;
            s = static_cast<std::uint8_t>(j);
        }
        for (std::size_t j = 0; j < mats.size(); ++j) {
            if (mats.size() == 1) {
                kernels::batched_matvec(mats[j], d, d, state, next, lanes);
            } else {
                kernels::batched_matvec(mats[j], d, d, state, tmp, lanes);
                kernels::blend_lanes(select, static_cast<std::uint8_t>(j), tmp, next, d, lanes);
            }
        }
        state.swap(next);
        out.push_back(moment());
    }
    return out;
}

double locate_stability_boundary(const std::function<ClosedLoopEnsemble(double)>& family, double lo, double hi,
                                 double tol) {
    const bool s_lo = mean_square_stable(family(lo)).stable;
    const bool s_hi = mean_square_stable(family(hi)).stable;
    if (s_lo == s_hi) throw std::invalid_argument("locate_stability_boundary: verdict does not change on the interval");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mean_square_stable(family(mid)).stable == s_lo) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace wncs
