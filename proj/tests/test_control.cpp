#include <doctest.h>

#include "wncs/control.hpp"
#include "wncs/errors.hpp"
#include "wncs/plant.hpp"

#include <cmath>
#include <numeric>

using namespace wncs;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

PlantModel noiseless(const Mat& a, const Mat& b) {
    return PlantModel(a, b, Mat::Zero(a.rows(), a.rows()), Mat::Zero(a.rows(), a.rows()));
}

Mat pendulum_Q() {
    Vec d(4);
    d << 1, 1, 0.1, 0.1;
    return d.asDiagonal();
}

// Plain Riccati recursion P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA, run to a
// fixed iteration count.
Mat riccati_recursion(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, int iterations) {
    Mat P = Q;
    for (int i = 0; i < iterations; ++i) {
        const Mat S = R + B.transpose() * P * B;
        P = Q + A.transpose() * P * A - A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A);
        P = 0.5 * (P + P.transpose());
    }
    return P;
}

Mat gain_from(const Mat& A, const Mat& B, const Mat& R, const Mat& P) {
    return -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

// Policy iteration (Hewer): evaluate the cost of u = K x through a Lyapunov
// equation solved via the vectorized Kronecker form, then improve K.
Mat policy_iteration(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, Mat K, int iterations) {
    const auto n = A.rows();
    for (int it = 0; it < iterations; ++it) {
        const Mat Acl = A + B * K;
        const Mat W = Q + K.transpose() * R * K;
        const Mat L = Mat::Identity(n * n, n * n) - kron(Acl.transpose(), Acl.transpose());
        const Vec w = Eigen::Map<const Vec>(W.data(), n * n);
        const Vec p = L.partialPivLu().solve(w);
        Mat P = Eigen::Map<const Mat>(p.data(), n, n);
        P = 0.5 * (P + P.transpose());
        K = gain_from(A, B, R, P);
    }
    return K;
}

} // namespace

TEST_CASE("scalar DARE") {
    SUBCASE("no dynamics") {
        const RiccatiSolution s = solve_dare(scalar(0), scalar(1), scalar(1), scalar(1));
        CHECK(s.P(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(s.F(0, 0)) < 1e-15);
    }
    SUBCASE("unstable scalar matches the closed form") {
        // P^2 - 1.21 P - 1 = 0 for a = 1.1, b = q = r = 1
        const double P = (1.21 + std::sqrt(1.21 * 1.21 + 4.0)) / 2.0;
        const double F = -1.1 * P / (1.0 + P);
        const Mat f = design_lqr(noiseless(scalar(1.1), scalar(1)), scalar(1), scalar(1));
        CHECK(std::abs(f(0, 0) - F) < 1e-9);
        CHECK(std::abs(1.1 + f(0, 0)) < 1.0);
        const Mat P_rec = riccati_recursion(scalar(1.1), scalar(1), scalar(1), scalar(1), 2000);
        CHECK(std::abs(P_rec(0, 0) - P) < 1e-9);
    }
}

TEST_CASE("cart-pole LQR") {
    const PlantModel p = plant_preset("selfbuilt");
    const Mat R = scalar(0.1);
    const Mat F = design_lqr(p, pendulum_Q(), R);
    CHECK(spectral_radius(p.A() + p.B() * F) < 1.0);

    const RiccatiSolution s = solve_dare(p.A(), p.B(), pendulum_Q(), R);
    CHECK(dare_residual(p.A(), p.B(), pendulum_Q(), R, s.P) < 1e-8);

    // independent oracle: long Riccati recursion
    const Mat P_ref = riccati_recursion(p.A(), p.B(), pendulum_Q(), R, 200000);
    const Mat F_ref = gain_from(p.A(), p.B(), R, P_ref);
    CHECK((F - F_ref).cwiseAbs().maxCoeff() < 1e-6 * F_ref.cwiseAbs().maxCoeff());

    for (std::uint32_t T : {4u, 5u, 10u}) {
        const PlantModel l = lift_model(p, T);
        const RiccatiSolution sl = solve_dare(l.A(), l.B(), pendulum_Q(), R);
        CHECK(dare_residual(l.A(), l.B(), pendulum_Q(), R, sl.P) < 1e-8);
        CHECK(spectral_radius(l.A() + l.B() * sl.F) < 1.0);
    }
}

TEST_CASE("unstabilizable pair is a synthesis error") {
    Mat A = Mat::Identity(2, 2) * 1.5;
    Mat B(2, 1);
    B << 1, 0;
    CHECK_THROWS_AS(solve_dare(A, B, Mat::Identity(2, 2), scalar(1), 1e-12, 2000), SynthesisError);
}

TEST_CASE("synchronization LQR") {
    const PlantModel p = plant_preset("selfbuilt");
    const std::vector<PlantModel> two{p, p};

    SUBCASE("no coupling cost gives decoupled gains") {
        const GainSet g = design_sync_lqr(two, {pendulum_Q()}, {scalar(0.1)}, Mat::Zero(4, 4));
        CHECK(g.block(0, 1).cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.block(1, 0).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("identical agents give symmetric gains") {
        const GainSet g = design_sync_lqr(two, {pendulum_Q()}, {scalar(0.1)}, 10 * Mat::Identity(4, 4));
        CHECK((g.block(0, 0) - g.block(1, 1)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((g.block(0, 1) - g.block(1, 0)).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("matches policy iteration on the stacked system") {
        Mat Qs = Mat::Zero(4, 4);
        Qs(0, 0) = 10;
        const GainSet g = design_sync_lqr(two, {pendulum_Q()}, {scalar(0.1)}, Qs);

        Mat A = Mat::Zero(8, 8), B = Mat::Zero(8, 2), Q = Mat::Zero(8, 8);
        A.topLeftCorner(4, 4) = A.bottomRightCorner(4, 4) = p.A();
        B.block(0, 0, 4, 1) = B.block(4, 1, 4, 1) = p.B();
        Q.topLeftCorner(4, 4) = pendulum_Q() + Qs;
        Q.bottomRightCorner(4, 4) = pendulum_Q() + Qs;
        Q.topRightCorner(4, 4) = -Qs;
        Q.bottomLeftCorner(4, 4) = -Qs;
        const Mat R = 0.1 * Mat::Identity(2, 2);
        // start from a stabilizing gain of a finite-horizon recursion
        const Mat K0 = gain_from(A, B, R, riccati_recursion(A, B, Q, R, 3000));
        REQUIRE(spectral_radius(A + B * K0) < 1.0);
        const Mat K = policy_iteration(A, B, Q, R, K0, 30);
        CHECK((g.F - K).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("every synthesized gain satisfies the Riccati equation") {
        const GainSet g = design_sync_lqr({p, plant_preset("perturbed"), p}, {pendulum_Q()}, {scalar(0.1)},
                                          Mat::Identity(4, 4), {{0, 1}, {1, 2}});
        CHECK(g.agents == 3);
        CHECK(g.F.rows() == 3);
        CHECK(g.F.cols() == 12);
        // chain coupling: agent 0 and 2 are coupled only through 1, but the
        // optimal gain is still dense
        CHECK(relevant_peers(g, 0).size() == 2);
    }
    CHECK_THROWS_AS(design_sync_lqr({p, plant_preset("cart")}, {pendulum_Q()}, {scalar(0.1)}, Mat::Zero(4, 4)),
                    ConfigError);
}

TEST_CASE("remote estimation and prediction") {
    const PlantModel model = noiseless(scalar(1.1), scalar(1));
    RemoteLoopState loop = RemoteLoopState::zero(1, 1);
    loop.xhat = Vec::Constant(1, 2.0);
    loop.uhat_prev = Vec::Constant(1, 0.5); // u^(k-1)

    SUBCASE("measurement received") {
        const RemoteLoopState l = remote_estimate(loop, model, Vec::Constant(1, 3.0), 4);
        CHECK(l.xhat(0) == doctest::Approx(1.1 * 3.0 + 0.5));
        CHECK(l.last_meas_round == 4);
    }
    SUBCASE("two losses in a row") {
        const double x0 = 2.0, u1 = 0.5, u2 = -0.25;
        RemoteLoopState l = remote_estimate(loop, model, std::nullopt);
        l.uhat_prev = Vec::Constant(1, u2);
        l = remote_estimate(l, model, std::nullopt);
        CHECK(l.xhat(0) == doctest::Approx(1.21 * x0 + 1.1 * u1 + u2));
    }
    SUBCASE("next input") {
        const Mat F = design_lqr(model, scalar(1), scalar(1));
        RemoteLoopState l = RemoteLoopState::zero(1, 1);
        l.xhat = Vec::Constant(1, 1.0);
        CHECK(remote_control_input(l, model, F)(0) == doctest::Approx(F(0, 0) * 1.1));
        CHECK(remote_control_input(RemoteLoopState::zero(1, 1), model, F)(0) == 0.0);
        CHECK(remote_control_input(l, model, scalar(0))(0) == 0.0);
    }
}

TEST_CASE("actuator hold") {
    const Vec five = Vec::Constant(1, 5), two = Vec::Constant(1, 2);
    CHECK(apply_actuation_zoh(true, five, two)(0) == 5);
    CHECK(apply_actuation_zoh(false, five, two)(0) == 2);
    Vec u = Vec::Zero(1);
    const bool phi[] = {true, false, false};
    for (int k = 0; k < 3; ++k) u = apply_actuation_zoh(phi[k], Vec::Constant(1, k + 1.0), u);
    CHECK(u(0) == 1);
}

TEST_CASE("remote loop estimate is exact without noise or loss") {
    const PlantModel base = plant_preset("selfbuilt");
    const PlantModel model = lift_model(noiseless(base.A(), base.B()), 4);
    const Mat F = design_lqr(model, pendulum_Q(), scalar(0.1));
    Rng rng(0);
    Vec x(4);
    x << 0.05, 0.01, 0, 0;
    RemoteLoopState loop = RemoteLoopState::zero(4, 1);
    Vec applied = Vec::Zero(1), cmd_in_flight = Vec::Zero(1);
    Vec y_prev = x;
    bool have_prev = false;
    for (int k = 0; k < 50; ++k) {
        auto [next_loop, next] = advance_remote_loop(loop, model, F, have_prev ? std::optional<Vec>(y_prev) : std::nullopt, k - 1);
        loop = next_loop;
        if (k >= 1) CHECK((loop.xhat - x).cwiseAbs().maxCoeff() < 1e-12);
        applied = apply_actuation_zoh(k >= 1, cmd_in_flight, applied);
        cmd_in_flight = next;
        y_prev = x;
        have_prev = true;
        x = model.A() * x + model.B() * applied;
    }
}

TEST_CASE("peer hold") {
    PeerEstimate e;
    e = peer_estimate_zoh(e, true, Vec::Constant(2, 1.0), 3);
    CHECK(e.xhat_j(0) == 1.0);
    CHECK(e.last_rx_round == 3);
    for (int k = 0; k < 3; ++k) {
        e = peer_estimate_zoh(e, false, std::nullopt, 4 + k);
        CHECK(e.xhat_j(1) == 1.0);
        CHECK(e.last_rx_round == 3);
    }
    e = peer_estimate_zoh(e, true, Vec::Constant(2, -2.0), 7);
    CHECK(e.xhat_j(0) == -2.0);
}

TEST_CASE("distributed input") {
    const PlantModel p = plant_preset("selfbuilt");
    const GainSet g = design_sync_lqr({p, p}, {pendulum_Q()}, {scalar(0.1)}, 10 * Mat::Identity(4, 4));
    const Vec x = Vec::LinSpaced(4, 0.1, 0.4);
    CHECK((distributed_input(0, x, {}, g, {}) - g.block(0, 0) * x).norm() == 0.0);
    std::map<std::size_t, PeerEstimate> peers;
    peers[1].xhat_j = Vec::Zero(4);
    CHECK(distributed_input(0, Vec::Zero(4), peers, g).norm() == 0.0);
    CHECK_THROWS_AS(distributed_input(0, x, {}, g), ContractError);
}

TEST_CASE("delayed distributed loop equals the stacked closed loop") {
    const PlantModel base = plant_preset("selfbuilt");
    const PlantModel p = lift_model(noiseless(base.A(), base.B()), 10);
    Mat Qs = Mat::Zero(4, 4);
    Qs(0, 0) = 10;
    const GainSet g = design_sync_lqr({p, p}, {pendulum_Q()}, {scalar(0.1)}, Qs);

    // stacked oracle over z = (x1, x2, x1(k-1), x2(k-1))
    Mat Z = Mat::Zero(16, 16);
    Z.block(0, 0, 4, 4) = p.A() + p.B() * g.block(0, 0);
    Z.block(0, 12, 4, 4) = p.B() * g.block(0, 1);
    Z.block(4, 4, 4, 4) = p.A() + p.B() * g.block(1, 1);
    Z.block(4, 8, 4, 4) = p.B() * g.block(1, 0);
    Z.block(8, 0, 4, 4) = Mat::Identity(4, 4);
    Z.block(12, 4, 4, 4) = Mat::Identity(4, 4);

    Vec x1(4), x2(4);
    x1 << 0.1, 0.01, 0, 0;
    x2 << -0.2, 0, 0.1, 0;
    Vec z(16);
    z << x1, x2, x1, x2;
    std::map<std::size_t, PeerEstimate> at1, at2;
    at1[1] = peer_estimate_zoh({}, true, x2, 0);
    at2[0] = peer_estimate_zoh({}, true, x1, 0);
    double worst = 0;
    for (int k = 0; k < 200; ++k) {
        const Vec u1 = distributed_input(0, x1, at1, g);
        const Vec u2 = distributed_input(1, x2, at2, g);
        at1[1] = peer_estimate_zoh(at1[1], true, x2, k);
        at2[0] = peer_estimate_zoh(at2[0], true, x1, k);
        x1 = p.A() * x1 + p.B() * u1;
        x2 = p.A() * x2 + p.B() * u2;
        z = Z * z;
        worst = std::max({worst, (z.head(4) - x1).cwiseAbs().maxCoeff(), (z.segment(4, 4) - x2).cwiseAbs().maxCoeff()});
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("input communication equals state communication") {
    const PlantModel base = plant_preset("selfbuilt");
    const PlantModel p = lift_model(noiseless(base.A(), base.B()), 5);
    const GainSet g = design_sync_lqr({p, p, p}, {pendulum_Q()}, {scalar(0.1)}, 5 * Mat::Identity(4, 4));
    std::vector<Vec> xs(3), xi(3);
    for (int a = 0; a < 3; ++a) xs[a] = xi[a] = Vec::Constant(4, 0.05 * (a - 1));
    // state communication: peers hold x_j(k-1); input communication: peers hold F_ij x_j(k-1)
    std::vector<std::map<std::size_t, PeerEstimate>> est(3);
    std::vector<std::vector<Vec>> held(3, std::vector<Vec>(3, Vec::Zero(1)));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) {
                est[i][j] = peer_estimate_zoh({}, true, xs[j], 0);
                held[i][j] = self_triggered_peer_input(xi[j], g, i, j);
            }
    for (int k = 0; k < 100; ++k) {
        std::vector<Vec> us(3), ui(3);
        for (int i = 0; i < 3; ++i) {
            us[i] = distributed_input(i, xs[i], est[i], g);
            ui[i] = g.block(i, i) * xi[i];
            for (int j = 0; j < 3; ++j)
                if (j != i) ui[i] += held[i][j];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) {
                    est[i][j] = peer_estimate_zoh(est[i][j], true, xs[j], k);
                    held[i][j] = self_triggered_peer_input(xi[j], g, i, j);
                }
        for (int a = 0; a < 3; ++a) {
            xs[a] = p.A() * xs[a] + p.B() * us[a];
            xi[a] = p.A() * xi[a] + p.B() * ui[a];
            CHECK((xs[a] - xi[a]).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    // stacked contributions
    const Mat G = peer_contribution_matrix(g, 1);
    CHECK(G.rows() == 2);
    CHECK((G.row(0) - g.block(0, 1)).norm() == 0.0);
    CHECK((G.row(1) - g.block(2, 1)).norm() == 0.0);
    CHECK(self_triggered_peer_input(Vec::Zero(4), g, 0, 1).norm() == 0.0);
}

TEST_CASE("consensus update") {
    SUBCASE("all-to-all equal weights agree after one update") {
        const std::vector<double> init{-1, 0, 1, 2, 3};
        const Vec w = Vec::Constant(5, 0.2);
        for (std::size_t i = 0; i < 5; ++i) {
            std::map<std::size_t, double> rx;
            for (std::size_t j = 0; j < 5; ++j)
                if (j != i) rx[j] = init[j];
            const ConsensusState s = consensus_update(ConsensusState{init[i]}, i, rx, w);
            CHECK(std::abs(s.x_des - 1.0) < 1e-12);
        }
    }
    SUBCASE("directed chain converges geometrically") {
        std::vector<double> x{1, 0, 0, 0, 0};
        for (int k = 1; k <= 30; ++k) {
            std::vector<double> next = x;
            for (std::size_t i = 1; i < 5; ++i) {
                Vec w = Vec::Zero(5);
                w(i) = w(i - 1) = 0.5;
                next[i] = consensus_update(ConsensusState{x[i]}, i, {{i - 1, x[i - 1]}}, w).x_des;
            }
            Vec w0 = Vec::Zero(5);
            w0(0) = 1;
            next[0] = consensus_update(ConsensusState{x[0]}, 0, {}, w0).x_des;
            x = next;
            CHECK(std::abs(x[1] - (1.0 - std::pow(2.0, -k))) < 1e-15);
        }
    }
    SUBCASE("single agent") {
        CHECK(consensus_update(ConsensusState{0.7}, 0, {}, Vec::Ones(1)).x_des == 0.7);
    }
    SUBCASE("unheard peers fold into the self weight") {
        const Vec w = Vec::Constant(3, 1.0 / 3.0);
        const ConsensusState s = consensus_update(ConsensusState{3.0}, 0, {{1, 0.0}}, w);
        CHECK(s.x_des == doctest::Approx(2.0));
    }
    SUBCASE("doubly stochastic weights preserve the average") {
        Rng rng(4);
        const std::size_t N = 6;
        const Vec w = Vec::Constant(N, 1.0 / N);
        std::vector<double> x(N);
        for (auto& v : x) v = rng.gaussian();
        const double sum0 = std::accumulate(x.begin(), x.end(), 0.0);
        for (int k = 0; k < 10; ++k) {
            std::vector<double> next(N);
            for (std::size_t i = 0; i < N; ++i) {
                std::map<std::size_t, double> rx;
                for (std::size_t j = 0; j < N; ++j)
                    if (j != i) rx[j] = x[j];
                next[i] = consensus_update(ConsensusState{x[i]}, i, rx, w).x_des;
            }
            x = next;
            CHECK(std::abs(std::accumulate(x.begin(), x.end(), 0.0) - sum0) < 1e-12);
        }
    }
}

TEST_CASE("tracking input") {
    GainSet g;
    g.track_gain = 50;
    g.integrator_gain = 5;
    ConsensusState s{0.0, true, 0, 0.3};
    CHECK(consensus_track_input(0.3, s, g, 0.0).u(0) == 0.0);
    CHECK(consensus_track_input(0.31, s, g, 0.0).u(0) == doctest::Approx(0.5));
    double integ = 0.0;
    const double e = 0.02;
    for (int t = 0; t < 3; ++t) integ = consensus_track_input(0.3 + e, s, g, integ).integ;
    const double u = consensus_track_input(0.3, s, g, integ).u(0);
    CHECK(u == doctest::Approx(5 * 3 * e * kTickSeconds));
    s.agreed = false;
    CHECK_THROWS_AS(consensus_track_input(0.3, s, g, 0.0), ContractError);
}

TEST_CASE("agreement detector") {
    CHECK(agreement_detector({{1, 1, 1}, {2, 5, 5, 5}}, 1e-9, 3));
    CHECK_FALSE(agreement_detector({{1, 1, 1}, {2, 5, 5}}, 1e-9, 3));
    CHECK(agreement_detector({{1, 1, 1}, {5, 5, 5}}, 1e-9, 3));
    CHECK_FALSE(agreement_detector({{1, 1, 1.1}}, 0.05, 3));
    CHECK_FALSE(agreement_detector({{1, 1}}, 0.05, 3));
    // all-to-all equal weights: the values heard from peers settle one round
    // after the first update, so the detector fires at round 1 + R
    const std::size_t R = 3;
    const std::vector<double> init{-1, 0, 1, 2, 3};
    std::vector<double> x = init;
    std::vector<std::vector<double>> heard(5);
    int fired = -1;
    for (int k = 1; k <= 10 && fired < 0; ++k) {
        for (std::size_t j = 0; j < 5; ++j) heard[j].push_back(x[j]); // sent before the update
        std::vector<double> next(5);
        for (std::size_t i = 0; i < 5; ++i) {
            std::map<std::size_t, double> rx;
            for (std::size_t j = 0; j < 5; ++j)
                if (j != i) rx[j] = x[j];
            next[i] = consensus_update(ConsensusState{x[i]}, i, rx, Vec::Constant(5, 0.2)).x_des;
        }
        x = next;
        if (agreement_detector(heard, 1e-9, R)) fired = k;
    }
    CHECK(fired == 1 + static_cast<int>(R));
}

TEST_CASE("self-trigger horizon") {
    auto zero_drift = [](std::uint32_t) { return Vec::Zero(1); };
    const double s2 = 0.01;
    auto linear_cov = [&](std::uint32_t M) { return Mat::Constant(1, 1, M * s2); };
    CHECK(self_trigger_horizon(zero_drift, linear_cov, 0.0, 20) == 1);
    CHECK(self_trigger_horizon(zero_drift, [](std::uint32_t) { return Mat::Zero(1, 1); }, 0.5, 20) == 20);
    CHECK(self_trigger_horizon(zero_drift, linear_cov, 3.5 * s2, 20) == 4);

    // the same threshold crossing seen through samples of a random walk
    Rng rng(12);
    constexpr int N = 100000;
    std::vector<double> second(6, 0.0);
    for (int i = 0; i < N; ++i) {
        double e = 0;
        for (int M = 1; M <= 5; ++M) {
            e += std::sqrt(s2) * rng.gaussian();
            second[M] += e * e;
        }
    }
    int first = -1;
    for (int M = 1; M <= 5 && first < 0; ++M)
        if (second[M] / N > 3.5 * s2) first = M;
    CHECK(first == 4);

    // monotone in delta
    auto drift = [](std::uint32_t M) { return Vec::Constant(2, 0.01 * M); };
    std::uint32_t prev = 1;
    for (double d = 0.0; d < 0.2; d += 0.002) {
        const std::uint32_t M = self_trigger_horizon(drift, linear_cov, d, 30);
        CHECK(M >= prev);
        prev = M;
    }
    CHECK_THROWS_AS(self_trigger_horizon(drift, linear_cov, 0.1, 0), ContractError);
}

TEST_CASE("held-input error forecast matches Monte Carlo") {
    auto check_instance = [](const Mat& phi, const Mat& gamma, const Vec& c, const Mat& G, const Mat& sigma,
                             const Vec& x0, std::uint64_t seed) {
        const std::uint32_t H = 6;
        const ErrorForecast f = forecast_held_input_error(phi, gamma, c, G, sigma, x0, H);
        const Mat L = psd_factor(sigma);
        Rng rng(seed);
        constexpr int N = 20000;
        std::vector<double> sum(H + 1, 0.0), sumsq(H + 1, 0.0);
        for (int i = 0; i < N; ++i) {
            Vec x = x0;
            for (std::uint32_t M = 1; M <= H; ++M) {
                x = phi * x + gamma * c + sample_gaussian(L, rng);
                const double e2 = (G * (x - x0)).squaredNorm();
                sum[M] += e2;
                sumsq[M] += e2 * e2;
            }
        }
        for (std::uint32_t M = 1; M <= H; ++M) {
            const double mean = sum[M] / N;
            const double se = std::sqrt((sumsq[M] / N - mean * mean) / N);
            CHECK(std::abs(mean - f.expected_squared_error(M)) < 3 * se);
        }
    };
    SUBCASE("scalar") {
        check_instance(scalar(0.9), scalar(1), Vec::Constant(1, 0.2), scalar(1.5), scalar(0.04),
                       Vec::Constant(1, 1.0), 31);
    }
    SUBCASE("four-dimensional") {
        const PlantModel base = plant_preset("selfbuilt");
        const PlantModel l = lift_model(base, 5);
        const Mat F = design_lqr(l, pendulum_Q(), scalar(0.1));
        Mat G(2, 4);
        G << F, 0.5 * F;
        Vec x0(4);
        x0 << 0.05, 0.01, -0.02, 0.0;
        check_instance(l.A() + l.B() * F, l.B(), Vec::Constant(1, 0.1), G, 1e-4 * Mat::Identity(4, 4), x0, 32);
    }
}

TEST_CASE("gain set validation") {
    GainSet g;
    g.agents = 2;
    g.n = 1;
    g.m = 1;
    g.F = Mat::Zero(2, 2);
    g.consensus_weights = Mat::Constant(2, 2, 0.5);
    g.max_horizon = 1;
    CHECK_NOTHROW(g.validate());
    g.consensus_weights(0, 0) = 0.6;
    g.delta = -1;
    g.max_horizon = 0;
    try {
        g.validate();
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.violations().size() >= 3);
    }
}
