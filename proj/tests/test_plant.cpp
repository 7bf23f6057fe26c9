#include <doctest.h>

#include "wncs/errors.hpp"
#include "wncs/plant.hpp"
#include "wncs/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace wncs;

namespace {

PlantModel noiseless(const Mat& a, const Mat& b) {
    const auto n = a.rows();
    return PlantModel(a, b, Mat::Zero(n, n), Mat::Zero(n, n));
}

} // namespace

TEST_CASE("splitmix64 reference stream") {
    // published first outputs of splitmix64 seeded with 0
    Rng r(0);
    CHECK(r.next_u64() == 0xE220A8397B1DCDAFULL);
    CHECK(r.next_u64() == 0x6E789E6AA1B965F4ULL);
    CHECK(r.next_u64() == 0x06C45D188009454FULL);
}

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.uniform() == b.uniform());
        CHECK(a.gaussian() == b.gaussian());
    }
}

TEST_CASE("derived streams are independent of each other") {
    Rng p = derive_stream(7, "process", 0);
    Rng q = derive_stream(7, "process", 1);
    Rng m = derive_stream(7, "measure", 0);
    CHECK(p.next_u64() != q.next_u64());
    CHECK(derive_stream(7, "process", 0) == derive_stream(7, "process", 0));
    CHECK_FALSE(derive_stream(7, "process", 0) == m);
}

TEST_CASE("step with zero noise and identity dynamics keeps the state") {
    const PlantModel model = noiseless(Mat::Identity(4, 4), Mat::Zero(4, 1));
    Rng rng(1);
    PlantState s{Vec::LinSpaced(4, 1, 4), 0};
    const PlantState next = step_plant(model, s, Vec::Constant(1, 3.0), rng);
    CHECK((next.x - s.x).norm() == 0.0);
    CHECK(next.tick == 1);
}

TEST_CASE("identified cart-pole: unit input from rest") {
    const PlantModel p = plant_preset("selfbuilt");
    const PlantModel model = noiseless(p.A(), p.B());
    Rng rng(1);
    const PlantState next = step_plant(model, PlantState{Vec::Zero(4), 0}, Vec::Ones(1), rng);
    CHECK(next.x(0) == doctest::Approx(3e-4));
    CHECK(next.x(1) == doctest::Approx(9e-4));
    CHECK(next.x(2) == doctest::Approx(8e-3));
    CHECK(next.x(3) == doctest::Approx(1e-2));
    CHECK(p.A()(2, 1) == doctest::Approx(-0.11));
    CHECK(p.A()(1, 1) == doctest::Approx(1.02));
}

TEST_CASE("step errors") {
    const PlantModel model = plant_preset("selfbuilt");
    Rng rng(1);
    CHECK_THROWS_AS(step_plant(model, PlantState{Vec::Zero(3), 0}, Vec::Zero(1), rng), ConfigError);
    CHECK_THROWS_AS(step_plant(model, PlantState{Vec::Zero(4), 0}, Vec::Zero(2), rng), ConfigError);
    const PlantModel huge = noiseless(Mat::Identity(1, 1) * 1e308, Mat::Identity(1, 1));
    CHECK_THROWS_AS(step_plant(huge, PlantState{Vec::Constant(1, 10.0), 0}, Vec::Zero(1), rng), DivergenceError);
    CHECK_THROWS_AS(plant_preset("segway"), ConfigError);
}

TEST_CASE("process noise sample mean matches the analytic mean") {
    const double sigma = 0.1;
    const PlantModel p = plant_preset("selfbuilt");
    const PlantModel model(p.A(), p.B(), sigma * sigma * Mat::Identity(4, 4), Mat::Zero(4, 4));
    const PlantState s{Vec::LinSpaced(4, 0.1, 0.4), 0};
    const Vec u = Vec::Constant(1, 0.5);
    const Vec expected = p.A() * s.x + p.B() * u;
    constexpr int N = 100000;
    Rng rng(2024);
    Vec sum = Vec::Zero(4);
    for (int i = 0; i < N; ++i) sum += step_plant(model, s, u, rng).x;
    const Vec mean = sum / N;
    for (int i = 0; i < 4; ++i) CHECK(std::abs(mean(i) - expected(i)) < 4 * sigma / std::sqrt(double(N)));
}

TEST_CASE("measurement noise variance") {
    const PlantModel model(Mat::Identity(3, 3), Mat::Ones(3, 1), Mat::Zero(3, 3), 1e-4 * Mat::Identity(3, 3));
    const PlantState s{Vec::Zero(3), 0};
    constexpr int N = 100000;
    Rng rng(5);
    Vec sq = Vec::Zero(3);
    for (int i = 0; i < N; ++i) sq += measure(model, s, rng).cwiseAbs2();
    for (int i = 0; i < 3; ++i) CHECK(std::abs(sq(i) / N - 1e-4) < 0.05 * 1e-4);

    const PlantModel exact(Mat::Identity(3, 3), Mat::Ones(3, 1), Mat::Zero(3, 3), Mat::Zero(3, 3));
    const PlantState t{Vec::LinSpaced(3, -1, 1), 0};
    CHECK((measure(exact, t, rng) - t.x).norm() == 0.0);
}

TEST_CASE("process noise is white") {
    const PlantModel model(Mat::Zero(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1));
    constexpr int N = 100000;
    Rng rng(9);
    std::vector<double> v(N);
    for (int i = 0; i < N; ++i) v[i] = step_plant(model, PlantState{Vec::Zero(1), 0}, Vec::Zero(1), rng).x(0);
    for (int lag = 1; lag <= 3; ++lag) {
        double num = 0, den = 0;
        for (int i = 0; i < N; ++i) {
            den += v[i] * v[i];
            if (i + lag < N) num += v[i] * v[i + lag];
        }
        CHECK(std::abs(num / den) < 4.0 / std::sqrt(double(N)));
    }
}

TEST_CASE("lifting") {
    const PlantModel p = plant_preset("selfbuilt");
    SUBCASE("one step is the identity") {
        const PlantModel l = lift_model(p, 1);
        CHECK((l.A() - p.A()).norm() == 0.0);
        CHECK((l.B() - p.B()).norm() == 0.0);
        CHECK((l.sigma_v() - p.sigma_v()).norm() == 0.0);
        CHECK(l.base_interval() == 1);
    }
    SUBCASE("scalar-diagonal geometric sum") {
        const double a = 0.7;
        const PlantModel m(a * Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Zero(2, 2), Mat::Zero(2, 2));
        const PlantModel l = lift_model(m, 3);
        CHECK((l.A() - a * a * a * Mat::Identity(2, 2)).norm() < 1e-15);
        CHECK((l.B() - (1 + a + a * a) * Mat::Ones(2, 1)).norm() < 1e-15);
        CHECK(l.base_interval() == 3);
    }
    SUBCASE("ten steps equal ten held-input plant steps") {
        const PlantModel model = noiseless(p.A(), p.B());
        const PlantModel l = lift_model(model, 10);
        Rng rng(0);
        for (int trial = 0; trial < 5; ++trial) {
            Vec x0(4);
            for (int i = 0; i < 4; ++i) x0(i) = rng.gaussian();
            const Vec u = Vec::Constant(1, rng.gaussian());
            PlantState s{x0, 0};
            for (int i = 0; i < 10; ++i) s = step_plant(model, s, u, rng);
            const Vec lifted = l.A() * x0 + l.B() * u;
            CHECK((s.x - lifted).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(s.tick == 10);
        }
    }
    SUBCASE("lifting composes") {
        const PlantModel ab = lift_model(p, 6);
        const PlantModel a_b = lift_model(lift_model(p, 2), 3);
        CHECK((ab.A() - a_b.A()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((ab.B() - a_b.B()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((ab.sigma_v() - a_b.sigma_v()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(lift_model(p, 0), std::invalid_argument);
}

TEST_CASE("covariances must be positive semidefinite") {
    Mat bad = Mat::Identity(2, 2);
    bad(1, 1) = -1;
    CHECK_THROWS_AS(PlantModel(Mat::Identity(2, 2), Mat::Ones(2, 1), bad, Mat::Zero(2, 2)), ConfigError);
    CHECK_THROWS_AS(PlantModel(Mat::Identity(2, 2), Mat::Ones(3, 1), Mat::Zero(2, 2), Mat::Zero(2, 2)), ConfigError);
}
