#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdfrecon/adam.hpp"
#include "sdfrecon/rng.hpp"

using namespace sdfrecon;

TEST_CASE("first step follows the published recurrences") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd g = Eigen::VectorXd::Ones(1);
    AdamState st(1);
    adam_step(p, g, st, 1e-2);
    // m=0.1, v=0.001, mhat=1, vhat=1 -> update = -lr/(1+eps)
    CHECK(p[0] == doctest::Approx(-1e-2 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(st.step == 1);
}

TEST_CASE("hand-applied recurrences over several steps") {
    Rng rng(3);
    Eigen::VectorXd p(4), m = Eigen::VectorXd::Zero(4), v = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 4; ++i) p[i] = rng.gaussian();
    Eigen::VectorXd p_ref = p;
    AdamState st(4);
    const double lr = 3e-3;
    for (int t = 1; t <= 10; ++t) {
        Eigen::VectorXd g(4);
        for (int i = 0; i < 4; ++i) g[i] = rng.gaussian();
        adam_step(p, g, st, lr);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g.cwiseProduct(g);
        for (int i = 0; i < 4; ++i)
            p_ref[i] -= lr * (m[i] / (1 - std::pow(0.9, t))) /
                        (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
        REQUIRE(p.isApprox(p_ref, 1e-12));
    }
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
    Eigen::VectorXd p = Eigen::VectorXd::Ones(3);
    AdamState st(3);
    adam_step(p, Eigen::VectorXd::Zero(3), st, 1e-2);
    CHECK(p.isApprox(Eigen::VectorXd::Ones(3), 1e-12));
    CHECK(st.m.isZero());
    CHECK(st.v.isZero());
}

TEST_CASE("zero gradient decays accumulated moments") {
    Eigen::VectorXd p = Eigen::VectorXd::Ones(3);
    AdamState st(3);
    st.m.setConstant(0.5);
    st.v.setConstant(0.25);
    adam_step(p, Eigen::VectorXd::Zero(3), st, 1e-2);
    CHECK(st.m.isApproxToConstant(0.45));
    CHECK(st.v.isApproxToConstant(0.25 * 0.999));
}

TEST_CASE("non-finite gradient is rejected and parameters untouched") {
    Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
    Eigen::VectorXd g(2);
    g << 1.0, std::numeric_limits<double>::quiet_NaN();
    AdamState st(2);
    CHECK_THROWS_AS(adam_step(p, g, st, 1e-2), std::runtime_error);
    CHECK(p.isApprox(Eigen::VectorXd::Ones(2)));
    CHECK(st.step == 0);
}

TEST_CASE("identical runs are bit-identical") {
    auto run = [] {
        Rng rng(7);
        Eigen::VectorXd p(8);
        for (int i = 0; i < 8; ++i) p[i] = rng.gaussian();
        AdamState st(8);
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd g(8);
            for (int i = 0; i < 8; ++i) g[i] = rng.gaussian();
            adam_step(p, g, st, 1e-3);
        }
        return p;
    };
    Eigen::VectorXd a = run(), b = run();
    CHECK((a.array() == b.array()).all());
}
