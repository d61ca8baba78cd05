#include <cmath>
#include <vector>

#include "doctest.h"
#include "gridloop/error.hpp"
#include "gridloop/grid.hpp"
#include "gridloop/rng.hpp"

using namespace gridloop;
using namespace gridloop::grid;

namespace {

Network two_bus() {
    return Network({{1, BusKind::slack}, {2, BusKind::pq}}, {{1, 2, 10.0}},
                   Topology::meshed_transmission);
}

Network triangle() {
    return Network({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}},
                   {{1, 2, 10.0}, {2, 3, 10.0}, {1, 3, 5.0}}, Topology::meshed_transmission);
}

// Gaussian elimination with partial pivoting, written independently of the
// library's factorization.
std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * x[j];
        x[k] = s / a[k][k];
    }
    return x;
}

Network feeder4() {
    // 1 (slack) - 2 - 3, and 2 - 4
    return Network({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}, {4, BusKind::pq}},
                   {{1, 2, 0.0, 0.01, 0.02}, {2, 3, 0.0, 0.02, 0.01}, {2, 4, 0.0, 0.015, 0.03}},
                   Topology::radial_distribution);
}

}  // namespace

TEST_CASE("dc power flow on two buses") {
    const auto f = dc_power_flow(two_bus(), std::vector<double>{1.0, -1.0});
    CHECK(f.angles[0] - f.angles[1] == doctest::Approx(0.1));
    CHECK(f.flows[0] == doctest::Approx(1.0));
    CHECK(f.slack_injection == doctest::Approx(1.0));
}

TEST_CASE("dc power flow with zero injections") {
    const auto f = dc_power_flow(triangle(), std::vector<double>{0.0, 0.0, 0.0});
    for (double a : f.angles) CHECK(a == 0.0);
    for (double x : f.flows) CHECK(x == 0.0);
}

TEST_CASE("dc power flow on the triangle matches an independent dense solve") {
    const std::vector<double> p{1.0, -0.4, -0.6};
    // Reduced B (slack bus 1 removed): buses 2, 3.
    const std::vector<std::vector<double>> b{{20.0, -10.0}, {-10.0, 15.0}};
    const auto theta = gauss_solve(b, {p[1], p[2]});
    const std::vector<double> ang{0.0, theta[0], theta[1]};
    const std::vector<double> expected{10.0 * (ang[0] - ang[1]), 10.0 * (ang[1] - ang[2]),
                                       5.0 * (ang[0] - ang[2])};
    const auto f = dc_power_flow(triangle(), p);
    for (std::size_t l = 0; l < 3; ++l) CHECK(std::abs(f.flows[l] - expected[l]) < 1e-9);
}

TEST_CASE("dc power flow conserves flow at every bus (random injections)") {
    CounterRng rng(CounterRng::stream_key(3, "dcpf-property"));
    Network net({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}, {4, BusKind::pv}, {5, BusKind::pq}},
                {{1, 2, 8.0}, {2, 3, 4.0}, {3, 4, 6.0}, {4, 5, 9.0}, {5, 1, 3.0}, {2, 4, 2.5}},
                Topology::meshed_transmission);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(5);
        double total = 0;
        for (std::size_t i = 1; i < 5; ++i) {
            p[i] = rng.normal();
            total += p[i];
        }
        p[0] = -total;
        const auto f = dc_power_flow(net, p);
        for (std::size_t i = 0; i < 5; ++i) {
            double balance = p[i];
            for (std::size_t l = 0; l < net.lines().size(); ++l) {
                if (net.from_index(l) == i) balance -= f.flows[l];
                if (net.to_index(l) == i) balance += f.flows[l];
            }
            CHECK(std::abs(balance) < 1e-9);
        }
    }
}

TEST_CASE("ptdf reproduces dc power flow") {
    const auto net = triangle();
    const auto h = ptdf(net);
    const std::vector<double> p{0.3, 0.2, -0.5};
    const auto f = dc_power_flow(net, p);
    for (Eigen::Index l = 0; l < h.rows(); ++l) {
        double flow = 0;
        for (Eigen::Index k = 0; k < h.cols(); ++k) flow += h(l, k) * p[k];
        CHECK(flow == doctest::Approx(f.flows[l]));
    }
}

TEST_CASE("dc power flow rejects a disconnected network") {
    Network net({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}}, {{1, 2, 10.0}},
                Topology::meshed_transmission);
    CHECK_THROWS_AS(dc_power_flow(net, std::vector<double>{0, 0, 0}), NumericError);
    CHECK_THROWS_AS(net.validate(), ConfigError);
}

TEST_CASE("lindistflow single line closed form") {
    Network net({{1, BusKind::slack}, {2, BusKind::pq}}, {{1, 2, 0.0, 0.01, 0.02}},
                Topology::radial_distribution);
    const auto f = lindistflow_solve(net, std::vector<double>{0.0, 0.1}, std::vector<double>{0.0, 0.05});
    CHECK(f.voltage_sq[1] == doctest::Approx(0.996).epsilon(1e-14));
    CHECK(f.p_flow[0] == doctest::Approx(0.1));
}

TEST_CASE("lindistflow with zero load is flat") {
    const auto f = lindistflow_solve(feeder4(), std::vector<double>(4, 0.0), std::vector<double>(4, 0.0));
    for (double v : f.voltage_sq) CHECK(v == 1.0);
}

TEST_CASE("lindistflow on a 4-node feeder matches hand recursion") {
    const std::vector<double> p{0.0, 0.05, 0.08, 0.03}, q{0.0, 0.02, 0.01, 0.04};
    // Hand evaluation: flows are subtree sums; voltages drop along the path.
    const double p12 = p[1] + p[2] + p[3], q12 = q[1] + q[2] + q[3];
    const double v2 = 1.0 - 2.0 * (0.01 * p12 + 0.02 * q12);
    const double v3 = v2 - 2.0 * (0.02 * p[2] + 0.01 * q[2]);
    const double v4 = v2 - 2.0 * (0.015 * p[3] + 0.03 * q[3]);
    const auto f = lindistflow_solve(feeder4(), p, q);
    CHECK(std::abs(f.voltage_sq[1] - v2) < 1e-12);
    CHECK(std::abs(f.voltage_sq[2] - v3) < 1e-12);
    CHECK(std::abs(f.voltage_sq[3] - v4) < 1e-12);
    CHECK(std::abs(f.q_flow[0] - q12) < 1e-15);
}

TEST_CASE("lindistflow voltages are non-increasing away from the root") {
    CounterRng rng(CounterRng::stream_key(9, "ldf-property"));
    const auto net = feeder4();
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(4), q(4);
        for (std::size_t i = 1; i < 4; ++i) {
            p[i] = rng.uniform() * 0.2;
            q[i] = rng.uniform() * 0.1;
        }
        const auto f = lindistflow_solve(net, p, q);
        CHECK(f.voltage_sq[1] <= f.voltage_sq[0]);
        CHECK(f.voltage_sq[2] <= f.voltage_sq[1]);
        CHECK(f.voltage_sq[3] <= f.voltage_sq[1]);
        const auto g = lindistflow_solve(net, p, q);
        CHECK(f.voltage_sq == g.voltage_sq);
    }
}

TEST_CASE("lindistflow rejects meshed input") {
    Network net({{1, BusKind::slack}, {2, BusKind::pq}, {3, BusKind::pq}},
                {{1, 2, 0, 0.01, 0.01}, {2, 3, 0, 0.01, 0.01}, {1, 3, 0, 0.01, 0.01}},
                Topology::radial_distribution);
    CHECK_THROWS_AS(lindistflow_solve(net, std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)),
                    InvalidArgument);
    CHECK_FALSE(net.problems().empty());
}

TEST_CASE("current proxy is the conservative box") {
    Line l;
    l.current_limit = 1.0;
    CHECK(within_current_proxy(l, 1.0, 0.4));
    CHECK_FALSE(within_current_proxy(l, 1.0, 0.5));
}
