#include <Eigen/Eigenvalues>
#include <complex>

#include "ccmnet/hinf.hpp"
#include "doctest.h"

using namespace ccmnet;

namespace {

// closed-loop L2 gain estimate by frequency sweep
double sweep_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& H,
                  const Eigen::MatrixXd& C, const Eigen::MatrixXd& D, const Eigen::MatrixXd& K) {
    Eigen::MatrixXd Acl = A + B * K;
    Eigen::MatrixXd Ccl = C + D * K;
    const int n = static_cast<int>(A.rows());
    double worst = 0.0;
    for (double lw = -3; lw <= 5; lw += 0.01) {
        std::complex<double> jw(0.0, std::pow(10.0, lw));
        Eigen::MatrixXcd M =
            (jw * Eigen::MatrixXcd::Identity(n, n) - Acl.cast<std::complex<double>>())
                .partialPivLu()
                .solve(H.cast<std::complex<double>>());
        Eigen::MatrixXcd G = Ccl.cast<std::complex<double>>() * M;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(G);
        worst = std::max(worst, svd.singularValues()[0]);
    }
    return worst;
}

}  // namespace

TEST_CASE("hinf_stable_no_disturbance_coupling") {
    // xdot = -x + u, H = 0: gain bound can be made arbitrarily small
    Eigen::MatrixXd A = -Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(1, 1);
    auto res = hinf_structured(A, B, H, C, D, {1}, {1}, {{1, 1}});
    REQUIRE(res.success);
    CHECK(res.alpha < 1e-3);
}

TEST_CASE("hinf_scalar_riccati_oracle") {
    // xdot = x + u + w, y = (x; u): optimal gain bound approaches 1 from
    // above as k -> -inf (|T| = sqrt(1+k^2)/|1+k|), so alpha in (1, ~1.6]
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
    Eigen::MatrixXd C(2, 1), D(2, 1);
    C << 1, 0;
    D << 0, 1;
    auto res = hinf_structured(A, B, H, C, D, {1}, {1}, {{1, 1}});
    REQUIRE(res.success);
    CHECK(res.alpha > 1.0);
    CHECK(res.alpha < 2.0);
    double k = res.K(0, 0);
    CHECK(k < -1.0);  // stabilizing
    // the achieved closed loop respects the certified bound
    CHECK(sweep_gain(A, B, H, C, D, res.K) <= res.alpha * (1 + 1e-6));
}

TEST_CASE("hinf_respects_block_pattern") {
    // two decoupled unstable nodes, decentralized Z: K must stay diagonal
    Eigen::MatrixXd A(2, 2);
    A << 1, 0.2, 0.2, 1;
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd H(2, 1);
    H << 0, 1;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
    auto res = hinf_structured(A, B, H, C, D, {1, 1}, {1, 1}, {{1, 1}, {2, 2}});
    REQUIRE(res.success);
    // Z diagonal and Q diagonal (block..) => K diagonal
    CHECK(std::abs(res.K(0, 1)) < 1e-12);
    CHECK(std::abs(res.K(1, 0)) < 1e-12);
    Eigen::MatrixXd Acl = A + B * res.K;
    Eigen::VectorXcd ev = Acl.eigenvalues();
    CHECK(ev.real().maxCoeff() < 0.0);
    CHECK(sweep_gain(A, B, H, C, D, res.K) <= res.alpha * (1 + 1e-6));
}

TEST_CASE("hinf_coupled_gain_bound_holds") {
    // chain of 3 integrator-ish nodes with neighbor communication
    Eigen::MatrixXd A(3, 3);
    A << 0.5, 1, 0, 1, 0.5, 1, 0, 1, 0.5;
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd H(3, 1);
    H << 0, 1, 0;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
    std::set<std::pair<int, int>> pat = {{1, 1}, {2, 2}, {3, 3}, {1, 2}, {2, 1}, {2, 3}, {3, 2}};
    auto res = hinf_structured(A, B, H, C, D, {1, 1, 1}, {1, 1, 1}, pat);
    REQUIRE(res.success);
    CHECK(std::abs(res.K(0, 2)) < 1e-12);  // no (1,3) communication
    CHECK(std::abs(res.K(2, 0)) < 1e-12);
    CHECK(sweep_gain(A, B, H, C, D, res.K) <= res.alpha * (1 + 1e-6));
}

TEST_CASE("hinf_dimension_check") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(1, 1);  // wrong row count
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(1, 2);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(hinf_structured(A, B, H, C, D, {2}, {1}, {{1, 1}}), std::invalid_argument);
}
