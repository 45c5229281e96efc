#include <doctest.h>

#include <random>

#include "cmil/pooling.hpp"
#include "oracles.hpp"

using namespace cmil;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

MatrixXd reverse_rows(const MatrixXd& h) { return h.colwise().reverse(); }

}  // namespace

TEST_CASE("max and mean pooling") {
  MatrixXd h(2, 2);
  h << 0, 3, 2, 1;
  CHECK(max_pool(h) == VectorXd((VectorXd(2) << 2, 3).finished()));
  CHECK(mean_pool(h) == VectorXd((VectorXd(2) << 1, 2).finished()));

  const MatrixXd single = (MatrixXd(1, 3) << 1.5, -2, 7).finished();
  CHECK(max_pool(single) == single.row(0).transpose());
  CHECK(mean_pool(single) == single.row(0).transpose());
  CHECK(logsumexp_pool(single).isApprox(single.row(0).transpose()));

  std::mt19937_64 rng(1);
  const MatrixXd r = random_matrix(rng, 9, 4);
  CHECK(max_pool(reverse_rows(r)) == max_pool(r));
  CHECK(mean_pool(reverse_rows(r)).isApprox(mean_pool(r), 1e-14));
  CHECK(logsumexp_pool(reverse_rows(r)).isApprox(logsumexp_pool(r), 1e-14));

  CHECK_THROWS_AS(max_pool(MatrixXd(0, 3)), std::invalid_argument);
  CHECK_THROWS_AS(mean_pool(MatrixXd(0, 3)), std::invalid_argument);
}

TEST_CASE("ABMIL attention pooling") {
  std::mt19937_64 rng(2);
  const MatrixXd h = random_matrix(rng, 7, 5);

  SUBCASE("zero projection gives uniform weights and the mean") {
    ABMILParams<double> p{MatrixXd::Zero(3, 5), VectorXd::Ones(3)};
    const auto out = abmil_pool(h, p);
    CHECK(out.weights.isApprox(VectorXd::Constant(7, 1.0 / 7.0), 1e-15));
    CHECK(out.pooled.isApprox(mean_pool(h), 1e-14));
  }
  SUBCASE("single instance") {
    ABMILParams<double> p{random_matrix(rng, 4, 5), random_matrix(rng, 4, 1)};
    const auto out = abmil_pool(h.topRows(1), p);
    CHECK(out.weights(0) == 1.0);
    CHECK(out.pooled.isApprox(h.row(0).transpose()));
  }
  SUBCASE("weights form a distribution and the pooling is permutation invariant") {
    for (int trial = 0; trial < 50; ++trial) {
      ABMILParams<double> p{random_matrix(rng, 6, 5, 2.0), random_matrix(rng, 6, 1, 3.0)};
      const auto out = abmil_pool(h, p);
      CHECK((out.weights.array() >= 0.0).all());
      CHECK(std::abs(out.weights.sum() - 1.0) <= 1e-12);
      CHECK(abmil_pool(reverse_rows(h), p).pooled.isApprox(out.pooled, 1e-12));
    }
  }
  SUBCASE("small-scale tanh linearization approaches softmax of the linear score") {
    const VectorXd v = random_matrix(rng, 5, 1);
    const double eps = 1e-3;
    ABMILParams<double> p{eps * v.transpose(), VectorXd::Constant(1, 1.0 / eps)};
    const VectorXd expected = softmax(VectorXd(h * v));
    CHECK((abmil_weights(h, p) - expected).cwiseAbs().maxCoeff() <= 1e-4);
  }
  SUBCASE("shape mismatch") {
    ABMILParams<double> p{MatrixXd::Zero(3, 4), VectorXd::Ones(3)};
    CHECK_THROWS_AS(abmil_pool(h, p), std::invalid_argument);
    ABMILParams<double> q{MatrixXd::Zero(3, 5), VectorXd::Ones(2)};
    CHECK_THROWS_AS(abmil_pool(h, q), std::invalid_argument);
  }
}

TEST_CASE("smoothing solve") {
  std::mt19937_64 rng(3);

  SUBCASE("alpha = 0 is the identity, exactly") {
    const MatrixXd h = random_matrix(rng, 11, 3);
    CHECK(smooth(h, {0.0, {}}) == h);
  }
  SUBCASE("constant columns are fixed points") {
    MatrixXd h(6, 2);
    h.col(0).setConstant(3.25);
    h.col(1).setConstant(-1.5);
    for (double a : {0.1, 0.5, 0.9, 0.999}) CHECK((smooth(h, {a, {}}) - h).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("two instances solved by hand") {
    // (0.5 L + 0.5 I) g = 0.5 h with L = [[1,-1],[-1,1]]  =>  [[1,-.5],[-.5,1]] g = 0.5 h.
    // Cramer's rule: det = 0.75, g = (1/0.75) * [[1,.5],[.5,1]] * (0, 0.5)^T = (1/3, 2/3).
    const MatrixXd h = (MatrixXd(2, 1) << 0.0, 1.0).finished();
    const MatrixXd g = smooth(h, {0.5, {}});
    CHECK(g(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(g(1, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("residual and agreement with a dense solve") {
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Index S = 1 + static_cast<Eigen::Index>(rng() % 40);
      const double alpha = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
      const MatrixXd h = random_matrix(rng, S, 3, 5.0);
      const MatrixXd g = smooth(h, {alpha, {}});
      MatrixXd system = alpha * graph_laplacian(chain_adjacency<double>(S));
      system.diagonal().array() += 1.0 - alpha;
      const double residual = (system * g - (1.0 - alpha) * h).cwiseAbs().maxCoeff();
      CHECK(residual <= 1e-8 * h.cwiseAbs().maxCoeff());
      CHECK((g - oracle::dense_chain_smooth(h, alpha)).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + h.cwiseAbs().maxCoeff()));
    }
  }
  SUBCASE("explicit chain adjacency matches the tridiagonal path") {
    const MatrixXd h = random_matrix(rng, 9, 4);
    const MatrixXd general = smooth(h, SmoothConfig{0.7, chain_adjacency<double>(9)});
    CHECK(general.isApprox(smooth(h, {0.7, {}}), 1e-12));
  }
  SUBCASE("linearity") {
    const MatrixXd h1 = random_matrix(rng, 13, 2), h2 = random_matrix(rng, 13, 2);
    const SmoothConfig cfg{0.6, {}};
    const MatrixXd lhs = smooth(MatrixXd(2.5 * h1 - 1.25 * h2), cfg);
    const MatrixXd rhs = 2.5 * smooth(h1, cfg) - 1.25 * smooth(h2, cfg);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("column variance never grows") {
    auto col_var = [](const MatrixXd& m) {
      return ((m.rowwise() - m.colwise().mean()).array().square().colwise().sum() / m.rows()).eval();
    };
    for (int trial = 0; trial < 100; ++trial) {
      const MatrixXd h = random_matrix(rng, 2 + static_cast<Eigen::Index>(rng() % 30), 3);
      const double alpha = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
      CHECK((col_var(smooth(h, {alpha, {}})) <= col_var(h) + 1e-12).all());
    }
  }
  SUBCASE("order sensitivity") {
    const MatrixXd h = (MatrixXd(3, 1) << 1.0, 0.0, 0.0).finished();
    const MatrixXd permuted = (MatrixXd(3, 1) << 0.0, 1.0, 0.0).finished();
    CHECK_FALSE(max_pool(smooth(h, {0.5, {}})).isApprox(max_pool(smooth(permuted, {0.5, {}}))));
  }
  SUBCASE("alpha outside [0, 1)") {
    const MatrixXd h = MatrixXd::Ones(3, 1);
    CHECK_THROWS_AS(smooth(h, {1.0, {}}), std::invalid_argument);
    CHECK_THROWS_AS(smooth(h, {-0.1, {}}), std::invalid_argument);
  }
}

TEST_CASE("single-head self-attention") {
  std::mt19937_64 rng(4);
  const Eigen::Index M = 4, d = 3;
  auto random_params = [&] {
    return AttnParams<double>{random_matrix(rng, d, M), random_matrix(rng, d, M),
                              random_matrix(rng, d, M), random_matrix(rng, M, 1)};
  };

  SUBCASE("zero queries give uniform attention") {
    AttnParams<double> p = random_params();
    p.W_Q.setZero();
    const MatrixXd h = random_matrix(rng, 6, M);
    const auto out = self_attention_forward(h, p);
    CHECK(out.attention.isApprox(MatrixXd::Constant(7, 7, 1.0 / 7.0), 1e-15));
    MatrixXd x(7, M);
    x << p.class_token.transpose(), h;
    const VectorXd mean_value = (x * p.W_V.transpose()).colwise().mean().transpose();
    CHECK(out.class_output.isApprox(mean_value, 1e-13));
  }
  SUBCASE("single instance gives a 2x2 row-stochastic matrix") {
    const AttnParams<double> p = random_params();
    const MatrixXd h = random_matrix(rng, 1, M);
    const auto out = self_attention_forward(h, p);
    REQUIRE(out.attention.rows() == 2);
    REQUIRE(out.attention.cols() == 2);
    const VectorXd v0 = p.W_V * p.class_token;
    const VectorXd v1 = p.W_V * h.row(0).transpose();
    const double a = out.attention(0, 0);
    CHECK(out.class_output.isApprox(a * v0 + (1.0 - a) * v1, 1e-13));
  }
  SUBCASE("rows sum to one") {
    for (int trial = 0; trial < 50; ++trial) {
      AttnParams<double> p = random_params();
      p.W_Q *= 3.0;
      const auto out = self_attention_forward(random_matrix(rng, 1 + rng() % 20, M), p);
      CHECK((out.attention.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
      CHECK((out.attention.array() >= 0.0).all());
    }
  }
  SUBCASE("without position information the class output ignores instance order") {
    const AttnParams<double> p = random_params();
    const MatrixXd h = random_matrix(rng, 5, M);
    CHECK(self_attention_forward(reverse_rows(h), p).class_output.isApprox(
        self_attention_forward(h, p).class_output, 1e-12));
  }
  SUBCASE("errors") {
    const AttnParams<double> p = random_params();
    CHECK_THROWS_AS(self_attention_forward(MatrixXd(0, M), p), std::invalid_argument);
    CHECK_THROWS_AS(self_attention_forward(random_matrix(rng, 3, M + 1), p), std::invalid_argument);
  }
}

TEST_CASE("convolution over instances") {
  SUBCASE("unit kernel is the identity") {
    std::mt19937_64 rng(5);
    const MatrixXd h = random_matrix(rng, 6, 3);
    CHECK(conv_over_instances(h, VectorXd::Ones(1)) == h);
  }
  SUBCASE("window sum with zero padding") {
    const MatrixXd h = (MatrixXd(5, 1) << 0, 0, 5, 0, 0).finished();
    const MatrixXd out = conv_over_instances(h, VectorXd::Ones(3));
    CHECK(out == (MatrixXd(5, 1) << 0, 5, 5, 5, 0).finished());
  }
  SUBCASE("asymmetric kernel orientation") {
    const MatrixXd h = (MatrixXd(3, 1) << 1, 2, 3).finished();
    const VectorXd k = (VectorXd(3) << 1, 0, 0).finished();  // picks h_{j-1}
    CHECK(conv_over_instances(h, k) == (MatrixXd(3, 1) << 0, 1, 2).finished());
  }
  SUBCASE("matches brute-force windowed sums and is order sensitive") {
    std::mt19937_64 rng(6);
    const MatrixXd h = random_matrix(rng, 12, 2);
    const MatrixXd out = conv_over_instances(h, VectorXd::Ones(3));
    for (Eigen::Index j = 0; j < 12; ++j) {
      for (Eigen::Index m = 0; m < 2; ++m) {
        double s = 0.0;
        for (Eigen::Index t = j - 1; t <= j + 1; ++t)
          if (t >= 0 && t < 12) s += h(t, m);
        CHECK(out(j, m) == doctest::Approx(s).epsilon(1e-14));
      }
    }
    const MatrixXd spike = (MatrixXd(4, 1) << 1, 1, 0, 0).finished();
    const MatrixXd spread = (MatrixXd(4, 1) << 1, 0, 0, 1).finished();
    CHECK(max_pool(conv_over_instances(spike, VectorXd::Ones(3)))(0) !=
          max_pool(conv_over_instances(spread, VectorXd::Ones(3)))(0));
  }
  SUBCASE("errors") {
    const MatrixXd h = MatrixXd::Ones(2, 1);
    CHECK_THROWS_AS(conv_over_instances(h, VectorXd::Ones(2)), std::invalid_argument);
    CHECK_THROWS_AS(conv_over_instances(h, VectorXd::Ones(5)), std::invalid_argument);
    CHECK_NOTHROW(conv_over_instances(h, VectorXd::Ones(3)));
  }
}
