#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "viblstm/rng.hpp"
#include "viblstm/vib_gate.hpp"

using namespace viblstm;

namespace {

/// Exact KL(N(mu, sigma^2) || N(0, xi)).
double gaussian_kl(double mu, double sigma, double xi) {
  const double s2 = sigma * sigma;
  return 0.5 * ((s2 + mu * mu) / xi - 1.0 + std::log(xi / s2));
}

/// Numerically minimize the KL over the prior variance (golden-section over
/// log xi). Independent oracle for the closed-form penalty.
double min_kl_over_prior(double mu, double sigma) {
  const double center = std::log(sigma * sigma + mu * mu);
  double lo = center - 30.0, hi = center + 30.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = gaussian_kl(mu, sigma, std::exp(c));
  double fd = gaussian_kl(mu, sigma, std::exp(d));
  for (int it = 0; it < 200; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = gaussian_kl(mu, sigma, std::exp(c));
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = gaussian_kl(mu, sigma, std::exp(d));
    }
  }
  return gaussian_kl(mu, sigma, std::exp(0.5 * (lo + hi)));
}

}  // namespace

TEST_CASE("deterministic mask is the mean") {
  VibGate gate(Tensor::from_vector({0.3, -1.2}), Tensor::from_vector({0.0, 0.0}));
  SeededRng rng(1);
  const Tensor z = sample_mask(gate, rng, MaskMode::Deterministic);
  CHECK(z.at(0) == 0.3);
  CHECK(z.at(1) == -1.2);
}

TEST_CASE("stochastic mask with zero noise is the mean") {
  VibGate gate = VibGate::with_sigma(Tensor::from_vector({0.5, 2.0, -0.1}), 0.7);
  const Tensor z = mask_with_noise(gate, Tensor({3}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(z.at(i) == gate.mu.at(i));
}

TEST_CASE("stochastic mask sample moments") {
  VibGate gate = VibGate::with_sigma(Tensor::from_vector({1.0}), 0.5);
  SeededRng rng(77);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_mask(gate, rng, MaskMode::Stochastic).at(0);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(sd - 0.5) < 0.01);
}

TEST_CASE("kl penalty closed form") {
  SUBCASE("zero mean gives zero for any sigma") {
    VibGate gate = VibGate::with_sigma(Tensor({4}), 0.37);
    CHECK(kl_penalty(gate) == 0.0);
  }
  SUBCASE("mu equal to sigma gives ln 2 per element") {
    Tensor mu = Tensor::from_vector({0.6, 0.6, 0.6});
    VibGate gate = VibGate::with_sigma(std::move(mu), 0.6);
    CHECK(kl_penalty(gate) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("equals twice the minimized exact gaussian KL") {
    SeededRng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const double mu = rng.uniform(-3.0, 3.0);
      const double sigma = rng.uniform(0.05, 2.0);
      VibGate gate(Tensor::from_vector({mu}), Tensor::from_vector({softplus_inverse(sigma)}));
      const double closed = kl_penalty(gate);
      const double oracle = 2.0 * min_kl_over_prior(mu, sigma);
      CHECK(closed == doctest::Approx(oracle).epsilon(1e-6));
    }
  }
}

TEST_CASE("kl penalty is nonnegative, zero only at zero mean, monotone in the ratio") {
  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor mu({3}), rho({3});
    for (std::size_t i = 0; i < 3; ++i) mu.at(i) = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < 3; ++i) rho.at(i) = rng.uniform(-3.0, 1.0);
    VibGate gate(mu, rho);
    CHECK(kl_penalty(gate) >= 0.0);
    // Scaling one mean up increases the penalty.
    VibGate bigger = gate;
    bigger.mu.at(0) = 2.0 * gate.mu.at(0) + (gate.mu.at(0) == 0.0 ? 1.0 : 0.0);
    CHECK(kl_penalty(bigger) > kl_penalty(gate) - 1e-15);
  }
}

TEST_CASE("relevance ratio") {
  SUBCASE("worked example") {
    VibGate gate(Tensor::from_vector({2.0}), Tensor::from_vector({softplus_inverse(0.5)}));
    CHECK(relevance_ratio(gate).at(0) == doctest::Approx(16.0).epsilon(1e-12));
  }
  SUBCASE("zero mean gives zero ratio") {
    VibGate gate = VibGate::with_sigma(Tensor({2}), 0.3);
    CHECK(relevance_ratio(gate).at(0) == 0.0);
  }
  SUBCASE("invariant under joint scaling of mu and sigma") {
    const double mu = 0.8, sigma = 0.25;
    for (double c : {0.5, 2.0, 7.0}) {
      VibGate base(Tensor::from_vector({mu}), Tensor::from_vector({softplus_inverse(sigma)}));
      VibGate scaled(Tensor::from_vector({c * mu}),
                     Tensor::from_vector({softplus_inverse(c * sigma)}));
      CHECK(relevance_ratio(scaled).at(0) ==
            doctest::Approx(relevance_ratio(base).at(0)).epsilon(1e-9));
    }
  }
}

TEST_CASE("retained indices") {
  // alpha = (1e-6, 5.0, 0.02) via mu = sigma * sqrt(alpha), sigma = 1.
  Tensor mu = Tensor::from_vector({1e-3, std::sqrt(5.0), std::sqrt(0.02)});
  VibGate gate = VibGate::with_sigma(std::move(mu), 1.0);

  CHECK(retained_indices(gate, 0.01) == std::vector<int>{1, 2});
  CHECK(retained_indices(gate, 100.0).empty());
  CHECK(retained_indices(gate, 1e-12) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(retained_indices(gate, 0.0), std::invalid_argument);

  SUBCASE("monotone in threshold") {
    SeededRng rng(9);
    VibGate random_gate(gaussian(rng, {8}), gaussian(rng, {8}));
    const auto loose = retained_indices(random_gate, 0.001);
    const auto tight = retained_indices(random_gate, 0.1);
    for (int idx : tight) {
      CHECK(std::find(loose.begin(), loose.end(), idx) != loose.end());
    }
  }
}

TEST_CASE("deterministic mask equals the stochastic mean in expectation") {
  VibGate gate(Tensor::from_vector({0.4, -0.9}),
               Tensor::from_vector({softplus_inverse(0.3), softplus_inverse(0.8)}));
  SeededRng rng(13);
  const int n = 100000;
  Tensor mean({2});
  for (int i = 0; i < n; ++i) {
    const Tensor z = sample_mask(gate, rng, MaskMode::Stochastic);
    mean.at(0) += z.at(0);
    mean.at(1) += z.at(1);
  }
  const Tensor sigma = gate.sigma();
  for (std::size_t j = 0; j < 2; ++j) {
    const double tol = 3.0 * sigma.at(j) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean.at(j) / n - gate.mu.at(j)) < tol);
  }
}
