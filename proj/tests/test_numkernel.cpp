#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "condest/numkernel.hpp"

using namespace condest;
using oracle::Big;

TEST_CASE("ExtendedReal parsing and ordering") {
  CHECK(ExtendedReal::parse("inf").value() == kInf);
  CHECK(ExtendedReal::parse("+INF").value() == kInf);
  CHECK(ExtendedReal::parse("-inf").value() == -kInf);
  CHECK(ExtendedReal::parse("0.9").value() == 0.9);
  CHECK(ExtendedReal::parse("-1e-3").value() == -1e-3);
  CHECK_THROWS_AS(ExtendedReal::parse("abc"), std::invalid_argument);
  CHECK_THROWS_AS(ExtendedReal::parse("1.2x"), std::invalid_argument);
  CHECK_THROWS_AS(ExtendedReal(std::nan("")), std::invalid_argument);
  CHECK(ExtendedReal::neg_inf() < ExtendedReal(-1e300));
  CHECK(ExtendedReal(1e300) < ExtendedReal::pos_inf());
  CHECK(ExtendedReal::neg_inf().to_string() == "-inf");
  CHECK(ExtendedReal(0.9).to_string() == "0.9");
  CHECK_FALSE(ExtendedReal::pos_inf().is_finite());
}

TEST_CASE("normal distribution functions") {
  CHECK(Phi(0.0) == doctest::Approx(0.5).epsilon(1e-16));
  for (double x : {0.5, 1.0, 3.0}) CHECK(Phi(-x) + Phi(x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(Phi(-kInf) == 0.0);
  CHECK(Phi(kInf) == 1.0);
  CHECK(phi(kInf) == 0.0);

  // absolute error of Phi on |x| <= 8 against 50-digit erfc
  double worst = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double ref = static_cast<double>(oracle::big_Phi(Big(x)));
    worst = std::max(worst, std::abs(Phi(x) - ref));
  }
  CHECK(worst <= 1e-14);

  // c2 of the schizophrenia example
  CHECK(std::round(Phi_inv(1.0 - 0.004455 / 2.0) * std::sqrt(4.0 / 45.0) * 1000.0) / 1000.0 ==
        doctest::Approx(0.848));
  for (double p : {1e-12, 0.01, 0.3, 0.5, 0.77, 0.999999}) CHECK(Phi(Phi_inv(p)) == doctest::Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(Phi_inv(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Phi_inv(1.0), std::invalid_argument);
  CHECK_THROWS_AS(Phi_inv(-0.1), std::invalid_argument);
}

TEST_CASE("log_Phi and log_Phi_diff in the tails") {
  for (double x : {-300.0, -60.0, -31.0, -29.0, -5.0, 0.0, 4.0, 9.0}) {
    const double ref = static_cast<double>(boost::multiprecision::log(oracle::big_Phi(Big(x))));
    CHECK(log_Phi(x) == doctest::Approx(ref).epsilon(1e-12));
  }
  struct Pair {
    double hi, lo;
  };
  for (Pair p : {Pair{40.0, 39.0}, Pair{-39.0, -40.0}, Pair{0.1, -0.1}, Pair{12.0, 11.5}, Pair{-7.0, -9.0}}) {
    const double ref =
        static_cast<double>(boost::multiprecision::log(oracle::big_Phi_diff(Big(p.hi), Big(p.lo))));
    CHECK(log_Phi_diff(p.hi, p.lo) == doctest::Approx(ref).epsilon(1e-11));
  }
  CHECK(Phi_diff(37.0, 36.5) > 0.0);
  CHECK(Phi_diff(9.0, 8.5) == doctest::Approx(static_cast<double>(oracle::big_Phi_diff(Big(9), Big(8.5)))).epsilon(1e-13));
}

TEST_CASE("mills ratio") {
  CHECK(mills(0.0) == doctest::Approx(0.7978845608).epsilon(1e-10));
  CHECK(mills(8.0) == doctest::Approx(phi(8.0)).epsilon(1e-12));
  const double ref40 = static_cast<double>(oracle::big_phi(Big(-40)) / oracle::big_Phi(Big(-40)));
  CHECK(mills(-40.0) == doctest::Approx(ref40).epsilon(1e-10));
  const double ref400 = static_cast<double>(oracle::big_phi(Big(-400)) / oracle::big_Phi(Big(-400)));
  CHECK(mills(-400.0) == doctest::Approx(ref400).epsilon(1e-10));
  CHECK(std::isfinite(mills(400.0)));
  CHECK(mills(400.0) >= 0.0);

  // phi / Phi falls monotonically in x
  double prev = kInf;
  for (double x = -40.0; x <= 30.0; x += 0.05) {
    const double m = mills(x);
    CHECK(m > 0.0);
    CHECK(m < prev);
    prev = m;
  }
  for (double x = -30.0; x <= 30.0; x += 0.25) {
    const double lhs = mills(x) * Phi(x);
    CHECK(lhs == doctest::Approx(phi(x)).epsilon(1e-12));
  }
}

TEST_CASE("ratio_dd") {
  for (double a : {0.1, 1.0, 5.0, 40.0}) CHECK(std::abs(ratio_dd(a, -a)) < 1e-14);
  for (double z2 : {-3.0, 0.0, 2.0, 35.0}) {
    const double ref = static_cast<double>(-oracle::big_phi(Big(z2)) / oracle::big_Phi(-Big(z2)));
    CHECK(ratio_dd(kInf, z2) == doctest::Approx(ref).epsilon(1e-11));
  }
  {
    const Big z1(30), z2(29);
    const double ref =
        static_cast<double>((oracle::big_phi(z1) - oracle::big_phi(z2)) / oracle::big_Phi_diff(z1, z2));
    CHECK(ratio_dd(30.0, 29.0) == doctest::Approx(ref).epsilon(1e-8));
  }
  CHECK_THROWS_AS(ratio_dd(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ratio_dd(0.0, 1.0), std::invalid_argument);

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (int i = 0; i < 500; ++i) {
    double z1 = u(gen), z2 = u(gen);
    if (z1 == z2) continue;
    if (z1 < z2) std::swap(z1, z2);
    CHECK(ratio_dd(-z2, -z1) == doctest::Approx(-ratio_dd(z1, z2)).epsilon(1e-10));
  }
}

TEST_CASE("truncated moments against extended precision") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-45.0, 45.0);
  std::uniform_real_distribution<double> w(1e-3, 6.0);
  for (int i = 0; i < 300; ++i) {
    const double lo = u(gen);
    const double hi = lo + w(gen);
    const auto m = truncated_moments(lo, hi);
    const auto ref = oracle::big_truncated_moments(Big(lo), Big(hi));
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    CHECK(m.m1 == doctest::Approx(static_cast<double>(ref.m1)).epsilon(1e-9));
    CHECK(m.m2 == doctest::Approx(static_cast<double>(ref.m2)).epsilon(1e-9 * scale));
    const double var_ref = static_cast<double>(ref.m2 - ref.m1 * ref.m1);
    CHECK(m.variance() == doctest::Approx(var_ref).epsilon(1e-6).scale(1e-8));
  }
}

TEST_CASE("trunc_norm_var_factor") {
  CHECK(trunc_norm_var_factor(ExtendedReal::neg_inf(), ExtendedReal::pos_inf()) == 1.0);
  CHECK(trunc_norm_var_factor(0.0, ExtendedReal::pos_inf()) ==
        doctest::Approx(1.0 - 2.0 / std::acos(-1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(trunc_norm_var_factor(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(trunc_norm_var_factor(2.0, 1.0), std::invalid_argument);

  auto quad_var = [](double b1, double b2) {
    auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::acos(-1.0)); };
    const double mass = oracle::quad(pdf, b1, b2);
    const double mean = oracle::quad([&](double t) { return t * pdf(t); }, b1, b2) / mass;
    return oracle::quad([&](double t) { return (t - mean) * (t - mean) * pdf(t); }, b1, b2) / mass;
  };
  const double v = trunc_norm_var_factor(-1.0, 1.0);
  CHECK(v < 1.0);
  CHECK(v == doctest::Approx(quad_var(-1.0, 1.0)).epsilon(1e-8));

  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  std::bernoulli_distribution open(0.15);
  for (int i = 0; i < 100; ++i) {
    double b1 = u(gen), b2 = u(gen);
    if (b1 > b2) std::swap(b1, b2);
    if (b2 - b1 < 1e-3) b2 = b1 + 1e-3;
    if (open(gen)) b1 = -kInf;
    if (open(gen)) b2 = kInf;
    const double value = trunc_norm_var_factor(b1, b2);
    CHECK(value > 0.0);
    CHECK(value <= 1.0);
    const double ref =
        quad_var(std::isinf(b1) ? -40.0 : b1, std::isinf(b2) ? 40.0 : b2);
    CHECK(value == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("integrate") {
  auto pdf = [](double y) { return phi(y); };
  CHECK(std::abs(integrate(pdf, ExtendedReal::neg_inf(), ExtendedReal::pos_inf(), 1e-10) - 1.0) <= 1e-10);
  CHECK(std::abs(integrate(pdf, ExtendedReal::neg_inf(), 0.0, 1e-10) - 0.5) <= 1e-10);
  CHECK(std::abs(integrate([](double y) { return y * phi(y); }, 0.0, ExtendedReal::pos_inf(), 1e-10) - phi(0.0)) <=
        1e-10);
  // a narrow Gaussian far from the origin, located with the support hint
  auto narrow = [](double y) { return phi((y - 50.0) / 0.01) / 0.01; };
  CHECK(std::abs(integrate(narrow, ExtendedReal::neg_inf(), ExtendedReal::pos_inf(), 1e-10,
                           GaussianSupport{50.0, 0.01}) -
                 1.0) <= 1e-10);
  CHECK(integrate(pdf, 1.0, 1.0) == 0.0);
  CHECK(integrate(pdf, 1.0, 0.0) == doctest::Approx(-(Phi(1.0) - 0.5)).epsilon(1e-12));
  const auto detail = integrate_detailed(pdf, -1.0, 2.0, 1e-12);
  CHECK(detail.error <= 1e-12);
  CHECK(detail.value == doctest::Approx(Phi(2.0) - Phi(-1.0)).epsilon(1e-13));
  CHECK_THROWS_AS(integrate([](double y) { return std::sin(1e5 * y); }, 0.0, 1000.0, 1e-13), NumericalError);
}

TEST_CASE("solve_root") {
  auto r1 = solve_root([](double x) { return x - 2.0; }, {0.0, 5.0});
  CHECK(r1.root == doctest::Approx(2.0).epsilon(1e-12));
  auto r2 = solve_root([](double x) { return Phi(x) - 0.5; }, {-1.0, 1.0});
  CHECK(std::abs(r2.root) < 1e-10);
  auto f3 = [](double x) { return mills(x) - 1.0; };
  auto r3 = solve_root(f3, {-1.0, 1.0});
  CHECK(std::abs(f3(r3.root)) < 1e-12);
  CHECK(r3.bracket.hi - r3.bracket.lo <= 1e-10);
  CHECK_THROWS_AS(solve_root([](double x) { return x * x + 1.0; }, {-1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(solve_root([](double x) { return x; }, {1.0, -1.0}), std::invalid_argument);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double target = u(gen);
    const Bracket b{target - 1.0 - std::abs(u(gen)), target + 0.5 + std::abs(u(gen))};
    auto f = [target](double x) { return std::tanh(x - target); };
    const auto r = solve_root(f, b);
    CHECK(r.root >= b.lo);
    CHECK(r.root <= b.hi);
    CHECK(r.root == doctest::Approx(target).epsilon(1e-9));
  }
  // deterministic
  CHECK(solve_root(f3, {-1.0, 1.0}).root == r3.root);
}

TEST_CASE("expand_bracket") {
  auto f = [](double x) { return 7.3 - x; };
  const auto b = expand_bracket(f, 0.0, 1.0, 100.0);
  REQUIRE(b.has_value());
  CHECK(b->lo <= 7.3);
  CHECK(b->hi >= 7.3);
  CHECK_FALSE(expand_bracket([](double) { return 1.0; }, 0.0, 1.0, 64.0).has_value());
}
