#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "condest/design.hpp"

using namespace condest;

TEST_CASE("decision rule") {
  const TwoStageDesign d = oracle::standard_design();
  auto dec = decide(d, 1.0);
  CHECK(dec.r == Outcome::increase);
  CHECK(dec.n_total == 150);
  CHECK(dec.n2 == 100);

  dec = decide(d, 0.9);
  CHECK(dec.r == Outcome::futility);
  CHECK(dec.n_total == 50);
  CHECK(dec.n2 == 0);

  dec = decide(d, 1.3);
  CHECK(dec.r == Outcome::original);
  CHECK(dec.n_total == 100);

  // Y1 = c2 still increases the sample size
  CHECK(decide(d, 1.2).r == Outcome::increase);
  CHECK(decide(d, std::nextafter(1.2, 2.0)).r == Outcome::original);
  CHECK(decide(d, std::nextafter(0.9, 2.0)).r == Outcome::increase);
}

TEST_CASE("infinite cut points") {
  TwoStageDesign d = oracle::standard_design();
  d.c1 = ExtendedReal::neg_inf();
  CHECK(decide(d, -1e300).r == Outcome::increase);
  d.c2 = ExtendedReal::pos_inf();
  CHECK(decide(d, 1e300).r == Outcome::increase);
  CHECK_NOTHROW(d.validate());
  const auto iv = conditioning_interval(d, Outcome::increase);
  CHECK(iv.lo == -kInf);
  CHECK(iv.hi == kInf);
}

TEST_CASE("design validation") {
  const TwoStageDesign good = oracle::standard_design();
  CHECK_NOTHROW(good.validate());
  auto bad = good;
  bad.n1 = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.nf = 10;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.n0 = 150;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.n0 = 40;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.c2 = 0.9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(outcome_from_int(3), std::invalid_argument);
  CHECK(outcome_from_int(2) == Outcome::original);
}

TEST_CASE("stage sigmas") {
  const TwoStageDesign s = oracle::schizophrenia_design();
  const auto sig = stage_sigmas(s, decision_for(s, Outcome::original));
  CHECK(sig.sigma1 == doctest::Approx(2.0 / std::sqrt(45.0)).epsilon(1e-15));
  CHECK(sig.sigma2 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::round(sig.sigmaA * sig.sigmaA * 1e4) / 1e4 == doctest::Approx(0.0233));
  CHECK(std::round(sig.sigmaB * sig.sigmaB * 1e4) / 1e4 == doctest::Approx(0.1844));

  const TwoStageDesign f = oracle::standard_design();
  const auto s1 = stage_sigmas(f, decision_for(f, Outcome::increase));
  CHECK(s1.sigma0 == doctest::Approx(1.0 / std::sqrt(150.0)).epsilon(1e-15));
  CHECK(s1.sigma1 == doctest::Approx(1.0 / std::sqrt(50.0)).epsilon(1e-15));
  CHECK(s1.sigma2 == doctest::Approx(0.1).epsilon(1e-15));

  CHECK_THROWS_AS(stage_sigmas(f, decision_for(f, Outcome::futility)), std::invalid_argument);

  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> n(2, 200);
  std::uniform_real_distribution<double> sd(0.1, 5.0);
  for (int i = 0; i < 20; ++i) {
    TwoStageDesign d;
    d.n1 = n(gen);
    d.nf = d.n1;
    d.n0 = d.n1 + n(gen);
    d.nmax = d.n0 + n(gen);
    d.c1 = -0.5;
    d.c2 = 0.5;
    d.sigma = sd(gen);
    for (Outcome r : {Outcome::increase, Outcome::original}) {
      const auto dec = decision_for(d, r);
      const auto st = stage_sigmas(d, dec);
      CHECK(st.sigmaA / st.sigmaB ==
            doctest::Approx(static_cast<double>(dec.n_total - d.n1) / d.n1).epsilon(1e-12));
      CHECK(st.sigma0 * st.sigma0 == doctest::Approx(st.sigmaA * st.sigmaB).epsilon(1e-12));
    }
  }
}

TEST_CASE("conditioning intervals") {
  const TwoStageDesign d = oracle::standard_design();
  auto iv = conditioning_interval(d, Outcome::futility);
  CHECK(iv.lo == -kInf);
  CHECK(iv.hi == 0.9);
  iv = conditioning_interval(d, Outcome::increase);
  CHECK(iv.lo == 0.9);
  CHECK(iv.hi == 1.2);
  iv = conditioning_interval(d, Outcome::original);
  CHECK(iv.lo == 1.2);
  CHECK(iv.hi == kInf);
  CHECK(describe(d) == "n1=50 nf=50 n0=100 nmax=150 c1=0.9 c2=1.2 sigma=1");
}
